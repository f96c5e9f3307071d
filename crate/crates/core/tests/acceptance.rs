//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::time::Instant;

use dmfem::analysis::{
    convergence_rates, run_study, ConvergenceRecord, DegenerationMode, Scheme, StudyConfig,
};
use dmfem::assembly::{assemble_stiffness, local_mass, local_stiffness, DofMap};
use dmfem::mesh::{degenerate_squares, select_degenerate_squares, Cell, Mesh, Patch, Point2};
use dmfem::quadrature::rule;
use dmfem::solver::dense_reference::symmetric_eigenvalues;
use dmfem::solver::{condition_estimate, SpectralOptions};
use dmfem::stabilized::{
    assemble_stabilized_jump_form, assemble_stabilized_operator_form, extension_operator,
    PatchCoefficients,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LADDER: [usize; 5] = [16, 27, 44, 73, 121];
const DENSE_LADDER: [usize; 5] = [9, 18, 36, 63, 108];
const SLIVERS: usize = 10;
const SEED: u64 = 1;

type Oracle = fn() -> Result<(), String>;

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn report(id: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, pass, detail }
}

fn config(scheme: Scheme, ladder: &[usize], mode: DegenerationMode, kappa: bool) -> StudyConfig {
    StudyConfig {
        scheme,
        ladder: ladder.to_vec(),
        degeneration: mode,
        estimate_conditioning: kappa,
        ..StudyConfig::default()
    }
}

fn slope(records: &[ConvergenceRecord], col: impl Fn(&ConvergenceRecord) -> f64) -> f64 {
    let h: Vec<f64> = records.iter().map(|r| r.h).collect();
    let e: Vec<f64> = records.iter().map(col).collect();
    convergence_rates(&h, &e)
        .ok()
        .and_then(|r| r.least_squares)
        .unwrap_or(f64::NAN)
}

fn within_factor(x: f64, target: f64, factor: f64) -> bool {
    x >= target / factor && x <= target * factor
}

fn in_range(x: f64, lo: f64, hi: f64) -> bool {
    x >= lo && x <= hi
}

fn ladder_meshes(ladder: &[usize]) -> Vec<(Mesh, Vec<Patch>)> {
    ladder
        .iter()
        .map(|&n| {
            let m = Mesh::uniform_unit_square(n).unwrap();
            let sq = select_degenerate_squares(n, SLIVERS, SEED).unwrap();
            degenerate_squares(&m, &sq, m.h() * m.h()).unwrap()
        })
        .collect()
}

fn criterion_1_2(std: &[ConvergenceRecord], secs: f64) -> Vec<Outcome> {
    let l2 = slope(std, |r| r.l2_err);
    let h1 = slope(std, |r| r.h1_err);
    let c1 = in_range(l2, 1.85, 2.15) && in_range(h1, 0.9, 1.1) && secs < 60.0;
    let k = slope(std, |r| r.kappa.unwrap_or(f64::NAN));
    let kh2 = std[0].kappa_h2.unwrap_or(f64::NAN);
    let c2 = k <= -2.7 && within_factor(kh2, 1.53, 3.0);
    vec![
        report("1", c1, format!("standard L2 slope {l2:.4} in [1.85, 2.15], H1 slope {h1:.4} in [0.9, 1.1], {secs:.1} s")),
        report("2", c2, format!("standard kappa slope {k:.4} <= -2.7, kappa h^2 at h=1/16 {kh2:.4} within x3 of 1.53")),
    ]
}

fn criterion_3_4(stab: &[ConvergenceRecord], secs: f64) -> Vec<Outcome> {
    let kh2: Vec<f64> = stab
        .iter()
        .map(|r| r.kappa_h2.unwrap_or(f64::NAN))
        .collect();
    let lo = kh2.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = kh2.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let c3 = hi / lo <= 2.0 && kh2.iter().all(|&v| within_factor(v, 0.42, 2.0));
    let l2 = slope(stab, |r| r.l2_err);
    let post = slope(stab, |r| r.h1_err_post.unwrap_or(f64::NAN));
    let raw = slope(stab, |r| r.h1_err);
    let c4 = in_range(l2, 1.85, 2.15) && in_range(post, 0.9, 1.1) && raw <= 0.75 && secs < 90.0;
    vec![
        report("3", c3, format!("stabilized kappa h^2 in [{lo:.4}, {hi:.4}], spread {:.3} <= 2, all within x2 of 0.42", hi / lo)),
        report("4", c4, format!("stabilized L2 slope {l2:.4}, post-processed H1 slope {post:.4}, raw H1 slope {raw:.4} <= 0.75, {secs:.1} s")),
    ]
}

fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    for (m, patches) in ladder_meshes(&LADDER) {
        let e = extension_operator(&m, &patches).unwrap();
        let op = assemble_stabilized_operator_form(&m, &patches, &e).unwrap();
        let jump = assemble_stabilized_jump_form(&m, &patches).unwrap();
        worst = worst.max(op.max_abs_diff(&jump) / jump.max_abs());
    }
    report(
        "5",
        worst <= 1e-10,
        format!("operator vs jump form, worst relative max-norm difference {worst:.3e} <= 1e-10"),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let std = run_study(&config(
        Scheme::Standard,
        &DENSE_LADDER,
        DegenerationMode::Dense,
        false,
    ))
    .unwrap();
    let stab = run_study(&config(
        Scheme::Stabilized,
        &DENSE_LADDER,
        DegenerationMode::Dense,
        false,
    ))
    .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let l2 = slope(&std, |r| r.l2_err);
    let a = stab[stab.len() - 2].l2_err;
    let b = stab[stab.len() - 1].l2_err;
    let rel = (a - b).abs() / b;
    let pass =
        in_range(l2, 1.85, 2.15) && rel < 0.1 && within_factor(b, 4.7e-3, 3.0) && secs < 120.0;
    let plateau: Vec<String> = stab.iter().map(|r| format!("{:.3e}", r.l2_err)).collect();
    report("6", pass, format!(
        "dense: standard L2 slope {l2:.4}; stabilized L2 [{}], last two differ by {:.2}% (< 10%), finest {b:.3e} within x3 of 4.7e-3, {secs:.1} s",
        plateau.join(", "), 100.0 * rel
    ))
}

fn oracle_a() -> Result<(), String> {
    let opts = SpectralOptions::default();
    for (n, count) in [(12, 1), (15, 2)] {
        let m = Mesh::uniform_unit_square(n).unwrap();
        let sq = select_degenerate_squares(n, count, 4).unwrap();
        let (m, patches) = degenerate_squares(&m, &sq, m.h() * m.h()).unwrap();
        let dofs = DofMap::new(&m);
        for a in [
            assemble_stiffness(&m).unwrap(),
            assemble_stabilized_jump_form(&m, &patches).unwrap(),
        ] {
            let r = a.principal_submatrix(&dofs.interior_of_full);
            if r.dim() > 200 {
                return Err(format!("dimension {} above 200", r.dim()));
            }
            let eig = symmetric_eigenvalues(&r.to_dense());
            let est = condition_estimate(&r, &opts).map_err(|e| e.to_string())?;
            let dmin = (est.lambda_min.value - eig[0]).abs() / eig[0];
            let dmax = (est.lambda_max.value - eig[eig.len() - 1]).abs() / eig[eig.len() - 1];
            if dmin > 1e-6 || dmax > 1e-6 {
                return Err(format!("n={n}: relative errors {dmin:.2e}, {dmax:.2e}"));
            }
        }
    }
    Ok(())
}

fn oracle_b() -> Result<(), String> {
    // right triangle with legs a, b: stiffness and mass in closed form
    let (a, b) = (0.7, 0.3);
    let m = Mesh::new(
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(a, 0.0),
            Point2::new(0.0, b),
        ],
        vec![Cell { v: [0, 1, 2] }],
        vec![false; 3],
        1.0,
    )
    .map_err(|e| e.to_string())?;
    let area = a * b / 2.0;
    let (ra, rb) = (b / (2.0 * a), a / (2.0 * b));
    let k = [[ra + rb, -ra, -rb], [-ra, ra, 0.0], [-rb, 0.0, rb]];
    let mass = [
        [area / 6.0, area / 12.0, area / 12.0],
        [area / 12.0, area / 6.0, area / 12.0],
        [area / 12.0, area / 12.0, area / 6.0],
    ];
    let ks = local_stiffness(&m, 0).map_err(|e| e.to_string())?;
    let ms = local_mass(&m, 0).map_err(|e| e.to_string())?;
    for i in 0..3 {
        for j in 0..3 {
            if (ks[i][j] - k[i][j]).abs() > 1e-14 || (ms[i][j] - mass[i][j]).abs() > 1e-16 {
                return Err(format!("entry ({i}, {j}) differs"));
            }
        }
    }
    Ok(())
}

fn oracle_c() -> Result<(), String> {
    let fact = |k: usize| (1..=k).map(|x| x as f64).product::<f64>();
    for degree in [1, 2, 4, 5] {
        let r = rule(degree).map_err(|e| e.to_string())?;
        for p in 0..=degree {
            for q in 0..=degree - p {
                let exact = fact(p) * fact(q) / fact(p + q + 2);
                let got = r.integrate_reference(|x, y| x.powi(p as i32) * y.powi(q as i32));
                if (got - exact).abs() > 1e-15 {
                    return Err(format!("degree {degree}, x^{p} y^{q}: {got} vs {exact}"));
                }
            }
        }
    }
    Ok(())
}

fn oracle_d() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (m, patches) in ladder_meshes(&LADDER[..3]) {
        let e = extension_operator(&m, &patches).map_err(|e| e.to_string())?;
        if e.matrix().matmul(e.matrix()).max_abs_diff(e.matrix()) > 1e-12 {
            return Err("E^2 != E".into());
        }
        let (c0, c1, c2): (f64, f64, f64) = (
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let g: Vec<f64> = m
            .vertices()
            .iter()
            .map(|p| c0 + c1 * p.x + c2 * p.y)
            .collect();
        let diff = e
            .apply(&g)
            .iter()
            .zip(&g)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if diff > 1e-12 {
            return Err(format!("affine field changed by {diff:e}"));
        }
    }
    Ok(())
}

fn oracle_e() -> Result<(), String> {
    let r = rule(2).map_err(|e| e.to_string())?;
    for (m, patches) in ladder_meshes(&LADDER) {
        for p in &patches {
            // distance to the facet line squared, integrated over the sliver
            let fv = p.facet_vertices(&m);
            let (a, b) = (m.vertex(fv[0]), m.vertex(fv[1]));
            let len = a.dist(b);
            // quadrature points relative to the first facet vertex
            let tri = m.cell_points(p.deg_cell);
            let area = m.cell_area(p.deg_cell);
            let moment: f64 = r
                .points
                .iter()
                .zip(r.weights)
                .map(|(l, w)| {
                    let x = l
                        .iter()
                        .zip(&tri)
                        .map(|(li, v)| li * (v.x - a.x))
                        .sum::<f64>();
                    let y = l
                        .iter()
                        .zip(&tri)
                        .map(|(li, v)| li * (v.y - a.y))
                        .sum::<f64>();
                    let d = ((b.x - a.x) * y - (b.y - a.y) * x) / len;
                    w * area * d * d
                })
                .sum();
            let c = PatchCoefficients::new(&m, p);
            let lhs = c.penalty_coef * p.h_p * p.h_p;
            if (lhs - moment).abs() > 1e-12 * moment {
                return Err(format!(
                    "n={}: {lhs:e} vs {moment:e}",
                    m.grid_size().unwrap_or(0)
                ));
            }
        }
    }
    Ok(())
}

fn oracle_f() -> Result<(), String> {
    for n in [4, 9, 16, 27] {
        let m = Mesh::uniform_unit_square(n).unwrap();
        let a = assemble_stiffness(&m).map_err(|e| e.to_string())?;
        let e = extension_operator(&m, &[]).map_err(|e| e.to_string())?;
        if assemble_stabilized_jump_form(&m, &[]).map_err(|e| e.to_string())? != a
            || assemble_stabilized_operator_form(&m, &[], &e).map_err(|e| e.to_string())? != a
        {
            return Err(format!("n={n}: matrices differ"));
        }
    }
    Ok(())
}

fn criterion_7() -> Outcome {
    let suites: [(&str, Oracle); 6] = [
        ("a", oracle_a),
        ("b", oracle_b),
        ("c", oracle_c),
        ("d", oracle_d),
        ("e", oracle_e),
        ("f", oracle_f),
    ];
    let mut failed = Vec::new();
    for (name, f) in suites {
        if let Err(msg) = f() {
            failed.push(format!("({name}) {msg}"));
        }
    }
    let detail = if failed.is_empty() {
        "oracle suites (a)-(f) all pass".to_string()
    } else {
        format!("failing suites: {}", failed.join("; "))
    };
    report("7", failed.is_empty(), detail)
}

fn main() {
    let mut outcomes = Vec::new();

    let start = Instant::now();
    let std = run_study(&config(
        Scheme::Standard,
        &LADDER,
        DegenerationMode::Count {
            count: SLIVERS,
            seed: SEED,
        },
        true,
    ))
    .unwrap();
    let std_secs = start.elapsed().as_secs_f64();
    outcomes.extend(criterion_1_2(&std, std_secs));

    let start = Instant::now();
    let stab = run_study(&config(
        Scheme::Stabilized,
        &LADDER,
        DegenerationMode::Count {
            count: SLIVERS,
            seed: SEED,
        },
        true,
    ))
    .unwrap();
    let stab_secs = start.elapsed().as_secs_f64();
    outcomes.extend(criterion_3_4(&stab, stab_secs));

    outcomes.push(criterion_5());
    outcomes.push(criterion_6());
    outcomes.push(criterion_7());

    for (name, recs) in [("standard", &std), ("stabilized", &stab)] {
        for r in recs.iter() {
            println!(
                "  {name:>10} n={:>4} l2={:.4e} h1={:.4e} post={} kappa_h2={}",
                r.n,
                r.l2_err,
                r.h1_err,
                r.h1_err_post
                    .map(|v| format!("{v:.4e}"))
                    .unwrap_or_else(|| "-".into()),
                r.kappa_h2
                    .map(|v| format!("{v:.4}"))
                    .unwrap_or_else(|| "-".into()),
            );
        }
    }
    let mut failures = 0;
    for o in &outcomes {
        println!(
            "criterion {}: {} | {}",
            o.id,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failures += usize::from(!o.pass);
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
