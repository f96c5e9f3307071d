use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use super::{h1_seminorm_error, l2_error, ManufacturedProblem};
use crate::assembly::{apply_dirichlet, assemble_load, assemble_stiffness, DofMap};
use crate::error::{Error, Result};
use crate::field::PiecewiseLinearField;
use crate::mesh::{
    degenerate_squares, dense_degenerate_pattern, select_degenerate_squares, validate_assumptions,
    Mesh, Patch, DEFAULT_C0, DEFAULT_MAX_EXTENDED,
};
use crate::quadrature::rule;
use crate::solver::{cg_solve, condition_estimate, CgOptions, SkylineCholesky, SpectralOptions};
use crate::sparse::CsrMatrix;
use crate::stabilized::{
    assemble_stabilized_jump_form, extension_operator, postprocess_extend, ExtensionOperator,
};

pub const DEFAULT_LADDER: [usize; 6] = [16, 27, 44, 73, 121, 200];
pub const DEFAULT_DENSE_LADDER: [usize; 6] = [9, 18, 36, 63, 108, 180];
/// Conditioning is skipped above this `n` unless the config raises it.
pub const DEFAULT_KAPPA_MAX_N: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Standard,
    Stabilized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DegenerationMode {
    None,
    Count {
        count: usize,
        seed: u64,
    },
    /// Centre square of every 3x3 block; `n` must be a multiple of 3.
    Dense,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsilonRule {
    HSquared,
    Fixed(f64),
}

impl EpsilonRule {
    pub fn epsilon(self, h: f64) -> f64 {
        match self {
            EpsilonRule::HSquared => h * h,
            EpsilonRule::Fixed(e) => e,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverChoice {
    Cholesky,
    Cg,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub scheme: Scheme,
    pub ladder: Vec<usize>,
    pub degeneration: DegenerationMode,
    pub epsilon: EpsilonRule,
    pub solver: SolverChoice,
    pub estimate_conditioning: bool,
    pub kappa_max_n: usize,
    /// Wall time breaks bitwise reproducibility of the CSV, so it is opt-in.
    pub record_time: bool,
    pub c0: f64,
    pub max_extended: usize,
    pub spectral: SpectralOptions,
    pub csv_path: Option<PathBuf>,
    pub svg_path: Option<PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            scheme: Scheme::Stabilized,
            ladder: DEFAULT_LADDER.to_vec(),
            degeneration: DegenerationMode::Count { count: 10, seed: 1 },
            epsilon: EpsilonRule::HSquared,
            solver: SolverChoice::Cholesky,
            estimate_conditioning: true,
            kappa_max_n: DEFAULT_KAPPA_MAX_N,
            record_time: false,
            c0: DEFAULT_C0,
            max_extended: DEFAULT_MAX_EXTENDED,
            spectral: SpectralOptions::default(),
            csv_path: None,
            svg_path: None,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ladder.is_empty() {
            return Err(Error::invalid("empty mesh ladder"));
        }
        if let DegenerationMode::Dense = self.degeneration {
            if let Some(n) = self.ladder.iter().find(|&&n| n % 3 != 0 || n < 9) {
                return Err(Error::invalid(format!(
                    "dense degeneration needs n a multiple of 3 and at least 9, got {n}"
                )));
            }
        }
        if let EpsilonRule::Fixed(e) = self.epsilon {
            if !(e > 0.0) {
                return Err(Error::invalid(format!("epsilon must be positive, got {e}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRecord {
    pub n: usize,
    pub h: f64,
    pub ndof: usize,
    pub l2_err: f64,
    pub h1_err: f64,
    /// Broken seminorm of the post-processed field; stabilized scheme only.
    pub h1_err_post: Option<f64>,
    pub kappa: Option<f64>,
    pub kappa_h2: Option<f64>,
    pub wall_time: Option<f64>,
}

/// Uniform `n x n` mesh with the requested squares degenerated and the
/// patch assumptions checked.
pub fn build_mesh(
    n: usize,
    mode: DegenerationMode,
    epsilon: EpsilonRule,
    c0: f64,
    max_extended: usize,
) -> Result<(Mesh, Vec<Patch>)> {
    let mesh = Mesh::uniform_unit_square(n)?;
    let squares = match mode {
        DegenerationMode::None => return Ok((mesh, Vec::new())),
        DegenerationMode::Count { count, seed } => select_degenerate_squares(n, count, seed)?,
        DegenerationMode::Dense => dense_degenerate_pattern(n)?,
    };
    let (mesh, patches) = degenerate_squares(&mesh, &squares, epsilon.epsilon(mesh.h()))?;
    let report = validate_assumptions(&mesh, &patches, c0, max_extended);
    if !report.pass() {
        return Err(Error::Validation(format!(
            "n = {n}: {}",
            report.failures().join("; ")
        )));
    }
    Ok((mesh, patches))
}

/// Assembled and reduced system for one mesh.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub mesh: Mesh,
    pub patches: Vec<Patch>,
    pub extension: Option<ExtensionOperator>,
    pub matrix: CsrMatrix,
    pub reduced: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
}

pub fn discretize(
    mesh: Mesh,
    patches: Vec<Patch>,
    scheme: Scheme,
    problem: &ManufacturedProblem,
) -> Result<Discretization> {
    let (matrix, extension) = match scheme {
        Scheme::Standard => (assemble_stiffness(&mesh)?, None),
        Scheme::Stabilized => (
            assemble_stabilized_jump_form(&mesh, &patches)?,
            Some(extension_operator(&mesh, &patches)?),
        ),
    };
    let load = assemble_load(&mesh, problem.f, &rule(4)?)?;
    let (reduced, rhs, dofs) = apply_dirichlet(&matrix, &load, &mesh);
    Ok(Discretization {
        mesh,
        patches,
        extension,
        matrix,
        reduced,
        rhs,
        dofs,
    })
}

pub fn solve_reduced(a: &CsrMatrix, b: &[f64], solver: SolverChoice) -> Result<Vec<f64>> {
    match solver {
        SolverChoice::Cholesky => Ok(SkylineCholesky::factor(a)?.solve(b)),
        SolverChoice::Cg => {
            let (x, report) = cg_solve(a, b, CgOptions::default())?;
            if !report.converged {
                return Err(Error::NotSpd(format!(
                    "CG stalled at relative residual {:e} after {} iterations",
                    report.relative_residual, report.iterations
                )));
            }
            Ok(x)
        }
    }
}

/// Full pipeline for one ladder entry.
pub fn run_single(n: usize, config: &StudyConfig) -> Result<ConvergenceRecord> {
    let start = Instant::now();
    let problem = ManufacturedProblem::sine();
    let (mesh, patches) = build_mesh(
        n,
        config.degeneration,
        config.epsilon,
        config.c0,
        config.max_extended,
    )?;
    let d = discretize(mesh, patches, config.scheme, &problem)?;
    let u = d
        .dofs
        .extend(&solve_reduced(&d.reduced, &d.rhs, config.solver)?);
    let raw = PiecewiseLinearField::from_nodal(&d.mesh, &u)?;
    let l2_err = l2_error(&d.mesh, &raw, problem.u);
    let h1_err = h1_seminorm_error(&d.mesh, &raw, problem.grad, None);
    let h1_err_post = match &d.extension {
        Some(ext) => {
            let post = postprocess_extend(&d.mesh, &u, ext)?;
            Some(h1_seminorm_error(&d.mesh, &post, problem.grad, None))
        }
        None => None,
    };
    let h = d.mesh.h();
    let kappa = if config.estimate_conditioning && n <= config.kappa_max_n {
        Some(condition_estimate(&d.reduced, &config.spectral)?.kappa())
    } else {
        None
    };
    Ok(ConvergenceRecord {
        n,
        h,
        ndof: d.dofs.num_free(),
        l2_err,
        h1_err,
        h1_err_post,
        kappa,
        kappa_h2: kappa.map(|k| k * h * h),
        wall_time: config.record_time.then(|| start.elapsed().as_secs_f64()),
    })
}

/// Runs every ladder entry (concurrently) and writes the configured
/// artifacts. Records come back sorted by `n`.
pub fn run_study(config: &StudyConfig) -> Result<Vec<ConvergenceRecord>> {
    config.validate()?;
    let mut ladder = config.ladder.clone();
    ladder.sort_unstable();
    ladder.dedup();
    let records = ladder
        .par_iter()
        .map(|&n| run_single(n, config))
        .collect::<Result<Vec<_>>>()?;
    if let Some(path) = &config.csv_path {
        super::emit_csv_file(path, &records)?;
    }
    if let Some(path) = &config.svg_path {
        let columns = super::Column::defaults_for(&records);
        super::emit_svg_plot_file(path, &records, &columns)?;
    }
    Ok(records)
}
