use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dmfem::analysis::{
    build_mesh, convergence_rates, discretize, emit_csv, emit_csv_file, emit_svg_plot_file,
    run_single, run_study, Column, ConvergenceRecord, DegenerationMode, EpsilonRule,
    ManufacturedProblem, Scheme, SolverChoice, StudyConfig, DEFAULT_DENSE_LADDER,
    DEFAULT_KAPPA_MAX_N, DEFAULT_LADDER,
};
use dmfem::mesh::{
    detect_degenerate_cells, read_mesh_file, validate_assumptions, write_mesh_file, DEFAULT_C0,
    DEFAULT_MAX_EXTENDED,
};
use dmfem::solver::{condition_estimate, SpectralOptions};
use dmfem::Error;

#[derive(Parser)]
#[command(
    name = "dmfem",
    version,
    about = "P1 Poisson solver on unit-square meshes with sliver cells"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate, export or validate a mesh.
    Mesh(MeshArgs),
    /// Solve on one mesh and print its record.
    Solve(SolveArgs),
    /// Estimate the condition number of the reduced matrix.
    Cond(CondArgs),
    /// Run a convergence study over a mesh ladder.
    Study(StudyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Standard,
    Stabilized,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Chol,
    Cg,
}

#[derive(Args)]
struct MeshOpts {
    /// Cells per side.
    #[arg(long, default_value_t = 16)]
    n: usize,
    /// `none`, `dense`, `count:K` or `count:K:SEED`.
    #[arg(long, default_value = "count:10")]
    degenerate: String,
    /// `h2` or `fixed:<value>`.
    #[arg(long = "epsilon-rule", default_value = "h2")]
    epsilon_rule: String,
    /// Seed for `count:K` placements without an explicit seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Shape-regularity threshold for companion cells and sliver detection.
    #[arg(long, default_value_t = DEFAULT_C0)]
    c0: f64,
}

#[derive(Args)]
struct MeshArgs {
    #[command(flatten)]
    mesh: MeshOpts,
    /// Write the generated mesh here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Validate an existing mesh file instead of generating one.
    #[arg(long, conflicts_with = "out")]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    mesh: MeshOpts,
    #[arg(long, value_enum, default_value_t = SchemeArg::Stabilized)]
    scheme: SchemeArg,
    #[arg(long, value_enum, default_value_t = SolverArg::Chol)]
    solver: SolverArg,
    /// Also estimate the condition number.
    #[arg(long)]
    kappa: bool,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct CondArgs {
    #[command(flatten)]
    mesh: MeshOpts,
    #[arg(long, value_enum, default_value_t = SchemeArg::Stabilized)]
    scheme: SchemeArg,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long, value_enum, default_value_t = SchemeArg::Stabilized)]
    scheme: SchemeArg,
    /// Comma-separated list of n; defaults depend on the degeneration mode.
    #[arg(long, value_delimiter = ',')]
    ladder: Vec<usize>,
    #[arg(long, default_value = "count:10")]
    degenerate: String,
    #[arg(long = "epsilon-rule", default_value = "h2")]
    epsilon_rule: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SolverArg::Chol)]
    solver: SolverArg,
    /// Skip the condition number estimates.
    #[arg(long)]
    no_kappa: bool,
    /// Largest n for which conditioning is estimated.
    #[arg(long, default_value_t = DEFAULT_KAPPA_MAX_N)]
    kappa_max_n: usize,
    /// Record wall time per mesh (the CSV is then no longer reproducible).
    #[arg(long)]
    time: bool,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

fn parse_degenerate(s: &str, seed: u64) -> Result<DegenerationMode, Error> {
    let bad = || {
        Error::InvalidArgument(format!(
            "bad --degenerate `{s}`; expected none, dense, count:K or count:K:SEED"
        ))
    };
    match s {
        "none" => Ok(DegenerationMode::None),
        "dense" => Ok(DegenerationMode::Dense),
        _ => {
            let parts: Vec<&str> = s.split(':').collect();
            match parts.as_slice() {
                ["count", k] => Ok(DegenerationMode::Count {
                    count: k.parse().map_err(|_| bad())?,
                    seed,
                }),
                ["count", k, sd] => Ok(DegenerationMode::Count {
                    count: k.parse().map_err(|_| bad())?,
                    seed: sd.parse().map_err(|_| bad())?,
                }),
                _ => Err(bad()),
            }
        }
    }
}

fn parse_epsilon(s: &str) -> Result<EpsilonRule, Error> {
    match s.split_once(':') {
        None if s == "h2" => Ok(EpsilonRule::HSquared),
        Some(("fixed", v)) => v
            .parse()
            .map(EpsilonRule::Fixed)
            .map_err(|_| Error::InvalidArgument(format!("bad epsilon value `{v}`"))),
        _ => Err(Error::InvalidArgument(format!(
            "bad --epsilon-rule `{s}`; expected h2 or fixed:<v>"
        ))),
    }
}

fn scheme(s: SchemeArg) -> Scheme {
    match s {
        SchemeArg::Standard => Scheme::Standard,
        SchemeArg::Stabilized => Scheme::Stabilized,
    }
}

fn solver(s: SolverArg) -> SolverChoice {
    match s {
        SolverArg::Chol => SolverChoice::Cholesky,
        SolverArg::Cg => SolverChoice::Cg,
    }
}

fn single_config(m: &MeshOpts, sch: SchemeArg) -> Result<StudyConfig, Error> {
    let c = StudyConfig {
        scheme: scheme(sch),
        ladder: vec![m.n],
        degeneration: parse_degenerate(&m.degenerate, m.seed)?,
        epsilon: parse_epsilon(&m.epsilon_rule)?,
        c0: m.c0,
        kappa_max_n: usize::MAX,
        ..StudyConfig::default()
    };
    c.validate()?;
    Ok(c)
}

fn run_mesh(args: MeshArgs) -> Result<(), Error> {
    let (mesh, patches) = match &args.input {
        Some(path) => read_mesh_file(path)?,
        None => {
            let m = &args.mesh;
            let mode = parse_degenerate(&m.degenerate, m.seed)?;
            let eps = parse_epsilon(&m.epsilon_rule)?;
            build_mesh(m.n, mode, eps, m.c0, DEFAULT_MAX_EXTENDED)?
        }
    };
    let report = validate_assumptions(&mesh, &patches, args.mesh.c0, DEFAULT_MAX_EXTENDED);
    let slivers = detect_degenerate_cells(&mesh, args.mesh.c0)?;
    println!("vertices {}", mesh.num_vertices());
    println!("cells {}", mesh.num_cells());
    println!("patches {}", patches.len());
    println!("cells above quality {} : {}", args.mesh.c0, slivers.len());
    if !report.pass() {
        return Err(Error::Validation(report.failures().join("; ")));
    }
    println!("assumptions ok");
    if let Some(out) = &args.out {
        write_mesh_file(out, &mesh, &patches)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn run_solve(args: SolveArgs) -> Result<(), Error> {
    let mut c = single_config(&args.mesh, args.scheme)?;
    c.solver = solver(args.solver);
    c.estimate_conditioning = args.kappa;
    let r = run_single(args.mesh.n, &c)?;
    write_records(&[r], args.csv.as_ref())
}

fn write_records(records: &[ConvergenceRecord], csv: Option<&PathBuf>) -> Result<(), Error> {
    match csv {
        Some(path) => emit_csv_file(path, records),
        None => emit_csv(std::io::stdout().lock(), records).map_err(|e| Error::Io {
            path: "<stdout>".into(),
            source: e,
        }),
    }
}

fn run_cond(args: CondArgs) -> Result<(), Error> {
    let c = single_config(&args.mesh, args.scheme)?;
    let (mesh, patches) = build_mesh(args.mesh.n, c.degeneration, c.epsilon, c.c0, c.max_extended)?;
    let h = mesh.h();
    let d = discretize(mesh, patches, c.scheme, &ManufacturedProblem::sine())?;
    let est = condition_estimate(&d.reduced, &SpectralOptions::default())?;
    println!("ndof {}", d.dofs.num_free());
    println!(
        "lambda_min {:.16e} ({} inverse iterations)",
        est.lambda_min.value, est.lambda_min.iterations
    );
    println!(
        "lambda_max {:.16e} ({} Lanczos steps)",
        est.lambda_max.value, est.lambda_max.iterations
    );
    println!("kappa {:.16e}", est.kappa());
    println!("kappa_h2 {:.16e}", est.kappa() * h * h);
    Ok(())
}

fn run_study_cmd(args: StudyArgs) -> Result<(), Error> {
    let mode = parse_degenerate(&args.degenerate, args.seed)?;
    let ladder = if args.ladder.is_empty() {
        match mode {
            DegenerationMode::Dense => DEFAULT_DENSE_LADDER.to_vec(),
            _ => DEFAULT_LADDER.to_vec(),
        }
    } else {
        args.ladder.clone()
    };
    let c = StudyConfig {
        scheme: scheme(args.scheme),
        ladder,
        degeneration: mode,
        epsilon: parse_epsilon(&args.epsilon_rule)?,
        solver: solver(args.solver),
        estimate_conditioning: !args.no_kappa,
        kappa_max_n: args.kappa_max_n,
        record_time: args.time,
        csv_path: None,
        svg_path: None,
        ..StudyConfig::default()
    };
    let records = run_study(&c)?;
    write_records(&records, args.csv.as_ref())?;
    if let Some(svg) = &args.svg {
        emit_svg_plot_file(svg, &records, &Column::defaults_for(&records))?;
    }
    if records.len() >= 2 {
        let h: Vec<f64> = records.iter().map(|r| r.h).collect();
        for col in [Column::L2, Column::H1, Column::H1Post, Column::Kappa] {
            let e: Vec<f64> = records
                .iter()
                .map(|r| col.value(r).unwrap_or(0.0))
                .collect();
            if let Ok(rates) = convergence_rates(&h, &e) {
                if let Some(s) = rates.least_squares.filter(|_| rates.flagged.is_empty()) {
                    eprintln!("{} slope {s:.4}", col.name());
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Mesh(a) => run_mesh(a),
        Command::Solve(a) => run_solve(a),
        Command::Cond(a) => run_cond(a),
        Command::Study(a) => run_study_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Validation(_)
                | Error::InvalidArgument(_)
                | Error::Capacity { .. }
                | Error::InvalidPatch(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
