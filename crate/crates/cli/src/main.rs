//! `ot3d`: semi-discrete optimal transport, CVT sampling and morphing on
//! tetrahedral meshes.
//!
//! Reports go to stdout as `key=value` lines, diagnostics to stderr. Exit
//! codes: 0 success, 1 input error, 2 no convergence, 3 numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ot3d::cvt::lloyd_run;
use ot3d::geom::PredicateMode;
use ot3d::mesh::load_mesh;
use ot3d::morph::{build_morph, emit_frames, save_morph, write_frame, MorphConfig};
use ot3d::power::{load_sites, save_sites, Provider, SiteSet};
use ot3d::restricted::EvalOptions;
use ot3d::transport::{
    load_weights, save_weights, solve_multilevel, solve_single_level, SolveReport, SolverConfig, TransportProblem,
};
use ot3d::{Error, TetMesh};

#[derive(Parser)]
#[command(name = "ot3d", version, about = "Semi-discrete optimal transport on tetrahedral meshes")]
struct Cli {
    /// Worker threads for cell evaluation (default: available parallelism).
    #[arg(long, global = true, env = "OT3D_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "exact")]
    predicates: PredicateMode,
    #[arg(long, global = true, default_value = "knn")]
    provider: Provider,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the weights transporting a mesh onto a set of sites.
    Transport(TransportArgs),
    /// Sample a mesh with Lloyd-relaxed points.
    Sample(SampleArgs),
    /// Build a morph from one mesh to another.
    Morph(MorphArgs),
    /// Report cell masses against the prescribed masses for given weights.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 0.01)]
    eps_factor: f64,
    /// Regression degree for new levels: 0, 1 or 2.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(0..=2))]
    degree: u8,
    /// Solve on all sites at once instead of coarse to fine.
    #[arg(long)]
    single_level: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
}

#[derive(Args)]
struct TransportArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    sites: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(short = 'k', long)]
    k: usize,
    #[arg(long, default_value_t = 30)]
    lloyd_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MorphArgs {
    /// Mesh at t = 0.
    #[arg(long)]
    source: PathBuf,
    /// Mesh at t = 1, sampled with the morph vertices.
    #[arg(long)]
    target: PathBuf,
    #[arg(short = 'k', long, default_value_t = 1000)]
    k: usize,
    #[arg(long, default_value_t = 30)]
    lloyd_iters: usize,
    #[arg(long)]
    out: PathBuf,
    /// Also write this many `.tetmesh` frames next to the output.
    #[arg(long)]
    frames: Option<usize>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    sites: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    eps_factor: f64,
}

enum Outcome {
    Done,
    NotConverged,
    Rejected,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) | Ok(Outcome::Rejected) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Numeric(_) | Error::Internal(_) | Error::TooLarge(_) => 3,
                Error::Io { .. } | Error::Parse { .. } | Error::Invalid(_) => 1,
            })
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome, Error> {
    let threads = match cli.threads {
        Some(0) => return Err(Error::Invalid("--threads must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let eval = EvalOptions { mode: cli.predicates, provider: cli.provider, n_workers: threads };
    match &cli.command {
        Command::Transport(args) => transport(args, eval),
        Command::Sample(args) => sample(args, eval),
        Command::Morph(args) => morph(args, eval),
        Command::Verify(args) => verify(args, eval),
    }
}

fn solver_config(args: &SolverArgs, eval: EvalOptions) -> Result<SolverConfig, Error> {
    if !(args.eps_factor > 0.0 && args.eps_factor.is_finite()) {
        return Err(Error::Invalid(format!("--eps-factor must be positive, got {}", args.eps_factor)));
    }
    Ok(SolverConfig {
        eps_factor: args.eps_factor,
        max_iter: args.max_iter,
        degree: args.degree as usize,
        seed: args.seed,
        eval,
        ..SolverConfig::default()
    })
}

fn solve(mesh: &TetMesh, sites: &SiteSet, args: &SolverArgs, config: &SolverConfig) -> Result<SolveReport, Error> {
    if !args.single_level {
        return solve_multilevel(mesh, sites, config);
    }
    sites.validate()?;
    let masses = sites.masses_or_uniform(mesh.measure().total);
    let problem = TransportProblem::new(mesh, &sites.points, &masses, config.eval)?;
    solve_single_level(&problem, sites.weights.clone(), config.eps_factor, config.max_iter)
}

fn print_levels(report: &SolveReport) {
    for (l, level) in report.levels.iter().enumerate() {
        println!(
            "level={l} size={} iterations={} evaluations={} gradient_norm={:e} epsilon={:e} converged={} elapsed_s={:.3}",
            level.size,
            level.iterations,
            level.evaluations,
            level.gradient_norm,
            level.epsilon,
            level.converged,
            level.elapsed.as_secs_f64()
        );
    }
}

fn transport(args: &TransportArgs, eval: EvalOptions) -> Result<Outcome, Error> {
    let config = solver_config(&args.solver, eval)?;
    let mesh = load_mesh(&args.mesh)?;
    let sites = load_sites(&args.sites)?;
    let start = Instant::now();
    let report = solve(&mesh, &sites, &args.solver, &config)?;
    save_weights(&report.weights, &args.out)?;
    print_levels(&report);
    println!(
        "result=transport sites={} iterations={} evaluations={} gradient_norm={:e} epsilon={:e} converged={} elapsed_s={:.3} out={}",
        sites.len(),
        report.iterations,
        report.evaluations,
        report.gradient_norm,
        report.epsilon,
        report.converged,
        start.elapsed().as_secs_f64(),
        args.out.display()
    );
    Ok(if report.converged { Outcome::Done } else { Outcome::NotConverged })
}

fn sample(args: &SampleArgs, eval: EvalOptions) -> Result<Outcome, Error> {
    let mesh = load_mesh(&args.mesh)?;
    let run = lloyd_run(&mesh, args.k, args.lloyd_iters, args.seed, &eval)?;
    save_sites(&SiteSet::new(run.points), false, &args.out)?;
    let energy = run.energies.last().map_or(String::from("nan"), |q| format!("{q:e}"));
    println!("result=sample k={} lloyd_iters={} energy={energy} out={}", args.k, args.lloyd_iters, args.out.display());
    Ok(Outcome::Done)
}

fn frame_path(out: &Path, j: usize) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "frame".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}_{j:04}.tetmesh"))
}

fn morph(args: &MorphArgs, eval: EvalOptions) -> Result<Outcome, Error> {
    let solver = solver_config(&args.solver, eval)?;
    if args.k < 1 {
        return Err(Error::Invalid("-k must be at least 1".into()));
    }
    if let Some(n) = args.frames {
        if n < 2 {
            return Err(Error::Invalid(format!("--frames must be at least 2, got {n}")));
        }
    }
    let source = load_mesh(&args.source)?;
    let target = load_mesh(&args.target)?;
    let config = MorphConfig { k: args.k, lloyd_iters: args.lloyd_iters, solver };
    let report = build_morph(&source, &target, &config)?;
    save_morph(&report.morph, &args.out)?;
    if let Some(n) = args.frames {
        for (j, frame) in emit_frames(&report.morph, n).iter().enumerate() {
            let path = frame_path(&args.out, j);
            std::fs::write(&path, write_frame(frame)).map_err(|source| Error::Io { path, source })?;
        }
    }
    let d = report.morph.mean_displacement();
    println!(
        "result=morph vertices={} tets={} delaunay_tets={} regular_tets={} mean_displacement={},{},{} converged={} out={}",
        report.morph.len(),
        report.morph.tets.len(),
        report.delaunay_tets,
        report.regular_tets,
        d.x,
        d.y,
        d.z,
        report.converged,
        args.out.display()
    );
    Ok(if report.converged { Outcome::Done } else { Outcome::NotConverged })
}

fn verify(args: &VerifyArgs, eval: EvalOptions) -> Result<Outcome, Error> {
    let mesh = load_mesh(&args.mesh)?;
    let sites = load_sites(&args.sites)?;
    let weights = load_weights(&args.weights)?;
    if weights.len() != sites.len() {
        return Err(Error::Invalid(format!("{} weights for {} sites", weights.len(), sites.len())));
    }
    let measure = mesh.measure().total;
    let masses = sites.masses_or_uniform(measure);
    let problem = TransportProblem::new(&mesh, &sites.points, &masses, eval)?;
    let objective = problem.objective(&weights)?;
    let mut residual_sum = 0.0;
    for i in 0..sites.len() {
        let residual = objective.gradient[i];
        residual_sum += residual;
        println!("site={i} mass={:e} target={:e} residual={:e}", objective.cells.mass[i], masses[i], residual);
    }
    let epsilon = problem.epsilon(args.eps_factor);
    let ok = objective.gradient_norm <= epsilon;
    println!(
        "result=verify sites={} measure={:e} gradient_norm={:e} epsilon={:e} residual_sum={:e} ok={ok}",
        sites.len(),
        measure,
        objective.gradient_norm,
        epsilon,
        residual_sum
    );
    Ok(if ok { Outcome::Done } else { Outcome::Rejected })
}
