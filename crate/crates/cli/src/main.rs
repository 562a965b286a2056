use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use collabopt::harness::{
    evaluate_motion, prepare_scenario, run_benchmark, Method, MethodOutput, RunConfig,
};
use collabopt::kinematics::JointTrajectory;
use collabopt::optimizer::optimize;
use collabopt::report::{artifact_stem, emit_report, emit_timings, markdown_table, write_artifacts};
use collabopt::scenario::{generate_scenario, Scenario};
use collabopt::{Error, Result};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "collabopt", version, about = "Human-aware arm trajectory optimization benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write scenario files.
    Gen(Common),
    /// Run the full benchmark and write the reports.
    Run(RunArgs),
    /// Evaluate the metrics of existing trajectory files.
    Eval(EvalArgs),
    /// Solve one scenario with the full objective and print the optimizer trace.
    Solve(SolveArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Run config file; built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario families (stationary, reaching_far, reaching_near).
    #[arg(long, value_delimiter = ',')]
    family: Vec<String>,
    /// Seeds, comma separated.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Output directory.
    #[arg(long, env = "COLLABOPT_OUT")]
    out: Option<PathBuf>,
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Report formats (csv, json, markdown), comma separated.
    #[arg(long, value_delimiter = ',')]
    format: Vec<String>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Run config file; built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario file written by `gen`.
    #[arg(long)]
    scenario: PathBuf,
    /// Trajectory files to evaluate.
    #[arg(required = true)]
    trajectories: Vec<PathBuf>,
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if !common.family.is_empty() {
        cfg.families = common.family.iter().map(|f| f.parse()).collect::<Result<_>>()?;
    }
    if !common.seeds.is_empty() {
        cfg.seeds = common.seeds.clone();
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })
}

fn cmd_gen(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let chain = cfg.load_chain()?;
    let dir = cfg.output.dir.join("scenarios");
    create_dir(&dir)?;
    for &family in &cfg.families {
        for &seed in &cfg.seeds {
            let sc = generate_scenario(family, seed, &chain, &cfg.geometry)?;
            let path = dir.join(format!("{}_{seed}.json", family.name()));
            sc.save(&path)?;
            if common.verbose {
                eprintln!("wrote {}", path.display());
            }
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if !args.format.is_empty() {
        cfg.output.formats = args.format.iter().map(|f| f.parse()).collect::<Result<_>>()?;
    }
    if args.common.verbose {
        eprintln!(
            "running {} families x {} seeds x 5 methods into {}",
            cfg.families.len(),
            cfg.seeds.len(),
            cfg.output.dir.display()
        );
    }
    let output = run_benchmark(&cfg)?;
    let rows = output.rows();
    let dir = &cfg.output.dir;
    for &fmt in &cfg.output.formats {
        let path = emit_report(&rows, fmt, dir)?;
        if args.common.verbose {
            eprintln!("wrote {}", path.display());
        }
    }
    emit_timings(&output, dir)?;
    if cfg.output.save_artifacts {
        write_artifacts(&output, dir)?;
    }
    if args.common.verbose {
        for r in rows.iter().filter(|r| r.failed) {
            eprintln!("failed {} seed {} {}: {}", r.family.name(), r.seed, r.method, r.error);
        }
    }
    print!("{}", markdown_table(&rows)?);
    Ok(())
}

#[derive(Serialize)]
struct EvalRow {
    file: String,
    dst_pct: f64,
    vis_pct: f64,
    legibility: f64,
    nom_dev: f64,
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let chain = cfg.load_chain()?;
    let offsets = cfg.load_skeleton()?;
    let scenario = Scenario::load(&args.scenario)?;
    let prep = prepare_scenario(&cfg, &chain, &offsets, scenario)?;
    for path in &args.trajectories {
        let traj = JointTrajectory::load(path)?;
        if traj.len() != prep.nominal.trajectory.len() {
            return Err(Error::Usage(format!(
                "{} has {} waypoints but the scenario grid has {}",
                path.display(),
                traj.len(),
                prep.nominal.trajectory.len()
            )));
        }
        let (dst_pct, vis_pct, legibility, nom_dev) =
            evaluate_motion(&cfg, &chain, &prep, &MethodOutput::Trajectory(traj))?;
        let row = EvalRow { file: path.display().to_string(), dst_pct, vis_pct, legibility, nom_dev };
        println!("{}", serde_json::to_string(&row).map_err(|e| Error::Usage(e.to_string()))?);
    }
    Ok(())
}

fn cmd_solve(args: &SolveArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let (family, seed) = match (cfg.families.as_slice(), cfg.seeds.as_slice()) {
        ([f], [s]) => (*f, *s),
        _ => return Err(Error::Usage("solve needs exactly one --family and one --seeds value".into())),
    };
    let chain = cfg.load_chain()?;
    let offsets = cfg.load_skeleton()?;
    let scenario = generate_scenario(family, seed, &chain, &cfg.geometry)?;
    let prep = prepare_scenario(&cfg, &chain, &offsets, scenario)?;
    let res = optimize(&prep.context, &cfg.weights.comoto, &prep.nominal.trajectory, &cfg.optimizer)?;
    for row in &res.trace {
        let mut line = format!("iter {:4} total {:.9e} step {:.3e}", row.iteration, row.total, row.step);
        if args.common.verbose {
            for (name, v) in &row.per_cost {
                line.push_str(&format!(" {name} {v:.6e}"));
            }
        }
        println!("{line}");
    }
    println!(
        "termination {:?} converged {} iterations {} wall_time {:.3}s",
        res.termination, res.converged, res.iterations, res.wall_time
    );
    let (dst, vis, leg, nom) = evaluate_motion(&cfg, &chain, &prep, &MethodOutput::Trajectory(res.trajectory.clone()))?;
    println!("dst_pct {dst:.1} vis_pct {vis:.1} legibility {leg:.3} nom_dev {nom:.4}");
    let dir = cfg.output.dir.join("solve");
    create_dir(&dir)?;
    let path = dir.join(format!("{}.traj", artifact_stem(family, seed, Method::Comoto)));
    res.trajectory.save(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(c) => cmd_gen(c),
        Command::Run(a) => cmd_run(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Solve(a) => cmd_solve(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
