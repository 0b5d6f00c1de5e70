use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gripsim::config::ScenarioConfig;
use gripsim::grasp::RunOptions;
use gripsim::harness::{self, GraspEntry, LabelSet, Mode};
use gripsim::scene::{build_scene, validate_scene};
use gripsim::{Error, Result};

#[derive(Parser)]
#[command(name = "gripsim", version, about = "Planar grasp simulation and evaluation")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Scenario configuration (JSON); defaults describe the canonical square grasp.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Perturbed trials per grasp.
    #[arg(long, global = true, default_value_t = 5)]
    trials: usize,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Binarization threshold for predictions and labels.
    #[arg(long, global = true, default_value_t = 0.5)]
    threshold: f64,
    /// Write one trajectory file per trial next to the output.
    #[arg(long, global = true)]
    dump_trajectories: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate robustness for each grasp by perturbed simulation.
    Simulate {
        #[command(flatten)]
        batch: BatchArgs,
        #[arg(long, default_value = "simulate")]
        mode: Mode,
        /// Comparison report (requires --labels).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Analytic soft-point-contact predictions only.
    Analytic {
        #[command(flatten)]
        batch: BatchArgs,
    },
    /// Score a prediction file against labels.
    Metrics {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        labels: PathBuf,
    },
    /// Grid search over pad Young's modulus and friction.
    Sweep {
        #[arg(long)]
        grasps: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, value_delimiter = ',')]
        e_values: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        mu_values: Option<Vec<f64>>,
    },
    /// Pad compression at the end of the squeeze for several energy thresholds.
    PsiSweep {
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Wall time of the configured grasp per object subdivision level.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        levels: Vec<u32>,
        #[arg(long, default_value_t = 10)]
        repetitions: usize,
    },
    /// Build the scene and check it for overlaps and inverted elements.
    Validate,
}

#[derive(Args)]
struct BatchArgs {
    /// Grasp list `id,center_x,center_y,angle[,key=value...]`; the configured grasp when absent.
    #[arg(long)]
    grasps: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
}

/// Error raised when at least one grasp ran out of valid trials.
struct BudgetExceeded;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(BudgetExceeded)) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::TrialBudgetExceeded { .. }) || e.is_solver_failure() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn load_config(g: &Global) -> Result<ScenarioConfig> {
    let mut cfg = match &g.config {
        Some(p) => ScenarioConfig::from_file(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if g.trials == 0 {
        return Err(Error::InvalidInput("--trials must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&g.threshold) {
        return Err(Error::InvalidInput(format!("--threshold outside [0, 1]: {}", g.threshold)));
    }
    cfg.grasp.trials = g.trials;
    cfg.check()?;
    Ok(cfg)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn grasp_list(cfg: &ScenarioConfig, path: Option<&Path>) -> Result<Vec<GraspEntry>> {
    match path {
        Some(p) => harness::read_grasp_list(p),
        None => Ok(vec![GraspEntry::from_config(cfg, "default")?]),
    }
}

fn trajectory_dir(out: Option<&Path>) -> PathBuf {
    match out {
        Some(p) => {
            let stem = p.file_stem().map_or("results".into(), |s| s.to_string_lossy().into_owned());
            p.with_file_name(format!("{stem}_trajectories"))
        }
        None => PathBuf::from("trajectories"),
    }
}

fn run(cli: &Cli) -> Result<std::result::Result<(), BudgetExceeded>> {
    let g = &cli.global;
    let cfg = load_config(g)?;
    let out = g.out.as_deref();
    match &cli.command {
        Command::Simulate { batch, mode, report } => run_simulate(&cfg, g, batch, *mode, report.as_deref()),
        Command::Analytic { batch } => run_simulate(&cfg, g, batch, Mode::Analytic, None),
        Command::Metrics { predictions, labels } => {
            let labels = LabelSet::read(labels)?;
            let text = std::fs::read_to_string(predictions)?;
            let preds = harness::read_id_values(&text, &predictions.display().to_string())?;
            let mut map = std::collections::BTreeMap::new();
            for (id, r) in preds {
                if map.insert(id.clone(), r).is_some() {
                    return Err(Error::InvalidInput(format!("duplicate prediction id {id:?}")));
                }
            }
            let m = harness::compute_metrics(&map, &labels, g.threshold)?;
            let mut w = output(out)?;
            writeln!(w, "AP,AR,F1,TP,FP,TN,FN,threshold")?;
            writeln!(w, "{},{},{},{},{},{},{},{}", m.ap, m.ar, m.f1, m.tp, m.fp, m.tn, m.fn_, m.threshold)?;
            w.flush()?;
            Ok(Ok(()))
        }
        Command::Sweep { grasps, labels, e_values, mu_values } => {
            let list = harness::read_grasp_list(grasps)?;
            let labels = LabelSet::read(labels)?;
            let e = e_values.clone().unwrap_or_else(|| harness::DEFAULT_E_VALUES.to_vec());
            let mu = mu_values.clone().unwrap_or_else(|| harness::DEFAULT_MU_VALUES.to_vec());
            let sweep = harness::param_sweep(&cfg, &e, &mu, &list, &labels, g.trials, g.threshold)?;
            harness::write_sweep(output(out)?, &sweep)?;
            eprint!("{}", harness::format_sweep_grid(&sweep));
            Ok(Ok(()))
        }
        Command::PsiSweep { values } => {
            let values = values.clone().unwrap_or_else(|| harness::DEFAULT_PSI_VALUES.to_vec());
            let rows = harness::psi_threshold_sweep(&cfg, &values)?;
            harness::write_psi_sweep(output(out)?, &rows)?;
            Ok(Ok(()))
        }
        Command::Bench { levels, repetitions } => {
            let rows = harness::runtime_benchmark(&cfg, levels, *repetitions)?;
            harness::write_bench(output(out)?, &rows)?;
            eprint!("{}", harness::format_bench_table(&rows));
            Ok(Ok(()))
        }
        Command::Validate => {
            let scene = build_scene(&cfg)?;
            let report = validate_scene(&scene);
            let mut w = output(out)?;
            write!(w, "{report}")?;
            w.flush()?;
            if report.is_valid() {
                Ok(Ok(()))
            } else {
                Err(Error::InvalidInput("scene failed validation".into()))
            }
        }
    }
}

fn run_simulate(
    cfg: &ScenarioConfig,
    g: &Global,
    batch: &BatchArgs,
    mode: Mode,
    report: Option<&Path>,
) -> Result<std::result::Result<(), BudgetExceeded>> {
    let list = grasp_list(cfg, batch.grasps.as_deref())?;
    let labels = batch.labels.as_deref().map(LabelSet::read).transpose()?;
    if report.is_some() && labels.is_none() {
        return Err(Error::InvalidInput("--report requires --labels".into()));
    }
    let options = RunOptions { record_trajectory: g.dump_trajectories, ..Default::default() };
    let result = harness::run_batch(cfg, &list, mode, g.trials, options)?;
    harness::write_results(output(g.out.as_deref())?, &result)?;
    if g.dump_trajectories {
        let dir = trajectory_dir(g.out.as_deref());
        std::fs::create_dir_all(&dir)?;
        for gr in &result.grasps {
            let Some(r) = &gr.robustness else { continue };
            for (k, t) in r.trials.iter().enumerate() {
                let f = File::create(dir.join(format!("{}_{k}.csv", gr.id)))?;
                harness::write_trajectory(BufWriter::new(f), &t.outcome.trajectory)?;
            }
        }
    }
    if let Some(labels) = &labels {
        let rows = harness::comparison_report(&result, labels, g.threshold)?;
        match report {
            Some(p) => harness::write_report(BufWriter::new(File::create(p)?), &rows)?,
            None => harness::write_report(std::io::stderr().lock(), &rows)?,
        }
    }
    Ok(if result.budget_exceeded() { Err(BudgetExceeded) } else { Ok(()) })
}
