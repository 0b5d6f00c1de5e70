//! Batch execution, evaluation against labels, parameter and threshold sweeps,
//! runtime benchmark and report output.

mod io;
mod metrics;

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

pub use io::{parse_grasp_list, parse_trajectory, read_grasp_list, write_trajectory, GraspEntry, GraspOverrides};
pub use metrics::{compute_metrics, read_id_values, LabelSet, MetricsReport};

use crate::analytic;
use crate::config::ScenarioConfig;
use crate::grasp::{estimate_robustness, run_grasp, RobustnessEstimate, RunOptions};
use crate::scene::build_scene;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Analytic,
    Both,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simulate" => Ok(Mode::Simulate),
            "analytic" => Ok(Mode::Analytic),
            "both" => Ok(Mode::Both),
            other => Err(Error::InvalidInput(format!("unknown mode {other:?}"))),
        }
    }
}

/// Label of the simulator row in comparison reports.
pub const SIMULATOR_LABEL: &str = "IPC-2D";
/// Label of the analytic baseline row in comparison reports.
pub const ANALYTIC_LABEL: &str = "Soft Point";

#[derive(Debug, Clone, PartialEq)]
pub struct GraspResult {
    pub id: String,
    pub robustness: Option<RobustnessEstimate>,
    pub analytic: Option<bool>,
    pub sim_runtime_s: f64,
    pub analytic_runtime_s: f64,
    /// Set when the trial budget was exhausted by solver failures.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub mode: Mode,
    pub seed: u64,
    pub grasps: Vec<GraspResult>,
}

impl BatchResult {
    /// Whether any grasp exhausted its trial budget.
    pub fn budget_exceeded(&self) -> bool {
        self.grasps.iter().any(|g| g.error.is_some())
    }

    /// Simulated robustness per grasp id.
    pub fn sim_predictions(&self) -> BTreeMap<String, f64> {
        self.grasps.iter().filter_map(|g| g.robustness.as_ref().map(|r| (g.id.clone(), r.r))).collect()
    }

    /// Analytic decision per grasp id, as 0 or 1.
    pub fn analytic_predictions(&self) -> BTreeMap<String, f64> {
        self.grasps.iter().filter_map(|g| g.analytic.map(|s| (g.id.clone(), if s { 1.0 } else { 0.0 }))).collect()
    }
}

/// Run every grasp of the list. Trials of one grasp run concurrently; grasps
/// run in list order.
pub fn run_batch(
    config: &ScenarioConfig,
    grasps: &[GraspEntry],
    mode: Mode,
    trials: usize,
    options: RunOptions,
) -> Result<BatchResult> {
    let mut out = Vec::with_capacity(grasps.len());
    for entry in grasps {
        let u = entry.spec(config);
        let mut result = GraspResult {
            id: entry.id.clone(),
            robustness: None,
            analytic: None,
            sim_runtime_s: 0.0,
            analytic_runtime_s: 0.0,
            error: None,
        };
        if mode != Mode::Simulate {
            let t = Instant::now();
            result.analytic = Some(analytic::predict(config, &u)?);
            result.analytic_runtime_s = t.elapsed().as_secs_f64();
        }
        if mode != Mode::Analytic {
            let t = Instant::now();
            match estimate_robustness(config, &u, trials, config.seed, options) {
                Ok(r) => result.robustness = Some(r),
                Err(e @ Error::TrialBudgetExceeded { .. }) => {
                    log::error!("grasp {}: {e}", entry.id);
                    result.error = Some(e.to_string());
                }
                Err(e) => return Err(e),
            }
            result.sim_runtime_s = t.elapsed().as_secs_f64();
        }
        out.push(result);
    }
    Ok(BatchResult { mode, seed: config.seed, grasps: out })
}

/// Header of the results file. `runtime_s` is always the last column.
pub const RESULTS_HEADER: [&str; 17] = [
    "kind",
    "grasp_id",
    "trial",
    "attempt",
    "success",
    "phase",
    "squeeze_end",
    "psi1",
    "psi2",
    "object_x",
    "object_y",
    "object_theta",
    "robustness",
    "analytic",
    "invalid",
    "error",
    "runtime_s",
];

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("{other:?}")),
    }
}

/// Write per-trial rows followed by one summary row per grasp.
pub fn write_results<W: Write>(w: W, batch: &BatchResult) -> Result<()> {
    let mut csv = csv_writer(w);
    csv.write_record(RESULTS_HEADER).map_err(csv_err)?;
    let b = |v: bool| if v { "1" } else { "0" }.to_string();
    for g in &batch.grasps {
        if let Some(r) = &g.robustness {
            for (k, t) in r.trials.iter().enumerate() {
                let o = &t.outcome;
                let p = o.final_object_pose;
                csv.write_record([
                    "trial".to_string(),
                    g.id.clone(),
                    k.to_string(),
                    t.attempt.to_string(),
                    b(o.success),
                    o.phase_reached.as_str().to_string(),
                    o.squeeze_end.as_str().to_string(),
                    o.psi[0].to_string(),
                    o.psi[1].to_string(),
                    p.x.to_string(),
                    p.y.to_string(),
                    p.theta.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ])
                .map_err(csv_err)?;
            }
        }
        csv.write_record([
            "summary".to_string(),
            g.id.clone(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            g.robustness.as_ref().map(|r| r.r.to_string()).unwrap_or_default(),
            g.analytic.map(b).unwrap_or_default(),
            g.robustness.as_ref().map(|r| r.invalid.len().to_string()).unwrap_or_default(),
            g.error.clone().unwrap_or_default(),
            (g.sim_runtime_s + g.analytic_runtime_s).to_string(),
        ])
        .map_err(csv_err)?;
    }
    csv.flush()?;
    Ok(())
}

/// Drop the trailing `runtime_s` column from every line of a results file.
pub fn strip_timing(results: &str) -> String {
    results.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head)).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRow {
    pub model: String,
    pub metrics: MetricsReport,
    /// Mean wall time per grasp (s).
    pub runtime_s: f64,
}

/// One row per model that produced predictions, scored against `labels`.
pub fn comparison_report(batch: &BatchResult, labels: &LabelSet, threshold: f64) -> Result<Vec<ModelRow>> {
    let mut rows = Vec::new();
    let n = batch.grasps.len().max(1) as f64;
    if batch.mode != Mode::Simulate {
        rows.push(ModelRow {
            model: ANALYTIC_LABEL.into(),
            metrics: compute_metrics(&batch.analytic_predictions(), labels, threshold)?,
            runtime_s: batch.grasps.iter().map(|g| g.analytic_runtime_s).sum::<f64>() / n,
        });
    }
    if batch.mode != Mode::Analytic {
        rows.push(ModelRow {
            model: SIMULATOR_LABEL.into(),
            metrics: compute_metrics(&batch.sim_predictions(), labels, threshold)?,
            runtime_s: batch.grasps.iter().map(|g| g.sim_runtime_s).sum::<f64>() / n,
        });
    }
    Ok(rows)
}

pub fn write_report<W: Write>(w: W, rows: &[ModelRow]) -> Result<()> {
    let mut csv = csv_writer(w);
    csv.write_record(["model", "AP", "AR", "F1", "TP", "FP", "TN", "FN", "runtime_s"]).map_err(csv_err)?;
    for r in rows {
        let m = &r.metrics;
        csv.write_record([
            r.model.clone(),
            m.ap.to_string(),
            m.ar.to_string(),
            m.f1.to_string(),
            m.tp.to_string(),
            m.fp.to_string(),
            m.tn.to_string(),
            m.fn_.to_string(),
            r.runtime_s.to_string(),
        ])
        .map_err(csv_err)?;
    }
    csv.flush()?;
    Ok(())
}

/// Pad Young's moduli of the default sweep grid (Pa).
pub const DEFAULT_E_VALUES: [f64; 5] = [1e7, 1e8, 1e9, 1e10, 1e11];
/// Pad friction coefficients of the default sweep grid.
pub const DEFAULT_MU_VALUES: [f64; 4] = [0.3, 0.4, 0.5, 0.6];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub youngs_modulus: f64,
    pub mu: f64,
    /// `None` when no grasp produced a prediction.
    pub metrics: Option<MetricsReport>,
    /// Grasps whose trial budget was exhausted in this cell.
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub e_values: Vec<f64>,
    pub mu_values: Vec<f64>,
    /// Row-major: all mu values for the first E, then the next E.
    pub cells: Vec<SweepCell>,
    pub best: Option<usize>,
}

/// Index of the cell with the highest F1; ties go to lower E, then lower mu.
pub fn best_cell(cells: &[SweepCell]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in cells.iter().enumerate() {
        let Some(m) = c.metrics else { continue };
        let better = match best {
            None => true,
            Some(b) => {
                let (bc, bm) = (&cells[b], cells[b].metrics.unwrap());
                m.f1 > bm.f1
                    || (m.f1 == bm.f1
                        && (c.youngs_modulus < bc.youngs_modulus
                            || (c.youngs_modulus == bc.youngs_modulus && c.mu < bc.mu)))
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}

/// Evaluate the simulator over the Cartesian grid of pad stiffness and friction.
pub fn param_sweep(
    config: &ScenarioConfig,
    e_values: &[f64],
    mu_values: &[f64],
    grasps: &[GraspEntry],
    labels: &LabelSet,
    trials: usize,
    threshold: f64,
) -> Result<SweepResult> {
    if e_values.is_empty() || mu_values.is_empty() {
        return Err(Error::InvalidInput("sweep axes need at least one value each".into()));
    }
    let mut cells = Vec::with_capacity(e_values.len() * mu_values.len());
    for &e in e_values {
        for &mu in mu_values {
            let mut cfg = config.clone();
            cfg.jaw.pad_material.youngs_modulus = e;
            cfg.jaw.pad_material.friction_coeff = mu;
            cfg.check()?;
            let batch = run_batch(&cfg, grasps, Mode::Simulate, trials, RunOptions::default())?;
            let preds = batch.sim_predictions();
            let errors = batch.grasps.iter().filter(|g| g.error.is_some()).count();
            let metrics = if preds.is_empty() { None } else { Some(compute_metrics(&preds, labels, threshold)?) };
            log::info!("sweep cell E = {e:e}, mu = {mu}: {metrics:?}, {errors} errors");
            cells.push(SweepCell { youngs_modulus: e, mu, metrics, errors });
        }
    }
    Ok(SweepResult { e_values: e_values.to_vec(), mu_values: mu_values.to_vec(), best: best_cell(&cells), cells })
}

/// One row per grid cell.
pub fn write_sweep<W: Write>(w: W, sweep: &SweepResult) -> Result<()> {
    let mut csv = csv_writer(w);
    csv.write_record(["E", "mu", "AP", "AR", "F1", "TP", "FP", "TN", "FN", "errors", "best"]).map_err(csv_err)?;
    for (i, c) in sweep.cells.iter().enumerate() {
        let mut row = vec![c.youngs_modulus.to_string(), c.mu.to_string()];
        match c.metrics {
            Some(m) => row.extend(
                [m.ap, m.ar, m.f1]
                    .map(|v| v.to_string())
                    .into_iter()
                    .chain([m.tp, m.fp, m.tn, m.fn_].map(|v| v.to_string())),
            ),
            None => row.extend(std::iter::repeat_n(String::new(), 7)),
        }
        row.push(c.errors.to_string());
        row.push(if sweep.best == Some(i) { "1" } else { "0" }.to_string());
        csv.write_record(&row).map_err(csv_err)?;
    }
    csv.flush()?;
    Ok(())
}

/// F1 grid with one row per E and one column per mu.
pub fn format_sweep_grid(sweep: &SweepResult) -> String {
    let mut s = String::from("E \\ mu");
    for mu in &sweep.mu_values {
        s.push_str(&format!("\t{mu}"));
    }
    s.push('\n');
    for (i, e) in sweep.e_values.iter().enumerate() {
        s.push_str(&format!("{e:e}"));
        for j in 0..sweep.mu_values.len() {
            let k = i * sweep.mu_values.len() + j;
            let cell = match sweep.cells[k].metrics {
                Some(m) => format!("{:.2}", m.f1),
                None => "n/a".into(),
            };
            let mark = if sweep.best == Some(k) { "*" } else { "" };
            s.push_str(&format!("\t{cell}{mark}"));
        }
        s.push('\n');
    }
    s
}

/// Squeeze-only outcome for one threshold value.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiSweepRow {
    pub psi_threshold: f64,
    /// Largest pad compression ratio (1 - min thickness / rest thickness) over both pads.
    pub max_compression: f64,
    pub psi1: f64,
    pub psi2: f64,
    pub squeeze_end: String,
    pub steps: usize,
}

pub const DEFAULT_PSI_VALUES: [f64; 3] = [5e3, 5e4, 5e5];

/// Run the squeeze phase of the configured grasp at each threshold.
pub fn psi_threshold_sweep(config: &ScenarioConfig, values: &[f64]) -> Result<Vec<PsiSweepRow>> {
    let u = config.grasp_spec()?;
    values
        .iter()
        .map(|&th| {
            let mut cfg = config.clone();
            cfg.grasp.psi_threshold = th;
            cfg.check()?;
            let o = run_grasp(&cfg, &u, RunOptions { squeeze_only: true, ..Default::default() })?;
            Ok(PsiSweepRow {
                psi_threshold: th,
                max_compression: o.max_compression[0].max(o.max_compression[1]),
                psi1: o.psi[0],
                psi2: o.psi[1],
                squeeze_end: o.squeeze_end.as_str().into(),
                steps: o.steps,
            })
        })
        .collect()
}

pub fn write_psi_sweep<W: Write>(w: W, rows: &[PsiSweepRow]) -> Result<()> {
    let mut csv = csv_writer(w);
    csv.write_record(["psi_threshold", "max_compression", "psi1", "psi2", "squeeze_end", "steps"]).map_err(csv_err)?;
    for r in rows {
        csv.write_record([
            r.psi_threshold.to_string(),
            r.max_compression.to_string(),
            r.psi1.to_string(),
            r.psi2.to_string(),
            r.squeeze_end.clone(),
            r.steps.to_string(),
        ])
        .map_err(csv_err)?;
    }
    csv.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub level: u32,
    pub object_vertices: usize,
    pub scene_vertices: usize,
    pub repetitions: usize,
    pub mean_s: f64,
    /// Sample standard deviation of the wall time (s).
    pub std_s: f64,
    pub successes: usize,
}

/// Time the configured (unperturbed) grasp at each object subdivision level.
pub fn runtime_benchmark(config: &ScenarioConfig, levels: &[u32], repetitions: usize) -> Result<Vec<BenchRow>> {
    if repetitions == 0 {
        return Err(Error::InvalidInput("repetitions must be at least 1".into()));
    }
    let mut rows = Vec::new();
    for &level in levels {
        if level > 4 {
            return Err(Error::InvalidInput(format!("subdivision level {level} outside 0..=4")));
        }
        let mut cfg = config.clone();
        cfg.object.subdivision = level;
        let scene = build_scene(&cfg)?;
        let u = cfg.grasp_spec()?;
        let mut times = Vec::with_capacity(repetitions);
        let mut successes = 0;
        for _ in 0..repetitions {
            let t = Instant::now();
            let o = run_grasp(&cfg, &u, RunOptions::default())?;
            times.push(t.elapsed().as_secs_f64());
            successes += o.success as usize;
        }
        let n = times.len() as f64;
        let mean = times.iter().sum::<f64>() / n;
        let var = if times.len() > 1 { times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        rows.push(BenchRow {
            level,
            object_vertices: scene.bodies[scene.roles.object].n_vertices(),
            scene_vertices: scene.n_vertices(),
            repetitions,
            mean_s: mean,
            std_s: var.sqrt(),
            successes,
        });
    }
    Ok(rows)
}

pub fn write_bench<W: Write>(w: W, rows: &[BenchRow]) -> Result<()> {
    let mut csv = csv_writer(w);
    csv.write_record(["level", "object_vertices", "scene_vertices", "repetitions", "mean_s", "std_s", "successes"])
        .map_err(csv_err)?;
    for r in rows {
        csv.write_record([
            r.level.to_string(),
            r.object_vertices.to_string(),
            r.scene_vertices.to_string(),
            r.repetitions.to_string(),
            r.mean_s.to_string(),
            r.std_s.to_string(),
            r.successes.to_string(),
        ])
        .map_err(csv_err)?;
    }
    csv.flush()?;
    Ok(())
}

/// Table of mean and standard deviation per level, `level(vertices)` headed.
pub fn format_bench_table(rows: &[BenchRow]) -> String {
    let mut head = String::from("subdivisions(vertices)");
    let mut line = String::from("runtime (s)");
    for r in rows {
        head.push_str(&format!("\t{}({})", r.level, r.object_vertices));
        line.push_str(&format!("\t{:.3} ± {:.3}", r.mean_s, r.std_s));
    }
    format!("{head}\n{line}\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(e: f64, mu: f64, f1: Option<f64>) -> SweepCell {
        SweepCell {
            youngs_modulus: e,
            mu,
            metrics: f1.map(|f| MetricsReport { f1: f, ..MetricsReport::from_counts(1, 0, 0, 0, 0.5) }),
            errors: 0,
        }
    }

    #[test]
    fn best_cell_breaks_ties_toward_lower_e_then_mu() {
        let cells =
            vec![cell(1e9, 0.3, Some(0.8)), cell(1e8, 0.5, Some(0.8)), cell(1e8, 0.4, Some(0.8)), cell(1e7, 0.3, None)];
        assert_eq!(best_cell(&cells), Some(2));
        let cells = vec![cell(1e9, 0.3, Some(0.9)), cell(1e8, 0.4, Some(0.8))];
        assert_eq!(best_cell(&cells), Some(0));
        assert_eq!(best_cell(&[cell(1e8, 0.4, None)]), None);
    }

    #[test]
    fn strip_timing_drops_last_column() {
        assert_eq!(strip_timing("a,b,runtime_s\n1,2,0.5\n"), "a,b\n1,2");
    }
}
