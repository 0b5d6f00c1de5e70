//! C ABI over the gripsim simulator. Scenarios are opaque handles; every
//! fallible call returns a `GsStatus` and leaves a message retrievable with
//! `gs_last_error_message` on the calling thread.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, UnwindSafe};

use gripsim::analytic::{self, ContactModelInput};
use gripsim::config::ScenarioConfig;
use gripsim::grasp::{self, GraspSpec, RunOptions, SqueezeEnd};
use gripsim::harness::{compute_metrics, LabelSet};
use gripsim::{Error, Vec2};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    SolverFailure = 3,
    BudgetExceeded = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsSqueezeEnd {
    Threshold = 0,
    JawsMet = 1,
    StepBudget = 2,
    EnergyRunaway = 3,
    PlacementInfeasible = 4,
}

impl From<SqueezeEnd> for GsSqueezeEnd {
    fn from(e: SqueezeEnd) -> Self {
        match e {
            SqueezeEnd::Threshold => GsSqueezeEnd::Threshold,
            SqueezeEnd::JawsMet => GsSqueezeEnd::JawsMet,
            SqueezeEnd::StepBudget => GsSqueezeEnd::StepBudget,
            SqueezeEnd::EnergyRunaway => GsSqueezeEnd::EnergyRunaway,
            SqueezeEnd::PlacementInfeasible => GsSqueezeEnd::PlacementInfeasible,
        }
    }
}

/// Scenario configuration handle.
pub struct GsScenario {
    config: ScenarioConfig,
}

/// Jaw pose; width and speeds come from the scenario.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GsGrasp {
    pub center_x: f64,
    pub center_y: f64,
    /// Closing axis angle from +x (rad).
    pub axis_angle: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GsOutcome {
    pub success: bool,
    pub squeeze_end: GsSqueezeEnd,
    /// Pad energies at the end of the squeeze, in threshold units.
    pub psi: [f64; 2],
    /// Final object centroid and rotation; NaN when placement was infeasible.
    pub object_x: f64,
    pub object_y: f64,
    pub object_theta: f64,
    pub steps: u64,
    pub newton_iterations: u64,
    pub min_distance: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GsRobustness {
    pub r: f64,
    pub trials: u64,
    pub successes: u64,
    /// Attempts redrawn after solver failures.
    pub invalid: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GsMetrics {
    pub ap: f64,
    pub ar: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

/// Two-contact quasistatic holding problem.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GsContactInput {
    pub points: [[f64; 2]; 2],
    /// Unit normals pointing into the object.
    pub normals: [[f64; 2]; 2],
    pub mu: f64,
    pub max_normal_force: f64,
    pub torsion_ratio: f64,
    pub mass: f64,
    pub center_of_mass: [f64; 2],
    /// Magnitude of gravity along -y.
    pub gravity: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

type Failure = (GsStatus, String);

fn fail(e: Error) -> Failure {
    let status = match &e {
        Error::TrialBudgetExceeded { .. } => GsStatus::BudgetExceeded,
        Error::Io(_) => GsStatus::Io,
        e if e.is_solver_failure() => GsStatus::SolverFailure,
        _ => GsStatus::InvalidInput,
    };
    (status, e.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), Failure> + UnwindSafe) -> GsStatus {
    let (status, message) = match catch_unwind(f) {
        Ok(Ok(())) => return GsStatus::Ok,
        Ok(Err(failure)) => failure,
        Err(payload) => {
            let text = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            (GsStatus::Panic, format!("panic: {text}"))
        }
    };
    LAST_ERROR.with(|m| *m.borrow_mut() = message);
    status
}

fn non_null<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    // SAFETY: callers pass pointers that are null or valid for reads of T.
    unsafe { p.as_ref() }.ok_or_else(|| (GsStatus::NullPointer, format!("{name} is null")))
}

fn out_ptr<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: callers pass pointers that are null or valid for writes of T.
    unsafe { p.as_mut() }.ok_or_else(|| (GsStatus::NullPointer, format!("{name} is null")))
}

fn spec(scenario: &GsScenario, g: &GsGrasp) -> Result<GraspSpec, Failure> {
    if !(g.center_x.is_finite() && g.center_y.is_finite() && g.axis_angle.is_finite()) {
        return Err((GsStatus::InvalidInput, "grasp pose must be finite".into()));
    }
    Ok(GraspSpec {
        center: Vec2::new(g.center_x, g.center_y),
        axis_angle: g.axis_angle,
        ..scenario.config.grasp_spec().map_err(fail)?
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the message of the most recent failed call on this thread into `buf`
/// (truncated, always NUL-terminated when `len > 0`). Returns the full message
/// length in bytes, excluding the terminator; 0 when no call has failed.
///
/// # Safety
/// `buf` must be null or valid for writes of `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn gs_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|m| {
        let m = m.borrow();
        if !buf.is_null() && len > 0 {
            let n = m.len().min(len - 1);
            // SAFETY: `buf` holds `len > n` bytes.
            unsafe {
                std::ptr::copy_nonoverlapping(m.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
        }
        m.len()
    })
}

/// Scenario with every setting at its default.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gs_scenario_default(out: *mut *mut GsScenario) -> GsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = Box::into_raw(Box::new(GsScenario { config: ScenarioConfig::default() }));
        Ok(())
    })
}

/// Parse a JSON scenario. Missing fields take their defaults; relative polygon
/// paths resolve against the working directory.
///
/// # Safety
/// `json` must be null or a NUL-terminated string; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gs_scenario_from_json(json: *const c_char, out: *mut *mut GsScenario) -> GsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if json.is_null() {
            return Err((GsStatus::NullPointer, "json is null".into()));
        }
        // SAFETY: non-null and NUL-terminated per the contract.
        let text = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|e| (GsStatus::InvalidInput, format!("json is not UTF-8: {e}")))?;
        let config = ScenarioConfig::from_json_str(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(GsScenario { config }));
        Ok(())
    })
}

/// Release a scenario. Null is ignored.
///
/// # Safety
/// `scenario` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gs_scenario_free(scenario: *mut GsScenario) {
    if !scenario.is_null() {
        // SAFETY: created by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(scenario) });
    }
}

/// Simulate one unperturbed grasp.
///
/// # Safety
/// Pointers must be null or valid; `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gs_run_grasp(
    scenario: *const GsScenario,
    grasp: *const GsGrasp,
    out: *mut GsOutcome,
) -> GsStatus {
    guard(|| {
        let s = non_null(scenario, "scenario")?;
        let u = spec(s, non_null(grasp, "grasp")?)?;
        let out = out_ptr(out, "out")?;
        let o = grasp::run_grasp(&s.config, &u, RunOptions::default()).map_err(fail)?;
        *out = GsOutcome {
            success: o.success,
            squeeze_end: o.squeeze_end.into(),
            psi: o.psi,
            object_x: o.final_object_pose.x,
            object_y: o.final_object_pose.y,
            object_theta: o.final_object_pose.theta,
            steps: o.steps as u64,
            newton_iterations: o.newton_iterations as u64,
            min_distance: o.min_distance,
        };
        Ok(())
    })
}

/// Success fraction over `trials` perturbed copies of the grasp, drawn from `seed`.
///
/// # Safety
/// Pointers must be null or valid; `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gs_estimate_robustness(
    scenario: *const GsScenario,
    grasp: *const GsGrasp,
    trials: u64,
    seed: u64,
    out: *mut GsRobustness,
) -> GsStatus {
    guard(|| {
        let s = non_null(scenario, "scenario")?;
        let u = spec(s, non_null(grasp, "grasp")?)?;
        let out = out_ptr(out, "out")?;
        let est =
            grasp::estimate_robustness(&s.config, &u, trials as usize, seed, RunOptions::default()).map_err(fail)?;
        *out = GsRobustness {
            r: est.r,
            trials: est.n as u64,
            successes: est.successes() as u64,
            invalid: est.invalid.len() as u64,
        };
        Ok(())
    })
}

/// Analytic holding prediction for the grasp on the scenario's object.
///
/// # Safety
/// Pointers must be null or valid; `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gs_analytic_predict(
    scenario: *const GsScenario,
    grasp: *const GsGrasp,
    out: *mut bool,
) -> GsStatus {
    guard(|| {
        let s = non_null(scenario, "scenario")?;
        let u = spec(s, non_null(grasp, "grasp")?)?;
        let out = out_ptr(out, "out")?;
        *out = analytic::predict(&s.config, &u).map_err(fail)?;
        Ok(())
    })
}

/// Whether two contacts can hold the object against gravity.
///
/// # Safety
/// Pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn gs_wrench_resistance(input: *const GsContactInput, out: *mut bool) -> GsStatus {
    guard(|| {
        let c = non_null(input, "input")?;
        let out = out_ptr(out, "out")?;
        let v = |p: [f64; 2]| Vec2::new(p[0], p[1]);
        *out = analytic::wrench_resistance(&ContactModelInput {
            points: c.points.map(v),
            normals: c.normals.map(v),
            mu: c.mu,
            max_normal_force: c.max_normal_force,
            torsion_ratio: c.torsion_ratio,
            mass: c.mass,
            center_of_mass: v(c.center_of_mass),
            gravity: c.gravity,
        });
        Ok(())
    })
}

/// Squeeze stop rule: both pad energies at or above the threshold and within
/// the default balance band of each other.
#[no_mangle]
pub extern "C" fn gs_squeeze_termination(psi1: f64, psi2: f64, psi_th: f64) -> bool {
    grasp::squeeze_termination(psi1, psi2, psi_th)
}

/// Precision, recall and F1 of `n` predictions against `n` labels, paired by index.
///
/// # Safety
/// `predictions` and `labels` must be valid for reads of `n` doubles (or null when `n == 0`).
#[no_mangle]
pub unsafe extern "C" fn gs_compute_metrics(
    predictions: *const f64,
    labels: *const f64,
    n: usize,
    threshold: f64,
    out: *mut GsMetrics,
) -> GsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if n > 0 && (predictions.is_null() || labels.is_null()) {
            return Err((GsStatus::NullPointer, "predictions or labels is null".into()));
        }
        if !(0.0..=1.0).contains(&threshold) {
            return Err((GsStatus::InvalidInput, format!("threshold outside [0, 1]: {threshold}")));
        }
        let (p, l) = if n == 0 {
            (&[][..], &[][..])
        } else {
            // SAFETY: both hold `n` doubles per the contract.
            unsafe { (std::slice::from_raw_parts(predictions, n), std::slice::from_raw_parts(labels, n)) }
        };
        let id = |i: usize| format!("{i}");
        let preds: BTreeMap<String, f64> = p.iter().enumerate().map(|(i, &r)| (id(i), r)).collect();
        let set = LabelSet::from_pairs(l.iter().enumerate().map(|(i, &r)| (id(i), r))).map_err(fail)?;
        let m = compute_metrics(&preds, &set, threshold).map_err(fail)?;
        *out = GsMetrics {
            ap: m.ap,
            ar: m.ar,
            f1: m.f1,
            tp: m.tp as u64,
            fp: m.fp as u64,
            tn: m.tn as u64,
            fn_: m.fn_ as u64,
        };
        Ok(())
    })
}
