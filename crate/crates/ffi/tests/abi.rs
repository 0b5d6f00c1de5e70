use std::ffi::{c_char, CStr, CString};
use std::ptr;

use gripsim_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let n = unsafe { gs_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let text = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned();
    assert_eq!(n, text.len());
    text
}

fn scenario(json: &str) -> *mut GsScenario {
    let json = CString::new(json).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { gs_scenario_from_json(json.as_ptr(), &mut s) }, GsStatus::Ok);
    assert!(!s.is_null());
    s
}

const CENTERED: GsGrasp = GsGrasp { center_x: 0.0, center_y: 0.021, axis_angle: 0.0 };

#[test]
fn centered_and_missed_grasps() {
    let s = scenario("{}");
    let mut out = std::mem::MaybeUninit::<GsOutcome>::uninit();
    assert_eq!(unsafe { gs_run_grasp(s, &CENTERED, out.as_mut_ptr()) }, GsStatus::Ok);
    let o = unsafe { out.assume_init() };
    assert!(o.success);
    assert_eq!(o.squeeze_end, GsSqueezeEnd::Threshold);
    assert!(o.min_distance > 0.0 && o.object_y > 0.021);

    let above = GsGrasp { center_y: 0.121, ..CENTERED };
    let mut out = std::mem::MaybeUninit::<GsOutcome>::uninit();
    assert_eq!(unsafe { gs_run_grasp(s, &above, out.as_mut_ptr()) }, GsStatus::Ok);
    let o = unsafe { out.assume_init() };
    assert!(!o.success);
    assert_eq!(o.squeeze_end, GsSqueezeEnd::JawsMet);

    let mut held = false;
    assert_eq!(unsafe { gs_analytic_predict(s, &CENTERED, &mut held) }, GsStatus::Ok);
    assert!(held);
    unsafe { gs_scenario_free(s) };
}

#[test]
fn robustness_is_reproducible_and_validates_trials() {
    let s = scenario(r#"{"seed": 3}"#);
    let mut a = GsRobustness { r: -1.0, trials: 0, successes: 0, invalid: 0 };
    let mut b = a;
    assert_eq!(unsafe { gs_estimate_robustness(s, &CENTERED, 3, 11, &mut a) }, GsStatus::Ok);
    assert_eq!(unsafe { gs_estimate_robustness(s, &CENTERED, 3, 11, &mut b) }, GsStatus::Ok);
    assert_eq!(a, b);
    assert_eq!(a.trials, 3);
    assert_eq!(a.r, a.successes as f64 / 3.0);

    assert_eq!(unsafe { gs_estimate_robustness(s, &CENTERED, 0, 11, &mut a) }, GsStatus::InvalidInput);
    assert!(last_error().contains("at least 1"));
    unsafe { gs_scenario_free(s) };
}

#[test]
fn starved_solver_reports_budget_exceeded() {
    let s = scenario(r#"{"physics": {"max_newton_iters": 1}}"#);
    let mut r = GsRobustness { r: 0.0, trials: 0, successes: 0, invalid: 0 };
    assert_eq!(unsafe { gs_estimate_robustness(s, &CENTERED, 1, 0, &mut r) }, GsStatus::BudgetExceeded);
    let mut o = std::mem::MaybeUninit::<GsOutcome>::uninit();
    assert_eq!(unsafe { gs_run_grasp(s, &CENTERED, o.as_mut_ptr()) }, GsStatus::SolverFailure);
    assert!(last_error().contains("newton"));
    unsafe { gs_scenario_free(s) };
}

#[test]
fn bad_arguments_set_status_and_message() {
    let mut s = ptr::null_mut();
    let bad = CString::new(r#"{"physics": {"warp": 1}}"#).unwrap();
    assert_eq!(unsafe { gs_scenario_from_json(bad.as_ptr(), &mut s) }, GsStatus::InvalidInput);
    assert!(s.is_null());
    assert!(last_error().contains("warp"));

    assert_eq!(unsafe { gs_scenario_from_json(ptr::null(), &mut s) }, GsStatus::NullPointer);
    assert_eq!(last_error(), "json is null");
    let mut held = false;
    assert_eq!(unsafe { gs_run_grasp(ptr::null(), &CENTERED, ptr::null_mut()) }, GsStatus::NullPointer);
    assert_eq!(unsafe { gs_wrench_resistance(ptr::null(), &mut held) }, GsStatus::NullPointer);

    let s = scenario("{}");
    let nan = GsGrasp { center_x: f64::NAN, ..CENTERED };
    assert_eq!(unsafe { gs_analytic_predict(s, &nan, &mut held) }, GsStatus::InvalidInput);
    unsafe { gs_scenario_free(s) };
    unsafe { gs_scenario_free(ptr::null_mut()) };

    // truncation keeps the terminator and reports the full length
    let mut small = [0x7f as c_char; 5];
    let n = unsafe { gs_last_error_message(small.as_mut_ptr(), small.len()) };
    assert!(n > 4);
    assert_eq!(small[4], 0);
}

#[test]
fn metrics_wrench_and_stop_rule() {
    let preds = [0.8, 0.2, 0.6, 0.1];
    let labels = [1.0, 0.0, 0.0, 1.0];
    let mut m = GsMetrics { ap: 0.0, ar: 0.0, f1: 0.0, tp: 0, fp: 0, tn: 0, fn_: 0 };
    assert_eq!(unsafe { gs_compute_metrics(preds.as_ptr(), labels.as_ptr(), 4, 0.5, &mut m) }, GsStatus::Ok);
    assert_eq!((m.tp, m.fp, m.tn, m.fn_), (1, 1, 1, 1));
    assert_eq!((m.ap, m.ar, m.f1), (0.5, 0.5, 0.5));
    assert_eq!(unsafe { gs_compute_metrics(ptr::null(), ptr::null(), 0, 0.5, &mut m) }, GsStatus::Ok);
    assert_eq!(m.tp + m.fp + m.tn + m.fn_, 0);
    assert_eq!(unsafe { gs_compute_metrics(preds.as_ptr(), labels.as_ptr(), 4, 1.5, &mut m) }, GsStatus::InvalidInput);
    let out_of_range = [2.0, 0.0, 0.0, 0.0];
    assert_eq!(
        unsafe { gs_compute_metrics(preds.as_ptr(), out_of_range.as_ptr(), 4, 0.5, &mut m) },
        GsStatus::InvalidInput
    );

    let input = GsContactInput {
        points: [[-0.02, 0.0], [0.02, 0.0]],
        normals: [[1.0, 0.0], [-1.0, 0.0]],
        mu: 0.5,
        max_normal_force: 10.0,
        torsion_ratio: 0.005,
        mass: 0.5,
        center_of_mass: [0.0, 0.0],
        gravity: 9.81,
    };
    let mut held = false;
    assert_eq!(unsafe { gs_wrench_resistance(&input, &mut held) }, GsStatus::Ok);
    assert!(held);
    let frictionless = GsContactInput { mu: 0.0, ..input };
    assert_eq!(unsafe { gs_wrench_resistance(&frictionless, &mut held) }, GsStatus::Ok);
    assert!(!held);

    assert!(gs_squeeze_termination(50.0, 52.0, 50.0));
    assert!(!gs_squeeze_termination(49.0, 52.0, 50.0));
    let version = unsafe { CStr::from_ptr(gs_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}
