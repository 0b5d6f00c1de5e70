mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use gripsim::config::ScenarioConfig;
use gripsim::grasp::RunOptions;
use gripsim::harness::{
    best_cell, comparison_report, compute_metrics, param_sweep, parse_grasp_list, run_batch, strip_timing,
    write_results, write_sweep, LabelSet, MetricsReport, Mode, SweepCell, ANALYTIC_LABEL, RESULTS_HEADER,
    SIMULATOR_LABEL,
};

use common::*;

fn records(text: &str) -> Vec<csv::StringRecord> {
    csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes()).records().map(|r| r.unwrap()).collect()
}

fn results_text(batch: &gripsim::harness::BatchResult) -> String {
    let mut buf = Vec::new();
    write_results(&mut buf, batch).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn batch_writes_one_row_per_trial_and_a_summary() {
    let cfg = ScenarioConfig::default();
    let grasps = parse_grasp_list("id,x,y,angle\ncentered,0,0.021,0\n", "list").unwrap();
    let batch = run_batch(&cfg, &grasps, Mode::Both, 5, RunOptions::default()).unwrap();
    let text = results_text(&batch);
    let rows = records(&text);
    assert_eq!(rows.len(), 1 + 5 + 1);
    assert_eq!(rows[0].iter().collect::<Vec<_>>(), RESULTS_HEADER.to_vec());
    assert!(rows.iter().all(|r| r.len() == RESULTS_HEADER.len()));
    for (k, r) in rows[1..6].iter().enumerate() {
        assert_eq!((&r[0], &r[1], &r[2]), ("trial", "centered", k.to_string().as_str()));
    }
    let summary = &rows[6];
    assert_eq!(&summary[0], "summary");
    let r: f64 = summary[12].parse().unwrap();
    let successes = rows[1..6].iter().filter(|t| &t[4] == "1").count();
    assert_eq!(r, successes as f64 / 5.0);
    assert_eq!(&summary[13], "1");
    assert!(text.ends_with('\n') && !text.contains('\r'));

    let again = run_batch(&cfg, &grasps, Mode::Both, 5, RunOptions::default()).unwrap();
    assert_eq!(strip_timing(&text), strip_timing(&results_text(&again)));

    let labels = LabelSet::from_pairs([("centered".to_string(), 1.0)]).unwrap();
    let report = comparison_report(&batch, &labels, 0.5).unwrap();
    let names: Vec<&str> = report.iter().map(|r| r.model.as_str()).collect();
    assert_eq!(names, [ANALYTIC_LABEL, SIMULATOR_LABEL]);
}

#[test]
fn single_cell_sweep_is_its_own_best() {
    let cfg = ScenarioConfig::default();
    let grasps = parse_grasp_list("centered,0,0.021,0\nabove,0,0.121,0\n", "list").unwrap();
    let labels = LabelSet::from_pairs([("centered".to_string(), 1.0), ("above".to_string(), 0.0)]).unwrap();
    let sweep = param_sweep(&cfg, &[1e8], &[0.4], &grasps, &labels, 1, 0.5).unwrap();
    assert_eq!(sweep.cells.len(), 1);
    assert_eq!(sweep.best, Some(0));
    let m = sweep.cells[0].metrics.unwrap();
    assert_eq!(m.total(), 2);
    let mut buf = Vec::new();
    write_sweep(&mut buf, &sweep).unwrap();
    let rows = records(&String::from_utf8(buf).unwrap());
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[1][10], "1");
}

#[test]
fn dominant_cell_wins_regardless_of_position() {
    let cell = |e: f64, mu: f64, f1_counts: (usize, usize, usize)| SweepCell {
        youngs_modulus: e,
        mu,
        metrics: Some(MetricsReport::from_counts(f1_counts.0, f1_counts.1, 0, f1_counts.2, 0.5)),
        errors: 0,
    };
    for pos in 0..6 {
        let mut cells: Vec<SweepCell> = (0..6).map(|i| cell(1e7 * (i + 1) as f64, 0.3, (1, 1, 1))).collect();
        cells[pos] = cell(cells[pos].youngs_modulus, 0.3, (3, 0, 0));
        assert_eq!(best_cell(&cells), Some(pos));
    }
    let mut cells = vec![cell(1e9, 0.5, (1, 0, 0)), cell(1e8, 0.6, (1, 0, 0)), cell(1e8, 0.4, (2, 0, 0))];
    assert_eq!(best_cell(&cells), Some(2));
    cells[2].metrics = None;
    assert_eq!(best_cell(&cells), Some(1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn metrics_match_brute_force_counts(
        pairs in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..40),
        threshold in 0.0f64..=1.0,
    ) {
        let preds: BTreeMap<String, f64> = pairs.iter().enumerate().map(|(i, p)| (format!("g{i}"), p.0)).collect();
        let truth: BTreeMap<String, f64> = pairs.iter().enumerate().map(|(i, p)| (format!("g{i}"), p.1)).collect();
        let m = compute_metrics(&preds, &LabelSet::from_pairs(truth.clone()).unwrap(), threshold).unwrap();
        let [tp, fp, tn, fn_] = tally(&preds, &truth, threshold);
        prop_assert_eq!([m.tp, m.fp, m.tn, m.fn_], [tp, fp, tn, fn_]);
        let ap = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
        let ar = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
        prop_assert_eq!((m.ap, m.ar), (ap, ar));
        let f1 = if ap + ar == 0.0 { 0.0 } else { 2.0 * ap * ar / (ap + ar) };
        prop_assert!((m.f1 - f1).abs() <= 1e-15);
    }
}
