//! Threshold-binarized precision, recall and F1 against physical labels.

use std::collections::BTreeMap;
use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    /// Precision, TP / (TP + FP), 1 when nothing is predicted positive.
    pub ap: f64,
    /// Recall, TP / (TP + FN), 1 when nothing is labeled positive.
    pub ar: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub threshold: f64,
}

impl MetricsReport {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize, threshold: f64) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        let ap = ratio(tp, tp + fp);
        let ar = ratio(tp, tp + fn_);
        let f1 = if ap + ar == 0.0 { 0.0 } else { 2.0 * ap * ar / (ap + ar) };
        Self { ap, ar, f1, tp, fp, tn, fn_, threshold }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Physical robustness per grasp id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelSet {
    labels: BTreeMap<String, f64>,
}

impl LabelSet {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, f64)>) -> Result<Self> {
        let mut labels = BTreeMap::new();
        for (id, r) in pairs {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidInput(format!("robustness of {id:?} outside [0, 1]: {r}")));
            }
            if labels.insert(id.clone(), r).is_some() {
                return Err(Error::InvalidInput(format!("duplicate grasp id {id:?}")));
            }
        }
        Ok(Self { labels })
    }

    /// Parse `grasp_id,robustness` lines; an optional header row and `#` comments are skipped.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        Self::from_pairs(read_id_values(text, source)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, &path.display().to_string())
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.labels.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.labels.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Read two-column `id,value` records. A first row whose value does not parse is
/// treated as a header.
pub fn read_id_values(text: &str, source: &str) -> Result<Vec<(String, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: source.to_string(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        let err = |message: String| Error::Parse { path: source.to_string(), line, message };
        if record.len() != 2 {
            return Err(err(format!("expected 2 fields, got {}", record.len())));
        }
        match record[1].parse::<f64>() {
            Ok(v) => out.push((record[0].to_string(), v)),
            Err(_) if k == 0 => continue,
            Err(e) => return Err(err(format!("{:?}: {e}", &record[1]))),
        }
    }
    Ok(out)
}

/// Binarize predictions and labels at `threshold` (at or above is positive) and
/// tally the confusion matrix over all predicted ids.
pub fn compute_metrics(
    predictions: &BTreeMap<String, f64>,
    labels: &LabelSet,
    threshold: f64,
) -> Result<MetricsReport> {
    let missing: Vec<String> = predictions.keys().filter(|id| labels.get(id).is_none()).cloned().collect();
    if !missing.is_empty() {
        return Err(Error::MissingLabels(missing));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (id, &r) in predictions {
        let truth = labels.get(id).unwrap() >= threshold;
        match (r >= threshold, truth) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(MetricsReport::from_counts(tp, fp, tn, fn_, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preds(v: &[(&str, f64)]) -> BTreeMap<String, f64> {
        v.iter().map(|(k, r)| (k.to_string(), *r)).collect()
    }

    #[test]
    fn perfect_predictions() {
        let labels = LabelSet::parse("grasp_id,robustness\na,1.0\nb,0.0\nc,0.8\n", "l").unwrap();
        let m = compute_metrics(&preds(&[("a", 1.0), ("b", 0.0), ("c", 0.8)]), &labels, 0.5).unwrap();
        assert_eq!((m.ap, m.ar, m.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn all_positive_on_half_positive_set() {
        let labels = LabelSet::parse("a,1\nb,0\nc,1\nd,0\n", "l").unwrap();
        let m = compute_metrics(&preds(&[("a", 1.0), ("b", 1.0), ("c", 1.0), ("d", 1.0)]), &labels, 0.5).unwrap();
        assert_eq!((m.ap, m.ar), (0.5, 1.0));
        assert_eq!(m.f1, 2.0 / 3.0);
    }

    #[test]
    fn empty_denominators() {
        let m = MetricsReport::from_counts(0, 0, 3, 0, 0.5);
        assert_eq!((m.ap, m.ar, m.f1), (1.0, 1.0, 1.0));
        let m = MetricsReport::from_counts(0, 2, 0, 2, 0.5);
        assert_eq!((m.ap, m.ar, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn missing_labels_are_listed() {
        let labels = LabelSet::parse("a,1\n", "l").unwrap();
        match compute_metrics(&preds(&[("a", 1.0), ("z", 0.0), ("y", 1.0)]), &labels, 0.5) {
            Err(Error::MissingLabels(ids)) => assert_eq!(ids, vec!["y".to_string(), "z".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_label_lines() {
        assert!(matches!(LabelSet::parse("a,1\nb,zz\n", "l"), Err(Error::Parse { line: 2, .. })));
        assert!(LabelSet::parse("a,1\na,0\n", "l").is_err());
        assert!(LabelSet::parse("a,1.5\n", "l").is_err());
    }
}
