//! Confusion-matrix accumulation and the derived metric stack:
//! per-class precision, recall, one-vs-rest accuracy, F1, and their
//! unweighted macro averages.

use crate::error::{Error, Result};
use crate::train::EpochLog;
use serde::Deserialize;

/// k×k counts, rows = actual class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
    class_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>) -> Result<Self> {
        if class_names.is_empty() {
            return Err(Error::usage("confusion matrix needs at least one class"));
        }
        let unique: std::collections::BTreeSet<&String> = class_names.iter().collect();
        if unique.len() != class_names.len() {
            return Err(Error::data("confusion matrix class names must be unique"));
        }
        let k = class_names.len();
        Ok(ConfusionMatrix {
            k,
            counts: vec![0; k * k],
            class_names,
        })
    }

    /// Builds a matrix from (actual, predicted) index pairs.
    pub fn from_predictions(pairs: &[(usize, usize)], class_names: Vec<String>) -> Result<Self> {
        let mut cm = ConfusionMatrix::new(class_names)?;
        for &(actual, predicted) in pairs {
            cm.record(actual, predicted)?;
        }
        Ok(cm)
    }

    pub fn record(&mut self, actual: usize, predicted: usize) -> Result<()> {
        if actual >= self.k || predicted >= self.k {
            return Err(Error::data(format!(
                "label pair ({actual}, {predicted}) out of range for {} classes",
                self.k
            )));
        }
        self.counts[actual * self.k + predicted] += 1;
        Ok(())
    }

    /// Entrywise sum; matrices form a commutative monoid under merge.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.class_names != other.class_names {
            return Err(Error::contract("cannot merge matrices over different classes"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn class_count(&self) -> usize {
        self.k
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn count(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual * self.k + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.count(i, i)).sum()
    }

    pub fn row_sum(&self, actual: usize) -> u64 {
        (0..self.k).map(|p| self.count(actual, p)).sum()
    }

    pub fn col_sum(&self, predicted: usize) -> u64 {
        (0..self.k).map(|a| self.count(a, predicted)).sum()
    }

    /// Integer tallies (TP, FP, FN, TN) for one class.
    pub fn tallies(&self, class: usize) -> (u64, u64, u64, u64) {
        let tp = self.count(class, class);
        let fp = self.col_sum(class) - tp;
        let fn_count = self.row_sum(class) - tp;
        let tn = self.total() - tp - fp - fn_count;
        (tp, fp, fn_count, tn)
    }
}

/// Precision, recall, one-vs-rest accuracy, and F1 for one class
/// (or macro averages of those).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
}

/// Per-class metrics. For class c: TP = counts[c][c], FN = row − TP,
/// FP = col − TP, TN = total − TP − FP − FN; precision TP/(TP+FP),
/// recall TP/(TP+FN), accuracy (TP+TN)/total, f1 2PR/(P+R). Any 0/0
/// is defined as 0.
pub fn per_class_metrics(cm: &ConfusionMatrix) -> Result<Vec<ClassMetrics>> {
    if cm.total() == 0 {
        return Err(Error::usage("cannot compute metrics of an empty matrix"));
    }
    let total = cm.total() as f64;
    let mut out = Vec::with_capacity(cm.class_count());
    for c in 0..cm.class_count() {
        let (tp, fp, fn_count, tn) = cm.tallies(c);
        let (tp_f, fp_f, fn_f, tn_f) = (tp as f64, fp as f64, fn_count as f64, tn as f64);
        let precision = if tp + fp > 0 { tp_f / (tp_f + fp_f) } else { 0.0 };
        let recall = if tp + fn_count > 0 { tp_f / (tp_f + fn_f) } else { 0.0 };
        let accuracy = (tp_f + tn_f) / total;
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        out.push(ClassMetrics {
            precision,
            recall,
            accuracy,
            f1,
        });
    }
    Ok(out)
}

/// Unweighted arithmetic mean of each field.
pub fn macro_average(per_class: &[ClassMetrics]) -> Result<ClassMetrics> {
    if per_class.is_empty() {
        return Err(Error::usage("cannot macro-average an empty metric list"));
    }
    let n = per_class.len() as f64;
    Ok(ClassMetrics {
        precision: per_class.iter().map(|m| m.precision).sum::<f64>() / n,
        recall: per_class.iter().map(|m| m.recall).sum::<f64>() / n,
        accuracy: per_class.iter().map(|m| m.accuracy).sum::<f64>() / n,
        f1: per_class.iter().map(|m| m.f1).sum::<f64>() / n,
    })
}

/// Full metric report for a confusion matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub class_names: Vec<String>,
    pub per_class: Vec<ClassMetrics>,
    pub macro_avg: ClassMetrics,
    pub total_examples: u64,
}

pub fn metrics_report(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let per_class = per_class_metrics(cm)?;
    let macro_avg = macro_average(&per_class)?;
    Ok(MetricsReport {
        class_names: cm.class_names().to_vec(),
        per_class,
        macro_avg,
        total_examples: cm.total(),
    })
}

fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

/// Report JSON with stable key order and six fractional digits:
/// `{"classes": [{"name", "precision", "recall", "accuracy", "f1"}…],
///   "macro": {…}, "total": n}`.
pub fn emit_report_json(report: &MetricsReport) -> String {
    let mut out = String::from("{\n  \"classes\": [\n");
    for (i, (name, m)) in report
        .class_names
        .iter()
        .zip(&report.per_class)
        .enumerate()
    {
        out.push_str(&format!(
            "    {{\"name\": {}, \"precision\": {}, \"recall\": {}, \"accuracy\": {}, \"f1\": {}}}{}\n",
            serde_json::to_string(name).expect("string serialization"),
            fmt6(m.precision),
            fmt6(m.recall),
            fmt6(m.accuracy),
            fmt6(m.f1),
            if i + 1 < report.per_class.len() { "," } else { "" }
        ));
    }
    let m = &report.macro_avg;
    out.push_str("  ],\n");
    out.push_str(&format!(
        "  \"macro\": {{\"precision\": {}, \"recall\": {}, \"accuracy\": {}, \"f1\": {}}},\n",
        fmt6(m.precision),
        fmt6(m.recall),
        fmt6(m.accuracy),
        fmt6(m.f1)
    ));
    out.push_str(&format!("  \"total\": {}\n}}\n", report.total_examples));
    out
}

#[derive(Debug, Deserialize)]
struct ReportDoc {
    classes: Vec<ReportClassDoc>,
    #[serde(rename = "macro")]
    macro_avg: ReportMetricsDoc,
    total: u64,
}

#[derive(Debug, Deserialize)]
struct ReportClassDoc {
    name: String,
    precision: f64,
    recall: f64,
    accuracy: f64,
    f1: f64,
}

#[derive(Debug, Deserialize)]
struct ReportMetricsDoc {
    precision: f64,
    recall: f64,
    accuracy: f64,
    f1: f64,
}

pub fn parse_report_json(text: &str) -> Result<MetricsReport> {
    let doc: ReportDoc = serde_json::from_str(text)?;
    if doc.classes.is_empty() {
        return Err(Error::data("report has no classes"));
    }
    Ok(MetricsReport {
        class_names: doc.classes.iter().map(|c| c.name.clone()).collect(),
        per_class: doc
            .classes
            .iter()
            .map(|c| ClassMetrics {
                precision: c.precision,
                recall: c.recall,
                accuracy: c.accuracy,
                f1: c.f1,
            })
            .collect(),
        macro_avg: ClassMetrics {
            precision: doc.macro_avg.precision,
            recall: doc.macro_avg.recall,
            accuracy: doc.macro_avg.accuracy,
            f1: doc.macro_avg.f1,
        },
        total_examples: doc.total,
    })
}

/// Plain-text table: one aligned row per class plus a macro row.
pub fn emit_report_table(report: &MetricsReport) -> String {
    let name_width = report
        .class_names
        .iter()
        .map(|n| n.len())
        .chain(["class".len(), "macro".len()])
        .max()
        .unwrap_or(5);
    let mut out = format!(
        "{:<name_width$}  {:>9}  {:>9}  {:>9}  {:>9}\n",
        "class", "precision", "recall", "accuracy", "f1"
    );
    for (name, m) in report.class_names.iter().zip(&report.per_class) {
        out.push_str(&format!(
            "{:<name_width$}  {:>9}  {:>9}  {:>9}  {:>9}\n",
            name,
            fmt6(m.precision),
            fmt6(m.recall),
            fmt6(m.accuracy),
            fmt6(m.f1)
        ));
    }
    let m = &report.macro_avg;
    out.push_str(&format!(
        "{:<name_width$}  {:>9}  {:>9}  {:>9}  {:>9}\n",
        "macro",
        fmt6(m.precision),
        fmt6(m.recall),
        fmt6(m.accuracy),
        fmt6(m.f1)
    ));
    out
}

/// Training-curve CSV: `epoch,train_acc,val_acc,train_ce,val_ce` with
/// six fractional digits, epochs numbered from 1.
pub fn emit_curves_csv(log: &EpochLog) -> Result<String> {
    if log.is_empty() {
        return Err(Error::usage("cannot emit an empty epoch log"));
    }
    let mut out = String::from("epoch,train_acc,val_acc,train_ce,val_ce\n");
    for (i, e) in log.entries().iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i + 1,
            fmt6(e.train_accuracy),
            fmt6(e.validation_accuracy),
            fmt6(e.train_cross_entropy),
            fmt6(e.validation_cross_entropy)
        ));
    }
    Ok(out)
}

/// Confusion-matrix CSV: a header row of class names, then one row per
/// actual class: `actual_name,c1,…,ck`.
pub fn emit_confusion_csv(cm: &ConfusionMatrix) -> String {
    let mut out = cm.class_names().join(",");
    out.push('\n');
    for a in 0..cm.class_count() {
        out.push_str(&cm.class_names()[a]);
        for p in 0..cm.class_count() {
            out.push_str(&format!(",{}", cm.count(a, p)));
        }
        out.push('\n');
    }
    out
}

/// Parses the CSV form emitted by [`emit_confusion_csv`]. A leading
/// `actual`/empty header cell (spreadsheet style) is tolerated.
pub fn parse_confusion_csv(text: &str) -> Result<ConfusionMatrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::data("confusion CSV is empty"))?;
    let mut names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if names.len() > 1 && (names[0].is_empty() || names[0].eq_ignore_ascii_case("actual")) {
        names.remove(0);
    }
    if names.is_empty() || names.iter().any(|n| n.is_empty()) {
        return Err(Error::data("confusion CSV header must list class names"));
    }
    let k = names.len();
    let mut cm = ConfusionMatrix::new(names.clone())?;
    let mut rows = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').map(|s| s.trim()).collect();
        if cells.len() != k + 1 {
            return Err(Error::data(format!(
                "confusion CSV row has {} cells, expected {}",
                cells.len(),
                k + 1
            )));
        }
        let actual = names
            .iter()
            .position(|n| n == cells[0])
            .ok_or_else(|| Error::data(format!("unknown class {} in row", cells[0])))?;
        for (p, cell) in cells[1..].iter().enumerate() {
            let count: u64 = cell
                .parse()
                .map_err(|_| Error::data(format!("bad count {cell:?} in confusion CSV")))?;
            for _ in 0..count {
                cm.record(actual, p)?;
            }
        }
        rows += 1;
    }
    if rows != k {
        return Err(Error::data(format!(
            "confusion CSV has {rows} data rows, expected {k}"
        )));
    }
    Ok(cm)
}

/// Five-class reference matrix used by the unit tests; rows are actual
/// classes.
#[cfg(test)]
fn table_fixture() -> ConfusionMatrix {
    let names = ["China", "Germany", "India", "Jamaica", "Zimbabwe"];
    let counts = [
        [18, 1, 0, 1, 0],
        [0, 19, 1, 0, 0],
        [1, 0, 16, 1, 2],
        [0, 1, 0, 16, 3],
        [1, 1, 0, 3, 15],
    ];
    let mut cm = ConfusionMatrix::new(names.iter().map(|s| s.to_string()).collect()).unwrap();
    for (a, row) in counts.iter().enumerate() {
        for (p, &n) in row.iter().enumerate() {
            for _ in 0..n {
                cm.record(a, p).unwrap();
            }
        }
    }
    cm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_correct_pairs_make_a_diagonal_matrix() {
        let pairs = [(0, 0), (1, 1), (2, 2), (1, 1)];
        let cm = ConfusionMatrix::from_predictions(
            &pairs,
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        assert_eq!(cm.trace(), 4);
        assert_eq!(cm.total(), 4);
        for a in 0..3 {
            for p in 0..3 {
                if a != p {
                    assert_eq!(cm.count(a, p), 0);
                }
            }
        }
    }

    #[test]
    fn fixture_rows_sum_to_twenty() {
        let cm = table_fixture();
        for a in 0..5 {
            assert_eq!(cm.row_sum(a), 20);
        }
        assert_eq!(cm.total(), 100);
    }

    #[test]
    fn out_of_range_label_is_data_error() {
        let mut cm = ConfusionMatrix::new(vec!["a".into(), "b".into()]).unwrap();
        assert!(matches!(cm.record(2, 0), Err(Error::Data(_))));
    }

    #[test]
    fn empty_matrix_is_accepted_but_metrics_reject_it() {
        let cm = ConfusionMatrix::new(vec!["a".into()]).unwrap();
        assert_eq!(cm.total(), 0);
        assert!(per_class_metrics(&cm).is_err());
    }

    #[test]
    fn fixture_per_class_accuracies_are_exact() {
        let metrics = per_class_metrics(&table_fixture()).unwrap();
        let accuracies: Vec<f64> = metrics.iter().map(|m| m.accuracy).collect();
        assert_eq!(accuracies, vec![0.96, 0.96, 0.95, 0.91, 0.90]);
    }

    #[test]
    fn fixture_precision_recall_f1_match_hand_derivation() {
        let metrics = per_class_metrics(&table_fixture()).unwrap();
        let expect_precision = [18.0 / 20.0, 19.0 / 22.0, 16.0 / 17.0, 16.0 / 21.0, 15.0 / 20.0];
        let expect_recall = [0.90, 0.95, 0.80, 0.80, 0.75];
        for (c, m) in metrics.iter().enumerate() {
            assert!((m.precision - expect_precision[c]).abs() < 1e-12);
            assert!((m.recall - expect_recall[c]).abs() < 1e-12);
            let f1 = 2.0 * expect_precision[c] * expect_recall[c]
                / (expect_precision[c] + expect_recall[c]);
            assert!((m.f1 - f1).abs() < 1e-12);
        }
        // four-decimal projections
        let rounded: Vec<f64> = metrics.iter().map(|m| (m.precision * 1e4).round() / 1e4).collect();
        assert_eq!(rounded, vec![0.9000, 0.8636, 0.9412, 0.7619, 0.7500]);
        let f1s: Vec<f64> = metrics.iter().map(|m| (m.f1 * 1e4).round() / 1e4).collect();
        assert_eq!(f1s, vec![0.9000, 0.9048, 0.8649, 0.7805, 0.7500]);
    }

    #[test]
    fn diagonal_matrix_scores_ones_everywhere() {
        let pairs: Vec<(usize, usize)> = (0..4).flat_map(|c| vec![(c, c); 3]).collect();
        let cm = ConfusionMatrix::from_predictions(
            &pairs,
            (0..4).map(|i| format!("c{i}")).collect(),
        )
        .unwrap();
        for m in per_class_metrics(&cm).unwrap() {
            assert_eq!(m.precision, 1.0);
            assert_eq!(m.recall, 1.0);
            assert_eq!(m.accuracy, 1.0);
            assert_eq!(m.f1, 1.0);
        }
    }

    #[test]
    fn macro_average_of_fixture_accuracies() {
        let metrics = per_class_metrics(&table_fixture()).unwrap();
        let macro_avg = macro_average(&metrics).unwrap();
        assert!((macro_avg.accuracy - 0.936).abs() < 1e-12);
        assert_eq!(fmt6(macro_avg.accuracy), "0.936000");
        assert!((macro_avg.recall - 0.84).abs() < 1e-12);
        let expect_precision = (0.9 + 19.0 / 22.0 + 16.0 / 17.0 + 16.0 / 21.0 + 0.75) / 5.0;
        assert!((macro_avg.precision - expect_precision).abs() < 1e-12);
        assert_eq!((macro_avg.precision * 1e4).round() / 1e4, 0.8433);
    }

    #[test]
    fn macro_average_of_identical_metrics_is_identity() {
        let m = ClassMetrics {
            precision: 0.5,
            recall: 0.25,
            accuracy: 0.75,
            f1: 1.0 / 3.0,
        };
        let avg = macro_average(&[m, m, m]).unwrap();
        assert_eq!(avg, m);
        assert!(macro_average(&[]).is_err());
    }

    #[test]
    fn zero_over_zero_conventions() {
        // class 1 never occurs and is never predicted: all ratios 0/0 -> 0
        let cm = ConfusionMatrix::from_predictions(&[(0, 0), (0, 0)], vec!["a".into(), "b".into()])
            .unwrap();
        let metrics = per_class_metrics(&cm).unwrap();
        assert_eq!(metrics[1].precision, 0.0);
        assert_eq!(metrics[1].recall, 0.0);
        assert_eq!(metrics[1].f1, 0.0);
        assert_eq!(metrics[1].accuracy, 1.0);
    }

    #[test]
    fn report_json_roundtrip_is_byte_identical() {
        let report = metrics_report(&table_fixture()).unwrap();
        let json = emit_report_json(&report);
        let parsed = parse_report_json(&json).unwrap();
        assert_eq!(emit_report_json(&parsed), json);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["total"], 100);
    }

    #[test]
    fn table_output_shows_fixture_accuracies() {
        let report = metrics_report(&table_fixture()).unwrap();
        let table = emit_report_table(&report);
        for needle in ["0.960000", "0.950000", "0.910000", "0.900000", "0.936000"] {
            assert!(table.contains(needle), "missing {needle} in:\n{table}");
        }
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 7); // header + 5 classes + macro
        assert!(lines[6].starts_with("macro"));
    }

    #[test]
    fn single_class_report_renders() {
        let cm = ConfusionMatrix::from_predictions(&[(0, 0)], vec!["only".into()]).unwrap();
        let report = metrics_report(&cm).unwrap();
        let table = emit_report_table(&report);
        assert!(table.contains("1.000000"));
        let json = emit_report_json(&report);
        assert!(parse_report_json(&json).is_ok());
    }

    #[test]
    fn curves_csv_has_header_and_one_row_per_epoch() {
        use crate::train::EpochStats;
        let mut log = EpochLog::default();
        for i in 0..3 {
            log.push(EpochStats {
                train_accuracy: 0.5 + 0.1 * i as f64,
                validation_accuracy: 0.4 + 0.1 * i as f64,
                train_cross_entropy: 1.0 / (i + 1) as f64,
                validation_cross_entropy: 1.2 / (i + 1) as f64,
            });
        }
        let csv = emit_curves_csv(&log).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "epoch,train_acc,val_acc,train_ce,val_ce");
        assert!(lines[1].starts_with("1,0.500000,0.400000,"));

        // values survive a parse within 1e-6
        for (i, line) in lines[1..].iter().enumerate() {
            let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            assert_eq!(cells[0] as usize, i + 1);
            assert!((cells[1] - log.entries()[i].train_accuracy).abs() < 1e-6);
            assert!((cells[3] - log.entries()[i].train_cross_entropy).abs() < 1e-6);
        }

        assert!(emit_curves_csv(&EpochLog::default()).is_err());
    }

    #[test]
    fn confusion_csv_roundtrip() {
        let cm = table_fixture();
        let csv = emit_confusion_csv(&cm);
        let parsed = parse_confusion_csv(&csv).unwrap();
        assert_eq!(parsed, cm);

        // spreadsheet-style leading header cell also parses
        let with_corner = format!("actual,{csv}");
        assert_eq!(parse_confusion_csv(&with_corner).unwrap(), cm);
    }

    #[test]
    fn confusion_csv_rejects_malformed_input() {
        assert!(parse_confusion_csv("").is_err());
        assert!(parse_confusion_csv("a,b\na,1\n").is_err()); // wrong cell count
        assert!(parse_confusion_csv("a,b\na,1,2\nc,3,4\n").is_err()); // unknown class
        assert!(parse_confusion_csv("a,b\na,1,x\nb,3,4\n").is_err()); // bad count
        assert!(parse_confusion_csv("a,a\na,1,2\na,3,4\n").is_err()); // duplicate class
    }
}
