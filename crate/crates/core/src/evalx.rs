//! Classification metrics, classifier comparison and error-sample export.
//!
//! The positive class is always "bot".

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::ensemble::{Prediction, Unit};
use crate::preprocess;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no scored items")]
    EmptyInput,
    #[error("need at least two reports to compare, got {0}")]
    TooFewReports(usize),
    #[error("report {classifier} was computed on test set {found}, expected {expected}")]
    MismatchedTestSets {
        classifier: String,
        expected: String,
        found: String,
    },
    #[error("prediction for unknown tweet {0}")]
    UnknownTweet(String),
    #[error("cannot write {path}: {reason}")]
    UnwritableOutput { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn from_scores(scores: &[(f64, bool)], threshold: f64) -> Self {
        let mut c = ConfusionCounts::default();
        for &(p, truth) in scores {
            match (p >= threshold, truth) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// 2TP / (2TP + FP + FN), taken as 0 when there are no positives at all.
    pub fn f1(&self) -> f64 {
        let d = 2 * self.tp + self.fp + self.fn_;
        if d == 0 {
            0.0
        } else {
            (2 * self.tp) as f64 / d as f64
        }
    }

    /// MCC and whether the denominator was zero (in which case MCC is 0).
    pub fn mcc(&self) -> (f64, bool) {
        let (tp, fp, tn, fn_) = (self.tp as f64, self.fp as f64, self.tn as f64, self.fn_ as f64);
        let d = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if d == 0.0 {
            return (0.0, true);
        }
        ((tp * tn - fp * fn_) / d.sqrt(), false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classifier: String,
    pub unit: Unit,
    pub test_fingerprint: String,
    pub threshold: f64,
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    pub f1: f64,
    pub mcc: f64,
    /// MCC was set to 0 because a confusion-matrix marginal was empty.
    pub mcc_degenerate: bool,
    /// `None` when the labels contain a single class.
    pub auc: Option<f64>,
}

impl MetricsReport {
    pub fn tagged(mut self, classifier: &str, unit: Unit, test_fingerprint: &str) -> Self {
        self.classifier = classifier.to_string();
        self.unit = unit;
        self.test_fingerprint = test_fingerprint.to_string();
        self
    }
}

pub fn compute_metrics(scores: &[(f64, bool)], threshold: f64) -> Result<MetricsReport, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let counts = ConfusionCounts::from_scores(scores, threshold);
    let (mcc, mcc_degenerate) = counts.mcc();
    Ok(MetricsReport {
        classifier: String::new(),
        unit: Unit::Tweet,
        test_fingerprint: String::new(),
        threshold,
        counts,
        accuracy: counts.accuracy(),
        f1: counts.f1(),
        mcc,
        mcc_degenerate,
        auc: auc(scores),
    })
}

/// Mann-Whitney AUC with mid-ranks for tied scores.
pub fn auc(scores: &[(f64, bool)]) -> Option<f64> {
    let n_pos = scores.iter().filter(|s| s.1).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].0.total_cmp(&scores[b].0));
    // Ranks are doubled so that mid-ranks stay integral.
    let mut pos_rank2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]].0 == scores[order[i]].0 {
            j += 1;
        }
        let mid2 = (i + 1 + j + 1) as u64;
        let pos_in_run = order[i..=j].iter().filter(|&&k| scores[k].1).count() as u64;
        pos_rank2 += mid2 * pos_in_run;
        i = j + 1;
    }
    let (np, nn) = (n_pos as u64, n_neg as u64);
    let u2 = pos_rank2 - np * (np + 1);
    Some(u2 as f64 / (2 * np * nn) as f64)
}

/// Hash of the (id, label) pairs of a test set, independent of their order.
pub fn test_fingerprint<'a>(items: impl IntoIterator<Item = (&'a str, bool)>) -> String {
    let mut rows: Vec<(&str, bool)> = items.into_iter().collect();
    rows.sort_unstable();
    let mut h = Sha256::new();
    for (id, label) in rows {
        h.update(id.as_bytes());
        h.update([0, label as u8, b'\n']);
    }
    hex::encode(h.finalize())
}

/// Reports sorted by F1 (desc), then accuracy (desc), then classifier tag.
pub fn compare_classifiers(reports: &[MetricsReport]) -> Result<Vec<MetricsReport>, EvalError> {
    if reports.len() < 2 {
        return Err(EvalError::TooFewReports(reports.len()));
    }
    let expected = &reports[0].test_fingerprint;
    if let Some(r) = reports.iter().find(|r| &r.test_fingerprint != expected) {
        return Err(EvalError::MismatchedTestSets {
            classifier: r.classifier.clone(),
            expected: expected.clone(),
            found: r.test_fingerprint.clone(),
        });
    }
    let mut out = reports.to_vec();
    out.sort_by(|a, b| {
        b.f1.total_cmp(&a.f1)
            .then(b.accuracy.total_cmp(&a.accuracy))
            .then_with(|| a.classifier.cmp(&b.classifier))
    });
    Ok(out)
}

pub fn format_table(reports: &[MetricsReport]) -> String {
    let mut s = format!(
        "{:<16} {:>8} {:>9} {:>7} {:>7} {:>7}\n",
        "classifier", "unit", "accuracy", "f1", "mcc", "auc"
    );
    for r in reports {
        let auc = r.auc.map_or("n/a".to_string(), |a| format!("{a:.4}"));
        let unit = match r.unit {
            Unit::Tweet => "tweet",
            Unit::Account => "account",
        };
        let _ = writeln!(
            s,
            "{:<16} {:>8} {:>9.4} {:>7.4} {:>7.4} {:>7}",
            r.classifier, unit, r.accuracy, r.f1, r.mcc, auc
        );
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleFileSummary {
    pub count: usize,
    pub rt_count: usize,
    pub rt_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSampleSummary {
    pub classifier: String,
    pub true_positives: SampleFileSummary,
    pub false_positives: SampleFileSummary,
}

fn write_file(path: &Path, body: &str) -> Result<(), EvalError> {
    fs::write(path, body).map_err(|e| EvalError::UnwritableOutput {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn sample_file(path: &Path, mut rows: Vec<(&str, &str)>) -> Result<SampleFileSummary, EvalError> {
    rows.sort_unstable();
    let mut body = String::new();
    let mut rt_count = 0;
    for (id, raw) in &rows {
        if preprocess::is_retweet(raw) {
            rt_count += 1;
        }
        let line: String = raw.chars().map(|c| if c == '\n' || c == '\r' { ' ' } else { c }).collect();
        let _ = writeln!(body, "{id}\t{line}");
    }
    write_file(path, &body)?;
    let count = rows.len();
    Ok(SampleFileSummary {
        count,
        rt_count,
        rt_fraction: if count == 0 { 0.0 } else { rt_count as f64 / count as f64 },
    })
}

/// Writes `{tag}_true_positives.txt`, `{tag}_false_positives.txt` (one
/// `tweet_id<TAB>raw text` line per tweet, ordered by id) and `{tag}_summary.txt`.
/// Both sample files are created even when empty.
pub fn export_error_samples(
    tag: &str,
    predictions: &[Prediction],
    corpus: &Corpus,
    out_dir: &Path,
) -> Result<ErrorSampleSummary, EvalError> {
    fs::create_dir_all(out_dir).map_err(|e| EvalError::UnwritableOutput {
        path: out_dir.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut tps = Vec::new();
    let mut fps = Vec::new();
    for p in predictions.iter().filter(|p| p.unit == Unit::Tweet && p.label) {
        let t = corpus.tweet(&p.id).ok_or_else(|| EvalError::UnknownTweet(p.id.clone()))?;
        let truth = corpus.is_bot_account(&t.account_id).unwrap_or(false);
        let row = (t.tweet_id.as_str(), t.raw_text.as_str());
        if truth {
            tps.push(row);
        } else {
            fps.push(row);
        }
    }
    let tp = sample_file(&out_dir.join(format!("{tag}_true_positives.txt")), tps)?;
    let fp = sample_file(&out_dir.join(format!("{tag}_false_positives.txt")), fps)?;
    let mut summary = String::new();
    for (name, s) in [("true_positives", tp), ("false_positives", fp)] {
        let _ = writeln!(
            summary,
            "{name} count={} rt_count={} rt_fraction={:.4}",
            s.count, s.rt_count, s.rt_fraction
        );
    }
    write_file(&out_dir.join(format!("{tag}_summary.txt")), &summary)?;
    Ok(ErrorSampleSummary {
        classifier: tag.to_string(),
        true_positives: tp,
        false_positives: fp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counts(tp: u64, fp: u64, tn: u64, fn_: u64) -> ConfusionCounts {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    fn pair_auc(scores: &[(f64, bool)]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for a in scores.iter().filter(|s| s.1) {
            for b in scores.iter().filter(|s| !s.1) {
                den += 1.0;
                if a.0 > b.0 {
                    num += 1.0;
                } else if a.0 == b.0 {
                    num += 0.5;
                }
            }
        }
        num / den
    }

    #[test]
    fn perfect_classifier() {
        let mut s = vec![(0.9, true); 50];
        s.extend(vec![(0.1, false); 50]);
        let r = compute_metrics(&s, 0.5).unwrap();
        assert_eq!(r.counts, counts(50, 0, 50, 0));
        assert_eq!((r.accuracy, r.f1, r.mcc, r.auc), (1.0, 1.0, 1.0, Some(1.0)));
    }

    #[test]
    fn symmetric_confusion() {
        let c = counts(1, 1, 1, 1);
        assert_eq!((c.accuracy(), c.f1(), c.mcc()), (0.5, 0.5, (0.0, false)));
    }

    #[test]
    fn degenerate_cases() {
        assert_eq!(compute_metrics(&[], 0.5), Err(EvalError::EmptyInput));
        let r = compute_metrics(&[(0.9, true), (0.8, true)], 0.5).unwrap();
        assert_eq!(r.auc, None);
        assert!(r.mcc_degenerate);
        assert_eq!(r.mcc, 0.0);
        assert_eq!(counts(0, 0, 5, 0).f1(), 0.0);
    }

    #[test]
    fn auc_ties_use_mid_ranks() {
        let s = [(0.5, true), (0.5, false), (0.7, true), (0.2, false)];
        assert_eq!(auc(&s), Some(0.875));
        assert_eq!(pair_auc(&s), 0.875);
    }

    #[test]
    fn comparison_ranking() {
        let mk = |tag: &str, f1: f64, acc: f64, fp: &str| MetricsReport {
            classifier: tag.into(),
            unit: Unit::Tweet,
            test_fingerprint: fp.into(),
            threshold: 0.5,
            counts: ConfusionCounts::default(),
            accuracy: acc,
            f1,
            mcc: 0.0,
            mcc_degenerate: false,
            auc: None,
        };
        let ranked = compare_classifiers(&[mk("logreg", 0.861, 0.9, "x"), mk("ffnn", 0.970, 0.9, "x")]).unwrap();
        assert_eq!(ranked[0].classifier, "ffnn");
        let ranked = compare_classifiers(&[mk("b", 0.8, 0.8, "x"), mk("a", 0.8, 0.8, "x")]).unwrap();
        assert_eq!(ranked[0].classifier, "a");
        let ranked = compare_classifiers(&[mk("b", 0.8, 0.7, "x"), mk("a", 0.8, 0.6, "x")]).unwrap();
        assert_eq!(ranked[0].classifier, "b");
        assert!(matches!(
            compare_classifiers(&[mk("a", 0.8, 0.8, "x"), mk("b", 0.8, 0.8, "y")]),
            Err(EvalError::MismatchedTestSets { .. })
        ));
        assert_eq!(compare_classifiers(&[mk("a", 0.8, 0.8, "x")]), Err(EvalError::TooFewReports(1)));
    }

    #[test]
    fn fingerprint_ignores_order_but_not_labels() {
        let a = test_fingerprint([("1", true), ("2", false)]);
        assert_eq!(a, test_fingerprint([("2", false), ("1", true)]));
        assert_ne!(a, test_fingerprint([("1", false), ("2", false)]));
    }

    fn export_fixture(texts: &[(&str, &str, bool)]) -> (Corpus, Vec<Prediction>) {
        use crate::corpus::{AccountRecord, BotClass, TweetRecord};
        let acc = |id: &str, class| AccountRecord {
            account_id: id.into(),
            bot_class: class,
            metadata: None,
            profile: None,
            tweet_ids: vec![],
        };
        // A correctly rejected human tweet keeps both accounts non-empty.
        let mut texts = texts.to_vec();
        texts.push(("h0", "quiet day", false));
        let tweets: Vec<TweetRecord> = texts
            .iter()
            .map(|(id, text, bot)| TweetRecord::new(*id, if *bot { "bot" } else { "human" }, *text))
            .collect();
        let corpus = Corpus::from_records(vec![acc("bot", BotClass::SocialSpam1), acc("human", BotClass::Genuine)], tweets).unwrap();
        let preds = texts
            .iter()
            .map(|(id, _, bot)| Prediction {
                id: id.to_string(),
                account_id: if *bot { "bot" } else { "human" }.into(),
                prob_bot: if *id == "h0" { 0.1 } else { 0.9 },
                label: *id != "h0",
                branch_probs: vec![],
                unit: Unit::Tweet,
            })
            .collect();
        (corpus, preds)
    }

    #[test]
    fn export_one_tp_one_fp() {
        let dir = tempfile::tempdir().unwrap();
        let (corpus, preds) = export_fixture(&[("2", "buy now", true), ("1", "hello\nthere", false)]);
        let s = export_error_samples("ffnn", &preds, &corpus, dir.path()).unwrap();
        assert_eq!((s.true_positives.count, s.false_positives.count), (1, 1));
        let tp = fs::read_to_string(dir.path().join("ffnn_true_positives.txt")).unwrap();
        assert_eq!(tp, "2\tbuy now\n");
        let fp = fs::read_to_string(dir.path().join("ffnn_false_positives.txt")).unwrap();
        assert_eq!(fp, "1\thello there\n");
    }

    #[test]
    fn export_counts_retweets_and_keeps_empty_files() {
        let dir = tempfile::tempdir().unwrap();
        let (corpus, preds) = export_fixture(&[
            ("5", "RT @a: one", true),
            ("4", "two", true),
            ("3", "RT @b: three", true),
            ("2", "four", true),
            ("1", "RT @c five", true),
        ]);
        let s = export_error_samples("full", &preds, &corpus, dir.path()).unwrap();
        assert_eq!(s.true_positives.rt_count, 3);
        assert!((s.true_positives.rt_fraction - 0.6).abs() < 1e-15);
        assert_eq!(fs::read_to_string(dir.path().join("full_false_positives.txt")).unwrap(), "");
        let tp = fs::read_to_string(dir.path().join("full_true_positives.txt")).unwrap();
        let ids: Vec<&str> = tp.lines().map(|l| l.split('\t').next().unwrap()).collect();
        assert_eq!(ids, ["1", "2", "3", "4", "5"]);
        let summary = fs::read_to_string(dir.path().join("full_summary.txt")).unwrap();
        assert!(summary.contains("true_positives count=5 rt_count=3 rt_fraction=0.6000"));
    }

    proptest! {
        #[test]
        fn auc_matches_pair_count(raw in prop::collection::vec((0u8..20, any::<bool>()), 2..300)) {
            let s: Vec<(f64, bool)> = raw.iter().map(|&(q, y)| (q as f64 / 20.0, y)).collect();
            if let Some(a) = auc(&s) {
                prop_assert!((a - pair_auc(&s)).abs() <= 1e-12);
            }
        }

        #[test]
        fn label_flip_symmetry(raw in prop::collection::vec((0u8..50, any::<bool>()), 2..200)) {
            // Scores stay off the threshold so p -> 1-p flips every decision.
            let s: Vec<(f64, bool)> = raw.iter().map(|&(q, y)| ((q as f64 + 0.5) / 50.0 * 0.98 + 0.01, y)).collect();
            let flipped: Vec<(f64, bool)> = s.iter().map(|&(p, y)| (1.0 - p, !y)).collect();
            let a = compute_metrics(&s, 0.5).unwrap();
            let b = compute_metrics(&flipped, 0.5).unwrap();
            prop_assert!((a.mcc - b.mcc).abs() <= 1e-12);
            match (a.auc, b.auc) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-12),
                (x, y) => prop_assert_eq!(x, y),
            }
        }

        #[test]
        fn f1_ignores_true_negatives(tp in 0u64..100, fp in 0u64..100, tn in 0u64..100, fn_ in 0u64..100, extra in 1u64..1000) {
            prop_assert_eq!(counts(tp, fp, tn, fn_).f1(), counts(tp, fp, tn + extra, fn_).f1());
        }

        #[test]
        fn report_recomputes_from_counts(raw in prop::collection::vec((0.0f64..1.0, any::<bool>()), 1..200)) {
            let r = compute_metrics(&raw, 0.5).unwrap();
            let c = r.counts;
            prop_assert_eq!(c.total() as usize, raw.len());
            prop_assert!((r.accuracy - (c.tp + c.tn) as f64 / c.total() as f64).abs() <= 1e-12);
            prop_assert!((r.f1 - c.f1()).abs() <= 1e-12);
            prop_assert!((-1.0..=1.0).contains(&r.mcc));
        }
    }
}
