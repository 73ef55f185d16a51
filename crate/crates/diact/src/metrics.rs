//! Multi-label evaluation: exact match ratio, set-based accuracy, precision,
//! recall, F1, Hamming loss, per-label diagnostics, run aggregation, and the
//! exact binomial significance test.
//!
//! Label sets are index sets over a level's inventory. An empty set (Nil) is
//! replaced by a singleton containing the reserved [`NIL`] sentinel before
//! the set metrics run, so `|Y|` and `|Z|` are always at least 1, and Nil
//! participates in the Hamming loss as one more label.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Sentinel index representing the absence of any label at a level.
pub const NIL: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Speaker {
    User,
    System,
}

/// One evaluated example: gold label set, predicted label set, provenance.
#[derive(Clone, Debug)]
pub struct EvaluationPair {
    gold: BTreeSet<usize>,
    predicted: BTreeSet<usize>,
    pub speaker: Speaker,
}

impl EvaluationPair {
    /// Builds a pair, substituting `{NIL}` for empty sets.
    pub fn new(
        gold: impl IntoIterator<Item = usize>,
        predicted: impl IntoIterator<Item = usize>,
        speaker: Speaker,
    ) -> EvaluationPair {
        let mut gold: BTreeSet<usize> = gold.into_iter().collect();
        let mut predicted: BTreeSet<usize> = predicted.into_iter().collect();
        if gold.is_empty() {
            gold.insert(NIL);
        }
        if predicted.is_empty() {
            predicted.insert(NIL);
        }
        EvaluationPair {
            gold,
            predicted,
            speaker,
        }
    }

    pub fn single(gold: usize, predicted: usize, speaker: Speaker) -> EvaluationPair {
        EvaluationPair::new([gold], [predicted], speaker)
    }

    pub fn gold(&self) -> &BTreeSet<usize> {
        &self.gold
    }

    pub fn predicted(&self) -> &BTreeSet<usize> {
        &self.predicted
    }

    pub fn is_exact_match(&self) -> bool {
        self.gold == self.predicted
    }

    fn intersection_size(&self) -> usize {
        self.gold.intersection(&self.predicted).count()
    }

    fn union_size(&self) -> usize {
        self.gold.union(&self.predicted).count()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("metric requires at least one evaluation pair")]
    Empty,
    #[error("metric requires at least {required} values, got {got}")]
    TooFewValues { required: usize, got: usize },
    #[error("single-label metric found a non-singleton set at pair {0}")]
    NotSingleton(usize),
    #[error("binomial test needs 0 <= correct <= n with n >= 1 (got a={a}, b={b}, n={n})")]
    BadCounts { a: usize, b: usize, n: usize },
}

fn non_empty(pairs: &[EvaluationPair]) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        Err(MetricsError::Empty)
    } else {
        Ok(pairs.len() as f64)
    }
}

/// Fraction of examples whose predicted set equals the gold set exactly.
pub fn exact_match_ratio(pairs: &[EvaluationPair]) -> Result<f64, MetricsError> {
    let n = non_empty(pairs)?;
    let hits = pairs.iter().filter(|p| p.is_exact_match()).count();
    Ok(hits as f64 / n)
}

/// Mean Jaccard index |Y ∩ Z| / |Y ∪ Z| over the examples.
pub fn multilabel_accuracy(pairs: &[EvaluationPair]) -> Result<f64, MetricsError> {
    let n = non_empty(pairs)?;
    let sum: f64 = pairs
        .iter()
        .map(|p| p.intersection_size() as f64 / p.union_size() as f64)
        .sum();
    Ok(sum / n)
}

/// Mean per-example |Y ∩ Z| / |Z|.
pub fn multilabel_precision(pairs: &[EvaluationPair]) -> Result<f64, MetricsError> {
    let n = non_empty(pairs)?;
    let sum: f64 = pairs
        .iter()
        .map(|p| p.intersection_size() as f64 / p.predicted.len() as f64)
        .sum();
    Ok(sum / n)
}

/// Mean per-example |Y ∩ Z| / |Y|.
pub fn multilabel_recall(pairs: &[EvaluationPair]) -> Result<f64, MetricsError> {
    let n = non_empty(pairs)?;
    let sum: f64 = pairs
        .iter()
        .map(|p| p.intersection_size() as f64 / p.gold.len() as f64)
        .sum();
    Ok(sum / n)
}

/// Mean per-example 2|Y ∩ Z| / (|Y| + |Z|). This is the averaged per-example
/// harmonic form, not the harmonic mean of aggregate P and R.
pub fn multilabel_f1(pairs: &[EvaluationPair]) -> Result<f64, MetricsError> {
    let n = non_empty(pairs)?;
    let sum: f64 = pairs
        .iter()
        .map(|p| 2.0 * p.intersection_size() as f64 / (p.gold.len() + p.predicted.len()) as f64)
        .sum();
    Ok(sum / n)
}

/// Average rate of per-label relevance mistakes over all examples and all
/// `label_count_with_nil` labels (the level inventory plus Nil).
pub fn hamming_loss(
    pairs: &[EvaluationPair],
    label_count_with_nil: usize,
) -> Result<f64, MetricsError> {
    let n = non_empty(pairs)?;
    assert!(label_count_with_nil >= 1, "empty label space");
    let mistakes: usize = pairs
        .iter()
        .map(|p| p.gold.len() + p.predicted.len() - 2 * p.intersection_size())
        .sum();
    Ok(mistakes as f64 / (n * label_count_with_nil as f64))
}

/// Fraction of exact label matches over singleton sets.
pub fn single_label_accuracy(pairs: &[EvaluationPair]) -> Result<f64, MetricsError> {
    non_empty(pairs)?;
    for (i, p) in pairs.iter().enumerate() {
        if p.gold.len() != 1 || p.predicted.len() != 1 {
            return Err(MetricsError::NotSingleton(i));
        }
    }
    exact_match_ratio(pairs)
}

/// The six-metric report in the presentation units used throughout the
/// toolkit: everything except the Hamming loss as a percentage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiLabelReport {
    pub mr: f64,
    pub acc: f64,
    pub p: f64,
    pub r: f64,
    pub f1: f64,
    pub hl: f64,
    pub n: usize,
}

pub fn multilabel_report(
    pairs: &[EvaluationPair],
    label_count_with_nil: usize,
) -> Result<MultiLabelReport, MetricsError> {
    Ok(MultiLabelReport {
        mr: 100.0 * exact_match_ratio(pairs)?,
        acc: 100.0 * multilabel_accuracy(pairs)?,
        p: 100.0 * multilabel_precision(pairs)?,
        r: 100.0 * multilabel_recall(pairs)?,
        f1: 100.0 * multilabel_f1(pairs)?,
        hl: hamming_loss(pairs, label_count_with_nil)?,
        n: pairs.len(),
    })
}

impl MultiLabelReport {
    /// Table-precision serialization: percentages at 2 decimals, the
    /// Hamming loss at 4.
    pub fn to_display_json(&self) -> serde_json::Value {
        let pct = |v: f64| (v * 100.0).round() / 100.0;
        serde_json::json!({
            "mr": pct(self.mr),
            "acc": pct(self.acc),
            "p": pct(self.p),
            "r": pct(self.r),
            "f1": pct(self.f1),
            "hl": (self.hl * 10_000.0).round() / 10_000.0,
            "n": self.n,
        })
    }
}

/// Per-label precision/recall/F1 from TP/FP/FN counts over set membership.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerLabelScore {
    pub label: String,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True when the label was never predicted (precision has no
    /// denominator) or never occurs in gold (recall has no denominator).
    pub flagged: bool,
}

/// Computes per-label scores. `labels` maps label index to display name;
/// pass the level inventory, optionally including the Nil row keyed by
/// [`NIL`]. Undefined ratios are reported as 0 and flagged.
pub fn per_label_prf(
    pairs: &[EvaluationPair],
    labels: &[(usize, String)],
) -> Vec<PerLabelScore> {
    labels
        .iter()
        .map(|(index, name)| {
            let mut tp = 0;
            let mut fp = 0;
            let mut fn_ = 0;
            for pair in pairs {
                let in_gold = pair.gold.contains(index);
                let in_pred = pair.predicted.contains(index);
                match (in_gold, in_pred) {
                    (true, true) => tp += 1,
                    (false, true) => fp += 1,
                    (true, false) => fn_ += 1,
                    (false, false) => {}
                }
            }
            let flagged = tp + fp == 0 || tp + fn_ == 0;
            let precision = if tp + fp > 0 {
                tp as f64 / (tp + fp) as f64
            } else {
                0.0
            };
            let recall = if tp + fn_ > 0 {
                tp as f64 / (tp + fn_) as f64
            } else {
                0.0
            };
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            PerLabelScore {
                label: name.clone(),
                tp,
                fp,
                fn_,
                precision,
                recall,
                f1,
                flagged,
            }
        })
        .collect()
}

/// Mean and population (divisor n) standard deviation over per-run values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStatistics {
    pub m: f64,
    pub s: f64,
    pub run_count: usize,
}

pub fn aggregate_runs(values: &[f64]) -> Result<RunStatistics, MetricsError> {
    if values.len() < 2 {
        return Err(MetricsError::TooFewValues {
            required: 2,
            got: values.len(),
        });
    }
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    Ok(RunStatistics {
        m,
        s: var.sqrt(),
        run_count: values.len(),
    })
}

// ---------------------------------------------------------------------------
// Binomial significance test
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub p_value: f64,
    pub n: usize,
    pub successes_a: usize,
    pub successes_b: usize,
    pub significant: bool,
}

/// ln C(n, k) via the log-gamma function.
fn ln_choose(n: usize, k: usize) -> f64 {
    ln_gamma((n + 1) as f64) - ln_gamma((k + 1) as f64) - ln_gamma((n - k + 1) as f64)
}

/// Lanczos approximation of ln Γ(x), accurate to ~1e-13 for x >= 0.5.
#[allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping)]
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    debug_assert!(x >= 0.5);
    let x = x - 1.0;
    let mut a = COEFFS[0];
    let t = x + 7.5;
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Upper tail P(X >= k) for X ~ Binomial(n, p), by exact summation of the
/// probability mass terms in log space.
pub fn binomial_upper_tail(n: usize, k: usize, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    if k == n {
        // single-term tail; direct powering keeps analytic cases exact
        return p.powi(n as i32);
    }
    let ln_p = p.ln();
    let ln_q = (1.0 - p).ln();
    // log-sum-exp over the tail terms, anchored at the largest term
    let mut ln_terms = Vec::with_capacity(n - k + 1);
    let mut max_ln = f64::NEG_INFINITY;
    for i in k..=n {
        let lt = ln_choose(n, i) + i as f64 * ln_p + (n - i) as f64 * ln_q;
        max_ln = max_ln.max(lt);
        ln_terms.push(lt);
    }
    let sum: f64 = ln_terms.iter().map(|lt| (lt - max_ln).exp()).sum();
    (max_ln + sum.ln()).exp().min(1.0)
}

/// One-sided exact binomial test: the probability of observing at least
/// `max(correct_a, correct_b)` successes in `n` trials when the true success
/// probability is `min(correct_a, correct_b) / n`. Equal counts carry no
/// evidence and return p = 1. A degenerate null rate (0 or 1) is clamped to
/// `[1/(2n), 1 - 1/(2n)]` before the tail is summed.
pub fn binomial_significance(
    correct_a: usize,
    correct_b: usize,
    n: usize,
) -> Result<SignificanceResult, MetricsError> {
    if n == 0 || correct_a > n || correct_b > n {
        return Err(MetricsError::BadCounts {
            a: correct_a,
            b: correct_b,
            n,
        });
    }
    let lo = correct_a.min(correct_b);
    let hi = correct_a.max(correct_b);
    let p_value = if lo == hi {
        1.0
    } else {
        let p0 = lo as f64 / n as f64;
        let p0 = p0.clamp(1.0 / (2.0 * n as f64), 1.0 - 1.0 / (2.0 * n as f64));
        binomial_upper_tail(n, hi, p0)
    };
    Ok(SignificanceResult {
        p_value,
        n,
        successes_a: correct_a,
        successes_b: correct_b,
        significant: p_value < 0.05,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::RandomSource;

    fn pair(gold: &[usize], pred: &[usize]) -> EvaluationPair {
        EvaluationPair::new(gold.iter().copied(), pred.iter().copied(), Speaker::User)
    }

    #[test]
    fn exact_match_counts_identical_sets() {
        let pairs = vec![pair(&[1, 2], &[1]), pair(&[3], &[3])];
        assert_eq!(exact_match_ratio(&pairs).unwrap(), 0.5);
        let all = vec![pair(&[1], &[1]), pair(&[2, 4], &[2, 4])];
        assert_eq!(exact_match_ratio(&all).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_is_mean_jaccard() {
        let pairs = vec![pair(&[1, 2], &[1])];
        assert_eq!(multilabel_accuracy(&pairs).unwrap(), 0.5);
    }

    #[test]
    fn prf_direct_evaluation() {
        // Y={a,b}, Z={a,c}: P = R = F1 = 1/2
        let pairs = vec![pair(&[0, 1], &[0, 2])];
        assert_eq!(multilabel_precision(&pairs).unwrap(), 0.5);
        assert_eq!(multilabel_recall(&pairs).unwrap(), 0.5);
        assert_eq!(multilabel_f1(&pairs).unwrap(), 0.5);
    }

    #[test]
    fn superset_prediction_trades_precision_for_recall() {
        // Z ⊇ Y with |Z| = 2|Y|
        let pairs = vec![pair(&[0], &[0, 1])];
        assert_eq!(multilabel_recall(&pairs).unwrap(), 1.0);
        assert_eq!(multilabel_precision(&pairs).unwrap(), 0.5);
        assert!((multilabel_f1(&pairs).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn hamming_loss_counts_flips() {
        // |L|=4, Y={a,b}, Z={a,c}: two flips over four labels
        let pairs = vec![pair(&[0, 1], &[0, 2])];
        assert_eq!(hamming_loss(&pairs, 4).unwrap(), 0.5);
        let perfect = vec![pair(&[0, 1], &[0, 1])];
        assert_eq!(hamming_loss(&perfect, 4).unwrap(), 0.0);
    }

    #[test]
    fn nil_substitution_keeps_denominators_positive() {
        // gold Nil, predicted Nil: a perfect match through the sentinel
        let p = pair(&[], &[]);
        assert!(p.is_exact_match());
        assert_eq!(multilabel_accuracy(&[p]).unwrap(), 1.0);
        // gold Nil, predicted {a}: complete miss
        let p = pair(&[], &[0]);
        assert_eq!(multilabel_accuracy(std::slice::from_ref(&p)).unwrap(), 0.0);
        assert_eq!(hamming_loss(&[p], 4).unwrap(), 0.5);
    }

    #[test]
    fn single_label_accuracy_rejects_sets() {
        let pairs = vec![pair(&[1, 2], &[1])];
        assert!(matches!(
            single_label_accuracy(&pairs),
            Err(MetricsError::NotSingleton(0))
        ));
        let ok = vec![
            pair(&[1], &[1]),
            pair(&[2], &[2]),
            pair(&[3], &[0]),
            pair(&[4], &[4]),
        ];
        assert_eq!(single_label_accuracy(&ok).unwrap(), 0.75);
    }

    #[test]
    fn empty_pair_list_is_an_error() {
        assert!(matches!(exact_match_ratio(&[]), Err(MetricsError::Empty)));
    }

    #[test]
    fn random_pairs_match_loop_oracles_exactly() {
        let mut rng = RandomSource::new(2024);
        let mut pairs = Vec::new();
        for _ in 0..1000 {
            let gold: Vec<usize> = (0..8).filter(|_| rng.bernoulli(0.3)).collect();
            let pred: Vec<usize> = (0..8).filter(|_| rng.bernoulli(0.3)).collect();
            pairs.push(pair(&gold, &pred));
        }
        // brute-force oracles over explicit membership loops
        let n = pairs.len() as f64;
        let mut mr = 0.0;
        let mut acc = 0.0;
        let mut prec = 0.0;
        let mut rec = 0.0;
        let mut f1 = 0.0;
        let mut flips = 0.0;
        let universe: Vec<usize> = (0..8).chain([NIL]).collect();
        for p in &pairs {
            let y: Vec<bool> = universe.iter().map(|l| p.gold().contains(l)).collect();
            let z: Vec<bool> = universe.iter().map(|l| p.predicted().contains(l)).collect();
            let inter = y.iter().zip(&z).filter(|(a, b)| **a && **b).count() as f64;
            let union = y.iter().zip(&z).filter(|(a, b)| **a || **b).count() as f64;
            let ny = y.iter().filter(|v| **v).count() as f64;
            let nz = z.iter().filter(|v| **v).count() as f64;
            if y == z {
                mr += 1.0;
            }
            acc += inter / union;
            prec += inter / nz;
            rec += inter / ny;
            f1 += 2.0 * inter / (ny + nz);
            flips += y.iter().zip(&z).filter(|(a, b)| a != b).count() as f64;
        }
        assert_eq!(exact_match_ratio(&pairs).unwrap(), mr / n);
        assert!((multilabel_accuracy(&pairs).unwrap() - acc / n).abs() < 1e-12);
        assert!((multilabel_precision(&pairs).unwrap() - prec / n).abs() < 1e-12);
        assert!((multilabel_recall(&pairs).unwrap() - rec / n).abs() < 1e-12);
        assert!((multilabel_f1(&pairs).unwrap() - f1 / n).abs() < 1e-12);
        assert!((hamming_loss(&pairs, 9).unwrap() - flips / (n * 9.0)).abs() < 1e-12);
    }

    #[test]
    fn per_label_prf_matches_manual_confusion_counts() {
        // five pairs, counted by hand for label 0:
        //   tp = 2 (pairs 0, 3), fp = 1 (pair 2), fn = 1 (pair 1)
        let pairs = vec![
            pair(&[0, 1], &[0]),
            pair(&[0], &[1]),
            pair(&[2], &[0, 2]),
            pair(&[0, 2], &[0, 2]),
            pair(&[1], &[1]),
        ];
        let labels = vec![(0usize, "a".to_string()), (1, "b".into()), (2, "c".into())];
        let scores = per_label_prf(&pairs, &labels);
        assert_eq!((scores[0].tp, scores[0].fp, scores[0].fn_), (2, 1, 1));
        assert!((scores[0].precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((scores[0].recall - 2.0 / 3.0).abs() < 1e-15);
        // label 1: tp=1 (pair 4), fp=1 (pair 1), fn=1 (pair 0)
        assert_eq!((scores[1].tp, scores[1].fp, scores[1].fn_), (1, 1, 1));
        assert!(!scores[1].flagged);
    }

    #[test]
    fn per_label_flags_unpredicted_and_unsupported_labels() {
        let pairs = vec![pair(&[0], &[1]), pair(&[0], &[1])];
        let labels = vec![(0usize, "present".to_string()), (2, "absent".into())];
        let scores = per_label_prf(&pairs, &labels);
        assert!(scores[0].flagged); // never predicted
        assert_eq!(scores[0].recall, 0.0);
        assert!(scores[1].flagged); // zero support
    }

    #[test]
    fn display_json_rounds_to_table_precision() {
        let report = MultiLabelReport {
            mr: 70.714285,
            acc: 71.578,
            p: 72.296,
            r: 71.744,
            f1: 71.865,
            hl: 0.038149,
            n: 100,
        };
        let value = report.to_display_json();
        assert_eq!(value["mr"], 70.71);
        assert_eq!(value["acc"], 71.58);
        assert_eq!(value["hl"], 0.0381);
        assert_eq!(value["n"], 100);
    }

    #[test]
    fn aggregate_runs_mean_and_population_std() {
        let stats = aggregate_runs(&[0.0, 1.0]).unwrap();
        assert_eq!(stats.m, 0.5);
        assert_eq!(stats.s, 0.5);
        let same = aggregate_runs(&[3.0; 10]).unwrap();
        assert_eq!(same.s, 0.0);
        assert!(matches!(
            aggregate_runs(&[1.0]),
            Err(MetricsError::TooFewValues { .. })
        ));
    }

    #[test]
    fn aggregate_runs_matches_two_pass_oracle() {
        let mut rng = RandomSource::new(5);
        let values: Vec<f64> = (0..10).map(|_| rng.uniform_in(0.0, 100.0)).collect();
        let stats = aggregate_runs(&values).unwrap();
        let mean = values.iter().sum::<f64>() / 10.0;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 10.0;
        assert!((stats.m - mean).abs() < 1e-12);
        assert!((stats.s - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn binomial_equal_counts_is_never_significant() {
        let r = binomial_significance(50, 50, 100).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert!(!r.significant);
    }

    #[test]
    fn binomial_analytic_single_term_tail() {
        // 10/10 successes against a null of 5/10: p = 0.5^10
        let r = binomial_significance(10, 5, 10).unwrap();
        assert!((r.p_value - 0.5f64.powi(10)).abs() < 1e-15, "{}", r.p_value);
        assert!(r.significant);
    }

    #[test]
    fn binomial_is_symmetric_in_its_arguments() {
        let a = binomial_significance(90, 80, 100).unwrap();
        let b = binomial_significance(80, 90, 100).unwrap();
        assert_eq!(a.p_value, b.p_value);
    }

    #[test]
    fn binomial_degenerate_null_is_clamped() {
        let r = binomial_significance(0, 10, 10).unwrap();
        // null rate clamps to 1/20; the tail is tiny but finite
        assert!(r.p_value > 0.0 && r.p_value < 1e-10, "{}", r.p_value);
    }

    #[test]
    fn binomial_rejects_bad_counts() {
        assert!(binomial_significance(5, 2, 0).is_err());
        assert!(binomial_significance(11, 2, 10).is_err());
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0f64;
        for n in 1..15 {
            fact *= n as f64;
            assert!(
                (ln_gamma((n + 1) as f64) - fact.ln()).abs() < 1e-10,
                "n = {n}"
            );
        }
    }

    #[test]
    fn upper_tail_matches_direct_summation_small_n() {
        // direct pmf summation with plain arithmetic as the oracle
        let choose = |n: u64, k: u64| -> f64 {
            let mut c = 1.0;
            for i in 0..k {
                c = c * (n - i) as f64 / (i + 1) as f64;
            }
            c
        };
        for &(n, k, p) in &[(10usize, 3usize, 0.4f64), (25, 20, 0.7), (60, 10, 0.1)] {
            let mut expected = 0.0;
            for i in k..=n {
                expected += choose(n as u64, i as u64)
                    * p.powi(i as i32)
                    * (1.0 - p).powi((n - i) as i32);
            }
            let got = binomial_upper_tail(n, k, p);
            assert!((got - expected).abs() < 1e-12, "n={n} k={k}: {got} vs {expected}");
        }
    }
}
