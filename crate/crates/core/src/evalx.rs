//! Binary classifier evaluation with OOD as the positive class.
//!
//! ROC curves get one vertex per distinct score, so tied samples switch class
//! together. AUC is computed from the integer tp/fp counts and therefore
//! equals the Mann-Whitney statistic (ties count half) up to a single final
//! rounding.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Ind,
    Ood,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    IndRun,
    OodRun,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredSample {
    pub score: f64,
    pub label: Label,
    pub source: Source,
}

impl ScoredSample {
    pub fn ind(score: f64) -> Self {
        Self { score, label: Label::Ind, source: Source::IndRun }
    }

    pub fn ood(score: f64) -> Self {
        Self { score, label: Label::Ood, source: Source::OodRun }
    }
}

/// Seeded uniform partition into `(train, test)`.
///
/// `|train| = round(n * train_parts / (train_parts + test_parts))`, halves
/// rounding up.
pub fn train_test_split<T: Clone>(
    samples: &[T],
    train_parts: u32,
    test_parts: u32,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("split input"));
    }
    if train_parts == 0 || test_parts == 0 {
        return Err(Error::InvalidConfig(format!("split ratio {train_parts}/{test_parts} needs positive parts")));
    }
    let n = samples.len() as u64;
    let total = u64::from(train_parts) + u64::from(test_parts);
    let n_train = ((2 * n * u64::from(train_parts) + total) / (2 * total)) as usize;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    SplitMix64::new(seed).shuffle(&mut order);
    let train = order[..n_train].iter().map(|&i| samples[i].clone()).collect();
    let test = order[n_train..].iter().map(|&i| samples[i].clone()).collect();
    Ok((train, test))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Samples scoring at or above the threshold are called OOD. The first
    /// vertex uses `+inf`.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
    pub tp: u64,
    pub fp: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub positives: u64,
    pub negatives: u64,
    pub auc: f64,
}

pub fn roc_curve(samples: &[ScoredSample]) -> Result<RocCurve> {
    let positives = samples.iter().filter(|s| s.label == Label::Ood).count() as u64;
    let negatives = samples.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClassInput { positives: positives as usize, negatives: negatives as usize });
    }
    let mut sorted: Vec<(f64, bool)> = samples.iter().map(|s| (s.score, s.label == Label::Ood)).collect();
    sorted.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));

    let (p, n) = (positives as f64, negatives as f64);
    let mut points = Vec::new();
    points.push(RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0, tp: 0, fp: 0 });
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < sorted.len() {
        let threshold = sorted[i].0;
        while i < sorted.len() && sorted[i].0.total_cmp(&threshold).is_eq() {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint { threshold, fpr: fp as f64 / n, tpr: tp as f64 / p, tp, fp });
    }
    let mut curve = RocCurve { points, positives, negatives, auc: 0.0 };
    curve.auc = auc(&curve);
    Ok(curve)
}

/// Trapezoidal area under the curve, evaluated exactly on the integer
/// counts.
pub fn auc(curve: &RocCurve) -> f64 {
    let twice_area: u128 = curve
        .points
        .windows(2)
        .map(|w| u128::from(w[1].fp - w[0].fp) * u128::from(w[0].tp + w[1].tp))
        .sum();
    let denom = 2 * u128::from(curve.positives) * u128::from(curve.negatives);
    if denom == 0 {
        return 0.5;
    }
    twice_area as f64 / denom as f64
}

impl RocCurve {
    pub const CSV_HEADER: &'static str = "threshold,fpr,tpr";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.threshold, p.fpr, p.tpr);
        }
        out
    }
}

/// `(threshold, fpr, tpr)` rows of a ROC CSV file.
pub fn parse_roc_csv(text: &str) -> Result<Vec<(f64, f64, f64)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == RocCurve::CSV_HEADER => {}
        other => return Err(Error::Format(format!("unexpected ROC header {other:?}"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || Error::Format(format!("ROC line {}: {line:?}", i + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(bad());
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        rows.push((num(f[0])?, num(f[1])?, num(f[2])?));
    }
    if rows.is_empty() {
        return Err(Error::Format("ROC file has no rows".into()));
    }
    Ok(rows)
}

/// One row of the per-repeat AUC table.
#[derive(Debug, Clone, PartialEq)]
pub struct AucRecord {
    pub repeat: usize,
    pub classifier: String,
    pub auc: f64,
}

pub const AUC_TABLE_HEADER: &str = "repeat,classifier,auc";

pub fn auc_table_to_csv(records: &[AucRecord]) -> String {
    let mut out = String::from(AUC_TABLE_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{},{},{}", r.repeat, r.classifier, r.auc);
    }
    out
}

pub fn parse_auc_table(text: &str) -> Result<Vec<AucRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == AUC_TABLE_HEADER => {}
        other => return Err(Error::Format(format!("unexpected AUC table header {other:?}"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || Error::Format(format!("AUC table line {}: {line:?}", i + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 || f[1].trim().is_empty() {
            return Err(bad());
        }
        rows.push(AucRecord {
            repeat: f[0].trim().parse().map_err(|_| bad())?,
            classifier: String::from(f[1].trim()),
            auc: f[2].trim().parse().map_err(|_| bad())?,
        });
    }
    Ok(rows)
}

/// Groups AUC records by classifier, keeping first-appearance order.
pub fn group_by_classifier(records: &[AucRecord]) -> Vec<(String, Vec<f64>)> {
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(name, _)| *name == r.classifier) {
            Some((_, v)) => v.push(r.auc),
            None => groups.push((r.classifier.clone(), alloc::vec![r.auc])),
        }
    }
    groups
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierStats {
    pub classifier: String,
    pub n: usize,
    pub median: f64,
    pub mean: f64,
    /// Sample standard deviation; 0 with `std_defined = false` for a single
    /// value.
    pub std: f64,
    pub std_defined: bool,
    pub min: f64,
    pub max: f64,
    pub q1: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AggregateStats {
    pub classifiers: Vec<ClassifierStats>,
}

impl AggregateStats {
    pub const CSV_HEADER: &'static str = "classifier,n,median,mean,std,std_defined,min,max,q1,q3";

    pub fn get(&self, classifier: &str) -> Option<&ClassifierStats> {
        self.classifiers.iter().find(|c| c.classifier == classifier)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for c in &self.classifiers {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                c.classifier, c.n, c.median, c.mean, c.std, c.std_defined, c.min, c.max, c.q1, c.q3
            );
        }
        out
    }
}

/// Quantile by linear interpolation between order statistics of a sorted
/// slice; `q = 0.5` is the usual midpoint median.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Box-plot statistics of one sample.
pub fn describe(classifier: &str, values: &[f64]) -> Result<ClassifierStats> {
    if values.is_empty() {
        return Err(Error::EmptyInput("aggregate values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let (std, std_defined) = if n > 1 {
        let ss: f64 = sorted.iter().map(|v| (v - mean) * (v - mean)).sum();
        (libm::sqrt(ss / (n - 1) as f64), true)
    } else {
        (0.0, false)
    };
    let median = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
    Ok(ClassifierStats {
        classifier: String::from(classifier),
        n,
        median,
        mean,
        std,
        std_defined,
        min: sorted[0],
        max: sorted[n - 1],
        q1: quantile_sorted(&sorted, 0.25),
        q3: quantile_sorted(&sorted, 0.75),
    })
}

pub fn aggregate(auc_by_classifier: &[(String, Vec<f64>)]) -> Result<AggregateStats> {
    if auc_by_classifier.is_empty() {
        return Err(Error::EmptyInput("no classifiers to aggregate"));
    }
    let classifiers = auc_by_classifier
        .iter()
        .map(|(name, values)| describe(name, values))
        .collect::<Result<Vec<_>>>()?;
    Ok(AggregateStats { classifiers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn samples(ind: &[f64], ood: &[f64]) -> Vec<ScoredSample> {
        ind.iter().map(|&s| ScoredSample::ind(s)).chain(ood.iter().map(|&s| ScoredSample::ood(s))).collect()
    }

    #[test]
    fn split_sizes() {
        let data: Vec<u32> = (0..30).collect();
        let (train, test) = train_test_split(&data, 2, 1, 5).unwrap();
        assert_eq!((train.len(), test.len()), (20, 10));
        let mut all: Vec<u32> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, data);
        assert_eq!(train_test_split(&data, 2, 1, 5).unwrap(), (train, test));
        assert!(train_test_split(&data, 1, 0, 5).is_err());
        assert!(train_test_split::<u32>(&[], 2, 1, 5).is_err());
    }

    #[test]
    fn split_rounds_to_nearest() {
        let data: Vec<u32> = (0..10).collect();
        // 10 * 2/3 = 6.67
        assert_eq!(train_test_split(&data, 2, 1, 0).unwrap().0.len(), 7);
        let data: Vec<u32> = (0..3).collect();
        assert_eq!(train_test_split(&data, 1, 1, 0).unwrap().0.len(), 2);
    }

    #[test]
    fn perfect_separation() {
        let c = roc_curve(&samples(&[0.1, 0.2], &[0.5, 0.9])).unwrap();
        assert!(c.points.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));
        assert_eq!(c.auc, 1.0);
    }

    #[test]
    fn all_ties_is_diagonal() {
        let c = roc_curve(&samples(&[0.3; 5], &[0.3; 3])).unwrap();
        assert_eq!(c.points.len(), 2);
        assert_eq!((c.points[1].fpr, c.points[1].tpr), (1.0, 1.0));
        assert_eq!(c.auc, 0.5);
    }

    #[test]
    fn worked_example() {
        let c = roc_curve(&samples(&[0.5, 0.1], &[0.9, 0.4])).unwrap();
        assert_eq!(c.auc, 0.75);
    }

    #[test]
    fn label_flip() {
        let s = samples(&[0.1, 0.5, 0.5, 0.7], &[0.5, 0.8, 0.2]);
        let flipped: Vec<ScoredSample> = s
            .iter()
            .map(|x| ScoredSample { label: if x.label == Label::Ind { Label::Ood } else { Label::Ind }, ..*x })
            .collect();
        let a = roc_curve(&s).unwrap().auc;
        let b = roc_curve(&flipped).unwrap().auc;
        assert!((a + b - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_class() {
        assert_eq!(
            roc_curve(&samples(&[0.1, 0.2], &[])),
            Err(Error::SingleClassInput { positives: 0, negatives: 2 })
        );
    }

    #[test]
    fn roc_csv_round_trip() {
        let c = roc_curve(&samples(&[0.1, 0.2], &[0.5, 0.15])).unwrap();
        let rows = parse_roc_csv(&c.to_csv()).unwrap();
        assert_eq!(rows.len(), c.points.len());
        assert_eq!(rows[0].0, f64::INFINITY);
        for (r, p) in rows.iter().zip(&c.points) {
            assert_eq!((r.1, r.2), (p.fpr, p.tpr));
        }
    }

    #[test]
    fn aggregate_single_repeat() {
        let stats = aggregate(&[("AE".into(), vec![0.65])]).unwrap();
        let s = stats.get("AE").unwrap();
        assert_eq!((s.median, s.mean, s.std, s.std_defined), (0.65, 0.65, 0.0, false));
        assert!(aggregate(&[("AE".into(), vec![])]).is_err());
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn median_midpoint_and_std() {
        let s = describe("x", &[0.7056, 0.7844]).unwrap();
        assert!((s.median - 0.745).abs() < 1e-12);
        let s = describe("x", &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.median, 2.5);
        assert!((s.std - libm::sqrt(5.0 / 3.0)).abs() < 1e-12);
        assert_eq!((s.q1, s.q3), (1.75, 3.25));
    }

    #[test]
    fn auc_table_round_trip() {
        let rows = vec![
            AucRecord { repeat: 0, classifier: "PEOC-1".into(), auc: 0.74 },
            AucRecord { repeat: 3, classifier: "kNN".into(), auc: 0.5 },
        ];
        assert_eq!(parse_auc_table(&auc_table_to_csv(&rows)).unwrap(), rows);
        assert!(parse_auc_table("repeat,classifier,auc\n1,,0.5\n").is_err());
    }
}
