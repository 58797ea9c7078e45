use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Pixels with `score >= threshold` are called positive.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Roc {
    /// Threshold-descending, from `(0, 0)` at `+inf` to `(1, 1)` at `-inf`.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Exact ROC over every distinct score plus the two infinite sentinels;
/// AUC by the trapezoidal rule, which equals the tie-corrected
/// Mann-Whitney statistic.
pub fn roc_auc(scores: &[f32], gt: &[f32], fov: Option<&[f32]>) -> Result<Roc> {
    if scores.len() != gt.len() || fov.is_some_and(|f| f.len() != gt.len()) {
        return Err(invalid("roc inputs differ in size"));
    }
    let mut pairs = Vec::with_capacity(scores.len());
    for (i, (&s, &g)) in scores.iter().zip(gt).enumerate() {
        if fov.is_some_and(|f| f[i] == 0.0) {
            continue;
        }
        if g != 0.0 && g != 1.0 {
            return Err(Error::Data(format!("ground truth is not binary (found {g})")));
        }
        if !s.is_finite() {
            return Err(Error::NonFinite { op: "roc_auc" });
        }
        pairs.push((s, g == 1.0));
    }
    roc_from_pairs(pairs)
}

pub(crate) fn roc_from_pairs(mut pairs: Vec<(f32, bool)>) -> Result<Roc> {
    let pos = pairs.iter().filter(|p| p.1).count() as u64;
    let neg = pairs.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Data(format!(
            "AUC undefined: ground truth in scope has {pos} positive and {neg} negative pixels"
        )));
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (pf, nf) = (pos as f64, neg as f64);
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    // twice the area, in units of one positive-negative pair
    let mut area2: u128 = 0;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < pairs.len() {
        let s = pairs[i].0;
        let (tp0, fp0) = (tp, fp);
        while i < pairs.len() && pairs[i].0 == s {
            if pairs[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += (fp - fp0) as u128 * (tp + tp0) as u128;
        points.push(RocPoint {
            threshold: s as f64,
            fpr: fp as f64 / nf,
            tpr: tp as f64 / pf,
        });
    }
    points.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        fpr: 1.0,
        tpr: 1.0,
    });
    Ok(Roc {
        points,
        auc: area2 as f64 / (2.0 * pf * nf),
    })
}
