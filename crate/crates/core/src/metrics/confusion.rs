use crate::error::{invalid, Error, Result};

/// Pixel counts of a binary prediction against binary ground truth.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.tn += o.tn;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

/// A ratio that falls back to 1.0 when its denominator is zero, with
/// `vacuous` recording that it did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio {
    pub value: f64,
    pub vacuous: bool,
}

impl Ratio {
    pub fn of(num: u64, den: u64) -> Self {
        if den == 0 {
            Self {
                value: 1.0,
                vacuous: true,
            }
        } else {
            Self {
                value: num as f64 / den as f64,
                vacuous: false,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub accuracy: f64,
    pub sensitivity: Ratio,
    pub specificity: Ratio,
    pub f1: Ratio,
}

pub fn scores(c: &ConfusionCounts) -> Result<Scores> {
    if c.total() == 0 {
        return Err(invalid("no pixels to score"));
    }
    Ok(Scores {
        accuracy: (c.tp + c.tn) as f64 / c.total() as f64,
        sensitivity: Ratio::of(c.tp, c.tp + c.fn_),
        specificity: Ratio::of(c.tn, c.tn + c.fp),
        f1: Ratio::of(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
    })
}

fn check_binary(values: &[f32], what: &str) -> Result<()> {
    match values.iter().find(|&&v| v != 0.0 && v != 1.0) {
        Some(v) => Err(Error::Data(format!("{what} is not binary (found {v})"))),
        None => Ok(()),
    }
}

/// `p >= threshold` maps to 1.
pub fn binarize(pred: &[f32], threshold: f32) -> Result<Vec<f32>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(invalid(format!("threshold {threshold} outside [0, 1]")));
    }
    Ok(pred.iter().map(|&p| if p >= threshold { 1.0 } else { 0.0 }).collect())
}

/// Counts over pixels with `fov == 1`, or over all pixels without an FOV.
pub fn confusion(pred: &[f32], gt: &[f32], fov: Option<&[f32]>) -> Result<ConfusionCounts> {
    if pred.len() != gt.len() || fov.is_some_and(|f| f.len() != gt.len()) {
        return Err(invalid("confusion inputs differ in size"));
    }
    check_binary(pred, "prediction")?;
    check_binary(gt, "ground truth")?;
    if let Some(f) = fov {
        check_binary(f, "fov")?;
    }
    let mut c = ConfusionCounts::default();
    for (i, (&p, &g)) in pred.iter().zip(gt).enumerate() {
        if fov.is_some_and(|f| f[i] == 0.0) {
            continue;
        }
        match (p == 1.0, g == 1.0) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// `2|GT ∩ SR| / (|GT| + |SR|)`.
pub fn dice(gt: &[f32], sr: &[f32]) -> Result<Ratio> {
    let c = confusion(sr, gt, None)?;
    Ok(dice_counts(&c))
}

/// `|GT ∩ SR| / |GT ∪ SR|`.
pub fn jaccard(gt: &[f32], sr: &[f32]) -> Result<Ratio> {
    let c = confusion(sr, gt, None)?;
    Ok(jaccard_counts(&c))
}

pub fn dice_counts(c: &ConfusionCounts) -> Ratio {
    Ratio::of(2 * c.tp, 2 * c.tp + c.fp + c.fn_)
}

pub fn jaccard_counts(c: &ConfusionCounts) -> Ratio {
    Ratio::of(c.tp, c.tp + c.fp + c.fn_)
}
