use std::collections::BTreeSet;

use crate::error::{invalid, Error, Result};
use crate::train::{fraction_count, split_indices};

#[derive(Debug, Clone, PartialEq)]
pub enum SplitPlan {
    /// One fold; `floor(n * (1 - train_fraction))` ids go to test.
    FixedFraction { train_fraction: f64, seed: u64 },
    LeaveOneOut,
    Explicit { train: Vec<String>, test: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

pub fn make_folds(plan: &SplitPlan, ids: &[String]) -> Result<Vec<Fold>> {
    let pick = |idx: &[usize]| idx.iter().map(|&i| ids[i].clone()).collect::<Vec<_>>();
    match plan {
        SplitPlan::LeaveOneOut => {
            if ids.len() < 2 {
                return Err(Error::Data(format!("leave-one-out needs at least 2 samples, got {}", ids.len())));
            }
            Ok((0..ids.len())
                .map(|i| Fold {
                    train: ids.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, s)| s.clone()).collect(),
                    test: vec![ids[i].clone()],
                })
                .collect())
        }
        SplitPlan::FixedFraction { train_fraction, seed } => {
            if !(0.0..=1.0).contains(train_fraction) {
                return Err(invalid(format!("train fraction {train_fraction} outside [0, 1]")));
            }
            let (mut train, mut test) = split_indices(ids.len(), 1.0 - train_fraction, *seed);
            train.sort_unstable();
            test.sort_unstable();
            debug_assert_eq!(test.len(), fraction_count(ids.len(), 1.0 - train_fraction));
            Ok(vec![Fold {
                train: pick(&train),
                test: pick(&test),
            }])
        }
        SplitPlan::Explicit { train, test } => {
            let known: BTreeSet<_> = ids.iter().collect();
            let tr: BTreeSet<_> = train.iter().collect();
            if let Some(id) = train.iter().chain(test).find(|id| !known.contains(id)) {
                return Err(Error::Data(format!("split list names unknown sample `{id}`")));
            }
            if let Some(id) = test.iter().find(|id| tr.contains(id)) {
                return Err(Error::Data(format!("sample `{id}` is in both train and test lists")));
            }
            Ok(vec![Fold {
                train: train.clone(),
                test: test.clone(),
            }])
        }
    }
}
