//! Fold assignment for pair-level and group-aware cross-validation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::data::PairDataset;
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Protocol {
    PairKFold,
    LeaveCellOut,
    LeaveDrugOut,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::PairKFold => "pair",
            Protocol::LeaveCellOut => "lco",
            Protocol::LeaveDrugOut => "ldo",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pair" | "pairkfold" | "kfold" => Ok(Protocol::PairKFold),
            "lco" | "leavecellout" | "leave-cell-out" => Ok(Protocol::LeaveCellOut),
            "ldo" | "leavedrugout" | "leave-drug-out" => Ok(Protocol::LeaveDrugOut),
            other => Err(Error::Config(format!(
                "unknown protocol {other:?} (expected pair, lco or ldo)"
            ))),
        }
    }
}

/// Fold index of every pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitPlan {
    pub protocol: Protocol,
    pub folds: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl SplitPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Builds a plan. Pair folds are contiguous chunks of a seeded shuffle.
/// Group folds take shuffled groups in descending size order (stable, so
/// equal sizes keep their shuffled order) and give each to the fold with
/// the fewest pairs so far, lowest index on ties.
pub fn make_split_plan<T: Scalar>(
    ds: &PairDataset<T>,
    protocol: Protocol,
    folds: usize,
    seed: u64,
) -> Result<SplitPlan> {
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    if ds.len() < folds {
        return Err(Error::InvalidInput(format!(
            "{} pairs cannot fill {folds} folds",
            ds.len()
        )));
    }
    let mut rng = StreamRng::derived(seed, "folds", &[]);
    let mut assignments = vec![0; ds.len()];
    match protocol {
        Protocol::PairKFold => {
            let mut order: Vec<usize> = (0..ds.len()).collect();
            order.shuffle(&mut rng);
            // First `n % folds` chunks carry one extra pair.
            let (base, extra) = (ds.len() / folds, ds.len() % folds);
            let mut start = 0;
            for f in 0..folds {
                let len = base + usize::from(f < extra);
                for &i in &order[start..start + len] {
                    assignments[i] = f;
                }
                start += len;
            }
        }
        Protocol::LeaveCellOut | Protocol::LeaveDrugOut => {
            let cell = protocol == Protocol::LeaveCellOut;
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, p) in ds.pairs().iter().enumerate() {
                let key = if cell { &p.cell_id } else { &p.drug_id };
                groups.entry(key.as_str()).or_default().push(i);
            }
            if groups.len() < folds {
                return Err(Error::TooFewGroups {
                    kind: if cell { "cell" } else { "drug" },
                    groups: groups.len(),
                    folds,
                });
            }
            let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
            groups.shuffle(&mut rng);
            groups.sort_by(|a, b| b.len().cmp(&a.len()));
            let mut load = vec![0usize; folds];
            for g in groups {
                let f = (0..folds).min_by_key(|&f| (load[f], f)).unwrap();
                load[f] += g.len();
                for i in g {
                    assignments[i] = f;
                }
            }
        }
    }
    Ok(SplitPlan {
        protocol,
        folds,
        assignments,
        seed,
    })
}
