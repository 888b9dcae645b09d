//! Controlled removal of whole variable groups from complete data.
//!
//! One group is always observed (`Xᵒ`). Every other group is dropped per row
//! independently of the others. Under MCAR all groups share one drop
//! probability `p`; under MAR group `g` is dropped with probability
//! `σ(a_g + b_gᵀ zᵒ)` where `zᵒ` is the standardized always-observed block and
//! `a_g` is calibrated so the mean drop probability over the rows equals `p`.
//! `p` is chosen so the expected fraction of missing cells equals the target.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Columns, DataError, MaskedDataset, PatternPolicy};
use crate::numeric::sigmoid;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Mcar,
    Mar,
}

/// Fully resolved amputation settings (group indices refer to the dataset's groups).
#[derive(Debug, Clone, PartialEq)]
pub struct AmputationPlan {
    pub mechanism: Mechanism,
    pub observed_group: usize,
    pub target_miss_rate: f64,
    /// Per group, one coefficient per always-observed column. Empty or
    /// missing entries mean zero weights.
    pub mar_weights: Vec<Vec<f64>>,
    pub seed: u64,
}

/// The `[amputation]` section of a config file, with groups named.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmputationConfig {
    pub mechanism: Mechanism,
    pub observed_group: String,
    pub rate: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mar_weights: BTreeMap<String, Vec<f64>>,
}

impl AmputationConfig {
    pub fn resolve(&self, columns: &Columns) -> Result<AmputationPlan, AmputeError> {
        let groups = &columns.groups;
        let observed_group = groups
            .index_of(&self.observed_group)
            .ok_or_else(|| AmputeError::Plan(format!("unknown group {:?}", self.observed_group)))?;
        let mut mar_weights = vec![Vec::new(); groups.len()];
        for (name, w) in &self.mar_weights {
            let g = groups.index_of(name).ok_or_else(|| {
                AmputeError::Plan(format!("mar_weights names unknown group {name:?}"))
            })?;
            mar_weights[g] = w.clone();
        }
        Ok(AmputationPlan {
            mechanism: self.mechanism,
            observed_group,
            target_miss_rate: self.rate,
            mar_weights,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AmputeError {
    #[error("input has missing cells; amputation needs complete data")]
    NotComplete,
    #[error("target miss rate {target} is infeasible: at most {max} of cells can be removed")]
    Infeasible { target: f64, max: f64 },
    #[error("intercept calibration for group {group} did not converge in {steps} bisection steps")]
    Calibration { group: String, steps: usize },
    #[error("plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

const BISECTION_STEPS: usize = 100;

/// Drop probability shared by every removable group.
fn group_drop_probability(ds: &MaskedDataset, plan: &AmputationPlan) -> Result<f64, AmputeError> {
    let groups = &ds.columns().groups;
    if plan.observed_group >= groups.len() {
        return Err(AmputeError::Plan(format!(
            "observed group index {} out of range",
            plan.observed_group
        )));
    }
    if !(0.0..1.0).contains(&plan.target_miss_rate) {
        return Err(AmputeError::Plan(format!(
            "target miss rate {} outside [0, 1)",
            plan.target_miss_rate
        )));
    }
    let removable = ds.d() - groups.members(plan.observed_group).len();
    let max = removable as f64 / ds.d() as f64;
    if plan.target_miss_rate > max {
        return Err(AmputeError::Infeasible {
            target: plan.target_miss_rate,
            max,
        });
    }
    if removable == 0 {
        return Ok(0.0);
    }
    Ok(plan.target_miss_rate / max)
}

/// Standardized always-observed block, one row per sample.
fn standardized_observed(ds: &MaskedDataset, cols: &[usize]) -> Vec<Vec<f64>> {
    let n = ds.n() as f64;
    let stats: Vec<(f64, f64)> = cols
        .iter()
        .map(|&j| {
            let mean = (0..ds.n()).map(|i| ds.row(i)[j]).sum::<f64>() / n;
            let var = (0..ds.n())
                .map(|i| (ds.row(i)[j] - mean).powi(2))
                .sum::<f64>()
                / n;
            (mean, var.sqrt())
        })
        .collect();
    (0..ds.n())
        .map(|i| {
            cols.iter()
                .zip(&stats)
                .map(|(&j, &(mean, sd))| {
                    if sd > 0.0 {
                        (ds.row(i)[j] - mean) / sd
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Finds `a` with `mean_i σ(a + s_i) = p` by bisection.
fn calibrate_intercept(scores: &[f64], p: f64) -> Option<f64> {
    let mean_prob =
        |a: f64| scores.iter().map(|s| sigmoid(a + s)).sum::<f64>() / scores.len() as f64;
    let spread = scores.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let (mut lo, mut hi) = (-40.0 - spread, 40.0 + spread);
    if !(mean_prob(lo) < p && p < mean_prob(hi)) {
        return None;
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let f = mean_prob(mid);
        if (f - p).abs() < 1e-12 || hi - lo < 1e-13 {
            return Some(mid);
        }
        if f < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    None
}

/// Per-row drop probabilities, one column per removable group. Reads only
/// the always-observed columns.
fn drop_probabilities(
    ds: &MaskedDataset,
    plan: &AmputationPlan,
    removable: &[usize],
    p: f64,
) -> Result<Vec<Vec<f64>>, AmputeError> {
    let groups = &ds.columns().groups;
    let observed_cols = groups.members(plan.observed_group);
    let zo = match plan.mechanism {
        Mechanism::Mcar => None,
        Mechanism::Mar => {
            if observed_cols.is_empty() {
                return Err(AmputeError::Plan(
                    "MAR needs a nonempty observed group".into(),
                ));
            }
            Some(standardized_observed(ds, &observed_cols))
        }
    };
    let mut per_group = Vec::with_capacity(removable.len());
    for &g in removable {
        let weights = plan.mar_weights.get(g).cloned().unwrap_or_default();
        let probs = match &zo {
            Some(zo) if p > 0.0 && p < 1.0 && weights.iter().any(|&w| w != 0.0) => {
                if weights.len() != observed_cols.len() {
                    return Err(AmputeError::Plan(format!(
                        "group {:?} has {} MAR weights for {} observed columns",
                        groups.names()[g],
                        weights.len(),
                        observed_cols.len()
                    )));
                }
                let scores: Vec<f64> = zo
                    .iter()
                    .map(|z| z.iter().zip(&weights).map(|(a, b)| a * b).sum())
                    .collect();
                let a =
                    calibrate_intercept(&scores, p).ok_or_else(|| AmputeError::Calibration {
                        group: groups.names()[g].clone(),
                        steps: BISECTION_STEPS,
                    })?;
                scores.iter().map(|s| sigmoid(a + s)).collect()
            }
            _ => vec![p; ds.n()],
        };
        per_group.push(probs);
    }
    Ok(per_group)
}

fn ampute(complete: &MaskedDataset, plan: &AmputationPlan) -> Result<MaskedDataset, AmputeError> {
    if complete.miss_rate() > 0.0 {
        return Err(AmputeError::NotComplete);
    }
    let p = group_drop_probability(complete, plan)?;
    let groups = &complete.columns().groups;
    let removable: Vec<usize> = (0..groups.len())
        .filter(|&g| g != plan.observed_group)
        .collect();
    let probs = drop_probabilities(complete, plan, &removable, p)?;
    let members: Vec<Vec<usize>> = removable.iter().map(|&g| groups.members(g)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut features = complete.features().clone();
    for i in 0..complete.n() {
        for (cols, p) in members.iter().zip(&probs) {
            let u: f64 = rng.random();
            if u < p[i] {
                for &j in cols {
                    features.set(i, j, f64::NAN);
                }
            }
        }
    }
    Ok(MaskedDataset::new(
        features,
        complete.labels().map(<[f64]>::to_vec),
        complete.columns().clone(),
        PatternPolicy::Discover,
    )?)
}

/// Removes groups completely at random.
pub fn ampute_mcar(
    complete: &MaskedDataset,
    plan: &AmputationPlan,
) -> Result<MaskedDataset, AmputeError> {
    ampute(
        complete,
        &AmputationPlan {
            mechanism: Mechanism::Mcar,
            ..plan.clone()
        },
    )
}

/// Removes groups with probabilities driven by the always-observed group.
pub fn ampute_mar(
    complete: &MaskedDataset,
    plan: &AmputationPlan,
) -> Result<MaskedDataset, AmputeError> {
    ampute(
        complete,
        &AmputationPlan {
            mechanism: Mechanism::Mar,
            ..plan.clone()
        },
    )
}

/// Dispatches on `plan.mechanism`.
pub fn ampute_with(
    complete: &MaskedDataset,
    plan: &AmputationPlan,
) -> Result<MaskedDataset, AmputeError> {
    ampute(complete, plan)
}

/// One amputed dataset per rate; rate `r` at position `i` uses a seed derived from `(plan.seed, i)`.
pub fn sweep_rates(
    complete: &MaskedDataset,
    plan: &AmputationPlan,
    rates: &[f64],
) -> Result<Vec<MaskedDataset>, AmputeError> {
    rates
        .iter()
        .enumerate()
        .map(|(i, &rate)| {
            ampute(
                complete,
                &AmputationPlan {
                    target_miss_rate: rate,
                    seed: seed::derive(plan.seed, 0x5eed, i as u64),
                    ..plan.clone()
                },
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureGroups;
    use crate::numeric::Matrix;
    use rand_distr::StandardNormal;

    /// `n` rows, two groups of `width` columns each; column 0 is standard normal,
    /// the rest are noisy copies of it.
    fn complete(n: usize, width: usize, seed: u64) -> MaskedDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 2 * width;
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            let base: f64 = rng.sample(StandardNormal);
            for _ in 0..d {
                let e: f64 = rng.sample(StandardNormal);
                data.push(base + 0.5 * e);
            }
        }
        let names: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
        let of = (0..d).map(|j| j / width).collect();
        let groups = FeatureGroups::new(vec!["obs".into(), "mis".into()], of).unwrap();
        MaskedDataset::new(
            Matrix::from_vec(n, d, data).unwrap(),
            None,
            Columns::new(names, groups),
            PatternPolicy::Discover,
        )
        .unwrap()
    }

    fn plan(rate: f64, seed: u64) -> AmputationPlan {
        AmputationPlan {
            mechanism: Mechanism::Mcar,
            observed_group: 0,
            target_miss_rate: rate,
            mar_weights: vec![vec![], vec![]],
            seed,
        }
    }

    #[test]
    fn zero_rate_removes_nothing() {
        let out = ampute_mcar(&complete(200, 2, 1), &plan(0.0, 3)).unwrap();
        assert_eq!(out.k(), 1);
        assert_eq!(out.miss_rate(), 0.0);
    }

    #[test]
    fn mcar_rate_and_group_probability() {
        let ds = complete(10_000, 2, 2);
        let p = group_drop_probability(&ds, &plan(0.2, 0)).unwrap();
        assert!((p - 0.4).abs() < 1e-15);
        let out = ampute_mcar(&ds, &plan(0.2, 5)).unwrap();
        assert!((out.miss_rate() - 0.2).abs() < 0.02, "{}", out.miss_rate());
        assert_eq!(out.k(), 2);
        assert!(out.registry().first_is_complete());
    }

    #[test]
    fn seeded_masks_repeat() {
        let ds = complete(500, 2, 3);
        let a = ampute_mcar(&ds, &plan(0.3, 8)).unwrap();
        let b = ampute_mcar(&ds, &plan(0.3, 8)).unwrap();
        assert_eq!(a.mask_matrix(), b.mask_matrix());
    }

    #[test]
    fn infeasible_rate() {
        let ds = complete(10, 2, 4);
        assert!(matches!(
            ampute_mcar(&ds, &plan(0.6, 0)),
            Err(AmputeError::Infeasible { .. })
        ));
    }

    #[test]
    fn incomplete_input_rejected() {
        let ds = ampute_mcar(&complete(200, 2, 1), &plan(0.2, 3)).unwrap();
        assert!(matches!(
            ampute_mcar(&ds, &plan(0.2, 3)),
            Err(AmputeError::NotComplete)
        ));
    }

    #[test]
    fn zero_weight_mar_matches_mcar_rate() {
        let ds = complete(10_000, 2, 6);
        let mcar = ampute_mcar(&ds, &plan(0.2, 1)).unwrap();
        let mar = ampute_mar(
            &ds,
            &AmputationPlan {
                mar_weights: vec![vec![], vec![0.0, 0.0]],
                ..plan(0.2, 2)
            },
        )
        .unwrap();
        assert!((mcar.miss_rate() - mar.miss_rate()).abs() < 0.02);
    }

    #[test]
    fn mar_depends_on_observed_block() {
        let ds = complete(10_000, 2, 7);
        let out = ampute_mar(
            &ds,
            &AmputationPlan {
                mar_weights: vec![vec![], vec![1.5, 0.0]],
                ..plan(0.2, 11)
            },
        )
        .unwrap();
        assert!((out.miss_rate() - 0.2).abs() < 0.02, "{}", out.miss_rate());
        let mut order: Vec<usize> = (0..ds.n()).collect();
        order.sort_by(|&a, &b| ds.row(a)[0].total_cmp(&ds.row(b)[0]));
        let q = ds.n() / 4;
        let rate = |rows: &[usize]| {
            rows.iter().filter(|&&i| !out.is_observed(i, 2)).count() as f64 / rows.len() as f64
        };
        assert!(rate(&order[3 * q..]) > rate(&order[..q]) + 0.2);
    }

    #[test]
    fn groups_drop_atomically() {
        let out = ampute_mcar(&complete(2000, 3, 9), &plan(0.25, 4)).unwrap();
        for i in 0..out.n() {
            let m = out.mask_row(i);
            assert!(m[..3].iter().all(|&b| b));
            assert!(m[3..].iter().all(|&b| b == m[3]));
        }
    }

    #[test]
    fn sweep_shapes() {
        let ds = complete(10_000, 2, 10);
        let outs = sweep_rates(&ds, &plan(0.0, 12), &[0.1, 0.3, 0.45]).unwrap();
        for (o, r) in outs.iter().zip([0.1, 0.3, 0.45]) {
            assert!((o.miss_rate() - r).abs() < 0.02);
        }
        assert!(sweep_rates(&ds, &plan(0.0, 12), &[]).unwrap().is_empty());
        let dup = sweep_rates(&ds, &plan(0.0, 12), &[0.2, 0.2]).unwrap();
        assert_ne!(dup[0].mask_matrix(), dup[1].mask_matrix());
    }

    #[test]
    fn calibration_hits_target() {
        let scores: Vec<f64> = (0..1000).map(|i| (i as f64 / 100.0).sin() * 3.0).collect();
        let a = calibrate_intercept(&scores, 0.37).unwrap();
        let mean = scores.iter().map(|s| sigmoid(a + s)).sum::<f64>() / 1000.0;
        assert!((mean - 0.37).abs() < 1e-9);
    }
}
