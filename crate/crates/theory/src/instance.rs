use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::{TheoryError, PROB_TOL};

/// A point drawn uniformly from the probability simplex of dimension `n`.
pub fn random_simplex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// The cell where `p(W | xᵒ, xᵐ)` departs most from `p(W | xᵒ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarViolation {
    pub xo: usize,
    pub xm: usize,
    pub pattern: usize,
    pub given_both: f64,
    pub given_observed: f64,
}

/// Joint law of an always-observed variable `Xᵒ`, a possibly-missing variable
/// `Xᵐ` and the response pattern `W`, on finite domains.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteInstance {
    n_o: usize,
    n_m: usize,
    k: usize,
    /// Indexed `(xo · n_m + xm) · k + w`.
    joint: Vec<f64>,
    pattern1_complete: bool,
    mar_violation: Option<MarViolation>,
}

impl DiscreteInstance {
    /// `pattern1_complete` declares that pattern 0 observes `Xᵐ`. Whether the
    /// instance is MAR is computed from the table.
    pub fn new(
        n_o: usize,
        n_m: usize,
        k: usize,
        joint: Vec<f64>,
        pattern1_complete: bool,
    ) -> Result<Self, TheoryError> {
        if n_o == 0 || n_m == 0 || k == 0 {
            return Err(TheoryError::InvalidInstance(
                "every domain needs at least one value".into(),
            ));
        }
        if joint.len() != n_o * n_m * k {
            return Err(TheoryError::InvalidInstance(format!(
                "joint has {} entries, expected {}",
                joint.len(),
                n_o * n_m * k
            )));
        }
        if let Some(v) = joint.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(TheoryError::InvalidInstance(format!(
                "probability {v} is not a nonnegative number"
            )));
        }
        let total: f64 = joint.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(TheoryError::InvalidInstance(format!(
                "probabilities sum to {total}"
            )));
        }
        let mut inst = Self {
            n_o,
            n_m,
            k,
            joint,
            pattern1_complete,
            mar_violation: None,
        };
        inst.mar_violation = inst.find_mar_violation();
        Ok(inst)
    }

    pub fn from_file(file: &InstanceFile) -> Result<Self, TheoryError> {
        let n_o = file.joint.len();
        let n_m = file.joint.first().map_or(0, Vec::len);
        let k = file
            .joint
            .first()
            .and_then(|r| r.first())
            .map_or(0, Vec::len);
        let mut joint = Vec::with_capacity(n_o * n_m * k);
        for row in &file.joint {
            if row.len() != n_m {
                return Err(TheoryError::InvalidInstance("ragged joint table".into()));
            }
            for cell in row {
                if cell.len() != k {
                    return Err(TheoryError::InvalidInstance("ragged joint table".into()));
                }
                joint.extend_from_slice(cell);
            }
        }
        Self::new(n_o, n_m, k, joint, file.pattern1_complete)
    }

    pub fn random<R: Rng + ?Sized>(spec: &RandomInstance, rng: &mut R) -> Self {
        let RandomInstance {
            n_o,
            n_m,
            k,
            mechanism,
            pattern1_complete,
        } = *spec;
        let p_o = random_simplex(n_o, rng);
        let mut joint = vec![0.0; n_o * n_m * k];
        let pattern_mcar = random_simplex(k, rng);
        for o in 0..n_o {
            let p_m = random_simplex(n_m, rng);
            let pattern_mar = random_simplex(k, rng);
            for m in 0..n_m {
                let pattern = match mechanism {
                    Mechanism::Mcar => pattern_mcar.clone(),
                    Mechanism::Mar => pattern_mar.clone(),
                    Mechanism::Mnar => random_simplex(k, rng),
                };
                for (w, pw) in pattern.iter().enumerate() {
                    joint[(o * n_m + m) * k + w] = p_o[o] * p_m[m] * pw;
                }
            }
        }
        let s: f64 = joint.iter().sum();
        joint.iter_mut().for_each(|v| *v /= s);
        Self::new(n_o, n_m, k, joint, pattern1_complete).expect("random tables are valid")
    }

    pub fn n_o(&self) -> usize {
        self.n_o
    }

    pub fn n_m(&self) -> usize {
        self.n_m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn pattern1_complete(&self) -> bool {
        self.pattern1_complete
    }

    pub fn is_mar(&self) -> bool {
        self.mar_violation.is_none()
    }

    pub fn mar_violation(&self) -> Option<&MarViolation> {
        self.mar_violation.as_ref()
    }

    pub fn p(&self, xo: usize, xm: usize, w: usize) -> f64 {
        self.joint[(xo * self.n_m + xm) * self.k + w]
    }

    /// `p(xᵒ, W = w)`.
    pub fn p_ow(&self, xo: usize, w: usize) -> f64 {
        (0..self.n_m).map(|m| self.p(xo, m, w)).sum()
    }

    pub fn p_o(&self, xo: usize) -> f64 {
        (0..self.k).map(|w| self.p_ow(xo, w)).sum()
    }

    /// `π_w = P(W = w)`.
    pub fn pi(&self, w: usize) -> f64 {
        (0..self.n_o).map(|o| self.p_ow(o, w)).sum()
    }

    /// `p(xᵐ | xᵒ)`, or `None` if `p(xᵒ) = 0`.
    pub fn data_conditional(&self, xo: usize) -> Option<Vec<f64>> {
        let z = self.p_o(xo);
        (z > 0.0).then(|| {
            (0..self.n_m)
                .map(|m| (0..self.k).map(|w| self.p(xo, m, w)).sum::<f64>() / z)
                .collect()
        })
    }

    /// `p(xᵐ | xᵒ, W = w)`, or `None` if `p(xᵒ, W = w) = 0`.
    pub fn pattern_conditional(&self, xo: usize, w: usize) -> Option<Vec<f64>> {
        let z = self.p_ow(xo, w);
        (z > 0.0).then(|| (0..self.n_m).map(|m| self.p(xo, m, w) / z).collect())
    }

    fn find_mar_violation(&self) -> Option<MarViolation> {
        let mut worst: Option<(f64, MarViolation)> = None;
        for o in 0..self.n_o {
            let po = self.p_o(o);
            if po == 0.0 {
                continue;
            }
            for m in 0..self.n_m {
                let pom: f64 = (0..self.k).map(|w| self.p(o, m, w)).sum();
                if pom == 0.0 {
                    continue;
                }
                for w in 0..self.k {
                    let given_both = self.p(o, m, w) / pom;
                    let given_observed = self.p_ow(o, w) / po;
                    let gap = (given_both - given_observed).abs();
                    if gap > PROB_TOL && worst.as_ref().is_none_or(|(g, _)| gap > *g) {
                        worst = Some((
                            gap,
                            MarViolation {
                                xo: o,
                                xm: m,
                                pattern: w,
                                given_both,
                                given_observed,
                            },
                        ));
                    }
                }
            }
        }
        worst.map(|(_, v)| v)
    }
}

/// How pattern probabilities depend on the variables in a random instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Mcar,
    Mar,
    Mnar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomInstance {
    pub n_o: usize,
    pub n_m: usize,
    pub k: usize,
    pub mechanism: Mechanism,
    pub pattern1_complete: bool,
}

/// An instance as written in TOML: `joint[xo][xm][w]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default)]
    pub pattern1_complete: bool,
    pub joint: Vec<Vec<Vec<f64>>>,
}
