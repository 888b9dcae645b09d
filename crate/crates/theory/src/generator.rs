use rand::Rng;

use crate::instance::{random_simplex, DiscreteInstance};
use crate::{TheoryError, PROB_TOL};

/// The law a generator induces on imputed values: `q_w(x̂ᵐ | xᵒ)` for each
/// pattern `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteGenerator {
    n_o: usize,
    n_m: usize,
    k: usize,
    /// Indexed `(w · n_o + xo) · n_m + xm`.
    q: Vec<f64>,
}

impl DiscreteGenerator {
    pub fn new(inst: &DiscreteInstance, q: Vec<f64>) -> Result<Self, TheoryError> {
        let (n_o, n_m, k) = (inst.n_o(), inst.n_m(), inst.k());
        if q.len() != n_o * n_m * k {
            return Err(TheoryError::InvalidGenerator(format!(
                "table has {} entries, expected {}",
                q.len(),
                n_o * n_m * k
            )));
        }
        let gen = Self { n_o, n_m, k, q };
        for w in 0..k {
            for o in 0..n_o {
                let row = gen.conditional(w, o);
                if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(TheoryError::InvalidGenerator(format!(
                        "negative entry for w={w}, xo={o}"
                    )));
                }
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > PROB_TOL {
                    return Err(TheoryError::InvalidGenerator(format!(
                        "q_{w}(· | xo={o}) sums to {s}"
                    )));
                }
            }
        }
        if inst.pattern1_complete() {
            for o in 0..n_o {
                if let Some(data) = inst.pattern_conditional(o, 0) {
                    let gap = max_gap(gen.conditional(0, o), &data);
                    if gap > PROB_TOL {
                        return Err(TheoryError::InvalidGenerator(format!(
                            "complete pattern must reproduce the data at xo={o} (off by {gap:e})"
                        )));
                    }
                }
            }
        }
        Ok(gen)
    }

    /// Builds a table from one conditional per `(w, xo)`.
    pub fn from_fn(
        inst: &DiscreteInstance,
        mut f: impl FnMut(usize, usize) -> Vec<f64>,
    ) -> Result<Self, TheoryError> {
        let mut q = Vec::with_capacity(inst.n_o() * inst.n_m() * inst.k());
        for w in 0..inst.k() {
            for o in 0..inst.n_o() {
                q.extend(f(w, o));
            }
        }
        Self::new(inst, q)
    }

    /// The data conditional for the complete pattern when it is pinned, uniform
    /// where the pattern never occurs.
    fn pinned(inst: &DiscreteInstance, o: usize) -> Vec<f64> {
        inst.pattern_conditional(o, 0)
            .unwrap_or_else(|| vec![1.0 / inst.n_m() as f64; inst.n_m()])
    }

    /// Independent uniform-random conditionals, respecting the complete pattern.
    pub fn random<R: Rng + ?Sized>(inst: &DiscreteInstance, rng: &mut R) -> Self {
        Self::from_fn(inst, |w, o| {
            if w == 0 && inst.pattern1_complete() {
                Self::pinned(inst, o)
            } else {
                random_simplex(inst.n_m(), rng)
            }
        })
        .expect("random conditionals are valid")
    }

    /// One conditional per `xo` shared by every pattern. It is the complete
    /// pattern's data conditional when that pattern is pinned, otherwise `common(xo)`.
    pub fn shared(
        inst: &DiscreteInstance,
        mut common: impl FnMut(usize) -> Vec<f64>,
    ) -> Result<Self, TheoryError> {
        let rows: Vec<Vec<f64>> = (0..inst.n_o())
            .map(|o| {
                if inst.pattern1_complete() {
                    Self::pinned(inst, o)
                } else {
                    common(o)
                }
            })
            .collect();
        Self::from_fn(inst, |_, o| rows[o].clone())
    }

    /// Mixes each free conditional toward a random one: `(1−ε)·q + ε·u`.
    pub fn perturbed<R: Rng + ?Sized>(
        &self,
        inst: &DiscreteInstance,
        epsilon: f64,
        rng: &mut R,
    ) -> Self {
        Self::from_fn(inst, |w, o| {
            let row = self.conditional(w, o);
            if w == 0 && inst.pattern1_complete() {
                row.to_vec()
            } else {
                let u = random_simplex(inst.n_m(), rng);
                let mut mixed: Vec<f64> = row
                    .iter()
                    .zip(&u)
                    .map(|(a, b)| (1.0 - epsilon) * a + epsilon * b)
                    .collect();
                let s: f64 = mixed.iter().sum();
                mixed.iter_mut().for_each(|v| *v /= s);
                mixed
            }
        })
        .expect("mixtures of conditionals are valid")
    }

    pub fn conditional(&self, w: usize, xo: usize) -> &[f64] {
        let start = (w * self.n_o + xo) * self.n_m;
        &self.q[start..start + self.n_m]
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

pub(crate) fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `p(xᵒ, x̂ᵐ, W = w) = p(xᵒ, W = w) · q_w(x̂ᵐ | xᵒ)`, indexed like the instance.
pub fn induced_joint(inst: &DiscreteInstance, gen: &DiscreteGenerator) -> Vec<f64> {
    let (n_o, n_m, k) = (inst.n_o(), inst.n_m(), inst.k());
    let mut r = vec![0.0; n_o * n_m * k];
    for o in 0..n_o {
        for w in 0..k {
            let pow = inst.p_ow(o, w);
            for (m, q) in gen.conditional(w, o).iter().enumerate() {
                r[(o * n_m + m) * k + w] = pow * q;
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Mechanism, RandomInstance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64) -> DiscreteInstance {
        let spec = RandomInstance {
            n_o: 2,
            n_m: 3,
            k: 3,
            mechanism: Mechanism::Mar,
            pattern1_complete: true,
        };
        DiscreteInstance::random(&spec, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn complete_pattern_is_pinned() {
        let inst = instance(0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gen = DiscreteGenerator::random(&inst, &mut rng);
        assert_eq!(
            gen.conditional(0, 1),
            inst.pattern_conditional(1, 0).unwrap().as_slice()
        );
        let free = DiscreteGenerator::from_fn(&inst, |_, _| vec![1.0, 0.0, 0.0]);
        assert!(matches!(free, Err(TheoryError::InvalidGenerator(_))));
    }

    #[test]
    fn induced_joint_is_a_distribution_with_the_same_xo_w_margins() {
        let inst = instance(2);
        let gen = DiscreteGenerator::random(&inst, &mut ChaCha8Rng::seed_from_u64(3));
        let r = induced_joint(&inst, &gen);
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        for o in 0..inst.n_o() {
            for w in 0..inst.k() {
                let margin: f64 = (0..inst.n_m())
                    .map(|m| r[(o * inst.n_m() + m) * inst.k() + w])
                    .sum();
                assert!((margin - inst.p_ow(o, w)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn perturbation_keeps_pin_and_moves_the_rest() {
        let inst = instance(4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = DiscreteGenerator::shared(&inst, |_| unreachable!()).unwrap();
        let moved = base.perturbed(&inst, 0.1, &mut rng);
        assert_eq!(moved.conditional(0, 0), base.conditional(0, 0));
        assert!(max_gap(moved.conditional(1, 0), base.conditional(1, 0)) > 1e-4);
    }
}
