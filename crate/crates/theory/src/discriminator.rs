use crate::generator::{induced_joint, DiscreteGenerator};
use crate::instance::DiscreteInstance;
use crate::simplex::maximize_on_simplex;
use crate::TheoryError;

/// A discriminator on the finite imputed domain: one point of the K-simplex
/// per cell `x̂ = (xᵒ, x̂ᵐ)`, or nothing where `p(x̂) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorTable {
    n_m: usize,
    rows: Vec<Option<Vec<f64>>>,
}

impl DiscriminatorTable {
    pub fn get(&self, xo: usize, xm: usize) -> Result<&[f64], TheoryError> {
        self.rows[xo * self.n_m + xm]
            .as_deref()
            .ok_or(TheoryError::ZeroProbability { xo, xm })
    }

    fn row(&self, xo: usize, xm: usize) -> Option<&[f64]> {
        self.rows[xo * self.n_m + xm].as_deref()
    }
}

fn table_from(
    inst: &DiscreteInstance,
    gen: &DiscreteGenerator,
    solve: impl Fn(&[f64]) -> Option<Vec<f64>>,
) -> DiscriminatorTable {
    let r = induced_joint(inst, gen);
    let k = inst.k();
    let rows = r.chunks(k).map(solve).collect();
    DiscriminatorTable {
        n_m: inst.n_m(),
        rows,
    }
}

/// `D*_k(x̂) = p(W = k | x̂)` under the generator's induced law.
pub fn optimal_discriminator(
    inst: &DiscreteInstance,
    gen: &DiscreteGenerator,
) -> DiscriminatorTable {
    table_from(inst, gen, |c| {
        let z: f64 = c.iter().sum();
        (z > 0.0).then(|| c.iter().map(|v| v / z).collect())
    })
}

/// The maximizer of the discriminator objective found by numerical search,
/// cell by cell, without using the posterior formula.
pub fn numeric_discriminator(
    inst: &DiscreteInstance,
    gen: &DiscreteGenerator,
) -> DiscriminatorTable {
    table_from(inst, gen, maximize_on_simplex)
}

/// `V(G, D) = Σ p(x̂, W = k) log D_k(x̂)`, skipping zero-probability terms.
pub fn discriminator_value(
    inst: &DiscreteInstance,
    gen: &DiscreteGenerator,
    d: &DiscriminatorTable,
) -> f64 {
    let r = induced_joint(inst, gen);
    let k = inst.k();
    let mut v = 0.0;
    for o in 0..inst.n_o() {
        for m in 0..inst.n_m() {
            let cell = &r[(o * inst.n_m() + m) * k..][..k];
            if cell.iter().all(|&p| p == 0.0) {
                continue;
            }
            let row = d.row(o, m).expect("cell with mass has a discriminator row");
            for (p, dk) in cell.iter().zip(row) {
                if *p > 0.0 {
                    v += p * dk.ln();
                }
            }
        }
    }
    v
}

/// Posterior discriminator against the numerical maximizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorCheck {
    pub bayes_value: f64,
    pub numeric_value: f64,
    /// `numeric − bayes`; positive would mean the posterior is not optimal.
    pub gap: f64,
    /// Largest `|Σ_k D*_k − 1|` over cells.
    pub simplex_error: f64,
}

pub fn posterior_check(inst: &DiscreteInstance, gen: &DiscreteGenerator) -> PosteriorCheck {
    let bayes = optimal_discriminator(inst, gen);
    let numeric = numeric_discriminator(inst, gen);
    let bayes_value = discriminator_value(inst, gen, &bayes);
    let numeric_value = discriminator_value(inst, gen, &numeric);
    let simplex_error = bayes
        .rows
        .iter()
        .flatten()
        .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    PosteriorCheck {
        bayes_value,
        numeric_value,
        gap: numeric_value - bayes_value,
        simplex_error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Mechanism, RandomInstance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shared_conditionals_give_the_prior() {
        let spec = RandomInstance {
            n_o: 3,
            n_m: 2,
            k: 3,
            mechanism: Mechanism::Mcar,
            pattern1_complete: false,
        };
        let inst = DiscreteInstance::random(&spec, &mut ChaCha8Rng::seed_from_u64(0));
        let gen = DiscreteGenerator::shared(&inst, |_| vec![0.3, 0.7]).unwrap();
        let d = optimal_discriminator(&inst, &gen);
        for o in 0..3 {
            for m in 0..2 {
                for (w, v) in d.get(o, m).unwrap().iter().enumerate() {
                    assert!((v - inst.pi(w)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn hand_bayes() {
        // One xo value, xm ∈ {0, 1}, two patterns with p(W) = (0.6, 0.4).
        // Pattern 0 data: p(xm | W=0) = (0.5, 0.5); generator for W=1: (0.25, 0.75).
        let inst = DiscreteInstance::new(1, 2, 2, vec![0.3, 0.2, 0.3, 0.2], true).unwrap();
        let gen = DiscreteGenerator::new(&inst, vec![0.5, 0.5, 0.25, 0.75]).unwrap();
        let d = optimal_discriminator(&inst, &gen);
        let close = |a: &[f64], b: [f64; 2]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15);
        // x̂ = 0: 0.6·0.5 = 0.3 vs 0.4·0.25 = 0.1.
        assert!(close(d.get(0, 0).unwrap(), [0.75, 0.25]));
        // x̂ = 1: 0.3 vs 0.3.
        assert!(close(d.get(0, 1).unwrap(), [0.5, 0.5]));
    }

    #[test]
    fn zero_probability_cells_are_errors() {
        let inst = DiscreteInstance::new(1, 2, 1, vec![1.0, 0.0], false).unwrap();
        let gen = DiscreteGenerator::new(&inst, vec![1.0, 0.0]).unwrap();
        let d = optimal_discriminator(&inst, &gen);
        assert!(d.get(0, 0).is_ok());
        assert_eq!(
            d.get(0, 1),
            Err(TheoryError::ZeroProbability { xo: 0, xm: 1 })
        );
    }

    #[test]
    fn posterior_matches_numerical_maximum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let spec = RandomInstance {
                n_o: 2,
                n_m: 3,
                k: 4,
                mechanism: Mechanism::Mnar,
                pattern1_complete: true,
            };
            let inst = DiscreteInstance::random(&spec, &mut rng);
            let gen = DiscreteGenerator::random(&inst, &mut rng);
            let check = posterior_check(&inst, &gen);
            assert!(check.gap.abs() < 1e-9, "{check:?}");
            assert!(check.simplex_error < 1e-12);
        }
    }
}
