use crate::discriminator::{discriminator_value, optimal_discriminator};
use crate::generator::{max_gap, DiscreteGenerator};
use crate::instance::DiscreteInstance;

/// The generator objective at the optimal discriminator, two ways.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CValue {
    /// `V(G, D*)` evaluated directly.
    pub direct: f64,
    /// `Σ_k π_k Σ_xo p(xᵒ | k) KL(q_k(· | xᵒ) ‖ p(x̂ᵐ | xᵒ))`.
    pub kl_form: f64,
    /// `−H(W | Xᵒ)`, the generator-free difference `direct − kl_form`.
    pub constant: f64,
}

/// `p(x̂ᵐ | xᵒ) = Σ_k p(k | xᵒ) q_k(x̂ᵐ | xᵒ)`, or `None` if `p(xᵒ) = 0`.
pub fn imputed_conditional(
    inst: &DiscreteInstance,
    gen: &DiscreteGenerator,
    xo: usize,
) -> Option<Vec<f64>> {
    let po = inst.p_o(xo);
    if po == 0.0 {
        return None;
    }
    let mut out = vec![0.0; inst.n_m()];
    for w in 0..inst.k() {
        let weight = inst.p_ow(xo, w) / po;
        for (acc, q) in out.iter_mut().zip(gen.conditional(w, xo)) {
            *acc += weight * q;
        }
    }
    Some(out)
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b).ln())
        .sum()
}

pub fn c_of_g(inst: &DiscreteInstance, gen: &DiscreteGenerator) -> CValue {
    let direct = discriminator_value(inst, gen, &optimal_discriminator(inst, gen));
    let mut kl_form = 0.0;
    let mut constant = 0.0;
    for o in 0..inst.n_o() {
        let Some(mixture) = imputed_conditional(inst, gen, o) else {
            continue;
        };
        let po = inst.p_o(o);
        for w in 0..inst.k() {
            let pow = inst.p_ow(o, w);
            if pow > 0.0 {
                kl_form += pow * kl(gen.conditional(w, o), &mixture);
                constant += pow * (pow / po).ln();
            }
        }
    }
    CValue {
        direct,
        kl_form,
        constant,
    }
}

/// Largest departure from "every pattern imputes alike":
/// `max |q_k(x̂ᵐ | xᵒ) − p(x̂ᵐ | xᵒ)|` over `k, xᵒ` with `p(xᵒ, k) > 0`.
pub fn shared_deviation(inst: &DiscreteInstance, gen: &DiscreteGenerator) -> f64 {
    let mut worst = 0.0f64;
    for o in 0..inst.n_o() {
        let Some(mixture) = imputed_conditional(inst, gen, o) else {
            continue;
        };
        for w in 0..inst.k() {
            if inst.p_ow(o, w) > 0.0 {
                worst = worst.max(max_gap(gen.conditional(w, o), &mixture));
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Mechanism, RandomInstance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn forms_differ_by_the_conditional_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let spec = RandomInstance {
                n_o: 3,
                n_m: 4,
                k: 3,
                mechanism: Mechanism::Mnar,
                pattern1_complete: false,
            };
            let inst = DiscreteInstance::random(&spec, &mut rng);
            let gen = DiscreteGenerator::random(&inst, &mut rng);
            let c = c_of_g(&inst, &gen);
            assert!((c.direct - (c.kl_form + c.constant)).abs() < 1e-10, "{c:?}");
            assert!(c.kl_form >= 0.0);
        }
    }

    #[test]
    fn shared_conditional_has_zero_kl() {
        let inst = DiscreteInstance::new(1, 2, 2, vec![0.3, 0.2, 0.3, 0.2], true).unwrap();
        let gen = DiscreteGenerator::shared(&inst, |_| unreachable!()).unwrap();
        let c = c_of_g(&inst, &gen);
        assert!(c.kl_form.abs() < 1e-15);
        assert_eq!(shared_deviation(&inst, &gen), 0.0);
        // −H(W) with p(W) = (0.6, 0.4).
        let h = -(0.6f64 * 0.6f64.ln() + 0.4 * 0.4f64.ln());
        assert!((c.constant + h).abs() < 1e-15);
        assert!((c.direct + h).abs() < 1e-15);
    }

    #[test]
    fn single_pattern_objective_is_zero() {
        let inst = DiscreteInstance::new(2, 2, 1, vec![0.1, 0.2, 0.3, 0.4], false).unwrap();
        let gen = DiscreteGenerator::new(&inst, vec![0.5, 0.5, 0.9, 0.1]).unwrap();
        let c = c_of_g(&inst, &gen);
        assert_eq!((c.direct, c.kl_form, c.constant), (0.0, 0.0, 0.0));
    }
}
