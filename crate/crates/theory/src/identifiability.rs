use rand::Rng;
use serde::Serialize;

use crate::generator::{max_gap, DiscreteGenerator};
use crate::instance::{random_simplex, DiscreteInstance, MarViolation};
use crate::objective::{c_of_g, imputed_conditional, shared_deviation};
use crate::{TheoryError, PROB_TOL};

/// Margin separating "attains the minimum" from "does not".
const MIN_TOL: f64 = 1e-10;

/// Distance from the minimizer set below which a random draw is resampled.
const RANDOM_FLOOR: f64 = 1e-2;
const RESAMPLE_LIMIT: usize = 100;

/// Draws until the candidate sits at least `floor` away from the minimizer
/// set, so every non-member has a resolvable excess; a single draw when the
/// condition holds trivially.
fn at_distance(
    inst: &DiscreteInstance,
    floor: f64,
    mut draw: impl FnMut() -> DiscreteGenerator,
) -> DiscreteGenerator {
    let mut gen = draw();
    for _ in 0..RESAMPLE_LIMIT {
        if shared_deviation(inst, &gen) >= floor {
            break;
        }
        gen = draw();
    }
    gen
}

/// Candidate generators for the minimizer check: `n_shared` generators that
/// share one conditional across patterns, `n_random` unconstrained ones, and
/// each shared generator mixed toward noise at scales 0.3, 0.1 and 0.03.
/// Random and perturbed candidates keep a distance of at least 1e-2 and
/// `scale / 10` from the minimizer set where the instance allows it.
pub fn generator_family<R: Rng + ?Sized>(
    inst: &DiscreteInstance,
    n_random: usize,
    n_shared: usize,
    rng: &mut R,
) -> Vec<DiscreteGenerator> {
    let mut family = Vec::with_capacity(n_random + 4 * n_shared);
    let shared: Vec<DiscreteGenerator> = (0..n_shared)
        .map(|_| {
            DiscreteGenerator::shared(inst, |_| random_simplex(inst.n_m(), rng))
                .expect("simplex rows are valid")
        })
        .collect();
    for g in &shared {
        for eps in [3e-1, 1e-1, 3e-2] {
            family.push(at_distance(inst, eps / 10.0, || {
                g.perturbed(inst, eps, rng)
            }));
        }
    }
    family.extend(shared);
    family.extend(
        (0..n_random)
            .map(|_| at_distance(inst, RANDOM_FLOOR, || DiscreteGenerator::random(inst, rng))),
    );
    family
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimizerReport {
    /// `−H(W | Xᵒ)`, the value every minimizer must attain.
    pub minimum: f64,
    pub members: usize,
    pub non_members: usize,
    /// Largest `C(G) − minimum` over generators satisfying the condition.
    pub max_member_excess: f64,
    /// Smallest `C(G) − minimum` over generators violating it.
    pub min_non_member_excess: f64,
    /// Largest disagreement between the direct and KL forms.
    pub max_form_gap: f64,
    pub holds: bool,
}

/// Checks both directions of the minimizer characterization over a family:
/// condition-satisfying generators attain `−H(W | Xᵒ)` and every other one is
/// strictly above it.
pub fn verify_minimizers(inst: &DiscreteInstance, family: &[DiscreteGenerator]) -> MinimizerReport {
    let mut report = MinimizerReport {
        minimum: 0.0,
        members: 0,
        non_members: 0,
        max_member_excess: 0.0,
        min_non_member_excess: f64::INFINITY,
        max_form_gap: 0.0,
        holds: false,
    };
    for gen in family {
        let c = c_of_g(inst, gen);
        report.minimum = c.constant;
        report.max_form_gap = report
            .max_form_gap
            .max((c.direct - c.kl_form - c.constant).abs());
        let excess = c.direct - c.constant;
        if shared_deviation(inst, gen) <= PROB_TOL {
            report.members += 1;
            report.max_member_excess = report.max_member_excess.max(excess.abs());
        } else {
            report.non_members += 1;
            report.min_non_member_excess = report.min_non_member_excess.min(excess);
        }
    }
    report.holds = report.max_form_gap <= MIN_TOL
        && report.max_member_excess <= MIN_TOL
        && (report.non_members == 0 || report.min_non_member_excess > MIN_TOL);
    report
}

/// The unique generator satisfying the condition when pattern 0 is complete:
/// every pattern imputes from `p(xᵐ | xᵒ, W = 0)`.
pub fn solve_shared(inst: &DiscreteInstance) -> Result<DiscreteGenerator, TheoryError> {
    if !inst.pattern1_complete() {
        return Err(TheoryError::Precondition(
            "the solution is only pinned down when pattern 0 is complete".into(),
        ));
    }
    for o in 0..inst.n_o() {
        if inst.p_o(o) > 0.0 && inst.p_ow(o, 0) == 0.0 {
            return Err(TheoryError::NotIdentified { xo: o });
        }
    }
    DiscreteGenerator::shared(inst, |_| {
        unreachable!("pinned generators ignore the common row")
    })
}

/// A cell where the imputed conditional misses the data conditional.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub xo: usize,
    pub xm: usize,
    pub imputed: f64,
    pub truth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub is_mar: bool,
    /// `max |p(x̂ᵐ | xᵒ) − p(xᵐ | xᵒ)|` at the solution.
    pub max_error: f64,
    pub holds: bool,
    pub certificate: Option<Counterexample>,
    pub mar_violation: Option<MarViolation>,
}

/// Solves the condition and compares the imputed conditional to the data.
/// Under MAR the two agree; otherwise the report carries the worst cell.
pub fn verify_recovery(inst: &DiscreteInstance) -> Result<RecoveryReport, TheoryError> {
    let gen = solve_shared(inst)?;
    debug_assert!(shared_deviation(inst, &gen) <= PROB_TOL);
    let mut worst: Option<Counterexample> = None;
    let mut max_error = 0.0f64;
    for o in 0..inst.n_o() {
        let (Some(imputed), Some(truth)) =
            (imputed_conditional(inst, &gen, o), inst.data_conditional(o))
        else {
            continue;
        };
        let gap = max_gap(&imputed, &truth);
        if gap > max_error {
            max_error = gap;
            let xm = (0..inst.n_m())
                .max_by(|&a, &b| {
                    (imputed[a] - truth[a])
                        .abs()
                        .total_cmp(&(imputed[b] - truth[b]).abs())
                })
                .expect("nonempty domain");
            worst = Some(Counterexample {
                xo: o,
                xm,
                imputed: imputed[xm],
                truth: truth[xm],
            });
        }
    }
    let holds = max_error <= PROB_TOL;
    Ok(RecoveryReport {
        is_mar: inst.is_mar(),
        max_error,
        holds,
        certificate: if holds { None } else { worst },
        mar_violation: inst.mar_violation().cloned(),
    })
}

/// Missingness of `Xᵐ` driven by its own value: `p(xᵐ) = (½, ½)` and
/// `P(W = 0 | xᵐ) = (0.8, 0.2)`, with a single `xᵒ` value.
pub fn mnar_counterexample() -> DiscreteInstance {
    DiscreteInstance::new(1, 2, 2, vec![0.4, 0.1, 0.1, 0.4], true).expect("constant table is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Mechanism, RandomInstance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(mechanism: Mechanism, complete: bool, rng: &mut ChaCha8Rng) -> DiscreteInstance {
        let spec = RandomInstance {
            n_o: 3,
            n_m: 3,
            k: 3,
            mechanism,
            pattern1_complete: complete,
        };
        DiscreteInstance::random(&spec, rng)
    }

    #[test]
    fn minimizers_are_exactly_the_shared_generators() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for mechanism in [Mechanism::Mar, Mechanism::Mnar] {
            for complete in [false, true] {
                let inst = random(mechanism, complete, &mut rng);
                let family = generator_family(&inst, 50, 5, &mut rng);
                let report = verify_minimizers(&inst, &family);
                assert!(report.holds, "{report:?}");
                assert_eq!(report.members, 5);
                assert!(report.non_members >= 50);
            }
        }
    }

    #[test]
    fn single_pattern_is_vacuous() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = RandomInstance {
            n_o: 2,
            n_m: 3,
            k: 1,
            mechanism: Mechanism::Mcar,
            pattern1_complete: false,
        };
        let inst = DiscreteInstance::random(&spec, &mut rng);
        let family = generator_family(&inst, 20, 2, &mut rng);
        let report = verify_minimizers(&inst, &family);
        assert!(report.holds);
        assert_eq!(report.non_members, 0);
        assert_eq!(report.members, family.len());
    }

    #[test]
    fn mar_solution_recovers_the_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for mechanism in [Mechanism::Mcar, Mechanism::Mar] {
            let report = verify_recovery(&random(mechanism, true, &mut rng)).unwrap();
            assert!(report.is_mar && report.holds, "{report:?}");
            assert!(report.certificate.is_none());
        }
    }

    #[test]
    fn mnar_counterexample_is_certified() {
        let report = verify_recovery(&mnar_counterexample()).unwrap();
        assert!(!report.is_mar && !report.holds);
        let cert = report.certificate.unwrap();
        assert!((cert.imputed - cert.truth).abs() > 0.29);
        assert!((report.max_error - 0.3).abs() < 1e-12);
    }

    #[test]
    fn single_valued_missing_variable_is_trivial() {
        let inst = DiscreteInstance::new(2, 1, 2, vec![0.1, 0.3, 0.4, 0.2], true).unwrap();
        assert!(verify_recovery(&inst).unwrap().holds);
    }

    #[test]
    fn solution_needs_the_complete_pattern_everywhere() {
        // xo = 1 only ever occurs with pattern 1.
        let inst = DiscreteInstance::new(2, 1, 2, vec![0.5, 0.0, 0.0, 0.5], true).unwrap();
        assert_eq!(
            solve_shared(&inst).unwrap_err(),
            TheoryError::NotIdentified { xo: 1 }
        );
        let open = DiscreteInstance::new(1, 1, 1, vec![1.0], false).unwrap();
        assert!(matches!(
            solve_shared(&open),
            Err(TheoryError::Precondition(_))
        ));
    }
}
