use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discriminator::posterior_check;
use crate::gain::{verify_gain_mar, GainGenerator, GainInstance, GainInstanceFile};
use crate::generator::DiscreteGenerator;
use crate::identifiability::{
    generator_family, mnar_counterexample, verify_minimizers, verify_recovery,
};
use crate::instance::{DiscreteInstance, InstanceFile, Mechanism, RandomInstance};
use crate::objective::c_of_g;
use crate::TheoryError;

const MECHANISMS: [Mechanism; 3] = [Mechanism::Mcar, Mechanism::Mar, Mechanism::Mnar];

/// How many random cases each check enumerates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub seed: u64,
    pub posterior_instances: usize,
    pub objective_generators: usize,
    pub minimizer_instances: usize,
    pub family_size: usize,
    pub recovery_instances: usize,
    pub gain_instances: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            posterior_instances: 100,
            objective_generators: 100,
            minimizer_instances: 20,
            family_size: 500,
            recovery_instances: 1000,
            gain_instances: 50,
        }
    }
}

/// User-supplied instances checked alongside the random ones.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryFile {
    #[serde(default)]
    pub suite: Option<SuiteConfig>,
    #[serde(default)]
    pub instance: Option<InstanceFile>,
    #[serde(default)]
    pub gain_instance: Option<GainInstanceFile>,
}

impl TheoryFile {
    pub fn from_toml(text: &str) -> Result<Self, TheoryError> {
        toml::from_str(text).map_err(|e| TheoryError::Parse(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckLine {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

fn small_instance<R: Rng + ?Sized>(
    rng: &mut R,
    mechanism: Mechanism,
    pattern1_complete: bool,
) -> DiscreteInstance {
    let spec = RandomInstance {
        n_o: rng.random_range(1..=4),
        n_m: rng.random_range(2..=4),
        k: rng.random_range(2..=4),
        mechanism,
        pattern1_complete,
    };
    DiscreteInstance::random(&spec, rng)
}

fn posterior_line(instances: &[(DiscreteInstance, DiscreteGenerator)]) -> CheckLine {
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_row = 0.0f64;
    for (inst, gen) in instances {
        let check = posterior_check(inst, gen);
        worst_gap = worst_gap.max(check.gap);
        worst_row = worst_row.max(check.simplex_error);
    }
    CheckLine::new(
        "posterior_is_optimal",
        worst_gap < 1e-9 && worst_row <= 1e-12,
        format!(
            "{} instances, max(numeric − posterior) = {worst_gap:.3e}, max row-sum error = {worst_row:.1e}",
            instances.len()
        ),
    )
}

fn minimizer_line(name: &str, cases: Vec<(DiscreteInstance, Vec<DiscreteGenerator>)>) -> CheckLine {
    let mut passed = true;
    let mut min_margin = f64::INFINITY;
    let mut max_member = 0.0f64;
    let mut mnar = 0;
    for (inst, family) in &cases {
        let report = verify_minimizers(inst, family);
        passed &= report.holds;
        min_margin = min_margin.min(report.min_non_member_excess);
        max_member = max_member.max(report.max_member_excess);
        mnar += usize::from(!inst.is_mar());
    }
    CheckLine::new(
        name,
        passed,
        format!(
            "{} instances ({mnar} MNAR), min non-member excess = {min_margin:.3e}, max member excess = {max_member:.1e}",
            cases.len()
        ),
    )
}

/// Runs every check on random instances drawn from `cfg.seed`, then on the
/// instances in `file`, one line per check.
pub fn run_suite(
    cfg: &SuiteConfig,
    file: Option<&TheoryFile>,
) -> Result<Vec<CheckLine>, TheoryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut lines = Vec::new();

    let posterior: Vec<_> = (0..cfg.posterior_instances)
        .map(|i| {
            let inst = small_instance(&mut rng, MECHANISMS[i % 3], i % 2 == 0);
            let gen = DiscreteGenerator::random(&inst, &mut rng);
            (inst, gen)
        })
        .collect();
    lines.push(posterior_line(&posterior));

    let inst = small_instance(&mut rng, Mechanism::Mnar, false);
    let mut form_gap = 0.0f64;
    for _ in 0..cfg.objective_generators {
        let c = c_of_g(&inst, &DiscreteGenerator::random(&inst, &mut rng));
        form_gap = form_gap.max((c.direct - c.kl_form - c.constant).abs());
    }
    lines.push(CheckLine::new(
        "objective_direct_equals_kl_form",
        form_gap <= 1e-10,
        format!(
            "{} generators, max gap = {form_gap:.1e}",
            cfg.objective_generators
        ),
    ));

    let cases = (0..cfg.minimizer_instances)
        .map(|i| {
            let inst = small_instance(&mut rng, MECHANISMS[i % 3], i % 2 == 1);
            let n_shared = (cfg.family_size / 10).max(1);
            let family = generator_family(&inst, cfg.family_size, n_shared, &mut rng);
            (inst, family)
        })
        .collect();
    lines.push(minimizer_line("minimizers_share_conditionals", cases));

    let spec = RandomInstance {
        n_o: 3,
        n_m: 3,
        k: 1,
        mechanism: Mechanism::Mcar,
        pattern1_complete: false,
    };
    let single = DiscreteInstance::random(&spec, &mut rng);
    let family = generator_family(&single, 50, 5, &mut rng);
    lines.push(minimizer_line(
        "single_pattern_vacuous",
        vec![(single, family)],
    ));

    let mut worst = 0.0f64;
    let mut passed = true;
    for i in 0..cfg.recovery_instances {
        let mechanism = if i % 2 == 0 {
            Mechanism::Mar
        } else {
            Mechanism::Mcar
        };
        let inst = small_instance(&mut rng, mechanism, true);
        let report = verify_recovery(&inst)?;
        passed &= report.is_mar && report.holds;
        worst = worst.max(report.max_error);
    }
    lines.push(CheckLine::new(
        "mar_recovers_data",
        passed,
        format!(
            "{} MAR instances, max error = {worst:.1e}",
            cfg.recovery_instances
        ),
    ));

    let report = verify_recovery(&mnar_counterexample())?;
    let detail = match &report.certificate {
        Some(c) => format!(
            "xo={} xm={}: imputed {:.3} vs data {:.3}",
            c.xo, c.xm, c.imputed, c.truth
        ),
        None => "no counterexample found".into(),
    };
    lines.push(CheckLine::new(
        "mnar_counterexample_certified",
        !report.is_mar && !report.holds && report.certificate.is_some(),
        detail,
    ));

    let mut passed = true;
    let mut worst = 0.0f64;
    let mut min_kl = f64::INFINITY;
    for i in 0..cfg.gain_instances {
        let mechanism = if i % 2 == 0 {
            Mechanism::Mar
        } else {
            Mechanism::Mcar
        };
        let inst = GainInstance::random(rng.random_range(1..=3), &[2, 2], mechanism, &mut rng);
        let family: Vec<_> = (0..10)
            .map(|_| GainGenerator::random(&inst, &mut rng))
            .collect();
        let report = verify_gain_mar(&inst, &family)?;
        passed &= report.holds;
        worst = worst
            .max(report.conclusion_error)
            .max(report.chain_deviation);
        min_kl = min_kl.min(report.min_family_kl);
    }
    lines.push(CheckLine::new(
        "gain_hint_chain_under_mar",
        passed,
        format!(
            "{} instances with 2 binary coordinates, max chain/conclusion error = {worst:.1e}, min random-generator KL = {min_kl:.3e}",
            cfg.gain_instances
        ),
    ));

    let inst = GainInstance::random(2, &[2, 2], Mechanism::Mnar, &mut rng);
    let report = verify_gain_mar(&inst, &[])?;
    lines.push(CheckLine::new(
        "gain_mnar_breaks_conclusion",
        !report.is_mar && !report.holds,
        format!("conclusion error = {:.3e}", report.conclusion_error),
    ));

    if let Some(file) = file {
        if let Some(spec) = &file.instance {
            let inst = DiscreteInstance::from_file(spec)?;
            let gens: Vec<_> = (0..cfg.posterior_instances.max(1))
                .map(|_| (inst.clone(), DiscreteGenerator::random(&inst, &mut rng)))
                .collect();
            lines.push(posterior_line(&gens).renamed("file_posterior"));
            let family = generator_family(
                &inst,
                cfg.family_size,
                (cfg.family_size / 10).max(1),
                &mut rng,
            );
            lines.push(minimizer_line(
                "file_minimizers",
                vec![(inst.clone(), family)],
            ));
            if inst.pattern1_complete() {
                let report = verify_recovery(&inst)?;
                let expected = report.is_mar;
                lines.push(CheckLine::new(
                    "file_recovery",
                    report.holds == expected,
                    format!(
                        "MAR: {}, max error = {:.3e}{}",
                        report.is_mar,
                        report.max_error,
                        report
                            .certificate
                            .map(|c| format!(", certificate xo={} xm={}", c.xo, c.xm))
                            .unwrap_or_default()
                    ),
                ));
            }
        }
        if let Some(spec) = &file.gain_instance {
            let inst = GainInstance::from_file(spec)?;
            let family: Vec<_> = (0..10)
                .map(|_| GainGenerator::random(&inst, &mut rng))
                .collect();
            let report = verify_gain_mar(&inst, &family)?;
            lines.push(CheckLine::new(
                "file_gain",
                report.holds == report.is_mar,
                format!(
                    "MAR: {}, conclusion error = {:.3e}",
                    report.is_mar, report.conclusion_error
                ),
            ));
        }
    }
    Ok(lines)
}

impl CheckLine {
    fn renamed(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> SuiteConfig {
        SuiteConfig {
            seed: 5,
            posterior_instances: 6,
            objective_generators: 10,
            minimizer_instances: 3,
            family_size: 30,
            recovery_instances: 20,
            gain_instances: 4,
        }
    }

    #[test]
    fn every_check_passes() {
        let lines = run_suite(&quick(), None).unwrap();
        assert_eq!(lines.len(), 8);
        for line in &lines {
            assert!(line.passed, "{line:?}");
        }
    }

    #[test]
    fn file_instances_are_checked() {
        let text = r#"
            [instance]
            pattern1_complete = true
            joint = [[[0.4, 0.1], [0.1, 0.4]]]

            [gain_instance]
            n_o = 1
            cards = [2]
            cells = [
                { xo = 0, xm = [0], mask = [1], p = 0.3 },
                { xo = 0, xm = [1], mask = [1], p = 0.3 },
                { xo = 0, xm = [0], mask = [0], p = 0.2 },
                { xo = 0, xm = [1], mask = [0], p = 0.2 },
            ]
        "#;
        let file = TheoryFile::from_toml(text).unwrap();
        let lines = run_suite(&quick(), Some(&file)).unwrap();
        let names: Vec<_> = lines.iter().map(|l| l.name.as_str()).collect();
        assert!(names.ends_with(&[
            "file_posterior",
            "file_minimizers",
            "file_recovery",
            "file_gain"
        ]));
        assert!(lines.iter().all(|l| l.passed), "{lines:#?}");
        assert!(lines[10].detail.contains("certificate"));
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(TheoryFile::from_toml("[instance]\njoint = [[[1.0]]]\nextra = 1").is_err());
    }
}
