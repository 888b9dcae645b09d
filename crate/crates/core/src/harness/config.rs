use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::cv::CvSpec;
use super::experiment::{ExperimentSpec, GammaPolicy, Metric};
use super::HarnessError;
use crate::amputer::AmputationConfig;
use crate::data::{Columns, DataSchema};
use crate::engine::FragmganConfig;

/// `gamma = 0.5` or `gamma = "cv"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSetting {
    Fixed(f64),
    Keyword(GammaKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaKeyword {
    Cv,
}

impl GammaSetting {
    pub const CV: GammaSetting = GammaSetting::Keyword(GammaKeyword::Cv);

    /// Parses a command-line value: a number or `cv`.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        if text.eq_ignore_ascii_case("cv") {
            return Ok(Self::CV);
        }
        text.parse::<f64>().map(GammaSetting::Fixed).map_err(|_| {
            HarnessError::Config(format!("gamma must be a number or \"cv\", got {text:?}"))
        })
    }
}

fn default_repetitions() -> usize {
    10
}
fn default_test_fraction() -> f64 {
    0.2
}

/// The `[experiment]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// CSV input; the command line may supply or override it.
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub metrics: Vec<Metric>,
    /// Absent means the `[model]` gamma.
    pub gamma: Option<GammaSetting>,
    #[serde(default)]
    pub cv: CvSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub jobs: usize,
    /// Miss rates for `sweep`.
    #[serde(default)]
    pub rates: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: None,
            out: None,
            repetitions: default_repetitions(),
            test_fraction: default_test_fraction(),
            metrics: Vec::new(),
            gamma: None,
            cv: CvSpec::default(),
            seed: 0,
            jobs: 0,
            rates: Vec::new(),
        }
    }
}

/// A whole run described in TOML: `[data]`, optional `[amputation]`,
/// `[model]` and `[experiment]`. Every section may be omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub data: DataSchema,
    pub amputation: Option<AmputationConfig>,
    #[serde(default)]
    pub model: FragmganConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Experiment description for data with the given columns.
    pub fn experiment_spec(&self, columns: &Columns) -> Result<ExperimentSpec, HarnessError> {
        let amputation = self
            .amputation
            .as_ref()
            .map(|a| a.resolve(columns))
            .transpose()?;
        let gamma = match self.experiment.gamma {
            None => GammaPolicy::Fixed(self.model.gamma),
            Some(GammaSetting::Fixed(g)) => GammaPolicy::Fixed(g),
            Some(GammaSetting::Keyword(GammaKeyword::Cv)) => {
                GammaPolicy::CrossValidate(self.experiment.cv.clone())
            }
        };
        let spec = ExperimentSpec {
            amputation,
            model: self.model.clone(),
            repetitions: self.experiment.repetitions,
            test_fraction: self.experiment.test_fraction,
            metrics: self.experiment.metrics.clone(),
            gamma,
            seed: self.experiment.seed,
            jobs: self.experiment.jobs,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureGroups, LabelKind};

    const FULL: &str = r#"
[data]
label = "y"
label_type = "binary"
groups = [{ name = "a", columns = ["x1", "x2"] }, { name = "b", columns = ["x3"] }]

[amputation]
mechanism = "mcar"
observed_group = "a"
rate = 0.2

[model]
gamma = 0.7
iterations = 500

[experiment]
repetitions = 3
gamma = "cv"
metrics = ["rmse_impute", "auc"]
cv = { grid = [0.4, 0.5], folds = 3 }
seed = 9
"#;

    fn columns() -> Columns {
        let groups = FeatureGroups::new(vec!["a".into(), "b".into()], vec![0, 0, 1]).unwrap();
        Columns::new(vec!["x1".into(), "x2".into(), "x3".into()], groups)
            .with_label("y", LabelKind::Binary)
    }

    #[test]
    fn empty_config_is_valid() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let spec = cfg.experiment_spec(&columns()).unwrap();
        assert_eq!(spec.repetitions, 10);
        assert_eq!(spec.gamma, GammaPolicy::Fixed(1.0));
        assert!(spec.amputation.is_none());
    }

    #[test]
    fn full_config() {
        let cfg = RunConfig::from_toml(FULL).unwrap();
        assert_eq!(cfg.data.label.as_deref(), Some("y"));
        assert_eq!(cfg.model.iterations, 500);
        let spec = cfg.experiment_spec(&columns()).unwrap();
        assert_eq!(spec.repetitions, 3);
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.metrics, vec![Metric::RmseImpute, Metric::Auc]);
        match spec.gamma {
            GammaPolicy::CrossValidate(cv) => {
                assert_eq!(cv.grid, vec![0.4, 0.5]);
                assert_eq!(cv.folds, 3);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(spec.amputation.unwrap().target_miss_rate, 0.2);
    }

    #[test]
    fn gamma_setting_forms() {
        assert_eq!(GammaSetting::parse("cv").unwrap(), GammaSetting::CV);
        assert_eq!(
            GammaSetting::parse("0.45").unwrap(),
            GammaSetting::Fixed(0.45)
        );
        assert!(GammaSetting::parse("half").is_err());
        let cfg = RunConfig::from_toml("[experiment]\ngamma = 0.5").unwrap();
        assert_eq!(cfg.experiment.gamma, Some(GammaSetting::Fixed(0.5)));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[model]\ngama = 0.5").is_err());
        assert!(RunConfig::from_toml("[experiment]\nrepetitions = 0")
            .unwrap()
            .experiment_spec(&columns())
            .is_err());
    }
}
