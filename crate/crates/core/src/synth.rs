//! Synthetic complete datasets with known dependence structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{Columns, DataError, FeatureGroups, LabelKind, MaskedDataset, PatternPolicy};
use crate::numeric::{sigmoid, Matrix};

/// Gaussian copula with uniform marginals: latent `z = √ρ·u + √(1−ρ)·e`
/// (one shared factor `u`, so every pair of latents has correlation `ρ`),
/// observed `x = Φ(z)`. Columns are split into consecutive groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CopulaSpec {
    pub n: usize,
    pub group_sizes: Vec<usize>,
    pub correlation: f64,
    /// When set, a binary label `y ~ Bernoulli(σ(s · mean(z)))` with this slope `s`.
    #[serde(default)]
    pub label_slope: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl CopulaSpec {
    pub fn d(&self) -> usize {
        self.group_sizes.iter().sum()
    }
}

pub fn gaussian_copula(spec: &CopulaSpec) -> Result<MaskedDataset, DataError> {
    let d = spec.d();
    if spec.n == 0 || d == 0 || spec.group_sizes.contains(&0) {
        return Err(DataError::Schema(
            "copula needs rows and nonempty groups".into(),
        ));
    }
    if !(0.0..1.0).contains(&spec.correlation) {
        return Err(DataError::Schema(format!(
            "copula correlation {} outside [0, 1)",
            spec.correlation
        )));
    }
    let phi = Normal::standard();
    let (shared, own) = (spec.correlation.sqrt(), (1.0 - spec.correlation).sqrt());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut data = Vec::with_capacity(spec.n * d);
    let mut labels = Vec::with_capacity(spec.n);
    let mut z = vec![0.0; d];
    for _ in 0..spec.n {
        let u: f64 = rng.sample(StandardNormal);
        for v in z.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *v = shared * u + own * e;
        }
        data.extend(z.iter().map(|&v| phi.cdf(v)));
        if let Some(slope) = spec.label_slope {
            let mean = z.iter().sum::<f64>() / d as f64;
            let draw: f64 = rng.random();
            labels.push(if draw < sigmoid(slope * mean) {
                1.0
            } else {
                0.0
            });
        }
    }

    let names: Vec<String> = (0..d).map(|j| format!("x{}", j + 1)).collect();
    let mut of_feature = Vec::with_capacity(d);
    let mut group_names = Vec::with_capacity(spec.group_sizes.len());
    for (g, &size) in spec.group_sizes.iter().enumerate() {
        group_names.push(format!("g{}", g + 1));
        of_feature.extend(std::iter::repeat_n(g, size));
    }
    let mut columns = Columns::new(names, FeatureGroups::new(group_names, of_feature)?);
    let labels = spec.label_slope.map(|_| {
        columns = columns.clone().with_label("y", LabelKind::Binary);
        labels
    });
    MaskedDataset::new(
        Matrix::from_vec(spec.n, d, data)?,
        labels,
        columns,
        PatternPolicy::Discover,
    )
}
