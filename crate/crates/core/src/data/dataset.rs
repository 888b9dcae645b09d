use serde::{Deserialize, Serialize};

use super::{DataError, PatternRegistry};
use crate::numeric::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    #[default]
    Continuous,
    Binary,
}

/// Partition of the feature columns into data-source groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureGroups {
    names: Vec<String>,
    of_feature: Vec<usize>,
}

impl FeatureGroups {
    /// `of_feature[j]` is the group index of column `j`; every group must be nonempty.
    pub fn new(names: Vec<String>, of_feature: Vec<usize>) -> Result<Self, DataError> {
        for (g, name) in names.iter().enumerate() {
            if !of_feature.contains(&g) {
                return Err(DataError::Schema(format!("group {name:?} has no columns")));
            }
        }
        if let Some(&bad) = of_feature.iter().find(|&&g| g >= names.len()) {
            return Err(DataError::Schema(format!("group index {bad} out of range")));
        }
        Ok(Self { names, of_feature })
    }

    /// Every column in its own group.
    pub fn singletons(feature_names: &[String]) -> Self {
        Self {
            names: feature_names.to_vec(),
            of_feature: (0..feature_names.len()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn group_of(&self, feature: usize) -> usize {
        self.of_feature[feature]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn members(&self, group: usize) -> Vec<usize> {
        (0..self.of_feature.len())
            .filter(|&j| self.of_feature[j] == group)
            .collect()
    }
}

/// Column metadata shared by every dataset derived from the same source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Columns {
    pub feature_names: Vec<String>,
    pub groups: FeatureGroups,
    pub label_name: Option<String>,
    pub label_kind: LabelKind,
}

impl Columns {
    pub fn new(feature_names: Vec<String>, groups: FeatureGroups) -> Self {
        Self {
            feature_names,
            groups,
            label_name: None,
            label_kind: LabelKind::Continuous,
        }
    }

    pub fn with_label(mut self, name: &str, kind: LabelKind) -> Self {
        self.label_name = Some(name.to_owned());
        self.label_kind = kind;
        self
    }
}

/// How a dataset's rows are matched to response patterns.
#[derive(Debug, Clone)]
pub enum PatternPolicy {
    /// Build the registry from the rows themselves.
    Discover,
    /// Every row must match one of these patterns.
    Strict(PatternRegistry),
    /// Start from these patterns and append unseen ones.
    Extend(PatternRegistry),
}

/// A fragmentary dataset: features with NaN at missing cells, the observation
/// mask (`true` = observed), each row's pattern id and optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedDataset {
    features: Matrix,
    mask: Vec<bool>,
    pattern_id: Vec<usize>,
    registry: PatternRegistry,
    labels: Option<Vec<f64>>,
    columns: Columns,
}

impl MaskedDataset {
    /// Derives the mask from non-finite cells and assigns pattern ids.
    pub fn new(
        features: Matrix,
        labels: Option<Vec<f64>>,
        columns: Columns,
        policy: PatternPolicy,
    ) -> Result<Self, DataError> {
        let (n, d) = features.shape();
        if columns.feature_names.len() != d || columns.groups.of_feature.len() != d {
            return Err(DataError::Schema(format!(
                "{d} feature columns but {} names / {} group assignments",
                columns.feature_names.len(),
                columns.groups.of_feature.len()
            )));
        }
        if let Some(y) = &labels {
            if y.len() != n {
                return Err(DataError::Schema(format!(
                    "{} labels for {n} rows",
                    y.len()
                )));
            }
            if let Some(i) = y.iter().position(|v| !v.is_finite()) {
                return Err(DataError::MissingLabel { row: i });
            }
            if columns.label_kind == LabelKind::Binary {
                if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
                    return Err(DataError::InvalidLabel {
                        row: i,
                        value: y[i],
                    });
                }
            }
        }
        let mut features = features;
        let mask: Vec<bool> = features.data().iter().map(|v| v.is_finite()).collect();
        for (v, &m) in features.data_mut().iter_mut().zip(&mask) {
            if !m {
                *v = f64::NAN;
            }
        }
        let rows = || mask.chunks(d.max(1)).take(n);
        let (registry, strict) = match policy {
            PatternPolicy::Discover => (PatternRegistry::from_rows(d, rows()), false),
            PatternPolicy::Strict(r) => (r, true),
            PatternPolicy::Extend(r) => (r, false),
        };
        let mut registry = registry;
        let mut pattern_id = Vec::with_capacity(n);
        for (i, m) in rows().enumerate() {
            match registry.id_of(m) {
                Some(id) => pattern_id.push(id),
                None if strict => {
                    return Err(DataError::UnknownPattern {
                        row: i,
                        mask: super::registry::mask_string(m),
                    })
                }
                None => pattern_id.push(registry.register(m.to_vec())),
            }
        }
        Ok(Self {
            features,
            mask,
            pattern_id,
            registry,
            labels,
            columns,
        })
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn d(&self) -> usize {
        self.features.cols()
    }

    /// Number of registered patterns.
    pub fn k(&self) -> usize {
        self.registry.len()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn mask_row(&self, i: usize) -> &[bool] {
        let d = self.d();
        &self.mask[i * d..(i + 1) * d]
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.d() + j]
    }

    /// The mask as a 0/1 matrix.
    pub fn mask_matrix(&self) -> Matrix {
        Matrix::from_vec(
            self.n(),
            self.d(),
            self.mask
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        )
        .expect("mask has n*d entries")
    }

    pub fn pattern_ids(&self) -> &[usize] {
        &self.pattern_id
    }

    pub fn registry(&self) -> &PatternRegistry {
        &self.registry
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    pub fn columns(&self) -> &Columns {
        &self.columns
    }

    pub fn label_kind(&self) -> LabelKind {
        self.columns.label_kind
    }

    /// Row counts per pattern id.
    pub fn pattern_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k()];
        for &id in &self.pattern_id {
            counts[id] += 1;
        }
        counts
    }

    /// Fraction of missing cells.
    pub fn miss_rate(&self) -> f64 {
        if self.mask.is_empty() {
            return 0.0;
        }
        self.mask.iter().filter(|&&b| !b).count() as f64 / self.mask.len() as f64
    }

    /// Rows `indices` (in that order), sharing this dataset's registry.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let d = self.d();
        let mut mask = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            mask.extend_from_slice(self.mask_row(i));
        }
        Self {
            features: self.features.select_rows(indices),
            mask,
            pattern_id: indices.iter().map(|&i| self.pattern_id[i]).collect(),
            registry: self.registry.clone(),
            labels: self
                .labels
                .as_ref()
                .map(|y| indices.iter().map(|&i| y[i]).collect()),
            columns: self.columns.clone(),
        }
    }

    /// Replaces the observed feature values, keeping mask and patterns.
    /// Missing cells of `features` are ignored and stay NaN.
    pub(crate) fn with_values(&self, features: Matrix, labels: Option<Vec<f64>>) -> Self {
        let mut features = features;
        for (v, &m) in features.data_mut().iter_mut().zip(&self.mask) {
            if !m {
                *v = f64::NAN;
            }
        }
        Self {
            features,
            labels,
            ..self.clone()
        }
    }

    /// Drops the labels.
    pub fn without_labels(mut self) -> Self {
        self.labels = None;
        self
    }

    /// Observed values with missing cells replaced by zero.
    pub fn zero_filled(&self) -> Matrix {
        self.features.map(|v| if v.is_finite() { v } else { 0.0 })
    }
}

/// Pattern indicator `w` for a pattern id.
pub fn onehot_pattern(registry: &PatternRegistry, id: usize) -> Vec<f64> {
    registry.onehot(id)
}

/// The three generator inputs `(m⊙x, (1−m)⊙z, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedInput {
    pub observed: Vec<f64>,
    pub noise: Vec<f64>,
    pub pattern: Vec<f64>,
}

impl MaskedInput {
    /// Concatenation in generator input order.
    pub fn concat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.observed.len() * 2 + self.pattern.len());
        v.extend_from_slice(&self.observed);
        v.extend_from_slice(&self.noise);
        v.extend_from_slice(&self.pattern);
        v
    }
}

/// Splits a row into generator inputs. Missing cells of `x` may hold anything
/// (including NaN); they never reach the output.
pub fn apply_mask(x: &[f64], m: &[bool], z: &[f64], w: &[f64]) -> MaskedInput {
    debug_assert_eq!(x.len(), m.len());
    debug_assert_eq!(z.len(), m.len());
    MaskedInput {
        observed: x
            .iter()
            .zip(m)
            .map(|(&v, &o)| if o { v } else { 0.0 })
            .collect(),
        noise: z
            .iter()
            .zip(m)
            .map(|(&v, &o)| if o { 0.0 } else { v })
            .collect(),
        pattern: w.to_vec(),
    }
}

/// `x̂ = m⊙x + (1−m)⊙x̄`, taking observed cells from `x` verbatim.
pub fn compose_imputed(x: &[f64], m: &[bool], generated: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(m)
        .zip(generated)
        .map(|((&v, &o), &g)| if o { v } else { g })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_mask_cases() {
        let w = [1.0, 0.0];
        let all = apply_mask(&[3.0, 5.0], &[true, true], &[7.0, 9.0], &w);
        assert_eq!((all.observed, all.noise), (vec![3.0, 5.0], vec![0.0, 0.0]));
        let none = apply_mask(&[3.0, 5.0], &[false, false], &[7.0, 9.0], &w);
        assert_eq!(
            (none.observed, none.noise),
            (vec![0.0, 0.0], vec![7.0, 9.0])
        );
        let half = apply_mask(&[3.0, f64::NAN], &[true, false], &[7.0, 9.0], &w);
        assert_eq!(half.concat(), vec![3.0, 0.0, 0.0, 9.0, 1.0, 0.0]);
    }

    #[test]
    fn compose_cases() {
        let x = [3.0, f64::NAN];
        assert_eq!(
            compose_imputed(&x, &[true, false], &[8.0, 4.0]),
            vec![3.0, 4.0]
        );
        assert_eq!(
            compose_imputed(&[1.5, 2.5], &[true, true], &[8.0, 4.0]),
            vec![1.5, 2.5]
        );
        assert_eq!(
            compose_imputed(&x, &[false, false], &[8.0, 4.0]),
            vec![8.0, 4.0]
        );
    }

    fn cols(d: usize) -> Columns {
        let names: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
        Columns::new(names.clone(), FeatureGroups::singletons(&names))
    }

    #[test]
    fn strict_policy_rejects_unknown_mask() {
        let x = Matrix::from_rows(&[vec![1.0, f64::NAN]]).unwrap();
        let reg = PatternRegistry::from_masks(vec![vec![true, true]]).unwrap();
        let err = MaskedDataset::new(x.clone(), None, cols(2), PatternPolicy::Strict(reg.clone()));
        assert!(matches!(err, Err(DataError::UnknownPattern { row: 0, .. })));
        let ok = MaskedDataset::new(x, None, cols(2), PatternPolicy::Extend(reg)).unwrap();
        assert_eq!(ok.k(), 2);
        assert_eq!(ok.pattern_ids(), &[1]);
    }

    #[test]
    fn binary_labels_validated() {
        let x = Matrix::from_rows(&[vec![1.0]]).unwrap();
        let c = cols(1).with_label("y", LabelKind::Binary);
        assert!(matches!(
            MaskedDataset::new(x, Some(vec![0.5]), c, PatternPolicy::Discover),
            Err(DataError::InvalidLabel { .. })
        ));
    }
}
