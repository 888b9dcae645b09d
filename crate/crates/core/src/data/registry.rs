use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::DataError;

/// The distinct response patterns of a dataset and the mask ↔ id bijection.
///
/// Ids are zero-based; id 0 is the fully observed pattern whenever the
/// registry was derived from data that contains one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<bool>>", into = "Vec<Vec<bool>>")]
pub struct PatternRegistry {
    masks: Vec<Vec<bool>>,
    index: HashMap<Vec<bool>, usize>,
}

impl PatternRegistry {
    pub fn from_masks(masks: Vec<Vec<bool>>) -> Result<Self, DataError> {
        let mut reg = Self {
            masks: Vec::new(),
            index: HashMap::new(),
        };
        for m in masks {
            if let Some(first) = reg.masks.first() {
                if first.len() != m.len() {
                    return Err(DataError::Schema(format!(
                        "pattern masks have different widths ({} and {})",
                        first.len(),
                        m.len()
                    )));
                }
            }
            if reg.index.contains_key(&m) {
                return Err(DataError::Schema(format!(
                    "duplicate pattern mask {}",
                    mask_string(&m)
                )));
            }
            reg.register(m);
        }
        Ok(reg)
    }

    /// Registry of the masks in `rows`, all-observed first, the rest in order of appearance.
    pub fn from_rows<'a>(d: usize, rows: impl IntoIterator<Item = &'a [bool]>) -> Self {
        let mut reg = Self::from_masks(Vec::new()).expect("empty registry");
        let rows: Vec<&[bool]> = rows.into_iter().collect();
        if rows.iter().any(|r| r.iter().all(|&b| b)) {
            reg.register(vec![true; d]);
        }
        for r in rows {
            if reg.id_of(r).is_none() {
                reg.register(r.to_vec());
            }
        }
        reg
    }

    /// Adds `mask` if unseen and returns its id.
    pub fn register(&mut self, mask: Vec<bool>) -> usize {
        if let Some(&id) = self.index.get(&mask) {
            return id;
        }
        let id = self.masks.len();
        self.index.insert(mask.clone(), id);
        self.masks.push(mask);
        id
    }

    pub fn id_of(&self, mask: &[bool]) -> Option<usize> {
        self.index.get(mask).copied()
    }

    pub fn mask(&self, id: usize) -> &[bool] {
        &self.masks[id]
    }

    pub fn masks(&self) -> &[Vec<bool>] {
        &self.masks
    }

    /// Number of patterns, K.
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn first_is_complete(&self) -> bool {
        self.masks.first().is_some_and(|m| m.iter().all(|&b| b))
    }

    /// One-hot pattern indicator `w` for `id`.
    pub fn onehot(&self, id: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.len()];
        w[id] = 1.0;
        w
    }

    /// Inverse of [`onehot`](Self::onehot); `None` unless `w` has exactly one 1.
    pub fn id_from_onehot(w: &[f64]) -> Option<usize> {
        let mut hit = None;
        for (k, &v) in w.iter().enumerate() {
            if v == 1.0 {
                if hit.is_some() {
                    return None;
                }
                hit = Some(k);
            } else if v != 0.0 {
                return None;
            }
        }
        hit
    }
}

impl TryFrom<Vec<Vec<bool>>> for PatternRegistry {
    type Error = DataError;

    fn try_from(masks: Vec<Vec<bool>>) -> Result<Self, Self::Error> {
        Self::from_masks(masks)
    }
}

impl From<PatternRegistry> for Vec<Vec<bool>> {
    fn from(r: PatternRegistry) -> Self {
        r.masks
    }
}

pub(crate) fn mask_string(m: &[bool]) -> String {
    m.iter().map(|&b| if b { '1' } else { '0' }).collect()
}
