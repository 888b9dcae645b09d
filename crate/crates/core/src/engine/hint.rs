use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::PatternRegistry;
use crate::numeric::Matrix;

/// Mask with one coordinate concealed: `h_j = m_j` except `h = 0.5` at `hidden_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct HintVector {
    pub h: Vec<f64>,
    pub hidden_index: usize,
}

impl HintVector {
    pub fn new(m: &[bool], hidden_index: usize) -> Self {
        assert!(
            hidden_index < m.len(),
            "hidden index {hidden_index} out of range"
        );
        let mut h = mask_values(m);
        h[hidden_index] = 0.5;
        Self { h, hidden_index }
    }
}

fn mask_values(m: &[bool]) -> Vec<f64> {
    m.iter().map(|&o| if o { 1.0 } else { 0.0 }).collect()
}

/// Draws a hint with the hidden coordinate uniform over all of `m`.
pub fn make_hint<R: Rng + ?Sized>(m: &[bool], rng: &mut R) -> HintVector {
    HintVector::new(m, rng.random_range(0..m.len()))
}

/// What one hint draw conceals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HintScheme {
    /// One mask block: a maximal set of coordinates that share their mask
    /// value in every pattern and are missing in at least one.
    #[default]
    Block,
    /// One coordinate, uniform over all of them.
    Coordinate,
}

/// Coordinates grouped by their mask column across patterns; columns observed
/// in every pattern are left out. Blocks are ordered by first coordinate.
pub fn mask_blocks(registry: &PatternRegistry) -> Vec<Vec<usize>> {
    let Some(first) = registry.masks().first() else {
        return Vec::new();
    };
    let column = |j: usize| -> Vec<bool> { registry.masks().iter().map(|m| m[j]).collect() };
    let mut blocks: Vec<(Vec<bool>, Vec<usize>)> = Vec::new();
    for j in 0..first.len() {
        let col = column(j);
        if col.iter().all(|&o| o) {
            continue;
        }
        match blocks.iter_mut().find(|(c, _)| *c == col) {
            Some((_, members)) => members.push(j),
            None => blocks.push((col, vec![j])),
        }
    }
    blocks.into_iter().map(|(_, members)| members).collect()
}

/// Draws hint rows for a batch of masks.
#[derive(Debug, Clone, PartialEq)]
pub struct HintSampler {
    scheme: HintScheme,
    blocks: Vec<Vec<usize>>,
}

impl HintSampler {
    pub fn new(scheme: HintScheme, registry: &PatternRegistry) -> Self {
        Self {
            scheme,
            blocks: mask_blocks(registry),
        }
    }

    pub fn scheme(&self) -> HintScheme {
        self.scheme
    }

    /// One hint for a mask row.
    pub fn draw<R: Rng + ?Sized>(&self, m: &[bool], rng: &mut R) -> Vec<f64> {
        match self.scheme {
            HintScheme::Coordinate => make_hint(m, rng).h,
            HintScheme::Block => {
                let mut h = mask_values(m);
                if !self.blocks.is_empty() {
                    for &j in &self.blocks[rng.random_range(0..self.blocks.len())] {
                        h[j] = 0.5;
                    }
                }
                h
            }
        }
    }

    pub fn matrix<R: Rng + ?Sized>(&self, mask: &Matrix, rng: &mut R) -> Matrix {
        let mut out = Matrix::zeros(mask.rows(), mask.cols());
        for r in 0..mask.rows() {
            let m: Vec<bool> = mask.row(r).iter().map(|&v| v == 1.0).collect();
            out.row_mut(r).copy_from_slice(&self.draw(&m, rng));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn definition_cases() {
        assert_eq!(HintVector::new(&[true, false], 1).h, vec![1.0, 0.5]);
        assert_eq!(
            HintVector::new(&[true, true, false], 0).h,
            vec![0.5, 1.0, 0.0]
        );
    }

    #[test]
    fn hidden_index_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = 4;
        let mut counts = vec![0usize; d];
        let draws = 10_000;
        for _ in 0..draws {
            counts[make_hint(&[true, false, true, false], &mut rng).hidden_index] += 1;
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.25).abs() < 0.02, "{c}");
        }
    }

    fn registry(masks: &[&str]) -> PatternRegistry {
        PatternRegistry::from_masks(
            masks
                .iter()
                .map(|s| s.chars().map(|c| c == '1').collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn blocks_follow_mask_columns() {
        let reg = registry(&["111111", "110000", "111100"]);
        assert_eq!(mask_blocks(&reg), vec![vec![2, 3], vec![4, 5]]);
        assert!(mask_blocks(&registry(&["111"])).is_empty());
        let cells = registry(&["111", "011", "101"]);
        assert_eq!(mask_blocks(&cells), vec![vec![0], vec![1]]);
    }

    #[test]
    fn block_hint_hides_a_whole_block() {
        let reg = registry(&["111111", "110000", "111100"]);
        let sampler = HintSampler::new(HintScheme::Block, &reg);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = [true, true, true, true, false, false];
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..200 {
            let h = sampler.draw(&m, &mut rng);
            assert_eq!(&h[..2], &[1.0, 1.0]);
            let hidden: Vec<usize> = (0..6).filter(|&j| h[j] == 0.5).collect();
            assert!(hidden == vec![2, 3] || hidden == vec![4, 5], "{h:?}");
            seen.insert(hidden);
        }
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn complete_data_block_hint_is_the_mask() {
        let sampler = HintSampler::new(HintScheme::Block, &registry(&["11"]));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sampler.draw(&[true, true], &mut rng), vec![1.0, 1.0]);
    }
}
