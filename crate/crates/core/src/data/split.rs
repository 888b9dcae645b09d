//! Pattern-stratified train/test splits and cross-validation folds.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, MaskedDataset};

fn shuffled_by_pattern(ds: &MaskedDataset, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_pattern = vec![Vec::new(); ds.k()];
    for (i, &id) in ds.pattern_ids().iter().enumerate() {
        by_pattern[id].push(i);
    }
    for rows in &mut by_pattern {
        rows.shuffle(&mut rng);
    }
    by_pattern
}

/// Row indices `(train, test)`; each pattern contributes `round(count · fraction)`
/// rows to the test side. Both lists are sorted.
pub fn stratified_split_indices(
    ds: &MaskedDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(DataError::Schema(format!(
            "test fraction {test_fraction} outside [0, 1)"
        )));
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for rows in shuffled_by_pattern(ds, seed) {
        let n_test = (rows.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&rows[..n_test]);
        train.extend_from_slice(&rows[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn stratified_split(
    ds: &MaskedDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(MaskedDataset, MaskedDataset), DataError> {
    let (train, test) = stratified_split_indices(ds, test_fraction, seed)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// `folds` disjoint, sorted index sets covering every row, balanced within each pattern.
pub fn stratified_folds(
    ds: &MaskedDataset,
    folds: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, DataError> {
    if folds < 2 || folds > ds.n() {
        return Err(DataError::Schema(format!(
            "cannot make {folds} folds from {} rows",
            ds.n()
        )));
    }
    let mut out = vec![Vec::new(); folds];
    // continue the round-robin across patterns so fold sizes differ by at most one
    let mut next = 0;
    for rows in shuffled_by_pattern(ds, seed) {
        for i in rows {
            out[next].push(i);
            next = (next + 1) % folds;
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Columns, FeatureGroups, PatternPolicy};
    use crate::numeric::Matrix;

    fn ds_with_patterns(counts: &[usize]) -> MaskedDataset {
        let mut rows = Vec::new();
        for (k, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                let mut r = vec![1.0; counts.len()];
                if k > 0 {
                    r[k] = f64::NAN;
                }
                rows.push(r);
            }
        }
        let names: Vec<String> = (0..counts.len()).map(|j| format!("c{j}")).collect();
        MaskedDataset::new(
            Matrix::from_rows(&rows).unwrap(),
            None,
            Columns::new(names.clone(), FeatureGroups::singletons(&names)),
            PatternPolicy::Discover,
        )
        .unwrap()
    }

    #[test]
    fn single_pattern_eighty_twenty() {
        let ds = ds_with_patterns(&[10]);
        let (train, test) = stratified_split_indices(&ds, 0.2, 1).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
    }

    #[test]
    fn each_pattern_contributes() {
        let ds = ds_with_patterns(&[5, 5]);
        let (_, test) = stratified_split(&ds, 0.2, 9).unwrap();
        assert_eq!(test.pattern_counts(), vec![1, 1]);
    }

    #[test]
    fn split_is_seeded() {
        let ds = ds_with_patterns(&[30, 17, 9]);
        assert_eq!(
            stratified_split_indices(&ds, 0.2, 4).unwrap(),
            stratified_split_indices(&ds, 0.2, 4).unwrap()
        );
        assert_ne!(
            stratified_split_indices(&ds, 0.2, 4).unwrap(),
            stratified_split_indices(&ds, 0.2, 5).unwrap()
        );
    }

    #[test]
    fn folds_partition_rows() {
        let ds = ds_with_patterns(&[23, 11, 7]);
        let folds = stratified_folds(&ds, 5, 3).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..41).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
}
