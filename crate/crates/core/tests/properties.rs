use fragmgan::amputer::{ampute_mcar, AmputationPlan, Mechanism};
use fragmgan::data::{
    compose_imputed, normalize, stratified_folds, stratified_split_indices, Columns, FeatureGroups,
    MaskedDataset, PatternPolicy,
};
use fragmgan::engine::{mask_blocks, HintSampler, HintScheme};
use fragmgan::harness::auc;
use fragmgan::numeric::{Activation, Matrix, Mlp};
use fragmgan::synth::{gaussian_copula, CopulaSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `n × d` values in `[-50, 50]` with roughly `missing` of the cells NaN;
/// column 0 is always observed so every column fit has data.
fn incomplete(n: usize, d: usize, missing: f64, seed: u64) -> MaskedDataset {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Matrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            let v = if i > 0 && rng.random::<f64>() < missing {
                f64::NAN
            } else {
                rng.random_range(-50.0..50.0)
            };
            x.set(i, j, v);
        }
    }
    let names = (0..d).map(|j| format!("c{j}")).collect::<Vec<_>>();
    let columns = Columns::new(names.clone(), FeatureGroups::singletons(&names));
    MaskedDataset::new(x, None, columns, PatternPolicy::Discover).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn compose_copies_observed_cells_bit_for_bit(
        cells in prop::collection::vec((any::<f64>(), any::<bool>(), -1.0f64..2.0), 1..40),
    ) {
        let x: Vec<f64> = cells.iter().map(|c| c.0).collect();
        let m: Vec<bool> = cells.iter().map(|c| c.1).collect();
        let g: Vec<f64> = cells.iter().map(|c| c.2).collect();
        let out = compose_imputed(&x, &m, &g);
        for j in 0..x.len() {
            let expected = if m[j] { x[j] } else { g[j] };
            prop_assert_eq!(out[j].to_bits(), expected.to_bits());
        }
    }

    #[test]
    fn normalization_round_trips(n in 2usize..30, d in 1usize..6, missing in 0.0f64..0.6, seed in any::<u64>()) {
        let ds = incomplete(n, d, missing, seed);
        let (scaled, stats, report) = normalize(&ds, None).unwrap();
        prop_assert_eq!(report.out_of_range, 0);
        for i in 0..n {
            for j in 0..d {
                prop_assert_eq!(scaled.is_observed(i, j), ds.is_observed(i, j));
                if ds.is_observed(i, j) {
                    let u = scaled.row(i)[j];
                    prop_assert!((0.0..=1.0).contains(&u));
                    let back = stats.unscale_value(j, u);
                    prop_assert!((back - ds.row(i)[j]).abs() <= 1e-12 * (1.0 + back.abs()));
                }
            }
        }
    }

    #[test]
    fn mcar_amputation_removes_whole_groups(
        sizes in prop::collection::vec(1usize..4, 2..4),
        share in 0.05f64..0.9,
        seed in any::<u64>(),
    ) {
        let complete = gaussian_copula(&CopulaSpec {
            n: 60,
            group_sizes: sizes.clone(),
            correlation: 0.5,
            label_slope: None,
            seed,
        })
        .unwrap();
        // Only groups other than the first can go missing.
        let d: usize = sizes.iter().sum();
        let rate = share * (d - sizes[0]) as f64 / d as f64;
        let plan = AmputationPlan {
            mechanism: Mechanism::Mcar,
            observed_group: 0,
            target_miss_rate: rate,
            mar_weights: vec![],
            seed,
        };
        let ds = ampute_mcar(&complete, &plan).unwrap();
        let again = ampute_mcar(&complete, &plan).unwrap();
        let bits = |m: &MaskedDataset| m.features().data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&ds), bits(&again));
        let groups = &ds.columns().groups;
        for i in 0..ds.n() {
            for g in 0..groups.len() {
                let cols = groups.members(g);
                let seen = cols.iter().filter(|&&j| ds.is_observed(i, j)).count();
                if g == 0 {
                    prop_assert_eq!(seen, cols.len());
                } else {
                    prop_assert!(seen == 0 || seen == cols.len());
                }
                for &j in &cols {
                    if ds.is_observed(i, j) {
                        prop_assert_eq!(ds.row(i)[j].to_bits(), complete.row(i)[j].to_bits());
                    }
                }
            }
        }
    }

    #[test]
    fn softmax_head_outputs_distributions(input in 1usize..6, k in 2usize..6, seed in any::<u64>(), scale in 0.1f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Mlp::new(input, &[(4, Activation::Relu), (3, Activation::Relu), (k, Activation::Softmax)], &mut rng).unwrap();
        let x = Matrix::from_vec(3, input, (0..3 * input).map(|i| scale * ((i as f64 * 0.37).sin())).collect()).unwrap();
        let out = net.forward(&x).unwrap();
        for r in 0..3 {
            let row = out.row(r);
            prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn splits_and_folds_partition_rows(n in 10usize..80, fraction in 0.1f64..0.5, folds in 2usize..6, seed in any::<u64>()) {
        let ds = incomplete(n, 3, 0.3, seed);
        let (train, test) = stratified_split_indices(&ds, fraction, seed).unwrap();
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());

        let parts = stratified_folds(&ds, folds, seed).unwrap();
        let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn block_hint_hides_exactly_one_block(n in 5usize..40, d in 2usize..6, seed in any::<u64>()) {
        let ds = incomplete(n, d, 0.4, seed);
        let blocks = mask_blocks(ds.registry());
        prop_assume!(!blocks.is_empty());
        let sampler = HintSampler::new(HintScheme::Block, ds.registry());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..n {
            let m = ds.mask_row(i);
            let h = sampler.draw(m, &mut rng);
            let hidden: Vec<usize> = (0..d).filter(|&j| h[j] == 0.5).collect();
            prop_assert!(blocks.contains(&hidden), "hidden {:?} is not a block of {:?}", hidden, blocks);
            for j in (0..d).filter(|j| !hidden.contains(j)) {
                prop_assert_eq!(h[j], if m[j] { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn auc_depends_only_on_ranks(scores in prop::collection::vec(-5.0f64..5.0, 4..40), seed in any::<u64>()) {
        let labels: Vec<f64> = (0..scores.len()).map(|i| ((i as u64 ^ seed) % 2) as f64).collect();
        prop_assume!(labels.contains(&0.0) && labels.contains(&1.0));
        let a = auc(&scores, &labels).unwrap();
        let stretched: Vec<f64> = scores.iter().map(|s| s.exp() * 3.0 + 1.0).collect();
        prop_assert!((auc(&stretched, &labels).unwrap() - a).abs() < 1e-12);
        let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((auc(&flipped, &labels).unwrap() - (1.0 - a)).abs() < 1e-12);
    }
}
