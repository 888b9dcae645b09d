use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::hint::HintSampler;
use super::model::{batch_from, TraceRow, TrainedFragmgan};
use super::steps::{build_networks, discriminator_step, generator_step, predictor_step};
use super::{EngineError, FragmganConfig};
use crate::data::{normalize, MaskedDataset};
use crate::numeric::{Adam, Mlp, NumericError};
use crate::seed::derive;

const INIT_STREAM: u64 = 1;
const TRAIN_STREAM: u64 = 2;

/// Shuffled passes over the row indices; a new permutation starts whenever
/// the current one cannot fill a whole batch.
struct EpochSampler {
    order: Vec<usize>,
    pos: usize,
    batch: usize,
}

impl EpochSampler {
    fn new<R: Rng + ?Sized>(n: usize, batch: usize, rng: &mut R) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        Self {
            order,
            pos: 0,
            batch,
        }
    }

    fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[usize] {
        if self.pos + self.batch > self.order.len() {
            self.order.shuffle(rng);
            self.pos = 0;
        }
        let start = self.pos;
        self.pos += self.batch;
        &self.order[start..self.pos]
    }
}

/// Folds iterate `t` (from 1) into a bias-corrected exponential moving
/// average: weights proportional to `decay^(t−s)` over iterates `1..=t`,
/// with no weight left on the initialization.
fn average_into(avg: &mut Mlp, current: &Mlp, decay: f64, t: usize) {
    let step = (1.0 - decay) / (1.0 - decay.powi(t as i32));
    for (a, c) in avg
        .param_blocks_mut()
        .into_iter()
        .zip(current.param_blocks())
    {
        for (x, &y) in a.iter_mut().zip(c) {
            *x += step * (y - *x);
        }
    }
}

fn window_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn at_iteration(err: EngineError, iteration: usize, phase: &'static str) -> EngineError {
    match err {
        EngineError::Divergence { detail, .. } => EngineError::Divergence {
            iteration,
            phase,
            detail,
        },
        EngineError::Numeric(NumericError::NonFinite { block }) => EngineError::Divergence {
            iteration,
            phase,
            detail: format!("non-finite gradient in {block}"),
        },
        other => other,
    }
}

/// Trains generator, discriminator and (when labels are present) predictor on
/// a raw-scale dataset. Normalization statistics are fitted here, on `ds` only.
pub fn train(ds: &MaskedDataset, cfg: &FragmganConfig) -> Result<TrainedFragmgan, EngineError> {
    cfg.validate()?;
    let n = ds.n();
    if ds.registry().is_empty() || n == 0 {
        return Err(EngineError::EmptyPatterns);
    }
    let has_labels = ds.labels().is_some();
    if cfg.gamma < 1.0 && !has_labels {
        return Err(EngineError::MissingLabels);
    }
    let mut phases = vec![("generator", cfg.batch_g), ("discriminator", cfg.batch_d)];
    if has_labels {
        phases.push(("predictor", cfg.batch_p));
    }
    for (phase, batch) in phases {
        if batch > n {
            return Err(EngineError::BatchTooLarge { phase, batch, n });
        }
    }

    let (normalized, stats, _) = normalize(ds, None)?;
    let data = batch_from(&normalized, normalized.registry())?;
    let label_loss = cfg.label_loss.resolve(ds.label_kind());

    let mut init_rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, INIT_STREAM, 0));
    let (mut g, mut d, p) = build_networks(ds.d(), ds.k(), cfg, &mut init_rng)?;
    let mut p = has_labels.then_some(p);
    let mut opt_g = Adam::new(cfg.learning_rate);
    let mut opt_d = Adam::new(cfg.learning_rate);
    let mut opt_p = Adam::new(cfg.learning_rate);

    let mut rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, TRAIN_STREAM, 0));
    let mut sample_d = EpochSampler::new(n, cfg.batch_d, &mut rng);
    let mut sample_g = EpochSampler::new(n, cfg.batch_g, &mut rng);
    let mut sample_p = EpochSampler::new(n, cfg.batch_p, &mut rng);

    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut g_losses = Vec::with_capacity(cfg.iterations);
    let w = cfg.window;
    let hint = cfg
        .hint
        .then(|| HintSampler::new(cfg.hint_scheme, ds.registry()));
    let mut g_avg = g.clone();
    for it in 0..cfg.iterations {
        let batch = data.select(sample_d.next(&mut rng));
        let d_loss =
            discriminator_step(&mut d, &mut opt_d, &g, &batch, cfg, hint.as_ref(), &mut rng)
                .map_err(|e| at_iteration(e, it, "discriminator"))?;

        let batch = data.select(sample_g.next(&mut rng));
        let g_obj = generator_step(
            &mut g,
            &mut opt_g,
            &d,
            p.as_ref(),
            &batch,
            cfg,
            label_loss,
            hint.as_ref(),
            &mut rng,
        )
        .map_err(|e| at_iteration(e, it, "generator"))?;

        average_into(&mut g_avg, &g, cfg.generator_averaging, it + 1);

        let p_loss = match p.as_mut() {
            Some(p) => {
                let batch = data.select(sample_p.next(&mut rng));
                Some(
                    predictor_step(p, &mut opt_p, &g, &batch, cfg, label_loss, &mut rng)
                        .map_err(|e| at_iteration(e, it, "predictor"))?,
                )
            }
            None => None,
        };

        trace.push(TraceRow {
            iteration: it,
            d_loss,
            g_adv: g_obj.adversarial,
            g_rec: g_obj.reconstruction,
            p_loss,
        });
        g_losses.push(g_obj.total);
        let t = g_losses.len();
        if t % w == 0 && t >= 2 * w {
            let recent = window_mean(&g_losses[t - w..]);
            let before = window_mean(&g_losses[t - 2 * w..t - w]);
            if (recent - before).abs() < cfg.tolerance {
                break;
            }
        }
    }

    Ok(TrainedFragmgan {
        generator: g_avg,
        discriminator: d,
        predictor: p,
        norm_stats: stats,
        registry: ds.registry().clone(),
        config: cfg.clone(),
        label_kind: has_labels.then(|| ds.label_kind()),
        label_loss,
        feature_names: ds.columns().feature_names.clone(),
        trace,
    })
}
