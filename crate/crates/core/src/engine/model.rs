use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{FragmganConfig, LabelLoss};
use super::steps::{draw_noise, generate, Batch};
use super::EngineError;
use crate::data::{mask_string, normalize, LabelKind, MaskedDataset, NormStats, PatternRegistry};
use crate::numeric::{read_checkpoint, write_checkpoint, Matrix, Mlp};
use crate::seed::derive;

pub const MODEL_KIND: &str = "fragmgan-model";

const DRAW_STREAM: u64 = 3;

/// Losses recorded at one outer iteration. `d_loss` is the value the
/// discriminator ascends; `g_adv` and `g_rec` are the generator's adversarial
/// and reconstruction terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub d_loss: f64,
    pub g_adv: f64,
    pub g_rec: f64,
    pub p_loss: Option<f64>,
}

/// A trained model. Immutable after training; inference takes `&self`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedFragmgan {
    pub generator: Mlp,
    pub discriminator: Mlp,
    /// Absent when training data had no labels.
    pub predictor: Option<Mlp>,
    pub norm_stats: NormStats,
    pub registry: PatternRegistry,
    pub config: FragmganConfig,
    pub label_kind: Option<LabelKind>,
    pub label_loss: LabelLoss,
    pub feature_names: Vec<String>,
    pub trace: Vec<TraceRow>,
}

/// Stacks a normalized dataset into a batch, mapping each row's mask through
/// `registry`.
pub(crate) fn batch_from(
    ds: &MaskedDataset,
    registry: &PatternRegistry,
) -> Result<Batch, EngineError> {
    let (n, d, k) = (ds.n(), ds.d(), registry.len());
    let mut w = Matrix::zeros(n, k);
    for i in 0..n {
        let id = registry
            .id_of(ds.mask_row(i))
            .ok_or_else(|| EngineError::UnknownPattern {
                row: i,
                mask: mask_string(ds.mask_row(i)),
            })?;
        w.set(i, id, 1.0);
    }
    let y = match ds.labels() {
        Some(y) => Some(Matrix::from_vec(n, 1, y.to_vec())?),
        None => None,
    };
    debug_assert_eq!(ds.mask_matrix().cols(), d);
    Ok(Batch {
        x: ds.zero_filled(),
        mask: ds.mask_matrix(),
        w,
        y,
    })
}

impl TrainedFragmgan {
    pub fn d(&self) -> usize {
        self.generator.output_dim()
    }

    pub fn iterations_run(&self) -> usize {
        self.trace.len()
    }

    fn prepare(&self, ds: &MaskedDataset) -> Result<Batch, EngineError> {
        if ds.d() != self.d() {
            return Err(EngineError::FeatureCount {
                expected: self.d(),
                got: ds.d(),
            });
        }
        let (scaled, _, _) = normalize(&ds.clone().without_labels(), Some(&self.norm_stats))?;
        batch_from(&scaled, &self.registry)
    }

    fn draw(&self, batch: &Batch, seed: u64) -> Result<Matrix, EngineError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = draw_noise(
            batch.rows(),
            batch.x.cols(),
            self.config.noise_scale,
            &mut rng,
        );
        Ok(generate(&self.generator, batch, &noise)?.x_hat)
    }

    /// Completed rows on the normalized scale.
    pub fn impute_normalized(&self, ds: &MaskedDataset, seed: u64) -> Result<Matrix, EngineError> {
        let batch = self.prepare(ds)?;
        self.draw(&batch, derive(seed, DRAW_STREAM, 0))
    }

    /// Completed rows on the original scale. Observed cells are copied from
    /// `ds` unchanged.
    pub fn impute(&self, ds: &MaskedDataset, seed: u64) -> Result<Matrix, EngineError> {
        Ok(self.impute_draws(ds, 1, seed)?.remove(0))
    }

    /// `draws` independent imputations of every row.
    pub fn impute_draws(
        &self,
        ds: &MaskedDataset,
        draws: usize,
        seed: u64,
    ) -> Result<Vec<Matrix>, EngineError> {
        let batch = self.prepare(ds)?;
        (0..draws)
            .map(|k| {
                let scaled = self.draw(&batch, derive(seed, DRAW_STREAM, k as u64))?;
                let mut out = ds.features().clone();
                for i in 0..out.rows() {
                    for j in 0..out.cols() {
                        if !ds.is_observed(i, j) {
                            out.set(i, j, self.norm_stats.unscale_value(j, scaled.get(i, j)));
                        }
                    }
                }
                Ok(out)
            })
            .collect()
    }

    /// Label predictions from imputed rows: probabilities for binary labels,
    /// original-scale values for continuous ones.
    pub fn predict(&self, ds: &MaskedDataset, seed: u64) -> Result<Vec<f64>, EngineError> {
        let p = self.predictor.as_ref().ok_or(EngineError::NoPredictor)?;
        let x_hat = self.impute_normalized(ds, seed)?;
        let out = p.forward(&x_hat)?;
        Ok(out
            .data()
            .iter()
            .map(|&u| match self.label_kind {
                Some(LabelKind::Continuous) => self.norm_stats.unscale_label(u),
                _ => u,
            })
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<(), EngineError> {
        Ok(write_checkpoint(path, MODEL_KIND, self)?)
    }

    pub fn load(path: &Path) -> Result<Self, EngineError> {
        Ok(read_checkpoint(path, MODEL_KIND)?)
    }

    /// Loss traces as CSV with columns `iteration,d_loss,g_adv,g_rec,p_loss`.
    pub fn write_trace_csv<W: Write>(&self, writer: W) -> Result<(), EngineError> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| EngineError::Data(crate::data::DataError::Csv(e.to_string()));
        w.write_record(["iteration", "d_loss", "g_adv", "g_rec", "p_loss"])
            .map_err(io)?;
        for row in &self.trace {
            w.write_record([
                row.iteration.to_string(),
                row.d_loss.to_string(),
                row.g_adv.to_string(),
                row.g_rec.to_string(),
                row.p_loss.map(|v| v.to_string()).unwrap_or_default(),
            ])
            .map_err(io)?;
        }
        w.flush()
            .map_err(|e| EngineError::Data(crate::data::DataError::Io(e.to_string())))
    }
}
