//! Networks, batch objectives and the three alternating update steps.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::{DiscriminatorMode, FragmganConfig, LabelLoss};
use super::hint::HintSampler;
use super::EngineError;
use crate::numeric::loss::{
    binary_cross_entropy, coordinate_log_likelihood, cross_entropy_onehot, masked_reconstruction,
    squared, LossOutput,
};
use crate::numeric::{
    Activation, Adam, Direction, ForwardTrace, Matrix, Mlp, MlpGrads, NumericError,
};

/// A stack of normalized rows: observed values (zero where missing), the mask
/// as 0/1, the pattern one-hots and, when present, the scaled labels as a column.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Matrix,
    pub mask: Matrix,
    pub w: Matrix,
    pub y: Option<Matrix>,
}

impl Batch {
    pub fn rows(&self) -> usize {
        self.x.rows()
    }

    pub fn select(&self, indices: &[usize]) -> Batch {
        Batch {
            x: self.x.select_rows(indices),
            mask: self.mask.select_rows(indices),
            w: self.w.select_rows(indices),
            y: self.y.as_ref().map(|y| y.select_rows(indices)),
        }
    }
}

/// Generator `2d+K → 2d → d → d`, discriminator `d|2d → 2d → d → K` (softmax) or
/// `→ d` (sigmoid, coordinate mode), predictor `d → d → d/2 → 1`.
pub fn build_networks<R: Rng + ?Sized>(
    d: usize,
    k: usize,
    cfg: &FragmganConfig,
    rng: &mut R,
) -> Result<(Mlp, Mlp, Mlp), NumericError> {
    use Activation::{Relu, Sigmoid, Softmax};
    let g = Mlp::new(2 * d + k, &[(2 * d, Relu), (d, Relu), (d, Sigmoid)], rng)?;
    let d_in = if cfg.hint { 2 * d } else { d };
    let head = match cfg.discriminator {
        DiscriminatorMode::Pattern => (k, Softmax),
        DiscriminatorMode::GainCoordinatewise => (d, Sigmoid),
    };
    let disc = Mlp::new(d_in, &[(2 * d, Relu), (d, Relu), head], rng)?;
    let p = Mlp::new(d, &[(d, Relu), ((d / 2).max(1), Relu), (1, Sigmoid)], rng)?;
    Ok((g, disc, p))
}

pub fn draw_noise<R: Rng + ?Sized>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Matrix {
    let normal = Normal::new(0.0, scale).expect("positive noise scale");
    let data = (0..rows * cols).map(|_| normal.sample(rng)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

/// `[m⊙x, (1−m)⊙z, w]` row by row.
pub fn generator_input(batch: &Batch, noise: &Matrix) -> Result<Matrix, NumericError> {
    batch.x.check_same_shape(noise, "generator_input")?;
    let observed = batch.x.zip_map(&batch.mask, |x, m| m * x)?;
    let filler = noise.zip_map(&batch.mask, |z, m| (1.0 - m) * z)?;
    observed.hcat(&filler)?.hcat(&batch.w)
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub trace: ForwardTrace,
    pub x_bar: Matrix,
    pub x_hat: Matrix,
}

/// Runs the generator and composes `x̂ = m⊙x + (1−m)⊙x̄`; observed cells are
/// copied from `batch.x`, never recomputed.
pub fn generate(g: &Mlp, batch: &Batch, noise: &Matrix) -> Result<Generated, NumericError> {
    let trace = g.forward_trace(&generator_input(batch, noise)?)?;
    let x_bar = trace.output().clone();
    batch.x.check_same_shape(&batch.mask, "generate")?;
    let x_hat = compose(&batch.x, &batch.mask, &x_bar);
    Ok(Generated {
        trace,
        x_bar,
        x_hat,
    })
}

fn compose(x: &Matrix, mask: &Matrix, x_bar: &Matrix) -> Matrix {
    let data = x
        .data()
        .iter()
        .zip(mask.data())
        .zip(x_bar.data())
        .map(|((&x, &m), &g)| if m == 1.0 { x } else { g })
        .collect();
    Matrix::from_vec(x.rows(), x.cols(), data).expect("same shape")
}

pub fn discriminator_input(x_hat: &Matrix, hints: Option<&Matrix>) -> Result<Matrix, NumericError> {
    match hints {
        Some(h) => x_hat.hcat(h),
        None => Ok(x_hat.clone()),
    }
}

/// The value the discriminator ascends: `mean Σ_k w_k log D_k` in pattern mode,
/// `mean Σ_j [m_j log D_j + (1−m_j) log(1−D_j)]` in coordinate mode.
pub fn adversarial_value(
    probs: &Matrix,
    batch: &Batch,
    mode: DiscriminatorMode,
) -> Result<LossOutput, NumericError> {
    match mode {
        DiscriminatorMode::Pattern => cross_entropy_onehot(probs, &batch.w),
        DiscriminatorMode::GainCoordinatewise => coordinate_log_likelihood(probs, &batch.mask),
    }
}

/// A scalar objective with its parameter gradient and its gradient with
/// respect to the network input.
#[derive(Debug, Clone)]
pub struct Objective {
    pub value: f64,
    pub grads: MlpGrads,
    pub input_grad: Matrix,
    pub floored: usize,
}

/// Adversarial value for a batch of completed rows, differentiated through `d`.
pub fn discriminator_objective(
    d: &Mlp,
    x_hat: &Matrix,
    batch: &Batch,
    hints: Option<&Matrix>,
    mode: DiscriminatorMode,
) -> Result<Objective, NumericError> {
    let trace = d.forward_trace(&discriminator_input(x_hat, hints)?)?;
    let loss = adversarial_value(trace.output(), batch, mode)?;
    let (grads, input_grad) = d.backward(&trace, &loss.grad)?;
    Ok(Objective {
        value: loss.value,
        grads,
        input_grad,
        floored: loss.floored,
    })
}

pub fn label_value(pred: &Matrix, y: &Matrix, loss: LabelLoss) -> Result<LossOutput, NumericError> {
    match loss {
        LabelLoss::BinaryCe => binary_cross_entropy(pred, y),
        LabelLoss::Squared | LabelLoss::Auto => squared(pred, y),
    }
}

/// Prediction loss of `p` on completed rows.
pub fn predictor_objective(
    p: &Mlp,
    x_hat: &Matrix,
    y: &Matrix,
    loss: LabelLoss,
) -> Result<Objective, NumericError> {
    let trace = p.forward_trace(x_hat)?;
    let out = label_value(trace.output(), y, loss)?;
    let (grads, input_grad) = p.backward(&trace, &out.grad)?;
    Ok(Objective {
        value: out.value,
        grads,
        input_grad,
        floored: out.floored,
    })
}

/// `α · mean Σ_j m_j (x̃_j − x̄_j)²`.
pub fn reconstruction_loss(
    mask: &Matrix,
    x_tilde: &Matrix,
    x_bar: &Matrix,
    alpha: f64,
) -> Result<LossOutput, NumericError> {
    masked_reconstruction(mask, x_tilde, x_bar, alpha)
}

/// Everything the generator step needs: term values, the gradient of the full
/// objective, and the two components it is built from.
#[derive(Debug, Clone)]
pub struct GeneratorObjective {
    pub adversarial: f64,
    pub reconstruction: f64,
    pub prediction: Option<f64>,
    pub total: f64,
    pub grads: MlpGrads,
    /// Gradient of `adversarial + reconstruction` alone.
    pub imputation_grads: MlpGrads,
    /// Gradient of the prediction loss alone.
    pub prediction_grads: Option<MlpGrads>,
}

/// `γ[V + L_M] + (1−γ) L(y, P(x̂))` as a function of the generator parameters.
///
/// The prediction term is skipped when `p` or the labels are absent, which is
/// only allowed at `γ = 1`.
#[allow(clippy::too_many_arguments)]
pub fn generator_objective(
    g: &Mlp,
    d: &Mlp,
    p: Option<&Mlp>,
    batch: &Batch,
    noise: &Matrix,
    hints: Option<&Matrix>,
    cfg: &FragmganConfig,
    label_loss: LabelLoss,
) -> Result<GeneratorObjective, EngineError> {
    let gen = generate(g, batch, noise)?;
    let missing = batch.mask.map(|m| 1.0 - m);
    let d_cols = batch.x.cols();

    let adv = discriminator_objective(d, &gen.x_hat, batch, hints, cfg.discriminator)?;
    let adv_to_xbar = adv
        .input_grad
        .columns(0, d_cols)
        .zip_map(&missing, |g, u| g * u)?;
    let rec = reconstruction_loss(&batch.mask, &batch.x, &gen.x_bar, cfg.alpha)?;
    let mut imputation_upstream = adv_to_xbar;
    imputation_upstream.add_assign(&rec.grad)?;

    let prediction = match (p, batch.y.as_ref()) {
        (Some(p), Some(y)) => {
            let obj = predictor_objective(p, &gen.x_hat, y, label_loss)?;
            let up = obj.input_grad.zip_map(&missing, |g, u| g * u)?;
            Some((obj.value, up))
        }
        _ if cfg.gamma < 1.0 => return Err(EngineError::MissingLabels),
        _ => None,
    };

    let gamma = cfg.gamma;
    let mut upstream = imputation_upstream.scale(gamma);
    if let Some((_, up)) = &prediction {
        upstream.add_assign(&up.scale(1.0 - gamma))?;
    }
    let (grads, _) = g.backward(&gen.trace, &upstream)?;
    let (imputation_grads, _) = g.backward(&gen.trace, &imputation_upstream)?;
    let prediction_grads = match &prediction {
        Some((_, up)) => Some(g.backward(&gen.trace, up)?.0),
        None => None,
    };
    let pred_value = prediction.as_ref().map(|(v, _)| *v);
    let total = gamma * (adv.value + rec.value) + (1.0 - gamma) * pred_value.unwrap_or(0.0);
    Ok(GeneratorObjective {
        adversarial: adv.value,
        reconstruction: rec.value,
        prediction: pred_value,
        total,
        grads,
        imputation_grads,
        prediction_grads,
    })
}

fn check_finite(value: f64, phase: &'static str) -> Result<(), EngineError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(EngineError::Divergence {
            iteration: 0,
            phase,
            detail: format!("loss evaluated to {value}"),
        })
    }
}

fn hints_for<R: Rng + ?Sized>(
    batch: &Batch,
    hints: Option<&HintSampler>,
    rng: &mut R,
) -> Option<Matrix> {
    hints.map(|s| s.matrix(&batch.mask, rng))
}

/// One ascent step on the adversarial value. Only `d` and its optimizer change.
pub fn discriminator_step<R: Rng + ?Sized>(
    d: &mut Mlp,
    opt: &mut Adam,
    g: &Mlp,
    batch: &Batch,
    cfg: &FragmganConfig,
    hint: Option<&HintSampler>,
    rng: &mut R,
) -> Result<f64, EngineError> {
    let noise = draw_noise(batch.rows(), batch.x.cols(), cfg.noise_scale, rng);
    let hints = hints_for(batch, hint, rng);
    let x_hat = generate(g, batch, &noise)?.x_hat;
    let obj = discriminator_objective(d, &x_hat, batch, hints.as_ref(), cfg.discriminator)?;
    check_finite(obj.value, "discriminator")?;
    opt.step(d, &obj.grads, Direction::Ascend)?;
    Ok(obj.value)
}

/// One descent step on the linked generator objective. Only `g` and its optimizer change.
#[allow(clippy::too_many_arguments)]
pub fn generator_step<R: Rng + ?Sized>(
    g: &mut Mlp,
    opt: &mut Adam,
    d: &Mlp,
    p: Option<&Mlp>,
    batch: &Batch,
    cfg: &FragmganConfig,
    label_loss: LabelLoss,
    hint: Option<&HintSampler>,
    rng: &mut R,
) -> Result<GeneratorObjective, EngineError> {
    let noise = draw_noise(batch.rows(), batch.x.cols(), cfg.noise_scale, rng);
    let hints = hints_for(batch, hint, rng);
    let obj = generator_objective(g, d, p, batch, &noise, hints.as_ref(), cfg, label_loss)?;
    check_finite(obj.total, "generator")?;
    opt.step(g, &obj.grads, Direction::Descend)?;
    Ok(obj)
}

/// One descent step on the prediction loss with the generator held fixed.
pub fn predictor_step<R: Rng + ?Sized>(
    p: &mut Mlp,
    opt: &mut Adam,
    g: &Mlp,
    batch: &Batch,
    cfg: &FragmganConfig,
    label_loss: LabelLoss,
    rng: &mut R,
) -> Result<f64, EngineError> {
    let y = batch.y.as_ref().ok_or(EngineError::MissingLabels)?;
    let noise = draw_noise(batch.rows(), batch.x.cols(), cfg.noise_scale, rng);
    let x_hat = generate(g, batch, &noise)?.x_hat;
    let obj = predictor_objective(p, &x_hat, y, label_loss)?;
    check_finite(obj.value, "predictor")?;
    opt.step(p, &obj.grads, Direction::Descend)?;
    Ok(obj.value)
}
