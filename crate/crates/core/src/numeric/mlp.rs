//! Feedforward networks with manual backpropagation.
//!
//! A layer computes `y = act(x · W + b)` on row-major batches, with `W` stored
//! as an `in_dim × out_dim` matrix. Gradients are returned in the same block
//! order as [`Mlp::param_blocks`]: for each layer its weights, then its biases.

use std::hash::{Hash, Hasher};

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::{Matrix, NumericError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Softmax,
    Identity,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    fn apply(self, z: &mut Matrix) {
        match self {
            Activation::Identity => {}
            Activation::Relu => z.data_mut().iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Sigmoid => z.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::Softmax => {
                for r in 0..z.rows() {
                    let row = z.row_mut(r);
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let mut sum = 0.0;
                    for v in row.iter_mut() {
                        *v = (*v - max).exp();
                        sum += *v;
                    }
                    row.iter_mut().for_each(|v| *v /= sum);
                }
            }
        }
    }

    /// Maps `dL/dy` to `dL/dz` given the activation output `y`.
    fn backprop(self, y: &Matrix, grad_y: &Matrix) -> Matrix {
        match self {
            Activation::Identity => grad_y.clone(),
            Activation::Relu => y
                .zip_map(grad_y, |y, g| if y > 0.0 { g } else { 0.0 })
                .expect("shapes checked by caller"),
            Activation::Sigmoid => y
                .zip_map(grad_y, |y, g| g * y * (1.0 - y))
                .expect("shapes checked by caller"),
            Activation::Softmax => {
                let mut out = Matrix::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row(r), grad_y.row(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for (o, (&yi, &gi)) in out.row_mut(r).iter_mut().zip(yr.iter().zip(gr)) {
                        *o = yi * (gi - dot);
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }
}

/// A feedforward multilayer perceptron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Activations recorded by [`Mlp::forward_trace`]; `outputs[0]` is the input.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    outputs: Vec<Matrix>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Matrix {
        self.outputs.last().expect("trace holds at least the input")
    }

    pub fn input(&self) -> &Matrix {
        &self.outputs[0]
    }
}

/// Parameter gradients, shaped exactly like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrad>,
}

impl MlpGrads {
    pub fn blocks(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.data(), l.bias.as_slice()])
            .collect()
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weight.data_mut().iter_mut().for_each(|v| *v *= factor);
            l.bias.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Flattened gradient in block order.
    pub fn flatten(&self) -> Vec<f64> {
        self.blocks().into_iter().flatten().copied().collect()
    }
}

/// Human-readable name of parameter block `index` (see [`Mlp::param_blocks`]).
pub fn block_name(index: usize) -> String {
    let kind = if index.is_multiple_of(2) {
        "weight"
    } else {
        "bias"
    };
    format!("layer {} {kind}", index / 2)
}

impl Mlp {
    /// Builds a network with Glorot-uniform weights and zero biases.
    ///
    /// `spec` lists `(output width, activation)` per layer.
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        spec: &[(usize, Activation)],
        rng: &mut R,
    ) -> Result<Self, NumericError> {
        if input_dim == 0 || spec.is_empty() {
            return Err(NumericError::InvalidNetwork(
                "network needs a positive input width and at least one layer".into(),
            ));
        }
        let mut layers = Vec::with_capacity(spec.len());
        let mut fan_in = input_dim;
        for &(fan_out, activation) in spec {
            if fan_out == 0 {
                return Err(NumericError::InvalidNetwork(
                    "layer width must be positive".into(),
                ));
            }
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
            let data = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
            layers.push(Layer {
                weight: Matrix::from_vec(fan_in, fan_out, data)?,
                bias: vec![0.0; fan_out],
                activation,
            });
            fan_in = fan_out;
        }
        Self::from_layers(layers)
    }

    /// Wraps explicit layers after validating that their widths chain.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, NumericError> {
        if layers.is_empty() {
            return Err(NumericError::InvalidNetwork("no layers".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(NumericError::InvalidNetwork(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(NumericError::InvalidNetwork(format!(
                    "layer {i} bias length"
                )));
            }
            if l.activation == Activation::Softmax && i + 1 != layers.len() {
                return Err(NumericError::InvalidNetwork(format!(
                    "softmax on hidden layer {i}; only the final layer may use it"
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn output_activation(&self) -> Activation {
        self.layers[self.layers.len() - 1].activation
    }

    pub fn forward(&self, input: &Matrix) -> Result<Matrix, NumericError> {
        self.check_input(input)?;
        let mut a = input.clone();
        for layer in &self.layers {
            a = Self::layer_forward(layer, &a)?;
        }
        Ok(a)
    }

    /// Forward pass that keeps every intermediate activation for [`Mlp::backward`].
    pub fn forward_trace(&self, input: &Matrix) -> Result<ForwardTrace, NumericError> {
        self.check_input(input)?;
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        outputs.push(input.clone());
        for layer in &self.layers {
            let next = Self::layer_forward(layer, outputs.last().expect("nonempty"))?;
            outputs.push(next);
        }
        Ok(ForwardTrace { outputs })
    }

    fn layer_forward(layer: &Layer, a: &Matrix) -> Result<Matrix, NumericError> {
        let mut z = a.matmul(&layer.weight)?;
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                *v += b;
            }
        }
        layer.activation.apply(&mut z);
        Ok(z)
    }

    fn check_input(&self, input: &Matrix) -> Result<(), NumericError> {
        if input.cols() != self.input_dim() {
            return Err(NumericError::DimensionMismatch {
                op: "Mlp::forward",
                expected: format!("{} input columns", self.input_dim()),
                got: format!("{}", input.cols()),
            });
        }
        Ok(())
    }

    /// Backpropagates `upstream` (`dL/d output`) through a recorded forward pass.
    ///
    /// Returns parameter gradients and `dL/d input`.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        upstream: &Matrix,
    ) -> Result<(MlpGrads, Matrix), NumericError> {
        let out = trace.output();
        if trace.outputs.len() != self.layers.len() + 1 || upstream.shape() != out.shape() {
            return Err(NumericError::DimensionMismatch {
                op: "Mlp::backward",
                expected: format!("{}x{} upstream gradient", out.rows(), out.cols()),
                got: format!("{}x{}", upstream.rows(), upstream.cols()),
            });
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut grad = upstream.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let y = &trace.outputs[l + 1];
            let a = &trace.outputs[l];
            let dz = layer.activation.backprop(y, &grad);
            let weight = a.t_matmul(&dz)?;
            let bias = dz.column_sums();
            grad = dz.matmul_t(&layer.weight)?;
            grads.push(LayerGrad { weight, bias });
        }
        grads.reverse();
        Ok((MlpGrads { layers: grads }, grad))
    }

    /// Parameter blocks in gradient order.
    pub fn param_blocks(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.data(), l.bias.as_slice()])
            .collect()
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.data_mut(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.param_blocks().iter().map(|b| b.len()).sum()
    }

    /// Zero gradients shaped like this network.
    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            layers: self
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weight: Matrix::zeros(l.in_dim(), l.out_dim()),
                    bias: vec![0.0; l.out_dim()],
                })
                .collect(),
        }
    }

    /// Hash of the exact parameter bits.
    pub fn checksum(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for block in self.param_blocks() {
            for v in block {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_layer(dim: usize) -> Layer {
        let mut w = Matrix::zeros(dim, dim);
        for i in 0..dim {
            w.set(i, i, 1.0);
        }
        Layer {
            weight: w,
            bias: vec![0.0; dim],
            activation: Activation::Identity,
        }
    }

    #[test]
    fn identity_network_passes_input() {
        let net = Mlp::from_layers(vec![identity_layer(2)]).unwrap();
        let out = net.forward(&Matrix::row_vector(&[1.0, 2.0])).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0]);
    }

    #[test]
    fn softmax_of_zero_logits_is_uniform() {
        let net = Mlp::from_layers(vec![Layer {
            weight: Matrix::zeros(3, 4),
            bias: vec![0.0; 4],
            activation: Activation::Softmax,
        }])
        .unwrap();
        let out = net.forward(&Matrix::row_vector(&[0.3, -1.0, 2.0])).unwrap();
        for &v in out.data() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_evaluated_two_layer_chain() {
        // layer 1: relu([1,0]·[[1,-2],[3,4]] + [0.5,0.5]) = relu([1.5,-1.5]) = [1.5,0]
        // layer 2: sigmoid([1.5,0]·[[2],[7]] + [-1]) = sigmoid(2) = 0.8807970779778823
        let l1 = Layer {
            weight: Matrix::from_rows(&[vec![1.0, -2.0], vec![3.0, 4.0]]).unwrap(),
            bias: vec![0.5, 0.5],
            activation: Activation::Relu,
        };
        let l2 = Layer {
            weight: Matrix::from_rows(&[vec![2.0], vec![7.0]]).unwrap(),
            bias: vec![-1.0],
            activation: Activation::Sigmoid,
        };
        let net = Mlp::from_layers(vec![l1, l2]).unwrap();
        let out = net.forward(&Matrix::row_vector(&[1.0, 0.0])).unwrap();
        assert!((out.get(0, 0) - 0.880_797_077_977_882_3).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_shapes() {
        let net = Mlp::from_layers(vec![identity_layer(2)]).unwrap();
        assert!(matches!(
            net.forward(&Matrix::zeros(1, 3)),
            Err(NumericError::DimensionMismatch { .. })
        ));
        let hidden_softmax = Layer {
            activation: Activation::Softmax,
            ..identity_layer(2)
        };
        assert!(Mlp::from_layers(vec![hidden_softmax, identity_layer(2)]).is_err());
        assert!(Mlp::from_layers(vec![identity_layer(2), identity_layer(3)]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(
            3,
            &[(4, Activation::Relu), (2, Activation::Sigmoid)],
            &mut rng,
        )
        .unwrap();
        let x = Matrix::from_rows(&[vec![0.1, 0.2, 0.3], vec![1.0, -1.0, 0.5]]).unwrap();
        let trace = net.forward_trace(&x).unwrap();
        let (g, gx) = net.backward(&trace, &Matrix::zeros(2, 2)).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
        assert!(gx.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_quadratic_gradient_closed_form() {
        // ŷ = w x + b, L = (ŷ − y)², dL/dw = 2(ŷ − y) x, dL/db = 2(ŷ − y)
        let net = Mlp::from_layers(vec![Layer {
            weight: Matrix::from_rows(&[vec![0.7]]).unwrap(),
            bias: vec![0.2],
            activation: Activation::Identity,
        }])
        .unwrap();
        let (x, y) = (1.5, 2.0);
        let trace = net.forward_trace(&Matrix::row_vector(&[x])).unwrap();
        let yhat = trace.output().get(0, 0);
        let upstream = Matrix::row_vector(&[2.0 * (yhat - y)]);
        let (g, gx) = net.backward(&trace, &upstream).unwrap();
        assert!((g.layers[0].weight.get(0, 0) - 2.0 * (yhat - y) * x).abs() < 1e-15);
        assert!((g.layers[0].bias[0] - 2.0 * (yhat - y)).abs() < 1e-15);
        assert!((gx.get(0, 0) - 2.0 * (yhat - y) * 0.7).abs() < 1e-15);
    }

    #[test]
    fn forward_is_bit_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Mlp::new(
            5,
            &[
                (10, Activation::Relu),
                (5, Activation::Relu),
                (3, Activation::Softmax),
            ],
            &mut rng,
        )
        .unwrap();
        let x = Matrix::from_vec(2, 5, (0..10).map(|i| i as f64 * 0.1).collect()).unwrap();
        let a = net.forward(&x).unwrap();
        let b = net.clone().forward(&x).unwrap();
        assert_eq!(
            a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        for row in a.iter_rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
    }
}
