//! Minimal dense feed-forward network with exact reverse-mode gradients.
//!
//! Parameters live in one flat vector so optimizers can treat the model as a
//! point in R^n. Layout per layer: weight matrix row-major `[out x in]`, then
//! biases `[out]`. All arithmetic is in `f64`.

use std::ops::{Deref, DerefMut};

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::rng_from_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    ReLU,
}

/// Architecture of a fully-connected network with a single output logit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
    pub output_dim: usize,
}

impl NetworkSpec {
    /// ReLU network with one output logit.
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>) -> Self {
        NetworkSpec {
            input_dim,
            hidden_dims,
            activation: Activation::ReLU,
            output_dim: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim < 1 || self.output_dim < 1 || self.hidden_dims.iter().any(|&d| d < 1) {
            return Err(Error::Config(format!(
                "network dims must all be >= 1, got input {}, hidden {:?}, output {}",
                self.input_dim, self.hidden_dims, self.output_dim
            )));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.output_dim));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims()
            .iter()
            .map(|&(i, o)| i * o + o)
            .sum()
    }

    /// Flat-vector index ranges `(weights, biases)` of every layer.
    pub fn param_layout(&self) -> Vec<(std::ops::Range<usize>, std::ops::Range<usize>)> {
        let mut layout = Vec::new();
        let mut offset = 0;
        for (i, o) in self.layer_dims() {
            let w = offset..offset + i * o;
            let b = w.end..w.end + o;
            offset = b.end;
            layout.push((w, b));
        }
        layout
    }
}

macro_rules! flat_vector {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn from_vec(values: Vec<f64>) -> Self {
                $name(values)
            }

            pub fn zeros(len: usize) -> Self {
                $name(vec![0.0; len])
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.0
            }

            pub fn all_finite(&self) -> bool {
                self.0.iter().all(|v| v.is_finite())
            }
        }

        impl Deref for $name {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(values: Vec<f64>) -> Self {
                $name(values)
            }
        }
    };
}

flat_vector!(
    /// Flat decision vector: network weights, or any point in R^n.
    ParameterVector
);
flat_vector!(
    /// Gradient with the same layout as the [`ParameterVector`] it differentiates.
    GradientVector
);

impl GradientVector {
    pub fn negated(&self) -> GradientVector {
        GradientVector(self.0.iter().map(|v| -v).collect())
    }
}

/// Deterministic per seed: weights uniform on [-sqrt(1/fan_in), +sqrt(1/fan_in)],
/// biases zero.
pub fn init_network(spec: &NetworkSpec, seed: u64) -> ParameterVector {
    let mut rng = rng_from_seed(seed);
    let mut values = Vec::with_capacity(spec.param_count());
    for (fan_in, fan_out) in spec.layer_dims() {
        let bound = (1.0 / fan_in as f64).sqrt();
        for _ in 0..fan_in * fan_out {
            values.push(rng.random_range(-bound..bound));
        }
        values.extend(std::iter::repeat(0.0).take(fan_out));
    }
    ParameterVector(values)
}

struct ForwardCache {
    /// `activations[0]` is the input batch; `activations[l+1]` the output of
    /// layer `l` (post-ReLU for hidden layers, raw logits for the last).
    activations: Vec<Vec<f64>>,
    /// Pre-activation values of the hidden layers, batch-major.
    hidden_preacts: Vec<Vec<f64>>,
}

fn check_shapes(spec: &NetworkSpec, params: &ParameterVector, features: &Matrix) -> Result<()> {
    spec.validate()?;
    if spec.output_dim != 1 {
        return Err(Error::dim("network output", 1, spec.output_dim));
    }
    if params.len() != spec.param_count() {
        return Err(Error::dim("parameter vector", spec.param_count(), params.len()));
    }
    if features.cols() != spec.input_dim {
        return Err(Error::dim("feature columns", spec.input_dim, features.cols()));
    }
    Ok(())
}

fn run_forward(spec: &NetworkSpec, params: &ParameterVector, features: &Matrix) -> ForwardCache {
    let batch = features.rows();
    let dims = spec.layer_dims();
    let layout = spec.param_layout();
    let n_layers = dims.len();

    let mut activations = Vec::with_capacity(n_layers + 1);
    activations.push(features.data().to_vec());
    let mut hidden_preacts = Vec::with_capacity(n_layers.saturating_sub(1));

    for (l, &(fan_in, fan_out)) in dims.iter().enumerate() {
        let w = &params[layout[l].0.clone()];
        let b = &params[layout[l].1.clone()];
        let input = activations.last().expect("forward stack nonempty");
        let mut z = vec![0.0; batch * fan_out];
        for r in 0..batch {
            let row = &input[r * fan_in..(r + 1) * fan_in];
            for o in 0..fan_out {
                let wrow = &w[o * fan_in..(o + 1) * fan_in];
                let mut acc = b[o];
                for i in 0..fan_in {
                    acc += wrow[i] * row[i];
                }
                z[r * fan_out + o] = acc;
            }
        }
        if l + 1 < n_layers {
            hidden_preacts.push(z.clone());
            for v in z.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        activations.push(z);
    }

    ForwardCache {
        activations,
        hidden_preacts,
    }
}

/// Logits for a feature batch. No final sigmoid; the loss applies it.
pub fn forward(spec: &NetworkSpec, params: &ParameterVector, features: &Matrix) -> Result<Vec<f64>> {
    check_shapes(spec, params, features)?;
    let cache = run_forward(spec, params, features);
    Ok(cache.activations.into_iter().last().expect("logit layer"))
}

/// Exact gradient of `sum_i upstream[i] * logit_i` with respect to the
/// parameters. `upstream` carries one `d loss / d logit` scalar per batch row.
///
/// ReLU subgradient at 0 is taken as 0.
pub fn backward(
    spec: &NetworkSpec,
    params: &ParameterVector,
    features: &Matrix,
    upstream: &[f64],
) -> Result<GradientVector> {
    check_shapes(spec, params, features)?;
    if upstream.len() != features.rows() {
        return Err(Error::dim("upstream length", features.rows(), upstream.len()));
    }

    let batch = features.rows();
    let dims = spec.layer_dims();
    let layout = spec.param_layout();
    let n_layers = dims.len();
    let cache = run_forward(spec, params, features);

    let mut grad = vec![0.0; params.len()];
    // delta starts as d loss / d logit, one column per output unit.
    let mut delta: Vec<f64> = upstream.to_vec();

    for l in (0..n_layers).rev() {
        let (fan_in, fan_out) = dims[l];
        let w = &params[layout[l].0.clone()];
        let a_prev = &cache.activations[l];

        let (gw, gb) = grad.split_at_mut(layout[l].1.start);
        let gw = &mut gw[layout[l].0.clone()];
        let gb = &mut gb[..fan_out];
        for r in 0..batch {
            let row = &a_prev[r * fan_in..(r + 1) * fan_in];
            for o in 0..fan_out {
                let d = delta[r * fan_out + o];
                if d == 0.0 {
                    continue;
                }
                let grow = &mut gw[o * fan_in..(o + 1) * fan_in];
                for i in 0..fan_in {
                    grow[i] += d * row[i];
                }
                gb[o] += d;
            }
        }

        if l > 0 {
            let z_prev = &cache.hidden_preacts[l - 1];
            let mut next = vec![0.0; batch * fan_in];
            for r in 0..batch {
                for i in 0..fan_in {
                    if z_prev[r * fan_in + i] <= 0.0 {
                        continue;
                    }
                    let mut acc = 0.0;
                    for o in 0..fan_out {
                        acc += w[o * fan_in + i] * delta[r * fan_out + o];
                    }
                    next[r * fan_in + i] = acc;
                }
            }
            delta = next;
        }
    }

    Ok(GradientVector(grad))
}

/// Central finite differences, coordinate-wise: `(f(x+h e_i) - f(x-h e_i)) / 2h`.
/// Test oracle; independent of [`backward`].
pub fn finite_difference_gradient<F>(loss_fn: F, params: &ParameterVector, h: f64) -> GradientVector
where
    F: Fn(&ParameterVector) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut probe = params.clone();
    let mut grad = vec![0.0; params.len()];
    for i in 0..params.len() {
        let saved = probe[i];
        probe[i] = saved + h;
        let plus = loss_fn(&probe);
        probe[i] = saved - h;
        let minus = loss_fn(&probe);
        probe[i] = saved;
        grad[i] = (plus - minus) / (2.0 * h);
    }
    GradientVector(grad)
}

/// Smallest |pre-activation| over all hidden units in the batch: the distance
/// to the nearest ReLU kink. Gradient checks exclude configurations where this
/// is tiny. Returns +inf for networks without hidden layers.
pub fn min_relu_input_magnitude(
    spec: &NetworkSpec,
    params: &ParameterVector,
    features: &Matrix,
) -> Result<f64> {
    check_shapes(spec, params, features)?;
    let cache = run_forward(spec, params, features);
    let mut min = f64::INFINITY;
    for layer in &cache.hidden_preacts {
        for &z in layer {
            min = min.min(z.abs());
        }
    }
    Ok(min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let spec = NetworkSpec::new(9, vec![64, 32]);
        let a = init_network(&spec, 0);
        let b = init_network(&spec, 0);
        assert_eq!(a, b);
        let c = init_network(&spec, 1);
        assert_ne!(a, c);
    }

    #[test]
    fn init_biases_are_exactly_zero() {
        let spec = NetworkSpec::new(1, vec![]);
        for seed in [0, 7, 123] {
            let params = init_network(&spec, seed);
            assert_eq!(params.len(), 2);
            assert_eq!(params[1], 0.0);
        }
        let spec = NetworkSpec::new(3, vec![4]);
        let params = init_network(&spec, 11);
        for (_, bias_range) in spec.param_layout() {
            assert!(params[bias_range].iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn param_count_for_paper_architecture() {
        let spec = NetworkSpec::new(9, vec![64, 32]);
        assert_eq!(spec.param_count(), 2753);
        assert_eq!(init_network(&spec, 0).len(), 2753);
    }

    #[test]
    fn init_weights_respect_fan_in_bound() {
        let spec = NetworkSpec::new(16, vec![8]);
        let params = init_network(&spec, 5);
        let layout = spec.param_layout();
        let bound0 = (1.0f64 / 16.0).sqrt();
        assert!(params[layout[0].0.clone()].iter().all(|w| w.abs() < bound0));
        let bound1 = (1.0f64 / 8.0).sqrt();
        assert!(params[layout[1].0.clone()].iter().all(|w| w.abs() < bound1));
    }

    #[test]
    fn zero_params_give_zero_logits() {
        let spec = NetworkSpec::new(3, vec![5, 2]);
        let params = ParameterVector::zeros(spec.param_count());
        let x = matrix(&[&[1.0, -2.0, 3.0], &[0.5, 0.5, 0.5]]);
        let logits = forward(&spec, &params, &x).unwrap();
        assert_eq!(logits, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_hidden_net_is_affine() {
        let spec = NetworkSpec::new(1, vec![]);
        let params = ParameterVector::from_vec(vec![1.5, -0.25]); // w, b
        let x = matrix(&[&[2.0], &[-1.0]]);
        let logits = forward(&spec, &params, &x).unwrap();
        assert_eq!(logits, vec![1.5 * 2.0 - 0.25, 1.5 * -1.0 - 0.25]);
    }

    #[test]
    fn two_layer_relu_matches_hand_evaluation() {
        // 2-2-1 net; second row drives both hidden units negative.
        let spec = NetworkSpec::new(2, vec![2]);
        let params = ParameterVector::from_vec(vec![
            0.5, -0.25, // W1 row 0
            0.8, 0.2, // W1 row 1
            0.1, -0.2, // b1
            0.7, -0.5, // W2
            0.25, // b2
        ]);
        let x = matrix(&[&[1.0, 2.0], &[-1.0, 0.5]]);
        let logits = forward(&spec, &params, &x).unwrap();
        // Row 0: h = relu([0.1, 1.0]) -> 0.7*0.1 - 0.5*1.0 + 0.25 = -0.18
        // Row 1: h = relu([-0.525, -0.9]) = [0, 0] -> 0.25
        assert!((logits[0] - (-0.18)).abs() < 1e-12);
        assert!((logits[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let spec = NetworkSpec::new(3, vec![2]);
        let params = ParameterVector::zeros(spec.param_count() + 1);
        let x = matrix(&[&[1.0, 2.0, 3.0]]);
        assert!(forward(&spec, &params, &x).is_err());
        let params = ParameterVector::zeros(spec.param_count());
        let bad = matrix(&[&[1.0, 2.0]]);
        assert!(forward(&spec, &params, &bad).is_err());
        assert!(backward(&spec, &params, &x, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let spec = NetworkSpec::new(2, vec![3]);
        let params = init_network(&spec, 4);
        let x = matrix(&[&[0.3, -0.7], &[1.1, 0.2]]);
        let grad = backward(&spec, &params, &x, &[0.0, 0.0]).unwrap();
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn affine_bias_gradient_sums_upstream() {
        let spec = NetworkSpec::new(2, vec![]);
        let params = ParameterVector::from_vec(vec![0.4, -0.6, 0.1]);
        let x = matrix(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let upstream = [0.5, -1.0, 2.0];
        let grad = backward(&spec, &params, &x, &upstream).unwrap();
        let bias_grad = grad[2];
        assert!((bias_grad - 1.5).abs() < 1e-14);
        // Weight gradients: sum upstream_r * x[r][i].
        assert!((grad[0] - (0.5 * 1.0 - 1.0 * 3.0 + 2.0 * 5.0)).abs() < 1e-12);
        assert!((grad[1] - (0.5 * 2.0 - 1.0 * 4.0 + 2.0 * 6.0)).abs() < 1e-12);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let spec = NetworkSpec::new(3, vec![4, 3]);
        let params = init_network(&spec, 99);
        let x = matrix(&[
            &[0.4, -1.2, 0.8],
            &[1.0, 0.3, -0.5],
            &[-0.9, 0.6, 0.1],
        ]);
        let upstream = [0.7, -0.4, 1.3];
        assert!(min_relu_input_magnitude(&spec, &params, &x).unwrap() > 1e-4);

        let analytic = backward(&spec, &params, &x, &upstream).unwrap();
        let loss = |p: &ParameterVector| {
            let logits = forward(&spec, p, &x).unwrap();
            logits.iter().zip(upstream.iter()).map(|(z, u)| z * u).sum()
        };
        let numeric = finite_difference_gradient(loss, &params, 1e-6);

        let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for (a, n) in analytic.iter().zip(numeric.iter()) {
            assert!(
                (a - n).abs() / scale < 1e-5,
                "analytic {a} vs numeric {n}"
            );
        }
    }

    #[test]
    fn finite_difference_on_quadratic_and_constant() {
        let params = ParameterVector::from_vec(vec![1.0, 2.0]);
        let grad = finite_difference_gradient(
            |p| 0.5 * p.iter().map(|v| v * v).sum::<f64>(),
            &params,
            1e-6,
        );
        assert!((grad[0] - 1.0).abs() < 1e-9);
        assert!((grad[1] - 2.0).abs() < 1e-9);

        let grad = finite_difference_gradient(|_| 3.25, &params, 1e-6);
        assert_eq!(&grad[..], &[0.0, 0.0]);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            // Scaling the last layer's weights by alpha > 0 scales logits by
            // alpha when biases are zero.
            #[test]
            fn forward_homogeneous_in_last_layer(
                seed in 0u64..1000,
                alpha in 0.1f64..10.0,
                input in proptest::collection::vec(-2.0f64..2.0, 3),
            ) {
                let spec = NetworkSpec::new(3, vec![4]);
                let mut params = init_network(&spec, seed);
                let layout = spec.param_layout();
                for (_, bias) in &layout {
                    for i in bias.clone() {
                        params[i] = 0.0;
                    }
                }
                let x = Matrix::from_rows(&[input]).unwrap();
                let base = forward(&spec, &params, &x).unwrap();

                let mut scaled = params.clone();
                let (last_w, _) = layout.last().unwrap();
                for i in last_w.clone() {
                    scaled[i] *= alpha;
                }
                let out = forward(&spec, &scaled, &x).unwrap();
                prop_assert!((out[0] - alpha * base[0]).abs() <= 1e-9 * (1.0 + base[0].abs() * alpha));
            }
        }
    }
}
