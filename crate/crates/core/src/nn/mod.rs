//! A small fully-connected network family with exact reverse-mode
//! gradients, Adam, and target-network synchronization.
//!
//! Parameters live in one flat vector. Layer `l` stores its weight matrix
//! (`fan_in × fan_out`, row-major) followed by its bias, so optimizers,
//! target updates, and gradient checks work on plain slices.

mod adam;
mod checkpoint;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{Checkpoint, CHECKPOINT_SCHEMA_VERSION};

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default hidden layer widths.
pub const DEFAULT_HIDDEN: [usize; 2] = [256, 256];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Identity,
    /// Squashes outputs into `(−1, 1)`.
    Tanh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layer_dims: Vec<usize>,
    output: OutputActivation,
    params: Vec<f64>,
    /// `(weight offset, bias offset)` per layer.
    offsets: Vec<(usize, usize)>,
}

/// Cached forward pass of a batch, consumed by [`Network::backward_trace`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Post-activation output of every layer, input first.
    activations: Vec<Array2<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("non-empty trace")
    }
}

fn layout(layer_dims: &[usize]) -> (Vec<(usize, usize)>, usize) {
    let mut offsets = Vec::with_capacity(layer_dims.len() - 1);
    let mut off = 0;
    for w in layer_dims.windows(2) {
        let w_off = off;
        off += w[0] * w[1];
        offsets.push((w_off, off));
        off += w[1];
    }
    (offsets, off)
}

impl Network {
    /// Zero-initialized network.
    pub fn zeros(layer_dims: Vec<usize>, output: OutputActivation) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::Shape(format!("invalid layer dimensions {layer_dims:?}")));
        }
        let (offsets, count) = layout(&layer_dims);
        Ok(Self {
            layer_dims,
            output,
            params: vec![0.0; count],
            offsets,
        })
    }

    /// Uniform(−1/√fan_in, 1/√fan_in) initialization of every weight and bias.
    pub fn new<R: Rng + ?Sized>(layer_dims: Vec<usize>, output: OutputActivation, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(layer_dims, output)?;
        for l in 0..net.n_layers() {
            let bound = 1.0 / (net.layer_dims[l] as f64).sqrt();
            net.fill_layer_uniform(l, bound, rng);
        }
        Ok(net)
    }

    /// Like [`Network::new`] but the output layer is drawn from
    /// uniform(−`scale`, `scale`).
    pub fn with_output_scale<R: Rng + ?Sized>(
        layer_dims: Vec<usize>,
        output: OutputActivation,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::new(layer_dims, output, rng)?;
        let last = net.n_layers() - 1;
        net.fill_layer_uniform(last, scale, rng);
        Ok(net)
    }

    /// Builds a network from explicit parameters in the flat layout.
    pub fn from_params(layer_dims: Vec<usize>, output: OutputActivation, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(layer_dims, output)?;
        if params.len() != net.params.len() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    fn fill_layer_uniform<R: Rng + ?Sized>(&mut self, layer: usize, bound: f64, rng: &mut R) {
        let (w_off, _) = self.offsets[layer];
        let end = w_off + self.layer_dims[layer] * self.layer_dims[layer + 1] + self.layer_dims[layer + 1];
        for p in &mut self.params[w_off..end] {
            *p = rng.random_range(-bound..=bound);
        }
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn n_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("at least two layers")
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Weight matrix of `layer` as a `fan_in × fan_out` view.
    pub fn weights(&self, layer: usize) -> ArrayView2<'_, f64> {
        let (w_off, b_off) = self.offsets[layer];
        ArrayView2::from_shape(
            (self.layer_dims[layer], self.layer_dims[layer + 1]),
            &self.params[w_off..b_off],
        )
        .expect("layout")
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let (_, b_off) = self.offsets[layer];
        &self.params[b_off..b_off + self.layer_dims[layer + 1]]
    }

    pub fn weights_mut(&mut self, layer: usize) -> ArrayViewMut2<'_, f64> {
        let (w_off, b_off) = self.offsets[layer];
        let shape = (self.layer_dims[layer], self.layer_dims[layer + 1]);
        ArrayViewMut2::from_shape(shape, &mut self.params[w_off..b_off]).expect("layout")
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        let (_, b_off) = self.offsets[layer];
        let n = self.layer_dims[layer + 1];
        &mut self.params[b_off..b_off + n]
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::Shape(format!(
                "network expects {} inputs, got {cols}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Forward pass of a batch (one sample per row), keeping the
    /// intermediate activations for a backward pass.
    pub fn forward_trace(&self, input: Array2<f64>) -> Result<ForwardTrace> {
        self.check_input(input.ncols())?;
        let mut activations = Vec::with_capacity(self.layer_dims.len());
        activations.push(input);
        for l in 0..self.n_layers() {
            let prev = activations.last().expect("input pushed");
            let mut z = Array2::zeros((prev.nrows(), self.layer_dims[l + 1]));
            let bias = ndarray::ArrayView1::from(self.bias(l));
            z.rows_mut().into_iter().for_each(|mut row| row.assign(&bias));
            general_mat_mul(1.0, prev, &self.weights(l), 1.0, &mut z);
            if l + 1 < self.n_layers() {
                z.mapv_inplace(|v| v.max(0.0));
            } else if self.output == OutputActivation::Tanh {
                z.mapv_inplace(f64::tanh);
            }
            activations.push(z);
        }
        Ok(ForwardTrace { activations })
    }

    pub fn forward_batch(&self, input: Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_trace(input)?.activations.pop().expect("output"))
    }

    /// Forward pass of a single input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = Array2::from_shape_vec((1, input.len()), input.to_vec()).expect("row vector");
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    /// Reverse-mode pass: contracts the Jacobian of the batch outputs with
    /// `upstream` (same shape as the output), summing over the batch.
    /// Returns the flat parameter gradient and the input gradient.
    pub fn backward_trace(&self, trace: &ForwardTrace, upstream: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
        let out = trace.output();
        if upstream.dim() != out.dim() {
            return Err(Error::Shape(format!(
                "upstream gradient {:?} does not match output {:?}",
                upstream.dim(),
                out.dim()
            )));
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = match self.output {
            OutputActivation::Identity => upstream.clone(),
            OutputActivation::Tanh => upstream * &out.mapv(|y| 1.0 - y * y),
        };
        for l in (0..self.n_layers()).rev() {
            let a_prev = &trace.activations[l];
            let (w_off, b_off) = self.offsets[l];
            let (fan_in, fan_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            {
                let (w_part, b_part) = grads[w_off..b_off + fan_out].split_at_mut(b_off - w_off);
                let mut gw = ArrayViewMut2::from_shape((fan_in, fan_out), w_part).expect("layout");
                general_mat_mul(1.0, &a_prev.t(), &delta, 0.0, &mut gw);
                let gb = delta.sum_axis(Axis(0));
                b_part.copy_from_slice(gb.as_slice().expect("contiguous"));
            }
            let mut d_prev = Array2::zeros((delta.nrows(), fan_in));
            general_mat_mul(1.0, &delta, &self.weights(l).t(), 0.0, &mut d_prev);
            if l > 0 {
                d_prev.zip_mut_with(a_prev, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            delta = d_prev;
        }
        Ok((grads, delta))
    }

    /// Gradient of `⟨upstream, f(input)⟩` with respect to the parameters and
    /// the input.
    pub fn backward(&self, input: Array2<f64>, upstream: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
        let trace = self.forward_trace(input)?;
        self.backward_trace(&trace, upstream)
    }

    /// Polyak update `target ← δ·online + (1 − δ)·target`.
    pub fn sync_from(&mut self, online: &Network, delta: f64) -> Result<()> {
        if self.layer_dims != online.layer_dims {
            return Err(Error::Shape(format!(
                "cannot sync {:?} from {:?}",
                self.layer_dims, online.layer_dims
            )));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::Domain(format!("sync weight {delta} outside [0, 1]")));
        }
        if delta == 1.0 {
            self.params.copy_from_slice(&online.params);
        } else if delta > 0.0 {
            for (t, o) in self.params.iter_mut().zip(&online.params) {
                *t = delta * o + (1.0 - delta) * *t;
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

/// Hard (`delta = 1`) or soft target synchronization.
pub fn sync_target(target: &mut Network, online: &Network, delta: f64) -> Result<()> {
    target.sync_from(online, delta)
}

/// Stacks equal-length feature rows into a batch matrix.
pub fn stack_rows(rows: &[Vec<f64>]) -> Array2<f64> {
    let cols = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
    Array2::from_shape_vec((rows.len(), cols), flat).expect("equal-length rows")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent forward oracle: explicit loops over the flat layout.
    fn oracle_forward(net: &Network, x: &[f64]) -> Vec<f64> {
        let p = net.params();
        let dims = net.layer_dims();
        let mut a = x.to_vec();
        let mut off = 0;
        for l in 0..dims.len() - 1 {
            let (fi, fo) = (dims[l], dims[l + 1]);
            let mut z = vec![0.0; fo];
            for j in 0..fo {
                let mut s = p[off + fi * fo + j];
                for i in 0..fi {
                    s += a[i] * p[off + i * fo + j];
                }
                z[j] = s;
            }
            off += fi * fo + fo;
            a = if l + 2 < dims.len() {
                z.into_iter().map(|v| v.max(0.0)).collect()
            } else if net.output_activation() == OutputActivation::Tanh {
                z.into_iter().map(f64::tanh).collect()
            } else {
                z
            };
        }
        a
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Network::zeros(vec![3, 5, 2], OutputActivation::Identity).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let mut params = vec![0.0; 3 * 3 + 3];
        for i in 0..3 {
            params[i * 3 + i] = 1.0;
        }
        let net = Network::from_params(vec![3, 3], OutputActivation::Identity, params).unwrap();
        assert_eq!(net.forward(&[0.5, -1.5, 2.0]).unwrap(), vec![0.5, -1.5, 2.0]);
    }

    #[test]
    fn forward_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for output in [OutputActivation::Identity, OutputActivation::Tanh] {
            let net = Network::new(vec![6, 9, 7, 4], output, &mut rng).unwrap();
            for _ in 0..20 {
                let x: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
                let got = net.forward(&x).unwrap();
                let want = oracle_forward(&net, &x);
                for (g, w) in got.iter().zip(&want) {
                    assert!((g - w).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn shape_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Network::new(vec![3, 4, 2], OutputActivation::Identity, &mut rng).unwrap();
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(Error::Shape(_))));
        let x = Array2::zeros((2, 3));
        assert!(matches!(net.backward(x, &Array2::zeros((2, 3))), Err(Error::Shape(_))));
        let mut other = Network::new(vec![3, 5, 2], OutputActivation::Identity, &mut rng).unwrap();
        assert!(matches!(other.sync_from(&net, 0.5), Err(Error::Shape(_))));
    }

    #[test]
    fn linear_layer_weight_gradient_is_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Network::new(vec![3, 2], OutputActivation::Identity, &mut rng).unwrap();
        let x = Array2::from_shape_vec((1, 3), vec![0.3, -0.7, 1.1]).unwrap();
        let up = Array2::from_shape_vec((1, 2), vec![0.0, 1.0]).unwrap();
        let (g, _) = net.backward(x, &up).unwrap();
        // weights are (in × out): column j=1 carries the input, column 0 is zero
        assert_eq!(g[0 * 2 + 1], 0.3);
        assert_eq!(g[1 * 2 + 1], -0.7);
        assert_eq!(g[2 * 2 + 1], 1.1);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[2], 0.0);
        assert_eq!(g[4], 0.0);
        assert_eq!(&g[6..], &[0.0, 1.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Network::new(vec![4, 8, 3], OutputActivation::Tanh, &mut rng).unwrap();
        let x = Array2::from_elem((5, 4), 0.4);
        let (g, dx) = net.backward(x, &Array2::zeros((5, 3))).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parameter_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for output in [OutputActivation::Identity, OutputActivation::Tanh] {
            let net = Network::new(vec![5, 16, 16, 3], output, &mut rng).unwrap();
            let x = Array2::from_shape_fn((4, 5), |_| rng.random_range(-1.0..1.0));
            let up = Array2::from_shape_fn((4, 3), |_| rng.random_range(-1.0..1.0));
            let scalar = |n: &Network| (n.forward_batch(x.clone()).unwrap() * &up).sum();
            let (g, _) = net.backward(x.clone(), &up).unwrap();
            let eps = 1e-5;
            for _ in 0..100 {
                let d: Vec<f64> = (0..net.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let shifted = |sign: f64| {
                    let p = net.params().iter().zip(&d).map(|(p, d)| p + sign * eps * d).collect();
                    Network::from_params(net.layer_dims().to_vec(), output, p).unwrap()
                };
                let fd = (scalar(&shifted(1.0)) - scalar(&shifted(-1.0))) / (2.0 * eps);
                let an: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                assert!(rel <= 1e-4, "rel {rel}");
            }
        }
    }

    #[test]
    fn input_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = Network::new(vec![4, 12, 1], OutputActivation::Identity, &mut rng).unwrap();
        let x = vec![0.2, -0.4, 0.9, 0.1];
        let (_, dx) = net
            .backward(stack_rows(&[x.clone()]), &Array2::ones((1, 1)))
            .unwrap();
        let eps = 1e-6;
        for i in 0..4 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += eps;
            xm[i] -= eps;
            let fd = (net.forward(&xp).unwrap()[0] - net.forward(&xm).unwrap()[0]) / (2.0 * eps);
            assert!((fd - dx[[0, i]]).abs() < 1e-7);
        }
    }

    #[test]
    fn sync_extremes_and_convex_combination() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let online = Network::new(vec![3, 4, 2], OutputActivation::Identity, &mut rng).unwrap();
        let original = Network::new(vec![3, 4, 2], OutputActivation::Identity, &mut rng).unwrap();

        let mut t = original.clone();
        sync_target(&mut t, &online, 0.0).unwrap();
        assert_eq!(t, original);

        sync_target(&mut t, &online, 1.0).unwrap();
        assert_eq!(t.params(), online.params());

        let mut t = original.clone();
        sync_target(&mut t, &online, 0.005).unwrap();
        for ((t, o), p) in t.params().iter().zip(online.params()).zip(original.params()) {
            assert!((t - (0.005 * o + 0.995 * p)).abs() <= 1e-12);
        }
    }

    #[test]
    fn soft_updates_telescope() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let online = Network::new(vec![2, 3, 1], OutputActivation::Identity, &mut rng).unwrap();
        let start = Network::new(vec![2, 3, 1], OutputActivation::Identity, &mut rng).unwrap();
        let mut t = start.clone();
        let delta = 0.005;
        for k in 1..=500 {
            sync_target(&mut t, &online, delta).unwrap();
            let factor = (1.0 - delta).powi(k);
            for ((t, o), s) in t.params().iter().zip(online.params()).zip(start.params()) {
                let expected = o + factor * (s - o);
                assert!((t - expected).abs() <= 1e-12);
            }
        }
    }
}
