//! Dense multilayer perceptron bound to segments of a [`ParameterVector`],
//! with cached forward passes and hand-written reverse-mode gradients.

use serde::{Deserialize, Serialize};

use super::params::{ParameterVector, SegmentMapBuilder};
use crate::rng::randn;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Identity => z,
        }
    }

    /// d activation / d pre-activation, given the *post*-activation value.
    /// (tanh' = 1 - tanh^2; relu' from the sign of the output.)
    #[inline]
    fn grad_from_post(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Architecture of an MLP: input width, hidden widths, output width.
/// Hidden layers use `activation`; the output layer is always linear —
/// heads apply their own squashing where they need it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize) -> Self {
        MlpSpec { input_dim, hidden, output_dim, activation: Activation::Tanh }
    }

    /// (fan_in, fan_out) for each layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.output_dim));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|&(i, o)| i * o + o).sum()
    }
}

#[derive(Clone, Copy, Debug)]
struct LayerBinding {
    w_offset: usize,
    b_offset: usize,
    fan_in: usize,
    fan_out: usize,
}

/// An MLP whose weights live in named segments (`{prefix}.w{k}`,
/// `{prefix}.b{k}`) of a shared parameter vector. Weight layout is row-major
/// by input: `w[i * fan_out + j]` connects input `i` to output `j`.
#[derive(Clone, Debug)]
pub struct MlpBinding {
    pub spec: MlpSpec,
    layers: Vec<LayerBinding>,
}

/// Intermediate activations of one forward pass, kept for backprop.
/// `post[0]` is the input; `post[k+1]` the output of layer `k`.
#[derive(Clone, Debug)]
pub struct MlpCache {
    post: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("cache has at least the input layer")
    }
}

impl MlpBinding {
    /// Reserve this network's segments under `prefix` in `builder`.
    pub fn register(spec: MlpSpec, prefix: &str, builder: &mut SegmentMapBuilder) -> Self {
        let mut layers = Vec::new();
        for (k, (fan_in, fan_out)) in spec.layer_dims().into_iter().enumerate() {
            let w_offset = builder.push(format!("{prefix}.w{k}"), fan_in * fan_out);
            let b_offset = builder.push(format!("{prefix}.b{k}"), fan_out);
            layers.push(LayerBinding { w_offset, b_offset, fan_in, fan_out });
        }
        MlpBinding { spec, layers }
    }

    /// Orthogonal-ish initialization: each weight matrix is a Gram–Schmidt
    /// orthonormalization of a Gaussian draw, scaled by `gain` (`out_gain`
    /// for the final layer). Biases start at zero.
    pub fn init(&self, params: &mut ParameterVector, hidden_gain: f64, out_gain: f64, rng: &mut impl rand::Rng) {
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let gain = if k == last { out_gain } else { hidden_gain };
            let w = orthogonal(layer.fan_in, layer.fan_out, gain, rng);
            params.values_mut()[layer.w_offset..layer.w_offset + w.len()].copy_from_slice(&w);
            params.values_mut()[layer.b_offset..layer.b_offset + layer.fan_out]
                .iter_mut()
                .for_each(|b| *b = 0.0);
        }
    }

    pub fn forward(&self, params: &ParameterVector, input: &[f64]) -> Vec<f64> {
        self.forward_cached(params, input).post.pop().unwrap()
    }

    pub fn forward_cached(&self, params: &ParameterVector, input: &[f64]) -> MlpCache {
        debug_assert_eq!(input.len(), self.spec.input_dim);
        let v = params.values();
        let last = self.layers.len() - 1;
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        post.push(input.to_vec());
        for (k, layer) in self.layers.iter().enumerate() {
            let x = post.last().unwrap();
            let mut z = v[layer.b_offset..layer.b_offset + layer.fan_out].to_vec();
            for (i, &xi) in x.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let row = layer.w_offset + i * layer.fan_out;
                for j in 0..layer.fan_out {
                    z[j] += xi * v[row + j];
                }
            }
            if k != last {
                z.iter_mut().for_each(|zj| *zj = self.spec.activation.apply(*zj));
            }
            post.push(z);
        }
        MlpCache { post }
    }

    /// Accumulate `d loss / d params` into `grad` for the forward pass in
    /// `cache`, given `d_output = d loss / d output`. Returns
    /// `d loss / d input` so callers can chain through a shared trunk.
    pub fn backward(
        &self,
        params: &ParameterVector,
        cache: &MlpCache,
        d_output: &[f64],
        grad: &mut ParameterVector,
    ) -> Vec<f64> {
        debug_assert_eq!(d_output.len(), self.spec.output_dim);
        let v = params.values();
        let g = grad.values_mut();
        let mut delta = d_output.to_vec();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            // Output layer is linear; hidden layers fold in the activation
            // derivative computed from the cached post-activation.
            if k != self.layers.len() - 1 {
                let a = &cache.post[k + 1];
                for (d, &aj) in delta.iter_mut().zip(a.iter()) {
                    *d *= self.spec.activation.grad_from_post(aj);
                }
            }
            let x = &cache.post[k];
            for j in 0..layer.fan_out {
                g[layer.b_offset + j] += delta[j];
            }
            for (i, &xi) in x.iter().enumerate() {
                let row = layer.w_offset + i * layer.fan_out;
                if xi != 0.0 {
                    for j in 0..layer.fan_out {
                        g[row + j] += xi * delta[j];
                    }
                }
            }
            if k == 0 {
                break;
            }
            let mut prev = vec![0.0; layer.fan_in];
            for (i, p) in prev.iter_mut().enumerate() {
                let row = layer.w_offset + i * layer.fan_out;
                let mut acc = 0.0;
                for j in 0..layer.fan_out {
                    acc += v[row + j] * delta[j];
                }
                *p = acc;
            }
            delta = prev;
        }
        // d input for layer 0.
        let layer = &self.layers[0];
        let mut d_input = vec![0.0; layer.fan_in];
        for (i, p) in d_input.iter_mut().enumerate() {
            let row = layer.w_offset + i * layer.fan_out;
            let mut acc = 0.0;
            for j in 0..layer.fan_out {
                acc += v[row + j] * delta[j];
            }
            *p = acc;
        }
        d_input
    }
}

/// Gain-scaled semi-orthogonal matrix, row-major `(fan_in, fan_out)`.
/// Gram–Schmidt over the smaller dimension so the orthonormality constraint
/// is satisfiable; the larger dimension keeps independent Gaussian energy.
fn orthogonal(fan_in: usize, fan_out: usize, gain: f64, rng: &mut impl rand::Rng) -> Vec<f64> {
    let (rows, cols) = (fan_in, fan_out);
    // Orthonormalize vectors of length `long` — one per index of `short`.
    let (short, long, col_vectors) = if cols <= rows { (cols, rows, true) } else { (rows, cols, false) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(short);
    while basis.len() < short {
        let mut v: Vec<f64> = (0..long).map(|_| randn(rng)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dot * bi;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue; // numerically degenerate draw; resample
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    let mut w = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            let val = if col_vectors { basis[j][i] } else { basis[i][j] };
            w[i * cols + j] = gain * val;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{finite_diff_grad, max_abs_rel_err};
    use crate::nn::params::SegmentMap;
    use crate::rng::stream;
    use rand::Rng;

    fn build(spec: MlpSpec, seed: u64) -> (MlpBinding, ParameterVector) {
        let mut b = SegmentMap::builder();
        let net = MlpBinding::register(spec, "net", &mut b);
        let mut params = ParameterVector::zeros(b.finish());
        net.init(&mut params, 2.0_f64.sqrt(), 1.0, &mut stream(seed, "init", 0));
        (net, params)
    }

    #[test]
    fn forward_matches_by_hand_single_layer() {
        // 2 -> 2 linear layer: y = W^T x + b with w[i*fan_out+j].
        let mut b = SegmentMap::builder();
        let net = MlpBinding::register(MlpSpec::new(2, vec![], 2), "net", &mut b);
        let mut params = ParameterVector::zeros(b.finish());
        params.segment_mut("net.w0").unwrap().copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        params.segment_mut("net.b0").unwrap().copy_from_slice(&[0.5, -0.5]);
        let y = net.forward(&params, &[1.0, -1.0]);
        // y0 = 1*1 + (-1)*3 + 0.5 = -1.5 ; y1 = 1*2 + (-1)*4 - 0.5 = -2.5
        assert_eq!(y, vec![-1.5, -2.5]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        for (seed, act) in [(1u64, Activation::Tanh), (2, Activation::Relu), (3, Activation::Identity)] {
            let mut spec = MlpSpec::new(5, vec![8, 7], 3);
            spec.activation = act;
            let (net, params) = build(spec, seed);
            let mut rng = stream(seed, "probe", 1);
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            // Scalar loss: w . f(x). Analytic gradient:
            let cache = net.forward_cached(&params, &x);
            let mut grad = ParameterVector::zeros(params.layout().clone());
            net.backward(&params, &cache, &w, &mut grad);
            // Finite-difference oracle over all parameters.
            let fd = finite_diff_grad(&params, 1e-6, |p| {
                net.forward(p, &x).iter().zip(&w).map(|(y, wi)| y * wi).sum()
            });
            let err = max_abs_rel_err(grad.values(), &fd, 1e-3);
            assert!(err < 1e-6, "activation {act:?}: max rel err {err}");
        }
    }

    #[test]
    fn backward_input_gradient_matches_finite_differences() {
        let (net, params) = build(MlpSpec::new(4, vec![6], 2), 9);
        let mut rng = stream(9, "probe", 1);
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w = [0.3, -1.1];
        let cache = net.forward_cached(&params, &x);
        let mut grad = ParameterVector::zeros(params.layout().clone());
        let d_input = net.backward(&params, &cache, &w, &mut grad);
        let h = 1e-6;
        for i in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let f = |xx: &[f64]| -> f64 {
                net.forward(&params, xx).iter().zip(&w).map(|(y, wi)| y * wi).sum()
            };
            let fd = (f(&xp) - f(&xm)) / (2.0 * h);
            assert!((d_input[i] - fd).abs() < 1e-6 * fd.abs().max(1.0), "input {i}: {} vs {}", d_input[i], fd);
        }
    }

    #[test]
    fn orthogonal_init_has_orthonormal_columns() {
        let mut rng = stream(5, "init", 0);
        let (fan_in, fan_out) = (16, 8);
        let gain = 2.0_f64.sqrt();
        let w = orthogonal(fan_in, fan_out, gain, &mut rng);
        for a in 0..fan_out {
            for c in a..fan_out {
                let dot: f64 = (0..fan_in).map(|i| w[i * fan_out + a] * w[i * fan_out + c]).sum();
                let want = if a == c { gain * gain } else { 0.0 };
                assert!((dot - want).abs() < 1e-10, "col {a}.col {c} = {dot}, want {want}");
            }
        }
    }

    #[test]
    fn gradient_accumulates_across_calls() {
        let (net, params) = build(MlpSpec::new(3, vec![4], 1), 7);
        let x1 = [0.1, -0.2, 0.3];
        let x2 = [-0.5, 0.4, 0.2];
        let c1 = net.forward_cached(&params, &x1);
        let c2 = net.forward_cached(&params, &x2);
        let mut g_both = ParameterVector::zeros(params.layout().clone());
        net.backward(&params, &c1, &[1.0], &mut g_both);
        net.backward(&params, &c2, &[1.0], &mut g_both);
        let mut g1 = ParameterVector::zeros(params.layout().clone());
        net.backward(&params, &c1, &[1.0], &mut g1);
        let mut g2 = ParameterVector::zeros(params.layout().clone());
        net.backward(&params, &c2, &[1.0], &mut g2);
        g1.add_scaled(&g2, 1.0);
        for (a, b) in g_both.values().iter().zip(g1.values()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
