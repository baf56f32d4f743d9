//! Diagonal Gaussian policy head.
//!
//! The mean is an MLP output squashed by `tanh` (keeping nominal actions in
//! `[-1, 1]` while the log-density stays exactly Gaussian); the log standard
//! deviation is a free, state-independent parameter vector. Log-probability,
//! entropy, and KL divergence are closed forms — no sampling involved in any
//! loss — and their gradients with respect to mean and log-std are supplied
//! to [`GaussianHead::backward`] by the loss implementations.

use super::mlp::{MlpBinding, MlpCache, MlpSpec};
use super::params::{ParameterVector, SegmentMapBuilder};
use crate::rng::randn;

pub const LN_2PI: f64 = 1.8378770664093453;

/// `log N(action; mean, diag(exp(log_std))^2)`, summed over dimensions.
pub fn diag_gaussian_logprob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    debug_assert_eq!(mean.len(), log_std.len());
    debug_assert_eq!(mean.len(), action.len());
    let mut lp = 0.0;
    for d in 0..mean.len() {
        let z = (action[d] - mean[d]) * (-log_std[d]).exp();
        lp += -0.5 * z * z - log_std[d] - 0.5 * LN_2PI;
    }
    lp
}

/// Differential entropy of the diagonal Gaussian; depends only on log_std.
pub fn diag_gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| 0.5 + 0.5 * LN_2PI + ls).sum()
}

/// `KL( N(mean_p, std_p) || N(mean_q, std_q) )` for diagonal Gaussians.
pub fn diag_gaussian_kl(mean_p: &[f64], log_std_p: &[f64], mean_q: &[f64], log_std_q: &[f64]) -> f64 {
    let mut kl = 0.0;
    for d in 0..mean_p.len() {
        let var_p = (2.0 * log_std_p[d]).exp();
        let var_q = (2.0 * log_std_q[d]).exp();
        let dm = mean_p[d] - mean_q[d];
        kl += log_std_q[d] - log_std_p[d] + (var_p + dm * dm) / (2.0 * var_q) - 0.5;
    }
    kl
}

/// Mean network + free log-std, bound to shared parameter segments.
#[derive(Clone, Debug)]
pub struct GaussianHead {
    mean_net: MlpBinding,
    log_std_offset: usize,
    pub action_dim: usize,
}

/// Cached forward pass of the head: squashed mean plus the mean-net cache
/// needed to push gradients back through it.
#[derive(Clone, Debug)]
pub struct HeadForward {
    pub cache: MlpCache,
    pub mean: Vec<f64>,
}

impl GaussianHead {
    /// Register `{prefix}.w*`/`{prefix}.b*` for the mean net and
    /// `{prefix}.log_std` for the spread.
    pub fn register(
        feature_dim: usize,
        hidden: &[usize],
        action_dim: usize,
        prefix: &str,
        builder: &mut SegmentMapBuilder,
    ) -> Self {
        let mean_net = MlpBinding::register(MlpSpec::new(feature_dim, hidden.to_vec(), action_dim), prefix, builder);
        let log_std_offset = builder.push(format!("{prefix}.log_std"), action_dim);
        GaussianHead { mean_net, log_std_offset, action_dim }
    }

    /// Hidden layers at gain sqrt(2), mean output at gain 0.01 (so initial
    /// means hug zero), log_std at 0 (unit std).
    pub fn init(&self, params: &mut ParameterVector, rng: &mut impl rand::Rng) {
        self.mean_net.init(params, 2.0_f64.sqrt(), 0.01, rng);
        params.values_mut()[self.log_std_offset..self.log_std_offset + self.action_dim]
            .iter_mut()
            .for_each(|x| *x = 0.0);
    }

    pub fn log_std<'a>(&self, params: &'a ParameterVector) -> &'a [f64] {
        &params.values()[self.log_std_offset..self.log_std_offset + self.action_dim]
    }

    pub fn forward(&self, params: &ParameterVector, features: &[f64]) -> HeadForward {
        let cache = self.mean_net.forward_cached(params, features);
        let mean = cache.output().iter().map(|r| r.tanh()).collect();
        HeadForward { cache, mean }
    }

    pub fn mean(&self, params: &ParameterVector, features: &[f64]) -> Vec<f64> {
        self.mean_net.forward(params, features).iter().map(|r| r.tanh()).collect()
    }

    /// Sample an action and return its log-probability under the head.
    pub fn sample(&self, params: &ParameterVector, features: &[f64], rng: &mut impl rand::Rng) -> (Vec<f64>, f64) {
        let fwd = self.forward(params, features);
        let log_std = self.log_std(params);
        let action: Vec<f64> = fwd
            .mean
            .iter()
            .zip(log_std)
            .map(|(m, ls)| m + ls.exp() * randn(rng))
            .collect();
        let lp = diag_gaussian_logprob(&fwd.mean, log_std, &action);
        (action, lp)
    }

    pub fn logprob_entropy(&self, params: &ParameterVector, features: &[f64], action: &[f64]) -> (f64, f64) {
        let fwd = self.forward(params, features);
        let log_std = self.log_std(params);
        (diag_gaussian_logprob(&fwd.mean, log_std, action), diag_gaussian_entropy(log_std))
    }

    /// Accumulate parameter gradients for a loss with the given partials:
    /// `d_mean` w.r.t. the squashed mean, `d_log_std` w.r.t. log_std.
    /// Chains through the tanh squash and the mean net; returns
    /// `d loss / d features` for trunk chaining.
    pub fn backward(
        &self,
        params: &ParameterVector,
        fwd: &HeadForward,
        d_mean: &[f64],
        d_log_std: &[f64],
        grad: &mut ParameterVector,
    ) -> Vec<f64> {
        debug_assert_eq!(d_mean.len(), self.action_dim);
        debug_assert_eq!(d_log_std.len(), self.action_dim);
        // mean = tanh(raw): d raw = d mean * (1 - mean^2).
        let d_raw: Vec<f64> = d_mean.iter().zip(&fwd.mean).map(|(dm, m)| dm * (1.0 - m * m)).collect();
        let d_features = self.mean_net.backward(params, &fwd.cache, &d_raw, grad);
        let g = grad.values_mut();
        for d in 0..self.action_dim {
            g[self.log_std_offset + d] += d_log_std[d];
        }
        d_features
    }
}

/// Per-dimension partials of `log p(action)` w.r.t. mean and log_std:
/// `d/d m_d = (a_d - m_d) / sigma_d^2`, `d/d ls_d = z_d^2 - 1` with
/// `z = (a - m)/sigma`.
pub fn logprob_partials(mean: &[f64], log_std: &[f64], action: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = mean.len();
    let mut d_mean = vec![0.0; n];
    let mut d_ls = vec![0.0; n];
    for d in 0..n {
        let inv_sigma = (-log_std[d]).exp();
        let z = (action[d] - mean[d]) * inv_sigma;
        d_mean[d] = z * inv_sigma;
        d_ls[d] = z * z - 1.0;
    }
    (d_mean, d_ls)
}

/// Per-dimension partials of `KL(p || q)` w.r.t. p's mean and log_std
/// (q held fixed): `d/d m_d = (m_d - mq_d)/sigma_q^2`,
/// `d/d ls_d = sigma_p^2/sigma_q^2 - 1`.
pub fn kl_partials(mean_p: &[f64], log_std_p: &[f64], mean_q: &[f64], log_std_q: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = mean_p.len();
    let mut d_mean = vec![0.0; n];
    let mut d_ls = vec![0.0; n];
    for d in 0..n {
        let var_q = (2.0 * log_std_q[d]).exp();
        d_mean[d] = (mean_p[d] - mean_q[d]) / var_q;
        d_ls[d] = (2.0 * log_std_p[d]).exp() / var_q - 1.0;
    }
    (d_mean, d_ls)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{finite_diff_grad, max_abs_rel_err};
    use crate::nn::params::SegmentMap;
    use crate::rng::stream;
    use rand::Rng;

    fn build(feature_dim: usize, action_dim: usize, seed: u64) -> (GaussianHead, ParameterVector) {
        let mut b = SegmentMap::builder();
        let head = GaussianHead::register(feature_dim, &[8], action_dim, "actor", &mut b);
        let mut params = ParameterVector::zeros(b.finish());
        head.init(&mut params, &mut stream(seed, "init", 0));
        (head, params)
    }

    #[test]
    fn logprob_entropy_frozen_values() {
        // Standard normal at its mean, one and two dims.
        assert!((diag_gaussian_logprob(&[0.0], &[0.0], &[0.0]) - (-0.9189385332046727)).abs() < 1e-15);
        assert!((diag_gaussian_logprob(&[0.0, 0.0], &[0.0, 0.0], &[0.0, 0.0]) - (-1.8378770664093453)).abs() < 1e-15);
        // Unit-variance entropy per dim: 0.5 + 0.5 ln(2 pi).
        assert!((diag_gaussian_entropy(&[0.0]) - 1.4189385332046727).abs() < 1e-15);
        // Shift by one sigma: logp drops by exactly 0.5.
        let at_mean = diag_gaussian_logprob(&[0.0], &[0.0], &[0.0]);
        let off = diag_gaussian_logprob(&[0.0], &[0.0], &[1.0]);
        assert!((at_mean - off - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kl_frozen_values() {
        // KL(N(0,1) || N(1,1)) = 0.5; KL(p||p) = 0.
        assert!((diag_gaussian_kl(&[0.0], &[0.0], &[1.0], &[0.0]) - 0.5).abs() < 1e-15);
        assert!(diag_gaussian_kl(&[0.3, -0.2], &[0.1, -0.4], &[0.3, -0.2], &[0.1, -0.4]).abs() < 1e-15);
        // Asymmetry: KL(p||q) != KL(q||p) for unequal variances.
        let pq = diag_gaussian_kl(&[0.0], &[0.0], &[0.0], &[1.0]);
        let qp = diag_gaussian_kl(&[0.0], &[1.0], &[0.0], &[0.0]);
        assert!(pq > 0.0 && qp > 0.0 && (pq - qp).abs() > 1e-3);
    }

    #[test]
    fn density_integrates_to_one_and_entropy_matches_quadrature() {
        // Composite Simpson over [m - 12s, m + 12s]; independent oracle for
        // the closed forms.
        let (mean, log_std): (f64, f64) = (0.37, -0.25);
        let sigma = log_std.exp();
        let n = 4000; // even
        let (a, b) = (mean - 12.0 * sigma, mean + 12.0 * sigma);
        let h = (b - a) / n as f64;
        let p = |x: f64| diag_gaussian_logprob(&[mean], &[log_std], &[x]).exp();
        let mut integral = 0.0;
        let mut neg_entropy = 0.0;
        for i in 0..=n {
            let x = a + i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let px = p(x);
            integral += w * px;
            neg_entropy += w * px * if px > 0.0 { px.ln() } else { 0.0 };
        }
        integral *= h / 3.0;
        neg_entropy *= h / 3.0;
        assert!((integral - 1.0).abs() < 1e-10, "integral {integral}");
        assert!((-neg_entropy - diag_gaussian_entropy(&[log_std])).abs() < 1e-8);
    }

    #[test]
    fn kl_matches_quadrature() {
        // KL(p||q) = E_p[log p - log q] by Simpson quadrature.
        let (mp, lsp): (f64, f64) = (0.2, -0.3);
        let (mq, lsq): (f64, f64) = (-0.4, 0.1);
        let sp = lsp.exp();
        let n = 4000;
        let (a, b) = (mp - 14.0 * sp, mp + 14.0 * sp);
        let h = (b - a) / n as f64;
        let mut kl = 0.0;
        for i in 0..=n {
            let x = a + i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let lp = diag_gaussian_logprob(&[mp], &[lsp], &[x]);
            let lq = diag_gaussian_logprob(&[mq], &[lsq], &[x]);
            kl += w * lp.exp() * (lp - lq);
        }
        kl *= h / 3.0;
        assert!((kl - diag_gaussian_kl(&[mp], &[lsp], &[mq], &[lsq])).abs() < 1e-8);
    }

    #[test]
    fn sample_matches_distribution_moments() {
        let (head, mut params) = build(3, 2, 21);
        params.segment_mut("actor.log_std").unwrap().copy_from_slice(&[-0.5, 0.2]);
        let features = [0.3, -0.7, 0.5];
        let fwd = head.forward(&params, &features);
        let mut rng = stream(21, "sample", 0);
        let n = 100_000;
        let mut s1 = [0.0; 2];
        let mut s2 = [0.0; 2];
        for _ in 0..n {
            let (a, lp) = head.sample(&params, &features, &mut rng);
            // Reported log-prob must equal the closed form at the sample.
            let want = diag_gaussian_logprob(&fwd.mean, head.log_std(&params), &a);
            assert!((lp - want).abs() < 1e-12);
            for d in 0..2 {
                s1[d] += a[d];
                s2[d] += a[d] * a[d];
            }
        }
        for d in 0..2 {
            let mean = s1[d] / n as f64;
            let std = (s2[d] / n as f64 - mean * mean).sqrt();
            let sigma = head.log_std(&params)[d].exp();
            assert!((mean - fwd.mean[d]).abs() < 0.02, "dim {d} mean {mean} want {}", fwd.mean[d]);
            assert!((std - sigma).abs() < 0.02, "dim {d} std {std} want {sigma}");
        }
    }

    #[test]
    fn log_std_is_state_independent_and_mean_is_squashed() {
        let (head, params) = build(3, 2, 4);
        let f1 = [0.9, -0.9, 0.1];
        let f2 = [-0.2, 0.8, -0.6];
        assert_eq!(head.log_std(&params), head.log_std(&params));
        let m1 = head.mean(&params, &f1);
        let m2 = head.mean(&params, &f2);
        assert_ne!(m1, m2);
        for m in m1.iter().chain(&m2) {
            assert!(m.abs() < 1.0);
        }
    }

    #[test]
    fn logprob_gradient_matches_finite_differences() {
        let (head, mut params) = build(4, 2, 8);
        params.segment_mut("actor.log_std").unwrap().copy_from_slice(&[-0.2, 0.3]);
        let mut rng = stream(8, "probe", 0);
        for _ in 0..4 {
            let features: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let action: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let fwd = head.forward(&params, &features);
            let (d_mean, d_ls) = logprob_partials(&fwd.mean, head.log_std(&params), &action);
            let mut grad = ParameterVector::zeros(params.layout().clone());
            head.backward(&params, &fwd, &d_mean, &d_ls, &mut grad);
            let fd = finite_diff_grad(&params, 1e-6, |p| {
                head.logprob_entropy(p, &features, &action).0
            });
            let err = max_abs_rel_err(grad.values(), &fd, 1e-3);
            assert!(err < 1e-6, "max rel err {err}");
        }
    }

    #[test]
    fn kl_gradient_matches_finite_differences() {
        let (head, mut params) = build(4, 2, 13);
        params.segment_mut("actor.log_std").unwrap().copy_from_slice(&[0.1, -0.3]);
        let mean_q = [0.4, -0.2];
        let log_std_q = [-0.1, 0.2];
        let mut rng = stream(13, "probe", 0);
        let features: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fwd = head.forward(&params, &features);
        let (d_mean, d_ls) = kl_partials(&fwd.mean, head.log_std(&params), &mean_q, &log_std_q);
        let mut grad = ParameterVector::zeros(params.layout().clone());
        head.backward(&params, &fwd, &d_mean, &d_ls, &mut grad);
        let fd = finite_diff_grad(&params, 1e-6, |p| {
            let m = head.mean(p, &features);
            diag_gaussian_kl(&m, head.log_std(p), &mean_q, &log_std_q)
        });
        let err = max_abs_rel_err(grad.values(), &fd, 1e-3);
        assert!(err < 1e-6, "max rel err {err}");
    }
}
