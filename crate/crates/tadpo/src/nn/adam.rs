//! Adam with bias correction and per-coordinate freezing.

use serde::{Deserialize, Serialize};

use super::params::{FreezeMask, ParameterVector};
use crate::error::{Error, Result};

/// Adam state over one flat parameter vector. `step` *minimizes*;
/// callers maximizing an objective pass the negated gradient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub step_count: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptimizerState {
    pub fn new(len: usize, learning_rate: f64) -> Self {
        OptimizerState {
            step_count: 0,
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// One unmasked Adam step.
    pub fn step(&mut self, params: &mut ParameterVector, grad: &ParameterVector) -> Result<()> {
        self.step_masked(params, grad, None)
    }

    /// One Adam step that skips frozen coordinates entirely: their parameter
    /// values *and* moment estimates stay bit-identical, so a later unfreeze
    /// resumes as if the frozen steps never happened to them. If any gradient
    /// entry is non-finite, nothing moves and `Err(NonFinite)` is returned.
    pub fn step_masked(
        &mut self,
        params: &mut ParameterVector,
        grad: &ParameterVector,
        mask: Option<&FreezeMask>,
    ) -> Result<()> {
        let n = params.len();
        if grad.len() != n || self.first_moment.len() != n {
            return Err(Error::shape(format!(
                "optimizer over {} coords, params {}, grad {}",
                self.first_moment.len(),
                n,
                grad.len()
            )));
        }
        grad.ensure_finite("gradient passed to optimizer")?;

        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let g = grad.values();
        let p = params.values_mut();
        for i in 0..n {
            if let Some(m) = mask {
                if m.is_frozen(i) {
                    continue;
                }
            }
            let m = self.beta1 * self.first_moment[i] + (1.0 - self.beta1) * g[i];
            let v = self.beta2 * self.second_moment[i] + (1.0 - self.beta2) * g[i] * g[i];
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            let m_hat = m / bc1;
            let v_hat = v / bc2;
            p[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::SegmentMap;

    fn layout_ab() -> std::sync::Arc<SegmentMap> {
        let mut b = SegmentMap::builder();
        b.push("a", 3);
        b.push("b", 2);
        b.finish()
    }

    #[test]
    fn first_step_matches_hand_computation() {
        // After one step from zero moments: m_hat = g, v_hat = g^2,
        // delta = lr * g / (|g| + eps) ~= lr * sign(g).
        let layout = layout_ab();
        let mut p = ParameterVector::zeros(layout.clone());
        let mut g = ParameterVector::zeros(layout);
        g.values_mut().copy_from_slice(&[0.5, -2.0, 0.0, 1e-3, 4.0]);
        let mut opt = OptimizerState::new(5, 0.01);
        opt.step(&mut p, &g).unwrap();
        for (i, &gi) in g.values().iter().enumerate() {
            let want = if gi == 0.0 { 0.0 } else { -0.01 * gi / (gi.abs() + 1e-8) };
            assert!((p.values()[i] - want).abs() < 1e-12, "coord {i}");
        }
        assert_eq!(opt.step_count, 1);
    }

    #[test]
    fn converges_on_quadratic_bowl() {
        // min 0.5 * sum c_i x_i^2 from a far start.
        let layout = layout_ab();
        let c = [1.0, 10.0, 0.1, 3.0, 0.5];
        let mut p = ParameterVector::zeros(layout.clone());
        p.values_mut().copy_from_slice(&[5.0, -3.0, 8.0, 2.0, -6.0]);
        let mut opt = OptimizerState::new(5, 0.05);
        let mut g = ParameterVector::zeros(layout);
        for _ in 0..4000 {
            for i in 0..5 {
                g.values_mut()[i] = c[i] * p.values()[i];
            }
            opt.step(&mut p, &g).unwrap();
        }
        for (i, x) in p.values().iter().enumerate() {
            assert!(x.abs() < 1e-2, "coord {i} at {x}");
        }
    }

    #[test]
    fn masked_coordinates_are_bit_frozen() {
        let layout = layout_ab();
        let mask = FreezeMask::freeze_prefixes(&layout, &["b"]);
        let mut p = ParameterVector::zeros(layout.clone());
        p.values_mut().copy_from_slice(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let frozen_before = [p.values()[3].to_bits(), p.values()[4].to_bits()];
        let mut opt = OptimizerState::new(5, 0.01);
        let mut g = ParameterVector::zeros(layout);
        for k in 0..50 {
            g.values_mut().copy_from_slice(&[1.0, -0.5, 0.3, 2.0, -(k as f64)]);
            opt.step_masked(&mut p, &g, Some(&mask)).unwrap();
        }
        assert_eq!(p.values()[3].to_bits(), frozen_before[0]);
        assert_eq!(p.values()[4].to_bits(), frozen_before[1]);
        assert_eq!(opt.first_moment[3], 0.0);
        assert_eq!(opt.second_moment[4], 0.0);
        // Unfrozen coordinates did move.
        assert_ne!(p.values()[0], 1.0);
    }

    #[test]
    fn non_finite_gradient_leaves_everything_untouched() {
        let layout = layout_ab();
        let mut p = ParameterVector::zeros(layout.clone());
        p.values_mut().copy_from_slice(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let mut opt = OptimizerState::new(5, 0.01);
        let mut g = ParameterVector::zeros(layout.clone());
        g.values_mut().copy_from_slice(&[1.0, 1.0, 1.0, 1.0, 1.0]);
        opt.step(&mut p, &g).unwrap();
        let snapshot = p.clone();
        let opt_snapshot = opt.clone();
        g.values_mut()[2] = f64::NAN;
        assert!(matches!(opt.step(&mut p, &g), Err(Error::NonFinite(_))));
        assert_eq!(p, snapshot);
        assert_eq!(opt, opt_snapshot);
        g.values_mut()[2] = f64::INFINITY;
        assert!(matches!(opt.step(&mut p, &g), Err(Error::NonFinite(_))));
        assert_eq!(p, snapshot);
    }

    #[test]
    fn plain_gradient_descent_on_masked_adam_semantics() {
        // Frozen mask covering everything: any number of steps is a no-op.
        let layout = layout_ab();
        let mask = FreezeMask::freeze_prefixes(&layout, &["a", "b"]);
        let mut p = ParameterVector::zeros(layout.clone());
        p.values_mut().copy_from_slice(&[1.0, -1.0, 0.5, 0.25, 9.0]);
        let before = p.clone();
        let mut opt = OptimizerState::new(5, 0.3);
        let mut g = ParameterVector::zeros(layout);
        g.fill(7.0);
        for _ in 0..25 {
            opt.step_masked(&mut p, &g, Some(&mask)).unwrap();
        }
        assert_eq!(p, before);
    }
}
