use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nesterov accelerated gradient with global-norm gradient clipping.
///
/// Uses the reparameterized form in which the stored parameters are the
/// look-ahead point:
///
/// ```text
/// θ ← θ + μ²·v − (1 + μ)·lr·g
/// v ← μ·v − lr·g
/// ```
///
/// When the learning rate changes between steps the velocity is rescaled by
/// the ratio of the new to the old rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nesterov {
    pub momentum: f64,
    pub clip_norm: f64,
    velocity: Vec<f64>,
    last_lr: Option<f64>,
}

impl Nesterov {
    pub fn new(n_params: usize, momentum: f64, clip_norm: f64) -> Self {
        Self {
            momentum,
            clip_norm,
            velocity: vec![0.0; n_params],
            last_lr: None,
        }
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    /// Applies one update in place; returns the gradient norm before clipping.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<f64> {
        if params.len() != grads.len() || params.len() != self.velocity.len() {
            return Err(Error::LengthMismatch {
                what: "parameters vs gradients",
                left: params.len(),
                right: grads.len(),
            });
        }
        let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
        let scale = if self.clip_norm > 0.0 && norm > self.clip_norm {
            self.clip_norm / norm
        } else {
            1.0
        };
        let correction = match self.last_lr {
            Some(prev) if prev > 0.0 => lr / prev,
            _ => 1.0,
        };
        self.last_lr = Some(lr);
        let mu = self.momentum;
        for ((p, v), g) in params.iter_mut().zip(&mut self.velocity).zip(grads) {
            let g = g * scale;
            *v *= correction;
            *p += mu * mu * *v - (1.0 + mu) * lr * g;
            *v = mu * *v - lr * g;
        }
        Ok(norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut opt = Nesterov::new(3, 0.99, 0.1);
        let mut p = vec![1.0, -2.0, 0.5];
        opt.step(&mut p, &[0.0; 3], 0.25).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn zero_momentum_is_clipped_sgd() {
        let mut opt = Nesterov::new(2, 0.0, 0.1);
        let mut p = vec![1.0, 1.0];
        // |g| = 5 -> rescaled to 0.1: (0.06, 0.08)
        opt.step(&mut p, &[3.0, 4.0], 0.5).unwrap();
        assert_abs_diff_eq!(p[0], 1.0 - 0.5 * 0.06, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 1.0 - 0.5 * 0.08, epsilon = 1e-15);
    }

    #[test]
    fn small_gradients_are_not_rescaled_up() {
        let mut opt = Nesterov::new(1, 0.0, 0.1);
        let mut p = vec![0.0];
        opt.step(&mut p, &[0.01], 1.0).unwrap();
        assert_abs_diff_eq!(p[0], -0.01, epsilon = 1e-15);
    }

    #[test]
    fn two_step_hand_trace() {
        // f(θ) = θ², g = 2θ, lr 0.1, μ 0.9, no clipping.
        //   step 1: g = 2,     θ = 1 − 1.9·0.1·2 = 0.62,               v = −0.2
        //   step 2: g = 1.24,  θ = 0.62 + 0.81·(−0.2) − 0.19·1.24 = 0.2224, v = −0.304
        let mut opt = Nesterov::new(1, 0.9, 0.0);
        let mut p = vec![1.0];
        let g = 2.0 * p[0];
        opt.step(&mut p, &[g], 0.1).unwrap();
        assert_abs_diff_eq!(p[0], 0.62, epsilon = 1e-12);
        assert_abs_diff_eq!(opt.velocity()[0], -0.2, epsilon = 1e-12);
        let g = 2.0 * p[0];
        opt.step(&mut p, &[g], 0.1).unwrap();
        assert_abs_diff_eq!(p[0], 0.2224, epsilon = 1e-12);
        assert_abs_diff_eq!(opt.velocity()[0], -0.304, epsilon = 1e-12);
    }

    #[test]
    fn learning_rate_change_rescales_velocity() {
        let mut opt = Nesterov::new(1, 0.5, 0.0);
        let mut p = vec![0.0];
        opt.step(&mut p, &[1.0], 1.0).unwrap();
        assert_eq!(opt.velocity()[0], -1.0);
        opt.step(&mut p, &[0.0], 0.1).unwrap();
        assert_abs_diff_eq!(opt.velocity()[0], 0.5 * -0.1, epsilon = 1e-15);
    }

    #[test]
    fn rejects_non_finite_and_mismatched() {
        let mut opt = Nesterov::new(1, 0.9, 0.1);
        let mut p = vec![0.0];
        assert!(matches!(
            opt.step(&mut p, &[f64::NAN], 0.1),
            Err(Error::NonFinite(_))
        ));
        assert!(opt.step(&mut p, &[1.0, 2.0], 0.1).is_err());
    }
}
