use serde::{Deserialize, Serialize};

use super::{Matrix, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with L2 weight decay folded into the gradient (`g += wd * theta`)
/// before the moment update.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    config: AdamConfig,
    step: u64,
    first: Vec<Matrix<T>>,
    second: Vec<Matrix<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Matrix<T>>) -> Self {
        let (first, second) = params
            .into_iter()
            .map(|p| (Matrix::zeros(p.rows(), p.cols()), Matrix::zeros(p.rows(), p.cols())))
            .unzip();
        Adam {
            config,
            step: 0,
            first,
            second,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update over every parameter. `grads[k] == None` leaves parameter
    /// `k` (and its moments) untouched.
    pub fn step(&mut self, params: &mut [&mut Matrix<T>], grads: &[Option<&Matrix<T>>], weight_decay: &[f64]) {
        assert_eq!(params.len(), self.first.len(), "parameter count changed");
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), weight_decay.len());
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        let (b1, b2) = (T::c(beta1), T::c(beta2));
        let (lr, eps) = (T::c(lr), T::c(eps));
        let (bc1, bc2) = (T::c(bc1), T::c(bc2));
        for (k, param) in params.iter_mut().enumerate() {
            let Some(grad) = grads[k] else { continue };
            let wd = T::c(weight_decay[k]);
            let m = self.first[k].as_mut_slice();
            let v = self.second[k].as_mut_slice();
            for (((theta, &g), mk), vk) in param
                .as_mut_slice()
                .iter_mut()
                .zip(grad.as_slice())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                let g = g + wd * *theta;
                *mk = b1 * *mk + (T::one() - b1) * g;
                *vk = b2 * *vk + (T::one() - b2) * g * g;
                let m_hat = *mk / bc1;
                let v_hat = *vk / bc2;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;

    #[test]
    fn first_step_moves_by_lr() {
        let mut w: Matrix<f64> = Matrix::from_rows(&[[0.5, -1.0], [2.0, 0.0]]);
        let before = w.clone();
        let mut tape = Tape::new();
        let wv = tape.leaf(w.clone(), true);
        let loss = tape.sum(wv).unwrap();
        tape.backward(loss).unwrap();
        let mut adam = Adam::new(AdamConfig::with_lr(0.01), [&w]);
        adam.step(&mut [&mut w], &[tape.grad(wv)], &[0.0]);
        // m_hat = g = 1, v_hat = 1: update = lr / (1 + eps)
        for (a, b) in w.as_slice().iter().zip(before.as_slice()) {
            assert!((b - a - 0.01 / (1.0 + 1e-8)).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_grad_no_decay_is_noop() {
        let mut w: Matrix<f32> = Matrix::from_rows(&[[0.25, -3.0]]);
        let before = w.clone();
        let zero = Matrix::zeros(1, 2);
        let mut adam = Adam::new(AdamConfig::default(), [&w]);
        for _ in 0..5 {
            adam.step(&mut [&mut w], &[Some(&zero)], &[0.0]);
        }
        assert_eq!(w, before);
        assert_eq!(adam.steps_taken(), 5);
    }

    #[test]
    fn decay_pulls_towards_zero() {
        let mut w: Matrix<f64> = Matrix::from_rows(&[[2.0, -2.0]]);
        let zero = Matrix::zeros(1, 2);
        let mut adam = Adam::new(AdamConfig::with_lr(0.1), [&w]);
        adam.step(&mut [&mut w], &[Some(&zero)], &[0.5]);
        assert!((w.get(0, 0) - 1.9).abs() < 1e-7);
        assert!((w.get(0, 1) + 1.9).abs() < 1e-7);
    }
}
