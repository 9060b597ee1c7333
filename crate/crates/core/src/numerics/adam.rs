use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// Adam with bias correction over a flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(config: AdamConfig, num_params: usize) -> Self {
        Self {
            config,
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam state has {} entries, params {}, grads {}",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut adam = Adam::new(AdamConfig::default(), 2);
        let mut p = vec![1.0, -2.0];
        adam.step(&mut p, &[0.5, -0.5]).unwrap();
        let (m1, v1) = (adam.first_moment().to_vec(), adam.second_moment().to_vec());
        let before = p.clone();
        adam.step(&mut p, &[0.0, 0.0]).unwrap();
        for i in 0..2 {
            assert!((adam.first_moment()[i] - 0.9 * m1[i]).abs() < 1e-15);
            assert!((adam.second_moment()[i] - 0.999 * v1[i]).abs() < 1e-15);
        }
        // bias-corrected momentum still moves a previously-pushed parameter
        assert_ne!(p, before);

        let mut fresh = Adam::new(AdamConfig::default(), 2);
        let mut q = vec![1.0, -2.0];
        fresh.step(&mut q, &[0.0, 0.0]).unwrap();
        assert_eq!(q, vec![1.0, -2.0]);
        assert_eq!(fresh.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut adam = Adam::new(AdamConfig::with_lr(0.01), 3);
        let mut p = vec![0.0; 3];
        adam.step(&mut p, &[3.0, -1e-3, 250.0]).unwrap();
        assert!((p[0] + 0.01).abs() < 1e-8);
        assert!((p[1] - 0.01).abs() < 1e-7);
        assert!((p[2] + 0.01).abs() < 1e-8);
    }

    #[test]
    fn quadratic_descent() {
        // scalar simulation of f(w) = w², gradient 2w
        let mut adam = Adam::new(AdamConfig::with_lr(0.1), 1);
        let mut w = vec![1.0];
        for _ in 0..100 {
            let g = [2.0 * w[0]];
            adam.step(&mut w, &g).unwrap();
        }
        assert!(w[0].abs() < 0.5, "w = {}", w[0]);
    }

    #[test]
    fn shape_mismatch() {
        let mut adam = Adam::new(AdamConfig::default(), 2);
        assert!(adam.step(&mut [0.0; 3], &[0.0; 3]).is_err());
        assert!(adam.step(&mut [0.0; 2], &[0.0; 1]).is_err());
    }
}
