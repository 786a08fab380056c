use serde::{Deserialize, Serialize};

use super::{ModelError, ModelParams, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_eps() -> f64 {
    1e-8
}

impl AdamConfig {
    pub fn new(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig::new(1e-3)
    }
}

/// Bias-corrected Adam over a flat parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, num_params: usize) -> Self {
        Adam {
            config,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update. Rejects non-finite gradients without touching the weights.
    pub fn step<T: Scalar>(&mut self, params: &mut ModelParams<T>, grads: &ModelParams<T>) -> Result<(), ModelError> {
        if grads.len() != params.len() || self.m.len() != params.len() {
            return Err(ModelError::LengthMismatch {
                what: "gradient buffer",
                expected: self.m.len(),
                got: grads.len(),
            });
        }
        if let Some(k) = grads.as_slice().iter().position(|g| !g.is_finite()) {
            let name = params
                .layout()
                .specs
                .iter()
                .find(|s| s.range().contains(&k))
                .map_or_else(|| k.to_string(), |s| s.name.clone());
            return Err(ModelError::NonFiniteGradient(name));
        }
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (k, (w, g)) in params.as_mut_slice().iter_mut().zip(grads.as_slice()).enumerate() {
            let g = g.as_f64();
            self.m[k] = beta1 * self.m[k] + (1.0 - beta1) * g;
            self.v[k] = beta2 * self.v[k] + (1.0 - beta2) * g * g;
            let mhat = self.m[k] / c1;
            let vhat = self.v[k] / c2;
            *w = T::c(w.as_f64() - lr * mhat / (vhat.sqrt() + eps));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::ModelConfig;
    use super::*;

    fn params() -> ModelParams<f64> {
        let cfg = ModelConfig {
            d_model: 2,
            n_heads: 1,
            n_layers: 0,
            d_ff: 2,
            max_len: 2,
            ..ModelConfig::new(2, 1)
        };
        ModelParams::zeros(cfg).unwrap()
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = params();
        p.as_mut_slice().fill(1.0);
        let mut g = p.zeros_like();
        g.as_mut_slice().fill(1.0);
        let mut opt = Adam::new(AdamConfig::new(0.1), p.len());
        opt.step(&mut p, &g).unwrap();
        for &w in p.as_slice() {
            assert!((w - 0.9).abs() < 1e-6, "{w}");
        }
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn rejects_non_finite() {
        let mut p = params();
        let mut g = p.zeros_like();
        g.as_mut_slice()[0] = f64::NAN;
        let before = p.clone();
        let mut opt = Adam::new(AdamConfig::default(), p.len());
        let err = opt.step(&mut p, &g).unwrap_err();
        assert_eq!(err, ModelError::NonFiniteGradient("tok_emb".into()));
        assert_eq!(p, before);
        assert_eq!(opt.steps(), 0);
    }
}
