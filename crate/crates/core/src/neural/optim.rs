use serde::{Deserialize, Serialize};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const RMSPROP_ALPHA: f64 = 0.99;
pub const RMSPROP_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptimizerKind {
    Adam,
    #[serde(alias = "RmsProp", alias = "rmsprop")]
    RMSProp,
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(Self::Adam),
            "rmsprop" => Ok(Self::RMSProp),
            other => Err(format!("unknown optimizer {other:?}")),
        }
    }
}

/// Moment accumulators, one buffer per parameter tensor. RMSProp only uses
/// the second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
    pub steps: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, sizes: &[usize]) -> Self {
        OptimizerState {
            kind,
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            steps: 0,
        }
    }

    pub fn step(&mut self, params: &mut [&mut Vec<f64>], grads: &[Vec<f64>], lr: f64) {
        match self.kind {
            OptimizerKind::Adam => adam_step(self, params, grads, lr),
            OptimizerKind::RMSProp => rmsprop_step(self, params, grads, lr),
        }
    }
}

/// Bias-corrected Adam.
pub fn adam_step(state: &mut OptimizerState, params: &mut [&mut Vec<f64>], grads: &[Vec<f64>], lr: f64) {
    state.steps += 1;
    let t = state.steps as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for (k, p) in params.iter_mut().enumerate() {
        let (m, v, g) = (&mut state.first[k], &mut state.second[k], &grads[k]);
        for i in 0..p.len() {
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

pub fn rmsprop_step(state: &mut OptimizerState, params: &mut [&mut Vec<f64>], grads: &[Vec<f64>], lr: f64) {
    state.steps += 1;
    for (k, p) in params.iter_mut().enumerate() {
        let (v, g) = (&mut state.second[k], &grads[k]);
        for i in 0..p.len() {
            v[i] = RMSPROP_ALPHA * v[i] + (1.0 - RMSPROP_ALPHA) * g[i] * g[i];
            p[i] -= lr * g[i] / (v[i].sqrt() + RMSPROP_EPS);
        }
    }
}
