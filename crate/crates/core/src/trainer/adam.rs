use serde::{Deserialize, Serialize};

use crate::tensor::Param;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moments per parameter, in the order params are passed.
#[derive(Debug, Clone, Default)]
pub struct AdamState {
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One bias-corrected Adam update. Frozen parameters are skipped entirely
/// (values and moments untouched); the step counter always advances.
pub fn adam_step(params: &mut [&mut Param], state: &mut AdamState, cfg: &AdamConfig) {
    if state.m.is_empty() {
        state.m = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
        state.v = state.m.clone();
    }
    assert_eq!(state.m.len(), params.len(), "parameter list changed between steps");
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for ((p, m), v) in params.iter_mut().zip(&mut state.m).zip(&mut state.v) {
        if p.frozen {
            continue;
        }
        let Param { value, grad, .. } = &mut **p;
        for (((x, &g), mi), vi) in value.data_mut().iter_mut().zip(grad.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
            let g = g as f64;
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * g;
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * g * g;
            let update = cfg.lr * (*mi / bc1) / ((*vi / bc2).sqrt() + cfg.eps);
            *x = (*x as f64 - update) as f32;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor;

    fn scalar(v: f32) -> Param {
        Param::new(Tensor::full([1, 1, 1, 1], v))
    }

    #[test]
    fn first_step_moves_by_lr() {
        for g in [1e-4f32, 0.3, -7.0, 1e3] {
            let mut p = scalar(1.0);
            p.grad.fill(g);
            let mut st = AdamState::new();
            adam_step(&mut [&mut p], &mut st, &AdamConfig { lr: 0.01, ..Default::default() });
            let d = p.value.data()[0] as f64 - 1.0;
            assert!((d + 0.01 * g.signum() as f64).abs() < 1e-4, "g={g} d={d}");
        }
    }

    #[test]
    fn zero_grad_no_move() {
        let mut p = scalar(2.0);
        let mut st = AdamState::new();
        p.grad.fill(1.0);
        adam_step(&mut [&mut p], &mut st, &AdamConfig::default());
        let after_one = p.value.data()[0];
        let m1 = st.m[0][0];
        p.grad.fill(0.0);
        adam_step(&mut [&mut p], &mut st, &AdamConfig::default());
        // momentum still carries the earlier gradient, but decays
        assert!(st.m[0][0] < m1);
        assert!(st.m[0][0] > 0.0);
        let mut q = scalar(2.0);
        let mut fresh = AdamState::new();
        adam_step(&mut [&mut q], &mut fresh, &AdamConfig::default());
        assert_eq!(q.value.data()[0], 2.0);
        assert_ne!(after_one, 2.0);
    }

    #[test]
    fn frozen_untouched() {
        let mut p = scalar(1.0);
        p.frozen = true;
        p.grad.fill(5.0);
        let mut st = AdamState::new();
        adam_step(&mut [&mut p], &mut st, &AdamConfig::default());
        assert_eq!(p.value.data()[0], 1.0);
        assert_eq!(st.step, 1);
    }
}
