//! Adam with bias correction (β1 = 0.9, β2 = 0.999, ε = 1e-8).

use std::collections::BTreeMap;

use tapegrad::{Gradients, ParamId, ParamSet};

#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: usize,
    m: BTreeMap<ParamId, Vec<f64>>,
    v: BTreeMap<ParamId, Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// One bias-corrected update. Parameters without gradients are left
    /// untouched (their moments decay only when they reappear).
    pub fn step(&mut self, params: &mut ParamSet, grads: &Gradients) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (id, g) in grads.iter() {
            if !params.get(id).trainable {
                continue;
            }
            let m = self.m.entry(id).or_insert_with(|| vec![0.0; g.len()]);
            let v = self.v.entry(id).or_insert_with(|| vec![0.0; g.len()]);
            let values = params.get_mut(id).value.data_mut();
            for i in 0..g.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                values[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tapegrad::Tensor;

    fn one_param(value: f64) -> (ParamSet, ParamId) {
        let mut ps = ParamSet::new();
        let id = ps.add("p", Tensor::vector(vec![value])).unwrap();
        (ps, id)
    }

    fn grad_of(id: ParamId, g: f64) -> Gradients {
        let mut grads = Gradients::default();
        grads.insert(id, vec![g]);
        grads
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let (mut ps, id) = one_param(1.5);
        let mut adam = Adam::new(0.1);
        for _ in 0..10 {
            adam.step(&mut ps, &grad_of(id, 0.0));
        }
        assert_eq!(ps.value(id).data(), &[1.5]);
    }

    #[test]
    fn first_step_magnitude_is_learning_rate() {
        // bias-corrected: m̂ = g, v̂ = g² → update = lr·g/(|g|+ε) ≈ lr·sign(g)
        let (mut ps, id) = one_param(0.0);
        let mut adam = Adam::new(0.01);
        adam.step(&mut ps, &grad_of(id, 2.5));
        let delta = ps.value(id).data()[0];
        assert!(delta < 0.0, "update opposes the gradient sign");
        assert!((delta.abs() - 0.01).abs() < 1e-8, "{delta}");
    }

    #[test]
    fn first_step_is_gradient_scale_invariant() {
        let mut deltas = Vec::new();
        for g in [0.5, 5.0, 50.0] {
            let (mut ps, id) = one_param(0.0);
            let mut adam = Adam::new(0.01);
            adam.step(&mut ps, &grad_of(id, g));
            deltas.push(ps.value(id).data()[0].abs());
        }
        for w in deltas.windows(2) {
            assert!((w[0] - w[1]).abs() < 1e-6, "{deltas:?}");
        }
    }

    #[test]
    fn equal_gradients_get_equal_updates() {
        let mut ps = ParamSet::new();
        let a = ps.add("a", Tensor::vector(vec![1.0])).unwrap();
        let b = ps.add("b", Tensor::vector(vec![1.0])).unwrap();
        let mut grads = Gradients::default();
        grads.insert(a, vec![0.3]);
        grads.insert(b, vec![0.3]);
        let mut adam = Adam::new(0.05);
        adam.step(&mut ps, &grads);
        assert_eq!(ps.value(a).data(), ps.value(b).data());
    }

    #[test]
    fn frozen_parameters_never_move() {
        let mut ps = ParamSet::new();
        let id = ps.add_frozen("f", Tensor::vector(vec![2.0])).unwrap();
        let mut adam = Adam::new(0.1);
        adam.step(&mut ps, &grad_of(id, 1.0));
        assert_eq!(ps.value(id).data(), &[2.0]);
    }
}
