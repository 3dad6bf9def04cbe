//! Central finite-difference gradient verification.
//!
//! The finite-difference side only ever calls the caller's forward
//! function, so it stays independent of the reverse-mode path it checks.

use crate::params::{ParamId, ParamSet};
use crate::tape::Gradients;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub epsilon: f64,
    pub rel_tol: f64,
    /// Entries where both gradients are below this magnitude are compared
    /// absolutely instead of relatively.
    pub near_zero: f64,
    pub abs_tol: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            epsilon: 1e-4,
            rel_tol: 1e-3,
            near_zero: 1e-6,
            abs_tol: 1e-6,
        }
    }
}

/// Worst disagreement found by [`compare_gradients`].
#[derive(Debug, Clone)]
pub struct GradMismatch {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub error: f64,
}

impl std::fmt::Display for GradMismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}[{}]: analytic {:.6e} vs finite-difference {:.6e} (err {:.3e})",
            self.param, self.index, self.analytic, self.numeric, self.error
        )
    }
}

/// Full finite-difference gradient of `loss_fn` w.r.t. every trainable
/// parameter, via central differences. Parameters are restored afterwards.
pub fn finite_difference<F>(params: &mut ParamSet, mut loss_fn: F, epsilon: f64) -> Gradients
where
    F: FnMut(&ParamSet) -> f64,
{
    let ids: Vec<ParamId> = params
        .iter()
        .filter(|(_, p)| p.trainable)
        .map(|(id, _)| id)
        .collect();
    let mut out = Gradients::default();
    for id in ids {
        let len = params.value(id).len();
        let mut grad = vec![0.0; len];
        for j in 0..len {
            let orig = params.value(id).data()[j];
            params.get_mut(id).value.data_mut()[j] = orig + epsilon;
            let plus = loss_fn(params);
            params.get_mut(id).value.data_mut()[j] = orig - epsilon;
            let minus = loss_fn(params);
            params.get_mut(id).value.data_mut()[j] = orig;
            grad[j] = (plus - minus) / (2.0 * epsilon);
        }
        out.insert(id, grad);
    }
    out
}

/// Compare analytic gradients against a finite-difference reference.
/// Returns the worst offender when any entry exceeds tolerance.
pub fn compare_gradients(
    params: &ParamSet,
    analytic: &Gradients,
    numeric: &Gradients,
    cfg: GradCheckConfig,
) -> Result<(), GradMismatch> {
    let mut worst: Option<GradMismatch> = None;
    for (id, ng) in numeric.iter() {
        let zero = vec![0.0; ng.len()];
        let ag = analytic.get(id).unwrap_or(&zero);
        for (j, (&a, &n)) in ag.iter().zip(ng.iter()).enumerate() {
            let mag = a.abs().max(n.abs());
            let err = if mag < cfg.near_zero {
                (a - n).abs() / cfg.abs_tol * cfg.rel_tol
            } else {
                (a - n).abs() / mag
            };
            if err > cfg.rel_tol {
                let m = GradMismatch {
                    param: params.get(id).name.clone(),
                    index: j,
                    analytic: a,
                    numeric: n,
                    error: err,
                };
                if worst.as_ref().map_or(true, |w| m.error > w.error) {
                    worst = Some(m);
                }
            }
        }
    }
    match worst {
        Some(w) => Err(w),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::Tape;
    use crate::Tensor;

    #[test]
    fn finite_difference_matches_analytic_on_quadratic() {
        let mut ps = ParamSet::new();
        let p = ps.add("p", Tensor::vector(vec![1.0, -2.0, 0.5])).unwrap();

        let loss = |ps: &ParamSet| -> f64 {
            let mut tape = Tape::new();
            let pn = tape.param(ps, p);
            let sq = tape.mul(pn, pn).unwrap();
            let s = tape.sum(sq);
            tape.value(s).item()
        };

        let mut tape = Tape::new();
        let pn = tape.param(&ps, p);
        let sq = tape.mul(pn, pn).unwrap();
        let s = tape.sum(sq);
        let analytic = tape.backward(s).unwrap();

        let numeric = finite_difference(&mut ps, loss, 1e-5);
        compare_gradients(&ps, &analytic, &numeric, GradCheckConfig::default())
            .expect("quadratic gradients agree");
    }

    #[test]
    fn mismatch_is_reported_with_param_name() {
        let mut ps = ParamSet::new();
        let p = ps.add("weights", Tensor::vector(vec![1.0])).unwrap();
        let mut wrong = Gradients::default();
        wrong.insert(p, vec![5.0]);
        let mut right = Gradients::default();
        right.insert(p, vec![2.0]);
        let err = compare_gradients(&ps, &wrong, &right, GradCheckConfig::default()).unwrap_err();
        assert!(err.to_string().contains("weights"));
    }
}
