//! Global-norm gradient clipping: g ← g·min(1, C/||g||).

use tapegrad::Gradients;

/// Scales the whole gradient set down when its global norm exceeds the
/// threshold; direction is preserved. Returns the pre-clip norm.
pub fn clip_gradients(grads: &mut Gradients, threshold: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > threshold && norm > 0.0 {
        grads.scale(threshold / norm);
    }
    norm
}
