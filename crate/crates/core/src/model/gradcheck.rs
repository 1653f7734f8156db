use super::{masked_cross_entropy, Model, ModelError, ModelInput};
use crate::linalg::CsrMatrix;

/// Largest disagreement between backprop and central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// `|fd − analytic| / max(|fd|, |analytic|, floor)` maximized over every
    /// parameter entry.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub entries: usize,
}

/// Denominator floor for entries whose true gradient is essentially zero.
pub const REL_FLOOR: f64 = 1e-6;

/// Compares every parameter gradient of the masked cross-entropy against
/// central differences with step `h`. Cost is two forward passes per entry.
pub fn check_gradients(
    model: &Model,
    adj: &CsrMatrix,
    input: &ModelInput,
    labels: &[usize],
    mask: &[bool],
    h: f64,
) -> Result<GradCheck, ModelError> {
    let mut tape = model.forward(adj, input)?;
    let out = masked_cross_entropy(tape.logits(), labels, mask)?;
    model.backward(&mut tape, adj, input, &out.grad)?;
    let grads = tape.take_grads().expect("backward ran");
    let loss_at = |m: &Model| -> Result<f64, ModelError> {
        let t = m.forward(adj, input)?;
        Ok(masked_cross_entropy(t.logits(), labels, mask)?.loss)
    };
    let mut probe = model.clone();
    let mut res = GradCheck {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        entries: 0,
    };
    for (p, g) in grads.params().enumerate() {
        for idx in 0..g.data().len() {
            let orig = model.params().nth(p).expect("param index").data()[idx];
            probe.params_mut().nth(p).expect("param index").data_mut()[idx] = orig + h;
            let up = loss_at(&probe)?;
            probe.params_mut().nth(p).expect("param index").data_mut()[idx] = orig - h;
            let down = loss_at(&probe)?;
            probe.params_mut().nth(p).expect("param index").data_mut()[idx] = orig;
            let fd = (up - down) / (2.0 * h);
            let an = g.data()[idx];
            let abs = (fd - an).abs();
            let rel = abs / fd.abs().max(an.abs()).max(REL_FLOOR);
            res.max_abs_error = res.max_abs_error.max(abs);
            res.max_rel_error = res.max_rel_error.max(rel);
            res.entries += 1;
        }
    }
    Ok(res)
}
