use super::ModelError;
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    /// `∂loss/∂logits`; rows outside the mask are zero.
    pub grad: DenseMatrix,
}

/// Mean softmax cross-entropy over the masked rows.
pub fn masked_cross_entropy(
    logits: &DenseMatrix,
    labels: &[usize],
    mask: &[bool],
) -> Result<LossOutput, ModelError> {
    let n = logits.rows();
    let k = logits.cols();
    if labels.len() != n || mask.len() != n {
        return Err(ModelError::InvalidInput(format!(
            "{n} logit rows but {} labels and {} mask entries",
            labels.len(),
            mask.len()
        )));
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(ModelError::EmptyMask);
    }
    let inv = 1.0 / count as f64;
    let mut grad = DenseMatrix::zeros(n, k);
    let mut total = 0.0;
    for i in (0..n).filter(|&i| mask[i]) {
        let y = labels[i];
        if y >= k {
            return Err(ModelError::InvalidInput(format!(
                "label {y} out of range for {k} classes"
            )));
        }
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        total += log_z - row[y];
        let g = grad.row_mut(i);
        for (c, (gv, &v)) in g.iter_mut().zip(row).enumerate() {
            let p = (v - log_z).exp();
            *gv = (p - if c == y { 1.0 } else { 0.0 }) * inv;
        }
    }
    Ok(LossOutput {
        loss: total * inv,
        grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn saturated_correct_logits_have_zero_loss() {
        let logits = DenseMatrix::from_rows(&[[1000.0, 0.0, 0.0], [0.0, 0.0, 1000.0]]);
        let out = masked_cross_entropy(&logits, &[0, 2], &[true, true]).unwrap();
        assert!(out.loss.abs() < 1e-12);
        assert!(out.grad.max_abs() < 1e-12);
    }

    #[test]
    fn uniform_logits_give_ln_k() {
        let logits = DenseMatrix::filled(4, 5, 0.3);
        let out = masked_cross_entropy(&logits, &[0, 1, 2, 3], &[true, false, true, true]).unwrap();
        assert!((out.loss - 5f64.ln()).abs() < 1e-12);
        assert!(out.grad.row(1).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn empty_mask_is_error() {
        let logits = DenseMatrix::zeros(2, 2);
        assert!(matches!(
            masked_cross_entropy(&logits, &[0, 1], &[false, false]),
            Err(ModelError::EmptyMask)
        ));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let logits = DenseMatrix::from_fn(6, 4, |_, _| rng.gen_range(-2.0..2.0));
        let labels = [0, 3, 1, 1, 2, 0];
        let mask = [true, true, false, true, true, false];
        let out = masked_cross_entropy(&logits, &labels, &mask).unwrap();
        let h = 1e-5;
        for r in 0..6 {
            for c in 0..4 {
                let mut p = logits.clone();
                p.set(r, c, logits.get(r, c) + h);
                let mut m = logits.clone();
                m.set(r, c, logits.get(r, c) - h);
                let fd = (masked_cross_entropy(&p, &labels, &mask).unwrap().loss
                    - masked_cross_entropy(&m, &labels, &mask).unwrap().loss)
                    / (2.0 * h);
                assert!((fd - out.grad.get(r, c)).abs() < 1e-6);
            }
        }
    }
}
