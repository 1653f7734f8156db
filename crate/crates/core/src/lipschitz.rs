//! Frobenius-norm weight control and spectral diagnostics of hidden layers.

use std::fmt;
use std::io::{self, Write};

use crate::linalg::{b_power_norm, spectral_norm_default, CsrMatrix, DenseMatrix, LinalgError};
use crate::model::Model;

/// `c·W/‖W‖_F`. A zero matrix has no direction and is returned unchanged.
pub fn frobenius_normalize(w: &DenseMatrix, c: f64) -> DenseMatrix {
    let mut out = w.clone();
    normalize_in_place(&mut out, c);
    out
}

fn normalize_in_place(w: &mut DenseMatrix, c: f64) {
    assert!(c > 0.0, "norm bound must be positive");
    let norm = w.frobenius_norm();
    if norm == 0.0 {
        log::warn!("zero weight matrix left unnormalized");
        return;
    }
    if !norm.is_finite() {
        log::warn!("non-finite weight norm; matrix left unnormalized");
        return;
    }
    w.scale_in_place(c / norm);
}

/// Projects every hidden layer to Frobenius norm `c`. The input projection
/// and readout are not touched.
pub fn apply_to_model(model: &mut Model, c: f64) {
    for w in &mut model.layers {
        normalize_in_place(w, c);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `q̂·max‖W‖₂ < 1`.
    Smoothing,
    ExpansionRisk,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Smoothing => "smoothing",
            Regime::ExpansionRisk => "expansion_risk",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzReport {
    pub frobenius: Vec<f64>,
    pub spectral: Vec<f64>,
    /// Active bound, if control is on.
    pub c: Option<f64>,
    /// `‖B Âᵀ‖`, the one-step contraction of the non-constant component.
    pub q_hat: f64,
    pub product_bound: f64,
    pub regime: Regime,
}

impl LipschitzReport {
    pub fn max_spectral(&self) -> f64 {
        self.spectral.iter().copied().fold(0.0, f64::max)
    }

    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "layer,frobenius,spectral")?;
        for (i, (f, s)) in self.frobenius.iter().zip(&self.spectral).enumerate() {
            writeln!(w, "{i},{f:e},{s:e}")?;
        }
        Ok(())
    }

    /// One-line `key=value` summary.
    pub fn summary(&self) -> String {
        format!(
            "c={} q_hat={:.6e} max_spectral={:.6e} product_bound={:.6e} regime={}",
            self.c.map_or("none".to_string(), |c| c.to_string()),
            self.q_hat,
            self.max_spectral(),
            self.product_bound,
            self.regime
        )
    }
}

pub fn diagnose(model: &Model, adj: &CsrMatrix) -> Result<LipschitzReport, LinalgError> {
    let frobenius: Vec<f64> = model.layers.iter().map(DenseMatrix::frobenius_norm).collect();
    let spectral = model
        .layers
        .iter()
        .map(|w| {
            if w.is_zero() {
                Ok(0.0)
            } else {
                spectral_norm_default(w).map(|e| e.value)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let q_hat = b_power_norm(adj, 1)?.value;
    let max_spec = spectral.iter().copied().fold(0.0, f64::max);
    let product_bound = q_hat * max_spec;
    Ok(LipschitzReport {
        frobenius,
        spectral,
        c: model.config().lipschitz_c,
        q_hat,
        product_bound,
        regime: if product_bound < 1.0 {
            Regime::Smoothing
        } else {
            Regime::ExpansionRisk
        },
    })
}
