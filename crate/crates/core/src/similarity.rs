//! The node similarity seminorm, per-layer profiles and decay-rate fits.

use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

use crate::linalg::{column_means, DenseMatrix};
use crate::model::Tape;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimilarityError {
    #[error("tape has no backward pass; gradient profile unavailable")]
    MissingBackward,
    #[error("cannot fit decay: {0}")]
    Fit(String),
}

/// `‖X − 1γ‖_F` where `γ` is the row of column means. Zero exactly when all
/// rows coincide. Non-finite input yields a non-finite result.
pub fn node_similarity(x: &DenseMatrix) -> f64 {
    if x.rows() == 0 {
        return 0.0;
    }
    let means = column_means(x);
    let mut sum = 0.0;
    for r in 0..x.rows() {
        for (v, m) in x.row(r).iter().zip(&means) {
            let d = v - m;
            sum += d * d;
        }
    }
    sum.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileKind {
    Representation,
    Gradient,
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileKind::Representation => "representation",
            ProfileKind::Gradient => "gradient",
        })
    }
}

/// Similarity of every layer `0..=L`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityProfile {
    pub values: Vec<f64>,
    pub kind: ProfileKind,
    pub nan_layers: Vec<usize>,
}

impl SimilarityProfile {
    pub fn from_values(values: Vec<f64>, kind: ProfileKind) -> Self {
        let nan_layers = values
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_finite())
            .map(|(i, _)| i)
            .collect();
        Self {
            values,
            kind,
            nan_layers,
        }
    }

    pub fn from_matrices(mats: &[DenseMatrix], kind: ProfileKind) -> Self {
        Self::from_values(mats.iter().map(node_similarity).collect(), kind)
    }

    /// `L`, the index of the last layer.
    pub fn depth(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn has_nan(&self) -> bool {
        !self.nan_layers.is_empty()
    }

    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "layer,value,is_nan")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{i},{v:e},{}", !v.is_finite() as u8)?;
        }
        Ok(())
    }
}

pub fn similarity_profile(
    tape: &Tape,
    kind: ProfileKind,
) -> Result<SimilarityProfile, SimilarityError> {
    let mats = match kind {
        ProfileKind::Representation => tape.representations(),
        ProfileKind::Gradient => tape.input_grads().ok_or(SimilarityError::MissingBackward)?,
    };
    Ok(SimilarityProfile::from_matrices(mats, kind))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    /// Change of `ln μ` per layer of distance from the output.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub layers_used: Vec<usize>,
}

/// Least-squares fit of `ln values[ℓ]` against `L − ℓ` over the finite,
/// strictly positive entries. A negative slope means the profile shrinks
/// toward the input layer.
pub fn fit_decay(profile: &SimilarityProfile) -> Result<DecayFit, SimilarityError> {
    let depth = profile.depth();
    let layers_used: Vec<usize> = (0..profile.values.len())
        .filter(|&l| {
            let v = profile.values[l];
            v.is_finite() && v > 0.0
        })
        .collect();
    if layers_used.len() < 3 {
        return Err(SimilarityError::Fit(format!(
            "need at least 3 finite positive values, have {}",
            layers_used.len()
        )));
    }
    let xs: Vec<f64> = layers_used.iter().map(|&l| (depth - l) as f64).collect();
    let ys: Vec<f64> = layers_used.iter().map(|&l| profile.values[l].ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    // A flat profile is fitted perfectly.
    let r_squared = if syy <= f64::EPSILON * ys.len() as f64 * my.abs().max(1.0) {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(DecayFit {
        slope,
        intercept,
        r_squared,
        layers_used,
    })
}
