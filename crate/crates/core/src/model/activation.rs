use std::fmt;
use std::str::FromStr;

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Pointwise nonlinearity applied after each graph convolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Identity,
    /// Subgradient 0 at the origin.
    Relu,
    /// `x` for `x > 0`, `slope·x` otherwise; the derivative at 0 is `slope`.
    LeakyRelu(f64),
    /// Exact `x·Φ(x)` with the Gaussian CDF.
    Gelu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(s) => {
                if x > 0.0 {
                    x
                } else {
                    s * x
                }
            }
            Activation::Gelu => x * gauss_cdf(x),
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(s) => {
                if x > 0.0 {
                    1.0
                } else {
                    s
                }
            }
            Activation::Gelu => gauss_cdf(x) + x * gauss_pdf(x),
        }
    }

    pub fn is_identity(self) -> bool {
        matches!(self, Activation::Identity)
    }

    /// Short name used in file names and cell ids.
    pub fn slug(self) -> String {
        match self {
            Activation::Identity => "identity".into(),
            Activation::Relu => "relu".into(),
            Activation::LeakyRelu(s) => format!("leaky_relu{s}"),
            Activation::Gelu => "gelu".into(),
        }
    }
}

#[inline]
fn gauss_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

#[inline]
fn gauss_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Identity => write!(f, "identity"),
            Activation::Relu => write!(f, "relu"),
            Activation::LeakyRelu(s) => write!(f, "leaky_relu:{s}"),
            Activation::Gelu => write!(f, "gelu"),
        }
    }
}

impl FromStr for Activation {
    type Err = String;

    /// Accepts `identity`, `linear`, `relu`, `gelu`, `leaky_relu` (slope
    /// 0.8), `leaky_relu:<slope>` and `leaky_relu(<slope>)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "identity" | "linear" | "none" => return Ok(Activation::Identity),
            "relu" => return Ok(Activation::Relu),
            "gelu" => return Ok(Activation::Gelu),
            "leaky_relu" | "leakyrelu" => return Ok(Activation::LeakyRelu(0.8)),
            _ => {}
        }
        let rest = s
            .strip_prefix("leaky_relu")
            .ok_or_else(|| format!("unknown activation {s:?}"))?;
        let slope = rest
            .trim_start_matches([':', '(', '='])
            .trim_end_matches(')');
        let slope: f64 = slope
            .parse()
            .map_err(|_| format!("bad leaky_relu slope in {s:?}"))?;
        Ok(Activation::LeakyRelu(slope))
    }
}
