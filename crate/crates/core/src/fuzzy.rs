//! Product-inference fuzzy basis with Gaussian rules and the fixed-time
//! adaptive law for the per-agent weight-norm estimate `θ̂`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::control::sigpow_scalar;
use crate::{Error, Result, Stacked};

/// Rule `j` pairs centre `c_j` across every input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyNet {
    pub centers: Vec<f64>,
    /// Gaussian denominator: `μ(z) = exp(-(z - c)² / width)`.
    pub width: f64,
    pub n_inputs: usize,
}

pub const BENCHMARK_CENTERS: [f64; 9] = [-7.0, -5.0, -3.0, -1.0, 0.0, 1.0, 3.0, 5.0, 7.0];

/// Smallest admissible normalising sum.
const MIN_ACTIVATION_SUM: f64 = 1e-300;

impl FuzzyNet {
    pub fn new(centers: Vec<f64>, width: f64, n_inputs: usize) -> Result<Self> {
        if centers.is_empty() || centers.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain(
                "fuzzy centres must be non-empty and strictly increasing".into(),
            ));
        }
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::Domain(format!(
                "fuzzy width must be positive, got {width}"
            )));
        }
        if n_inputs == 0 {
            return Err(Error::Domain("fuzzy net needs at least one input".into()));
        }
        Ok(Self {
            centers,
            width,
            n_inputs,
        })
    }

    /// Nine rules of width 4 over the twelve-dimensional `(η, υ)` input.
    pub fn benchmark() -> Self {
        Self {
            centers: BENCHMARK_CENTERS.to_vec(),
            width: 4.0,
            n_inputs: 12,
        }
    }

    pub fn rules(&self) -> usize {
        self.centers.len()
    }
}

impl Default for FuzzyNet {
    fn default() -> Self {
        Self::benchmark()
    }
}

pub fn membership(z: f64, center: f64, width: f64) -> f64 {
    (-(z - center).powi(2) / width).exp()
}

/// Normalised rule activations `Ψ(Z)`.
///
/// Evaluated in the log domain so inputs far from every centre still give the
/// nearest-rule-dominated distribution instead of `0/0`.
pub fn basis(z: &[f64], net: &FuzzyNet) -> Result<Vec<f64>> {
    if z.len() != net.n_inputs {
        return Err(Error::DimensionMismatch {
            expected: net.n_inputs,
            got: z.len(),
        });
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateActivation);
    }
    let log_act: Vec<f64> = net
        .centers
        .iter()
        .map(|&c| -z.iter().map(|&zi| (zi - c).powi(2)).sum::<f64>() / net.width)
        .collect();
    let peak = log_act.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let act: Vec<f64> = log_act.iter().map(|&l| (l - peak).exp()).collect();
    let total = act.iter().sum::<f64>().max(MIN_ACTIVATION_SUM);
    Ok(act.into_iter().map(|a| a / total).collect())
}

/// `wᵀΨ`.
pub fn fls_output(w: &[f64], psi: &[f64]) -> Result<f64> {
    if w.len() != psi.len() {
        return Err(Error::DimensionMismatch {
            expected: psi.len(),
            got: w.len(),
        });
    }
    Ok(w.iter().zip(psi).map(|(a, b)| a * b).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveGains {
    pub w1: f64,
    pub w2: f64,
    /// Exponent in (0, 1).
    pub gamma: f64,
    /// Exponent above 1.
    pub iota: f64,
}

/// `θ̂̇_i = ½ Σ_j H_ij ‖s₂,j‖² ‖Ψ_j‖² − w₁ θ̂_i^γ − w₂ θ̂_i^ι`.
///
/// Only neighbours with `H_ij ≠ 0` enter agent `i`'s rate.
pub fn adapt_derivative(
    theta_hat: &[f64],
    s2: &Stacked,
    psi_all: &[Vec<f64>],
    h: &DMatrix<f64>,
    gains: &AdaptiveGains,
) -> Result<Vec<f64>> {
    let n = h.nrows();
    if theta_hat.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: theta_hat.len(),
        });
    }
    if psi_all.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: psi_all.len(),
        });
    }
    if s2.len() != 6 * n {
        return Err(Error::DimensionMismatch {
            expected: 6 * n,
            got: s2.len(),
        });
    }
    let drive: Vec<f64> = (0..n)
        .map(|j| {
            let s = s2.fixed_rows::<6>(6 * j).norm_squared();
            let p: f64 = psi_all[j].iter().map(|x| x * x).sum();
            s * p
        })
        .collect();
    Ok((0..n)
        .map(|i| {
            let coupling: f64 = (0..n)
                .filter(|&j| h[(i, j)] != 0.0)
                .map(|j| h[(i, j)] * drive[j])
                .sum();
            let th = theta_hat[i];
            0.5 * coupling
                - gains.w1 * sigpow_scalar(th, gains.gamma)
                - gains.w2 * sigpow_scalar(th, gains.iota)
        })
        .collect())
}
