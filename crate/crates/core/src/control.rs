//! Distributed controllers.
//!
//! Three laws share the same plant terms and output a stacked commanded
//! torque `τ` (the plant applies its own hard clip):
//!
//! - [`ft_backstepping_tau`]: fixed-time backstepping sliding-mode control.
//! - [`adaptive_sat_tau`]: the same reaching law with an auxiliary
//!   saturation-compensation state `μ` and fuzzy adaptive damping `θ̂`.
//! - [`baseline_smc_tau`]: first-order distributed SMC with a boundary layer.
//!
//! Fractional powers of signed quantities are taken as `sign(x)|x|^a`.

use std::ops::AddAssign;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::fuzzy::AdaptiveGains;
use crate::topology::stacked_apply;
use crate::vehicle::{self, AuvParams, AuvState};
use crate::{block, set_block, Error, Mat6, Result, Stacked, Vec6};

pub fn sigpow_scalar(x: f64, a: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(a)
    }
}

/// Elementwise `sign(x)|x|^a`.
pub fn sigpow(x: &Stacked, a: f64) -> Stacked {
    x.map(|v| sigpow_scalar(v, a))
}

/// `sign` with `sign(0) = 0`.
fn sign(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum()
    }
}

/// Gains of the fixed-time controllers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FtGains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k8: f64,
    pub k9: f64,
    pub k10: f64,
    pub gamma: f64,
    pub iota: f64,
    pub beta_s: f64,
    /// Boundary layer `ε₁` of the smoothed switching term.
    pub eps_bl: f64,
    /// Floor on `|s₁|` inside the `|s₁|^(γ-1)` factor of `α̇_s`.
    pub eps_sing: f64,
    pub w1: f64,
    pub w2: f64,
}

impl Default for FtGains {
    fn default() -> Self {
        Self {
            k1: 5.0,
            k2: 0.4,
            k3: 0.4,
            k8: 5.0,
            k9: 0.4,
            k10: 0.4,
            gamma: 5.0 / 7.0,
            iota: 7.0 / 5.0,
            beta_s: 20.0,
            eps_bl: 0.01,
            eps_sing: 1e-3,
            w1: 1.0,
            w2: 1.0,
        }
    }
}

impl FtGains {
    pub fn validate(&self) -> Result<()> {
        check_exponents(self.gamma, self.iota)?;
        let named = [
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("k8", self.k8),
            ("k9", self.k9),
            ("k10", self.k10),
            ("beta_s", self.beta_s),
            ("eps_bl", self.eps_bl),
            ("eps_sing", self.eps_sing),
            ("w1", self.w1),
            ("w2", self.w2),
        ];
        for (name, v) in named {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!(
                    "gain {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn adaptive(&self) -> AdaptiveGains {
        AdaptiveGains {
            w1: self.w1,
            w2: self.w2,
            gamma: self.gamma,
            iota: self.iota,
        }
    }
}

pub fn check_exponents(gamma: f64, iota: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0 && iota > 1.0 && iota.is_finite()) {
        return Err(Error::InvalidExponents { gamma, iota });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineGains {
    pub k1: f64,
    pub beta0: f64,
    pub eps_bl: f64,
}

impl Default for BaselineGains {
    fn default() -> Self {
        Self {
            k1: 5.0,
            beta0: 200.0,
            eps_bl: 0.01,
        }
    }
}

impl BaselineGains {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("k1", self.k1),
            ("beta0", self.beta0),
            ("eps_bl", self.eps_bl),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!(
                    "gain {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Saturation-compensation state `μ`, stacked over agents.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxState {
    pub mu: Stacked,
}

impl AuxState {
    pub fn zeros(n: usize) -> Self {
        Self {
            mu: Stacked::zeros(6 * n),
        }
    }
}

/// Per-agent bound `λ̃_i` on `‖J Π d‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceBound {
    pub lambda_tilde: Vec<f64>,
}

impl DisturbanceBound {
    pub fn norm(&self) -> f64 {
        self.lambda_tilde.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// The switching gain must dominate the disturbance bound.
pub fn check_switching_gain(beta: f64, bound: &DisturbanceBound) -> Result<()> {
    let b = bound.norm();
    if beta <= b {
        return Err(Error::GainViolation { beta, bound: b });
    }
    Ok(())
}

/// Model terms shared by every controller for one fleet configuration.
#[derive(Debug, Clone)]
pub struct FleetTerms {
    /// `J_i M_i⁻¹`
    pub jpi: Vec<Mat6>,
    /// `(J_i M_i⁻¹)⁻¹ = M_i J_i⁻¹`
    pub jpi_inv: Vec<Mat6>,
    /// `Φ̄ υ` with `Φ_i = J̇_i − J_i Π_i (C_i + D_i)`.
    pub phi_nu: Stacked,
    /// Inertial pose rates `J_i υ_i`.
    pub pose_rates: Vec<Vec6>,
}

pub fn fleet_terms(states: &[AuvState], params: &[AuvParams]) -> Result<FleetTerms> {
    if params.len() != states.len() {
        return Err(Error::DimensionMismatch {
            expected: states.len(),
            got: params.len(),
        });
    }
    let n = states.len();
    let mut out = FleetTerms {
        jpi: Vec::with_capacity(n),
        jpi_inv: Vec::with_capacity(n),
        phi_nu: Stacked::zeros(6 * n),
        pose_rates: Vec::with_capacity(n),
    };
    for (i, (s, p)) in states.iter().zip(params).enumerate() {
        let tag = |e: Error| match e {
            Error::AttitudeSingularity { pitch, t, .. } => Error::AttitudeSingularity {
                pitch,
                agent: Some(i),
                t,
            },
            other => other,
        };
        let eta2 = s.attitude();
        let j = vehicle::jacobian(&eta2).map_err(tag)?;
        let j_inv = vehicle::jacobian_inverse(&eta2).map_err(tag)?;
        let j_dot = vehicle::jacobian_rate(&eta2, &s.nu).map_err(tag)?;
        let m = vehicle::mass_matrix(p)?;
        let m_diag = m.diagonal();
        let m_inv = Mat6::from_diagonal(&m_diag.map(|v| 1.0 / v));
        let jpi = j * m_inv;
        let drag = (vehicle::coriolis_matrix(p, &s.nu) + vehicle::damping_matrix(p)) * s.nu;
        let phi_nu = j_dot * s.nu - jpi * drag;
        set_block(&mut out.phi_nu, i, &phi_nu);
        out.jpi.push(jpi);
        out.jpi_inv.push(m * j_inv);
        out.pose_rates.push(j * s.nu);
    }
    Ok(out)
}

impl FleetTerms {
    pub fn n(&self) -> usize {
        self.jpi.len()
    }

    /// `[J̄ Π̄]⁻¹ v`
    fn to_torque(&self, v: &Stacked) -> Stacked {
        let mut tau = Stacked::zeros(v.len());
        for (i, m) in self.jpi_inv.iter().enumerate() {
            set_block(&mut tau, i, &(m * block(v, i)));
        }
        tau
    }
}

/// `α_s = −(k₁ s₁ + k₂ s₁^γ + k₃ s₁^ι)`.
pub fn virtual_control(s1: &Stacked, g: &FtGains) -> Stacked {
    s1.map(|s| -(g.k1 * s + g.k2 * sigpow_scalar(s, g.gamma) + g.k3 * sigpow_scalar(s, g.iota)))
}

/// `α̇_s` along `ṡ₁`, with `|s₁|^(γ−1)` floored at `eps_sing`.
pub fn virtual_control_deriv(s1: &Stacked, s1_dot: &Stacked, g: &FtGains) -> Stacked {
    s1.zip_map(s1_dot, |s, sd| {
        let a = s.abs();
        let slope = g.k1
            + g.k2 * g.gamma * a.max(g.eps_sing).powf(g.gamma - 1.0)
            + g.k3 * g.iota * a.powf(g.iota - 1.0);
        -slope * sd
    })
}

/// `s₁ = ε̄₁`, `s₂ = ε̄₂ − (H⊗I)α_s [− (H⊗I)μ]`.
pub fn sliding_surfaces(
    eps1: &Stacked,
    eps2: &Stacked,
    alpha: &Stacked,
    h: &DMatrix<f64>,
    mu: Option<&AuxState>,
) -> Result<(Stacked, Stacked)> {
    if eps2.len() != eps1.len() || alpha.len() != eps1.len() {
        return Err(Error::DimensionMismatch {
            expected: eps1.len(),
            got: if eps2.len() != eps1.len() {
                eps2.len()
            } else {
                alpha.len()
            },
        });
    }
    let mut s2 = eps2 - stacked_apply(h, alpha)?;
    if let Some(mu) = mu {
        s2 -= stacked_apply(h, &mu.mu)?;
    }
    Ok((eps1.clone(), s2))
}

/// `g(τ) = τ_max tanh(τ / τ_max)`.
pub fn smooth_sat(tau: &Vec6, tau_max: f64) -> Vec6 {
    tau.map(|t| tau_max * (t / tau_max).tanh())
}

/// `μ̇ = −μ + J̄ Π̄ (g(τ) − τ)`.
pub fn aux_derivative(
    mu: &AuxState,
    tau: &Stacked,
    terms: &FleetTerms,
    params: &[AuvParams],
) -> Result<Stacked> {
    let n = terms.n();
    if tau.len() != 6 * n || mu.mu.len() != 6 * n {
        return Err(Error::DimensionMismatch {
            expected: 6 * n,
            got: tau.len().min(mu.mu.len()),
        });
    }
    let mut out = -mu.mu.clone();
    for (i, p) in params.iter().enumerate().take(n) {
        let t = block(tau, i);
        let gap = smooth_sat(&t, p.tau_max) - t;
        let add = terms.jpi[i] * gap;
        out.fixed_rows_mut::<6>(6 * i).add_assign(&add);
    }
    Ok(out)
}

/// Consensus errors fed to the controllers.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingErrors {
    pub eps1: Stacked,
    pub eps2: Stacked,
}

fn leader_stack(n: usize, accel: &Vec6) -> Stacked {
    let mut x = Stacked::zeros(6 * n);
    for i in 0..n {
        set_block(&mut x, i, accel);
    }
    x
}

/// `−k₈ s₂ − k₉ s₂^γ − k₁₀ s₂^ι` minus the switching term.
fn reaching(s2: &Stacked, g: &FtGains, switching: &Stacked) -> Stacked {
    let mut r = -g.beta_s * switching;
    r -= g.k8 * s2;
    r -= g.k9 * sigpow(s2, g.gamma);
    r -= g.k10 * sigpow(s2, g.iota);
    r
}

fn smoothed_switch(s: &Stacked, eps: f64) -> Stacked {
    s / (s.norm() + eps)
}

/// `−Φ̄υ + 1⊗η̈^d + α̇_s`, the feed-forward shared by the fixed-time laws.
fn feed_forward(
    errors: &TrackingErrors,
    terms: &FleetTerms,
    leader_accel: &Vec6,
    g: &FtGains,
) -> Stacked {
    let alpha_dot = virtual_control_deriv(&errors.eps1, &errors.eps2, g);
    -&terms.phi_nu + leader_stack(terms.n(), leader_accel) + alpha_dot
}

fn check_dims(errors: &TrackingErrors, terms: &FleetTerms, h: &DMatrix<f64>) -> Result<()> {
    let n = terms.n();
    for len in [errors.eps1.len(), errors.eps2.len(), 6 * h.nrows()] {
        if len != 6 * n {
            return Err(Error::DimensionMismatch {
                expected: 6 * n,
                got: len,
            });
        }
    }
    Ok(())
}

/// Fixed-time backstepping SMC,
/// `τ = [J̄Π̄]⁻¹(−Φ̄υ + 1⊗η̈^d + α̇_s + τ′)`.
///
/// `smooth` replaces `sign(s₂)` with `s₂ / (‖s₂‖ + ε₁)`.
pub fn ft_backstepping_tau(
    errors: &TrackingErrors,
    terms: &FleetTerms,
    leader_accel: &Vec6,
    h: &DMatrix<f64>,
    g: &FtGains,
    smooth: bool,
) -> Result<Stacked> {
    check_dims(errors, terms, h)?;
    let alpha = virtual_control(&errors.eps1, g);
    let (_, s2) = sliding_surfaces(&errors.eps1, &errors.eps2, &alpha, h, None)?;
    let switching = if smooth {
        smoothed_switch(&s2, g.eps_bl)
    } else {
        s2.map(sign)
    };
    let v = feed_forward(errors, terms, leader_accel, g) + reaching(&s2, g, &switching);
    Ok(terms.to_torque(&v))
}

/// Saturated adaptive-fuzzy fixed-time law,
/// `τ = (J̄Π̄)⁻¹(−F_sum − ½ θ̂_i ‖Ψ_i‖² s₂,i − β_s s₂/(‖s₂‖+ε₁) − k₈ s₂ − k₉ s₂^γ − k₁₀ s₂^ι)`
/// with `F_sum = Φ̄υ − 1⊗η̈^d + μ − α̇_s`.
#[allow(clippy::too_many_arguments)]
pub fn adaptive_sat_tau(
    errors: &TrackingErrors,
    terms: &FleetTerms,
    leader_accel: &Vec6,
    h: &DMatrix<f64>,
    g: &FtGains,
    mu: &AuxState,
    theta_hat: &[f64],
    psi: &[Vec<f64>],
) -> Result<Stacked> {
    check_dims(errors, terms, h)?;
    let n = terms.n();
    if theta_hat.len() != n || psi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: theta_hat.len().min(psi.len()),
        });
    }
    let alpha = virtual_control(&errors.eps1, g);
    let (_, s2) = sliding_surfaces(&errors.eps1, &errors.eps2, &alpha, h, Some(mu))?;
    let mut compensation = Stacked::zeros(6 * n);
    for i in 0..n {
        let psi_sq: f64 = psi[i].iter().map(|p| p * p).sum();
        let gain = 0.5 * theta_hat[i] * psi_sq;
        set_block(&mut compensation, i, &(gain * block(&s2, i)));
    }
    let switching = smoothed_switch(&s2, g.eps_bl);
    let v = feed_forward(errors, terms, leader_accel, g) - &mu.mu - compensation
        + reaching(&s2, g, &switching);
    Ok(terms.to_torque(&v))
}

/// Baseline distributed SMC with surface `s = k₁(H⊗I)ε̄₁ + ε̄₂`.
pub fn baseline_smc_tau(
    errors: &TrackingErrors,
    terms: &FleetTerms,
    leader_accel: &Vec6,
    h: &DMatrix<f64>,
    g: &BaselineGains,
) -> Result<Stacked> {
    check_dims(errors, terms, h)?;
    let s = g.k1 * stacked_apply(h, &errors.eps1)? + &errors.eps2;
    let v = -&terms.phi_nu - g.k1 * &errors.eps2 + leader_stack(terms.n(), leader_accel)
        - g.beta0 * smoothed_switch(&s, g.eps_bl);
    Ok(terms.to_torque(&v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuzzy::{basis, FuzzyNet};
    use crate::topology::{grounded_matrix, FormationGraph};
    use proptest::prelude::*;

    #[test]
    fn sigpow_examples() {
        assert_eq!(sigpow_scalar(-1.0, 5.0 / 7.0), -1.0);
        assert_eq!(sigpow_scalar(0.0, 0.3), 0.0);
        assert!((sigpow_scalar(8.0, 1.0 / 3.0) - 2.0).abs() < 1e-15);
        assert!((sigpow_scalar(-8.0, 1.0 / 3.0) + 2.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn sigpow_odd_monotone_identity(x in -50.0f64..50.0, y in -50.0f64..50.0, a in 0.05f64..3.0) {
            prop_assert_eq!(sigpow_scalar(-x, a), -sigpow_scalar(x, a));
            if x < y {
                prop_assert!(sigpow_scalar(x, a) <= sigpow_scalar(y, a));
            }
            prop_assert_eq!(sigpow_scalar(x, 1.0), x);
        }

        #[test]
        fn smooth_sat_inside_clip(t in -5000.0f64..5000.0, s in -5000.0f64..5000.0) {
            let g = smooth_sat(&Vec6::from_element(t), 300.0);
            prop_assert!(g[0].abs() <= 300.0);
            prop_assert_eq!(vehicle::saturate(&g, 300.0), g);
            if t < s {
                prop_assert!(g[0] <= smooth_sat(&Vec6::from_element(s), 300.0)[0]);
            }
        }

        #[test]
        fn virtual_control_is_odd(v in proptest::collection::vec(-20.0f64..20.0, 12)) {
            let g = FtGains::default();
            let s = Stacked::from_vec(v);
            prop_assert_eq!(virtual_control(&(-&s), &g), -virtual_control(&s, &g));
        }
    }

    #[test]
    fn smooth_sat_examples() {
        assert_eq!(smooth_sat(&Vec6::zeros(), 300.0), Vec6::zeros());
        let g = smooth_sat(&Vec6::from_element(300.0), 300.0);
        assert!((g[0] - 228.478_246_8).abs() < 1e-6);
        assert!((g[0] - 300.0 * 1.0f64.tanh()).abs() < 1e-12);
    }

    #[test]
    fn virtual_control_examples() {
        let g = FtGains::default();
        assert_eq!(virtual_control(&Stacked::zeros(6), &g), Stacked::zeros(6));
        let mut e1 = Stacked::zeros(6);
        e1[0] = 1.0;
        let a = virtual_control(&e1, &g);
        assert!((a[0] + 5.8).abs() < 1e-15);
        assert_eq!(a[1], 0.0);
    }

    #[test]
    fn virtual_control_deriv_examples() {
        let g = FtGains::default();
        let s1 = Stacked::from_vec(vec![0.0, 2.0, -3.0, 0.5, 1.0, -0.7]);
        assert_eq!(
            virtual_control_deriv(&s1, &Stacked::zeros(6), &g),
            Stacked::zeros(6)
        );
        let mut e = Stacked::zeros(6);
        e[0] = 1.0;
        let d = virtual_control_deriv(&Stacked::zeros(6), &e, &g);
        let want = -(g.k1 + g.k2 * g.gamma * g.eps_sing.powf(g.gamma - 1.0));
        assert!((d[0] - want).abs() < 1e-12);
        assert!(d[0].is_finite());
    }

    #[test]
    fn virtual_control_deriv_matches_central_difference() {
        let g = FtGains::default();
        // smooth path s1(t) kept away from zero
        let path = |t: f64| {
            Stacked::from_vec(vec![
                2.0 + t.sin(),
                -1.5 - 0.5 * t.cos(),
                0.8 + 0.3 * t * t,
                -3.0 + t,
                1.0 + 0.1 * t,
                -0.6 - 0.2 * t.sin(),
            ])
        };
        let rate = |t: f64| {
            Stacked::from_vec(vec![
                t.cos(),
                0.5 * t.sin(),
                0.6 * t,
                1.0,
                0.1,
                -0.2 * t.cos(),
            ])
        };
        let t0 = 0.4;
        let mut prev = f64::INFINITY;
        for h in [1e-2, 5e-3] {
            let fd = (virtual_control(&path(t0 + h), &g) - virtual_control(&path(t0 - h), &g))
                / (2.0 * h);
            let err = (fd - virtual_control_deriv(&path(t0), &rate(t0), &g)).amax();
            assert!(err < 1e-3, "{err}");
            // second-order: halving h quarters the error
            if prev.is_finite() {
                assert!(err < prev / 3.0, "{err} vs {prev}");
            }
            prev = err;
        }
    }

    fn chain_h() -> DMatrix<f64> {
        grounded_matrix(&FormationGraph::chain(4)).unwrap().matrix
    }

    #[test]
    fn surfaces_with_and_without_mu() {
        let h = chain_h();
        let z = Stacked::zeros(24);
        let (s1, s2) = sliding_surfaces(&z, &z, &z, &h, Some(&AuxState::zeros(4))).unwrap();
        assert_eq!((s1, s2.clone()), (z.clone(), z.clone()));
        let e1 = Stacked::from_fn(24, |k, _| (k as f64).sin());
        let e2 = Stacked::from_fn(24, |k, _| (k as f64 * 0.3).cos());
        let a = virtual_control(&e1, &FtGains::default());
        let (_, plain) = sliding_surfaces(&e1, &e2, &a, &h, None).unwrap();
        let (_, zero_mu) = sliding_surfaces(&e1, &e2, &a, &h, Some(&AuxState::zeros(4))).unwrap();
        assert_eq!(plain, zero_mu);
        let mu = AuxState {
            mu: Stacked::from_fn(24, |k, _| k as f64 * 0.1 - 1.0),
        };
        let (_, with_mu) = sliding_surfaces(&e1, &e2, &a, &h, Some(&mu)).unwrap();
        assert_eq!(with_mu, &plain - stacked_apply(&h, &mu.mu).unwrap());
        // direct re-evaluation
        for i in 0..4 {
            for k in 0..6 {
                let mut want = e2[6 * i + k];
                for j in 0..4 {
                    want -= h[(i, j)] * (a[6 * j + k] + mu.mu[6 * j + k]);
                }
                assert!((with_mu[6 * i + k] - want).abs() < 1e-12);
            }
        }
        assert!(sliding_surfaces(&e1, &Stacked::zeros(6), &a, &h, None).is_err());
    }

    #[test]
    fn switching_gain_check() {
        let b = DisturbanceBound {
            lambda_tilde: vec![3.0, 4.0],
        };
        assert!(check_switching_gain(5.5, &b).is_ok());
        assert!(matches!(
            check_switching_gain(5.0, &b),
            Err(Error::GainViolation { .. })
        ));
    }

    fn params(n: usize) -> Vec<AuvParams> {
        vec![AuvParams::benchmark(); n]
    }

    #[test]
    fn aux_derivative_regimes() {
        let p = params(1);
        let state = AuvState::default();
        let terms = fleet_terms(&[state], &p).unwrap();
        let zero = aux_derivative(&AuxState::zeros(1), &Stacked::zeros(6), &terms, &p).unwrap();
        assert_eq!(zero, Stacked::zeros(6));
        let mu = AuxState {
            mu: Stacked::from_element(6, 2.0),
        };
        let small = aux_derivative(&mu, &Stacked::from_element(6, 0.3), &terms, &p).unwrap();
        assert!((small + &mu.mu).amax() < 1e-6);
    }

    #[test]
    fn aux_state_relaxes_to_saturation_gap() {
        // μ̇ = −μ + c with constant c has μ(t) = c (1 − e^{−t}) from μ(0) = 0.
        let p = params(1);
        let terms = fleet_terms(&[AuvState::default()], &p).unwrap();
        let tau = Stacked::from_element(6, 900.0);
        let c = aux_derivative(&AuxState::zeros(1), &tau, &terms, &p).unwrap();
        let mut mu = AuxState::zeros(1);
        let dt = 1e-3;
        for _ in 0..3000 {
            // midpoint rule is exact enough for this linear check
            let k1 = aux_derivative(&mu, &tau, &terms, &p).unwrap();
            let mid = AuxState {
                mu: &mu.mu + 0.5 * dt * &k1,
            };
            let k2 = aux_derivative(&mid, &tau, &terms, &p).unwrap();
            mu.mu += dt * k2;
        }
        let want = &c * (1.0 - (-3.0f64).exp());
        assert!((mu.mu - want).amax() < 1e-5);
        assert!(c[0] < 0.0);
    }

    fn frozen(seed: u64) -> (Vec<AuvState>, TrackingErrors, Vec6) {
        // small LCG so the fixture is reproducible without extra deps
        let mut x = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let mut next = move || {
            x = x
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let states = (0..4)
            .map(|_| {
                let eta = Vec6::from_fn(|k, _| if k < 3 { 10.0 * next() } else { 0.8 * next() });
                let nu = Vec6::from_fn(|_, _| 2.0 * next());
                AuvState::new(eta, nu)
            })
            .collect();
        let errors = TrackingErrors {
            eps1: Stacked::from_fn(24, |_, _| 5.0 * next()),
            eps2: Stacked::from_fn(24, |_, _| 5.0 * next()),
        };
        let acc = Vec6::from_fn(|_, _| next());
        (states, errors, acc)
    }

    #[test]
    fn degenerate_adaptive_state_reduces_to_smoothed_backstepping() {
        let h = chain_h();
        let g = FtGains::default();
        let net = FuzzyNet::benchmark();
        for seed in 0..20 {
            let (states, errors, acc) = frozen(seed);
            let terms = fleet_terms(&states, &params(4)).unwrap();
            let psi: Vec<_> = states
                .iter()
                .map(|s| {
                    let z: Vec<f64> = s.eta.iter().chain(s.nu.iter()).copied().collect();
                    basis(&z, &net).unwrap()
                })
                .collect();
            let a = adaptive_sat_tau(
                &errors,
                &terms,
                &acc,
                &h,
                &g,
                &AuxState::zeros(4),
                &[0.0; 4],
                &psi,
            )
            .unwrap();
            let b = ft_backstepping_tau(&errors, &terms, &acc, &h, &g, true).unwrap();
            assert!((a - b).amax() <= 1e-12);
        }
    }

    #[test]
    fn controllers_vanish_at_perfect_tracking() {
        let h = chain_h();
        let terms = fleet_terms(&[AuvState::default(); 4], &params(4)).unwrap();
        let errors = TrackingErrors {
            eps1: Stacked::zeros(24),
            eps2: Stacked::zeros(24),
        };
        let z = Vec6::zeros();
        let g = FtGains::default();
        assert_eq!(
            ft_backstepping_tau(&errors, &terms, &z, &h, &g, true).unwrap(),
            Stacked::zeros(24)
        );
        assert_eq!(
            baseline_smc_tau(&errors, &terms, &z, &h, &BaselineGains::default()).unwrap(),
            Stacked::zeros(24)
        );
        let psi = vec![vec![1.0 / 9.0; 9]; 4];
        let tau = adaptive_sat_tau(
            &errors,
            &terms,
            &z,
            &h,
            &g,
            &AuxState::zeros(4),
            &[3.0; 4],
            &psi,
        )
        .unwrap();
        assert_eq!(tau, Stacked::zeros(24));
    }

    #[test]
    fn sign_and_smooth_variants_differ_only_in_switching() {
        let h = chain_h();
        let g = FtGains::default();
        let (states, errors, acc) = frozen(7);
        let terms = fleet_terms(&states, &params(4)).unwrap();
        let hard = ft_backstepping_tau(&errors, &terms, &acc, &h, &g, false).unwrap();
        let soft = ft_backstepping_tau(&errors, &terms, &acc, &h, &g, true).unwrap();
        let alpha = virtual_control(&errors.eps1, &g);
        let (_, s2) = sliding_surfaces(&errors.eps1, &errors.eps2, &alpha, &h, None).unwrap();
        let diff = -g.beta_s * (s2.map(sign) - &s2 / (s2.norm() + g.eps_bl));
        assert!((hard - soft - terms.to_torque(&diff)).amax() < 1e-9);

        // flipping s2 flips the switching contribution
        let switch_of = |e: &TrackingErrors| {
            let hard = ft_backstepping_tau(e, &terms, &acc, &h, &g, false).unwrap();
            let mut no_switch = g;
            no_switch.beta_s = 0.0;
            hard - ft_backstepping_tau(e, &terms, &acc, &h, &no_switch, false).unwrap()
        };
        let flipped = TrackingErrors {
            eps1: errors.eps1.clone(),
            eps2: &errors.eps2 - 2.0 * &s2,
        };
        let alpha_check = sliding_surfaces(&flipped.eps1, &flipped.eps2, &alpha, &h, None)
            .unwrap()
            .1;
        assert!((alpha_check + &s2).amax() < 1e-9);
        assert!((switch_of(&errors) + switch_of(&flipped)).amax() < 1e-9);
    }

    #[test]
    fn single_agent_surge_matches_scalar_law() {
        // one pinned agent, level attitude, pure surge: every channel decouples
        let g = FtGains::default();
        let h = DMatrix::from_element(1, 1, 1.0);
        let v = 1.3;
        let state = AuvState::new(Vec6::zeros(), Vec6::new(v, 0., 0., 0., 0., 0.));
        let terms = fleet_terms(&[state], &params(1)).unwrap();
        let (e1, e2, ad) = (-2.0, 0.7, 0.4);
        let mut errors = TrackingErrors {
            eps1: Stacked::zeros(6),
            eps2: Stacked::zeros(6),
        };
        errors.eps1[0] = e1;
        errors.eps2[0] = e2;
        let acc = Vec6::new(ad, 0., 0., 0., 0., 0.);
        let tau = ft_backstepping_tau(&errors, &terms, &acc, &h, &g, false).unwrap();

        let sp = |x: f64, a: f64| x.signum() * x.abs().powf(a);
        let alpha = -(g.k1 * e1 + g.k2 * sp(e1, g.gamma) + g.k3 * sp(e1, g.iota));
        let alpha_dot = -(g.k1
            + g.k2 * g.gamma * e1.abs().powf(g.gamma - 1.0)
            + g.k3 * g.iota * e1.abs().powf(g.iota - 1.0))
            * e2;
        let s2 = e2 - alpha;
        let tau_prime =
            -g.beta_s * s2.signum() - g.k8 * s2 - g.k9 * sp(s2, g.gamma) - g.k10 * sp(s2, g.iota);
        // Φυ = −M⁻¹ D υ along surge (Coriolis and J̇ vanish)
        let phi_nu = -8.0 * v / 27.0;
        let want = 27.0 * (-phi_nu + ad + alpha_dot + tau_prime);
        assert!((tau[0] - want).abs() < 1e-10, "{} vs {want}", tau[0]);
        assert_eq!(tau.rows(1, 5).amax(), 0.0);
    }

    #[test]
    fn baseline_without_switching_is_feedback_linearising() {
        let h = chain_h();
        let (states, errors, acc) = frozen(3);
        let terms = fleet_terms(&states, &params(4)).unwrap();
        let g = BaselineGains {
            beta0: 0.0,
            ..Default::default()
        };
        let tau = baseline_smc_tau(&errors, &terms, &acc, &h, &g).unwrap();
        for i in 0..4 {
            let v = -block(&terms.phi_nu, i) - g.k1 * block(&errors.eps2, i) + acc;
            let want = terms.jpi_inv[i] * v;
            assert!((block(&tau, i) - want).amax() < 1e-9);
        }
    }

    #[test]
    fn singular_attitude_names_the_agent() {
        let mut states = vec![AuvState::default(); 3];
        states[2].eta[4] = 1.5;
        let err = fleet_terms(&states, &params(3)).unwrap_err();
        assert!(matches!(
            err,
            Error::AttitudeSingularity { agent: Some(2), .. }
        ));
    }
}
