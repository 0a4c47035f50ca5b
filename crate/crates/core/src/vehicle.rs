//! Six-DOF vehicle model: `η̇ = J(η₂) υ`, `M υ̇ + C(υ) υ + D υ = u + d`.
//!
//! Diagonal added mass, linear drag and neutral buoyancy. Euler angles use
//! the ZYX (yaw-pitch-roll) convention.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Mat6, Result, Vec6};

/// Pitch must stay this far from ±π/2 for the Euler-rate map to be used.
pub const PITCH_MARGIN: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuvParams {
    /// kg
    pub mass: f64,
    /// `I_x, I_y, I_z` in kg·m²
    pub inertia: [f64; 3],
    /// Linear drag coefficients, stored negative as tabulated.
    pub lin_drag: [f64; 6],
    /// Added-mass coefficients, stored negative as tabulated.
    pub added_mass: [f64; 6],
    /// Per-channel actuator limit (N, N·m).
    pub tau_max: f64,
}

impl AuvParams {
    /// The benchmark vehicle used in every default scenario.
    pub fn benchmark() -> Self {
        Self {
            mass: 20.0,
            inertia: [20.0, 30.0, 35.0],
            lin_drag: [-8.0, -10.0, -9.0, -0.2, -0.25, -0.15],
            added_mass: [-7.0, -8.0, -6.0, -20.0, -30.0, -35.0],
            tau_max: 300.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.mass,
            self.inertia[0],
            self.inertia[1],
            self.inertia[2],
            self.tau_max,
        ];
        if all.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidParams(
                "mass, inertia and tau_max must be positive and finite".into(),
            ));
        }
        if self
            .lin_drag
            .iter()
            .chain(&self.added_mass)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidParams(
                "non-finite hydrodynamic coefficient".into(),
            ));
        }
        mass_matrix(self).map(|_| ())
    }

    fn rigid_diag(&self) -> [f64; 6] {
        let [ix, iy, iz] = self.inertia;
        [self.mass, self.mass, self.mass, ix, iy, iz]
    }

    /// Diagonal of `M`, unchecked.
    fn mass_diag(&self) -> Vec6 {
        let r = self.rigid_diag();
        Vec6::from_fn(|k, _| r[k] - self.added_mass[k])
    }
}

impl Default for AuvParams {
    fn default() -> Self {
        Self::benchmark()
    }
}

/// Pose `[x, y, z, φ, θ, ψ]` and body twist `[u, v, w, p, q, r]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AuvState {
    pub eta: Vec6,
    pub nu: Vec6,
}

impl AuvState {
    pub fn new(eta: Vec6, nu: Vec6) -> Self {
        Self { eta, nu }
    }

    pub fn attitude(&self) -> Vector3<f64> {
        self.eta.fixed_rows::<3>(3).into_owned()
    }
}

pub fn mass_matrix(p: &AuvParams) -> Result<Mat6> {
    let diag = p.mass_diag();
    if let Some(k) = (0..6).find(|&k| !(diag[k] > 0.0)) {
        return Err(Error::NonPositiveInertia {
            channel: k,
            value: diag[k],
        });
    }
    Ok(Mat6::from_diagonal(&diag))
}

/// Skew operator: `skew(a) b = a × b`.
pub fn skew(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// Rigid-body plus added-mass Coriolis matrix for diagonal `M`; skew-symmetric.
pub fn coriolis_matrix(p: &AuvParams, nu: &Vec6) -> Mat6 {
    let m = p.mass_diag();
    let lin = Vector3::new(m[0] * nu[0], m[1] * nu[1], m[2] * nu[2]);
    let ang = Vector3::new(m[3] * nu[3], m[4] * nu[4], m[5] * nu[5]);
    let s_lin = -skew(&lin);
    let mut c = Mat6::zeros();
    c.fixed_view_mut::<3, 3>(0, 3).copy_from(&s_lin);
    c.fixed_view_mut::<3, 3>(3, 0).copy_from(&s_lin);
    c.fixed_view_mut::<3, 3>(3, 3).copy_from(&(-skew(&ang)));
    c
}

pub fn damping_matrix(p: &AuvParams) -> Mat6 {
    Mat6::from_diagonal(&-Vec6::from_row_slice(&p.lin_drag))
}

/// Body-to-inertial rotation `R = Rz(ψ) Ry(θ) Rx(φ)`.
pub fn rotation(eta2: &Vector3<f64>) -> Matrix3<f64> {
    let (sf, cf) = eta2.x.sin_cos();
    let (st, ct) = eta2.y.sin_cos();
    let (sp, cp) = eta2.z.sin_cos();
    Matrix3::new(
        cp * ct,
        -sp * cf + cp * st * sf,
        sp * sf + cp * cf * st,
        sp * ct,
        cp * cf + sf * st * sp,
        -cp * sf + st * sp * cf,
        -st,
        ct * sf,
        ct * cf,
    )
}

fn check_pitch(eta2: &Vector3<f64>) -> Result<()> {
    let pitch = eta2.y;
    if !eta2.iter().all(|v| v.is_finite())
        || pitch.abs() >= std::f64::consts::FRAC_PI_2 - PITCH_MARGIN
    {
        return Err(Error::AttitudeSingularity {
            pitch,
            agent: None,
            t: None,
        });
    }
    Ok(())
}

/// Euler-rate map `T(φ, θ)`: `[φ̇, θ̇, ψ̇] = T ω`.
pub fn euler_rate_map(eta2: &Vector3<f64>) -> Result<Matrix3<f64>> {
    check_pitch(eta2)?;
    let (sf, cf) = eta2.x.sin_cos();
    let (st, ct) = eta2.y.sin_cos();
    let tt = st / ct;
    Ok(Matrix3::new(
        1.0,
        sf * tt,
        cf * tt,
        0.0,
        cf,
        -sf,
        0.0,
        sf / ct,
        cf / ct,
    ))
}

/// `T⁻¹(φ, θ)`: body rates from Euler-angle rates.
pub fn euler_rate_map_inverse(eta2: &Vector3<f64>) -> Result<Matrix3<f64>> {
    check_pitch(eta2)?;
    let (sf, cf) = eta2.x.sin_cos();
    let (st, ct) = eta2.y.sin_cos();
    Ok(Matrix3::new(
        1.0,
        0.0,
        -st,
        0.0,
        cf,
        sf * ct,
        0.0,
        -sf,
        cf * ct,
    ))
}

/// `J⁻¹ = diag(Rᵀ, T⁻¹)`.
pub fn jacobian_inverse(eta2: &Vector3<f64>) -> Result<Mat6> {
    let ti = euler_rate_map_inverse(eta2)?;
    let mut j = Mat6::zeros();
    j.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&rotation(eta2).transpose());
    j.fixed_view_mut::<3, 3>(3, 3).copy_from(&ti);
    Ok(j)
}

/// `J(η₂) = diag(R, T)`.
pub fn jacobian(eta2: &Vector3<f64>) -> Result<Mat6> {
    let t = euler_rate_map(eta2)?;
    let mut j = Mat6::zeros();
    j.fixed_view_mut::<3, 3>(0, 0).copy_from(&rotation(eta2));
    j.fixed_view_mut::<3, 3>(3, 3).copy_from(&t);
    Ok(j)
}

/// Time derivative `J̇` along the motion with body twist `nu`.
pub fn jacobian_rate(eta2: &Vector3<f64>, nu: &Vec6) -> Result<Mat6> {
    let t = euler_rate_map(eta2)?;
    let omega = Vector3::new(nu[3], nu[4], nu[5]);
    let rates = t * omega;
    let (sf, cf) = eta2.x.sin_cos();
    let (st, ct) = eta2.y.sin_cos();
    let tt = st / ct;
    let sec2 = 1.0 / (ct * ct);
    let d_phi = Matrix3::new(
        0.0,
        cf * tt,
        -sf * tt,
        0.0,
        -sf,
        -cf,
        0.0,
        cf / ct,
        -sf / ct,
    );
    let d_theta = Matrix3::new(
        0.0,
        sf * sec2,
        cf * sec2,
        0.0,
        0.0,
        0.0,
        0.0,
        sf * st * sec2,
        cf * st * sec2,
    );
    let t_dot = d_phi * rates.x + d_theta * rates.y;
    let r_dot = rotation(eta2) * skew(&omega);
    let mut jd = Mat6::zeros();
    jd.fixed_view_mut::<3, 3>(0, 0).copy_from(&r_dot);
    jd.fixed_view_mut::<3, 3>(3, 3).copy_from(&t_dot);
    Ok(jd)
}

/// Benchmark disturbance; angular terms use body rates `p, q, r`.
pub fn disturbance(t: f64, state: &AuvState, enabled: bool) -> Vec6 {
    if !enabled {
        return Vec6::zeros();
    }
    let nu = &state.nu;
    let (vx, vy, vz) = (nu[0], nu[1], nu[2]);
    let (wx, wy, wz) = (nu[3], nu[4], nu[5]);
    let (s, c) = t.sin_cos();
    Vec6::new(
        2.5 * s - 0.5 * vx * vx - 0.7 * (vx * vy).sin(),
        2.5 * c + 0.1 * vx * vx + 0.5 * vy.sin(),
        2.5 * s + 0.7 * vx * vx + 0.8 * vz.sin(),
        0.5 * s + 0.2 * wx.powi(3),
        0.5 * c - 0.2 * wy * wy,
        0.5 * s - 0.4 * wz.powi(3),
    )
}

/// Hard actuator clip applied by the plant.
pub fn saturate(tau: &Vec6, tau_max: f64) -> Vec6 {
    tau.map(|x| {
        if x.abs() >= tau_max {
            tau_max.copysign(x)
        } else {
            x
        }
    })
}

/// `(η̇, υ̇)` for applied input `u` and disturbance `d`.
pub fn plant_derivative(
    state: &AuvState,
    u: &Vec6,
    d: &Vec6,
    p: &AuvParams,
) -> Result<(Vec6, Vec6)> {
    let j = jacobian(&state.attitude())?;
    let m = mass_matrix(p)?;
    let rhs = u + d - coriolis_matrix(p, &state.nu) * state.nu - damping_matrix(p) * state.nu;
    let nu_dot = rhs.component_div(&m.diagonal());
    Ok((j * state.nu, nu_dot))
}
