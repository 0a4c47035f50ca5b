//! Fixed-step simulation, metrics and the fixed-time bound calculators.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{
    self, check_exponents, AuxState, BaselineGains, DisturbanceBound, FtGains, TrackingErrors,
};
use crate::fuzzy::{self, AdaptiveGains, FuzzyNet};
use crate::topology::{
    consensus_errors, formation_slots, grounded_matrix, FormationGraph, FormationSpec,
};
use crate::vehicle::{self, AuvParams, AuvState};
use crate::{block, set_block, Error, Result, Stacked, Vec6};

/// Reference pose of the virtual leader.
#[derive(Debug, Clone, PartialEq)]
pub enum LeaderTrajectory {
    /// `η^d(t) = [30 − 30e^{−t}, 5t, 2t, 0, 0, 0]`.
    Benchmark,
    Constant {
        pose: Vec6,
    },
    Linear {
        pose: Vec6,
        velocity: Vec6,
    },
}

impl LeaderTrajectory {
    /// `(η^d, η̇^d, η̈^d)` at time `t`.
    pub fn reference(&self, t: f64) -> (Vec6, Vec6, Vec6) {
        match self {
            LeaderTrajectory::Benchmark => leader_reference(t),
            LeaderTrajectory::Constant { pose } => (*pose, Vec6::zeros(), Vec6::zeros()),
            LeaderTrajectory::Linear { pose, velocity } => {
                (pose + velocity * t, *velocity, Vec6::zeros())
            }
        }
    }
}

pub fn leader_reference(t: f64) -> (Vec6, Vec6, Vec6) {
    let e = (-t).exp();
    (
        Vec6::new(30.0 - 30.0 * e, 5.0 * t, 2.0 * t, 0.0, 0.0, 0.0),
        Vec6::new(30.0 * e, 5.0, 2.0, 0.0, 0.0, 0.0),
        Vec6::new(-30.0 * e, 0.0, 0.0, 0.0, 0.0, 0.0),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    FtBackstepping,
    AdaptiveSat,
    BaselineSmc,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::FtBackstepping => "ft_backstepping",
            ControllerKind::AdaptiveSat => "adaptive_sat",
            ControllerKind::BaselineSmc => "baseline_smc",
        }
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ft_backstepping" => Ok(ControllerKind::FtBackstepping),
            "adaptive_sat" => Ok(ControllerKind::AdaptiveSat),
            "baseline_smc" => Ok(ControllerKind::BaselineSmc),
            other => Err(Error::InvalidScenario(format!(
                "unknown controller {other:?} (expected ft_backstepping, adaptive_sat or baseline_smc)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub agents: Vec<AuvParams>,
    pub graph: FormationGraph,
    pub spec: FormationSpec,
    pub leader: LeaderTrajectory,
    pub controller: ControllerKind,
    pub ft_gains: FtGains,
    pub baseline_gains: BaselineGains,
    /// Use the boundary-layer switching term in `ft_backstepping`.
    pub smooth: bool,
    pub fuzzy: FuzzyNet,
    pub disturbance_bound: DisturbanceBound,
    pub dt: f64,
    pub t_end: f64,
    pub initial: Vec<AuvState>,
    pub disturbance_on: bool,
    pub kappa: f64,
    pub l1: f64,
    pub l2: f64,
    pub seed: u64,
}

fn pad(x: f64, y: f64, z: f64) -> Vec6 {
    Vec6::new(x, y, z, 0.0, 0.0, 0.0)
}

impl Scenario {
    /// Four vehicles on the unit-weight chain with agent 1 pinned, leader
    /// `[30 − 30e^{−t}, 5t, 2t, 0, 0, 0]`, disturbance on.
    pub fn benchmark() -> Self {
        let graph = FormationGraph::chain(4);
        let spec = FormationSpec::new(
            &graph,
            [
                ((0, 1), pad(0., 10., 0.)),
                ((1, 2), pad(-10., 0., 0.)),
                ((2, 3), pad(0., -10., 0.)),
            ],
            [(0, pad(20., 0., 0.))],
        )
        .expect("benchmark formation is consistent");
        let initial = [
            [2., 3., 3., 0.3, 0., 0.2],
            [2.5, 3.5, 3., 0.2, 0., 0.25],
            [2., 3., 3., 0.3, 0., 0.2],
            [3., 3., 2., 0.3, 0., 0.2],
        ]
        .iter()
        .map(|e| AuvState::new(Vec6::from_row_slice(e), Vec6::zeros()))
        .collect();
        Self {
            agents: vec![AuvParams::benchmark(); 4],
            graph,
            spec,
            leader: LeaderTrajectory::Benchmark,
            controller: ControllerKind::AdaptiveSat,
            ft_gains: FtGains::default(),
            baseline_gains: BaselineGains::default(),
            smooth: true,
            fuzzy: FuzzyNet::benchmark(),
            disturbance_bound: DisturbanceBound {
                lambda_tilde: vec![0.2; 4],
            },
            dt: 1e-3,
            t_end: 20.0,
            initial,
            disturbance_on: true,
            kappa: 0.5,
            l1: 0.5,
            l2: 0.5,
            seed: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidScenario("sim.dt must be positive".into()));
        }
        if !(self.t_end >= self.dt) || !self.t_end.is_finite() {
            return Err(Error::InvalidScenario(
                "sim.t_end must be at least sim.dt".into(),
            ));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::InvalidScenario(
                "sim.kappa must lie in (0, 1)".into(),
            ));
        }
        if !(self.l1 > 0.0 && self.l2 > 0.0) {
            return Err(Error::InvalidScenario("l1 and l2 must be positive".into()));
        }
        if self.agents.len() != n {
            return Err(Error::InvalidScenario(format!(
                "{} agents configured but the graph has {n} nodes",
                self.agents.len()
            )));
        }
        if self.initial.len() != n {
            return Err(Error::InvalidScenario(format!(
                "{} initial states configured but the graph has {n} nodes",
                self.initial.len()
            )));
        }
        if self.disturbance_bound.lambda_tilde.len() != n {
            return Err(Error::InvalidScenario(format!(
                "{} disturbance bounds configured but the graph has {n} nodes",
                self.disturbance_bound.lambda_tilde.len()
            )));
        }
        if self.fuzzy.n_inputs != 12 {
            return Err(Error::InvalidScenario(
                "fuzzy net must take 12 inputs (eta, nu)".into(),
            ));
        }
        for p in &self.agents {
            p.validate()?;
        }
        self.ft_gains.validate()?;
        self.baseline_gains.validate()?;
        grounded_matrix(&self.graph)?;
        for (i, s) in self.initial.iter().enumerate() {
            if s.eta.iter().chain(s.nu.iter()).any(|v| !v.is_finite()) {
                return Err(Error::InvalidScenario(format!(
                    "initial state of agent {} is not finite",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Number of integration steps; samples are `t_k = k·dt`, `k = 0..=steps`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt + 1e-9).floor() as usize
    }
}

/// One logged instant. Commanded `tau` and applied `u` are those acting over
/// the step that starts here.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub eta: Stacked,
    pub nu: Stacked,
    pub eps1: Stacked,
    pub eps2: Stacked,
    pub tau: Stacked,
    pub u: Stacked,
    pub theta: Vec<f64>,
    pub mu: Stacked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub n_agents: usize,
    pub samples: Vec<Sample>,
}

/// One classical RK4 step of `ẋ = f(t, x)`.
pub fn rk4_step<F>(x: &Stacked, t: f64, dt: f64, mut f: F) -> Result<Stacked>
where
    F: FnMut(f64, &Stacked) -> Result<Stacked>,
{
    let k1 = f(t, x)?;
    rk4_from(x, t, dt, &k1, f)
}

fn rk4_from<F>(x: &Stacked, t: f64, dt: f64, k1: &Stacked, mut f: F) -> Result<Stacked>
where
    F: FnMut(f64, &Stacked) -> Result<Stacked>,
{
    let h = 0.5 * dt;
    let k2 = f(t + h, &(x + h * k1))?;
    let k3 = f(t + h, &(x + h * &k2))?;
    let k4 = f(t + dt, &(x + dt * &k3))?;
    Ok(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

struct Evaluation {
    deriv: Stacked,
    errors: TrackingErrors,
    tau: Stacked,
    u: Stacked,
}

/// Bundle layout: `[η (6n), υ (6n), μ (6n), θ̂ (n)]`.
struct Engine<'a> {
    sc: &'a Scenario,
    h: DMatrix<f64>,
    n: usize,
}

impl<'a> Engine<'a> {
    fn new(sc: &'a Scenario) -> Result<Self> {
        sc.validate()?;
        if sc.controller != ControllerKind::BaselineSmc {
            if let Err(e) = control::check_switching_gain(sc.ft_gains.beta_s, &sc.disturbance_bound)
            {
                log::warn!("{e}");
            }
        }
        let h = grounded_matrix(&sc.graph)?.matrix;
        Ok(Self { sc, h, n: sc.n() })
    }

    fn initial_bundle(&self) -> Stacked {
        let n = self.n;
        let mut x = Stacked::zeros(19 * n);
        for (i, s) in self.sc.initial.iter().enumerate() {
            set_block(&mut x, i, &s.eta);
            set_block(&mut x, n + i, &s.nu);
        }
        x
    }

    fn states(&self, x: &Stacked) -> Vec<AuvState> {
        let n = self.n;
        (0..n)
            .map(|i| AuvState::new(block(x, i), block(x, n + i)))
            .collect()
    }

    fn mu(&self, x: &Stacked) -> AuxState {
        AuxState {
            mu: x.rows(12 * self.n, 6 * self.n).into_owned(),
        }
    }

    fn theta<'x>(&self, x: &'x Stacked) -> &'x [f64] {
        &x.as_slice()[18 * self.n..]
    }

    fn evaluate(&self, t: f64, x: &Stacked) -> Result<Evaluation> {
        let sc = self.sc;
        let n = self.n;
        let at_t = |e: Error| match e {
            Error::AttitudeSingularity { pitch, agent, .. } => Error::AttitudeSingularity {
                pitch,
                agent,
                t: Some(t),
            },
            other => other,
        };
        let states = self.states(x);
        let (eta_d, eta_d_dot, eta_d_ddot) = sc.leader.reference(t);
        let terms = control::fleet_terms(&states, &sc.agents).map_err(at_t)?;
        let (eps1, eps2) = consensus_errors(
            &states,
            &eta_d,
            &eta_d_dot,
            &sc.graph,
            &sc.spec,
            &terms.pose_rates,
        )?;
        let errors = TrackingErrors { eps1, eps2 };
        let mut deriv = Stacked::zeros(19 * n);
        let tau = match sc.controller {
            ControllerKind::FtBackstepping => control::ft_backstepping_tau(
                &errors,
                &terms,
                &eta_d_ddot,
                &self.h,
                &sc.ft_gains,
                sc.smooth,
            )?,
            ControllerKind::BaselineSmc => control::baseline_smc_tau(
                &errors,
                &terms,
                &eta_d_ddot,
                &self.h,
                &sc.baseline_gains,
            )?,
            ControllerKind::AdaptiveSat => {
                let mu = self.mu(x);
                // stages may dip below zero; the adaptive law is only defined on θ̂ ≥ 0
                let theta_proj = project(self.theta(x));
                let theta = theta_proj.as_slice();
                let psi = states
                    .iter()
                    .map(|s| {
                        let z: Vec<f64> = s.eta.iter().chain(s.nu.iter()).copied().collect();
                        fuzzy::basis(&z, &sc.fuzzy)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let tau = control::adaptive_sat_tau(
                    &errors,
                    &terms,
                    &eta_d_ddot,
                    &self.h,
                    &sc.ft_gains,
                    &mu,
                    theta,
                    &psi,
                )?;
                let alpha = control::virtual_control(&errors.eps1, &sc.ft_gains);
                let (_, s2) = control::sliding_surfaces(
                    &errors.eps1,
                    &errors.eps2,
                    &alpha,
                    &self.h,
                    Some(&mu),
                )?;
                let mu_dot = control::aux_derivative(&mu, &tau, &terms, &sc.agents)?;
                deriv.rows_mut(12 * n, 6 * n).copy_from(&mu_dot);
                let theta_dot =
                    fuzzy::adapt_derivative(theta, &s2, &psi, &self.h, &sc.ft_gains.adaptive())?;
                deriv.rows_mut(18 * n, n).copy_from_slice(&theta_dot);
                tau
            }
        };
        let mut u = Stacked::zeros(6 * n);
        for (i, s) in states.iter().enumerate() {
            let p = &sc.agents[i];
            let ui = vehicle::saturate(&block(&tau, i), p.tau_max);
            let d = vehicle::disturbance(t, s, sc.disturbance_on);
            let (_, nu_dot) = vehicle::plant_derivative(s, &ui, &d, p).map_err(|e| e.at(i, t))?;
            set_block(&mut u, i, &ui);
            set_block(&mut deriv, i, &terms.pose_rates[i]);
            set_block(&mut deriv, n + i, &nu_dot);
        }
        Ok(Evaluation {
            deriv,
            errors,
            tau,
            u,
        })
    }

    fn sample(&self, t: f64, x: &Stacked, ev: &Evaluation) -> Sample {
        let n = self.n;
        Sample {
            t,
            eta: x.rows(0, 6 * n).into_owned(),
            nu: x.rows(6 * n, 6 * n).into_owned(),
            eps1: ev.errors.eps1.clone(),
            eps2: ev.errors.eps2.clone(),
            tau: ev.tau.clone(),
            u: ev.u.clone(),
            theta: self.theta(x).to_vec(),
            mu: x.rows(12 * n, 6 * n).into_owned(),
        }
    }

    /// Integrate to `steps·dt`, handing every sample to `observe`.
    fn drive(&self, steps: usize, observe: &mut dyn FnMut(&Sample)) -> Result<()> {
        let dt = self.sc.dt;
        let n = self.n;
        let mut x = self.initial_bundle();
        for k in 0..=steps {
            let t = k as f64 * dt;
            let ev = self.evaluate(t, &x)?;
            observe(&self.sample(t, &x, &ev));
            if k == steps {
                break;
            }
            x = rk4_from(&x, t, dt, &ev.deriv, |ts, xs| {
                self.evaluate(ts, xs).map(|e| e.deriv)
            })?;
            let projected = project(&x.as_slice()[18 * n..]);
            x.rows_mut(18 * n, n).copy_from_slice(&projected);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("state diverged at t = {} s", t + dt)));
            }
        }
        Ok(())
    }
}

fn project(theta: &[f64]) -> Vec<f64> {
    theta.iter().map(|t| t.max(0.0)).collect()
}

/// Time for `θ̂` to reach exactly zero from `theta0` with `s₂ ≡ 0`, stepping
/// as the simulator does; `None` if it is still positive at `t_max`.
pub fn theta_decay_time(
    theta0: f64,
    g: &AdaptiveGains,
    dt: f64,
    t_max: f64,
) -> Result<Option<f64>> {
    let h = DMatrix::from_element(1, 1, 1.0);
    let s2 = Stacked::zeros(6);
    let psi = [vec![1.0]];
    let mut x = Stacked::from_element(1, theta0.max(0.0));
    let steps = (t_max / dt).ceil() as usize;
    for k in 0..steps {
        if x[0] == 0.0 {
            return Ok(Some(k as f64 * dt));
        }
        x = rk4_step(&x, k as f64 * dt, dt, |_, x| {
            fuzzy::adapt_derivative(&project(x.as_slice()), &s2, &psi, &h, g).map(Stacked::from_vec)
        })?;
        x[0] = x[0].max(0.0);
    }
    Ok(if x[0] == 0.0 {
        Some(steps as f64 * dt)
    } else {
        None
    })
}

/// Simulate `t ∈ [0, t_end]` and log every step.
pub fn run(sc: &Scenario) -> Result<RunLog> {
    let engine = Engine::new(sc)?;
    let mut samples = Vec::with_capacity(sc.steps() + 1);
    engine.drive(sc.steps(), &mut |s| samples.push(s.clone()))?;
    Ok(RunLog {
        n_agents: sc.n(),
        samples,
    })
}

/// Simulate `t ∈ [0, t_end]` without keeping the log.
pub fn run_with(sc: &Scenario, observe: &mut dyn FnMut(&Sample)) -> Result<()> {
    let engine = Engine::new(sc)?;
    engine.drive(sc.steps(), observe)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// First `t` after which `‖ε̄₁‖∞ < tol` for the rest of the run; `None` if
    /// the run ends above tolerance.
    pub settling_time: Option<f64>,
    pub ise: f64,
    /// Peak `|τ|` over samples and channels, commanded (before the clip).
    pub peak_torque: f64,
    pub peak_applied: f64,
    /// Total variation of `τ` summed over channels.
    pub chattering: f64,
}

/// Streaming form of [`compute_metrics`].
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    tol: f64,
    first_t: Option<f64>,
    last_above: Option<usize>,
    last_t: f64,
    settle_after: Option<f64>,
    count: usize,
    prev: Option<(f64, f64, Stacked)>,
    ise: f64,
    peak_torque: f64,
    peak_applied: f64,
    chattering: f64,
}

impl MetricsAccumulator {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            first_t: None,
            last_above: None,
            last_t: 0.0,
            settle_after: None,
            count: 0,
            prev: None,
            ise: 0.0,
            peak_torque: 0.0,
            peak_applied: 0.0,
            chattering: 0.0,
        }
    }

    pub fn push(&mut self, s: &Sample) {
        let err_sq = s.eps1.norm_squared();
        if self.first_t.is_none() {
            self.first_t = Some(s.t);
        }
        if s.eps1.amax() >= self.tol {
            self.last_above = Some(self.count);
            self.settle_after = None;
        } else if self.settle_after.is_none() {
            self.settle_after = Some(s.t);
        }
        if let Some((t0, e0, tau0)) = &self.prev {
            self.ise += 0.5 * (s.t - t0) * (e0 + err_sq);
            self.chattering += (&s.tau - tau0).abs().sum();
        }
        self.peak_torque = self.peak_torque.max(s.tau.amax());
        self.peak_applied = self.peak_applied.max(s.u.amax());
        self.prev = Some((s.t, err_sq, s.tau.clone()));
        self.last_t = s.t;
        self.count += 1;
    }

    pub fn finish(&self) -> Metrics {
        let settling_time = match self.last_above {
            None => self.first_t,
            Some(k) if k + 1 == self.count => None,
            Some(_) => self.settle_after,
        };
        Metrics {
            settling_time,
            ise: self.ise,
            peak_torque: self.peak_torque,
            peak_applied: self.peak_applied,
            chattering: self.chattering,
        }
    }
}

pub fn compute_metrics(log: &RunLog, tol: f64) -> Result<Metrics> {
    if log.samples.is_empty() {
        return Err(Error::Domain(
            "cannot compute metrics of an empty log".into(),
        ));
    }
    let mut acc = MetricsAccumulator::new(tol);
    for s in &log.samples {
        acc.push(s);
    }
    Ok(acc.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSample {
    pub t: f64,
    pub v1: f64,
    /// `½s₂ᵀs₂ + ½θ̃ᵀθ̃` with the estimated `θ`.
    pub v3: f64,
    /// `½s₂ᵀs₂` alone.
    pub v3_s: f64,
    pub v: f64,
    /// `V₁ + ½s₂ᵀs₂`, the trace the descent check runs on.
    pub v_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovTrace {
    /// Per-agent `θ` estimate: running supremum of `θ̂` plus its final value.
    pub theta_est: Vec<f64>,
    pub samples: Vec<LyapunovSample>,
}

pub fn lyapunov_trace(log: &RunLog, sc: &Scenario) -> Result<LyapunovTrace> {
    let h = grounded_matrix(&sc.graph)?.matrix;
    let n = log.n_agents;
    let mut theta_est = vec![0.0; n];
    for s in &log.samples {
        for (e, th) in theta_est.iter_mut().zip(&s.theta) {
            *e = th.max(*e);
        }
    }
    if let Some(last) = log.samples.last() {
        for (e, th) in theta_est.iter_mut().zip(&last.theta) {
            *e += th;
        }
    }
    let with_mu = sc.controller == ControllerKind::AdaptiveSat;
    let samples = log
        .samples
        .iter()
        .map(|s| {
            let alpha = control::virtual_control(&s.eps1, &sc.ft_gains);
            let mu = AuxState { mu: s.mu.clone() };
            let (s1, s2) = control::sliding_surfaces(
                &s.eps1,
                &s.eps2,
                &alpha,
                &h,
                if with_mu { Some(&mu) } else { None },
            )?;
            let v1 = 0.5 * s1.norm_squared();
            let v3_s = 0.5 * s2.norm_squared();
            let tilde: f64 = theta_est
                .iter()
                .zip(&s.theta)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let v3 = v3_s + 0.5 * tilde;
            Ok(LyapunovSample {
                t: s.t,
                v1,
                v3,
                v3_s,
                v: v1 + v3,
                v_s: v1 + v3_s,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LyapunovTrace { theta_est, samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Lemma1,
    Lemma2,
}

/// Rate constants of the two Lyapunov comparison inequalities, with
/// `λ_min(H)` standing in for the grounded Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub zeta1: f64,
    pub zeta2: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub chi1: f64,
    pub chi2: f64,
}

pub fn bound_constants(g: &FtGains, lambda_min: f64, l1: f64, l2: f64) -> Result<BoundConstants> {
    check_exponents(g.gamma, g.iota)?;
    if !(lambda_min > 0.0) {
        return Err(Error::Domain(format!(
            "lambda_min must be positive, got {lambda_min}"
        )));
    }
    if !(l1 > 0.0 && l2 > 0.0) {
        return Err(Error::Domain("l1 and l2 must be positive".into()));
    }
    let zeta1 = g.k2.min(lambda_min * g.k9);
    let zeta2 = g.k3.min(lambda_min * g.k10);
    let nu1 = (g.k9 * lambda_min).min(l2 * g.w1);
    let nu2 = (g.k10 * lambda_min).min(l2 * g.w2);
    // the second-stage gains k5, k6 are taken equal to k2, k3
    let chi1 = nu1.min(g.k2);
    let chi2 = g.k3.min(nu2);
    Ok(BoundConstants {
        zeta1,
        zeta2,
        nu1,
        nu2,
        chi1,
        chi2,
    })
}

/// `2/(c₁ 2^{(γ+1)/2} (1−γ)) + 2/(c₂ 2^{(ι+1)/2} (ι−1))`.
pub fn fixed_time_bound(c1: f64, c2: f64, gamma: f64, iota: f64) -> Result<f64> {
    check_exponents(gamma, iota)?;
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(Error::Domain(format!(
            "rate constants must be positive, got {c1}, {c2}"
        )));
    }
    Ok(2.0 / (c1 * 2f64.powf((gamma + 1.0) / 2.0) * (1.0 - gamma))
        + 2.0 / (c2 * 2f64.powf((iota + 1.0) / 2.0) * (iota - 1.0)))
}

pub fn settling_bound(
    g: &FtGains,
    lambda_min: f64,
    kind: BoundKind,
    kappa: f64,
    l1: f64,
    l2: f64,
) -> Result<f64> {
    let c = bound_constants(g, lambda_min, l1, l2)?;
    match kind {
        BoundKind::Lemma1 => fixed_time_bound(c.zeta1, c.zeta2, g.gamma, g.iota),
        BoundKind::Lemma2 => {
            if !(kappa > 0.0 && kappa < 1.0) {
                return Err(Error::Domain(format!(
                    "kappa must lie in (0, 1), got {kappa}"
                )));
            }
            Ok(fixed_time_bound(c.chi1, c.chi2, g.gamma, g.iota)? / kappa)
        }
    }
}

/// `min{χ₁^{−1/p} (φ/(1−κ))^{1/p}, χ₂^{−1/q} (φ/(1−κ))^{1/q}}`.
pub fn residual_radius(
    chi1: f64,
    chi2: f64,
    p: f64,
    q: f64,
    varphi: f64,
    kappa: f64,
) -> Result<f64> {
    if !(chi1 > 0.0 && chi2 > 0.0) {
        return Err(Error::Domain(format!(
            "chi must be positive, got {chi1}, {chi2}"
        )));
    }
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Domain(format!(
            "kappa must lie in (0, 1), got {kappa}"
        )));
    }
    if !(p > 1.0) || !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!(
            "need p > 1 and 0 < q < 1, got p = {p}, q = {q}"
        )));
    }
    if !(varphi > 0.0) || !varphi.is_finite() {
        return Err(Error::Domain(format!(
            "varphi must be positive, got {varphi}"
        )));
    }
    let r = varphi / (1.0 - kappa);
    Ok((chi1.powf(-1.0 / p) * r.powf(1.0 / p)).min(chi2.powf(-1.0 / q) * r.powf(1.0 / q)))
}

/// `σ = ½λ_max(H) + l₁ Σ_i (w₁ θ_i^{1+γ} + w₂ θ_i^{1+ι})`.
pub fn sigma(g: &FtGains, lambda_max: f64, l1: f64, theta: &[f64]) -> f64 {
    0.5 * lambda_max
        + l1 * theta
            .iter()
            .map(|&th| g.w1 * th.powf(1.0 + g.gamma) + g.w2 * th.powf(1.0 + g.iota))
            .sum::<f64>()
}

/// Residual level for `V` under the combined inequality
/// `V̇ ≤ −2^q χ₁ V^q − 2^p χ₂ V^p + σ`, `q = (γ+1)/2`, `p = (ι+1)/2`.
pub fn lyapunov_residual_level(sc: &Scenario, theta: &[f64]) -> Result<(f64, f64)> {
    let grounded = grounded_matrix(&sc.graph)?;
    let g = &sc.ft_gains;
    let c = bound_constants(g, grounded.lambda_min, sc.l1, sc.l2)?;
    let p = (g.iota + 1.0) / 2.0;
    let q = (g.gamma + 1.0) / 2.0;
    let s = sigma(g, grounded.lambda_max, sc.l1, theta);
    let level = residual_radius(
        2f64.powf(p) * c.chi2,
        2f64.powf(q) * c.chi1,
        p,
        q,
        s,
        sc.kappa,
    )?;
    Ok((level, s))
}

/// Steps `k` at which `V(t_{k+1}) > V(t_k) + tol` although `V(t_k)` exceeds `level`.
pub fn descent_violations(v: &[f64], level: f64, tol: f64) -> Vec<usize> {
    v.windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] > level && w[1] > w[0] + tol)
        .map(|(k, _)| k)
        .collect()
}

/// Everything `bound` reports for a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub lambda_min: f64,
    pub lambda_max: f64,
    #[serde(flatten)]
    pub constants: BoundConstants,
    pub kappa: f64,
    pub t_lemma1: f64,
    pub t_lemma2: f64,
    /// `σ` with `θ = 0`.
    pub sigma: f64,
    pub residual_radius: f64,
}

pub fn bound_report(sc: &Scenario) -> Result<BoundReport> {
    let grounded = grounded_matrix(&sc.graph)?;
    let g = &sc.ft_gains;
    let constants = bound_constants(g, grounded.lambda_min, sc.l1, sc.l2)?;
    let t_lemma1 = settling_bound(
        g,
        grounded.lambda_min,
        BoundKind::Lemma1,
        sc.kappa,
        sc.l1,
        sc.l2,
    )?;
    let t_lemma2 = settling_bound(
        g,
        grounded.lambda_min,
        BoundKind::Lemma2,
        sc.kappa,
        sc.l1,
        sc.l2,
    )?;
    let (residual_radius, sigma) = lyapunov_residual_level(sc, &vec![0.0; sc.n()])?;
    Ok(BoundReport {
        lambda_min: grounded.lambda_min,
        lambda_max: grounded.lambda_max,
        constants,
        kappa: sc.kappa,
        t_lemma1,
        t_lemma2,
        sigma,
        residual_radius,
    })
}

/// Tolerance on `‖ε̄₁‖∞` used by the sweep.
pub const SWEEP_TOL: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub trial: usize,
    /// `"scale"` for the listed factors, `"random"` for seeded draws.
    pub kind: String,
    pub scale: f64,
    pub settling_time: Option<f64>,
    pub t_bound: f64,
    pub within_bound: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub seed: u64,
    pub tol: f64,
    pub horizon: f64,
    pub t_bound: f64,
    pub rows: Vec<SweepRow>,
    /// Largest over smallest positive settling time among settled trials.
    pub settling_ratio: Option<f64>,
}

/// Pose and velocity error of one agent.
type StateError = (Vec6, Vec6);

/// Initial errors of `sc` relative to the formation slots at `t = 0`
/// (poses and body velocities matching the leader's rate).
fn slot_offsets(sc: &Scenario) -> Result<(Vec<AuvState>, Vec<StateError>)> {
    let (pose, vel, _) = sc.leader.reference(0.0);
    let slots = formation_slots(&sc.graph, &sc.spec, &pose)?;
    let mut base = Vec::with_capacity(slots.len());
    let mut err = Vec::with_capacity(slots.len());
    for (i, (slot, init)) in slots.iter().zip(&sc.initial).enumerate() {
        let eta2 = slot.fixed_rows::<3>(3).into_owned();
        let nu = vehicle::jacobian_inverse(&eta2).map_err(|e| e.at(i, 0.0))? * vel;
        let s = AuvState::new(*slot, nu);
        err.push((init.eta - s.eta, init.nu - s.nu));
        base.push(s);
    }
    Ok((base, err))
}

fn trial_settling(sc: &Scenario, horizon_steps: usize) -> Result<Option<f64>> {
    let engine = Engine::new(sc)?;
    let mut acc = MetricsAccumulator::new(SWEEP_TOL);
    engine.drive(horizon_steps, &mut |s| acc.push(s))?;
    Ok(acc.finish().settling_time)
}

/// Rerun `sc` with the initial error scaled by each factor and with
/// `n_random` seeded draws (log-uniform scale in `[0.1, 10]`, random signs).
/// Each trial runs for `max(t_end, T_bound)`.
pub fn mc_sweep(sc: &Scenario, scales: &[f64], n_random: usize) -> Result<SweepTable> {
    sc.validate()?;
    if scales.is_empty() && n_random == 0 {
        return Err(Error::InvalidScenario(
            "sweep needs at least one trial".into(),
        ));
    }
    if let Some(s) = scales.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(Error::InvalidScenario(format!(
            "scale {s} must be finite and non-negative"
        )));
    }
    let grounded = grounded_matrix(&sc.graph)?;
    let t_bound = settling_bound(
        &sc.ft_gains,
        grounded.lambda_min,
        BoundKind::Lemma2,
        sc.kappa,
        sc.l1,
        sc.l2,
    )?;
    let horizon = sc.t_end.max(t_bound);
    let steps = (horizon / sc.dt).ceil() as usize;
    let (base, err) = slot_offsets(sc)?;

    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let mut trials: Vec<(&'static str, f64, Vec<AuvState>)> = Vec::new();
    for &s in scales {
        let init = if s == 1.0 {
            sc.initial.clone()
        } else {
            base.iter()
                .zip(&err)
                .map(|(b, (de, dn))| AuvState::new(b.eta + s * de, b.nu + s * dn))
                .collect()
        };
        trials.push(("scale", s, init));
    }
    for _ in 0..n_random {
        let s = 10f64.powf(rng.gen_range(-1.0..=1.0));
        let mut flip = || if rng.gen::<bool>() { -1.0 } else { 1.0 };
        let init = base
            .iter()
            .zip(&err)
            .map(|(b, (de, dn))| {
                let de = de.map(|v| v * flip());
                let dn = dn.map(|v| v * flip());
                AuvState::new(b.eta + s * de, b.nu + s * dn)
            })
            .collect();
        trials.push(("random", s, init));
    }

    let rows: Vec<SweepRow> = trials
        .into_iter()
        .enumerate()
        .map(|(trial, (kind, scale, initial))| {
            let trial_sc = Scenario {
                initial,
                ..sc.clone()
            };
            let (settling_time, error) = match trial_settling(&trial_sc, steps) {
                Ok(t) => (t, None),
                Err(e) => {
                    log::warn!("sweep trial {trial} failed: {e}");
                    (None, Some(e.to_string()))
                }
            };
            SweepRow {
                trial,
                kind: kind.to_string(),
                scale,
                settling_time,
                t_bound,
                within_bound: settling_time.is_some_and(|t| t <= t_bound),
                error,
            }
        })
        .collect();
    let settled: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.settling_time)
        .filter(|&t| t > 0.0)
        .collect();
    let settling_ratio = if settled.is_empty() {
        None
    } else {
        let max = settled.iter().cloned().fold(f64::MIN, f64::max);
        let min = settled.iter().cloned().fold(f64::MAX, f64::min);
        Some(max / min)
    };
    Ok(SweepTable {
        seed: sc.seed,
        tol: SWEEP_TOL,
        horizon,
        t_bound,
        rows,
        settling_ratio,
    })
}

/// Initial states placed exactly on the formation slots at `t = 0`.
pub fn slot_initial_states(sc: &Scenario) -> Result<Vec<AuvState>> {
    Ok(slot_offsets(sc)?.0)
}
