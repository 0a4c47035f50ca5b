//! JSON scenario files.
//!
//! Every section is optional; omitted sections and fields fall back to the
//! benchmark scenario. Unknown keys are rejected. Agent indices are 1-based.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::control::{BaselineGains, DisturbanceBound, FtGains};
use crate::fuzzy::FuzzyNet;
use crate::sim::{ControllerKind, LeaderTrajectory, Scenario};
use crate::topology::{FormationGraph, FormationSpec};
use crate::vehicle::{AuvParams, AuvState};
use crate::Vec6;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// Malformed document; `path` is a JSON pointer to the offending key.
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("validation error: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub agents: Option<Vec<AgentConfig>>,
    pub graph: Option<GraphConfig>,
    pub formation: Option<FormationConfig>,
    pub leader: Option<LeaderConfig>,
    pub controller: ControllerConfig,
    pub fuzzy: FuzzyConfig,
    pub sim: SimConfig,
    pub initial: Option<Vec<InitialConfig>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub mass: f64,
    pub inertia: [f64; 3],
    pub lin_drag: [f64; 6],
    pub added_mass: [f64; 6],
    pub tau_max: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        let p = AuvParams::benchmark();
        Self {
            mass: p.mass,
            inertia: p.inertia,
            lin_drag: p.lin_drag,
            added_mass: p.added_mass,
            tau_max: p.tau_max,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub adjacency: Vec<Vec<f64>>,
    pub pinning: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffsetConfig {
    pub from: usize,
    pub to: usize,
    /// Three position components, or all six.
    pub delta: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderOffsetConfig {
    pub agent: usize,
    pub delta: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormationConfig {
    pub offsets: Vec<OffsetConfig>,
    pub leader_offsets: Vec<LeaderOffsetConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(
    tag = "type",
    content = "params",
    rename_all = "snake_case",
    deny_unknown_fields
)]
pub enum LeaderConfig {
    Benchmark,
    Constant { pose: [f64; 6] },
    Linear { pose: [f64; 6], velocity: [f64; 6] },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainsConfig {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k8: f64,
    pub k9: f64,
    pub k10: f64,
    pub gamma: f64,
    pub iota: f64,
    pub beta_s: f64,
    pub eps_bl: f64,
    pub eps_sing: f64,
    pub w1: f64,
    pub w2: f64,
    /// Baseline switching gain; the baseline shares `k1` and `eps_bl`.
    pub beta0: f64,
}

impl Default for GainsConfig {
    fn default() -> Self {
        let g = FtGains::default();
        Self {
            k1: g.k1,
            k2: g.k2,
            k3: g.k3,
            k8: g.k8,
            k9: g.k9,
            k10: g.k10,
            gamma: g.gamma,
            iota: g.iota,
            beta_s: g.beta_s,
            eps_bl: g.eps_bl,
            eps_sing: g.eps_sing,
            w1: g.w1,
            w2: g.w2,
            beta0: BaselineGains::default().beta0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub name: ControllerKind,
    pub gains: GainsConfig,
    /// Boundary-layer switching for `ft_backstepping`.
    pub smooth: bool,
    /// Per-agent disturbance bounds; one value is broadcast to every agent.
    pub lambda_tilde: Vec<f64>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            name: ControllerKind::AdaptiveSat,
            gains: GainsConfig::default(),
            smooth: true,
            lambda_tilde: vec![0.2],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FuzzyConfig {
    pub centers: Vec<f64>,
    pub width: f64,
}

impl Default for FuzzyConfig {
    fn default() -> Self {
        let f = FuzzyNet::benchmark();
        Self {
            centers: f.centers,
            width: f.width,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub kappa: f64,
    pub l1: f64,
    pub l2: f64,
    pub disturbance_on: bool,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 20.0,
            kappa: 0.5,
            l1: 0.5,
            l2: 0.5,
            disturbance_on: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub eta: [f64; 6],
    #[serde(default)]
    pub nu: [f64; 6],
}

/// Parse a document without building the scenario.
pub fn parse_document(text: &str) -> Result<ConfigFile, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = json_pointer(e.path());
        let inner = e.into_inner();
        // strip serde_json's " at line x column y" suffix; the pointer is more useful
        let message = inner.to_string();
        let message = match message.rfind(" at line ") {
            Some(k) if inner.line() > 0 => message[..k].to_string(),
            _ => message,
        };
        ConfigError::Schema { path, message }
    })
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => {
                out.push('/');
                out.push_str(&key.replace('~', "~0").replace('/', "~1"));
            }
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

pub fn parse_config(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<Scenario, ConfigError> {
    parse_document(text)?.into_scenario()
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation(msg.into())
}

fn delta6(delta: &[f64], at: &str) -> Result<Vec6, ConfigError> {
    match delta.len() {
        3 => Ok(Vec6::new(delta[0], delta[1], delta[2], 0.0, 0.0, 0.0)),
        6 => Ok(Vec6::from_column_slice(delta)),
        k => Err(invalid(format!(
            "{at}.delta must have 3 or 6 entries, got {k}"
        ))),
    }
}

fn agent_index(i: usize, n: usize, at: &str) -> Result<usize, ConfigError> {
    if i == 0 || i > n {
        return Err(invalid(format!("{at}: agent {i} is outside 1..={n}")));
    }
    Ok(i - 1)
}

impl ConfigFile {
    pub fn into_scenario(self) -> Result<Scenario, ConfigError> {
        let bench = Scenario::benchmark();
        let custom_graph = self.graph.is_some();

        let graph = match &self.graph {
            None => bench.graph.clone(),
            Some(g) => {
                let n = g.adjacency.len();
                if let Some((i, row)) = g.adjacency.iter().enumerate().find(|(_, r)| r.len() != n) {
                    return Err(invalid(format!(
                        "graph.adjacency row {i} has {} entries, expected {n}",
                        row.len()
                    )));
                }
                if g.pinning.len() != n {
                    return Err(invalid(format!(
                        "graph.pinning has {} entries, expected {n}",
                        g.pinning.len()
                    )));
                }
                let flat: Vec<f64> = g.adjacency.iter().flatten().copied().collect();
                FormationGraph::new(
                    DMatrix::from_row_slice(n, n, &flat),
                    DVector::from_vec(g.pinning.clone()),
                )
                .map_err(|e| invalid(format!("graph: {e}")))?
            }
        };
        let n = graph.n();

        let spec = match &self.formation {
            None if custom_graph => {
                return Err(invalid("formation is required when graph is given"));
            }
            None => bench.spec.clone(),
            Some(f) => {
                let mut offsets = Vec::with_capacity(f.offsets.len());
                for (k, o) in f.offsets.iter().enumerate() {
                    let at = format!("formation.offsets[{k}]");
                    let i = agent_index(o.from, n, &at)?;
                    let j = agent_index(o.to, n, &at)?;
                    offsets.push(((i, j), delta6(&o.delta, &at)?));
                }
                let mut leader = Vec::with_capacity(f.leader_offsets.len());
                for (k, o) in f.leader_offsets.iter().enumerate() {
                    let at = format!("formation.leader_offsets[{k}]");
                    leader.push((agent_index(o.agent, n, &at)?, delta6(&o.delta, &at)?));
                }
                FormationSpec::new(&graph, offsets, leader)
                    .map_err(|e| invalid(format!("formation: {e}")))?
            }
        };

        let agents = match self.agents {
            None => vec![AuvParams::benchmark(); n],
            Some(list) if list.len() == 1 => vec![agent_params(&list[0]); n],
            Some(list) if list.len() == n => list.iter().map(agent_params).collect(),
            Some(list) => {
                return Err(invalid(format!(
                    "agents has {} entries, expected 1 or {n}",
                    list.len()
                )));
            }
        };

        let initial = match self.initial {
            None if custom_graph => {
                return Err(invalid("initial is required when graph is given"));
            }
            None => bench.initial.clone(),
            Some(list) => {
                if list.len() != n {
                    return Err(invalid(format!(
                        "initial has {} entries, expected {n}",
                        list.len()
                    )));
                }
                list.iter()
                    .map(|s| AuvState::new(Vec6::from(s.eta), Vec6::from(s.nu)))
                    .collect()
            }
        };

        let leader = match self.leader {
            None | Some(LeaderConfig::Benchmark) => LeaderTrajectory::Benchmark,
            Some(LeaderConfig::Constant { pose }) => LeaderTrajectory::Constant {
                pose: Vec6::from(pose),
            },
            Some(LeaderConfig::Linear { pose, velocity }) => LeaderTrajectory::Linear {
                pose: Vec6::from(pose),
                velocity: Vec6::from(velocity),
            },
        };

        let c = &self.controller;
        let g = &c.gains;
        let ft_gains = FtGains {
            k1: g.k1,
            k2: g.k2,
            k3: g.k3,
            k8: g.k8,
            k9: g.k9,
            k10: g.k10,
            gamma: g.gamma,
            iota: g.iota,
            beta_s: g.beta_s,
            eps_bl: g.eps_bl,
            eps_sing: g.eps_sing,
            w1: g.w1,
            w2: g.w2,
        };
        let baseline_gains = BaselineGains {
            k1: g.k1,
            beta0: g.beta0,
            eps_bl: g.eps_bl,
        };
        let lambda_tilde = match c.lambda_tilde.len() {
            1 => vec![c.lambda_tilde[0]; n],
            k if k == n => c.lambda_tilde.clone(),
            k => {
                return Err(invalid(format!(
                    "controller.lambda_tilde has {k} entries, expected 1 or {n}"
                )));
            }
        };
        if lambda_tilde.iter().any(|v| !(*v > 0.0)) {
            return Err(invalid("controller.lambda_tilde entries must be positive"));
        }
        let fuzzy = FuzzyNet::new(self.fuzzy.centers.clone(), self.fuzzy.width, 12)
            .map_err(|e| invalid(format!("fuzzy: {e}")))?;

        let s = &self.sim;
        if !(s.dt > 0.0) {
            return Err(invalid("sim.dt must be positive"));
        }
        let sc = Scenario {
            agents,
            graph,
            spec,
            leader,
            controller: c.name,
            ft_gains,
            baseline_gains,
            smooth: c.smooth,
            fuzzy,
            disturbance_bound: DisturbanceBound { lambda_tilde },
            dt: s.dt,
            t_end: s.t_end,
            initial,
            disturbance_on: s.disturbance_on,
            kappa: s.kappa,
            l1: s.l1,
            l2: s.l2,
            seed: s.seed,
        };
        sc.validate().map_err(|e| match e {
            crate::Error::InvalidScenario(m) => ConfigError::Validation(m),
            other => ConfigError::Validation(other.to_string()),
        })?;
        Ok(sc)
    }
}

fn agent_params(a: &AgentConfig) -> AuvParams {
    AuvParams {
        mass: a.mass,
        inertia: a.inertia,
        lin_drag: a.lin_drag,
        added_mass: a.added_mass,
        tau_max: a.tau_max,
    }
}

/// The benchmark scenario written out in full.
pub fn default_document() -> ConfigFile {
    let bench = Scenario::benchmark();
    let g = &bench.graph;
    let n = g.n();
    let offsets = bench
        .spec
        .offsets()
        .iter()
        .filter(|((i, j), _)| i < j)
        .map(|(&(i, j), d)| OffsetConfig {
            from: i + 1,
            to: j + 1,
            delta: d.as_slice()[..3].to_vec(),
        })
        .collect();
    let leader_offsets = bench
        .spec
        .leader_offsets()
        .iter()
        .map(|(&i, d)| LeaderOffsetConfig {
            agent: i + 1,
            delta: d.as_slice()[..3].to_vec(),
        })
        .collect();
    ConfigFile {
        agents: Some(vec![AgentConfig::default()]),
        graph: Some(GraphConfig {
            adjacency: (0..n)
                .map(|i| (0..n).map(|j| g.weight(i, j)).collect())
                .collect(),
            pinning: g.pinning().iter().copied().collect(),
        }),
        formation: Some(FormationConfig {
            offsets,
            leader_offsets,
        }),
        leader: Some(LeaderConfig::Benchmark),
        controller: ControllerConfig::default(),
        fuzzy: FuzzyConfig::default(),
        sim: SimConfig::default(),
        initial: Some(
            bench
                .initial
                .iter()
                .map(|s| InitialConfig {
                    eta: s.eta.into(),
                    nu: s.nu.into(),
                })
                .collect(),
        ),
    }
}
