//! Communication graph among followers, leader pinning and consensus errors.
//!
//! All per-agent products with `L + B` act blockwise on stacked six-vectors,
//! i.e. as `(H ⊗ I₆)`.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::vehicle::AuvState;
use crate::{block, set_block, Error, Result, Stacked, Vec6};

const SYMMETRY_TOL: f64 = 1e-12;

/// Undirected weighted graph over `n` followers plus leader pinning gains.
#[derive(Debug, Clone, PartialEq)]
pub struct FormationGraph {
    adjacency: DMatrix<f64>,
    pinning: DVector<f64>,
}

impl FormationGraph {
    /// Validates symmetry, zero diagonal, non-negative weights and pinning.
    /// Leader connectivity is checked separately by [`grounded_matrix`].
    pub fn new(adjacency: DMatrix<f64>, pinning: DVector<f64>) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(Error::InvalidGraph(format!(
                "adjacency must be square, got {}x{}",
                n,
                adjacency.ncols()
            )));
        }
        if pinning.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: pinning.len(),
            });
        }
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no agents".into()));
        }
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::InvalidGraph(format!(
                    "adjacency[{i}][{i}] = {} must be zero",
                    adjacency[(i, i)]
                )));
            }
            for j in 0..n {
                let a = adjacency[(i, j)];
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::InvalidGraph(format!(
                        "adjacency[{i}][{j}] = {a} must be >= 0"
                    )));
                }
                if (a - adjacency[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidGraph(format!(
                        "adjacency is not symmetric: [{i}][{j}] = {a} but [{j}][{i}] = {}",
                        adjacency[(j, i)]
                    )));
                }
            }
        }
        for (i, &b) in pinning.iter().enumerate() {
            if !b.is_finite() || b < 0.0 {
                return Err(Error::InvalidGraph(format!(
                    "pinning[{i}] = {b} must be >= 0"
                )));
            }
        }
        if pinning.iter().all(|&b| b == 0.0) {
            return Err(Error::NotLeaderConnected(
                "no agent is pinned to the leader".into(),
            ));
        }
        Ok(Self { adjacency, pinning })
    }

    /// Undirected path `1 - 2 - ... - n` with unit weights and only agent 1 pinned.
    pub fn chain(n: usize) -> Self {
        let mut adjacency = DMatrix::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            adjacency[(i, i + 1)] = 1.0;
            adjacency[(i + 1, i)] = 1.0;
        }
        let mut pinning = DVector::zeros(n);
        pinning[0] = 1.0;
        Self { adjacency, pinning }
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn pinning(&self) -> &DVector<f64> {
        &self.pinning
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[(i, j)]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |&j| self.adjacency[(i, j)] > 0.0)
    }

    /// Every agent reaches some pinned agent through positive-weight edges.
    pub fn is_leader_connected(&self) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| self.pinning[i] > 0.0).collect();
        for &i in &queue {
            seen[i] = true;
        }
        while let Some(i) = queue.pop_front() {
            for j in self.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Graph Laplacian `L = D - A`.
pub fn laplacian(g: &FormationGraph) -> DMatrix<f64> {
    let n = g.n();
    let mut l = -g.adjacency.clone();
    for i in 0..n {
        l[(i, i)] = g.adjacency.row(i).sum();
    }
    l
}

/// `H = L + B` with its extreme eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct Grounded {
    pub matrix: DMatrix<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

pub fn grounded_matrix(g: &FormationGraph) -> Result<Grounded> {
    if !g.is_leader_connected() {
        return Err(Error::NotLeaderConnected(
            "some agents cannot reach a pinned agent".into(),
        ));
    }
    let mut h = laplacian(g);
    for i in 0..g.n() {
        h[(i, i)] += g.pinning[i];
    }
    if h.clone().cholesky().is_none() {
        return Err(Error::NotLeaderConnected(
            "L + B is not positive definite".into(),
        ));
    }
    let eig = SymmetricEigen::new(h.clone());
    let lambda_min = eig.eigenvalues.min();
    let lambda_max = eig.eigenvalues.max();
    Ok(Grounded {
        matrix: h,
        lambda_min,
        lambda_max,
    })
}

/// `(H ⊗ I₆) x` for a stacked `6n` vector.
pub fn stacked_apply(h: &DMatrix<f64>, x: &Stacked) -> Result<Stacked> {
    let n = h.nrows();
    if x.len() != 6 * n {
        return Err(Error::DimensionMismatch {
            expected: 6 * n,
            got: x.len(),
        });
    }
    // Reshape to 6×n (column-major blocks), multiply by Hᵀ on the right.
    let blocks = x
        .clone()
        .reshape_generic(nalgebra::Dyn(6), nalgebra::Dyn(n));
    let out = blocks * h.transpose();
    Ok(out.reshape_generic(nalgebra::Dyn(6 * n), nalgebra::Const::<1>))
}

/// Desired relative poses: `δ_ij` on graph edges and `δ_id` for pinned agents.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FormationSpec {
    offsets: BTreeMap<(usize, usize), Vec6>,
    leader_offsets: BTreeMap<usize, Vec6>,
}

impl FormationSpec {
    /// Edge offsets may be given in one direction only; the reverse is filled
    /// in as `δ_ji = -δ_ij`. Coverage must match the graph exactly.
    pub fn new(
        g: &FormationGraph,
        offsets: impl IntoIterator<Item = ((usize, usize), Vec6)>,
        leader_offsets: impl IntoIterator<Item = (usize, Vec6)>,
    ) -> Result<Self> {
        let n = g.n();
        let mut map: BTreeMap<(usize, usize), Vec6> = BTreeMap::new();
        for ((i, j), d) in offsets {
            if i >= n || j >= n || i == j {
                return Err(Error::InvalidFormation(format!(
                    "offset ({}, {}) is not a valid agent pair",
                    i + 1,
                    j + 1
                )));
            }
            if let Some(prev) = map.get(&(i, j)) {
                if prev != &d {
                    return Err(Error::InvalidFormation(format!(
                        "offset ({}, {}) given twice with different values",
                        i + 1,
                        j + 1
                    )));
                }
            }
            map.insert((i, j), d);
        }
        let keys: Vec<_> = map.keys().copied().collect();
        for (i, j) in keys {
            let d = map[&(i, j)];
            match map.get(&(j, i)) {
                Some(r) if (r + d).amax() > 1e-12 => {
                    return Err(Error::InvalidFormation(format!(
                        "offsets ({a}, {b}) and ({b}, {a}) are not antisymmetric",
                        a = i + 1,
                        b = j + 1
                    )));
                }
                Some(_) => {}
                None => {
                    map.insert((j, i), -d);
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let edge = g.weight(i, j) > 0.0;
                let has = map.contains_key(&(i, j));
                if edge && !has {
                    return Err(Error::InvalidFormation(format!(
                        "missing offset for edge ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
                if !edge && has {
                    return Err(Error::InvalidFormation(format!(
                        "offset given for non-edge ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let leader_offsets: BTreeMap<usize, Vec6> = leader_offsets.into_iter().collect();
        for i in 0..n {
            let pinned = g.pinning()[i] > 0.0;
            let has = leader_offsets.contains_key(&i);
            if pinned != has {
                return Err(Error::InvalidFormation(format!(
                    "agent {} is {}pinned but {} a leader offset",
                    i + 1,
                    if pinned { "" } else { "not " },
                    if has { "has" } else { "lacks" }
                )));
            }
        }
        if let Some(&i) = leader_offsets.keys().find(|&&i| i >= n) {
            return Err(Error::InvalidFormation(format!(
                "leader offset for unknown agent {}",
                i + 1
            )));
        }
        Ok(Self {
            offsets: map,
            leader_offsets,
        })
    }

    pub fn offset(&self, i: usize, j: usize) -> Vec6 {
        self.offsets
            .get(&(i, j))
            .copied()
            .unwrap_or_else(Vec6::zeros)
    }

    pub fn leader_offset(&self, i: usize) -> Vec6 {
        self.leader_offsets
            .get(&i)
            .copied()
            .unwrap_or_else(Vec6::zeros)
    }

    pub fn offsets(&self) -> &BTreeMap<(usize, usize), Vec6> {
        &self.offsets
    }

    pub fn leader_offsets(&self) -> &BTreeMap<usize, Vec6> {
        &self.leader_offsets
    }

    /// `c_i = Σ_j α_ij δ_ij + b_i δ_id`, the constant part of `ε_{1,i}`.
    fn offset_sum(&self, g: &FormationGraph, i: usize) -> Vec6 {
        let mut c = g.pinning()[i] * self.leader_offset(i);
        for j in g.neighbors(i) {
            c += g.weight(i, j) * self.offset(i, j);
        }
        c
    }
}

/// Consensus tracking errors `(ε̄₁, ε̄₂)` stacked over agents.
///
/// `pose_rates` are inertial pose rates `η̇_i = J(η₂,i) υ_i`.
pub fn consensus_errors(
    states: &[AuvState],
    leader_pose: &Vec6,
    leader_vel: &Vec6,
    g: &FormationGraph,
    spec: &FormationSpec,
    pose_rates: &[Vec6],
) -> Result<(Stacked, Stacked)> {
    let n = g.n();
    if states.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: states.len(),
        });
    }
    if pose_rates.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: pose_rates.len(),
        });
    }
    let mut e1 = Stacked::zeros(6 * n);
    let mut e2 = Stacked::zeros(6 * n);
    for i in 0..n {
        let b = g.pinning()[i];
        let mut p = b * (states[i].eta - leader_pose - spec.leader_offset(i));
        let mut v = b * (pose_rates[i] - leader_vel);
        for j in g.neighbors(i) {
            let a = g.weight(i, j);
            p += a * (states[i].eta - states[j].eta - spec.offset(i, j));
            v += a * (pose_rates[i] - pose_rates[j]);
        }
        set_block(&mut e1, i, &p);
        set_block(&mut e2, i, &v);
    }
    Ok((e1, e2))
}

/// Poses at which `ε̄₁ = 0` for the given leader pose: `1 ⊗ η^d + (H⊗I)⁻¹ c`.
pub fn formation_slots(
    g: &FormationGraph,
    spec: &FormationSpec,
    leader_pose: &Vec6,
) -> Result<Vec<Vec6>> {
    let grounded = grounded_matrix(g)?;
    let n = g.n();
    let chol = grounded
        .matrix
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotLeaderConnected("L + B is not positive definite".into()))?;
    let mut c = Stacked::zeros(6 * n);
    for i in 0..n {
        set_block(&mut c, i, &spec.offset_sum(g, i));
    }
    // (H ⊗ I) x = c  ⇔  X Hᵀ = C with X, C the 6×n block matrices.
    let cm = c.reshape_generic(nalgebra::Dyn(6), nalgebra::Dyn(n));
    let mut x = chol.solve(&cm.transpose()).transpose();
    // one refinement pass; integer offsets then land exactly
    let r = &cm - &x * grounded.matrix.transpose();
    x += chol.solve(&r.transpose()).transpose();
    let x = x.reshape_generic(nalgebra::Dyn(6 * n), nalgebra::Const::<1>);
    Ok((0..n).map(|i| leader_pose + block(&x, i)).collect())
}
