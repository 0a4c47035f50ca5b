//! Distributed fixed-time formation control for fleets of 6-DOF underwater
//! vehicles.
//!
//! The crate is organised bottom-up:
//!
//! - [`topology`]: communication graph, grounded Laplacian `L + B`, consensus errors.
//! - [`vehicle`]: rigid-body dynamics with added mass, linear drag, the
//!   benchmark disturbance and the actuator clip.
//! - [`fuzzy`]: Gaussian-rule fuzzy basis and the fixed-time adaptive law.
//! - [`control`]: fixed-time backstepping SMC, the saturated adaptive-fuzzy
//!   controller with its auxiliary state, and the baseline distributed SMC.
//! - [`sim`]: RK4 engine, leader trajectories, metrics, Lyapunov traces,
//!   settling-time bounds and Monte-Carlo sweeps.
//! - [`config`] and [`io`]: JSON scenario files and CSV run logs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod control;
pub mod error;
pub mod fuzzy;
pub mod io;
pub mod sim;
pub mod topology;
pub mod vehicle;

pub use error::{Error, Result};

/// Pose or twist of one vehicle.
pub type Vec6 = nalgebra::Vector6<f64>;
pub type Mat6 = nalgebra::Matrix6<f64>;
/// Per-agent blocks of six stacked into one `6n` column.
pub type Stacked = nalgebra::DVector<f64>;

/// Block `i` (six rows) of a stacked vector.
pub(crate) fn block(x: &Stacked, i: usize) -> Vec6 {
    x.fixed_rows::<6>(6 * i).into_owned()
}

pub(crate) fn set_block(x: &mut Stacked, i: usize, v: &Vec6) {
    x.fixed_rows_mut::<6>(6 * i).copy_from(v);
}

/// Stack per-agent six-vectors.
pub fn stack(blocks: &[Vec6]) -> Stacked {
    let mut out = Stacked::zeros(6 * blocks.len());
    for (i, b) in blocks.iter().enumerate() {
        set_block(&mut out, i, b);
    }
    out
}

/// Inverse of [`stack`].
pub fn unstack(x: &Stacked) -> Vec<Vec6> {
    (0..x.len() / 6).map(|i| block(x, i)).collect()
}
