//! Mean-field rank-based tournaments.
//!
//! A continuum of players push a Brownian state to zero at quadratic effort
//! cost and are paid according to their completion rank. The crate computes
//! equilibria for homogeneous and heterogeneous populations, designs reward
//! schemes for several organizer objectives, tracks multiple equilibria when
//! the prize pool depends on the completion rate, and checks the
//! approximate-Nash property by simulating finite tournaments.

pub mod design;
pub mod equilibrium_het;
pub mod equilibrium_hom;
pub mod error;
pub mod fpt;
pub mod nplayer_sim;
pub mod pie;
pub mod quad;
pub mod reward;

pub use equilibrium_hom::{solve_hom, solve_staged, HomEquilibrium, Horizon, ModelParams, StagedEquilibrium};
pub use error::{Error, Result};
pub use reward::{RankReward, SmoothReward, StepReward};
