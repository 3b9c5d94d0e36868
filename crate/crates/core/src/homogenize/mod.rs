//! Cell correctors, the effective interface matrix H, the transmission
//! problem between the two blocks, and the unfolded limit problem.

mod correctors;
mod limit;
mod transmission;

pub use correctors::{effective_h, reconstruct_layer, solve_correctors, CorrectorSet, EffectiveInterface};
pub use limit::{build_limit_mesh, limit_dofs, limit_load, solve_unfolded_limit, split_limit_state, LimitMesh, LimitProblem, LimitState};
pub use transmission::{interface_coupling, sigma_weights, solve_transmission, TransmissionSolution};

#[cfg(test)]
mod tests;
