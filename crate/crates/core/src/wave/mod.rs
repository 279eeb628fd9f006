//! Travelling-wave construction: singular skeleton, end-state linearization
//! and the ε > 0 boundary-value problem.

mod bvp;
mod linear;
mod profile;
mod singular;

pub use bvp::{
    composite_guess, eps_schedule, initial_mesh, slow_segment_deviation, solve_wave_bvp,
    solve_wave_bvp_with, BvpOptions,
};
pub use linear::{
    end_states, equilibria_and_linearization, linear_matrix, EquilibriumData, EquilibriumSummary,
};
pub use profile::{sidecar_path, WaveProfile, WaveResiduals};
pub use singular::{
    layer_hamiltonian, layer_profile_xi, layer_shock_profile, matching_residual,
    reduced_end_eigen, reduced_flow_rhs, singular_orbit, singular_wavespeed, slow_segment,
    SingularOrbit, SlowEnd, SlowSegment,
};
