//! Singular-limit eigenvalue problems: the fast reduced problem along the
//! shock with its ε > 0 projective probe, and the slow reduced problem on the
//! outer slow segments joined by a jump map.

mod fast;
mod slow;

pub use fast::{
    chart_rhs, fast_bundle_path, fast_connection_probe, fast_probe_root_scan, fast_reduced_rhs,
    projectivized_full_rhs, FastClassification, FastProbe, FastProbeOptions, FastRoot, ProjectivePathFast,
};
pub use slow::{
    find_slow_eigenvalues, jump_map, jump_map_with_base, slow_evans, slow_evans_eval, slow_linear_rhs,
    slow_projective_rhs, slow_shoot, JumpBase, JumpMapData, SlowChart, SlowEvans, SlowOptions, SlowPath,
    SlowShootingState,
};
