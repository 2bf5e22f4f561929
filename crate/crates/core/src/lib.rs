//! Numerical laboratory for a strongly nonlocal Peierls-Nabarro dislocation
//! model: the fractional Laplacian of order 2s with s in (0, 1/2), the
//! heteroclinic layer profile and its corrector, the repulsive particle
//! system the dislocations obey in the sharp-interface limit, the rescaled
//! reaction-diffusion evolution, and harnesses that cross-validate them.

pub mod corrector;
pub mod error;
pub mod evolution;
pub mod frac_op;
pub mod grid;
pub mod harness;
pub mod layer;
pub mod particles;
pub mod potential;
pub mod quad;
pub mod stress;

pub use corrector::{solve_corrector, CorrectorProfile, CORRECTOR_GAUGE};
pub use error::{Error, Result};
pub use evolution::{initial_condition, run as run_evolution, EvolutionConfig, EvolutionState, Evolver, Scheme};
pub use frac_op::{apply_ls, quadratic_form, spectral_multiplier, LsOperator};
pub use grid::{FracOrder, GridFunction, TailKind, TailModel};
pub use harness::{
    compare_to_particles, half_level_crossings, supersolution_discrepancy, ConvergenceReport,
    SupersolutionReport,
};
pub use layer::{solve_layer, theta_exponent, verify_decay, DecayReport, LayerGrid, LayerProfile};
pub use particles::{integrate, two_body_gap, velocity, velocity_rate, ParticleState};
pub use potential::{PotentialKind, PotentialSpec};
pub use stress::{StressField, StressKind};
