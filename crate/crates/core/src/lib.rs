//! Solver library for unsteady incompressible Stokes flow in channel-like
//! domains with nonlinear slip boundary conditions of friction type.
//!
//! The bottom wall moves with a prescribed shear velocity while the fluid
//! obeys a generalized dry friction law there: the tangential velocity sticks
//! to the wall as long as the shear stress stays below a threshold, and slips
//! against the shear stress once the threshold is reached. The threshold is
//! either a given field (Tresca) or fed back from a mollified, history-averaged
//! normal stress (non-local Coulomb).
//!
//! The numerical path is:
//! - mixed P2/P1 simplicial finite elements on structured channel meshes
//!   ([`geometry`], [`spaces`]),
//! - regularization of the nonsmooth friction functional by
//!   `sqrt(eps^2 + |v|^2)` and implicit Euler in time with a Newton solve of
//!   the saddle-point system per step ([`friction`], [`timestepping`]),
//! - stress recovery with a distributional divergence and a mollified
//!   normal-trace operator on the slip wall ([`stress`]),
//! - successive approximation of the Coulomb threshold over a window schedule
//!   ([`coulomb`]),
//! - executable checks of the energy budget, complementarity and convergence
//!   behaviour ([`verification`]).

pub mod coulomb;
pub mod error;
pub mod friction;
pub mod geometry;
pub mod outputs;
pub mod quadrature;
pub mod scenario;
pub mod spaces;
pub mod sparse;
pub mod stress;
pub mod timestepping;
pub mod verification;

pub use coulomb::{solve_coulomb, update_threshold, window_length, CoulombSpec, IterationTrace, WindowSchedule};
pub use error::Error;
pub use friction::{complementarity_residual, friction_energy, friction_force, friction_jacobian, RegularizationEps, ThresholdField};
pub use geometry::{build_mesh, boundary_normal, BoundaryTag, DomainSpec, Mesh};
pub use scenario::{parse_scenario, Scenario};
pub use spaces::{assemble_operators, build_lifting, build_spaces, korn_coercivity_estimate, DiscreteOperators, FunctionSpacePair, LiftingField};
pub use stress::{compute_stress, momentum_residual_div_stress, regularized_normal_trace, BoundaryTraceHistory, Mollifier, StressField};
pub use timestepping::{initial_state, run_tresca, step, Discretization, State, Trajectory};
pub use verification::{couette_oracle, energy_budget, eps_convergence_study, CouetteRegime, EnergyBudget, VerificationReport};

/// Formats a float with enough digits to round-trip `f64` exactly.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.17e}")
}
