//! Coupled flow of a metric and a map: pointwise right-hand sides, the
//! self-similar oracle, and the reduced 1-D integrators.

pub mod deturck;
pub mod integrator;
pub mod rhs;
pub mod selfsim;

pub use deturck::{deturck_correspondence, DeturckComparison, DeturckOracle};
pub use integrator::{
    integrate_flow_1d, Boundary, ConstantBoundary, FlowState, GridSpec, IntegratorOptions, ReducedParams, Trajectory,
};
pub use rhs::{
    deturck_field, deturck_rhs, flow_rhs, map_rhs, msoliton_conditions_check, random_naturality_pair,
    shifted_lambda_residual, tension_naturality_check,
};
pub use selfsim::{
    build_self_similar, flow_residual_of_solution, initial_velocity_gap, observed_orders, FlowGap, NodeValues,
    PrintedCandidate, SelfSimilarOracle,
};
