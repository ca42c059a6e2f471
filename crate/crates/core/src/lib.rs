//! Feasibility and long-term voltage stability analysis for DC grids with
//! constant-power loads.
//!
//! A grid is a set of load and source nodes joined by conductive lines.
//! [`grid::build_model`] turns a [`grid::GridSpec`] into the reduced
//! matrices used everywhere else; [`feasibility::solve_operating_point`]
//! decides whether a demand vector can be served and returns either the
//! stable operating point or a half-space certificate of infeasibility.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod feasibility;
pub mod grid;
pub mod powerflow;
pub mod specmat;
pub mod stability;
pub mod synth;

pub use error::{Error, Result};
pub use feasibility::{
    assemble_lmi, boundary_scan, certify_infeasible, halfspace_value, ray_boundary, solve_operating_point,
    FeasibilityVerdict, HalfspaceCertificate, LmiCertificate, LmiVerdict,
};
pub use grid::{build_model, build_model_with, GridModel, GridSpec, ModelOptions};
pub use powerflow::{demand_of, jacobian, p_max, DemandVector, OperatingPoint};
pub use stability::StabilityClass;
