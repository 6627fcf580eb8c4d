//! Stable nonconstant stationary solutions ("patterns") of reaction-diffusion
//! equations on straight tubes, bent tubes and glued genus-1 surfaces.

pub mod config;
pub mod continuation;
pub mod critical;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod nonlinearity;
pub mod operator;
pub mod pipeline;
pub mod solvers;
pub mod spline;

pub use config::{parse_config, serialize_config, Config};
pub use error::{Error, Result};
pub use geometry::{glue, BentTube, GluedSurface, ProfileCurve, SurfaceMetric};
pub use grid::{Grid2D, ScalarField};
pub use nonlinearity::{make_pattern_profile, synthesize_f, Nonlinearity, PatternProfile, SynthesisMode};
pub use operator::{assemble, DiscreteOperator};
pub use solvers::{newton_solve, principal_eigenpair, rayleigh_quotient, EigenPair};
