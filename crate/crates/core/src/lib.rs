//! Curvature analysis of Riemannian metrics given in local coordinates.
//!
//! Starting from a coordinate chart with symbolic metric components, this
//! crate computes the Levi-Civita connection, the curvature tensor and its
//! covariant derivatives, scalar curvature invariants and their level-set
//! geometry, and the filtration of the bundle `TM ⊕ so(TM)` whose stable
//! part measures the local Killing algebra. Stable elements can be extended
//! to Killing vector fields on a region by parallel transport.
//!
//! Sign conventions: `R(X,Y)Z = ∇_X ∇_Y Z − ∇_Y ∇_X Z − ∇_{[X,Y]} Z`, and the
//! fully lowered tensor is `R_{abcd} = g(R(∂_a, ∂_b) ∂_d, ∂_c)`, so that the
//! unit two-sphere has `R_{θφθφ} = sin²θ` and scalar curvature `+2`.

pub mod bundle;
pub mod chart;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod extension;
pub mod jet;
pub mod report;
pub mod stabilization;
pub mod tensor;
pub mod weyl;

pub use chart::Chart;
pub use error::{Error, Result};
pub use jet::{Jet, JetFn, MultiIndex};
pub use tensor::{JetTensor, Tensor, Variance};
