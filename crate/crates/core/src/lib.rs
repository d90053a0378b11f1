// Comparisons written as `!(x > 0.0)` are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod catalog;
pub mod curvature;
pub mod error;
pub mod exec;
pub mod expr;
pub mod geometry;
pub mod jets;
pub mod linalg;
pub mod oracle;
pub mod point;
pub mod sampling;
pub mod series;
pub mod tensor;

pub use curvature::{CurvatureBundle, FlagCurvatures};
pub use catalog::{CatalogMetric, HermitianData, NamedRho, RhoSpec};
pub use error::{FinslerError, Result};
pub use expr::{Expr, MetricExpr, ScalarExpr, Slot};
pub use geometry::{FrameData, Geometry};
pub use jets::{eval_jet, eval_scalar_jet, JetIndex, JetTable, OrderBound, ScalarJet};
pub use oracle::{fd_oracle, field_gradient, FdOracle, FdSteps};
pub use point::{Point, Polarized};
pub use tensor::{IndexSlot, Tensor};
