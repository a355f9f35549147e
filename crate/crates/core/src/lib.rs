//! Near-boundary dynamics of strictly convex planar billiards.

pub mod billiard;
pub mod caustics;
pub mod conjugacy;
pub mod curve;
pub mod error;
pub mod foliation;
pub mod lines;
pub mod normal_form;
pub mod numeric;
pub mod series;
pub mod spectral;
pub mod taylor;

pub use curve::{build_curve, ConvexCurve, CurveKind, CurveSpec, EndBehavior, GraphFn, Point};
pub use error::{Error, Result};
