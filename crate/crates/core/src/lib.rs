//! Fractional mean curvature of planar sets, comparison barriers, and a front-tracking
//! solver for the fractional mean curvature flow.

pub mod barriers;
pub mod curvature;
pub mod error;
pub mod flow;
pub mod geom;
pub mod quadrature;
pub mod scenarios;

pub use curvature::{CurvatureResult, FracOrder, QuadConfig};
pub use error::{Error, Result};
pub use geom::{ClosedCurve, Mirror, Vec2};
