//! Lorentzian metrics on coordinate charts, spacelike foliations, and numerical
//! audits of the structure identities that tie leaf geometry to ambient curvature.

pub mod chart_metrics;
pub mod cli_reports;
pub mod curvature;
pub mod dual;
pub mod error;
pub mod foliation_geometry;
pub mod gf_bounds;
pub mod identity_audit;
pub mod leaf_integrals;
pub mod linalg;
pub mod riccati_flow;
pub mod sampling;

pub use chart_metrics::{eval_metric, zoo_build, ChartPoint, MetricField, SpacetimeSpec};
pub use error::{GeomError, Result};
pub use foliation_geometry::{Foliation, TimeFunction};
