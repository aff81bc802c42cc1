//! Geometric kernel: points, half-spaces, convex cells, integration and predicates.

pub mod cell;
pub mod expansion;
pub mod halfspace;
pub mod integrate;
pub mod point;
pub mod predicates;

pub use cell::{ConvexCell, Face};
pub use halfspace::{bisector, HalfSpace, Provenance};
pub use integrate::{integrate, LinearField, MomentSet};
pub use point::{Aabb, Point3};
pub use predicates::{side_of_bisector, PredicateMode, Side, WeightedSite};
