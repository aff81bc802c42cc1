//! Semi-discrete optimal transport from a tetrahedral mesh to a set of weighted
//! points, with CVT sampling and a mesh morphing pipeline built on top.

pub mod cvt;
pub mod error;
pub mod geom;
pub mod hilbert;
pub mod mesh;
pub mod morph;
pub mod power;
pub mod restricted;
pub mod transport;
mod textio;

pub use error::{Error, Result};
pub use mesh::TetMesh;

