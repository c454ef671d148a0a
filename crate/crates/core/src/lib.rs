//! Advancing-front Delaunay refinement in 2D and 3D.
//!
//! Poor-quality triangles and tetrahedra are removed by inserting Steiner
//! vertices inside constraint regions built on their shortest edge: petals in
//! 2D and snow globes in 3D, intersected with a picking region around the
//! circumcenter. Placement maximizes the distance to existing vertices with a
//! combinatorial active-set optimizer that also steers clear of regions where
//! the new vertex would form a small sliver.
//!
//! Crate layout:
//! - [`predicates`]: exact orientation / in-sphere tests, circumspheres
//! - [`triangulation`]: Bowyer-Watson insertion and deletion
//! - [`quality`]: radius-edge / volume-edge measures and configuration
//! - [`regions`]: picking regions, petals, snow globes, forbidden regions
//! - [`optimizer`]: max-min placement by candidate enumeration
//! - [`refiner`]: the refinement driver and boundary handling
//! - [`analysis`]: oracles and audits
//! - [`io`]: Triangle/TetGen style files, exports, CLI plumbing

pub mod analysis;
mod error;
pub mod geom;
pub mod io;
pub mod optimizer;
pub mod plc;
pub mod predicates;
pub mod quality;
pub mod refiner;
pub mod regions;
pub mod triangulation;

pub use error::{
    AnalysisError, ConfigError, GeometryError, IoError, MeshError, OptimizerError, PlcError, RefineError,
    RegionError,
};
pub use plc::Plc;
pub use predicates::{Point, Sign};
pub use quality::RefinementConfig;
pub use refiner::{refine, EventLog, RefineOutput};
pub use triangulation::Mesh;

use serde::{Deserialize, Serialize};

/// Spatial dimension of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn n(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }

    /// Vertices per full-dimensional simplex.
    pub fn arity(self) -> usize {
        self.n() + 1
    }

    pub fn from_n(n: usize) -> Option<Dim> {
        match n {
            2 => Some(Dim::Two),
            3 => Some(Dim::Three),
            _ => None,
        }
    }
}
