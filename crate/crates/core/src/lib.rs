//! Exact sparse simulation of query algorithms against standard and recording
//! (compressed) phase oracles, with progress measures, success-probability
//! bounds and the classical collision-finding reduction.

pub mod algorithms;
pub mod bounds;
pub mod error;
pub mod layout;
pub mod matrix;
pub mod oracles;
pub mod progress;
pub mod reduction;
pub mod relation;
pub mod rng;
pub mod state;
pub mod verify;

pub use error::{Error, Result};
pub use layout::{BasisComponent, LayoutSpec, Register, RegisterLayout, Slot, SlotRole};
pub use matrix::CMatrix;
pub use oracles::SamplingUnitary;
pub use relation::{OutputRelation, RelationKind};
pub use state::{DenseState, QueryState};
