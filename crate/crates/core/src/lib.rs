pub mod contrastive;
pub mod encoder;
pub mod error;
pub mod gradcore;
pub mod graphdata;
pub mod otcore;
pub mod protohead;
pub mod rng;
pub mod scalar;
pub mod smiles;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

use gradcore::GroupId;

/// Optimizer group of all non-prototype parameters (learning rate `lr`).
pub const MAIN_GROUP: GroupId = GroupId(0);
/// Optimizer group of the prototype point clouds (learning rate `lr_pc`).
pub const PROTOTYPE_GROUP: GroupId = GroupId(1);

/// Scalar type used by the model-level modules.
pub type Real = f64;
pub type Tensor = gradcore::Tensor<Real>;
pub type Tape = gradcore::Tape<Real>;
pub type PointCloud = otcore::PointCloud<Real>;
pub type TransportPlan = otcore::TransportPlan<Real>;

/// Single-precision variants of the generic core.
pub mod f32 {
    pub type Tensor = crate::gradcore::Tensor<f32>;
    pub type Tape = crate::gradcore::Tape<f32>;
    pub type PointCloud = crate::otcore::PointCloud<f32>;
    pub type TransportPlan = crate::otcore::TransportPlan<f32>;
}
