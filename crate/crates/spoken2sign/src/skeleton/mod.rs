//! Parametric skeletal model: kinematic tree, axis-angle forward kinematics,
//! shape scaling, pinhole projection, and global rotation.

pub mod camera;
pub mod fk;
pub mod pose;
pub mod rotation;
pub mod tree;

pub use camera::{project, CameraParams, Joints3D, Keypoints2D};
pub use fk::{
    apply_shape, fk_backward, fk_world, forward_kinematics, forward_kinematics_cached, FkCache,
    PoseGradient,
};
pub use pose::{rotate_global, PoseParams};
pub use rotation::{canonicalize_axis_angle, rodrigues, rodrigues_jacobian, slerp_axis_angle};
pub use tree::{sets, Joint, KinematicTree, LandmarkDef, SHAPE_DIM};
