//! Simulation-trained bin picking.
//!
//! Pick trials are simulated with box-approximated collision geometry while the
//! depth images fed to the classifier are rendered from the exact meshes. A
//! two-channel convolutional network learns pick success from (depth crop,
//! gripper segment) pairs, and a raster scan over window positions and gripper
//! orientations returns the pose with the highest predicted success.

pub mod eval;
pub mod geometry;
pub mod grasp;
pub mod nn;
pub mod physics;
pub mod render;
pub mod trials;
