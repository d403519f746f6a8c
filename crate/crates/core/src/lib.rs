//! Topological state estimation for cables (deformable linear objects) in
//! grayscale images.

pub mod geometry;
pub mod image_io;
pub mod scene_gen;

pub use geometry::Point;
pub use image_io::GrayImage;
pub mod tracer;
pub mod crossing;
pub mod topology;
pub mod imitation;
pub mod harness;
