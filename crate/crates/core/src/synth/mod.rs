//! Deterministic synthetic scenes and simulated sensors.

pub mod json;
pub mod primitives;
pub mod rng;
pub mod scene;
pub mod sensors;

pub use primitives::Solid;
pub use rng::SplitMix64;
pub use scene::{generate_scene, CameraRigConfig, LidarConfig, ObjectTrack, Scene, SceneConfig, StaticPrimitive};
pub use sensors::{
    camera_rig, capture_frame, capture_frame_with, ground_truth_occupancy, render_views, simulate_lidar, DepthImage,
    FrameSensorData, LidarPoint, PointCloud, SemanticImage,
};
