//! Multi-camera 3D tracking with a ray-plane fallback for weak views.

pub mod cascade;
pub mod config;
pub mod cross_view;
pub mod cross_window;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod sim;
pub mod sv_track;
pub mod target;
