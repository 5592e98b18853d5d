//! Discrete-event simulation of duty-cycled parking sensor networks.
//!
//! Sensors report occupancy changes to a gateway, either on every change or
//! periodically, over a schedule-based or contention-based duty-cycled MAC.

pub mod engine;
pub mod figures;
pub mod mac;
pub mod metrics;
pub mod output;
pub mod network;
pub mod radio;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod traffic;

pub use engine::NodeId;
