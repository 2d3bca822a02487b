//! Deterministic LLM-to-UAV control harness.
//!
//! A kinematic UAV flies inside a pre-mapped 2.5D world. It is driven through
//! eight named interaction streams, either by a scripted direct controller or
//! by a language model over a tool-calling bridge. Every stream call is
//! logged so runs can be evaluated and replayed bit for bit.

pub mod agent;
pub mod geometry;
pub mod llm;
pub mod mission;
pub mod planner;
pub mod plot;
pub mod streams;
pub mod world;

pub use geometry::Vec3;
