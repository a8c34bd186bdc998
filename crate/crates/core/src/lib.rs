pub mod dynamics;
pub mod baseline;
pub mod cli;
pub mod decision;
pub mod error;
pub mod follower;
pub mod formation;
pub mod geometry;
pub mod lookup;
pub mod nlp;
pub mod ocp;
pub mod planner;
pub mod scenario;
pub mod trace;

pub use error::{Error, Result};
