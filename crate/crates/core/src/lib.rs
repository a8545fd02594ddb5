//! Quality-diversity scenario generation for shared-autonomy controllers.
//!
//! Scenarios (object placements plus disturbances of a simulated human's
//! waypoints) are simulated against a hindsight-optimization or
//! policy-blending controller, assessed by time to completion, and collected
//! into a MAP-Elites archive over behavior characteristics.

// `!(a < b)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod archive;
pub mod behavior;
pub mod error;
pub mod geometry;
pub mod policy;
pub mod runner;
pub mod scenario;
pub mod search;
pub mod sim;

pub use archive::{Archive, BehaviorSpaceSpec, Elite, InsertStatus};
pub use behavior::BcVector;
pub use error::{Error, Result};
pub use geometry::{Sphere, Vec2};
pub use policy::Controller;
pub use scenario::{Bounds, Domain, ScenarioParams};
pub use search::{run_search, Algorithm, SearchLog, SearchSettings};
pub use sim::{run_episode, SimConfig, Termination};
