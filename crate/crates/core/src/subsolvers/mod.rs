//! Convex programs solved inside the alternating outer loops.

pub(crate) mod barrier;
pub mod power;
pub mod reflection;
pub mod sdp;

pub use barrier::BarrierSettings;
pub use power::{solve_p3, solve_p4, FeasibilityPoint, PowerPoint, PowerSubproblem};
pub use reflection::{max_min_slack, solve_p6, ReflectionSolution, ReflectionSubproblem, ReflectionUser};
pub use sdp::{solve_p9, SdpSolution};
