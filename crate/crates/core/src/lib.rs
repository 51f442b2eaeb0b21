//! Multi-programming qubit mapping toolkit.

pub mod circuit;
pub mod hardware;
pub mod partition;
pub mod pipeline;
pub mod routing;
pub mod scheduler;
pub mod sim;
