//! Adaptive traffic-light control lab: a single-intersection microsimulator,
//! a phase-gated deep Q-network trained offline from fixed timetables and
//! online with epsilon-greedy control, fixed-plan baselines, and an
//! experiment harness with scenario definitions and comparison reports.

pub mod env;
pub mod harness;
pub mod nn;
pub mod qnet;
pub mod replay;
pub mod sim;
pub mod training;
