//! Simulation of SIS epidemics on graphs under dynamic allocation of a
//! fixed budget of recovery resources, with online selection strategies
//! for the case where only a sample of infected nodes is observable.

pub mod control;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod rng;
pub mod scoring;
pub mod selection;
pub mod sis;
pub mod stats;

pub use control::{
    simulate_replica, Caps, ControlConfig, ControlMode, Controller, RecordOptions, Termination,
    TrajectoryRecord,
};
pub use error::{Error, Result};
pub use graph::{Graph, GraphSpec, NodeId};
pub use scoring::{ScoreVector, Scoring, ScoringFunction};
pub use selection::{run_strategy, CutoffTable, StrategyKind, StrategySpec, WsspInstance};
pub use sis::{EpidemicState, RateParams};
