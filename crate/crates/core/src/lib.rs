//! Simulation and verification toolkit for the Game-of-Thrones (GoT)
//! fully distributed multi-player multi-armed bandit algorithm.
//!
//! `N` players repeatedly pick one of `M` arms; players choosing the same
//! arm collide and earn nothing. Each player sees only her own action and
//! reward. The GoT algorithm runs in epochs of three phases: uniform
//! exploration (estimate arm means), content/discontent trial-and-error
//! dynamics over the estimated utilities, and exploitation of the most
//! frequent content action. The toolkit simulates the algorithm over
//! synthetic i.i.d. or rested Markovian reward processes, accounts regret
//! against an exact assignment-problem oracle, and verifies the dynamics'
//! stationary-distribution behaviour exactly on small instances.
//!
//! Modules:
//! - [`reward`]: reward processes, collision mechanics, expected values
//! - [`agent`]: one player's private policy state and updates
//! - [`engine`]: the synchronized turn loop and run traces
//! - [`assignment`]: exact assignment-problem solutions and margin checks
//! - [`chain`]: the joint content/discontent Markov chain, its stationary
//!   distribution by two independent routes, mixing times and thresholds
//! - [`bounds`]: closed-form exploration error bounds
//! - [`experiment`]: batch replication, aggregation and CSV emission

pub mod agent;
pub mod assignment;
pub mod bounds;
pub mod chain;
pub mod engine;
pub mod error;
pub mod experiment;
mod linalg;
pub mod reward;
pub mod rng;
pub mod trace;

pub use agent::{AgentSnapshot, CollisionSignal, GotAgent, Mood};
pub use assignment::AssignmentResult;
pub use bounds::{exploration_bound, BoundParams, ExplorationBound};
pub use chain::{build_chain, ChainModel, JointState};
pub use engine::{phase_lengths, run_game, CExponent, GameConfig, Mode, RegretBaseline};
pub use error::{Error, Result};
pub use experiment::{run_batch, BatchResult, ExperimentConfig, OutputKind};
pub use reward::{RewardKind, RewardSpec};
pub use rng::{RngFactory, Stream, StreamDomain};
pub use trace::{Phase, PhaseSegment, RunTrace, TraceDetail};
