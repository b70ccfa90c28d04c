//! The walk policy, its REINFORCE trainer and beam-search decoding.

mod beam;
mod network;
mod reinforce;
mod trainer;

pub use beam::{beam_decode, greedy_decode};
pub use network::{action_distribution, Memory, PolicyParams, PolicyShape, StepCache, StepInput};
pub use reinforce::{
    reinforce_update, sample_trajectory, surrogate_loss, AgentConfig, BatchStats,
    PolicyOptimizer, SurrogateValue, TrainState, Trajectory,
};
pub use trainer::{
    train_agent, AgentCheckpoint, DevSet, EpochLog, TrainOutcome, AGENT_FORMAT_VERSION,
};
