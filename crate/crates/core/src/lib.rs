//! Curiosity-driven reinforcement learning built on Fuzzy ART novelty
//! detection: online clustering with visit counts feeds a k/sqrt(N)
//! exploration bonus into PPO on the Ordeal grid-world, with RND and
//! no-bonus baselines for comparison.

pub mod curiosity;
pub mod encoder;
pub mod env_ordeal;
pub mod fuzzy_art;
pub mod harness;
pub mod neural;
pub mod obs;
pub mod ppo;
pub mod rng;
mod textfmt;

pub use curiosity::BonusProvider;
pub use encoder::{Encoder, EncoderMode, EncoderSpec};
pub use fuzzy_art::{ArtModel, ArtParams};
pub use neural::{AdamState, Mlp};
pub use obs::Observation;
