//! Intrinsic-reward providers: ART count-based bonus, RND bonus, and the
//! zero-bonus baseline, behind one interface for the rollout loop.

use thiserror::Error;

use crate::encoder::{Encoder, EncoderError};
use crate::fuzzy_art::{ArtError, ArtModel};
use crate::neural::{AdamState, Mlp, NetError};
use crate::obs::Observation;

/// Numerical floor under the RND variance normalizer.
const EPS_NUM: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum CuriosityError {
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Art(#[from] ArtError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("invalid provider configuration: {0}")]
    InvalidConfig(String),
}

/// Welford accumulators for the running mean/variance of RND errors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunningMoments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population variance; zero before the first sample.
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0)
        }
    }
}

/// Count-based bonus k / sqrt(N(f(x))) over ART categories.
#[derive(Debug, Clone)]
pub struct ArtBonus {
    model: ArtModel,
    encoder: Encoder,
    k: f64,
}

impl ArtBonus {
    pub fn new(model: ArtModel, encoder: Encoder, k: f64) -> Result<Self, CuriosityError> {
        if !(k > 0.0) {
            return Err(CuriosityError::InvalidConfig(format!("k must be > 0, got {k}")));
        }
        if model.dim() != encoder.output_dim() {
            return Err(CuriosityError::InvalidConfig(format!(
                "ART dim {} does not match encoder output dim {}",
                model.dim(),
                encoder.output_dim()
            )));
        }
        Ok(ArtBonus { model, encoder, k })
    }

    /// Classifies (and learns) the observation, returning k / sqrt(N) with
    /// the post-increment count, so a first visit pays exactly k.
    pub fn bonus(&mut self, obs: &Observation) -> Result<f64, CuriosityError> {
        let x = self.encoder.encode(obs)?;
        let j = self.model.classify_learn(&x)?;
        let n = self.model.category_count(j)?;
        Ok(self.k / (n as f64).sqrt())
    }

    pub fn model(&self) -> &ArtModel {
        &self.model
    }
}

/// Random network distillation: a trained predictor chases a frozen random
/// target; the (variance-normalized) prediction error is the bonus.
#[derive(Debug, Clone)]
pub struct RndBonus {
    target: Mlp,
    predictor: Mlp,
    adam: AdamState,
    encoder: Encoder,
    k: f64,
    moments: RunningMoments,
    last_raw_error: f64,
}

impl RndBonus {
    pub fn new(
        target: Mlp,
        predictor: Mlp,
        encoder: Encoder,
        k: f64,
        learn_rate: f64,
    ) -> Result<Self, CuriosityError> {
        if target.sizes() != predictor.sizes() {
            return Err(CuriosityError::InvalidConfig(
                "target and predictor architectures differ".into(),
            ));
        }
        if target.input_dim() != encoder.output_dim() {
            return Err(CuriosityError::InvalidConfig(format!(
                "network input dim {} does not match encoder output dim {}",
                target.input_dim(),
                encoder.output_dim()
            )));
        }
        if !(learn_rate > 0.0) {
            return Err(CuriosityError::InvalidConfig(format!(
                "learn_rate must be > 0, got {learn_rate}"
            )));
        }
        let adam = AdamState::new(&predictor, learn_rate);
        Ok(RndBonus { target, predictor, adam, encoder, k, moments: RunningMoments::default(), last_raw_error: 0.0 })
    }

    /// One RND step: measure the prediction error, train the predictor on
    /// it, update the running moments, and return the normalized bonus.
    pub fn bonus(&mut self, obs: &Observation) -> Result<f64, CuriosityError> {
        let x = self.encoder.encode(obs)?;
        let t = self.target.forward(&x)?;
        let p = self.predictor.forward(&x)?;
        let n = t.len() as f64;
        let error: f64 = t.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
        // Gradient of the mean-squared error at the predictor output.
        let grad: Vec<f64> = p.iter().zip(&t).map(|(b, a)| 2.0 * (b - a) / n).collect();
        self.predictor.zero_grad();
        self.predictor.backward(&grad)?;
        self.adam.step(&mut self.predictor);
        self.moments.push(error);
        self.last_raw_error = error;
        Ok(self.k * error / (self.moments.variance() + EPS_NUM).sqrt())
    }

    /// Un-normalized prediction error of the most recent bonus call.
    pub fn last_raw_error(&self) -> f64 {
        self.last_raw_error
    }

    pub fn moments(&self) -> &RunningMoments {
        &self.moments
    }
}

/// The uniform provider interface used by the rollout loop.
#[derive(Debug, Clone)]
pub enum BonusProvider {
    Art(Box<ArtBonus>),
    Rnd(Box<RndBonus>),
    None,
}

impl BonusProvider {
    /// The per-step intrinsic reward for an observation. `None` pays
    /// exactly zero and keeps no state.
    pub fn bonus(&mut self, obs: &Observation) -> Result<f64, CuriosityError> {
        match self {
            BonusProvider::Art(a) => a.bonus(obs),
            BonusProvider::Rnd(r) => r.bonus(obs),
            BonusProvider::None => Ok(0.0),
        }
    }

    /// Current ART category count, when this provider has one.
    pub fn art_category_count(&self) -> Option<usize> {
        match self {
            BonusProvider::Art(a) => Some(a.model().num_categories()),
            _ => None,
        }
    }

    pub fn art(&self) -> Option<&ArtBonus> {
        match self {
            BonusProvider::Art(a) => Some(a),
            _ => None,
        }
    }
}

/// Total training reward: extrinsic plus intrinsic.
pub fn combine_rewards(extrinsic: f64, intrinsic: f64) -> f64 {
    extrinsic + intrinsic
}
