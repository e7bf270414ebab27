//! Observation encoders: raw flatten (headless) or a fixed random
//! projection head squashed into (0,1).

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::obs::{ObsError, Observation, OBS_LEN};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Error, PartialEq)]
pub enum EncoderError {
    #[error("observation integrity: {0}")]
    ObservationIntegrity(#[from] ObsError),
    #[error("invalid encoder spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderMode {
    /// Channel-major flatten of the raw binary tensor.
    Headless,
    /// Fixed seeded random projection to `head_dim`, then a logistic squash.
    StaticHead,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderSpec {
    pub mode: EncoderMode,
    pub head_dim: usize,
    pub seed: u64,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        EncoderSpec { mode: EncoderMode::Headless, head_dim: 16, seed: 0 }
    }
}

/// A ready-to-use encoder. The static head's projection matrix is drawn once
/// at construction and never trained.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    spec: EncoderSpec,
    /// head_dim x OBS_LEN projection, row-major; empty for headless.
    projection: Vec<f64>,
}

impl Encoder {
    pub fn new(spec: EncoderSpec) -> Result<Self, EncoderError> {
        let projection = match spec.mode {
            EncoderMode::Headless => Vec::new(),
            EncoderMode::StaticHead => {
                if spec.head_dim == 0 {
                    return Err(EncoderError::InvalidSpec("head_dim must be >= 1".into()));
                }
                let mut rng = stream_rng(spec.seed, Stream::EncoderHead);
                (0..spec.head_dim * OBS_LEN)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect()
            }
        };
        Ok(Encoder { spec, projection })
    }

    pub fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    /// Length of encoded vectors.
    pub fn output_dim(&self) -> usize {
        match self.spec.mode {
            EncoderMode::Headless => OBS_LEN,
            EncoderMode::StaticHead => self.spec.head_dim,
        }
    }

    /// Encodes an observation into [0,1]^dim.
    pub fn encode(&self, obs: &Observation) -> Result<Vec<f64>, EncoderError> {
        obs.check_one_hot()?;
        let flat = obs.flatten();
        match self.spec.mode {
            EncoderMode::Headless => Ok(flat),
            EncoderMode::StaticHead => {
                let scale = 1.0 / (OBS_LEN as f64).sqrt();
                let out = (0..self.spec.head_dim)
                    .map(|i| {
                        let row = &self.projection[i * OBS_LEN..(i + 1) * OBS_LEN];
                        let z: f64 = row.iter().zip(&flat).map(|(p, x)| p * x).sum();
                        sigmoid(scale * z)
                    })
                    .collect();
                Ok(out)
            }
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obs::{HEIGHT, WIDTH};
    use rand_chacha::ChaCha8Rng;

    fn random_obs(rng: &mut ChaCha8Rng) -> Observation {
        Observation::random(rng)
    }

    #[test]
    fn headless_flatten_layout() {
        let enc = Encoder::new(EncoderSpec::default()).unwrap();
        let obs = Observation::from_channels(&[[0; WIDTH]; HEIGHT]);
        let v = enc.encode(&obs).unwrap();
        assert_eq!(v.iter().filter(|&&x| x == 1.0).count(), 25);
        assert!(v[..25].iter().all(|&x| x == 1.0));
        assert!(v[25..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn encoding_is_deterministic() {
        let spec = EncoderSpec { mode: EncoderMode::StaticHead, head_dim: 16, seed: 3 };
        let enc1 = Encoder::new(spec).unwrap();
        let enc2 = Encoder::new(spec).unwrap();
        let obs = random_obs(&mut stream_rng(0, Stream::Env));
        assert_eq!(enc1.encode(&obs).unwrap(), enc2.encode(&obs).unwrap());
    }

    #[test]
    fn static_head_separates_observation_pairs() {
        // Empirical collision check against direct observation comparison.
        let spec = EncoderSpec { mode: EncoderMode::StaticHead, head_dim: 16, seed: 17 };
        let enc = Encoder::new(spec).unwrap();
        let mut rng = stream_rng(5, Stream::Env);
        for _ in 0..100 {
            let a = random_obs(&mut rng);
            let b = random_obs(&mut rng);
            if a == b {
                continue;
            }
            let ya = enc.encode(&a).unwrap();
            let yb = enc.encode(&b).unwrap();
            let max_diff = ya
                .iter()
                .zip(&yb)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            assert!(max_diff > 1e-12, "distinct observations encoded identically");
        }
    }

    #[test]
    fn outputs_stay_in_unit_interval() {
        let mut rng = stream_rng(6, Stream::Env);
        for spec in [
            EncoderSpec::default(),
            EncoderSpec { mode: EncoderMode::StaticHead, head_dim: 8, seed: 1 },
        ] {
            let enc = Encoder::new(spec).unwrap();
            for _ in 0..50 {
                let obs = random_obs(&mut rng);
                let y = enc.encode(&obs).unwrap();
                assert_eq!(y.len(), enc.output_dim());
                assert!(y.iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }
    }

    #[test]
    fn headless_is_injective_on_valid_observations() {
        let enc = Encoder::new(EncoderSpec::default()).unwrap();
        let mut rng = stream_rng(7, Stream::Env);
        for _ in 0..100 {
            let a = random_obs(&mut rng);
            let b = random_obs(&mut rng);
            assert_eq!(a == b, enc.encode(&a).unwrap() == enc.encode(&b).unwrap());
        }
    }

    #[test]
    fn zero_head_dim_rejected() {
        let spec = EncoderSpec { mode: EncoderMode::StaticHead, head_dim: 0, seed: 0 };
        assert!(matches!(Encoder::new(spec), Err(EncoderError::InvalidSpec(_))));
    }
}
