//! The egocentric observation: an 8-channel one-hot view of a 5x5 window.

use thiserror::Error;

/// Number of tile channels.
pub const CHANNELS: usize = 8;
/// Window height.
pub const HEIGHT: usize = 5;
/// Window width.
pub const WIDTH: usize = 5;
/// Flattened observation length (8 * 5 * 5).
pub const OBS_LEN: usize = CHANNELS * HEIGHT * WIDTH;

#[derive(Debug, Error, PartialEq)]
pub enum ObsError {
    /// A cell must have exactly one active channel.
    #[error("cell ({row}, {col}) has {active} active channels, expected exactly 1")]
    NotOneHot { row: usize, col: usize, active: usize },
    #[error("observation entry at index {index} is {value}, expected 0 or 1")]
    NotBinary { index: usize, value: u8 },
}

/// A binary 8x5x5 one-hot tensor stored channel-major: index = c*25 + row*5 + col.
///
/// Exactly one channel is active per (row, col) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Observation {
    data: [u8; OBS_LEN],
}

impl Observation {
    /// A uniformly random valid observation (arbitrary channel per cell).
    pub fn random(rng: &mut impl rand::Rng) -> Self {
        let mut cells = [[0usize; WIDTH]; HEIGHT];
        for row in cells.iter_mut() {
            for cell in row.iter_mut() {
                *cell = rng.random_range(0..CHANNELS);
            }
        }
        Self::from_channels(&cells)
    }

    /// Builds an observation from channel indices per cell, row-major.
    pub fn from_channels(cells: &[[usize; WIDTH]; HEIGHT]) -> Self {
        let mut data = [0u8; OBS_LEN];
        for (r, row) in cells.iter().enumerate() {
            for (c, &channel) in row.iter().enumerate() {
                debug_assert!(channel < CHANNELS);
                data[channel * HEIGHT * WIDTH + r * WIDTH + c] = 1;
            }
        }
        Observation { data }
    }

    /// Validates and wraps a raw channel-major buffer.
    pub fn from_raw(data: [u8; OBS_LEN]) -> Result<Self, ObsError> {
        for (i, &v) in data.iter().enumerate() {
            if v > 1 {
                return Err(ObsError::NotBinary { index: i, value: v });
            }
        }
        let obs = Observation { data };
        obs.check_one_hot()?;
        Ok(obs)
    }

    /// Verifies the one-hot-per-cell property.
    pub fn check_one_hot(&self) -> Result<(), ObsError> {
        for r in 0..HEIGHT {
            for c in 0..WIDTH {
                let active = (0..CHANNELS)
                    .filter(|&ch| self.data[ch * HEIGHT * WIDTH + r * WIDTH + c] == 1)
                    .count();
                if active != 1 {
                    return Err(ObsError::NotOneHot { row: r, col: c, active });
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> u8 {
        self.data[channel * HEIGHT * WIDTH + row * WIDTH + col]
    }

    /// Channel index active at a cell.
    pub fn channel_at(&self, row: usize, col: usize) -> usize {
        (0..CHANNELS)
            .find(|&ch| self.data[ch * HEIGHT * WIDTH + row * WIDTH + col] == 1)
            .expect("observation is one-hot per cell")
    }

    pub fn as_bytes(&self) -> &[u8; OBS_LEN] {
        &self.data
    }

    /// Channel-major flatten to floats in {0.0, 1.0}.
    pub fn flatten(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_flatten_layout() {
        // Channel 0 everywhere: ones occupy positions 0..25.
        let obs = Observation::from_channels(&[[0; WIDTH]; HEIGHT]);
        let flat = obs.flatten();
        assert!(flat[..25].iter().all(|&v| v == 1.0));
        assert!(flat[25..].iter().all(|&v| v == 0.0));
        assert_eq!(flat.len(), OBS_LEN);
    }

    #[test]
    fn rejects_double_active_cell() {
        let mut data = [0u8; OBS_LEN];
        // cell (0,0) active in channels 0 and 1
        data[0] = 1;
        data[25] = 1;
        // fill the rest of the cells with channel 0
        for r in 0..HEIGHT {
            for c in 0..WIDTH {
                if r == 0 && c == 0 {
                    continue;
                }
                data[r * WIDTH + c] = 1;
            }
        }
        let err = Observation::from_raw(data).unwrap_err();
        assert_eq!(err, ObsError::NotOneHot { row: 0, col: 0, active: 2 });
    }

    #[test]
    fn rejects_non_binary_entries() {
        let mut data = [0u8; OBS_LEN];
        data[3] = 2;
        assert!(matches!(
            Observation::from_raw(data),
            Err(ObsError::NotBinary { index: 3, value: 2 })
        ));
    }
}
