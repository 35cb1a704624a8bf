use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cell coordinate. `row` grows southward, `col` grows eastward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Position {
    pub row: usize,
    pub col: usize,
}

impl Position {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Neighbour at `(dr, dc)`, or `None` if it would leave a `size`x`size` map.
    pub fn offset(self, dr: i64, dc: i64, size: usize) -> Option<Position> {
        let r = self.row as i64 + dr;
        let c = self.col as i64 + dc;
        if r < 0 || c < 0 || r >= size as i64 || c >= size as i64 {
            None
        } else {
            Some(Position::new(r as usize, c as usize))
        }
    }

    pub fn check_on(self, size: usize) -> Result<()> {
        if self.row < size && self.col < size {
            Ok(())
        } else {
            Err(Error::OffMap {
                row: self.row as i64,
                col: self.col as i64,
                size,
            })
        }
    }
}

impl From<(usize, usize)> for Position {
    fn from((row, col): (usize, usize)) -> Self {
        Position::new(row, col)
    }
}

/// Square stack of real-valued map layers, stored channel-major
/// (`channel`, `row`, `col`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layers {
    channels: usize,
    side: usize,
    data: Vec<f64>,
}

impl Layers {
    pub fn zeros(channels: usize, side: usize) -> Self {
        Self {
            channels,
            side,
            data: vec![0.0; channels * side * side],
        }
    }

    pub fn from_vec(channels: usize, side: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * side * side {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {channels}x{side}x{side} stack",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            side,
            data,
        })
    }

    /// Layers filled cell-wise with `fill`, one value per channel.
    pub fn filled(side: usize, fill: &[f64]) -> Self {
        let plane = side * side;
        let mut data = Vec::with_capacity(fill.len() * plane);
        for &v in fill {
            data.extend(std::iter::repeat_n(v, plane));
        }
        Self {
            channels: fill.len(),
            side,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn index(&self, channel: usize, row: usize, col: usize) -> usize {
        debug_assert!(channel < self.channels && row < self.side && col < self.side);
        (channel * self.side + row) * self.side + col
    }

    #[inline]
    pub fn get(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.data[self.index(channel, row, col)]
    }

    #[inline]
    pub fn set(&mut self, channel: usize, row: usize, col: usize, value: f64) {
        let i = self.index(channel, row, col);
        self.data[i] = value;
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.side * self.side;
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn plane_mut(&mut self, channel: usize) -> &mut [f64] {
        let n = self.side * self.side;
        &mut self.data[channel * n..(channel + 1) * n]
    }

    /// Concatenates stacks of equal side along the channel axis.
    pub fn stack(parts: &[&Layers]) -> Result<Layers> {
        let side = parts.first().map_or(0, |l| l.side);
        if parts.iter().any(|l| l.side != side) {
            return Err(Error::ShapeMismatch("stacking layers of different sides".into()));
        }
        let mut data = Vec::new();
        let mut channels = 0;
        for p in parts {
            data.extend_from_slice(&p.data);
            channels += p.channels;
        }
        Ok(Layers {
            channels,
            side,
            data,
        })
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}
