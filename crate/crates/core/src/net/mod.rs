//! The recognition network.
//!
//! A raster is filtered by a fixed Gabor bank, then passes through a stage
//! plan of trainable layers: block subsampling with tanh, two-dimensional
//! recurrent layers that scan the grid in four column-first directions and
//! sum the directional outputs, per-position tanh layers, a collapse that
//! sums each remaining column, and a softmax output over the alphabet plus
//! the garbage symbol.
//!
//! The recurrent cell used by default is a convex-gated leaky integrator:
//! per unit, three gate pre-activations (input, y-neighbour, x-neighbour) are
//! softmax-normalized into weights that mix the two neighbour states with a
//! tanh candidate. States are therefore bounded by 1 in magnitude. A standard
//! multi-dimensional LSTM cell is also available.

mod gabor;
mod layers;
mod network;
mod recurrent;
mod scan;
pub mod shipped;
mod spec;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub use gabor::{convolve, gabor_forward, gabor_kernel};
pub use layers::{collapse_columns, direction_merge, softmax_columns, subsample};
pub use network::{network_backward, network_forward, Network, Trace, WeightStore};
pub use recurrent::{leaky_cell_forward, mdlstm_cell_forward, CellKind};
pub use scan::{scan_order, scan_orders, Direction};
pub use spec::{AlphabetSpec, GaborBank, LayerSpec, NetworkSpec};

/// Dense `width × height × channels` activations, channel-minor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    width: usize,
    height: usize,
    channels: usize,
    values: Vec<f64>,
}

impl FeatureGrid {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        FeatureGrid { width, height, channels, values: vec![0.0; width * height * channels] }
    }

    pub fn from_values(width: usize, height: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height * channels {
            return Err(Error::InvalidParameter(format!(
                "{} values for a {width}x{height}x{channels} grid",
                values.len()
            )));
        }
        Ok(FeatureGrid { width, height, channels, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub(crate) fn offset(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> &[f64] {
        let o = self.offset(x, y);
        &self.values[o..o + self.channels]
    }

    #[inline]
    pub fn at_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let o = self.offset(x, y);
        &mut self.values[o..o + self.channels]
    }

    /// Fails on the first NaN or infinity, naming the stage and position.
    pub fn check_finite(&self, stage: &str) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => {
                let cell = i / self.channels.max(1);
                Err(Error::NonFinite { stage: stage.into(), x: cell % self.width, y: cell / self.width })
            }
        }
    }
}

/// Per-timestep probability vectors over the alphabet plus garbage.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputMatrix {
    timesteps: usize,
    classes: usize,
    blank: usize,
    probs: Vec<f64>,
}

impl OutputMatrix {
    /// Validates that every column is a positive distribution summing to 1
    /// within 1e-9.
    pub fn new(timesteps: usize, classes: usize, blank: usize, probs: Vec<f64>) -> Result<Self> {
        if timesteps == 0 || classes < 2 || blank >= classes || probs.len() != timesteps * classes {
            return Err(Error::InvalidMatrix(format!(
                "T={timesteps} K={classes} blank={blank} with {} entries",
                probs.len()
            )));
        }
        for (t, col) in probs.chunks_exact(classes).enumerate() {
            if col.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
                return Err(Error::InvalidMatrix(format!("column {t} has an entry outside (0, 1]")));
            }
            let sum: f64 = col.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidMatrix(format!("column {t} sums to {sum}")));
            }
        }
        Ok(OutputMatrix { timesteps, classes, blank, probs })
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Index of the garbage (CTC blank) symbol.
    pub fn blank(&self) -> usize {
        self.blank
    }

    #[inline]
    pub fn prob(&self, t: usize, k: usize) -> f64 {
        self.probs[t * self.classes + k]
    }

    pub fn column(&self, t: usize) -> &[f64] {
        &self.probs[t * self.classes..(t + 1) * self.classes]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}
