use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Alphabet, FieldType};

use super::CellKind;

/// Fixed (non-trainable) Gabor front end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaborBank {
    pub orientations_deg: Vec<f64>,
    pub wavelength: f64,
    pub sigma: f64,
    pub kernel_size: usize,
}

impl Default for GaborBank {
    fn default() -> Self {
        GaborBank { orientations_deg: vec![0.0, 45.0, 90.0, 135.0], wavelength: 8.0, sigma: 4.0, kernel_size: 11 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Non-overlapping `fy × fx` blocks, linear map, tanh.
    Subsample { fy: usize, fx: usize, units: usize },
    /// Four-direction leaky grid layer, directional outputs summed.
    Leaky { units: usize },
    /// Four-direction multi-dimensional LSTM layer, directional outputs summed.
    Mdlstm { units: usize },
    /// Per-position dense tanh layer.
    Tanh { units: usize },
    /// Sum over the remaining rows of every column.
    Collapse,
    /// Dense map to the alphabet followed by softmax.
    Softmax,
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Subsample { .. } => "subsample",
            LayerSpec::Leaky { .. } => "leaky",
            LayerSpec::Mdlstm { .. } => "mdlstm",
            LayerSpec::Tanh { .. } => "tanh",
            LayerSpec::Collapse => "collapse",
            LayerSpec::Softmax => "softmax",
        }
    }

    pub(crate) fn recurrent_kind(&self) -> Option<(CellKind, usize)> {
        match *self {
            LayerSpec::Leaky { units } => Some((CellKind::Leaky, units)),
            LayerSpec::Mdlstm { units } => Some((CellKind::Lstm, units)),
            _ => None,
        }
    }
}

/// Either a shipped field alphabet or an explicit symbol list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphabetSpec {
    Field(FieldType),
    Symbols(Vec<String>),
}

/// Complete network descriptor, serialized as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    pub input_height: usize,
    pub gabor: GaborBank,
    pub stages: Vec<LayerSpec>,
    pub alphabet: AlphabetSpec,
    pub seed: u64,
}

impl NetworkSpec {
    pub fn alphabet(&self) -> Result<Alphabet> {
        match &self.alphabet {
            AlphabetSpec::Field(f) => Ok(Alphabet::for_field(*f)),
            AlphabetSpec::Symbols(s) => Alphabet::new(s.iter().cloned()),
        }
    }

    /// Output neurons, garbage included.
    pub fn output_size(&self) -> Result<usize> {
        Ok(self.alphabet()?.len())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.input_height == 0 {
            return bad("input height must be positive".into());
        }
        let g = &self.gabor;
        if g.orientations_deg.is_empty() || g.kernel_size.is_multiple_of(2) || g.wavelength <= 0.0 || g.sigma <= 0.0 {
            return bad(format!("invalid Gabor bank {g:?}"));
        }
        self.alphabet()?;
        let n = self.stages.len();
        if n < 2 || self.stages[n - 2] != LayerSpec::Collapse || self.stages[n - 1] != LayerSpec::Softmax {
            return bad("stage plan must end with collapse followed by softmax".into());
        }
        for (i, s) in self.stages[..n - 2].iter().enumerate() {
            match *s {
                LayerSpec::Subsample { fy, fx, units } if fy == 0 || fx == 0 || units == 0 => {
                    return bad(format!("stage {i}: subsample factors and units must be >= 1"));
                }
                LayerSpec::Leaky { units } | LayerSpec::Mdlstm { units } | LayerSpec::Tanh { units } if units == 0 => {
                    return bad(format!("stage {i}: zero units"));
                }
                LayerSpec::Collapse | LayerSpec::Softmax => {
                    return bad(format!("stage {i}: {} only allowed at the end", s.kind_name()));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Channel count entering each stage, plus the final output size.
    fn channel_trace(&self) -> Result<Vec<usize>> {
        let mut c = self.gabor.orientations_deg.len();
        let mut out = Vec::with_capacity(self.stages.len() + 1);
        for s in &self.stages {
            out.push(c);
            c = match *s {
                LayerSpec::Subsample { units, .. }
                | LayerSpec::Leaky { units }
                | LayerSpec::Mdlstm { units }
                | LayerSpec::Tanh { units } => units,
                LayerSpec::Collapse => c,
                LayerSpec::Softmax => self.output_size()?,
            };
        }
        out.push(c);
        Ok(out)
    }

    /// Trainable parameter count of every stage, in stage order.
    pub fn param_counts(&self) -> Result<Vec<usize>> {
        let trace = self.channel_trace()?;
        let k = self.output_size()?;
        Ok(self
            .stages
            .iter()
            .zip(&trace)
            .map(|(s, &c)| match *s {
                LayerSpec::Subsample { fy, fx, units } => units * (c * fy * fx + 1),
                LayerSpec::Leaky { units } => 4 * CellKind::Leaky.blocks() * units * (c + 2 * units + 1),
                LayerSpec::Mdlstm { units } => 4 * CellKind::Lstm.blocks() * units * (c + 2 * units + 1),
                LayerSpec::Tanh { units } => units * (c + 1),
                LayerSpec::Collapse => 0,
                LayerSpec::Softmax => k * (c + 1),
            })
            .collect())
    }

    pub fn total_trainable(&self) -> Result<usize> {
        Ok(self.param_counts()?.iter().sum())
    }

    /// Sum of units over all trainable stages plus the output neurons.
    pub fn cell_count(&self) -> Result<usize> {
        let units: usize = self
            .stages
            .iter()
            .map(|s| match *s {
                LayerSpec::Subsample { units, .. }
                | LayerSpec::Leaky { units }
                | LayerSpec::Mdlstm { units }
                | LayerSpec::Tanh { units } => units,
                _ => 0,
            })
            .sum();
        Ok(units + self.output_size()?)
    }

    /// Product of all horizontal subsampling factors.
    pub fn x_factor(&self) -> usize {
        self.stages
            .iter()
            .map(|s| match *s {
                LayerSpec::Subsample { fx, .. } => fx,
                _ => 1,
            })
            .product()
    }

    /// Output frames for an input of `width` pixels (stepwise ceilings).
    pub fn timesteps(&self, width: usize) -> usize {
        self.stages.iter().fold(width, |w, s| match *s {
            LayerSpec::Subsample { fx, .. } => w.div_ceil(fx),
            _ => w,
        })
    }

    /// Grid height after every stage, starting with the input height.
    pub fn height_trace(&self) -> Vec<usize> {
        let mut h = self.input_height;
        let mut out = vec![h];
        for s in &self.stages {
            h = match *s {
                LayerSpec::Subsample { fy, .. } => h.div_ceil(fy),
                LayerSpec::Collapse => 1,
                _ => h,
            };
            out.push(h);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: NetworkSpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidSpec(format!("descriptor JSON: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    /// The full layer chain: subsample(4,3), leaky, subsample(4,3), tanh,
    /// subsample(4,1), leaky, collapse, softmax. `units` lists the six
    /// trainable layer widths in that order.
    pub fn standard(name: &str, field: FieldType, units: [usize; 6], seed: u64) -> Self {
        let [u1, u2, u3, u4, u5, u6] = units;
        NetworkSpec {
            name: name.into(),
            input_height: field.input_height(),
            gabor: GaborBank::default(),
            stages: vec![
                LayerSpec::Subsample { fy: 4, fx: 3, units: u1 },
                LayerSpec::Leaky { units: u2 },
                LayerSpec::Subsample { fy: 4, fx: 3, units: u3 },
                LayerSpec::Tanh { units: u4 },
                LayerSpec::Subsample { fy: 4, fx: 1, units: u5 },
                LayerSpec::Leaky { units: u6 },
                LayerSpec::Collapse,
                LayerSpec::Softmax,
            ],
            alphabet: AlphabetSpec::Field(field),
            seed,
        }
    }

    /// Small network for 16-pixel-high inputs: subsample(4, fx), leaky,
    /// subsample(4,1), leaky, collapse, softmax.
    pub fn desk(name: &str, alphabet: AlphabetSpec, fx: usize, units: [usize; 4], seed: u64) -> Self {
        let [u1, u2, u3, u4] = units;
        NetworkSpec {
            name: name.into(),
            input_height: 16,
            gabor: GaborBank { orientations_deg: vec![0.0, 45.0, 90.0, 135.0], wavelength: 4.0, sigma: 2.0, kernel_size: 7 },
            stages: vec![
                LayerSpec::Subsample { fy: 4, fx, units: u1 },
                LayerSpec::Leaky { units: u2 },
                LayerSpec::Subsample { fy: 4, fx: 1, units: u3 },
                LayerSpec::Leaky { units: u4 },
                LayerSpec::Collapse,
                LayerSpec::Softmax,
            ],
            alphabet,
            seed,
        }
    }
}
