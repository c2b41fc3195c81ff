use alloc::vec;
use alloc::vec::Vec;

use super::{FeatureGrid, OutputMatrix};
use crate::error::{Error, Result};
use crate::math::{self, matvec, matvec_backward};

fn gather_block(grid: &FeatureGrid, fy: usize, fx: usize, bx: usize, by: usize, v: &mut [f64]) {
    let c = grid.channels();
    let mut o = 0;
    for dy in 0..fy {
        let y = by * fy + dy;
        for dx in 0..fx {
            let x = bx * fx + dx;
            if x < grid.width() && y < grid.height() {
                v[o..o + c].copy_from_slice(grid.at(x, y));
            } else {
                v[o..o + c].fill(0.0);
            }
            o += c;
        }
    }
    v[o] = 1.0;
}

/// Concatenates each `fy × fx` block (zero-padded at the borders) channel-wise
/// and maps it through `tanh(W · block + b)`. `weights` is the
/// `units × (channels·fy·fx + 1)` matrix with the bias last in each row.
pub fn subsample(grid: &FeatureGrid, fy: usize, fx: usize, weights: &[f64]) -> Result<FeatureGrid> {
    if fy == 0 || fx == 0 {
        return Err(Error::InvalidParameter("subsample factors must be >= 1".into()));
    }
    let cat = grid.channels() * fy * fx + 1;
    if weights.is_empty() || !weights.len().is_multiple_of(cat) {
        return Err(Error::WeightShape(alloc::format!(
            "subsample weights {} not a multiple of {cat}",
            weights.len()
        )));
    }
    let units = weights.len() / cat;
    let (ow, oh) = (grid.width().div_ceil(fx), grid.height().div_ceil(fy));
    let mut out = FeatureGrid::zeros(ow, oh, units);
    let mut v = vec![0.0; cat];
    for by in 0..oh {
        for bx in 0..ow {
            gather_block(grid, fy, fx, bx, by, &mut v);
            let o = out.at_mut(bx, by);
            matvec(weights, &v, o);
            o.iter_mut().for_each(|z| *z = math::tanh(*z));
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn subsample_backward(
    grid: &FeatureGrid,
    fy: usize,
    fx: usize,
    weights: &[f64],
    out: &FeatureGrid,
    dout: &FeatureGrid,
    dweights: &mut [f64],
    mut dinput: Option<&mut FeatureGrid>,
) {
    let c = grid.channels();
    let cat = c * fy * fx + 1;
    let mut v = vec![0.0; cat];
    let mut dv = vec![0.0; cat];
    let mut dz = vec![0.0; out.channels()];
    for by in 0..out.height() {
        for bx in 0..out.width() {
            for ((d, &y), &g) in dz.iter_mut().zip(out.at(bx, by)).zip(dout.at(bx, by)) {
                *d = g * (1.0 - y * y);
            }
            gather_block(grid, fy, fx, bx, by, &mut v);
            dv.fill(0.0);
            matvec_backward(weights, &v, &dz, dweights, &mut dv);
            if let Some(di) = dinput.as_deref_mut() {
                let mut o = 0;
                for dy in 0..fy {
                    let y = by * fy + dy;
                    for dx in 0..fx {
                        let x = bx * fx + dx;
                        if x < grid.width() && y < grid.height() {
                            for (acc, d) in di.at_mut(x, y).iter_mut().zip(&dv[o..o + c]) {
                                *acc += d;
                            }
                        }
                        o += c;
                    }
                }
            }
        }
    }
}

/// Element-wise sum of the four directional outputs.
pub fn direction_merge(grids: &[FeatureGrid; 4]) -> Result<FeatureGrid> {
    let first = &grids[0];
    let shape = (first.width(), first.height(), first.channels());
    if grids.iter().any(|g| (g.width(), g.height(), g.channels()) != shape) {
        return Err(Error::InvalidParameter("directional outputs differ in shape".into()));
    }
    let mut out = first.clone();
    for g in &grids[1..] {
        for (o, v) in out.values_mut().iter_mut().zip(g.values()) {
            *o += v;
        }
    }
    Ok(out)
}

/// Sums every column over its remaining rows; the result has height 1 and
/// one position per output frame.
pub fn collapse_columns(grid: &FeatureGrid) -> FeatureGrid {
    let c = grid.channels();
    let mut out = FeatureGrid::zeros(grid.width(), 1, c);
    for y in 0..grid.height() {
        for x in 0..grid.width() {
            for (o, v) in out.at_mut(x, 0).iter_mut().zip(grid.at(x, y)) {
                *o += v;
            }
        }
    }
    out
}

/// Column-wise softmax with max subtraction. `logits` is `timesteps ×
/// classes` row-major. Probabilities are floored at the smallest positive
/// normal double so that every entry stays strictly positive.
pub fn softmax_columns(logits: &[f64], classes: usize, blank: usize) -> Result<OutputMatrix> {
    if classes == 0 || !logits.len().is_multiple_of(classes) {
        return Err(Error::InvalidMatrix("logit length is not a multiple of the class count".into()));
    }
    let mut probs: Vec<f64> = Vec::with_capacity(logits.len());
    for col in logits.chunks_exact(classes) {
        let m = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = probs.len();
        probs.extend(col.iter().map(|&z| math::exp(z - m)));
        let sum: f64 = probs[start..].iter().sum();
        for p in &mut probs[start..] {
            *p = (*p / sum).max(f64::MIN_POSITIVE);
        }
    }
    OutputMatrix::new(logits.len() / classes, classes, blank, probs)
}
