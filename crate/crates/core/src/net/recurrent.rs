//! Two-dimensional recurrent cells.
//!
//! Each direction owns one block matrix acting on the concatenation
//! `[input; neighbour_y; neighbour_x; 1]`. The leaky cell has four row blocks
//! (candidate, input gate, y gate, x gate); the LSTM cell five (input gate,
//! y forget, x forget, output gate, cell input).

use alloc::vec;
use alloc::vec::Vec;

use super::{Direction, FeatureGrid};
use crate::error::{Error, Result};
use crate::math::{matvec, matvec_backward, sigmoid, tanh};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Leaky,
    Lstm,
}

impl CellKind {
    /// Row blocks of `units` rows in the per-direction matrix.
    pub fn blocks(self) -> usize {
        match self {
            CellKind::Leaky => 4,
            CellKind::Lstm => 5,
        }
    }

    fn aux_width(self, units: usize) -> usize {
        match self {
            // candidate h, then g_in, g_y, g_x
            CellKind::Leaky => 4 * units,
            // activated gates i, fy, fx, o, g, then cell state
            CellKind::Lstm => 6 * units,
        }
    }

    /// Parameters of one direction for `inputs` input channels.
    pub fn direction_params(self, inputs: usize, units: usize) -> usize {
        self.blocks() * units * (inputs + 2 * units + 1)
    }
}

/// Activations of one directional pass, kept for the backward sweep.
#[derive(Debug, Clone)]
pub(crate) struct DirCache {
    /// Per-position output (leaky state or LSTM hidden), `units` wide.
    pub state: Vec<f64>,
    aux: Vec<f64>,
}

struct Geometry {
    width: usize,
    height: usize,
    inputs: usize,
    units: usize,
}

impl Geometry {
    fn of(input: &FeatureGrid, units: usize) -> Self {
        Geometry { width: input.width(), height: input.height(), inputs: input.channels(), units }
    }

    fn cat(&self) -> usize {
        self.inputs + 2 * self.units + 1
    }

    fn neighbours(&self, dir: Direction, col: usize, row: usize) -> (Option<usize>, Option<usize>) {
        let y = dir.y_pred(row, self.height).map(|r| r * self.width + col);
        let x = dir.x_pred(col, self.width).map(|c| row * self.width + c);
        (y, x)
    }

    #[allow(clippy::too_many_arguments)]
    fn fill_concat(&self, v: &mut [f64], input: &FeatureGrid, state: &[f64], col: usize, row: usize, ny: Option<usize>, nx: Option<usize>) {
        let (c, u) = (self.inputs, self.units);
        v[..c].copy_from_slice(input.at(col, row));
        match ny {
            Some(p) => v[c..c + u].copy_from_slice(&state[p * u..(p + 1) * u]),
            None => v[c..c + u].fill(0.0),
        }
        match nx {
            Some(p) => v[c + u..c + 2 * u].copy_from_slice(&state[p * u..(p + 1) * u]),
            None => v[c + u..c + 2 * u].fill(0.0),
        }
        v[c + 2 * u] = 1.0;
    }
}

fn check_weights(kind: CellKind, weights: &[f64], g: &Geometry) -> Result<()> {
    let expected = kind.direction_params(g.inputs, g.units);
    if weights.len() != expected {
        return Err(Error::WeightShape(alloc::format!(
            "{kind:?} direction needs {expected} weights, got {}",
            weights.len()
        )));
    }
    Ok(())
}

pub(crate) fn forward_dir(
    kind: CellKind,
    units: usize,
    weights: &[f64],
    input: &FeatureGrid,
    dir: Direction,
    stage: &str,
) -> Result<DirCache> {
    let g = Geometry::of(input, units);
    check_weights(kind, weights, &g)?;
    let (c, u) = (g.inputs, g.units);
    let aw = kind.aux_width(u);
    let cells = g.width * g.height;
    let mut state = vec![0.0; cells * u];
    let mut aux = vec![0.0; cells * aw];
    let mut v = vec![0.0; g.cat()];
    let mut z = vec![0.0; kind.blocks() * u];

    for i in 0..g.width {
        let col = dir.column_at(i, g.width);
        for j in 0..g.height {
            let row = dir.row_at(j, g.height);
            let pos = row * g.width + col;
            let (ny, nx) = g.neighbours(dir, col, row);
            g.fill_concat(&mut v, input, &state, col, row, ny, nx);
            matvec(weights, &v, &mut z);
            match kind {
                CellKind::Leaky => {
                    for k in 0..u {
                        let h = tanh(z[k]);
                        let (ain, ay, ax) = (z[u + k], z[2 * u + k], z[3 * u + k]);
                        let m = ain.max(ay).max(ax);
                        let (ein, ey, ex) = (crate::math::exp(ain - m), crate::math::exp(ay - m), crate::math::exp(ax - m));
                        let sum = ein + ey + ex;
                        let (gin, gy, gx) = (ein / sum, ey / sum, ex / sum);
                        let (sy, sx) = (v[c + k], v[c + u + k]);
                        let s = gy * sy + gx * sx + gin * h;
                        if !s.is_finite() {
                            return Err(Error::NonFinite { stage: stage.into(), x: col, y: row });
                        }
                        state[pos * u + k] = s;
                        let a = &mut aux[pos * aw..(pos + 1) * aw];
                        a[k] = h;
                        a[u + k] = gin;
                        a[2 * u + k] = gy;
                        a[3 * u + k] = gx;
                    }
                }
                CellKind::Lstm => {
                    for k in 0..u {
                        let ig = sigmoid(z[k]);
                        let fy = sigmoid(z[u + k]);
                        let fx = sigmoid(z[2 * u + k]);
                        let og = sigmoid(z[3 * u + k]);
                        let cand = tanh(z[4 * u + k]);
                        let cy = ny.map_or(0.0, |p| aux[p * aw + 5 * u + k]);
                        let cx = nx.map_or(0.0, |p| aux[p * aw + 5 * u + k]);
                        let cell = ig * cand + fy * cy + fx * cx;
                        let h = og * tanh(cell);
                        if !h.is_finite() || !cell.is_finite() {
                            return Err(Error::NonFinite { stage: stage.into(), x: col, y: row });
                        }
                        state[pos * u + k] = h;
                        let a = &mut aux[pos * aw..(pos + 1) * aw];
                        a[k] = ig;
                        a[u + k] = fy;
                        a[2 * u + k] = fx;
                        a[3 * u + k] = og;
                        a[4 * u + k] = cand;
                        a[5 * u + k] = cell;
                    }
                }
            }
        }
    }
    Ok(DirCache { state, aux })
}

/// Reverse sweep of one direction. `dout` is the gradient at this
/// direction's output; parameter gradients accumulate into `dweights` and
/// input gradients into `dinput` when given.
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward_dir(
    kind: CellKind,
    units: usize,
    weights: &[f64],
    input: &FeatureGrid,
    dir: Direction,
    cache: &DirCache,
    dout: &[f64],
    dweights: &mut [f64],
    mut dinput: Option<&mut FeatureGrid>,
) {
    let g = Geometry::of(input, units);
    let (c, u) = (g.inputs, g.units);
    let aw = kind.aux_width(u);
    let cells = g.width * g.height;
    let mut ds = dout.to_vec();
    let mut dcell = match kind {
        CellKind::Lstm => vec![0.0; cells * u],
        CellKind::Leaky => Vec::new(),
    };
    let mut v = vec![0.0; g.cat()];
    let mut dz = vec![0.0; kind.blocks() * u];
    let mut dv = vec![0.0; g.cat()];
    // Gradient reaching the neighbour states outside the block matrix; only
    // the leaky cell mixes neighbour states in directly.
    let mut direct_y = vec![0.0; u];
    let mut direct_x = vec![0.0; u];

    for i in (0..g.width).rev() {
        let col = dir.column_at(i, g.width);
        for j in (0..g.height).rev() {
            let row = dir.row_at(j, g.height);
            let pos = row * g.width + col;
            let (ny, nx) = g.neighbours(dir, col, row);
            g.fill_concat(&mut v, input, &cache.state, col, row, ny, nx);
            let a = &cache.aux[pos * aw..(pos + 1) * aw];
            dv.fill(0.0);
            match kind {
                CellKind::Leaky => {
                    for k in 0..u {
                        let d = ds[pos * u + k];
                        let (h, gin, gy, gx) = (a[k], a[u + k], a[2 * u + k], a[3 * u + k]);
                        let (sy, sx) = (v[c + k], v[c + u + k]);
                        let (dgin, dgy, dgx) = (d * h, d * sy, d * sx);
                        let mean = gin * dgin + gy * dgy + gx * dgx;
                        dz[k] = d * gin * (1.0 - h * h);
                        dz[u + k] = gin * (dgin - mean);
                        dz[2 * u + k] = gy * (dgy - mean);
                        dz[3 * u + k] = gx * (dgx - mean);
                        direct_y[k] = d * gy;
                        direct_x[k] = d * gx;
                    }
                }
                CellKind::Lstm => {
                    for k in 0..u {
                        let dh = ds[pos * u + k];
                        let (ig, fy, fx, og, cand, cell) = (a[k], a[u + k], a[2 * u + k], a[3 * u + k], a[4 * u + k], a[5 * u + k]);
                        let tc = tanh(cell);
                        let dc = dcell[pos * u + k] + dh * og * (1.0 - tc * tc);
                        let cy = ny.map_or(0.0, |p| cache.aux[p * aw + 5 * u + k]);
                        let cx = nx.map_or(0.0, |p| cache.aux[p * aw + 5 * u + k]);
                        dz[k] = dc * cand * ig * (1.0 - ig);
                        dz[u + k] = dc * cy * fy * (1.0 - fy);
                        dz[2 * u + k] = dc * cx * fx * (1.0 - fx);
                        dz[3 * u + k] = dh * tc * og * (1.0 - og);
                        dz[4 * u + k] = dc * ig * (1.0 - cand * cand);
                        if let Some(p) = ny {
                            dcell[p * u + k] += dc * fy;
                        }
                        if let Some(p) = nx {
                            dcell[p * u + k] += dc * fx;
                        }
                    }
                }
            }
            matvec_backward(weights, &v, &dz, dweights, &mut dv);
            if let Some(di) = dinput.as_deref_mut() {
                for (acc, d) in di.at_mut(col, row).iter_mut().zip(&dv[..c]) {
                    *acc += d;
                }
            }
            if let Some(p) = ny {
                for k in 0..u {
                    ds[p * u + k] += dv[c + k] + direct_y[k];
                }
            }
            if let Some(p) = nx {
                for k in 0..u {
                    ds[p * u + k] += dv[c + u + k] + direct_x[k];
                }
            }
        }
    }
}

fn grid_from_state(input: &FeatureGrid, units: usize, cache: DirCache) -> FeatureGrid {
    FeatureGrid { width: input.width(), height: input.height(), channels: units, values: cache.state }
}

/// One directional pass of the leaky cell. `weights` is that direction's
/// `4·units × (channels + 2·units + 1)` block matrix, row-major, with rows
/// ordered candidate, input gate, y gate, x gate and the bias in the last
/// column.
pub fn leaky_cell_forward(weights: &[f64], units: usize, input: &FeatureGrid, dir: Direction) -> Result<FeatureGrid> {
    let cache = forward_dir(CellKind::Leaky, units, weights, input, dir, "leaky cell")?;
    Ok(grid_from_state(input, units, cache))
}

/// One directional pass of the LSTM cell. Rows are ordered input gate,
/// y forget gate, x forget gate, output gate, cell input.
pub fn mdlstm_cell_forward(weights: &[f64], units: usize, input: &FeatureGrid, dir: Direction) -> Result<FeatureGrid> {
    let cache = forward_dir(CellKind::Lstm, units, weights, input, dir, "mdlstm cell")?;
    Ok(grid_from_state(input, units, cache))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math;

    const TD_LR: Direction = Direction { top_down: true, left_to_right: true };

    fn grid(w: usize, h: usize, c: usize, seed: u64) -> FeatureGrid {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let values = (0..w * h * c)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect();
        FeatureGrid::from_values(w, h, c, values).unwrap()
    }

    #[test]
    fn leaky_zero_weights_give_zero_state() {
        let input = grid(3, 4, 2, 1);
        let w = vec![0.0; CellKind::Leaky.direction_params(2, 3)];
        for dir in Direction::ALL {
            let out = leaky_cell_forward(&w, 3, &input, dir).unwrap();
            assert!(out.values().iter().all(|&v| v == 0.0));
        }
        let cache = forward_dir(CellKind::Leaky, 3, &w, &input, TD_LR, "t").unwrap();
        let aw = 12;
        for pos in 0..12 {
            for k in 3..12 {
                assert!((cache.aux[pos * aw + k] - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn leaky_two_step_by_hand() {
        // Width 2, height 1, scalar input and unit.
        // cat = [x, sy, sx, 1]; rows: candidate, g_in, g_y, g_x.
        let w = vec![
            0.8, 0.3, 0.5, 0.1, // candidate
            0.2, 0.0, 0.0, 0.0, // input gate
            0.0, 0.0, 0.0, 0.0, // y gate
            0.0, 0.0, -0.4, 0.3, // x gate
        ];
        let input = FeatureGrid::from_values(2, 1, 1, vec![1.0, -0.5]).unwrap();
        let out = leaky_cell_forward(&w, 1, &input, TD_LR).unwrap();

        let softmax3 = |a: f64, b: f64, c: f64| {
            let (ea, eb, ec) = (libm::exp(a), libm::exp(b), libm::exp(c));
            let s = ea + eb + ec;
            (ea / s, eb / s, ec / s)
        };
        // position (0,0): no neighbours
        let h0 = libm::tanh(0.8 * 1.0 + 0.1);
        let (gin0, _, _) = softmax3(0.2, 0.0, 0.3);
        let s0 = gin0 * h0;
        // position (1,0): x-neighbour is s0
        let h1 = libm::tanh(0.8 * -0.5 + 0.5 * s0 + 0.1);
        let (gin1, _, gx1) = softmax3(0.2 * -0.5, 0.0, -0.4 * s0 + 0.3);
        let s1 = gx1 * s0 + gin1 * h1;
        assert!((out.values()[0] - s0).abs() < 1e-14);
        assert!((out.values()[1] - s1).abs() < 1e-14);
    }

    #[test]
    fn leaky_states_bounded() {
        let input = grid(6, 5, 3, 9);
        let w: Vec<f64> = grid(1, 1, CellKind::Leaky.direction_params(3, 4), 4).values().iter().map(|v| 5.0 * v).collect();
        for dir in Direction::ALL {
            let out = leaky_cell_forward(&w, 4, &input, dir).unwrap();
            assert!(out.values().iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn lstm_zero_weights_and_bias_by_hand() {
        let input = grid(2, 2, 1, 3);
        let w = vec![0.0; CellKind::Lstm.direction_params(1, 1)];
        let out = mdlstm_cell_forward(&w, 1, &input, TD_LR).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));

        // Cell-input bias 1: g = tanh(1), gates 0.5 everywhere.
        let mut w = vec![0.0; CellKind::Lstm.direction_params(1, 1)];
        w[4 * 4 + 3] = 1.0;
        let out = mdlstm_cell_forward(&w, 1, &input, TD_LR).unwrap();
        let g = libm::tanh(1.0);
        let c00 = 0.5 * g;
        let c01 = 0.5 * g + 0.5 * c00; // (col 0, row 1) has y-neighbour only
        let c10 = 0.5 * g + 0.5 * c00;
        let c11 = 0.5 * g + 0.5 * c01 + 0.5 * c10;
        let h = |c: f64| 0.5 * libm::tanh(c);
        let v = out.values();
        assert!((v[0] - h(c00)).abs() < 1e-15);
        assert!((v[2] - h(c01)).abs() < 1e-15);
        assert!((v[1] - h(c10)).abs() < 1e-15);
        assert!((v[3] - h(c11)).abs() < 1e-15);
    }

    #[test]
    fn lstm_single_cell_is_one_step() {
        let input = FeatureGrid::from_values(1, 1, 2, vec![0.3, -0.7]).unwrap();
        let w: Vec<f64> = grid(1, 1, CellKind::Lstm.direction_params(2, 1), 11).values().to_vec();
        let out = mdlstm_cell_forward(&w, 1, &input, TD_LR).unwrap();
        // cat = [x0, x1, hy, hx, 1]; neighbours are zero.
        let pre = |b: usize| w[b * 5] * 0.3 + w[b * 5 + 1] * -0.7 + w[b * 5 + 4];
        let cell = math::sigmoid(pre(0)) * libm::tanh(pre(4));
        let h = math::sigmoid(pre(3)) * libm::tanh(cell);
        assert!((out.values()[0] - h).abs() < 1e-15);
    }

    #[test]
    fn cell_kinds_share_shapes() {
        let input = grid(5, 3, 2, 2);
        let lw = vec![0.01; CellKind::Leaky.direction_params(2, 4)];
        let mw = vec![0.01; CellKind::Lstm.direction_params(2, 4)];
        let a = leaky_cell_forward(&lw, 4, &input, TD_LR).unwrap();
        let b = mdlstm_cell_forward(&mw, 4, &input, TD_LR).unwrap();
        assert_eq!((a.width(), a.height(), a.channels()), (b.width(), b.height(), b.channels()));
    }

    #[test]
    fn wrong_weight_length_rejected() {
        let input = grid(2, 2, 2, 2);
        assert!(leaky_cell_forward(&[0.0; 3], 1, &input, TD_LR).is_err());
    }

    #[test]
    fn non_finite_input_is_reported() {
        let mut input = grid(2, 2, 1, 2);
        input.at_mut(1, 1)[0] = f64::NAN;
        let w = vec![0.1; CellKind::Leaky.direction_params(1, 1)];
        let err = leaky_cell_forward(&w, 1, &input, TD_LR).unwrap_err();
        assert!(matches!(err, Error::NonFinite { x: 1, y: 1, .. }));
    }
}
