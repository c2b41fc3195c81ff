//! Table-field image preprocessing.
//!
//! Approximate field polygons are enlarged into a search box, ruled table
//! lines are located as peaks of ink-density projection profiles inside that
//! box, and the writing between the lines is cut out. The crop is then
//! rescaled to the network input height and contrast-stretched. Nothing else
//! (deskew, binarization, denoising) is applied.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::FieldType;
use crate::math;

/// 8-bit grayscale image, row-major, 0 = black, 255 = white.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Raster {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::RasterShape { width, height, len: data.len() });
        }
        Ok(Raster { width, height, data })
    }

    /// A raster filled with one gray value.
    ///
    /// # Panics
    /// If either dimension is zero.
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be positive");
        Raster { width, height, data: vec![value; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    /// Copy of the inclusive rectangle `[x0, x1] × [y0, y1]`.
    pub fn crop(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> Result<Raster> {
        if x1 < x0 || y1 < y0 || x1 >= self.width || y1 >= self.height {
            return Err(Error::InvalidParameter(alloc::format!(
                "crop ({x0},{y0})-({x1},{y1}) outside {}x{}",
                self.width,
                self.height
            )));
        }
        let w = x1 - x0 + 1;
        let mut data = Vec::with_capacity(w * (y1 - y0 + 1));
        for y in y0..=y1 {
            let row = y * self.width;
            data.extend_from_slice(&self.data[row + x0..=row + x1]);
        }
        Raster::new(w, y1 - y0 + 1, data)
    }
}

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelBox {
    pub left: i64,
    pub top: i64,
    pub right: i64,
    pub bottom: i64,
}

/// Approximate outline of one table field on a page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPolygon {
    pub vertices: Vec<(i64, i64)>,
    pub field_type: FieldType,
}

impl FieldPolygon {
    pub fn new(vertices: Vec<(i64, i64)>, field_type: FieldType) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::DegeneratePolygon(alloc::format!(
                "{} vertices, need at least 3",
                vertices.len()
            )));
        }
        Ok(FieldPolygon { vertices, field_type })
    }

    pub fn rectangle(b: PixelBox, field_type: FieldType) -> Self {
        FieldPolygon {
            vertices: vec![(b.left, b.top), (b.right, b.top), (b.right, b.bottom), (b.left, b.bottom)],
            field_type,
        }
    }

    pub fn bounding_box(&self) -> PixelBox {
        let xs = self.vertices.iter().map(|v| v.0);
        let ys = self.vertices.iter().map(|v| v.1);
        PixelBox {
            left: xs.clone().min().unwrap_or(0),
            right: xs.max().unwrap_or(0),
            top: ys.clone().min().unwrap_or(0),
            bottom: ys.max().unwrap_or(0),
        }
    }
}

/// Expands the polygon's bounding box by `margin` on every side and clamps it
/// to the page.
pub fn enlarge_polygon(poly: &FieldPolygon, margin: i64, page: &Raster) -> Result<FieldPolygon> {
    if margin < 0 {
        return Err(Error::InvalidParameter("negative enlargement margin".into()));
    }
    if poly.vertices.len() < 3 {
        return Err(Error::DegeneratePolygon("fewer than 3 vertices".into()));
    }
    let b = poly.bounding_box();
    let max_x = page.width() as i64 - 1;
    let max_y = page.height() as i64 - 1;
    let out = PixelBox {
        left: (b.left - margin).clamp(0, max_x),
        top: (b.top - margin).clamp(0, max_y),
        right: (b.right + margin).clamp(0, max_x),
        bottom: (b.bottom + margin).clamp(0, max_y),
    };
    if out.right <= out.left || out.bottom <= out.top {
        return Err(Error::DegeneratePolygon(alloc::format!(
            "zero area after clamping: ({},{})-({},{})",
            out.left,
            out.top,
            out.right,
            out.bottom
        )));
    }
    Ok(FieldPolygon::rectangle(out, poly.field_type))
}

/// Which direction a projection profile runs along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// One value per row, summing across the row. Peaks mark horizontal lines.
    Horizontal,
    /// One value per column. Peaks mark vertical lines.
    Vertical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileVector {
    pub values: Vec<f64>,
    pub axis: Axis,
}

/// Ink-density profile: each pixel contributes `(255 - v) / 255`.
pub fn projection_profile(r: &Raster, axis: Axis) -> ProfileVector {
    let mut values = match axis {
        Axis::Horizontal => vec![0.0; r.height()],
        Axis::Vertical => vec![0.0; r.width()],
    };
    for (y, row) in r.pixels().chunks_exact(r.width()).enumerate() {
        for (x, &v) in row.iter().enumerate() {
            let ink = f64::from(255 - v) / 255.0;
            match axis {
                Axis::Horizontal => values[y] += ink,
                Axis::Vertical => values[x] += ink,
            }
        }
    }
    ProfileVector { values, axis }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakParams {
    /// Odd moving-average window.
    pub smoothing_window: usize,
    /// Minimum smoothed height relative to the global smoothed maximum.
    pub threshold_fraction: f64,
    pub min_separation: usize,
}

impl Default for PeakParams {
    fn default() -> Self {
        PeakParams { smoothing_window: 5, threshold_fraction: 0.5, min_separation: 8 }
    }
}

fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = values.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &v in values {
        prefix.push(prefix.last().copied().unwrap_or(0.0) + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            (prefix[hi + 1] - prefix[lo]) / (hi - lo + 1) as f64
        })
        .collect()
}

/// Finds ruled-line positions as peaks of the smoothed profile.
///
/// A peak is a plateau of the smoothed profile that is strictly higher than
/// its neighbours on both sides (one side suffices at the profile ends). Its
/// position is the raw-profile maximum within half a window of the plateau,
/// which puts a thin line back on its true pixel. Peaks are accepted
/// strongest first and any peak closer than `min_separation` to an accepted
/// one is dropped.
pub fn detect_table_lines(p: &ProfileVector, params: &PeakParams) -> Result<Vec<usize>> {
    let w = params.smoothing_window;
    if w == 0 || w.is_multiple_of(2) {
        return Err(Error::InvalidParameter(alloc::format!("smoothing window {w} must be odd and >= 1")));
    }
    if !(params.threshold_fraction > 0.0 && params.threshold_fraction <= 1.0) {
        return Err(Error::InvalidParameter("threshold fraction must be in (0, 1]".into()));
    }
    let raw = &p.values;
    let n = raw.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let s = moving_average(raw, w);
    let global_max = s.iter().copied().fold(0.0, f64::max);
    if global_max <= 0.0 {
        return Ok(Vec::new());
    }
    let threshold = params.threshold_fraction * global_max;
    let half = w / 2;

    // (strength, raw value at position, position)
    let mut candidates: Vec<(f64, f64, usize)> = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && s[j + 1] == s[i] {
            j += 1;
        }
        let left_lower = i == 0 || s[i - 1] < s[i];
        let right_lower = j + 1 == n || s[j + 1] < s[i];
        let has_drop = i > 0 || j + 1 < n;
        if left_lower && right_lower && has_drop && s[i] >= threshold {
            let lo = i.saturating_sub(half);
            let hi = (j + half).min(n - 1);
            let center2 = i + j; // twice the plateau center
            let pos = (lo..=hi)
                .max_by(|&a, &b| {
                    raw[a]
                        .total_cmp(&raw[b])
                        .then_with(|| (2 * b).abs_diff(center2).cmp(&(2 * a).abs_diff(center2)))
                        .then_with(|| b.cmp(&a))
                })
                .unwrap_or(i);
            candidates.push((s[i], raw[pos], pos));
        }
        i = j + 1;
    }

    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| b.1.total_cmp(&a.1)).then_with(|| a.2.cmp(&b.2)));
    let mut accepted: Vec<usize> = Vec::new();
    for &(_, _, pos) in &candidates {
        if accepted.iter().all(|&q| q.abs_diff(pos) >= params.min_separation.max(1)) {
            accepted.push(pos);
        }
    }
    accepted.sort_unstable();
    Ok(accepted)
}

/// Copies the interior strictly between the four lines.
pub fn cut_cell(page: &Raster, left: usize, right: usize, top: usize, bottom: usize) -> Result<Raster> {
    if left >= right || top >= bottom || right >= page.width() || bottom >= page.height() {
        return Err(Error::InvalidParameter(alloc::format!(
            "cell lines l={left} r={right} t={top} b={bottom} invalid for {}x{} page",
            page.width(),
            page.height()
        )));
    }
    if right - left < 2 || bottom - top < 2 {
        return Err(Error::EmptyCell);
    }
    page.crop(left + 1, top + 1, right - 1, bottom - 1)
}

/// Bilinear rescale to exactly `target_height` rows, keeping the aspect ratio.
pub fn normalize_height(r: &Raster, target_height: usize) -> Result<Raster> {
    if target_height == 0 {
        return Err(Error::InvalidParameter("target height must be >= 1".into()));
    }
    let (w, h) = (r.width(), r.height());
    let scale = target_height as f64 / h as f64;
    let new_w = (math::round(w as f64 * scale) as usize).max(1);
    if new_w == w && target_height == h {
        return Ok(r.clone());
    }
    let sx = w as f64 / new_w as f64;
    let sy = h as f64 / target_height as f64;
    let sample_axis = |dst: usize, step: f64, len: usize| -> (usize, usize, f64) {
        let src = ((dst as f64 + 0.5) * step - 0.5).clamp(0.0, (len - 1) as f64);
        let i0 = math::floor(src) as usize;
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, src - i0 as f64)
    };
    let mut data = Vec::with_capacity(new_w * target_height);
    for y in 0..target_height {
        let (y0, y1, fy) = sample_axis(y, sy, h);
        for x in 0..new_w {
            let (x0, x1, fx) = sample_axis(x, sx, w);
            let top = f64::from(r.get(x0, y0)) * (1.0 - fx) + f64::from(r.get(x1, y0)) * fx;
            let bot = f64::from(r.get(x0, y1)) * (1.0 - fx) + f64::from(r.get(x1, y1)) * fx;
            let v = top * (1.0 - fy) + bot * fy;
            data.push(math::round(v).clamp(0.0, 255.0) as u8);
        }
    }
    Raster::new(new_w, target_height, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub target_height: usize,
    pub low_percentile: f64,
    pub high_percentile: f64,
    pub black_target: u8,
    pub white_target: u8,
}

impl NormalizationSpec {
    pub fn for_field(field: FieldType) -> Self {
        NormalizationSpec { target_height: field.input_height(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_height == 0
            || !(0.0 <= self.low_percentile && self.low_percentile < self.high_percentile && self.high_percentile <= 1.0)
            || self.black_target >= self.white_target
        {
            return Err(Error::InvalidParameter(alloc::format!("{self:?}")));
        }
        Ok(())
    }
}

impl Default for NormalizationSpec {
    fn default() -> Self {
        NormalizationSpec {
            target_height: 128,
            low_percentile: 0.05,
            high_percentile: 0.95,
            black_target: 0,
            white_target: 255,
        }
    }
}

fn percentile(sorted: &[u8], q: f64) -> u8 {
    let idx = math::round(q * (sorted.len() - 1) as f64) as usize;
    sorted[idx.min(sorted.len() - 1)]
}

/// Linear stretch sending the low/high percentile grays to the black/white
/// targets. Constant rasters become entirely `white_target`.
pub fn normalize_contrast(r: &Raster, spec: &NormalizationSpec) -> Result<Raster> {
    spec.validate()?;
    let mut sorted = r.pixels().to_vec();
    sorted.sort_unstable();
    let lo = percentile(&sorted, spec.low_percentile);
    let hi = percentile(&sorted, spec.high_percentile);
    let data = if hi == lo {
        vec![spec.white_target; sorted.len()]
    } else {
        let (lo, hi) = (f64::from(lo), f64::from(hi));
        let (b, w) = (f64::from(spec.black_target), f64::from(spec.white_target));
        let gain = (w - b) / (hi - lo);
        r.pixels()
            .iter()
            .map(|&v| math::round((f64::from(v) - lo) * gain + b).clamp(0.0, 255.0) as u8)
            .collect()
    };
    Raster::new(r.width(), r.height(), data)
}

/// Tunables for cutting one field out of a page.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentParams {
    pub margin: i64,
    pub peaks: PeakParams,
    pub normalization: NormalizationSpec,
}

impl SegmentParams {
    pub fn for_field(field: FieldType) -> Self {
        SegmentParams { margin: 20, peaks: PeakParams::default(), normalization: NormalizationSpec::for_field(field) }
    }
}

/// The four table lines bounding one cell, in page coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellLines {
    pub left: usize,
    pub right: usize,
    pub top: usize,
    pub bottom: usize,
}

/// Picks, for each side of the approximate field box, the strongest detected
/// line in the half of the enlarged box on that side, nearest to the box
/// edge on equal strength. Falls back to the enlarged box edge.
pub fn locate_cell(page: &Raster, poly: &FieldPolygon, params: &SegmentParams) -> Result<CellLines> {
    let approx = poly.bounding_box();
    let search = enlarge_polygon(poly, params.margin, page)?.bounding_box();
    let region = page.crop(search.left as usize, search.top as usize, search.right as usize, search.bottom as usize)?;

    let row_profile = projection_profile(&region, Axis::Horizontal);
    let col_profile = projection_profile(&region, Axis::Vertical);
    let rows = detect_table_lines(&row_profile, &params.peaks)?;
    let cols = detect_table_lines(&col_profile, &params.peaks)?;

    let pick = |lines: &[usize], profile: &ProfileVector, offset: i64, edges: (i64, i64), approx_lo: i64, approx_hi: i64| {
        let center2 = approx_lo + approx_hi;
        let best = |keep: &dyn Fn(i64) -> bool, target: i64, fallback: i64| {
            lines
                .iter()
                .map(|&l| (profile.values[l], l as i64 + offset))
                .filter(|&(_, a)| keep(a))
                .max_by(|x, y| x.0.total_cmp(&y.0).then_with(|| (y.1 - target).abs().cmp(&(x.1 - target).abs())).then(y.1.cmp(&x.1)))
                .map_or(fallback, |(_, a)| a)
        };
        let low = best(&|l| 2 * l < center2, approx_lo, edges.0);
        let high = best(&|l| 2 * l > center2, approx_hi, edges.1);
        (low as usize, high as usize)
    };
    let (top, bottom) = pick(&rows, &row_profile, search.top, (search.top, search.bottom), approx.top, approx.bottom);
    let (left, right) = pick(&cols, &col_profile, search.left, (search.left, search.right), approx.left, approx.right);
    Ok(CellLines { left, right, top, bottom })
}

/// Full field preprocessing: line search, cut-out, height and contrast
/// normalization.
pub fn segment_field(page: &Raster, poly: &FieldPolygon, params: &SegmentParams) -> Result<(Raster, CellLines)> {
    let lines = locate_cell(page, poly, params)?;
    let cell = cut_cell(page, lines.left, lines.right, lines.top, lines.bottom)?;
    let scaled = normalize_height(&cell, params.normalization.target_height)?;
    Ok((normalize_contrast(&scaled, &params.normalization)?, lines))
}
