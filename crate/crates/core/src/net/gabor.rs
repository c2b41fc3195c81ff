use alloc::vec;
use alloc::vec::Vec;

use super::{FeatureGrid, GaborBank};
use crate::preproc::Raster;

/// Zero-mean, unit-L2 Gabor kernel (`size × size`, row-major) at angle
/// `theta` radians. At angle 0 the carrier varies along x.
pub fn gabor_kernel(theta: f64, bank: &GaborBank) -> Vec<f64> {
    let k = bank.kernel_size;
    let r = (k / 2) as i64;
    let (s, c) = (libm::sin(theta), libm::cos(theta));
    let two_pi = 2.0 * core::f64::consts::PI;
    let mut out = Vec::with_capacity(k * k);
    for dy in -r..=r {
        for dx in -r..=r {
            let (x, y) = (dx as f64, dy as f64);
            let xr = x * c + y * s;
            let yr = -x * s + y * c;
            let env = libm::exp(-(xr * xr + yr * yr) / (2.0 * bank.sigma * bank.sigma));
            out.push(env * libm::cos(two_pi * xr / bank.wavelength));
        }
    }
    let mean = out.iter().sum::<f64>() / out.len() as f64;
    out.iter_mut().for_each(|v| *v -= mean);
    let norm = libm::sqrt(out.iter().map(|v| v * v).sum::<f64>());
    if norm > 0.0 {
        out.iter_mut().for_each(|v| *v /= norm);
    }
    out
}

/// Same-size 2-D convolution with zero padding:
/// `out(x, y) = Σ k(dx, dy) · in(x − dx, y − dy)`.
pub fn convolve(input: &[f64], width: usize, height: usize, kernel: &[f64], size: usize) -> Vec<f64> {
    let r = (size / 2) as i64;
    let (w, h) = (width as i64, height as i64);
    let mut out = vec![0.0; width * height];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in -r..=r {
                let sy = y - dy;
                if sy < 0 || sy >= h {
                    continue;
                }
                let krow = ((dy + r) as usize) * size;
                let irow = (sy as usize) * width;
                for dx in -r..=r {
                    let sx = x - dx;
                    if sx < 0 || sx >= w {
                        continue;
                    }
                    acc += kernel[krow + (dx + r) as usize] * input[irow + sx as usize];
                }
            }
            out[(y as usize) * width + x as usize] = acc;
        }
    }
    out
}

/// One channel per orientation: the raster is turned into ink in [0, 1],
/// mean-shifted, and convolved with each fixed kernel.
pub fn gabor_forward(r: &Raster, bank: &GaborBank) -> FeatureGrid {
    let (w, h) = (r.width(), r.height());
    let ink: Vec<f64> = r.pixels().iter().map(|&v| 1.0 - f64::from(v) / 255.0).collect();
    let mean = ink.iter().sum::<f64>() / ink.len() as f64;
    let centered: Vec<f64> = ink.iter().map(|v| v - mean).collect();
    let channels = bank.orientations_deg.len();
    let mut grid = FeatureGrid::zeros(w, h, channels);
    for (ch, &deg) in bank.orientations_deg.iter().enumerate() {
        let kernel = gabor_kernel(deg.to_radians(), bank);
        let resp = convolve(&centered, w, h, &kernel, bank.kernel_size);
        for (i, v) in resp.into_iter().enumerate() {
            grid.values[i * channels + ch] = v;
        }
    }
    grid
}
