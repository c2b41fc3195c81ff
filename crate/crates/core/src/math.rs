//! Thin wrappers so numeric code reads the same with or without `std`.

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

#[inline]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub(crate) fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

/// `ln(e^a + e^b)` without overflow.
#[inline]
pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + libm::log1p(libm::exp(lo - hi))
}

/// `a · b` for equal-length slices.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out = M · v` where `M` is `out.len() × v.len()` row-major.
#[inline]
pub(crate) fn matvec(m: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = v.len();
    for (row, o) in m.chunks_exact(cols).zip(out.iter_mut()) {
        *o = dot(row, v);
    }
}

/// `dm += dz ⊗ v` and `dv += Mᵀ · dz`.
#[inline]
pub(crate) fn matvec_backward(m: &[f64], v: &[f64], dz: &[f64], dm: &mut [f64], dv: &mut [f64]) {
    let cols = v.len();
    for ((row, drow), &g) in m.chunks_exact(cols).zip(dm.chunks_exact_mut(cols)).zip(dz) {
        if g == 0.0 {
            continue;
        }
        for ((d, &x), (acc, &w)) in drow.iter_mut().zip(v).zip(dv.iter_mut().zip(row)) {
            *d += g * x;
            *acc += g * w;
        }
    }
}
