//! Thin wrappers over `libm` so call sites read like std float methods.

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub(crate) fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub(crate) fn cbrt(x: f64) -> f64 {
    libm::cbrt(x)
}

#[inline]
pub(crate) fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}

/// Logistic sigmoid, evaluated without overflow for large |x|.
#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

#[inline]
pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `ceil(v)` clamped into `[0, n - 1]`.
#[inline]
pub(crate) fn ceil_clamped(v: f64, n: usize) -> usize {
    (libm::ceil(v).max(0.0) as usize).min(n - 1)
}

/// `floor(v)` clamped into `[0, n - 1]`.
#[inline]
pub(crate) fn floor_clamped(v: f64, n: usize) -> usize {
    (floor(v).max(0.0) as usize).min(n - 1)
}

#[inline]
pub(crate) fn ceil_usize(v: f64) -> usize {
    libm::ceil(v).max(0.0) as usize
}
