//! Scalar helpers shared by the kernel and quadrature code.

use num_complex::Complex;

pub type C64 = Complex<f64>;

pub const PI: f64 = core::f64::consts::PI;

/// Below this log-magnitude `exp` underflows to zero in `f64`.
pub const LOG_UNDERFLOW: f64 = -745.0;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

/// `exp` of a complex log-value with the underflow floor applied.
#[inline]
pub fn exp_clamped(e: C64) -> C64 {
    if e.re < LOG_UNDERFLOW {
        C64::new(0.0, 0.0)
    } else {
        let m = libm::exp(e.re);
        let (s, c) = libm::sincos(e.im);
        C64::new(m * c, m * s)
    }
}

/// Hyperbolic functions of `2t` (and `tanh t`) evaluated without cancellation
/// for small `t`, from `expm1(2t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub sinh2: f64,
    pub cosh2: f64,
    pub coth2: f64,
    pub csch2: f64,
    pub tanh2: f64,
    /// `tanh t = (cosh 2t − 1)/sinh 2t`.
    pub tanh1: f64,
}

impl Hyper {
    pub fn new(t: f64) -> Self {
        let em = libm::expm1(2.0 * t);
        let ep = em + 1.0;
        // sinh = em (em + 2) / (2 (em + 1)), cosh − 1 = em² / (2 (em + 1))
        let sinh2 = em * (em + 2.0) / (2.0 * ep);
        let cosh_m1 = em * em / (2.0 * ep);
        let cosh2 = 1.0 + cosh_m1;
        let tanh1 = if t < 20.0 { cosh_m1 / sinh2 } else { 1.0 };
        let tanh2 = if t < 20.0 { sinh2 / cosh2 } else { 1.0 };
        Hyper {
            sinh2,
            cosh2,
            coth2: cosh2 / sinh2,
            csch2: 1.0 / sinh2,
            tanh2,
            tanh1,
        }
    }
}

/// Pairwise summation in a fixed tree order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Complex variant of [`pairwise_sum`].
pub fn pairwise_sum_c(xs: &[C64]) -> C64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        xs.iter().fold(C64::new(0.0, 0.0), |a, &b| a + b)
    } else {
        let mid = xs.len() / 2;
        pairwise_sum_c(&xs[..mid]) + pairwise_sum_c(&xs[mid..])
    }
}
