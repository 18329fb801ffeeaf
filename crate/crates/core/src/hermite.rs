//! Mehler kernel of `∂ₜ − ∂ₓ² + x²` and the Hermite eigenfunction expansion.
//!
//! `K(t,x,y) = (2π sinh 2t)^{-1/2} exp(−coth(2t)(x²+y²)/2 + xy/sinh 2t)`.
//!
//! The exponent is evaluated in the rearranged form
//! `−coth(2t)(x−y)²/2 − xy·tanh t`, which is algebraically identical but does
//! not cancel two large terms when `t` is small and `x ≈ y`. Everything is
//! holomorphic in `x` and `y`, so complex coordinates are accepted throughout.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{exp_clamped, ln, Hyper, C64, LOG_UNDERFLOW, PI};

const LOG_OVERFLOW: f64 = 709.0;

/// Evaluation point `(t, x, y)` of the kernel, with `t > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEval {
    t: f64,
    pub x: C64,
    pub y: C64,
}

impl KernelEval {
    pub fn new(t: f64, x: C64, y: C64) -> Result<Self> {
        check_time(t)?;
        Ok(KernelEval { t, x, y })
    }

    pub fn t(&self) -> f64 {
        self.t
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "kernel time must be positive and finite, got {t}"
        )))
    }
}

/// Index of a Hermite function; its eigenvalue for `−∂² + x²` is `2k+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct HermiteIndex(u32);

impl HermiteIndex {
    pub fn new(k: i64) -> Result<Self> {
        u32::try_from(k).map(HermiteIndex).map_err(|_| {
            Error::domain(format!(
                "Hermite index must be a nonnegative integer, got {k}"
            ))
        })
    }

    pub fn k(self) -> u32 {
        self.0
    }

    pub fn eigenvalue(self) -> f64 {
        2.0 * self.0 as f64 + 1.0
    }
}

/// Exponent of the kernel in cancellation-free form.
#[inline]
pub(crate) fn exponent(h: &Hyper, x: C64, y: C64) -> C64 {
    let d = x - y;
    -(d * d) * (0.5 * h.coth2) - x * y * h.tanh1
}

#[inline]
pub(crate) fn log_prefactor(h: &Hyper) -> f64 {
    -0.5 * ln(2.0 * PI * h.sinh2)
}

/// `−coth(2t)·y + x/sinh(2t)` rewritten as `(x−y)/sinh 2t − y·tanh t`.
#[inline]
pub(crate) fn dy_factor(h: &Hyper, x: C64, y: C64) -> C64 {
    (x - y) * h.csch2 - y * h.tanh1
}

#[inline]
pub(crate) fn kernel_raw(h: &Hyper, x: C64, y: C64) -> C64 {
    exp_clamped(exponent(h, x, y) + log_prefactor(h))
}

fn finite_log(lk: C64) -> Result<C64> {
    if lk.re > LOG_OVERFLOW {
        Err(Error::numeric("Mehler kernel overflows f64", lk.re))
    } else if lk.re < LOG_UNDERFLOW {
        Ok(C64::new(0.0, 0.0))
    } else {
        Ok(exp_clamped(lk))
    }
}

/// Mehler kernel `K(t, x, y)`.
pub fn mehler_k(p: KernelEval) -> Result<C64> {
    let h = Hyper::new(p.t);
    finite_log(exponent(&h, p.x, p.y) + log_prefactor(&h))
}

/// Natural log of the kernel (principal branch of the exponent, not reduced
/// modulo `2πi`).
pub fn mehler_log_k(p: KernelEval) -> C64 {
    let h = Hyper::new(p.t);
    exponent(&h, p.x, p.y) + log_prefactor(&h)
}

/// `∂K/∂y (t, x, y) = K · (−coth(2t)·y + x/sinh 2t)`.
pub fn mehler_dk_dy(p: KernelEval) -> Result<C64> {
    let h = Hyper::new(p.t);
    let k = finite_log(exponent(&h, p.x, p.y) + log_prefactor(&h))?;
    Ok(k * dy_factor(&h, p.x, p.y))
}

/// `η̃(t, x) = cosh(2t)^{-1/2} e^{−tanh(2t) x²/2}`.
pub fn eta_tilde(t: f64, x: C64) -> Result<C64> {
    check_time(t)?;
    let h = Hyper::new(t);
    Ok(exp_clamped(-(x * x) * (0.5 * h.tanh2) - 0.5 * ln(h.cosh2)))
}

/// Gaussian factorisation `K = η̃(t,x) · K̃(t,x,ξ)` with
/// `K̃ = (coth 2t / 2π)^{1/2} exp(−coth(2t)/2 · (ξ − x/cosh 2t)²)`.
///
/// Returns `(η̃, K̃)`.
pub fn mehler_decomposed(t: f64, x: C64, xi: f64) -> Result<(C64, C64)> {
    check_time(t)?;
    let h = Hyper::new(t);
    let eta = exp_clamped(-(x * x) * (0.5 * h.tanh2) - 0.5 * ln(h.cosh2));
    let d = C64::new(xi, 0.0) - x / h.cosh2;
    let kt = exp_clamped(-(d * d) * (0.5 * h.coth2) + 0.5 * ln(h.coth2 / (2.0 * PI)));
    Ok((eta, kt))
}

/// Hermite functions `h_0..=h_n` at a (possibly complex) point, by the
/// normalised three-term recurrence
/// `h_{k+1} = x √(2/(k+1)) h_k − √(k/(k+1)) h_{k−1}`.
///
/// The polynomial part is rescaled on the fly and the Gaussian factor is
/// applied in log space, so large orders and arguments do not overflow.
pub fn hermite_functions(n: usize, x: C64) -> Vec<C64> {
    const BIG: f64 = 1e150;
    let log_seed = -(x * x) * 0.5 - 0.25 * ln(PI);
    let mut out = Vec::with_capacity(n + 1);
    // p holds the recurrence with h_k = p_k · exp(log_seed + scale)
    let mut scale = 0.0f64;
    let mut prev = C64::new(0.0, 0.0);
    let mut cur = C64::new(1.0, 0.0);
    out.push(exp_clamped(log_seed));
    for k in 0..n {
        let kf = k as f64;
        let next = x * cur * crate::math::sqrt(2.0 / (kf + 1.0))
            - prev * crate::math::sqrt(kf / (kf + 1.0));
        prev = cur;
        cur = next;
        let mag = cur.norm();
        if mag > BIG {
            prev /= mag;
            cur /= mag;
            scale += ln(mag);
        }
        let v = if cur.re == 0.0 && cur.im == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            let lc = cur.ln();
            exp_clamped(lc + log_seed + scale)
        };
        out.push(v);
    }
    out
}

/// L²-normalised Hermite function `h_k(x)` for real `x`.
pub fn hermite_h(k: HermiteIndex, x: f64) -> f64 {
    hermite_functions(k.0 as usize, C64::new(x, 0.0))[k.0 as usize].re
}

/// Partial eigen-expansion `Σ_{k<n} e^{−(2k+1)t} h_k(x) h_k(y)`.
pub fn mehler_series(t: f64, x: C64, y: C64, n_terms: usize) -> Result<C64> {
    check_time(t)?;
    if n_terms == 0 {
        return Err(Error::domain("mehler_series needs at least one term"));
    }
    let hx = hermite_functions(n_terms - 1, x);
    let hy = hermite_functions(n_terms - 1, y);
    let terms: Vec<C64> = (0..n_terms)
        .map(|k| hx[k] * hy[k] * crate::math::exp(-(2.0 * k as f64 + 1.0) * t))
        .collect();
    // smallest terms first
    Ok(terms.iter().rev().fold(C64::new(0.0, 0.0), |a, &b| a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{c64, real, sqrt};
    use crate::quad::GaussHermite;

    fn rel(a: C64, b: C64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn rejects_nonpositive_time() {
        assert!(matches!(
            KernelEval::new(0.0, real(0.0), real(0.0)),
            Err(Error::Domain(_))
        ));
        assert!(KernelEval::new(-1.0, real(0.0), real(0.0)).is_err());
        assert!(eta_tilde(0.0, real(1.0)).is_err());
        assert!(mehler_decomposed(-0.1, real(1.0), 0.0).is_err());
        assert!(HermiteIndex::new(-1).is_err());
    }

    #[test]
    fn origin_value_is_the_bare_prefactor() {
        let k = mehler_k(KernelEval::new(0.25, real(0.0), real(0.0)).unwrap()).unwrap();
        let expected = 1.0 / sqrt(2.0 * PI * libm::sinh(0.5));
        assert!((k.re - expected).abs() < 1e-15 && k.im == 0.0);
    }

    #[test]
    fn symmetric_in_space_arguments() {
        let (x, y) = (c64(0.4, -0.3), c64(-1.1, 0.8));
        let a = mehler_k(KernelEval::new(0.37, x, y).unwrap()).unwrap();
        let b = mehler_k(KernelEval::new(0.37, y, x).unwrap()).unwrap();
        assert!(rel(a, b) <= 1e-14);
    }

    #[test]
    fn dk_dy_vanishes_at_origin_and_is_jointly_odd() {
        let z = mehler_dk_dy(KernelEval::new(0.3, real(0.0), real(0.0)).unwrap()).unwrap();
        assert_eq!(z, C64::new(0.0, 0.0));
        let (x, y) = (c64(0.7, 0.2), c64(-0.4, 0.1));
        let a = mehler_dk_dy(KernelEval::new(0.3, x, y).unwrap()).unwrap();
        let b = mehler_dk_dy(KernelEval::new(0.3, -x, -y).unwrap()).unwrap();
        assert!(rel(a, -b) < 1e-14);
    }

    #[test]
    fn dk_dy_matches_central_differences() {
        // t = 0.3, x = 1, y = π
        let (t, x, y) = (0.3, 1.0, PI);
        let k = |yy: f64| mehler_k(KernelEval::new(t, real(x), real(yy)).unwrap()).unwrap();
        let step = 1e-5;
        let fd = (k(y + step) - k(y - step)) / (2.0 * step);
        let an = mehler_dk_dy(KernelEval::new(t, real(x), real(y)).unwrap()).unwrap();
        assert!(rel(an, fd) <= 1e-8, "{an} vs {fd}");
        // bracket from the π-image integrand: −coth(2t)π + x/sinh(2t)
        let bracket = -PI / libm::tanh(2.0 * t) + x / libm::sinh(2.0 * t);
        assert!(rel(an, k(y) * bracket) < 1e-13);
    }

    #[test]
    fn decomposition_reproduces_kernel() {
        let (t, x, xi) = (0.4, c64(1.0, 0.5), 0.2);
        let (eta, kt) = mehler_decomposed(t, x, xi).unwrap();
        let k = mehler_k(KernelEval::new(t, x, real(xi)).unwrap()).unwrap();
        assert!(rel(eta * kt, k) <= 1e-12);
    }

    #[test]
    fn ground_state_closed_form() {
        for &x in &[-2.0, 0.0, 0.7, 3.5] {
            let h0 = hermite_h(HermiteIndex::new(0).unwrap(), x);
            let expected = libm::pow(PI, -0.25) * libm::exp(-x * x / 2.0);
            assert!((h0 - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn hermite_functions_are_orthonormal() {
        let gh = GaussHermite::new(200);
        let h = |k: i64, x: f64| hermite_h(HermiteIndex::new(k).unwrap(), x);
        let cross = gh.integrate(0.0, 1.0, |x| h(2, x) * h(3, x));
        let norm = gh.integrate(0.0, 1.0, |x| h(2, x) * h(2, x));
        assert!(cross.abs() <= 1e-10);
        assert!((norm - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn hermite_functions_are_eigenfunctions() {
        for k in 0..6 {
            let idx = HermiteIndex::new(k).unwrap();
            for &x in &[-2.0, 0.0, 1.5] {
                // fourth-order stencil for the second derivative
                let step = 1e-2;
                let f = |s: f64| hermite_h(idx, s);
                let d2 = (-f(x + 2.0 * step) + 16.0 * f(x + step) - 30.0 * f(x)
                    + 16.0 * f(x - step)
                    - f(x - 2.0 * step))
                    / (12.0 * step * step);
                let lhs = -d2 + x * x * f(x);
                let rhs = idx.eigenvalue() * f(x);
                let size = d2.abs() + x * x * f(x).abs() + rhs.abs();
                assert!((lhs - rhs).abs() <= 1e-6 * size.max(1e-6), "k={k} x={x}");
            }
        }
    }

    #[test]
    fn series_agrees_with_closed_form() {
        let k = mehler_k(KernelEval::new(0.5, real(0.3), real(-0.7)).unwrap()).unwrap();
        let s = mehler_series(0.5, real(0.3), real(-0.7), 60).unwrap();
        assert!(rel(s, k) <= 1e-10);
        let k = mehler_k(KernelEval::new(0.1, real(2.0), real(2.0)).unwrap()).unwrap();
        let s = mehler_series(0.1, real(2.0), real(2.0), 120).unwrap();
        assert!(rel(s, k) <= 1e-8);
    }

    #[test]
    fn one_term_dominates_at_large_time() {
        let mut last = f64::INFINITY;
        for &t in &[1.0, 2.0, 4.0, 8.0] {
            let k = mehler_k(KernelEval::new(t, real(0.5), real(-0.2)).unwrap()).unwrap();
            let s = mehler_series(t, real(0.5), real(-0.2), 1).unwrap();
            let dev = (s / k - 1.0).norm();
            assert!(dev < last);
            last = dev;
        }
        assert!(last < 1e-5);
    }

    #[test]
    fn small_time_heat_limit() {
        let (t, x, y) = (1e-3, 0.4, 0.43);
        let k = mehler_k(KernelEval::new(t, real(x), real(y)).unwrap())
            .unwrap()
            .re;
        let heat = libm::exp(-(x - y) * (x - y) / (4.0 * t)) / sqrt(4.0 * PI * t);
        assert!((k / heat - 1.0).abs() <= 1e-2);
    }

    #[test]
    fn huge_exponent_underflows_to_zero() {
        let k = mehler_k(KernelEval::new(1e-6, real(-3.0), real(3.0)).unwrap()).unwrap();
        assert_eq!(k, C64::new(0.0, 0.0));
    }
}
