//! The half-line map on `(0, ∞)` and its identification with the classical
//! heat half-line map through the time change `x = α(s) = tanh(2(τ−s))/2`.
//!
//! With `T = tanh(2τ)/2` and `ũ₀(t) = (1 − 4(T−t)²)^{−1/4} u₀(α⁻¹(T−t))`,
//! the Hermite map at time `τ` and the heat map at time `T` agree:
//! `Φᴴ_{τ,0} u₀ = Φ_{T,0} ũ₀`. The operator `S: u₀ ↦ ũ₀` is built lazily
//! on top of [`ControlSignal`], so no resampling error enters the identity.

use alloc::format;
use alloc::vec::Vec;

use crate::control::{ControlSignal, Warp, WarpParams};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::images::{heat_functional, phi_halfline_0, ImagesConfig};
use crate::math::{sqrt, C64};

/// Largest value of `2x` fed to `artanh`.
const ATANH_CLAMP: f64 = 1.0 - 1e-15;

/// Hermite horizon `τ` together with the heat horizon `T = tanh(2τ)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reparam {
    tau: f64,
    big_t: f64,
}

impl Reparam {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::domain(format!(
                "horizon must be positive, got {tau}"
            )));
        }
        Ok(Reparam {
            tau,
            big_t: libm::tanh(2.0 * tau) / 2.0,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// The heat horizon, always in `(0, 1/2)`.
    pub fn big_t(&self) -> f64 {
        self.big_t
    }

    fn params(&self) -> WarpParams {
        WarpParams {
            tau: self.tau,
            big_t: self.big_t,
        }
    }
}

/// `α(s) = tanh(2(τ−s))/2`, a decreasing bijection `[0, τ] → [0, T]`.
pub fn alpha(s: f64, tau: f64) -> Result<f64> {
    Reparam::new(tau)?;
    if !(s >= 0.0 && s <= tau) {
        return Err(Error::domain(format!(
            "alpha needs 0 <= s <= tau, got s = {s}, tau = {tau}"
        )));
    }
    Ok(libm::tanh(2.0 * (tau - s)) / 2.0)
}

/// `α⁻¹(x) = τ − artanh(2x)/2`.
pub fn alpha_inv(x: f64, tau: f64) -> Result<f64> {
    let r = Reparam::new(tau)?;
    if !(x >= 0.0 && x <= r.big_t * (1.0 + 1e-15)) {
        return Err(Error::domain(format!(
            "alpha_inv needs 0 <= x <= {}, got {x}",
            r.big_t
        )));
    }
    Ok(alpha_inv_unchecked(x, tau))
}

fn alpha_inv_unchecked(x: f64, tau: f64) -> f64 {
    (tau - libm::atanh((2.0 * x).min(ATANH_CLAMP)) / 2.0).clamp(0.0, tau)
}

// ũ(t) = (1 − 4x²)^{−1/4} u(α⁻¹(x)), x = T − t
fn s_map(p: &WarpParams, t: f64) -> (f64, f64) {
    let x = (p.big_t - t).clamp(0.0, p.big_t);
    let q = (1.0 - 2.0 * x) * (1.0 + 2.0 * x);
    (alpha_inv_unchecked(x, p.tau), 1.0 / sqrt(sqrt(q)))
}

fn s_map_back(p: &WarpParams, s: f64) -> f64 {
    p.big_t - libm::tanh(2.0 * (p.tau - s)) / 2.0
}

// u(s) = cosh(2(τ−s))^{−1/2} ũ(T − α(s))
fn s_inv_map(p: &WarpParams, s: f64) -> (f64, f64) {
    let s = s.clamp(0.0, p.tau);
    let t = p.big_t - libm::tanh(2.0 * (p.tau - s)) / 2.0;
    (
        t.clamp(0.0, p.big_t),
        1.0 / sqrt(libm::cosh(2.0 * (p.tau - s))),
    )
}

fn s_inv_map_back(p: &WarpParams, t: f64) -> f64 {
    alpha_inv_unchecked((p.big_t - t).clamp(0.0, p.big_t), p.tau)
}

fn check_signal_horizon(u: &ControlSignal, want: f64, what: &str) -> Result<()> {
    if (u.horizon() - want).abs() > 1e-12 * want.max(1.0) {
        return Err(Error::domain(format!(
            "{what} must live on (0, {want}), got horizon {}",
            u.horizon()
        )));
    }
    Ok(())
}

/// `S u₀ = ũ₀` on `(0, T)`.
#[allow(non_snake_case)]
pub fn reparam_S(u0: &ControlSignal, tau: f64) -> Result<ControlSignal> {
    let r = Reparam::new(tau)?;
    check_signal_horizon(u0, tau, "the Hermite-side control")?;
    let c = libm::cosh(2.0 * tau);
    Ok(ControlSignal::warped(
        r.big_t,
        Warp {
            inner: u0.clone(),
            map: s_map,
            map_back: s_map_back,
            params: r.params(),
            // dt/ds = sech²(2(τ−s)) ≥ sech²(2τ)
            scale_factor: 1.0 / (c * c),
        },
    ))
}

/// `S⁻¹ ũ₀ = u₀` on `(0, τ)`.
#[allow(non_snake_case)]
pub fn reparam_S_inv(u_heat: &ControlSignal, tau: f64) -> Result<ControlSignal> {
    let r = Reparam::new(tau)?;
    check_signal_horizon(u_heat, r.big_t, "the heat-side control")?;
    Ok(ControlSignal::warped(
        tau,
        Warp {
            inner: u_heat.clone(),
            map: s_inv_map,
            map_back: s_inv_map_back,
            params: r.params(),
            scale_factor: 1.0,
        },
    ))
}

/// Classical heat half-line map
/// `Φ_{T,0} f(z) = ∫₀ᵀ z e^{−z²/(4(T−σ))} / (2√π (T−σ)^{3/2}) f(σ) dσ`.
pub fn heat_phi(f: &ControlSignal, big_t: f64, z: C64, cfg: &ImagesConfig) -> Result<C64> {
    if !(big_t > 0.0 && big_t.is_finite()) {
        return Err(Error::domain(format!(
            "heat horizon must be positive, got {big_t}"
        )));
    }
    if big_t > f.horizon() * (1.0 + 1e-12) {
        return Err(Error::domain(format!(
            "heat horizon {big_t} exceeds the control horizon {}",
            f.horizon()
        )));
    }
    if f.is_zero() {
        return Ok(C64::new(0.0, 0.0));
    }
    heat_functional(big_t, z, &f.kinks(), f.time_scale(), cfg)?.apply(f)
}

/// `max_z |Φᴴ_{τ,0} u₀(z) − Φ_{T,0}(S u₀)(z)|` over `zs`.
pub fn verify_halfline_identity<E: Executor>(
    exec: &E,
    u0: &ControlSignal,
    tau: f64,
    zs: &[C64],
    cfg: &ImagesConfig,
) -> Result<f64> {
    if zs.is_empty() {
        return Err(Error::domain("identity check needs at least one point"));
    }
    let r = Reparam::new(tau)?;
    let su = reparam_S(u0, tau)?;
    let devs = exec
        .map(zs.len(), |i| -> Result<f64> {
            let a = phi_halfline_0(u0, tau, zs[i], cfg)?;
            let b = heat_phi(&su, r.big_t, zs[i], cfg)?;
            Ok((a - b).norm())
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(devs.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::expr::Expr;
    use crate::math::{c64, real};

    fn formula(src: &str, h: f64) -> ControlSignal {
        ControlSignal::from_expr(Expr::parse(src).unwrap(), h).unwrap()
    }

    #[test]
    fn endpoints_and_horizon() {
        let tau = 0.5;
        let r = Reparam::new(tau).unwrap();
        assert_eq!(r.big_t(), libm::tanh(1.0) / 2.0);
        assert_eq!(alpha(tau, tau).unwrap(), 0.0);
        assert_eq!(alpha(0.0, tau).unwrap(), r.big_t());
        assert!(alpha(0.6, tau).is_err());
        assert!(alpha_inv(0.5, tau).is_err());
        assert!(Reparam::new(0.0).is_err());
        let mut last = 0.0;
        for &t in &[0.01, 0.1, 1.0, 5.0, 30.0] {
            let bt = Reparam::new(t).unwrap().big_t();
            assert!(bt > last && bt <= 0.5);
            last = bt;
        }
    }

    #[test]
    fn s_then_s_inv_is_identity() {
        let tau = 0.7;
        let u = formula("cos(4*t) + t^2", tau);
        let back = reparam_S_inv(&reparam_S(&u, tau).unwrap(), tau).unwrap();
        for i in 0..=50 {
            let s = tau * i as f64 / 50.0;
            assert!((back.eval(s).unwrap() - u.eval(s).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn erfc_closed_form() {
        // f = 1: substitution v = z/(2√(T−σ)) gives erfc(z/(2√T))
        let f = ControlSignal::constant(real(1.0), 0.25).unwrap();
        let v = heat_phi(&f, 0.25, real(1.0), &ImagesConfig::default()).unwrap();
        assert!((v.re - 0.157_299_207_050_285_1).abs() < 1e-8);
        assert_eq!(
            heat_phi(&f, 0.25, real(0.0), &ImagesConfig::default()).unwrap(),
            real(0.0)
        );
    }

    #[test]
    fn identity_for_a_smooth_control() {
        let tau = 0.5;
        let u = formula("sin(3*t)", tau);
        let zs = [c64(0.8, 0.3), c64(1.5, -0.4), c64(0.3, 0.1)];
        let d =
            verify_halfline_identity(&Sequential, &u, tau, &zs, &ImagesConfig::default()).unwrap();
        assert!(d <= 1e-8, "{d}");
    }
}
