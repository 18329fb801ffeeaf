//! Boundary control signals `u: (0, τ) → ℂ`.
//!
//! A signal is cheap to clone: its representation sits behind an `Arc`.
//! Besides sampled data and formulas it supports a few lazy compositions
//! (time shifts, linear combinations, the half-line reparameterization) so
//! that operators can be chained without resampling error.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::expr::{Expr, Variable};
use crate::math::{pairwise_sum, C64};
use crate::quad::GaussLegendre;

/// How a sampled signal is read between grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    #[default]
    Linear,
    /// `u(t) = uᵢ` on `[tᵢ, tᵢ₊₁)`.
    Constant,
}

type SignalFn = dyn Fn(f64) -> Result<C64> + Send + Sync;

enum Repr {
    Zero,
    Sampled {
        t: Vec<f64>,
        u: Vec<C64>,
        interp: Interpolation,
    },
    Formula(Expr),
    Cosine(Vec<f64>),
    Func {
        f: Arc<SignalFn>,
        kinks: Vec<f64>,
        scale: f64,
    },
    Delayed {
        inner: ControlSignal,
        delay: f64,
    },
    Combination(Vec<(C64, ControlSignal)>),
    Warped(Warp),
}

/// Change of time variable `u ↦ m(t)·inner(φ(t))` with `φ` monotone.
pub(crate) struct Warp {
    pub inner: ControlSignal,
    pub map: fn(&WarpParams, f64) -> (f64, f64),
    pub map_back: fn(&WarpParams, f64) -> f64,
    pub params: WarpParams,
    pub scale_factor: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct WarpParams {
    pub tau: f64,
    pub big_t: f64,
}

/// A boundary control on `(0, horizon)`.
#[derive(Clone)]
pub struct ControlSignal {
    horizon: f64,
    repr: Arc<Repr>,
}

impl fmt::Debug for ControlSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &*self.repr {
            Repr::Zero => "zero",
            Repr::Sampled { .. } => "sampled",
            Repr::Formula(_) => "formula",
            Repr::Cosine(_) => "cosine",
            Repr::Func { .. } => "function",
            Repr::Delayed { .. } => "delayed",
            Repr::Combination(_) => "combination",
            Repr::Warped(_) => "warped",
        };
        f.debug_struct("ControlSignal")
            .field("horizon", &self.horizon)
            .field("kind", &kind)
            .finish()
    }
}

fn check_horizon(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "control horizon must be positive, got {h}"
        )))
    }
}

const EDGE_SLACK: f64 = 1e-12;

impl ControlSignal {
    fn new(horizon: f64, repr: Repr) -> Self {
        ControlSignal {
            horizon,
            repr: Arc::new(repr),
        }
    }

    pub fn zero(horizon: f64) -> Result<Self> {
        check_horizon(horizon)?;
        Ok(Self::new(horizon, Repr::Zero))
    }

    pub fn constant(value: C64, horizon: f64) -> Result<Self> {
        Self::from_expr(Expr::constant(value), horizon)
    }

    /// Samples `(tᵢ, uᵢ)` with `0 ≤ t₀ < … < t_last ≤ horizon`. Outside the
    /// sampled range the end values are held.
    pub fn sampled(t: Vec<f64>, u: Vec<C64>, interp: Interpolation, horizon: f64) -> Result<Self> {
        check_horizon(horizon)?;
        if t.is_empty() || t.len() != u.len() {
            return Err(Error::domain(format!(
                "sampled control needs matching nonempty grids, got {} times and {} values",
                t.len(),
                u.len()
            )));
        }
        if t[0] < 0.0 || t[t.len() - 1] > horizon * (1.0 + EDGE_SLACK) {
            return Err(Error::domain("control grid must lie inside [0, horizon]"));
        }
        if let Some(i) = t.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(Error::domain(format!(
                "control grid not strictly increasing at index {}",
                i + 1
            )));
        }
        if let Some(i) = u
            .iter()
            .position(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::numeric(
                format!("control sample {i} is not finite"),
                f64::NAN,
            ));
        }
        Ok(Self::new(horizon, Repr::Sampled { t, u, interp }))
    }

    /// A formula in `t` (or a constant).
    pub fn from_expr(expr: Expr, horizon: f64) -> Result<Self> {
        check_horizon(horizon)?;
        if expr.variable() == Some(Variable::Z) {
            return Err(Error::domain("a control formula must use the variable t"));
        }
        Ok(Self::new(horizon, Repr::Formula(expr)))
    }

    /// `u(s) = Σⱼ cⱼ cos(jπs/τ)`.
    pub fn cosine(coeffs: Vec<f64>, horizon: f64) -> Result<Self> {
        check_horizon(horizon)?;
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("cosine coefficients must be finite"));
        }
        Ok(Self::new(horizon, Repr::Cosine(coeffs)))
    }

    /// Arbitrary signal given by a closure. `kinks` lists points where the
    /// signal is not smooth and `scale` the time scale on which it varies.
    pub fn from_fn<F>(horizon: f64, kinks: Vec<f64>, scale: f64, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<C64> + Send + Sync + 'static,
    {
        check_horizon(horizon)?;
        Ok(Self::new(
            horizon,
            Repr::Func {
                f: Arc::new(f),
                kinks,
                scale: if scale > 0.0 { scale } else { f64::INFINITY },
            },
        ))
    }

    /// Zero on `(0, delay)` followed by `self` shifted by `delay`.
    pub fn delayed(&self, delay: f64) -> Result<Self> {
        if !(delay >= 0.0 && delay.is_finite()) {
            return Err(Error::domain(format!(
                "delay must be nonnegative, got {delay}"
            )));
        }
        Ok(Self::new(
            self.horizon + delay,
            Repr::Delayed {
                inner: self.clone(),
                delay,
            },
        ))
    }

    /// `Σ cᵢ uᵢ`; every term must share the same horizon.
    pub fn linear_combination(terms: &[(C64, ControlSignal)]) -> Result<Self> {
        let Some(first) = terms.first() else {
            return Err(Error::domain("empty linear combination"));
        };
        let h = first.1.horizon;
        if terms
            .iter()
            .any(|(_, u)| (u.horizon - h).abs() > EDGE_SLACK * h)
        {
            return Err(Error::domain("combined controls must share one horizon"));
        }
        Ok(Self::new(h, Repr::Combination(terms.to_vec())))
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self::new(
            self.horizon,
            Repr::Combination(alloc::vec![(c, self.clone())]),
        )
    }

    pub(crate) fn warped(horizon: f64, warp: Warp) -> Self {
        Self::new(horizon, Repr::Warped(warp))
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn is_zero(&self) -> bool {
        match &*self.repr {
            Repr::Zero => true,
            Repr::Sampled { u, .. } => u.iter().all(|v| v.re == 0.0 && v.im == 0.0),
            Repr::Formula(e) => e.as_constant() == Some(C64::new(0.0, 0.0)),
            Repr::Cosine(c) => c.iter().all(|&v| v == 0.0),
            Repr::Func { .. } => false,
            Repr::Delayed { inner, .. } => inner.is_zero(),
            Repr::Combination(ts) => ts
                .iter()
                .all(|(c, u)| (c.re == 0.0 && c.im == 0.0) || u.is_zero()),
            Repr::Warped(w) => w.inner.is_zero(),
        }
    }

    /// Sample grid and values of a sampled signal.
    pub fn samples(&self) -> Option<(&[f64], &[C64], Interpolation)> {
        match &*self.repr {
            Repr::Sampled { t, u, interp } => Some((t, u, *interp)),
            _ => None,
        }
    }

    pub fn eval(&self, s: f64) -> Result<C64> {
        let h = self.horizon;
        if !(s >= -EDGE_SLACK * h.max(1.0) && s <= h + EDGE_SLACK * h.max(1.0)) {
            return Err(Error::domain(format!(
                "control evaluated at {s}, outside [0, {h}]"
            )));
        }
        let s = s.clamp(0.0, h);
        Ok(match &*self.repr {
            Repr::Zero => C64::new(0.0, 0.0),
            Repr::Sampled { t, u, interp } => sampled_eval(t, u, *interp, s),
            Repr::Formula(e) => e.eval(C64::new(s, 0.0))?,
            Repr::Cosine(c) => {
                let w = crate::math::PI * s / h;
                let v: f64 = c
                    .iter()
                    .enumerate()
                    .map(|(j, &cj)| cj * libm::cos(j as f64 * w))
                    .sum();
                C64::new(v, 0.0)
            }
            Repr::Func { f, .. } => f(s)?,
            Repr::Delayed { inner, delay } => {
                if s <= *delay {
                    C64::new(0.0, 0.0)
                } else {
                    inner.eval(s - delay)?
                }
            }
            Repr::Combination(ts) => {
                let mut acc = C64::new(0.0, 0.0);
                for (c, u) in ts {
                    acc += *c * u.eval(s)?;
                }
                acc
            }
            Repr::Warped(w) => {
                let (inner_t, factor) = (w.map)(&w.params, s);
                w.inner.eval(inner_t)? * factor
            }
        })
    }

    /// Interior points of `(0, horizon)` where the signal may fail to be smooth.
    pub fn kinks(&self) -> Vec<f64> {
        let h = self.horizon;
        let mut out: Vec<f64> = match &*self.repr {
            Repr::Zero | Repr::Formula(_) | Repr::Cosine(_) => Vec::new(),
            Repr::Sampled { t, .. } => t.clone(),
            Repr::Func { kinks, .. } => kinks.clone(),
            Repr::Delayed { inner, delay } => {
                let mut k: Vec<f64> = inner.kinks().iter().map(|x| x + delay).collect();
                k.push(*delay);
                k
            }
            Repr::Combination(ts) => ts.iter().flat_map(|(_, u)| u.kinks()).collect(),
            Repr::Warped(w) => w
                .inner
                .kinks()
                .iter()
                .map(|&x| (w.map_back)(&w.params, x))
                .collect(),
        };
        out.retain(|&x| x > 0.0 && x < h);
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * h);
        out
    }

    /// Length over which the signal varies appreciably between kinks.
    pub fn time_scale(&self) -> f64 {
        match &*self.repr {
            Repr::Zero | Repr::Sampled { .. } | Repr::Formula(_) => f64::INFINITY,
            Repr::Cosine(c) => {
                let j = c.iter().rposition(|&v| v != 0.0).unwrap_or(0);
                if j == 0 {
                    f64::INFINITY
                } else {
                    self.horizon / (2.0 * j as f64)
                }
            }
            Repr::Func { scale, .. } => *scale,
            Repr::Delayed { inner, .. } => inner.time_scale(),
            Repr::Combination(ts) => ts
                .iter()
                .map(|(_, u)| u.time_scale())
                .fold(f64::INFINITY, f64::min),
            Repr::Warped(w) => w.inner.time_scale() * w.scale_factor,
        }
    }

    /// Panel edges on `[0, horizon]` respecting kinks and the time scale.
    pub(crate) fn panels(&self, min_panels: usize) -> Vec<f64> {
        let h = self.horizon;
        let mut edges = alloc::vec![0.0];
        edges.extend(self.kinks());
        edges.push(h);
        let scale = self.time_scale().min(h / min_panels.max(1) as f64);
        let mut out = alloc::vec![0.0];
        for w in edges.windows(2) {
            let n = libm::ceil((w[1] - w[0]) / scale).max(1.0) as usize;
            for k in 1..=n {
                out.push(w[0] + (w[1] - w[0]) * k as f64 / n as f64);
            }
        }
        out
    }

    /// `‖u‖_{L²(0,τ)}`, exact for sampled and cosine signals.
    pub fn l2_norm(&self) -> Result<f64> {
        let h = self.horizon;
        match &*self.repr {
            Repr::Zero => Ok(0.0),
            Repr::Sampled { t, u, interp } => {
                let mut parts = Vec::with_capacity(t.len() + 1);
                parts.push(t[0] * u[0].norm_sqr());
                for i in 0..t.len() - 1 {
                    let dt = t[i + 1] - t[i];
                    parts.push(match interp {
                        Interpolation::Constant => dt * u[i].norm_sqr(),
                        Interpolation::Linear => {
                            let (a, b) = (u[i], u[i + 1]);
                            dt / 3.0 * (a.norm_sqr() + (a * b.conj()).re + b.norm_sqr())
                        }
                    });
                }
                parts.push((h - t[t.len() - 1]) * u[u.len() - 1].norm_sqr());
                Ok(libm::sqrt(pairwise_sum(&parts)))
            }
            Repr::Cosine(c) => {
                let s: f64 = c
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| if j == 0 { v * v * h } else { v * v * h / 2.0 })
                    .sum();
                Ok(libm::sqrt(s))
            }
            _ => {
                let gl = GaussLegendre::new(16);
                let edges = self.panels(64);
                let mut parts = Vec::with_capacity(edges.len());
                for w in edges.windows(2) {
                    let mut acc = 0.0;
                    for (s, wt) in gl.mapped(w[0], w[1]) {
                        acc += wt * self.eval(s)?.norm_sqr();
                    }
                    parts.push(acc);
                }
                Ok(libm::sqrt(pairwise_sum(&parts)))
            }
        }
    }

    /// Upper estimate of `sup |u|` (exact for sampled and cosine signals,
    /// sampled on a fine grid otherwise).
    pub fn sup_bound(&self) -> Result<f64> {
        match &*self.repr {
            Repr::Zero => Ok(0.0),
            Repr::Sampled { u, .. } => Ok(u.iter().map(|v| v.norm()).fold(0.0, f64::max)),
            Repr::Cosine(c) => Ok(c.iter().map(|v| v.abs()).sum()),
            _ => {
                let edges = self.panels(256);
                let mut m: f64 = 0.0;
                for w in edges.windows(2) {
                    for k in 0..4 {
                        let s = w[0] + (w[1] - w[0]) * k as f64 / 4.0;
                        m = m.max(self.eval(s)?.norm());
                    }
                }
                Ok(m.max(self.eval(self.horizon)?.norm()))
            }
        }
    }

    /// Samples the signal on `n ≥ 2` uniform nodes of `[0, horizon]`.
    pub fn resample(&self, n: usize, interp: Interpolation) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain("resampling needs at least two nodes"));
        }
        let h = self.horizon;
        let t: Vec<f64> = (0..n).map(|i| h * i as f64 / (n - 1) as f64).collect();
        let u = t
            .iter()
            .map(|&s| self.eval(s))
            .collect::<Result<Vec<_>>>()?;
        Self::sampled(t, u, interp, h)
    }
}

fn sampled_eval(t: &[f64], u: &[C64], interp: Interpolation, s: f64) -> C64 {
    let n = t.len();
    if s <= t[0] {
        return u[0];
    }
    if s >= t[n - 1] {
        return u[n - 1];
    }
    // t[i] <= s < t[i+1]
    let i = t.partition_point(|&x| x <= s) - 1;
    match interp {
        Interpolation::Constant => u[i],
        Interpolation::Linear => {
            let lam = (s - t[i]) / (t[i + 1] - t[i]);
            u[i] * (1.0 - lam) + u[i + 1] * lam
        }
    }
}
