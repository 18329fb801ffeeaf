//! Constructive boundary controls on `(−L, L)` for holomorphic targets.
//!
//! Given `g` holomorphic on `D_{L'}`, the rotated datum `w₀(x) = η(x) g(ix)`
//! is evolved on the whole line by the Mehler kernel. Then
//! `ṽ(t, x) = w(τ−t, −ix)` solves the Hermite heat equation on `(−L, L)`,
//! ends at `ṽ(τ) = g`, and its boundary values are the controls
//! `u_{−L}(t) = w(τ−t, iL)` and `u_L(t) = w(τ−t, −iL)`.
//!
//! Evaluating `w(t, z)` at complex `z` with `|Im z|` close to `L` and small
//! `t` is badly conditioned on the real axis. There the plateau part of the
//! convolution is moved onto the line `Im ξ = Im z / cosh 2t`, through the
//! saddle of the kernel, along a trapezoid that stays inside `D_{L''}`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::control::{ControlSignal, Interpolation};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::expr::{Expr, Variable};
use crate::fd::{cn_run, FdGrid, FdOptions};
use crate::hermite::kernel_raw;
use crate::images::{phi_symmetric, ImagesConfig};
use crate::math::{pairwise_sum_c, sqrt, Hyper, C64, PI};
use crate::quad::GaussLegendre;

/// Smooth cutoff equal to `1` on `[−inner, inner]` and `0` outside
/// `(−outer, outer)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    inner: f64,
    outer: f64,
}

fn bump_b(r: f64) -> f64 {
    if r > 0.0 {
        libm::exp(-1.0 / r)
    } else {
        0.0
    }
}

/// `φ(r) = B(r) / (B(r) + B(1−r))` with `B(r) = e^{−1/r}`.
fn transition(r: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else if r >= 1.0 {
        1.0
    } else {
        let a = bump_b(r);
        a / (a + bump_b(1.0 - r))
    }
}

impl Cutoff {
    pub fn inner(&self) -> f64 {
        self.inner
    }

    pub fn outer(&self) -> f64 {
        self.outer
    }

    pub fn eval(&self, x: f64) -> f64 {
        transition((self.outer - x.abs()) / (self.outer - self.inner))
    }
}

/// `η ∈ C^∞` with `η = 1` on `[−l2, l2]` and support in `[−l1, l1]`.
pub fn make_cutoff(l2: f64, l1: f64) -> Result<Cutoff> {
    if !(l2 > 0.0 && l2 < l1 && l1.is_finite()) {
        return Err(Error::domain(format!(
            "cutoff needs 0 < inner < outer, got {l2} and {l1}"
        )));
    }
    Ok(Cutoff {
        inner: l2,
        outer: l1,
    })
}

/// `w₀(x) = η(x) g(ix)`.
#[derive(Debug, Clone)]
pub struct RotatedDatum {
    g: Expr,
    eta: Cutoff,
}

impl RotatedDatum {
    pub fn new(g: Expr, eta: Cutoff) -> Result<Self> {
        if g.variable() == Some(Variable::T) {
            return Err(Error::domain("a target must be a function of z"));
        }
        Ok(RotatedDatum { g, eta })
    }

    pub fn cutoff(&self) -> &Cutoff {
        &self.eta
    }

    pub fn target(&self) -> &Expr {
        &self.g
    }

    /// `w₀(x)` for real `x`.
    pub fn eval(&self, x: f64) -> Result<C64> {
        let e = self.eta.eval(x);
        if e == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        Ok(self.g.eval(C64::new(0.0, x))? * e)
    }

    /// `g(iξ)`, which continues `w₀` holomorphically off the plateau.
    pub fn analytic(&self, xi: C64) -> Result<C64> {
        Ok(self.g.eval(C64::new(-xi.im, xi.re))?)
    }

    pub fn is_zero(&self) -> bool {
        self.g.as_constant() == Some(C64::new(0.0, 0.0))
    }
}

/// `η(x) g(ix)`; zero outside the support of `η`.
pub fn rotated_datum(g: &Expr, eta: &Cutoff, x: f64) -> Result<C64> {
    RotatedDatum::new(g.clone(), *eta)?.eval(x)
}

/// Numerical settings of [`free_evolve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveConfig {
    /// Below this time the limit `w₀(z)` is returned.
    pub t_min: f64,
    /// The contour is shifted when `|Im z| > shift_threshold · tanh(2t) · L'`.
    pub shift_threshold: f64,
    /// Gauss–Legendre nodes per panel.
    pub nodes: usize,
    /// Panels whose kernel factor is below `e^{−cutoff_exponent}` relative
    /// to the saddle value are skipped.
    pub cutoff_exponent: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            t_min: 1e-4,
            shift_threshold: 0.5,
            nodes: 16,
            cutoff_exponent: 72.0,
        }
    }
}

impl EvolveConfig {
    fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0)
            || !(self.shift_threshold >= 0.0)
            || self.nodes < 4
            || !(self.cutoff_exponent > 0.0)
        {
            return Err(Error::domain("invalid free-evolution settings"));
        }
        Ok(())
    }
}

/// `w(t, z) = ∫ K(t, z, ξ) w₀(ξ) dξ` split into the plateau part
/// `|Re ξ| ≤ L''` and the tails on the transition bands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evolved {
    pub value: C64,
    pub plateau: C64,
    pub tails: C64,
    /// The small-time limit `w₀(z)` was substituted.
    pub limit_used: bool,
    /// The plateau integral ran along the shifted contour.
    pub shifted: bool,
}

struct PathIntegrator<'a> {
    h: Hyper,
    z: C64,
    center: C64,
    gl: &'a GaussLegendre,
    cutoff: f64,
}

impl PathIntegrator<'_> {
    /// `∫_A^B K(t, z, ξ) f(ξ) dξ` along the segment, with panels of real
    /// length at most `step`. Panels where `|K|` is negligible are skipped.
    fn segment<F>(&self, a: C64, b: C64, step: f64, f: &F) -> Result<C64>
    where
        F: Fn(C64) -> Result<C64>,
    {
        let d = b - a;
        let len = d.norm();
        if len == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        let n = libm::ceil(len / step).max(1.0) as usize;
        let mut parts = Vec::with_capacity(n);
        for p in 0..n {
            let (u0, u1) = (p as f64 / n as f64, (p + 1) as f64 / n as f64);
            let (pa, pb) = (a + d * u0, a + d * u1);
            if self.negligible(pa, pb) {
                continue;
            }
            let mut acc = Vec::with_capacity(self.gl.len());
            for (u, w) in self.gl.mapped(u0, u1) {
                let xi = a + d * u;
                let k = kernel_raw(&self.h, self.z, xi);
                if k.re == 0.0 && k.im == 0.0 {
                    continue;
                }
                acc.push(k * f(xi)? * w);
            }
            parts.push(pairwise_sum_c(&acc) * d);
        }
        Ok(pairwise_sum_c(&parts))
    }

    // min over the panel of coth(2t)/2 · Re((ξ − c)²), a quadratic in u
    fn negligible(&self, a: C64, b: C64) -> bool {
        let e = a - self.center;
        let d = b - a;
        let q = |u: f64| {
            let v = e + d * u;
            (v * v).re
        };
        let qa = (d * d).re;
        let mut m = q(0.0).min(q(1.0));
        if qa > 0.0 {
            let u = -(e * d).re / qa;
            if (0.0..=1.0).contains(&u) {
                m = m.min(q(u));
            }
        }
        0.5 * self.h.coth2 * m > self.cutoff
    }
}

/// Free evolution of the rotated datum under the Mehler kernel.
pub fn free_evolve(w0: &RotatedDatum, t: f64, z: C64, cfg: &EvolveConfig) -> Result<Evolved> {
    cfg.validate()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!(
            "evolution time must be nonnegative, got {t}"
        )));
    }
    let zero = C64::new(0.0, 0.0);
    if w0.is_zero() {
        return Ok(Evolved {
            value: zero,
            plateau: zero,
            tails: zero,
            limit_used: t < cfg.t_min,
            shifted: false,
        });
    }
    let (lpp, lp) = (w0.eta.inner, w0.eta.outer);
    if t < cfg.t_min {
        let v = if z.im == 0.0 {
            w0.eval(z.re)?
        } else if z.re.abs() + z.im.abs() <= lpp {
            w0.analytic(z)?
        } else {
            return Err(Error::domain(format!(
                "small-time limit at {z} lies outside the plateau square of half-width {lpp}"
            )));
        };
        return Ok(Evolved {
            value: v,
            plateau: v,
            tails: zero,
            limit_used: true,
            shifted: false,
        });
    }
    let h = Hyper::new(t);
    let center = z / h.cosh2;
    let sigma_g = sqrt(h.tanh2);
    let gl = GaussLegendre::new(cfg.nodes);
    let pi = PathIntegrator {
        h,
        z,
        center,
        gl: &gl,
        cutoff: cfg.cutoff_exponent,
    };
    let band_step = sigma_g.min((lp - lpp) / 8.0);
    let plateau_step = sigma_g.min(0.25);
    let datum = |xi: C64| w0.eval(xi.re);
    let analytic = |xi: C64| w0.analytic(xi);
    let r = |x: f64| C64::new(x, 0.0);

    let tails = pi.segment(r(-lp), r(-lpp), band_step, &datum)?
        + pi.segment(r(lpp), r(lp), band_step, &datum)?;
    let shifted = z.im.abs() > cfg.shift_threshold * h.tanh2 * lp;
    let plateau = if shifted {
        let hs = center.im;
        if hs.abs() >= lpp {
            return Err(Error::domain(format!(
                "shifted contour at height {hs} leaves the plateau of half-width {lpp}"
            )));
        }
        let p1 = C64::new(-lpp + hs.abs(), hs);
        let p2 = C64::new(lpp - hs.abs(), hs);
        pi.segment(r(-lpp), p1, plateau_step, &analytic)?
            + pi.segment(p1, p2, plateau_step, &analytic)?
            + pi.segment(p2, r(lpp), plateau_step, &analytic)?
    } else {
        pi.segment(r(-lpp), r(lpp), plateau_step, &analytic)?
    };
    let value = plateau + tails;
    if !(value.re.is_finite() && value.im.is_finite()) {
        return Err(Error::numeric(
            format!("free evolution at t = {t}, z = {z} is not finite"),
            f64::NAN,
        ));
    }
    Ok(Evolved {
        value,
        plateau,
        tails,
        limit_used: false,
        shifted,
    })
}

/// Target, geometry and discretisation of one synthesis run.
#[derive(Debug, Clone)]
pub struct SynthesisProblem {
    pub g: Expr,
    /// Half-width of the control interval.
    pub l: f64,
    /// Plateau radius `L''`.
    pub l_plateau: f64,
    /// Support radius `L'`.
    pub l_support: f64,
    pub tau: f64,
    /// Uniform time nodes of the synthesized controls.
    pub n_time: usize,
    pub evolve: EvolveConfig,
    pub reach: ReachGrid,
}

impl SynthesisProblem {
    pub fn new(g: Expr, l: f64, l_plateau: f64, l_support: f64, tau: f64) -> Result<Self> {
        let p = SynthesisProblem {
            g,
            l,
            l_plateau,
            l_support,
            tau,
            n_time: 512,
            evolve: EvolveConfig::default(),
            reach: ReachGrid::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0
            && self.l < self.l_plateau
            && self.l_plateau < self.l_support
            && self.l_support.is_finite())
        {
            return Err(Error::domain(format!(
                "need 0 < L < L'' < L', got {}, {}, {}",
                self.l, self.l_plateau, self.l_support
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::domain(format!(
                "horizon must be positive, got {}",
                self.tau
            )));
        }
        if self.n_time < 2 {
            return Err(Error::domain("need at least two time nodes"));
        }
        if self.g.variable() == Some(Variable::T) {
            return Err(Error::domain("a target must be a function of z"));
        }
        self.evolve.validate()
    }

    pub fn datum(&self) -> Result<RotatedDatum> {
        RotatedDatum::new(self.g.clone(), make_cutoff(self.l_plateau, self.l_support)?)
    }
}

/// Oracle resolution used by [`verify_reach`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachGrid {
    pub dx: f64,
    pub dt: f64,
    /// Residual is measured on `[−core·L, core·L]`.
    pub core: f64,
}

impl Default for ReachGrid {
    fn default() -> Self {
        ReachGrid {
            dx: 0.005,
            dt: 0.0025,
            core: 0.9,
        }
    }
}

/// Outcome of [`verify_reach`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReachReport {
    /// `sup |ṽ_fd(τ, x) − g(x)|` over the core interval, starting from
    /// `ṽ(0, x) = w(τ, −ix)`.
    pub sup_residual: f64,
    /// The same residual when the oracle starts from the zero state.
    pub zero_start_residual: f64,
    pub core_interval: (f64, f64),
    pub dx: f64,
    pub dt: f64,
}

#[derive(Debug, Clone)]
pub struct SynthesisDiagnostics {
    /// Time nodes where the small-time limit replaced the integral.
    pub limit_nodes: usize,
    /// Time nodes evaluated along the shifted contour.
    pub shifted_nodes: usize,
    /// `u_{−L}(τ) = g(−L)` and `u_L(τ) = g(L)`, set by continuity.
    pub corner_minus: C64,
    pub corner_plus: C64,
    pub reach: Option<ReachReport>,
}

#[derive(Debug, Clone)]
pub struct SynthesizedControls {
    pub u_minus: ControlSignal,
    pub u_plus: ControlSignal,
    pub diagnostics: SynthesisDiagnostics,
}

/// Samples the trace controls on the uniform time grid (in parallel through
/// `exec`) and, if `verify` is set, fills the residual with [`verify_reach`].
pub fn synthesize<E: Executor>(
    exec: &E,
    problem: &SynthesisProblem,
    verify: bool,
) -> Result<SynthesizedControls> {
    problem.validate()?;
    let w0 = problem.datum()?;
    let n = problem.n_time;
    let tau = problem.tau;
    let l = problem.l;
    let times: Vec<f64> = (0..n).map(|i| tau * i as f64 / (n - 1) as f64).collect();
    let vals = exec
        .map(2 * n, |k| {
            let i = k / 2;
            let z = if k % 2 == 0 {
                C64::new(0.0, l)
            } else {
                C64::new(0.0, -l)
            };
            free_evolve(&w0, (tau - times[i]).max(0.0), z, &problem.evolve)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let um: Vec<C64> = vals.iter().step_by(2).map(|e| e.value).collect();
    let up: Vec<C64> = vals.iter().skip(1).step_by(2).map(|e| e.value).collect();
    let limit_nodes = vals.iter().step_by(2).filter(|e| e.limit_used).count();
    let shifted_nodes = vals.iter().step_by(2).filter(|e| e.shifted).count();
    let controls = SynthesizedControls {
        u_minus: ControlSignal::sampled(times.clone(), um, Interpolation::Linear, tau)?,
        u_plus: ControlSignal::sampled(times, up, Interpolation::Linear, tau)?,
        diagnostics: SynthesisDiagnostics {
            limit_nodes,
            shifted_nodes,
            corner_minus: problem.g.eval(C64::new(-l, 0.0))?,
            corner_plus: problem.g.eval(C64::new(l, 0.0))?,
            reach: None,
        },
    };
    if !verify {
        return Ok(controls);
    }
    let report = verify_reach(exec, &controls.u_minus, &controls.u_plus, problem)?;
    let mut controls = controls;
    controls.diagnostics.reach = Some(report);
    Ok(controls)
}

/// Runs the oracle on `(−L, L)` with the given controls from
/// `ṽ(0, x) = w(τ, −ix)` and measures the distance to `g` at time `τ`.
pub fn verify_reach<E: Executor>(
    exec: &E,
    u_minus: &ControlSignal,
    u_plus: &ControlSignal,
    problem: &SynthesisProblem,
) -> Result<ReachReport> {
    problem.validate()?;
    let l = problem.l;
    let grid = FdGrid::with_steps(-l, l, problem.reach.dx, problem.reach.dt, problem.tau)?;
    let w0 = problem.datum()?;
    let init = exec
        .map(grid.nx(), |i| {
            let x = grid.x(i + 1);
            free_evolve(&w0, problem.tau, C64::new(0.0, -x), &problem.evolve).map(|e| e.value)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let opts = FdOptions::default();
    let runs = exec
        .map(2, |k| {
            if k == 0 {
                cn_run(&grid, u_minus, u_plus, &init, &opts)
            } else {
                cn_run(
                    &grid,
                    u_minus,
                    u_plus,
                    &vec![C64::new(0.0, 0.0); grid.nx()],
                    &opts,
                )
            }
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let core = problem.reach.core * l;
    let residual = |w: &[C64]| -> Result<f64> {
        let mut m: f64 = 0.0;
        for (i, &x) in runs[0].x.iter().enumerate() {
            if x.abs() <= core * (1.0 + 1e-12) {
                m = m.max((w[i] - problem.g.eval(C64::new(x, 0.0))?).norm());
            }
        }
        Ok(m)
    };
    Ok(ReachReport {
        sup_residual: residual(&runs[0].w)?,
        zero_start_residual: residual(&runs[1].w)?,
        core_interval: (-core, core),
        dx: grid.dx(),
        dt: grid.dt(),
    })
}

/// Relative residual of `∂ₜv + ∂ₓ²v − x²v = 0` for `v(t, x) = w(t, −ix)` at
/// a complex point, by second-order central differences with step `h`.
/// Returns `(|residual|, |∂ₜv| + |∂ₓ²v| + |x²v|)`.
pub fn backward_residual(
    w0: &RotatedDatum,
    t: f64,
    x: C64,
    h: f64,
    cfg: &EvolveConfig,
) -> Result<(f64, f64)> {
    if !(h > 0.0 && t - h >= cfg.t_min) {
        return Err(Error::domain(
            "difference stencil must stay above the small-time floor",
        ));
    }
    let v = |t: f64, x: C64| -> Result<C64> {
        Ok(free_evolve(w0, t, C64::new(x.im, -x.re), cfg)?.value)
    };
    let c = v(t, x)?;
    let vt = (v(t + h, x)? - v(t - h, x)?) / (2.0 * h);
    let hx = C64::new(h, 0.0);
    let vxx = (v(t, x + hx)? - c * 2.0 + v(t, x - hx)?) / (h * h);
    let pot = x * x * c;
    Ok(((vt + vxx - pot).norm(), vt.norm() + vxx.norm() + pot.norm()))
}

/// Interior traces of a zero-padded run on `(−L, L)`.
#[derive(Debug, Clone)]
pub struct PaddedTraces {
    /// `w(·, 0)` on `(0, 2τ)`.
    pub v0: ControlSignal,
    /// `w(·, π)` on `(0, 2τ)`.
    pub vpi: ControlSignal,
    /// The padded controls on `(0, 2τ)`.
    pub u_minus: ControlSignal,
    pub u_plus: ControlSignal,
}

/// Delays both controls by their horizon `τ` and returns the traces at `0`
/// and `π` of the resulting state on `(0, 2τ)`, evaluated lazily through
/// [`phi_symmetric`]. Both traces vanish on `[0, τ]`.
pub fn restrict_pad(
    u_minus: &ControlSignal,
    u_plus: &ControlSignal,
    l: f64,
    cfg: &ImagesConfig,
) -> Result<PaddedTraces> {
    if !(l >= PI * (1.0 - 1e-15)) || !l.is_finite() {
        return Err(Error::domain(format!(
            "restriction to (0, pi) needs L >= pi, got {l}"
        )));
    }
    let tau = u_minus.horizon();
    if (u_plus.horizon() - tau).abs() > 1e-12 * tau {
        return Err(Error::domain("both controls must share one horizon"));
    }
    let um = u_minus.delayed(tau)?;
    let up = u_plus.delayed(tau)?;
    let scale = um.time_scale().min(up.time_scale()).min(tau / 4.0);
    let trace = |z: f64, add_datum: bool| -> Result<ControlSignal> {
        let (um, up, cfg) = (um.clone(), up.clone(), cfg.clone());
        ControlSignal::from_fn(2.0 * tau, vec![tau], scale, move |t| {
            let v = phi_symmetric(&um, &up, t, l, C64::new(z, 0.0), &cfg)?;
            // at a source point the integral is the direct value; the
            // one-sided limit adds the datum
            Ok(if add_datum { v + up.eval(t)? } else { v })
        })
    };
    let on_edge = (l - PI).abs() <= 1e-15 * PI;
    Ok(PaddedTraces {
        v0: trace(0.0, false)?,
        vpi: trace(PI, on_edge)?,
        u_minus: um,
        u_plus: up,
    })
}
