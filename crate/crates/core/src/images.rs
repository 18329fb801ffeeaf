//! Method-of-images input-to-state maps.
//!
//! Every map is a sum of terms
//! `I_y[u](t, z) = ∫₀ᵗ ∂K/∂y(t−s, z, y) u(s) ds`
//! over image points `y`. With `σ = t − s` the integrand carries the factor
//! `exp(−ρ(σ)·b)` where `b = (z − y)²` and `ρ = coth(2σ)/2`. For complex
//! `z` that factor oscillates ever faster as `σ → 0`, so the small-`σ`
//! part is integrated in the `ρ` variable with a Filon rule: the slowly
//! varying cofactor is interpolated at Gauss–Legendre nodes and the
//! exponential is integrated exactly through Legendre moments. The rest of
//! the interval uses plain composite Gauss–Legendre in `σ`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::control::ControlSignal;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::hermite::{dy_factor, exponent, log_prefactor};
use crate::math::{exp_clamped, ln, pairwise_sum_c, sqrt, Hyper, C64, PI};
use crate::quad::GaussLegendre;

/// Below this `σ` the Filon rule in `ρ` takes over.
const SIGMA_SPLIT: f64 = 0.25;
/// Terms are dropped once `exp(−Re(b)·ρ)` falls below `e^{-CUT}`.
const CUT: f64 = 40.0;
/// Levels of geometric grading toward `σ = 0` when `b = 0`.
const ZERO_B_LEVELS: usize = 60;

/// Gauss–Legendre nodes plus the Legendre values needed by the Filon rule.
#[derive(Debug)]
pub struct TimeRule {
    gl: GaussLegendre,
    /// `legendre[j * n + k] = (2k+1)/2 · P_k(x_j)`.
    legendre: Vec<f64>,
}

impl TimeRule {
    fn new(n: usize) -> Self {
        let gl = GaussLegendre::new(n);
        let mut legendre = alloc::vec![0.0; n * n];
        for (j, &x) in gl.nodes.iter().enumerate() {
            let (mut p0, mut p1) = (1.0, x);
            for k in 0..n {
                let pk = if k == 0 {
                    1.0
                } else if k == 1 {
                    x
                } else {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                    p2
                };
                legendre[j * n + k] = (2.0 * k as f64 + 1.0) / 2.0 * pk;
            }
        }
        TimeRule { gl, legendre }
    }
}

/// Numerical settings for the image sums and their time integrals.
#[derive(Debug, Clone)]
pub struct ImagesConfig {
    /// Image sums run over `|k| ≤ k_max`.
    pub k_max: usize,
    /// Ratio of consecutive geometric panels toward `σ = 0`.
    pub grading_ratio: f64,
    /// Largest phase change `|b|·Δρ` per plain panel.
    pub phase_step: f64,
    /// Largest panel length in `σ`.
    pub max_dsigma: f64,
    /// Largest `|b|·h` (half-width `h` in `ρ`) per Filon panel.
    pub max_beta: f64,
    /// Panel budget per time integral.
    pub max_panels: usize,
    rule: Arc<TimeRule>,
}

impl ImagesConfig {
    pub fn new(k_max: usize, quad_nodes: usize) -> Result<Self> {
        if k_max < 1 {
            return Err(Error::domain("k_max must be at least 1"));
        }
        if !(4..=64).contains(&quad_nodes) {
            return Err(Error::domain(format!(
                "quad_nodes must lie in 4..=64, got {quad_nodes}"
            )));
        }
        Ok(ImagesConfig {
            k_max,
            grading_ratio: 0.5,
            phase_step: 4.0,
            max_dsigma: 0.02,
            max_beta: 200.0,
            max_panels: 200_000,
            rule: Arc::new(TimeRule::new(quad_nodes)),
        })
    }

    pub fn quad_nodes(&self) -> usize {
        self.rule.gl.len()
    }

    pub fn with_k_max(&self, k_max: usize) -> Result<Self> {
        if k_max < 1 {
            return Err(Error::domain("k_max must be at least 1"));
        }
        Ok(ImagesConfig {
            k_max,
            ..self.clone()
        })
    }

    fn validate(&self) -> Result<()> {
        let ok = self.grading_ratio > 0.0
            && self.grading_ratio < 1.0
            && self.phase_step > 0.0
            && self.max_dsigma > 0.0
            && self.max_beta > 0.0
            && self.max_panels > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::domain("invalid time-quadrature settings"))
        }
    }
}

impl Default for ImagesConfig {
    fn default() -> Self {
        ImagesConfig::new(6, 16).expect("default settings are valid")
    }
}

/// Kernel whose `y`-derivative is integrated in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Family {
    /// Mehler kernel, `ρ = coth(2σ)/2`.
    Hermite,
    /// Heat kernel on the half-line, `ρ = 1/(4σ)`.
    Heat,
}

impl Family {
    fn rho(self, s: f64) -> f64 {
        match self {
            Family::Hermite => Hyper::new(s).coth2 / 2.0,
            Family::Heat => 0.25 / s,
        }
    }

    fn sigma(self, r: f64) -> f64 {
        match self {
            Family::Hermite => 0.5 * libm::atanh(0.5 / r),
            Family::Heat => 0.25 / r,
        }
    }

    /// `|dσ/dρ|`.
    fn dsigma(self, r: f64) -> f64 {
        match self {
            Family::Hermite => 1.0 / (4.0 * r * r - 1.0),
            Family::Heat => 0.25 / (r * r),
        }
    }
}

/// Quadrature nodes `σⱼ` with complex weights for `∫₀ᵗ F(σ) dσ` where `F`
/// carries the factor `exp(−ρ(σ)·b)`.
#[derive(Debug, Default)]
struct TimeNodes {
    sigma: Vec<f64>,
    weight: Vec<C64>,
}

/// `μ_k = ∫₋₁¹ e^{−β(1+x)} P_k(x) dx` for `k < out.len()`, by Miller's
/// backward recurrence `μ_{k−1} = μ_{k+1} − (2k+1)/β · μ_k`.
fn filon_moments(beta: C64, out: &mut [C64]) {
    let n = out.len();
    out.iter_mut().for_each(|m| *m = C64::new(0.0, 0.0));
    if beta.re == 0.0 && beta.im == 0.0 {
        out[0] = C64::new(2.0, 0.0);
        return;
    }
    let top = n + libm::ceil(beta.norm()) as usize + 32;
    let mut next = C64::new(0.0, 0.0);
    let mut cur = C64::new(1.0, 0.0);
    // normalisation sum Σ(2k+1)(−1)^k μ_k, kept alongside in case μ₀ ≈ 0
    let mut sum = cur * (if top.is_multiple_of(2) { 1.0 } else { -1.0 }) * (2.0 * top as f64 + 1.0);
    for k in (1..=top).rev() {
        let prev = next - cur * ((2.0 * k as f64 + 1.0) / beta);
        next = cur;
        cur = prev;
        let km1 = k - 1;
        let sign = if km1 % 2 == 0 { 1.0 } else { -1.0 };
        sum += cur * sign * (2.0 * km1 as f64 + 1.0);
        if km1 < n {
            out[km1] = cur;
        }
        let mag = cur.norm();
        if mag > 1e100 {
            let s = 1.0 / mag;
            cur *= s;
            next *= s;
            sum *= s;
            let lo = km1.min(n);
            out[lo..].iter_mut().for_each(|m| *m *= s);
        }
    }
    // closed form μ₀ = (1 − e^{−2β})/β
    let one_minus = -cexpm1(-2.0 * beta);
    let scale = if one_minus.norm() > 0.25 {
        (one_minus / beta) / out[0]
    } else {
        C64::new(2.0, 0.0) / sum
    };
    out.iter_mut().for_each(|m| *m *= scale);
}

fn cexpm1(w: C64) -> C64 {
    let (s, c) = libm::sincos(w.im);
    let half = libm::sin(0.5 * w.im);
    C64::new(
        libm::expm1(w.re) * c - 2.0 * half * half,
        libm::exp(w.re) * s,
    )
}

struct NodeBuilder<'a> {
    family: Family,
    b: C64,
    cfg: &'a ImagesConfig,
    out: TimeNodes,
    panels: usize,
    moments: Vec<C64>,
}

impl NodeBuilder<'_> {
    fn bump(&mut self) -> Result<()> {
        self.panels += 1;
        if self.panels > self.cfg.max_panels {
            return Err(Error::numeric(
                "time quadrature exceeded its panel budget",
                self.panels as f64,
            ));
        }
        Ok(())
    }

    fn plain(&mut self, a: f64, b: f64) -> Result<()> {
        if b <= a {
            return Ok(());
        }
        self.bump()?;
        for (s, w) in self.cfg.rule.gl.mapped(a, b) {
            self.out.sigma.push(s);
            self.out.weight.push(C64::new(w, 0.0));
        }
        Ok(())
    }

    /// Filon panel on `[ra, rb]` in `ρ`.
    fn filon(&mut self, ra: f64, rb: f64) -> Result<()> {
        if rb <= ra {
            return Ok(());
        }
        self.bump()?;
        let rule = &self.cfg.rule;
        let n = rule.gl.len();
        let h = 0.5 * (rb - ra);
        let m = 0.5 * (rb + ra);
        filon_moments(self.b * h, &mut self.moments);
        for j in 0..n {
            let x = rule.gl.nodes[j];
            let lj = &rule.legendre[j * n..(j + 1) * n];
            let mut wj = self
                .moments
                .iter()
                .zip(lj)
                .fold(C64::new(0.0, 0.0), |acc, (&mk, &l)| acc + mk * l);
            wj *= rule.gl.weights[j];
            let r = m + h * x;
            let shift = exp_clamped(self.b * (r - ra));
            self.out.sigma.push(self.family.sigma(r));
            self.out
                .weight
                .push(wj * shift * (h * self.family.dsigma(r)));
        }
        Ok(())
    }
}

/// `ρ` beyond which the `exp(−Re(b)ρ)` factor makes the rest negligible.
fn rho_cut(b: C64) -> f64 {
    if b.re <= 0.0 {
        return f64::INFINITY;
    }
    let extra = ln(sqrt(b.norm()) / b.re).max(0.0);
    (CUT + extra) / b.re
}

fn time_nodes(
    family: Family,
    b: C64,
    t: f64,
    kinks_sigma: &[f64],
    scale: f64,
    cfg: &ImagesConfig,
) -> Result<TimeNodes> {
    cfg.validate()?;
    let b_zero = b.re == 0.0 && b.im == 0.0;
    if !b_zero && !(b.re > 0.0) {
        return Err(Error::domain(format!(
            "time integral diverges: Re((z - y)^2) = {} is not positive",
            b.re
        )));
    }
    let mut nb = NodeBuilder {
        family,
        b,
        cfg,
        out: TimeNodes::default(),
        panels: 0,
        moments: alloc::vec![C64::new(0.0, 0.0); cfg.quad_nodes()],
    };
    if t <= 0.0 {
        return Ok(nb.out);
    }
    let dsig = cfg.max_dsigma.min(scale);
    let r_cut = rho_cut(b);
    let s1 = t.min(SIGMA_SPLIT);
    let mut kinks: Vec<f64> = kinks_sigma
        .iter()
        .copied()
        .filter(|&k| k > 0.0 && k < t)
        .collect();
    kinks.sort_by(f64::total_cmp);

    // σ ∈ [s1, t]: plain panels, equal steps in ρ for the phase
    if t > s1 {
        let mut edges = alloc::vec![s1];
        edges.extend(kinks.iter().copied().filter(|&k| k > s1));
        edges.push(t);
        for w in edges.windows(2) {
            let (ra, rb) = (family.rho(w[1]), family.rho(w[0]));
            if ra >= r_cut {
                continue;
            }
            let n_phase = libm::ceil(b.norm() * (rb - ra) / cfg.phase_step).max(1.0) as usize;
            let mut prev = w[0];
            for i in 1..=n_phase {
                let next = if i == n_phase {
                    w[1]
                } else {
                    family.sigma(rb - (rb - ra) * i as f64 / n_phase as f64)
                };
                let n_len = libm::ceil((next - prev) / dsig).max(1.0) as usize;
                for k in 0..n_len {
                    let a = prev + (next - prev) * k as f64 / n_len as f64;
                    let c = prev + (next - prev) * (k + 1) as f64 / n_len as f64;
                    nb.plain(a, c)?;
                }
                prev = next;
            }
        }
    }

    // σ ∈ (0, s1)
    let inner_kinks: Vec<f64> = kinks.iter().copied().filter(|&k| k < s1).collect();
    if b_zero {
        // integrand ~ σ^{1/2}: geometric panels down to s1·ratio^LEVELS
        let mut edges = alloc::vec![s1];
        let mut s = s1;
        for _ in 0..ZERO_B_LEVELS {
            s *= cfg.grading_ratio;
            edges.push(s);
        }
        edges.extend(inner_kinks.iter().copied());
        edges.sort_by(|a, b| b.total_cmp(a));
        edges.dedup();
        for w in edges.windows(2) {
            let n_len = libm::ceil((w[0] - w[1]) / dsig).max(1.0) as usize;
            for k in 0..n_len {
                let a = w[1] + (w[0] - w[1]) * k as f64 / n_len as f64;
                let c = w[1] + (w[0] - w[1]) * (k + 1) as f64 / n_len as f64;
                nb.plain(a, c)?;
            }
        }
        return Ok(nb.out);
    }

    let r1 = family.rho(s1);
    if r1 >= r_cut {
        return Ok(nb.out);
    }
    let mut edges = alloc::vec![r1];
    let mut r = r1;
    while r < r_cut {
        r = (r / cfg.grading_ratio).min(r_cut);
        edges.push(r);
        if edges.len() > cfg.max_panels {
            return Err(Error::numeric(
                "time quadrature exceeded its panel budget",
                edges.len() as f64,
            ));
        }
    }
    edges.extend(
        inner_kinks
            .iter()
            .map(|&k| family.rho(k))
            .filter(|&x| x < r_cut),
    );
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let re_cap = 20.0;
    for w in edges.windows(2) {
        let (ra, rb) = (w[0], w[1]);
        // σ-length of the panel
        let n_len = libm::ceil((family.sigma(ra) - family.sigma(rb)) / dsig).max(1.0) as usize;
        let mut prev = ra;
        for i in 1..=n_len {
            let next = if i == n_len {
                rb
            } else {
                family.rho(
                    family.sigma(ra)
                        - (family.sigma(ra) - family.sigma(rb)) * i as f64 / n_len as f64,
                )
            };
            let half = 0.5 * (next - prev);
            let n_beta = libm::ceil((b.norm() * half / cfg.max_beta).max(b.re * half / re_cap))
                .max(1.0) as usize;
            for k in 0..n_beta {
                let a = prev + (next - prev) * k as f64 / n_beta as f64;
                let c = prev + (next - prev) * (k + 1) as f64 / n_beta as f64;
                nb.filon(a, c)?;
            }
            prev = next;
        }
    }
    Ok(nb.out)
}

/// A linear functional `u ↦ Σ cⱼ u(sⱼ)` approximating one image term.
#[derive(Debug, Clone, Default)]
pub struct Functional {
    pub s: Vec<f64>,
    pub c: Vec<C64>,
}

impl Functional {
    pub fn apply(&self, u: &ControlSignal) -> Result<C64> {
        let terms = self
            .s
            .iter()
            .zip(&self.c)
            .map(|(&s, &c)| Ok(c * u.eval(s)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(pairwise_sum_c(&terms))
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

/// Quadrature for `u ↦ ∫₀ᵗ ∂K/∂y(t−s, z, y) u(s) ds`, valid for every
/// control whose kinks are among `kinks` and which varies on time scales
/// no shorter than `scale`.
pub fn image_functional(
    y: f64,
    t: f64,
    z: C64,
    kinks: &[f64],
    scale: f64,
    cfg: &ImagesConfig,
) -> Result<Functional> {
    let d = z - y;
    let ks: Vec<f64> = kinks.iter().map(|&k| t - k).collect();
    let nodes = time_nodes(Family::Hermite, d * d, t, &ks, scale, cfg)?;
    let yc = C64::new(y, 0.0);
    let mut f = Functional {
        s: Vec::with_capacity(nodes.sigma.len()),
        c: Vec::with_capacity(nodes.sigma.len()),
    };
    for (&sg, &w) in nodes.sigma.iter().zip(&nodes.weight) {
        let h = Hyper::new(sg);
        let k = exp_clamped(exponent(&h, z, yc) + log_prefactor(&h));
        f.s.push(t - sg);
        f.c.push(w * k * dy_factor(&h, z, yc));
    }
    Ok(f)
}

/// Quadrature for `f ↦ ∫₀ᵀ z e^{−z²/(4σ)} / (2√π σ^{3/2}) f(T−σ) dσ`.
pub fn heat_functional(
    big_t: f64,
    z: C64,
    kinks: &[f64],
    scale: f64,
    cfg: &ImagesConfig,
) -> Result<Functional> {
    if z.re == 0.0 && z.im == 0.0 {
        return Ok(Functional::default());
    }
    let ks: Vec<f64> = kinks.iter().map(|&k| big_t - k).collect();
    let nodes = time_nodes(Family::Heat, z * z, big_t, &ks, scale, cfg)?;
    let pref = z / (2.0 * sqrt(PI));
    let mut f = Functional::default();
    for (&sg, &w) in nodes.sigma.iter().zip(&nodes.weight) {
        let e = exp_clamped(-(z * z) * (0.25 / sg) - 1.5 * ln(sg));
        f.s.push(big_t - sg);
        f.c.push(w * pref * e);
    }
    Ok(f)
}

fn check_time(t: f64, horizon: f64) -> Result<()> {
    if !(t >= 0.0) || t > horizon * (1.0 + 1e-12) {
        return Err(Error::domain(format!(
            "evaluation time {t} outside [0, {horizon}]"
        )));
    }
    Ok(())
}

/// `±2 I_y[u](t, z)`, skipping zero controls.
fn image_term(
    sign: f64,
    y: f64,
    u: &ControlSignal,
    t: f64,
    z: C64,
    cfg: &ImagesConfig,
) -> Result<C64> {
    if u.is_zero() || t == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let f = image_functional(y, t, z, &u.kinks(), u.time_scale(), cfg)?;
    Ok(f.apply(u)? * (2.0 * sign))
}

fn ks(k_max: usize) -> impl Iterator<Item = i64> {
    let k = k_max as i64;
    -k..=k
}

/// State at time `t` of the Hermite heat equation on `(0, π)` with
/// Dirichlet data `u0` at `0` and `upi` at `π`, zero initial state.
pub fn phi_segment(
    u0: &ControlSignal,
    upi: &ControlSignal,
    t: f64,
    z: C64,
    cfg: &ImagesConfig,
) -> Result<C64> {
    check_time(t, u0.horizon().min(upi.horizon()))?;
    let mut parts = Vec::with_capacity(2 * (2 * cfg.k_max + 1));
    for k in ks(cfg.k_max) {
        let kf = k as f64;
        parts.push(image_term(1.0, 2.0 * kf * PI, u0, t, z, cfg)?);
        parts.push(image_term(-1.0, (2.0 * kf + 1.0) * PI, upi, t, z, cfg)?);
    }
    Ok(pairwise_sum_c(&parts))
}

/// Half-line map `2∫₀ᵗ ∂K/∂y(t−s, z, 0) u₀(s) ds` on `(0, ∞)`.
pub fn phi_halfline_0(u0: &ControlSignal, t: f64, z: C64, cfg: &ImagesConfig) -> Result<C64> {
    check_time(t, u0.horizon())?;
    image_term(1.0, 0.0, u0, t, z, cfg)
}

/// Half-line map `−2∫₀ᵗ ∂K/∂y(t−s, z, π) u_π(s) ds` on `(−∞, π)`.
pub fn phi_halfline_pi(upi: &ControlSignal, t: f64, z: C64, cfg: &ImagesConfig) -> Result<C64> {
    check_time(t, upi.horizon())?;
    image_term(-1.0, PI, upi, t, z, cfg)
}

/// Image terms `k ≠ 0` of the `u₀` part of [`phi_segment`].
pub fn remainder_0(u0: &ControlSignal, t: f64, z: C64, cfg: &ImagesConfig) -> Result<C64> {
    check_time(t, u0.horizon())?;
    let parts = ks(cfg.k_max)
        .filter(|&k| k != 0)
        .map(|k| image_term(1.0, 2.0 * k as f64 * PI, u0, t, z, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum_c(&parts))
}

/// Image terms `k ≠ 0` of the `u_π` part of [`phi_segment`].
pub fn remainder_pi(upi: &ControlSignal, t: f64, z: C64, cfg: &ImagesConfig) -> Result<C64> {
    check_time(t, upi.horizon())?;
    let parts = ks(cfg.k_max)
        .filter(|&k| k != 0)
        .map(|k| image_term(-1.0, (2.0 * k as f64 + 1.0) * PI, upi, t, z, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum_c(&parts))
}

/// State at time `t` on `(−L, L)` with Dirichlet data `uminus` at `−L` and
/// `uplus` at `L`; sources sit at `(4k−1)L` and `(4k+1)L`.
pub fn phi_symmetric(
    uminus: &ControlSignal,
    uplus: &ControlSignal,
    t: f64,
    l: f64,
    z: C64,
    cfg: &ImagesConfig,
) -> Result<C64> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::domain(format!(
            "half-width must be positive, got {l}"
        )));
    }
    check_time(t, uminus.horizon().min(uplus.horizon()))?;
    let mut parts = Vec::with_capacity(2 * (2 * cfg.k_max + 1));
    for k in ks(cfg.k_max) {
        let kf = k as f64;
        parts.push(image_term(1.0, (4.0 * kf - 1.0) * l, uminus, t, z, cfg)?);
        parts.push(image_term(-1.0, (4.0 * kf + 1.0) * l, uplus, t, z, cfg)?);
    }
    Ok(pairwise_sum_c(&parts))
}

/// `ψ(s) = (1 − cosh(2(τ−s)))/sinh(2(τ−s))`, which equals `−tanh(τ−s)`;
/// `ψ(τ) = 0`.
pub fn psi(s: f64, tau: f64) -> Result<f64> {
    if !(s >= 0.0 && s <= tau) {
        return Err(Error::domain(format!(
            "psi needs 0 <= s <= tau, got s = {s}, tau = {tau}"
        )));
    }
    let x = tau - s;
    if x == 0.0 {
        return Ok(0.0);
    }
    // (1 − cosh 2x)/sinh 2x = −tanh x; Hyper builds tanh x from expm1
    Ok(-Hyper::new(x).tanh1)
}

/// Which image family a remainder belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageSet {
    /// Sources at `2kπ`.
    Zero,
    /// Sources at `(2k+1)π`.
    Pi,
}

/// Bound on the image terms `|k| > k_max` of a remainder:
/// `Σ 2‖u‖∞ t · sup_{x ≥ csch 2t} (A x + B) √x e^{−c x} / √(2π)` with
/// `A = |z| + |y|`, `B = |y| tanh t` and `c = Re((z−y)²)/2`.
pub fn remainder_tail_bound(set: ImageSet, k_max: usize, t: f64, z: C64, sup_u: f64) -> f64 {
    if t <= 0.0 || sup_u == 0.0 {
        return 0.0;
    }
    let h = Hyper::new(t);
    let x0 = h.csch2;
    let term = |y: f64| -> f64 {
        let d = z - y;
        let c = (d * d).re / 2.0;
        if c <= 0.0 {
            return f64::INFINITY;
        }
        let a = z.norm() + y.abs();
        let bb = y.abs() * h.tanh1;
        // stationary point of (A x + B) √x e^{−c x}
        let qa = c * a;
        let qb = c * bb - 1.5 * a;
        let qc = -0.5 * bb;
        let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
        let xs = (-qb + sqrt(disc)) / (2.0 * qa);
        let x = x0.max(xs);
        let log_f = ln(a * x + bb) + 0.5 * ln(x) - c * x;
        2.0 * sup_u * t * libm::exp(log_f) / sqrt(2.0 * PI)
    };
    let mut total = 0.0;
    for k in (k_max as i64 + 1)..(k_max as i64 + 400) {
        let (yp, ym) = match set {
            ImageSet::Zero => (2.0 * k as f64 * PI, -2.0 * k as f64 * PI),
            ImageSet::Pi => ((2.0 * k as f64 + 1.0) * PI, (-2.0 * k as f64 + 1.0) * PI),
        };
        let tk = term(yp) + term(ym);
        total += tk;
        if !tk.is_finite() || tk <= 1e-300 || tk < 1e-17 * total {
            break;
        }
    }
    total
}

/// Samples `w(t, ·)` of a solution at (possibly complex) points.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub time: f64,
    pub points: Vec<C64>,
    pub values: Vec<C64>,
}

impl StateField {
    pub fn new(time: f64, points: Vec<C64>, values: Vec<C64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::domain("state field needs one value per point"));
        }
        if let Some(i) = values
            .iter()
            .position(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::numeric(
                format!("state value at point {i} is not finite"),
                f64::NAN,
            ));
        }
        Ok(StateField {
            time,
            points,
            values,
        })
    }

    /// Evaluates `f` at every point through `exec`; results keep point order.
    pub fn evaluate<E, F>(exec: &E, time: f64, points: Vec<C64>, f: F) -> Result<Self>
    where
        E: Executor,
        F: Fn(C64) -> Result<C64> + Sync + Send,
    {
        let values = exec
            .map(points.len(), |i| f(points[i]))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Self::new(time, points, values)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::hermite::{mehler_dk_dy, KernelEval};
    use crate::math::{c64, real};

    fn cfg() -> ImagesConfig {
        ImagesConfig::default()
    }

    fn brute_moment(beta: C64, k: usize) -> C64 {
        let gl = GaussLegendre::new(40);
        let edges: Vec<f64> = (0..=4000).map(|i| -1.0 + 2.0 * i as f64 / 4000.0).collect();
        gl.integrate_panels_c(&edges, |x| {
            let p = legendre(k, x);
            (-beta * (1.0 + x)).exp() * p
        })
    }

    fn legendre(k: usize, x: f64) -> f64 {
        let (mut p0, mut p1) = (1.0, x);
        if k == 0 {
            return 1.0;
        }
        for j in 2..=k {
            let jf = j as f64;
            let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
            p0 = p1;
            p1 = p2;
        }
        p1
    }

    #[test]
    fn filon_moments_match_brute_force() {
        for beta in [
            c64(1e-9, 0.0),
            c64(0.3, 0.2),
            c64(5.0, -40.0),
            c64(0.01, 150.0),
            c64(0.0, PI),
            c64(18.0, 3.0),
        ] {
            let mut m = vec![C64::new(0.0, 0.0); 16];
            filon_moments(beta, &mut m);
            for (k, &mk) in m.iter().enumerate() {
                let bf = brute_moment(beta, k);
                assert!((mk - bf).norm() < 1e-12, "beta={beta} k={k}: {mk} vs {bf}");
            }
        }
    }

    fn direct(y: f64, t: f64, z: C64, u: impl Fn(f64) -> f64) -> C64 {
        // dense plain quadrature in σ, only for mildly oscillatory cases
        let gl = GaussLegendre::new(20);
        let mut edges = vec![0.0];
        let mut s = t * 1e-12;
        while s < t {
            edges.push(s);
            s *= 1.05;
        }
        edges.push(t);
        gl.integrate_panels_c(&edges, |sg| {
            let k = mehler_dk_dy(KernelEval::new(sg, z, real(y)).unwrap()).unwrap();
            k * u(t - sg)
        })
    }

    #[test]
    fn functional_matches_dense_quadrature() {
        for (y, z) in [
            (0.0, c64(0.5, 0.1)),
            (PI, c64(1.2, -0.3)),
            (0.0, c64(1.4, 1.1)),
        ] {
            let f = image_functional(y, 0.5, z, &[], f64::INFINITY, &cfg()).unwrap();
            let u = ControlSignal::from_expr(Expr::parse("1 + sin(3*t)").unwrap(), 0.5).unwrap();
            let got = f.apply(&u).unwrap();
            let want = direct(y, 0.5, z, |s| 1.0 + libm::sin(3.0 * s));
            assert!(
                (got - want).norm() < 1e-10 * want.norm().max(1.0),
                "{z}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn heat_half_line_constant_input_is_erfc() {
        let u = ControlSignal::constant(real(1.0), 0.25).unwrap();
        let f = heat_functional(0.25, real(1.0), &[], f64::INFINITY, &cfg()).unwrap();
        let v = f.apply(&u).unwrap();
        // erfc(1/(2·0.5)) = erfc(1)
        assert!(
            (v.re - 0.157_299_207_050_285_1).abs() < 1e-12 && v.im.abs() < 1e-14,
            "{v}"
        );
    }

    #[test]
    fn psi_is_minus_tanh() {
        for &s in &[0.0, 0.1, 0.3, 0.49, 0.5] {
            let p = psi(s, 0.5).unwrap();
            assert!((p + libm::tanh(0.5 - s)).abs() < 1e-15);
        }
        assert!(psi(0.6, 0.5).is_err());
        assert!(psi(-0.1, 0.5).is_err());
    }

    #[test]
    fn zero_and_trivial_inputs() {
        let z0 = ControlSignal::zero(0.5).unwrap();
        let one = ControlSignal::constant(real(1.0), 0.5).unwrap();
        let c = cfg();
        assert_eq!(
            phi_segment(&z0, &z0, 0.4, c64(1.0, 0.2), &c).unwrap(),
            C64::new(0.0, 0.0)
        );
        assert_eq!(
            phi_segment(&one, &one, 0.0, c64(1.0, 0.2), &c).unwrap(),
            C64::new(0.0, 0.0)
        );
        assert!(phi_segment(&one, &one, 0.6, c64(1.0, 0.2), &c).is_err());
        assert!(phi_segment(&one, &one, -0.1, c64(1.0, 0.2), &c).is_err());
        assert_eq!(
            phi_halfline_0(&one, 0.4, real(0.0), &c).unwrap(),
            C64::new(0.0, 0.0)
        );
        // outside the sector the integral does not converge
        assert!(matches!(
            phi_halfline_0(&one, 0.4, c64(0.5, 1.0), &c),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn tail_bound_is_monotone() {
        let z = c64(1.0, 0.3);
        let mut last = f64::INFINITY;
        for k in 1..8 {
            let b = remainder_tail_bound(ImageSet::Zero, k, 1.0, z, 1.0);
            assert!(b < last);
            last = b;
        }
    }
}
