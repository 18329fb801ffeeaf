//! Complex domains and discrete (weighted) Bergman norms.
//!
//! Squares `|x − c| + |y| < h` are integrated in the rotated coordinates
//! `α = (x−c) + y`, `β = (x−c) − y`, which map the square onto
//! `(−h, h)²` with `dA = dα dβ / 2`. Each axis carries composite
//! Gauss–Legendre panels graded geometrically toward both sides.
//! Sectors use polar coordinates around the vertex with radial shells added
//! until they stop contributing.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::control::ControlSignal;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::images::{image_functional, Functional, ImagesConfig};
use crate::math::{pairwise_sum, sqrt, C64, PI};
use crate::quad::GaussLegendre;

const GRADING_LEVELS: i32 = 8;

/// Open square with diagonal `(0, a)` on the real axis, or centred at `0`
/// with half-diagonal `l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SquareDomain {
    /// `|x − a/2| + |y| < a/2`.
    Diagonal { a: f64 },
    /// `|x| + |y| < l`.
    Centered { l: f64 },
}

impl SquareDomain {
    /// The square over `(0, π)`.
    pub fn d() -> Self {
        SquareDomain::Diagonal { a: PI }
    }

    /// `Δ ∩ (π + ε − Δ)`, the square with diagonal `(0, π+ε)`.
    pub fn d_eps(eps: f64) -> Self {
        SquareDomain::Diagonal { a: PI + eps }
    }

    pub fn centered(l: f64) -> Self {
        SquareDomain::Centered { l }
    }

    fn center_half(&self) -> (f64, f64) {
        match *self {
            SquareDomain::Diagonal { a } => (a / 2.0, a / 2.0),
            SquareDomain::Centered { l } => (0.0, l),
        }
    }

    fn validate(&self) -> Result<()> {
        let (_, h) = self.center_half();
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::domain(format!(
                "square size must be positive, got {h}"
            )));
        }
        Ok(())
    }

    pub fn contains(&self, z: C64) -> bool {
        let (c, h) = self.center_half();
        (z.re - c).abs() + z.im.abs() < h
    }

    pub fn area(&self) -> f64 {
        let (_, h) = self.center_half();
        2.0 * h * h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// `|arg(z − v)| < π/4`.
    Right,
    /// `|arg(v − z)| < π/4`.
    Left,
}

/// Quarter-plane sector of half-angle `π/4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorDomain {
    pub vertex: C64,
    pub orientation: Orientation,
}

impl SectorDomain {
    /// `Δ = {|arg z| < π/4}`.
    pub fn delta() -> Self {
        SectorDomain {
            vertex: C64::new(0.0, 0.0),
            orientation: Orientation::Right,
        }
    }

    pub fn contains(&self, z: C64) -> bool {
        let w = match self.orientation {
            Orientation::Right => z - self.vertex,
            Orientation::Left => self.vertex - z,
        };
        w.re > w.im.abs()
    }

    fn direction(&self) -> f64 {
        match self.orientation {
            Orientation::Right => 1.0,
            Orientation::Left => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Square(SquareDomain),
    Sector(SectorDomain),
}

pub fn contains(dom: &Domain, z: C64) -> bool {
    match dom {
        Domain::Square(s) => s.contains(z),
        Domain::Sector(s) => s.contains(z),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BergmanWeight {
    Unit,
    /// `ω(z) = (1/τ) e^{Re(z²)/(2τ)}`.
    Halfline {
        tau: f64,
    },
}

impl BergmanWeight {
    pub fn value(&self, z: C64) -> f64 {
        match *self {
            BergmanWeight::Unit => 1.0,
            BergmanWeight::Halfline { tau } => libm::exp((z * z).re / (2.0 * tau)) / tau,
        }
    }

    fn log_value(&self, z: C64) -> f64 {
        match *self {
            BergmanWeight::Unit => 0.0,
            BergmanWeight::Halfline { tau } => (z * z).re / (2.0 * tau) - libm::log(tau),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            BergmanWeight::Halfline { tau } if !(tau > 0.0 && tau.is_finite()) => Err(
                Error::domain(format!("weight horizon must be positive, got {tau}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Composite rule on `(−h, h)` with panels graded toward both ends.
fn graded_rule(h: f64, res: usize) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(res);
    let mut edges = vec![-h];
    for k in (1..=GRADING_LEVELS).rev() {
        edges.push(-h + h * libm::exp2(-k as f64));
    }
    edges.push(0.0);
    for k in 1..=GRADING_LEVELS {
        edges.push(h - h * libm::exp2(-k as f64));
    }
    edges.push(h);
    edges
        .windows(2)
        .flat_map(|w| gl.mapped(w[0], w[1]).collect::<Vec<_>>())
        .collect()
}

/// Interior nodes and weights `(z, w)` of a square (area element included).
pub fn square_nodes(dom: &SquareDomain, res: usize) -> Result<Vec<(C64, f64)>> {
    dom.validate()?;
    if res < 2 {
        return Err(Error::domain(
            "resolution must be at least 2 nodes per panel",
        ));
    }
    let (c, h) = dom.center_half();
    let rule = graded_rule(h, res);
    let mut out = Vec::with_capacity(rule.len() * rule.len());
    for &(a, wa) in &rule {
        for &(b, wb) in &rule {
            out.push((C64::new(c + (a + b) / 2.0, (a - b) / 2.0), wa * wb / 2.0));
        }
    }
    Ok(out)
}

fn sample_norm_sq<E, F>(exec: &E, nodes: &[(C64, f64)], f: &F, w: &BergmanWeight) -> Result<f64>
where
    E: Executor,
    F: Fn(C64) -> Result<C64> + Sync + Send,
{
    let vals = exec.map(nodes.len(), |i| f(nodes[i].0));
    let mut terms = Vec::with_capacity(nodes.len());
    for (i, v) in vals.into_iter().enumerate() {
        let v = v?;
        let (z, wt) = nodes[i];
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::numeric(
                format!("non-finite sample at node {i} (z = {z})"),
                f64::NAN,
            ));
        }
        let m = v.norm_sqr();
        if m == 0.0 {
            terms.push(0.0);
            continue;
        }
        // |f|²·ω in log form so a decaying f can offset an overflowing ω
        let t = wt * libm::exp(libm::log(m) + w.log_value(z));
        if !t.is_finite() {
            return Err(Error::numeric(
                format!("weighted sample overflows at node {i} (z = {z})"),
                t,
            ));
        }
        terms.push(t);
    }
    Ok(pairwise_sum(&terms))
}

/// Radial truncation settings for sectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorRule {
    pub shell_width: f64,
    /// Stop once a shell adds at most this fraction of the total.
    pub rel_tol: f64,
    pub max_shells: usize,
}

impl Default for SectorRule {
    fn default() -> Self {
        SectorRule {
            shell_width: 0.5,
            rel_tol: 1e-12,
            max_shells: 400,
        }
    }
}

fn shell_nodes(s: &SectorDomain, r0: f64, r1: f64, res: usize) -> Vec<(C64, f64)> {
    let gl = GaussLegendre::new(res);
    let theta = graded_rule(PI / 4.0, res);
    let dir = s.direction();
    let mut out = Vec::with_capacity(res * theta.len());
    for (r, wr) in gl.mapped(r0, r1) {
        for &(th, wt) in &theta {
            let (sn, cs) = libm::sincos(th);
            out.push((s.vertex + C64::new(dir * r * cs, dir * r * sn), r * wr * wt));
        }
    }
    out
}

/// `‖f‖` in `A²(dom, w)` by quadrature. `res` is the number of
/// Gauss–Legendre nodes per panel.
pub fn bergman_norm<E, F>(
    exec: &E,
    f: F,
    dom: &Domain,
    w: &BergmanWeight,
    res: usize,
) -> Result<f64>
where
    E: Executor,
    F: Fn(C64) -> Result<C64> + Sync + Send,
{
    w.validate()?;
    match dom {
        Domain::Square(sq) => Ok(sqrt(sample_norm_sq(exec, &square_nodes(sq, res)?, &f, w)?)),
        Domain::Sector(s) => Ok(sqrt(
            sector_norm_sq(exec, &f, s, w, res, &SectorRule::default())?.0,
        )),
    }
}

/// Squared sector norm and the outer radius reached.
pub fn sector_norm_sq<E, F>(
    exec: &E,
    f: &F,
    s: &SectorDomain,
    w: &BergmanWeight,
    res: usize,
    rule: &SectorRule,
) -> Result<(f64, f64)>
where
    E: Executor,
    F: Fn(C64) -> Result<C64> + Sync + Send,
{
    if res < 2 || !(rule.shell_width > 0.0) {
        return Err(Error::domain("invalid sector quadrature settings"));
    }
    let mut total = 0.0;
    let mut last = f64::INFINITY;
    for k in 0..rule.max_shells {
        let (r0, r1) = (
            k as f64 * rule.shell_width,
            (k + 1) as f64 * rule.shell_width,
        );
        let add = sample_norm_sq(exec, &shell_nodes(s, r0, r1, res), f, w)?;
        total += add;
        // two consecutive quiet shells
        if k >= 1 && add <= rule.rel_tol * total && last <= rule.rel_tol * total {
            return Ok((total, r1));
        }
        if total == 0.0 && k >= 3 {
            return Ok((0.0, r1));
        }
        last = add;
    }
    Err(Error::numeric(
        "sector quadrature did not reach its truncation tolerance",
        if total > 0.0 { last / total } else { last },
    ))
}

/// Operators whose boundedness into a Bergman space is probed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMap {
    /// `u ↦ 2∫ ∂K/∂y(τ−s, ·, 0) u ds`.
    HalflineZero,
    /// `u ↦ −2∫ ∂K/∂y(τ−s, ·, π) u ds`.
    HalflinePi,
    /// The segment map with `u_π = 0`.
    SegmentZero,
    /// The segment map with `u₀ = 0`.
    SegmentPi,
}

impl InputMap {
    fn sources(&self, k_max: usize) -> Vec<(f64, f64)> {
        let k = k_max as i64;
        match self {
            InputMap::HalflineZero => vec![(2.0, 0.0)],
            InputMap::HalflinePi => vec![(-2.0, PI)],
            InputMap::SegmentZero => (-k..=k).map(|j| (2.0, 2.0 * j as f64 * PI)).collect(),
            InputMap::SegmentPi => (-k..=k)
                .map(|j| (-2.0, (2.0 * j as f64 + 1.0) * PI))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundednessReport {
    /// `‖Φu‖/‖u‖` per ensemble member, `None` for zero controls.
    pub ratios: Vec<Option<f64>>,
    pub max_ratio: f64,
    /// Supremum of the ratio over the span of the basis.
    pub span_sup: f64,
    /// `‖Φ cos(jπs/τ)‖` for each basis mode.
    pub basis_norms: Vec<f64>,
    /// Row-major `Re⟨Φeᵢ, Φeⱼ⟩` for the cosine modes.
    pub gram: Vec<f64>,
    pub nodes: usize,
}

/// Probes `‖Φu‖_{A²(dom, w)} / ‖u‖_{L²(0,τ)}` on controls
/// `u = Σⱼ cⱼ cos(jπs/τ)` given by their coefficient vectors.
#[allow(clippy::too_many_arguments)]
pub fn boundedness_ratio<E: Executor>(
    exec: &E,
    map: InputMap,
    tau: f64,
    ensemble: &[Vec<f64>],
    dom: &SquareDomain,
    w: &BergmanWeight,
    res: usize,
    cfg: &ImagesConfig,
) -> Result<BoundednessReport> {
    if ensemble.is_empty() {
        return Err(Error::domain("ensemble must not be empty"));
    }
    w.validate()?;
    let modes = ensemble.iter().map(|c| c.len()).max().unwrap_or(0).max(1);
    let basis = (0..modes)
        .map(|j| {
            let mut c = vec![0.0; j + 1];
            c[j] = 1.0;
            ControlSignal::cosine(c, tau)
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = basis[modes - 1].time_scale();
    let nodes = square_nodes(dom, res)?;
    let sources = map.sources(cfg.k_max);
    // Φ e_j at every node
    let images = exec
        .map(nodes.len(), |i| -> Result<Vec<C64>> {
            let z = nodes[i].0;
            let fs = sources
                .iter()
                .map(|&(sign, y)| Ok((sign, image_functional(y, tau, z, &[], scale, cfg)?)))
                .collect::<Result<Vec<(f64, Functional)>>>()?;
            basis
                .iter()
                .map(|b| {
                    let mut acc = C64::new(0.0, 0.0);
                    for (sign, f) in &fs {
                        acc += f.apply(b)? * *sign;
                    }
                    Ok(acc)
                })
                .collect()
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    // Gram matrix Re G_ij = Σ_n w_n ω(z_n) Re(conj(a_ni) a_nj)
    let mut gram = vec![0.0; modes * modes];
    let mut col = vec![0.0; nodes.len()];
    for i in 0..modes {
        for j in i..modes {
            for (n, (z, wt)) in nodes.iter().enumerate() {
                let (a, b) = (images[n][i], images[n][j]);
                col[n] = wt * w.value(*z) * (a.conj() * b).re;
                if !col[n].is_finite() {
                    return Err(Error::numeric(
                        format!("non-finite mapped state at node {n} (z = {z})"),
                        f64::NAN,
                    ));
                }
            }
            let g = pairwise_sum(&col);
            gram[i * modes + j] = g;
            gram[j * modes + i] = g;
        }
    }
    let mass = |j: usize| if j == 0 { tau } else { tau / 2.0 };
    let ratios: Vec<Option<f64>> = ensemble
        .iter()
        .map(|c| {
            let den: f64 = c.iter().enumerate().map(|(j, v)| v * v * mass(j)).sum();
            if den == 0.0 {
                return None;
            }
            let mut num = 0.0;
            for (i, ci) in c.iter().enumerate() {
                for (j, cj) in c.iter().enumerate() {
                    num += ci * cj * gram[i * modes + j];
                }
            }
            Some(sqrt(num.max(0.0) / den))
        })
        .collect();
    let max_ratio = ratios.iter().flatten().copied().fold(0.0, f64::max);
    // largest eigenvalue of M^{-1/2} G M^{-1/2}
    let mut scaled = gram.clone();
    for i in 0..modes {
        for j in 0..modes {
            scaled[i * modes + j] /= sqrt(mass(i) * mass(j));
        }
    }
    let span_sup = sqrt(largest_eigenvalue(&scaled, modes).max(0.0));
    let basis_norms = (0..modes)
        .map(|j| sqrt(gram[j * modes + j].max(0.0)))
        .collect();
    Ok(BoundednessReport {
        ratios,
        max_ratio,
        span_sup,
        basis_norms,
        gram,
        nodes: nodes.len(),
    })
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by cyclic
/// Jacobi rotations.
fn largest_eigenvalue(a: &[f64], n: usize) -> f64 {
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        let diag: f64 = (0..n).map(|i| m[i * n + i] * m[i * n + i]).sum();
        if off <= 1e-30 * diag.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..n)
        .map(|i| m[i * n + i])
        .fold(f64::NEG_INFINITY, f64::max)
}
