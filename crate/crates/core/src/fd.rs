//! Crank–Nicolson solver for `∂ₜw = ∂ₓ²w − x²w` on a bounded interval with
//! time-dependent Dirichlet data.
//!
//! The scheme is the standard three-point CN discretisation; the tridiagonal
//! systems are real, the state may be complex. Boundary data enter at the
//! half step `t_{n+1/2}`. A few half-size backward Euler steps (Rannacher
//! start-up) damp the high-frequency error produced by data that are
//! incompatible at `t = 0` without spoiling second order.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::control::ControlSignal;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::images::StateField;
use crate::math::C64;

/// Uniform space-time grid: `n_x` interior nodes in `(a, b)` and `n_t` steps
/// on `(0, τ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdGrid {
    a: f64,
    b: f64,
    nx: usize,
    nt: usize,
    horizon: f64,
}

impl FdGrid {
    pub fn new(a: f64, b: f64, nx: usize, nt: usize, horizon: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::domain(format!("interval ({a}, {b}) is empty")));
        }
        if nx < 16 {
            return Err(Error::domain(format!(
                "need at least 16 interior nodes, got {nx}"
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) || nt == 0 {
            return Err(Error::domain(
                "time grid needs a positive horizon and at least one step",
            ));
        }
        let g = FdGrid {
            a,
            b,
            nx,
            nt,
            horizon,
        };
        if g.dt() > g.dx() * (1.0 + 1e-12) {
            return Err(Error::domain(format!(
                "time step {} exceeds space step {}",
                g.dt(),
                g.dx()
            )));
        }
        Ok(g)
    }

    /// Grid with spacing at most `dx` and time step at most `dt`.
    pub fn with_steps(a: f64, b: f64, dx: f64, dt: f64, horizon: f64) -> Result<Self> {
        if !(dx > 0.0 && dt > 0.0) {
            return Err(Error::domain("steps must be positive"));
        }
        let cells = libm::ceil((b - a) / dx - 1e-9).max(1.0) as usize;
        let nt = libm::ceil(horizon / dt - 1e-9).max(1.0) as usize;
        Self::new(a, b, cells.saturating_sub(1), nt, horizon)
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dx(&self) -> f64 {
        (self.b - self.a) / (self.nx + 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.nt as f64
    }

    /// Node `i ∈ 0..=nx+1`; `0` and `nx+1` are the boundary nodes.
    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx + 1 {
            self.b
        } else {
            self.a + i as f64 * self.dx()
        }
    }

    /// Samples `f` at the interior nodes.
    pub fn sample<F: Fn(f64) -> C64>(&self, f: F) -> Vec<C64> {
        (1..=self.nx).map(|i| f(self.x(i))).collect()
    }

    /// Same interval and horizon with both steps halved.
    pub fn refined(&self) -> Self {
        FdGrid {
            nx: 2 * self.nx + 1,
            nt: 2 * self.nt,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FdOptions {
    /// Number of half-size backward Euler steps replacing the first CN steps
    /// (must be even).
    pub rannacher_half_steps: usize,
    /// Keep every `k`-th state (plus the last one).
    pub record_every: Option<usize>,
}

impl Default for FdOptions {
    fn default() -> Self {
        FdOptions {
            rannacher_half_steps: 4,
            record_every: None,
        }
    }
}

/// Result of [`cn_run`]: nodes (boundary included) and the final state.
#[derive(Debug, Clone, PartialEq)]
pub struct FdSolution {
    pub grid: FdGrid,
    pub x: Vec<f64>,
    pub w: Vec<C64>,
    /// Recorded `(t, state)` pairs if requested.
    pub trajectory: Vec<(f64, Vec<C64>)>,
}

impl FdSolution {
    pub fn to_state_field(&self) -> Result<StateField> {
        StateField::new(
            self.grid.horizon,
            self.x.iter().map(|&x| C64::new(x, 0.0)).collect(),
            self.w.clone(),
        )
    }

    /// Value at a grid node nearest to `x` when `x` lies on the grid up to
    /// rounding, else `None`.
    pub fn at_node(&self, x: f64) -> Option<C64> {
        let r = (x - self.grid.a) / self.grid.dx();
        let i = libm::round(r);
        if (r - i).abs() > 1e-8 || i < 0.0 || i as usize >= self.x.len() {
            return None;
        }
        Some(self.w[i as usize])
    }
}

/// Tridiagonal solve for `(d + c·J) v = r`, where `J` has `−1` on both
/// off-diagonals; `d` is the diagonal.
struct Tridiag {
    // forward-eliminated pivots
    inv_pivot: Vec<f64>,
    c: f64,
}

impl Tridiag {
    fn new(diag: &[f64], c: f64) -> Self {
        let n = diag.len();
        let mut inv_pivot = vec![0.0; n];
        let mut p = diag[0];
        inv_pivot[0] = 1.0 / p;
        for i in 1..n {
            p = diag[i] - c * c / p;
            inv_pivot[i] = 1.0 / p;
        }
        Tridiag { inv_pivot, c }
    }

    fn solve(&self, r: &mut [C64]) {
        let n = r.len();
        // sub-diagonal entries are −c: forward sweep
        for i in 1..n {
            let m = self.c * self.inv_pivot[i - 1];
            let prev = r[i - 1];
            r[i] += prev * m;
        }
        r[n - 1] *= self.inv_pivot[n - 1];
        for i in (0..n - 1).rev() {
            let next = r[i + 1];
            r[i] = (r[i] + next * self.c) * self.inv_pivot[i];
        }
    }
}

fn l2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// Runs the scheme from the interior initial samples `w0` to the horizon.
///
/// With both boundary signals zero the discrete `L²` norm is checked to be
/// non-increasing at every step.
pub fn cn_run(
    grid: &FdGrid,
    u_left: &ControlSignal,
    u_right: &ControlSignal,
    w0: &[C64],
    opts: &FdOptions,
) -> Result<FdSolution> {
    let n = grid.nx;
    if w0.len() != n {
        return Err(Error::domain(format!(
            "initial state has {} samples, grid has {n} interior nodes",
            w0.len()
        )));
    }
    if !opts.rannacher_half_steps.is_multiple_of(2) || opts.rannacher_half_steps / 2 > grid.nt {
        return Err(Error::domain(
            "start-up steps must be even and fit in the time grid",
        ));
    }
    for (u, side) in [(u_left, "left"), (u_right, "right")] {
        if u.horizon() < grid.horizon * (1.0 - 1e-12) {
            return Err(Error::domain(format!(
                "{side} boundary signal ends at {} before the horizon {}",
                u.horizon(),
                grid.horizon
            )));
        }
    }
    let dx = grid.dx();
    let dt = grid.dt();
    let homogeneous = u_left.is_zero() && u_right.is_zero();
    // A = D2 − x², stored as diag(A) = −2/dx² − x², off = 1/dx²
    let inv_dx2 = 1.0 / (dx * dx);
    let a_diag: Vec<f64> = (1..=n)
        .map(|i| {
            let x = grid.x(i);
            -2.0 * inv_dx2 - x * x
        })
        .collect();

    let system = |theta_dt: f64| -> Tridiag {
        let diag: Vec<f64> = a_diag.iter().map(|&d| 1.0 - theta_dt * d).collect();
        Tridiag::new(&diag, theta_dt * inv_dx2)
    };

    let mut w = w0.to_vec();
    let mut rhs = vec![C64::new(0.0, 0.0); n];
    let mut trajectory = Vec::new();
    let mut norm = l2(&w);
    if opts.record_every.is_some() {
        trajectory.push((0.0, w.clone()));
    }

    let check = |w: &[C64], step: usize, norm: &mut f64| -> Result<()> {
        if let Some(i) = w
            .iter()
            .position(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::numeric(
                format!("state became non-finite at step {step}, node {}", i + 1),
                step as f64,
            ));
        }
        if homogeneous {
            let nn = l2(w);
            if nn > *norm * (1.0 + 1e-12) + 1e-300 {
                return Err(Error::numeric(
                    format!("discrete norm grew at step {step} with zero boundary data"),
                    nn / *norm,
                ));
            }
            *norm = nn;
        }
        Ok(())
    };

    // backward Euler half steps
    let half = opts.rannacher_half_steps;
    let mut t = 0.0;
    if half > 0 {
        let h = dt / 2.0;
        let sys = system(h);
        for k in 1..=half {
            let tn = h * k as f64;
            rhs.copy_from_slice(&w);
            rhs[0] += u_left.eval(tn)? * (h * inv_dx2);
            rhs[n - 1] += u_right.eval(tn)? * (h * inv_dx2);
            sys.solve(&mut rhs);
            core::mem::swap(&mut w, &mut rhs);
            check(&w, k, &mut norm)?;
        }
        t = h * half as f64;
    }
    let done = half / 2;
    let sys = system(dt / 2.0);
    let e = 0.5 * dt;
    for step in done..grid.nt {
        let t_mid = (step as f64 + 0.5) * dt;
        // explicit half: (I + dt/2 A) w
        for i in 0..n {
            let left = if i > 0 { w[i - 1] } else { C64::new(0.0, 0.0) };
            let right = if i + 1 < n {
                w[i + 1]
            } else {
                C64::new(0.0, 0.0)
            };
            rhs[i] = w[i] * (1.0 + e * a_diag[i]) + (left + right) * (e * inv_dx2);
        }
        rhs[0] += u_left.eval(t_mid)? * (dt * inv_dx2);
        rhs[n - 1] += u_right.eval(t_mid)? * (dt * inv_dx2);
        sys.solve(&mut rhs);
        core::mem::swap(&mut w, &mut rhs);
        check(&w, step + 1, &mut norm)?;
        t = (step + 1) as f64 * dt;
        if let Some(every) = opts.record_every {
            if (step + 1) % every.max(1) == 0 || step + 1 == grid.nt {
                trajectory.push((t, w.clone()));
            }
        }
    }
    let t_end = if grid.nt == done { t } else { grid.horizon };
    let mut full = Vec::with_capacity(n + 2);
    full.push(u_left.eval(t_end)?);
    full.extend_from_slice(&w);
    full.push(u_right.eval(t_end)?);
    Ok(FdSolution {
        grid: *grid,
        x: (0..n + 2).map(|i| grid.x(i)).collect(),
        w: full,
        trajectory,
    })
}

/// Observed order from a ladder of successively halved grids.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Max differences between consecutive solutions at the coarse nodes.
    pub diffs: Vec<f64>,
    /// `log₂(dᵢ/dᵢ₊₁)` for the last pair, `None` when the data are degenerate.
    pub order: Option<f64>,
}

/// Runs the ladder `grid, grid.refined(), …` (`levels ≥ 3`) in parallel and
/// estimates the convergence order from differences at shared nodes.
pub fn cn_convergence<E, F>(
    exec: &E,
    grid: &FdGrid,
    levels: usize,
    u_left: &ControlSignal,
    u_right: &ControlSignal,
    w0: F,
    opts: &FdOptions,
) -> Result<ConvergenceReport>
where
    E: Executor,
    F: Fn(f64) -> C64 + Sync + Send,
{
    if levels < 3 {
        return Err(Error::domain(format!(
            "order estimate needs at least 3 grids, got {levels}"
        )));
    }
    let mut grids = vec![*grid];
    for _ in 1..levels {
        let g = grids[grids.len() - 1].refined();
        grids.push(g);
    }
    let runs = exec
        .map(levels, |i| {
            cn_run(&grids[i], u_left, u_right, &grids[i].sample(&w0), opts)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(order_from_runs(&runs))
}

/// Order estimate from solutions on nested grids (each one the
/// [`FdGrid::refined`] of the previous).
pub fn order_from_runs(runs: &[FdSolution]) -> ConvergenceReport {
    let coarse = runs[0].x.len();
    let at = |r: &FdSolution, i: usize| {
        let stride = (r.x.len() - 1) / (coarse - 1);
        r.w[i * stride]
    };
    let diffs: Vec<f64> = runs
        .windows(2)
        .map(|p| {
            (0..coarse)
                .map(|i| (at(&p[0], i) - at(&p[1], i)).norm())
                .fold(0.0, f64::max)
        })
        .collect();
    let scale = runs[runs.len() - 1]
        .w
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    let order = match diffs.as_slice() {
        [.., d1, d2] if *d2 > 1e-14 * scale.max(1e-300) && *d1 > *d2 * 1e-3 => {
            Some(libm::log2(d1 / d2))
        }
        _ => None,
    };
    ConvergenceReport { diffs, order }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{hermite_h, HermiteIndex};
    use crate::math::real;

    fn zero(h: f64) -> ControlSignal {
        ControlSignal::zero(h).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(FdGrid::new(0.0, 1.0, 15, 100, 0.1).is_err());
        assert!(FdGrid::new(0.0, 1.0, 99, 1, 0.5).is_err());
        assert!(FdGrid::new(1.0, 0.0, 99, 100, 0.5).is_err());
        let g = FdGrid::new(0.0, 1.0, 99, 100, 0.5).unwrap();
        assert!((g.dx() - 0.01).abs() < 1e-15);
        assert_eq!(g.x(100), 1.0);
        assert_eq!(g.refined().nx(), 199);
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = FdGrid::new(-1.0, 1.0, 63, 64, 0.3).unwrap();
        let s = cn_run(
            &g,
            &zero(0.3),
            &zero(0.3),
            &vec![C64::new(0.0, 0.0); 63],
            &FdOptions::default(),
        )
        .unwrap();
        assert!(s.w.iter().all(|v| *v == C64::new(0.0, 0.0)));
    }

    #[test]
    fn ground_state_decays_like_exp_minus_t() {
        let g = FdGrid::with_steps(-8.0, 8.0, 1.0 / 64.0, 1.0 / 128.0, 0.5).unwrap();
        let h0 = |x: f64| real(hermite_h(HermiteIndex::new(0).unwrap(), x));
        let s = cn_run(
            &g,
            &zero(0.5),
            &zero(0.5),
            &g.sample(h0),
            &FdOptions::default(),
        )
        .unwrap();
        let err =
            s.x.iter()
                .zip(&s.w)
                .map(|(&x, &w)| (w - h0(x) * libm::exp(-0.5)).norm())
                .fold(0.0, f64::max);
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn tridiagonal_solver_inverts() {
        let d = [4.0, 5.0, 3.5, 6.0, 4.5];
        let c = 1.3;
        let x: Vec<C64> = (0..5)
            .map(|i| C64::new(i as f64 - 1.5, 0.5 * i as f64))
            .collect();
        let mut r: Vec<C64> = (0..5)
            .map(|i| {
                let mut v = x[i] * d[i];
                if i > 0 {
                    v -= x[i - 1] * c;
                }
                if i < 4 {
                    v -= x[i + 1] * c;
                }
                v
            })
            .collect();
        Tridiag::new(&d, c).solve(&mut r);
        for i in 0..5 {
            assert!((r[i] - x[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn too_few_grids_is_an_error() {
        let g = FdGrid::new(0.0, 1.0, 31, 32, 0.1).unwrap();
        let z = zero(0.1);
        let r = cn_convergence(
            &crate::exec::Sequential,
            &g,
            2,
            &z,
            &z,
            |_| real(0.0),
            &FdOptions::default(),
        );
        assert!(matches!(r, Err(Error::Domain(_))));
        let r = cn_convergence(
            &crate::exec::Sequential,
            &g,
            3,
            &z,
            &z,
            |_| real(0.0),
            &FdOptions::default(),
        )
        .unwrap();
        assert_eq!(r.order, None);
    }
}
