//! Gauss–Legendre and Gauss–Hermite rules.
//!
//! Node tables are built once and are immutable afterwards; share them by
//! reference (or through the configuration structs that own them).

use alloc::vec::Vec;

use crate::hermite::hermite_functions;
use crate::math::{exp, pairwise_sum_c, sqrt, C64, PI};

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = libm::cos(PI * (i as f64 + 0.75) / (nf + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    pub fn integrate_c<F: FnMut(f64) -> C64>(&self, a: f64, b: f64, mut f: F) -> C64 {
        self.mapped(a, b)
            .fold(C64::new(0.0, 0.0), |acc, (x, w)| acc + f(x) * w)
    }

    /// Composite rule over consecutive panels `edges[i]..edges[i+1]`.
    pub fn integrate_panels_c<F: FnMut(f64) -> C64>(&self, edges: &[f64], mut f: F) -> C64 {
        let parts: Vec<C64> = edges
            .windows(2)
            .map(|e| self.integrate_c(e[0], e[1], &mut f))
            .collect();
        pairwise_sum_c(&parts)
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let (p, pm1) = if n == 0 { (1.0, 0.0) } else { (p1, p0) };
    let d = n as f64 * (x * p - pm1) / (x * x - 1.0);
    (p, d)
}

/// Gauss–Hermite rule for the weight `e^{−x²}` on the real line.
///
/// `scaled_weights[i] = weights[i]·e^{x_i²}` so that plain integrands with
/// Gaussian decay can be integrated as `Σ sw_i f(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub scaled_weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        let nf = n as f64;
        let mut roots: Vec<f64> = Vec::with_capacity(n.div_ceil(2));
        let m = n.div_ceil(2);
        for i in 0..m {
            // initial guesses for the largest roots first
            let mut z = match i {
                0 => sqrt(2.0 * nf + 1.0) - 1.85575 * libm::pow(2.0 * nf + 1.0, -1.0 / 6.0),
                1 => roots[0] - 1.14 * libm::pow(nf, 0.426) / roots[0],
                2 => 1.86 * roots[1] - 0.86 * roots[0],
                3 => 1.91 * roots[2] - 0.91 * roots[1],
                _ => 2.0 * roots[i - 1] - roots[i - 2],
            };
            for _ in 0..200 {
                let h = hermite_functions(n, C64::new(z, 0.0));
                let hn = h[n].re;
                let dh = sqrt(2.0 * nf) * h[n - 1].re - z * hn;
                let dz = hn / dh;
                z -= dz;
                if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            roots.push(z);
        }
        let mut nodes = alloc::vec![0.0; n];
        for (i, &r) in roots.iter().enumerate() {
            nodes[i] = -r;
            nodes[n - 1 - i] = r;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        let scaled_weights: Vec<f64> = nodes
            .iter()
            .map(|&x| {
                let h = hermite_functions(n - 1, C64::new(x, 0.0));
                1.0 / (nf * h[n - 1].re * h[n - 1].re)
            })
            .collect();
        let weights = nodes
            .iter()
            .zip(&scaled_weights)
            .map(|(&x, &s)| s * exp(-x * x))
            .collect();
        GaussHermite {
            nodes,
            weights,
            scaled_weights,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫ f(x) dx` over the real line for an integrand whose Gaussian envelope
    /// is centred at `center` with length scale `scale`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, center: f64, scale: f64, mut f: F) -> f64 {
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.scaled_weights)
            .map(|(&x, &w)| w * f(center + scale * x))
            .collect();
        scale * crate::math::pairwise_sum(&terms)
    }

    pub fn integrate_c<F: FnMut(f64) -> C64>(&self, center: f64, scale: f64, mut f: F) -> C64 {
        let terms: Vec<C64> = self
            .nodes
            .iter()
            .zip(&self.scaled_weights)
            .map(|(&x, &w)| f(center + scale * x) * w)
            .collect();
        pairwise_sum_c(&terms) * scale
    }
}
