//! Free dispersive kernel `K^j(t, r) = r^{-1} integral e^{it<rho>_j} sin(r rho) psi(rho) d rho`,
//! `<rho>_j = sqrt(rho^2 + 4^{-j})`, with the smooth bump `psi` supported in `(1/2, 2)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::field::Complex64;
use crate::numerics::gauss_legendre;

const A: f64 = 0.5;
const B: f64 = 2.0;
const GL_ORDER: usize = 16;

/// `psi(rho) = exp(-1/((rho - 1/2)(2 - rho)))` on `(1/2, 2)`, zero elsewhere.
pub fn bump(rho: f64) -> f64 {
    if rho <= A || rho >= B {
        0.0
    } else {
        (-1.0 / ((rho - A) * (B - rho))).exp()
    }
}

/// Integrand of `K^j` at `rho`.
pub fn integrand(j: u32, t: f64, r: f64, rho: f64) -> Complex64 {
    let m2 = 4f64.powi(-(j as i32));
    let phase = t * (rho * rho + m2).sqrt();
    let radial = if r == 0.0 { rho } else { (r * rho).sin() / r };
    Complex64::from_polar(radial * bump(rho), phase)
}

fn composite(j: u32, t: f64, r: f64, panels: usize, nodes: &[f64], weights: &[f64]) -> Complex64 {
    let h = (B - A) / panels as f64;
    let mut s = Complex64::default();
    for p in 0..panels {
        let mid = A + (p as f64 + 0.5) * h;
        for (x, w) in nodes.iter().zip(weights) {
            s += integrand(j, t, r, mid + 0.5 * h * x) * (w * 0.5 * h);
        }
    }
    s
}

/// `K^j(t, r)` by composite Gauss-Legendre quadrature, with the difference between
/// `P` and `2P` panels as error estimate.
pub fn kernel_value(j: u32, t: f64, r: f64) -> (Complex64, f64) {
    let (x, w) = gauss_legendre(GL_ORDER);
    // At most about 3 pi of phase per coarse panel; the 16-point rule is then exact to roundoff.
    let panels = 16 + ((t + r) * (B - A) / (3.0 * std::f64::consts::PI)).ceil() as usize;
    let coarse = composite(j, t, r, panels, &x, &w);
    let fine = composite(j, t, r, 2 * panels, &x, &w);
    (fine, (fine - coarse).norm())
}

/// Brute-force trapezoid evaluation with `m` intervals (oracle).
pub fn kernel_trapezoid(j: u32, t: f64, r: f64, m: usize) -> Complex64 {
    let h = (B - A) / m as f64;
    (1..m).map(|i| integrand(j, t, r, A + i as f64 * h)).sum::<Complex64>() * h
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct KernelOptions {
    /// Times to sample; `None` uses `2^i`, `i = 0..=2j+7`, which reaches the
    /// stationary-phase regime `4^{-j} t >> 1` for every `j`.
    pub ts: Option<Vec<f64>>,
    /// Coarse `r` samples on `[0, 1.5 t]`.
    pub coarse_r: usize,
    /// Cap on refined samples near the light cone.
    pub refined_r: usize,
    pub error_tol: f64,
}

impl KernelOptions {
    pub fn t_grid(&self, j: u32) -> Vec<f64> {
        match &self.ts {
            Some(ts) => ts.clone(),
            None => (0..=(2 * j as i32 + 7)).map(|i| 2f64.powi(i)).collect(),
        }
    }
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions { ts: None, coarse_r: 32, refined_r: 200, error_tol: 1e-8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct KernelSample {
    pub j: u32,
    pub t: f64,
    pub r: f64,
    pub abs: f64,
    pub err: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct KernelReport {
    pub j: u32,
    /// `max |K^j| t^{3/2} / 2^j` over the sampled region.
    pub c1: f64,
    /// `max |K^j| t <t - r>^{1/2}` over `|t - r| in [4^{-j} t / 2, 2 * 4^{-j} t]`.
    pub c2: f64,
    pub max_err: f64,
    /// Samples whose quadrature error estimate exceeds the tolerance.
    pub unconverged: usize,
    pub samples: Vec<KernelSample>,
}

fn r_grid(j: u32, t: f64, opts: &KernelOptions) -> Vec<f64> {
    let mut rs: Vec<f64> = (0..opts.coarse_r).map(|i| 1.5 * t * i as f64 / (opts.coarse_r - 1) as f64).collect();
    let s = 4f64.powi(-(j as i32)) * t;
    let lo = (t - 4.0 * s - 4.0).max(0.0);
    let hi = t + 4.0;
    let step = ((hi - lo) / opts.refined_r as f64).max(0.25);
    let mut r = lo;
    while r <= hi {
        rs.push(r);
        r += step;
    }
    rs.sort_by(f64::total_cmp);
    rs.dedup();
    rs
}

/// Evaluates `K^j` on the sampled region and fits the decay constants.
pub fn kernel_probe(j: u32, opts: &KernelOptions) -> KernelReport {
    let points: Vec<(f64, f64)> =
        opts.t_grid(j).iter().flat_map(|&t| r_grid(j, t, opts).into_iter().map(move |r| (t, r))).collect();
    let samples: Vec<KernelSample> = points
        .par_iter()
        .map(|&(t, r)| {
            let (v, err) = kernel_value(j, t, r);
            KernelSample { j, t, r, abs: v.norm(), err }
        })
        .collect();
    let scale = 2f64.powi(j as i32);
    let s = 4f64.powi(-(j as i32));
    let mut c1: f64 = 0.0;
    let mut c2: f64 = 0.0;
    let mut max_err: f64 = 0.0;
    let mut unconverged = 0;
    for p in &samples {
        c1 = c1.max(p.abs * p.t.powf(1.5) / scale);
        let d = (p.t - p.r).abs();
        if d >= 0.5 * s * p.t && d <= 2.0 * s * p.t {
            c2 = c2.max(p.abs * p.t * (1.0 + d * d).powf(0.25));
        }
        max_err = max_err.max(p.err);
        if p.err > opts.error_tol {
            unconverged += 1;
        }
    }
    KernelReport { j, c1, c2, max_err, unconverged, samples }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_is_supported_in_the_interval() {
        assert_eq!(bump(0.5), 0.0);
        assert_eq!(bump(2.0), 0.0);
        assert!(bump(1.25) > 0.0);
    }

    #[test]
    fn quadrature_matches_fine_trapezoid_at_origin() {
        let (v, err) = kernel_value(0, 1.0, 0.0);
        let o = kernel_trapezoid(0, 1.0, 0.0, 200_000);
        assert!((v - o).norm() < 1e-8, "{v} {o}");
        assert!(err < 1e-8);
    }

    #[test]
    fn small_r_limit_is_continuous() {
        let (a, _) = kernel_value(1, 3.0, 0.0);
        let (b, _) = kernel_value(1, 3.0, 1e-7);
        assert!((a - b).norm() < 1e-9);
    }
}
