//! Conserved and variational functionals of a complexified state.
//!
//! With `u = D w - i w_t`: `u1 = w` and `u2 = -w_t`. Momentum is carried as the physical
//! `P = -<w_t | grad w> = <u2 | grad u1>`, which makes a wave moving along `+p` have `P || +p`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Complex64, Field, Grid};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FunctionalSet {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "P")]
    pub p: [f64; 3],
    #[serde(rename = "Em")]
    pub em: f64,
    #[serde(rename = "K0")]
    pub k0: f64,
    #[serde(rename = "K2")]
    pub k2: f64,
    pub l2_norm: f64,
    pub h1_norm: f64,
    /// Blowup monitor `G = <w | w_t> = (1/2) d/dt ||u1||^2`.
    #[serde(rename = "G")]
    pub g: f64,
}

/// `integral phi^4` consistent with the grid's nonlinearity: pointwise on radial nodes,
/// exact Galerkin quartic in box mode.
pub fn quartic(grid: &Grid, phi: &[f64]) -> f64 {
    match grid {
        Grid::Radial(_) => grid.integrate(&phi.iter().map(|v| v.powi(4)).collect::<Vec<_>>()),
        Grid::Box(b) => grid.dot(&b.product3(phi, phi, phi), phi),
    }
}

/// Static action `J(phi) = (1/2) ||phi||_{H^1}^2 - (1/4) ||phi||_4^4`.
pub fn action(grid: &Grid, phi: &[f64]) -> f64 {
    0.5 * (grid.gradient_norm2(phi) + grid.dot(phi, phi)) - 0.25 * quartic(grid, phi)
}

/// `K0(phi) = integral |grad phi|^2 + phi^2 - phi^4`.
pub fn k0(grid: &Grid, phi: &[f64]) -> f64 {
    grid.gradient_norm2(phi) + grid.dot(phi, phi) - quartic(grid, phi)
}

/// `K2(phi) = integral |grad phi|^2 - (3/4) phi^4`.
pub fn k2(grid: &Grid, phi: &[f64]) -> f64 {
    grid.gradient_norm2(phi) - 0.75 * quartic(grid, phi)
}

/// `E(u) = ||u||^2 / 2 - ||u1||_4^4 / 4`.
pub fn energy(u: &Field) -> f64 {
    let n = u.norm();
    0.5 * n * n - 0.25 * quartic(u.grid(), &u.u1())
}

/// Cartesian gradient components of a real array; radial mode returns `[d_r f]`.
pub fn gradient(grid: &Grid, f: &[f64]) -> Vec<Vec<f64>> {
    let z: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    match grid {
        Grid::Radial(g) => vec![g.radial_derivative(&z).iter().map(|c| c.re).collect()],
        Grid::Box(b) => (0..3).map(|a| b.derivative(&z, a).iter().map(|c| c.re).collect()).collect(),
    }
}

/// `P = <u2 | grad u1>`; identically zero in radial mode.
pub fn momentum(u: &Field) -> [f64; 3] {
    let g = u.grid();
    if g.is_radial() {
        return [0.0; 3];
    }
    let u1 = u.u1();
    let u2 = u.u2();
    let grad = gradient(g, &u1);
    [g.dot(&u2, &grad[0]), g.dot(&u2, &grad[1]), g.dot(&u2, &grad[2])]
}

/// `Em = sign(E^2 - |P|^2) sqrt|E^2 - |P|^2|`.
pub fn minimal_energy(e: f64, p: [f64; 3]) -> f64 {
    let d = e * e - (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    if d == 0.0 {
        0.0
    } else {
        d.signum() * d.abs().sqrt()
    }
}

/// `G = <w | w_t> = -<u1 | u2>`.
pub fn blowup_monitor(u: &Field) -> f64 {
    -u.grid().dot(&u.u1(), &u.u2())
}

pub fn evaluate(u: &Field) -> FunctionalSet {
    let g = u.grid();
    let u1 = u.u1();
    let q4 = quartic(g, &u1);
    let grad2 = g.gradient_norm2(&u1);
    let l2 = g.dot(&u1, &u1);
    let n = u.norm();
    let e = 0.5 * n * n - 0.25 * q4;
    let p = momentum(u);
    FunctionalSet {
        e,
        p,
        em: minimal_energy(e, p),
        k0: grad2 + l2 - q4,
        k2: grad2 - 0.75 * q4,
        l2_norm: l2.sqrt(),
        h1_norm: (l2 + grad2).sqrt(),
        g: blowup_monitor(u),
    }
}

/// Higher-order remainder `C(v) = integral Q v1^3 + v1^4 / 4` of the energy expansion
/// `E(DQ + v) = J(Q) + <calL v | v> / 2 - C(v)`.
pub fn cubic_remainder(q: &[f64], v: &Field) -> Result<f64> {
    if q.len() != v.len() {
        return Err(Error::GridMismatch("ground state and perturbation differ in length".into()));
    }
    let g = v.grid();
    let v1 = v.u1();
    Ok(match g {
        Grid::Radial(_) => {
            g.integrate(&v1.iter().zip(q).map(|(a, b)| b * a.powi(3) + 0.25 * a.powi(4)).collect::<Vec<_>>())
        }
        Grid::Box(b) => {
            let c = b.product3(&v1, &v1, &v1);
            g.dot(&c, q) + 0.25 * g.dot(&c, &v1)
        }
    })
}

/// Smooth cutoff: 1 on `[0, 1]`, 0 on `[2, inf)`.
pub fn cutoff(s: f64) -> f64 {
    let bump = |x: f64| if x <= 0.0 { 0.0 } else { (-1.0 / x).exp() };
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        0.0
    } else {
        let a = bump(2.0 - s);
        a / (a + bump(s - 1.0))
    }
}

/// Parameters of the localized virial check.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct VirialParams {
    pub center: [f64; 3],
    /// Cutoff scale `S`; the weight is `chi(|x - c| / (S + |t - t0|))`. `None` means `w = 1`.
    pub s: Option<f64>,
    pub t0: f64,
    /// Samples with `||u|| >` this are excluded.
    pub blowup_norm: f64,
    /// Constant in `|dV/dt + K2| <= C E_ext + slack`.
    pub c: f64,
    pub slack: f64,
}

impl VirialParams {
    /// Default `S = sqrt(|log R| / R)` for a neighborhood radius `R`.
    pub fn for_radius(r: f64) -> Self {
        VirialParams {
            center: [0.0; 3],
            s: Some((r.ln().abs() / r).sqrt()),
            t0: 0.0,
            blowup_norm: 1e3,
            c: 10.0,
            slack: 1e-3,
        }
    }
}

impl Default for VirialParams {
    fn default() -> Self {
        VirialParams { center: [0.0; 3], s: None, t0: 0.0, blowup_norm: 1e3, c: 10.0, slack: 1e-3 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct VirialRow {
    pub t: f64,
    pub dv_dt: f64,
    pub minus_k2: f64,
    pub e_ext: f64,
    pub excluded: bool,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct VirialTable {
    pub rows: Vec<VirialRow>,
    pub excluded: usize,
    pub max_defect: f64,
    pub pass: bool,
}

fn distance(grid: &Grid, i: usize, c: [f64; 3]) -> f64 {
    match grid {
        Grid::Radial(g) => g.node(i),
        Grid::Box(b) => {
            let p = b.point(i);
            ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2)).sqrt()
        }
    }
}

fn weight(grid: &Grid, params: &VirialParams, t: f64) -> Vec<f64> {
    match params.s {
        None => vec![1.0; grid.len()],
        Some(s) => {
            let scale = s + (t - params.t0).abs();
            (0..grid.len()).map(|i| cutoff(distance(grid, i, params.center) / scale)).collect()
        }
    }
}

/// `V_w = (1/2) <chi w_t | (x.grad + grad.x) w> = -(1/2) integral chi u2 (2 x.grad u1 + 3 u1)`.
pub fn virial(u: &Field, params: &VirialParams, t: f64) -> f64 {
    let g = u.grid();
    let u1 = u.u1();
    let u2 = u.u2();
    let grad = gradient(g, &u1);
    let chi = weight(g, params, t);
    let n = g.len();
    let f: Vec<f64> = (0..n)
        .map(|i| {
            let xgrad = match g {
                Grid::Radial(rg) => rg.node(i) * grad[0][i],
                Grid::Box(b) => {
                    let p = b.point(i);
                    (0..3).map(|a| (p[a] - params.center[a]) * grad[a][i]).sum()
                }
            };
            -0.5 * chi[i] * u2[i] * (2.0 * xgrad + 3.0 * u1[i])
        })
        .collect();
    g.integrate(&f)
}

/// Free energy outside the cone region `|x - c| <= S + |t - t0|`.
pub fn exterior_energy(u: &Field, params: &VirialParams, t: f64) -> f64 {
    let Some(s) = params.s else { return 0.0 };
    let g = u.grid();
    let u1 = u.u1();
    let u2 = u.u2();
    let grad = gradient(g, &u1);
    let radius = s + (t - params.t0).abs();
    let f: Vec<f64> = (0..g.len())
        .map(|i| {
            if distance(g, i, params.center) <= radius {
                0.0
            } else {
                let gr: f64 = grad.iter().map(|c| c[i] * c[i]).sum();
                0.5 * (gr + u1[i] * u1[i] + u2[i] * u2[i])
            }
        })
        .collect();
    g.integrate(&f)
}

/// Compares the centered difference of `V_w` with `-K2(u1)` along sampled states.
pub fn virial_rate(samples: &[(f64, Field)], params: &VirialParams) -> Result<VirialTable> {
    if samples.len() < 3 {
        return Err(Error::InvalidArgument("virial check needs at least three samples".into()));
    }
    let blown: Vec<bool> = samples.iter().map(|(_, u)| !(u.norm() <= params.blowup_norm)).collect();
    let v: Vec<f64> = samples.iter().map(|(t, u)| virial(u, params, *t)).collect();
    let mut rows = Vec::with_capacity(samples.len() - 2);
    let mut max_defect: f64 = 0.0;
    let mut excluded = 0;
    for i in 1..samples.len() - 1 {
        let (t, u) = &samples[i];
        let dt = samples[i + 1].0 - samples[i - 1].0;
        let dv_dt = (v[i + 1] - v[i - 1]) / dt;
        let minus_k2 = -k2(u.grid(), &u.u1());
        let e_ext = exterior_energy(u, params, *t);
        let skip = blown[i - 1] || blown[i] || blown[i + 1];
        let ok = skip || (dv_dt - minus_k2).abs() <= params.c * e_ext + params.slack;
        if skip {
            excluded += 1;
        } else {
            max_defect = max_defect.max((dv_dt - minus_k2).abs() - params.c * e_ext);
        }
        rows.push(VirialRow { t: *t, dv_dt, minus_k2, e_ext, excluded: skip, ok });
    }
    let pass = rows.iter().all(|r| r.ok) && excluded < rows.len();
    Ok(VirialTable { rows, excluded, max_defect, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::RadialGrid;

    #[test]
    fn zero_state_has_zero_functionals() {
        let g = Grid::Radial(RadialGrid::new(20.0, 127).unwrap());
        let f = evaluate(&Field::zeros(g));
        assert_eq!((f.e, f.em, f.k0, f.k2), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn minimal_energy_sign() {
        assert!((minimal_energy(2.0, [1.0, 0.0, 0.0]) - 3f64.sqrt()).abs() < 1e-15);
        assert!((minimal_energy(1.0, [2.0, 0.0, 0.0]) + 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(minimal_energy(1.0, [1.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn cutoff_is_monotone_and_smooth() {
        assert_eq!(cutoff(0.5), 1.0);
        assert_eq!(cutoff(2.5), 0.0);
        assert!((cutoff(1.5) - 0.5).abs() < 1e-12);
        let mut prev = 1.0;
        for i in 0..=100 {
            let c = cutoff(1.0 + i as f64 / 100.0);
            assert!(c <= prev);
            prev = c;
        }
    }
}
