//! Linearization at the ground state.
//!
//! `L+ = -Delta + 1 - 3 Q^2` has one negative eigenvalue `-k^2` with positive
//! eigenfunction `rho`; the generalized eigenfunctions `g+-` of `i D calL` and the
//! symplectic split `v = lam+ g+ + lam- g- + gamma` are built from them. Dense
//! restricted-size operators (gap certification, matrix operator, resolvent and
//! evolution probes) live in [`dense`]; the free-kernel probe in [`kernel`].

pub mod dense;
pub mod kernel;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{omega, BoxGrid, Complex64, Field, Grid, Multiplier, RadialGrid, I};
use crate::ground_state::GroundState;

pub use dense::{
    assemble_matrix_l, coercivity, discrete_spectrum, resolvent_probe, resonance_test, verify_gap,
    weighted_evolution_probe, DenseRadial, EvolutionProbe, GapOptions, GapReport, MatrixOperator, ResolventOptions,
    ResolventSample, ResonanceReport,
};
pub use kernel::{kernel_probe, kernel_value, KernelOptions, KernelReport, KernelSample};

/// Linearized operators and eigendata on the ground state's grid.
#[derive(Clone, Debug)]
pub struct Linearization {
    pub gs: GroundState,
    pub k: f64,
    pub k2: f64,
    /// Samples of the positive, unit-norm eigenfunction `rho`.
    pub rho: Vec<f64>,
    pub gplus: Field,
    pub gminus: Field,
    /// `||L+ rho + k^2 rho||_2` at convergence.
    pub eig_residual: f64,
    pub inverse_iterations: usize,
}

/// JSON summary of the eigendata.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LinearizationSummary {
    pub k: f64,
    pub k2: f64,
    pub eig_residual: f64,
    pub gplus_residual: f64,
    pub gminus_residual: f64,
    pub omega_gp_gm: f64,
    pub rho_norm: f64,
    pub inverse_iterations: usize,
}

/// `(L+ - shift) u`; box mode uses the dealiased product `Pi(Q Q u)`.
pub(crate) fn potential_apply(grid: &Grid, q: &[f64], q2: &[f64], shift: f64, u: &[f64]) -> Vec<f64> {
    let h = grid.helmholtz_real(u);
    match grid {
        Grid::Radial(_) => h.iter().zip(u).zip(q2).map(|((a, &x), &p)| a - 3.0 * p * x - shift * x).collect(),
        Grid::Box(b) => {
            let p = b.product3(q, q, u);
            h.iter().zip(u).zip(&p).map(|((a, &x), &c)| a - 3.0 * c - shift * x).collect()
        }
    }
}

/// Preconditioned CG for `(L+ - shift) x = b` with `shift` below the spectrum.
#[allow(clippy::too_many_arguments)]
pub(crate) fn pcg(
    grid: &Grid,
    q: &[f64],
    q2: &[f64],
    shift: f64,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_it: usize,
) -> Vec<f64> {
    let precond = |r: &[f64]| grid.apply_real_symbol(r, |x2| 1.0 / (1.0 + x2 - shift));
    let mut x = x0.to_vec();
    let ax = potential_apply(grid, q, q2, shift, &x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
    let bnorm = grid.dot(b, b).sqrt().max(1e-300);
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = grid.dot(&r, &z);
    for _ in 0..max_it {
        if grid.dot(&r, &r).sqrt() <= tol * bnorm {
            break;
        }
        let ap = potential_apply(grid, q, q2, shift, &p);
        let alpha = rz / grid.dot(&p, &ap);
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        z = precond(&r);
        let rz_new = grid.dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..p.len() {
            p[i] = z[i] + beta * p[i];
        }
    }
    x
}

impl Linearization {
    pub fn grid(&self) -> Grid {
        self.gs.grid_ref()
    }

    pub fn radial_grid(&self) -> RadialGrid {
        self.gs.grid
    }

    /// `L+ u` on samples.
    pub fn lplus(&self, u: &[f64]) -> Vec<f64> {
        let q2: Vec<f64> = self.gs.q.iter().map(|v| v * v).collect();
        potential_apply(&self.grid(), &self.gs.q, &q2, 0.0, u)
    }

    /// `calL v = v - 3 D^{-1}(Q^2 v1)`.
    pub fn cal_l(&self, v: &Field) -> Field {
        let g = self.grid();
        let v1 = v.u1();
        let f: Vec<f64> = v1.iter().zip(&self.gs.q).map(|(a, q)| q * q * a).collect();
        let df = g.d_inv_real(&f);
        let data = v.data().iter().zip(&df).map(|(z, &d)| z - 3.0 * d).collect();
        Field::new(g, data).expect("finite")
    }

    /// `i D calL v`.
    pub fn idl(&self, v: &Field) -> Field {
        self.cal_l(v).apply(Multiplier::D).scale_complex(I)
    }

    /// `(lam+, lam-) = (omega(v, g-), -omega(v, g+))`.
    pub fn lambdas(&self, v: &Field) -> Result<(f64, f64)> {
        Ok((omega(v, &self.gminus)?, -omega(v, &self.gplus)?))
    }

    /// Symplectic split `v = lam+ g+ + lam- g- + gamma`.
    pub fn split(&self, v: &Field) -> Result<(f64, f64, Field)> {
        let (lp, lm) = self.lambdas(v)?;
        let gamma = v.axpy(-lp, &self.gplus)?.axpy(-lm, &self.gminus)?;
        Ok((lp, lm, gamma))
    }

    /// Continuous-spectrum projection of the radial sector.
    pub fn project_c(&self, v: &Field) -> Result<Field> {
        Ok(self.split(v)?.2)
    }

    /// `(||i D calL g+ - k g+||, ||i D calL g- + k g-||)`.
    pub fn eigen_residuals(&self) -> (f64, f64) {
        let rp = self.idl(&self.gplus).axpy(-self.k, &self.gplus).expect("same grid").norm();
        let rm = self.idl(&self.gminus).axpy(self.k, &self.gminus).expect("same grid").norm();
        (rp, rm)
    }

    pub fn summary(&self) -> LinearizationSummary {
        let (gp, gm) = self.eigen_residuals();
        let g = self.grid();
        LinearizationSummary {
            k: self.k,
            k2: self.k2,
            eig_residual: self.eig_residual,
            gplus_residual: gp,
            gminus_residual: gm,
            omega_gp_gm: omega(&self.gplus, &self.gminus).expect("same grid"),
            rho_norm: g.dot(&self.rho, &self.rho).sqrt(),
            inverse_iterations: self.inverse_iterations,
        }
    }

    /// `<Q | rho>`.
    pub fn q_rho(&self) -> f64 {
        self.grid().dot(&self.gs.q, &self.rho)
    }
}

/// Generalized eigenfunctions from `rho` and `k`.
pub fn eigenfunctions(grid: Grid, rho: &[f64], k: f64) -> Result<(Field, Field)> {
    let a = (2.0 * k).powf(-0.5);
    let b = (0.5 * k).sqrt();
    let u1: Vec<f64> = rho.iter().map(|r| a * r).collect();
    let up: Vec<f64> = rho.iter().map(|r| -b * r).collect();
    let um: Vec<f64> = rho.iter().map(|r| b * r).collect();
    Ok((Field::from_components(grid, &u1, &up)?, Field::from_components(grid, &u1, &um)?))
}

pub(crate) fn lowest_eigenpair(grid: &Grid, q: &[f64], x0: Vec<f64>, tol: f64) -> Result<(f64, Vec<f64>, f64, usize)> {
    let q2: Vec<f64> = q.iter().map(|v| v * v).collect();
    let normalize = |x: &mut Vec<f64>| {
        let s = grid.dot(x, x).sqrt();
        x.iter_mut().for_each(|v| *v /= s);
    };
    let rayleigh = |x: &[f64]| grid.dot(x, &potential_apply(grid, q, &q2, 0.0, x));
    let qmax2 = q2.iter().cloned().fold(0.0, f64::max);
    let mut x = x0;
    normalize(&mut x);
    let mut shift = 1.0 - 3.0 * qmax2 - 1.0;
    let mut lam = rayleigh(&x);
    let mut its = 0;
    let mut stage_two = false;
    let mut res = f64::INFINITY;
    let mut best = f64::INFINITY;
    let mut stall = 0;
    while its < 400 {
        its += 1;
        let mut y = pcg(grid, q, &q2, shift, &x, &x, 1e-14, 2000);
        normalize(&mut y);
        let new_lam = rayleigh(&y);
        x = y;
        let ax = potential_apply(grid, q, &q2, 0.0, &x);
        let r: Vec<f64> = ax.iter().zip(&x).map(|(a, v)| a - new_lam * v).collect();
        res = grid.dot(&r, &r).sqrt();
        if !stage_two && (new_lam - lam).abs() < 1e-6 * new_lam.abs() {
            stage_two = true;
            shift = new_lam - 0.5;
        }
        lam = new_lam;
        if res <= tol {
            break;
        }
        if stage_two {
            if res < 0.9 * best {
                best = res;
                stall = 0;
            } else {
                stall += 1;
                if stall > 8 {
                    break;
                }
            }
        }
    }
    if lam >= 0.0 {
        return Err(Error::Inconsistent(format!("lowest eigenvalue of L+ is {lam:.6e}, expected negative")));
    }
    if x.iter().sum::<f64>() < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    Ok((lam, x, res, its))
}

/// Computes `k`, `rho` and `g+-` on the ground state's grid.
pub fn compute_linearization(gs: &GroundState) -> Result<Linearization> {
    let grid = gs.grid_ref();
    let (lam, rho, res, its) = lowest_eigenpair(&grid, &gs.q, gs.q.clone(), 1e-11)?;
    let k2 = -lam;
    let k = k2.sqrt();
    let (gplus, gminus) = eigenfunctions(grid, &rho, k)?;
    Ok(Linearization { gs: gs.clone(), k, k2, rho, gplus, gminus, eig_residual: res, inverse_iterations: its })
}

/// `max_j ||i D calL (D d_j Q)||` in box mode with dealiased products, `Q` the box ground state.
pub fn box_translation_residual(q: &[f64], bx: BoxGrid) -> Result<f64> {
    let g = Grid::Box(bx);
    let qc: Vec<Complex64> = q.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut worst: f64 = 0.0;
    for axis in 0..3 {
        let dq: Vec<f64> = bx.derivative(&qc, axis).iter().map(|z| z.re).collect();
        let v = Field::static_state(g, &dq)?;
        let v1 = v.u1();
        let f = bx.product3(q, q, &v1);
        let df = g.d_inv_real(&f);
        let lv = Field::new(g, v.data().iter().zip(&df).map(|(z, &d)| z - 3.0 * d).collect())?;
        let r = lv.apply(Multiplier::D).scale_complex(I).norm();
        worst = worst.max(r);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::compute_ground_state;

    fn lin() -> Linearization {
        let gs = compute_ground_state(RadialGrid::new(30.0, 511).unwrap(), 1e-9).unwrap();
        compute_linearization(&gs).unwrap()
    }

    #[test]
    fn eigendata_satisfies_relations() {
        let l = lin();
        let s = l.summary();
        assert!((s.rho_norm - 1.0).abs() < 1e-10);
        assert!((s.omega_gp_gm - 1.0).abs() < 1e-6);
        assert!(s.gplus_residual < 1e-5 && s.gminus_residual < 1e-5, "{s:?}");
        // rho decays like exp(-sqrt(1 + k^2) r); positivity is checked above roundoff.
        let top = l.rho.iter().cloned().fold(0.0, f64::max);
        assert!(l.rho.iter().all(|&r| r > 0.0 || r.abs() < 1e-12 * top));
        assert!(l.k2 > 15.0 && l.k2 < 15.6);
    }

    #[test]
    fn split_is_symplectically_orthogonal() {
        let l = lin();
        let g = l.grid();
        let n = l.rho.len();
        let u1: Vec<f64> = (0..n).map(|m| (-(l.gs.grid.node(m) - 2.0).powi(2)).exp()).collect();
        let u2: Vec<f64> = (0..n).map(|m| l.gs.grid.node(m).sin() * (-l.gs.grid.node(m)).exp()).collect();
        let v = Field::from_components(g, &u1, &u2).unwrap();
        let (_, _, gamma) = l.split(&v).unwrap();
        assert!(omega(&gamma, &l.gplus).unwrap().abs() < 1e-10);
        assert!(omega(&gamma, &l.gminus).unwrap().abs() < 1e-10);
        assert!(g.dot(&gamma.u1(), &l.rho).abs() < 1e-10);
        assert!(g.dot(&gamma.u2(), &l.rho).abs() < 1e-10);
    }
}
