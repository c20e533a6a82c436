//! Modulation and symplectic decomposition about the ground-state family.
//!
//! A state is written `u = s (frak Q + lam+ g+ + lam- g- + gamma)(x - c)`, with the
//! sign `s`, the center `c` (box mode only) and the distance `dQ` to the family.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::boosts::{quartic_centroid, traveling_wave, BoostParams};
use crate::error::{Error, Result};
use crate::field::{inner, omega, BoxGrid, Complex64, Field, Grid, Multiplier};
use crate::functionals::{action, energy, k0, k2, momentum};
use crate::ground_state::{box_ground_state, GroundState};
use crate::linearization::{eigenfunctions, pcg, potential_apply, Linearization};

/// Calibrated constants of the sign and one-pass arguments.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Thresholds {
    /// Radius of the region where `dQ^2 = E - J + 2 k lam1^2` is used.
    pub delta_e: f64,
    /// Ejection distance.
    pub delta_x: f64,
    /// Trapping distance.
    pub delta_star: f64,
    pub r_star: f64,
    pub eps_star: f64,
    pub c_star: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { delta_e: 0.1, delta_x: 0.3, delta_star: 0.05, r_star: 0.1, eps_star: 0.02, c_star: 1.5 }
    }
}

impl Thresholds {
    /// `deltaS = deltaX / (2 Cstar)`: beyond it the sign is read off `K0`.
    pub fn delta_s(&self) -> f64 {
        self.delta_x / (2.0 * self.c_star)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.delta_e, self.delta_x, self.delta_star, self.r_star, self.eps_star, self.c_star];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument("thresholds must be positive and finite".into()));
        }
        if !(2.0 * self.eps_star < self.r_star && self.r_star < self.delta_x) {
            return Err(Error::InvalidArgument(format!(
                "need 2 epsStar < Rstar < deltaX, got {} < {} < {}",
                2.0 * self.eps_star,
                self.r_star,
                self.delta_x
            )));
        }
        if self.delta_s() > self.delta_e {
            return Err(Error::InvalidArgument(format!(
                "deltaS = {} exceeds deltaE = {}: the sign rules would leave a gap",
                self.delta_s(),
                self.delta_e
            )));
        }
        Ok(())
    }
}

/// Ground state, unstable/stable modes and their pairing data on one grid.
#[derive(Clone, Debug)]
pub struct ModeBasis {
    pub q: Vec<f64>,
    /// `frak Q = D Q`.
    pub state: Field,
    /// `J(Q)` evaluated with this grid's quadrature.
    pub jq: f64,
    pub k: f64,
    pub rho: Vec<f64>,
    pub gplus: Field,
    pub gminus: Field,
    pub q_rho: f64,
    /// Box mode: `d_j Q`; empty in radial mode.
    dq: Vec<Vec<f64>>,
    /// Box mode: `d_j d_l Q` for `j <= l`, row-major.
    d2q: Vec<Vec<f64>>,
}

fn real_spectral(bx: &BoxGrid, f: &[f64], axis: usize) -> Vec<f64> {
    let z: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    bx.derivative(&z, axis).iter().map(|c| c.re).collect()
}

/// `f(x - shift)` for a real box array.
pub fn translate_real(bx: &BoxGrid, f: &[f64], shift: [f64; 3]) -> Vec<f64> {
    let z: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    bx.translate(&z, shift).iter().map(|c| c.re).collect()
}

/// `u(x - shift)` for a box state.
pub fn translate_field(u: &Field, shift: [f64; 3]) -> Result<Field> {
    let bx = u.grid().boxed().ok_or_else(|| Error::InvalidArgument("translation needs box mode".into()))?;
    Field::new(*u.grid(), bx.translate(u.data(), shift))
}

impl ModeBasis {
    /// Radial basis from a computed linearization.
    pub fn radial(lin: &Linearization) -> Self {
        let g = lin.grid();
        ModeBasis {
            q: lin.gs.q.clone(),
            state: lin.gs.state(),
            jq: action(&g, &lin.gs.q),
            k: lin.k,
            rho: lin.rho.clone(),
            gplus: lin.gplus.clone(),
            gminus: lin.gminus.clone(),
            q_rho: lin.q_rho(),
            dq: Vec::new(),
            d2q: Vec::new(),
        }
    }

    /// Box basis: Galerkin ground state and the lowest eigenpair of the box `L+`,
    /// found by shifted inverse iteration seeded with the radial `k^2`.
    pub fn boxed(gs: &GroundState, lin: &Linearization, bx: BoxGrid, tol: f64) -> Result<Self> {
        let q = box_ground_state(gs, bx, tol)?;
        let g = Grid::Box(bx);
        let q2: Vec<f64> = q.iter().map(|v| v * v).collect();
        let shift = -lin.k2 - 0.5;
        let normalize = |x: &mut Vec<f64>| {
            let s = g.dot(x, x).sqrt();
            x.iter_mut().for_each(|v| *v /= s);
        };
        let mut x = q.clone();
        normalize(&mut x);
        let mut lam = f64::NAN;
        let mut res = f64::INFINITY;
        for _ in 0..30 {
            let mut y = pcg(&g, &q, &q2, shift, &x, &x, 1e-12, 500);
            normalize(&mut y);
            x = y;
            let ax = potential_apply(&g, &q, &q2, 0.0, &x);
            lam = g.dot(&x, &ax);
            let r: Vec<f64> = ax.iter().zip(&x).map(|(a, v)| a - lam * v).collect();
            res = g.dot(&r, &r).sqrt();
            if res <= tol.max(1e-9) {
                break;
            }
        }
        if !(lam < 0.0) || res > 1e-6 {
            return Err(Error::NonConvergence(format!("box eigenpair: lambda {lam:.6e}, residual {res:.2e}")));
        }
        if x.iter().sum::<f64>() < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        let k = (-lam).sqrt();
        let (gplus, gminus) = eigenfunctions(g, &x, k)?;
        let dq: Vec<Vec<f64>> = (0..3).map(|a| real_spectral(&bx, &q, a)).collect();
        let mut d2q = Vec::with_capacity(6);
        for a in 0..3 {
            for b in a..3 {
                d2q.push(real_spectral(&bx, &dq[a], b));
            }
        }
        Ok(ModeBasis {
            state: Field::static_state(g, &q)?,
            jq: action(&g, &q),
            k,
            q_rho: g.dot(&q, &x),
            rho: x,
            gplus,
            gminus,
            q,
            dq,
            d2q,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.state.grid()
    }

    /// `calL v = v - 3 D^{-1}(Q^2 v1)` with the grid's product.
    pub fn cal_l(&self, v: &Field) -> Field {
        let g = *self.grid();
        let v1 = v.u1();
        let f: Vec<f64> = match &g {
            Grid::Radial(_) => v1.iter().zip(&self.q).map(|(a, q)| q * q * a).collect(),
            Grid::Box(b) => b.product3(&self.q, &self.q, &v1),
        };
        let df = g.d_inv_real(&f);
        Field::new(g, v.data().iter().zip(&df).map(|(z, &d)| z - 3.0 * d).collect()).expect("finite")
    }

    /// `i D calL v`.
    pub fn idl(&self, v: &Field) -> Field {
        self.cal_l(v).apply(Multiplier::D).scale_complex(crate::field::I)
    }

    /// `(lam+, lam-, gamma)` with `lam+ = omega(v, g-)`, `lam- = -omega(v, g+)`.
    pub fn split(&self, v: &Field) -> Result<(f64, f64, Field)> {
        let lp = omega(v, &self.gminus)?;
        let lm = -omega(v, &self.gplus)?;
        let gamma = v.axpy(-lp, &self.gplus)?.axpy(-lm, &self.gminus)?;
        Ok((lp, lm, gamma))
    }

    /// `frak Q + lam+ g+ + lam- g- + gamma`.
    pub fn compose(&self, lp: f64, lm: f64, gamma: &Field) -> Result<Field> {
        self.state.axpy(lp, &self.gplus)?.axpy(lm, &self.gminus)?.add(gamma)
    }
}

/// Which formula produced `dQ`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub enum DistanceRule {
    /// `dQ^2 = E - J + 2 k lam1^2`.
    Energy,
    /// `dQ^2 = k/2 (lam+^2 + lam-^2) + <calL gamma | gamma> / 2`.
    Norm,
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub sgn: i8,
    pub c: [f64; 3],
    pub lamp: f64,
    pub lamm: f64,
    pub lam1: f64,
    pub lam2: f64,
    pub gamma: Field,
    /// Energy norm of `gamma`.
    pub gamma_norm: f64,
    pub dq: f64,
    pub rule: DistanceRule,
    pub energy: f64,
    /// Center fit converged (always true in radial mode).
    pub converged: bool,
}

impl Decomposition {
    /// `s (frak Q + lam+ g+ + lam- g- + gamma)(x - c)`.
    pub fn reconstruct(&self, basis: &ModeBasis) -> Result<Field> {
        let w = basis.compose(self.lamp, self.lamm, &self.gamma)?.scale(self.sgn as f64);
        if basis.grid().is_radial() {
            Ok(w)
        } else {
            translate_field(&w, self.c)
        }
    }
}

/// Sign with `sign 0 = +1`.
pub fn sgn0(x: f64) -> i8 {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

fn wrap(m: usize, n: usize) -> i64 {
    let m = m as i64;
    let n = n as i64;
    if m > n / 2 {
        m - n
    } else {
        m
    }
}

/// Grid shift maximizing `|<u1 | Q(. - c)>|` by FFT cross-correlation, with the sign of the peak.
pub fn correlation_seed(bx: &BoxGrid, u1: &[f64], q: &[f64]) -> ([f64; 3], i8) {
    let n = bx.n();
    let zu: Vec<Complex64> = u1.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let zq: Vec<Complex64> = q.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let a = bx.fft(&zu);
    let b = bx.fft(&zq);
    let prod: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x * y.conj()).collect();
    let corr = bx.ifft(&prod);
    let (best, val) = corr.iter().enumerate().map(|(i, z)| (i, z.re)).fold((0usize, 0.0f64), |acc, (i, v)| {
        if v.abs() > acc.1.abs() {
            (i, v)
        } else {
            acc
        }
    });
    let dx = bx.dx();
    let c = [wrap(best / (n * n), n) as f64 * dx, wrap((best / n) % n, n) as f64 * dx, wrap(best % n, n) as f64 * dx];
    (c, sgn0(val))
}

/// Newton solve of `<u1(. + c) | d_j Q> = 0` from `c0`.
fn newton_center(bx: &BoxGrid, basis: &ModeBasis, u1: &[f64], sgn: i8, c0: [f64; 3]) -> ([f64; 3], bool) {
    let g = Grid::Box(*bx);
    let mut c = c0;
    let scale = g.dot(&basis.q, &basis.q).sqrt() * g.dot(u1, u1).sqrt();
    for _ in 0..40 {
        let w = translate_real(bx, u1, [-c[0], -c[1], -c[2]]);
        let s = sgn as f64;
        let f = Vector3::from_fn(|j, _| s * g.dot(&w, &basis.dq[j]));
        let idx = |a: usize, b: usize| {
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            [0, 1, 2, 1, 3, 4, 2, 4, 5][3 * a + b]
        };
        let jac = Matrix3::from_fn(|j, l| -s * g.dot(&w, &basis.d2q[idx(j, l)]));
        let Some(step) = jac.lu().solve(&f) else {
            return (c, false);
        };
        for a in 0..3 {
            c[a] -= step[a];
        }
        if step.norm() < 1e-13 * (1.0 + c[0].abs() + c[1].abs() + c[2].abs()) || f.norm() < 1e-14 * scale {
            return (c, true);
        }
        if step.norm() > 0.25 * bx.l() {
            return (c, false);
        }
    }
    (c, false)
}

/// Full decomposition of `u` about the family described by `basis`.
pub fn decompose(u: &Field, basis: &ModeBasis, th: &Thresholds) -> Result<Decomposition> {
    if u.grid() != basis.grid() {
        return Err(Error::GridMismatch("state and mode basis live on different grids".into()));
    }
    let g = *u.grid();
    let u1 = u.u1();
    let (sgn, c, converged) = match &g {
        Grid::Radial(_) => (sgn0(g.dot(&u1, &basis.q)), [0.0; 3], true),
        Grid::Box(bx) => {
            let (c0, s) = correlation_seed(bx, &u1, &basis.q);
            let (c, ok) = newton_center(bx, basis, &u1, s, c0);
            let w = translate_real(bx, &u1, [-c[0], -c[1], -c[2]]);
            let s = sgn0(g.dot(&w, &basis.q));
            if ok {
                (s, c, true)
            } else {
                (s, c0, false)
            }
        }
    };
    let shifted = if g.is_radial() { u.clone() } else { translate_field(u, [-c[0], -c[1], -c[2]])? };
    let v = shifted.scale(sgn as f64).sub(&basis.state)?;
    let (lamp, lamm, gamma) = basis.split(&v)?;
    let lam1 = 0.5 * (lamp + lamm);
    let lam2 = 0.5 * (lamp - lamm);
    let e = energy(u);
    let lgg = inner(&basis.cal_l(&gamma), &gamma)?;
    let norm2 = 0.5 * basis.k * (lamp * lamp + lamm * lamm) + 0.5 * lgg;
    let near2 = e - basis.jq + 2.0 * basis.k * lam1 * lam1;
    // The energy formula is trusted only when the norm also places the state near the family.
    let d2 = th.delta_e * th.delta_e;
    let (dq, rule) = if converged && near2 <= d2 && norm2 <= 4.0 * d2 {
        (near2.max(0.0).sqrt(), DistanceRule::Energy)
    } else {
        (norm2.max(0.0).sqrt(), DistanceRule::Norm)
    };
    Ok(Decomposition {
        sgn,
        c,
        lamp,
        lamm,
        lam1,
        lam2,
        gamma_norm: gamma.norm(),
        gamma,
        dq,
        rule,
        energy: e,
        converged,
    })
}

/// Brute-force minimization of `||u1 - s Q(. - c)||` over a cube of `m^3` centers
/// of half-width `h` around `c0` (oracle for the Newton center).
pub fn center_grid_search(u: &Field, basis: &ModeBasis, c0: [f64; 3], h: f64, m: usize) -> Result<([f64; 3], i8)> {
    let bx = *u.grid().boxed().ok_or_else(|| Error::InvalidArgument("grid search needs box mode".into()))?;
    let g = Grid::Box(bx);
    let u1 = u.u1();
    let qq = g.dot(&basis.q, &basis.q);
    let mut best = (f64::INFINITY, c0, 1i8);
    let step = if m > 1 { 2.0 * h / (m - 1) as f64 } else { 0.0 };
    for a in 0..m {
        for b in 0..m {
            for d in 0..m {
                let c = [c0[0] - h + a as f64 * step, c0[1] - h + b as f64 * step, c0[2] - h + d as f64 * step];
                let qc = translate_real(&bx, &basis.q, c);
                let p = g.dot(&u1, &qc);
                let s = sgn0(p);
                let dist = g.dot(&u1, &u1) - 2.0 * s as f64 * p + qq;
                if dist < best.0 {
                    best = (dist, c, s);
                }
            }
        }
    }
    Ok((best.1, best.2))
}

/// Rule that produced the value of the sign functional.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub enum SignRule {
    Lambda,
    Virial,
    Both,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct SignReport {
    pub value: i8,
    pub rule: SignRule,
    pub lambda_sign: Option<i8>,
    pub k0_sign: Option<i8>,
    pub k2_sign: i8,
    /// False when both rules apply and disagree.
    pub consistent: bool,
    pub dq: f64,
}

/// Whether `E < J + min(dQ^2 / 2, epsStar^2)`.
pub fn admissible(d: &Decomposition, basis: &ModeBasis, th: &Thresholds) -> bool {
    d.energy < basis.jq + (0.5 * d.dq * d.dq).min(th.eps_star * th.eps_star)
}

/// Sign functional from an existing decomposition.
pub fn sign_from(u: &Field, d: &Decomposition, basis: &ModeBasis, th: &Thresholds) -> Result<SignReport> {
    if !admissible(d, basis, th) {
        return Err(Error::OutOfRegion(format!(
            "E - J = {:.3e} is not below min(dQ^2/2, epsStar^2) with dQ = {:.3e}",
            d.energy - basis.jq,
            d.dq
        )));
    }
    let g = u.grid();
    let u1 = u.u1();
    let lambda_sign = (d.dq <= th.delta_e).then(|| sgn0(-d.lam1));
    let k0_sign = (d.dq >= th.delta_s()).then(|| sgn0(k0(g, &u1)));
    let (value, rule, consistent) = match (lambda_sign, k0_sign) {
        (Some(a), Some(b)) => (a, SignRule::Both, a == b),
        (Some(a), None) => (a, SignRule::Lambda, true),
        (None, Some(b)) => (b, SignRule::Virial, true),
        (None, None) => return Err(Error::Inconsistent("thresholds leave a gap between the sign rules".into())),
    };
    Ok(SignReport { value, rule, lambda_sign, k0_sign, k2_sign: sgn0(k2(g, &u1)), consistent, dq: d.dq })
}

pub fn sign_functional(u: &Field, basis: &ModeBasis, th: &Thresholds) -> Result<SignReport> {
    let d = decompose(u, basis, th)?;
    sign_from(u, &d, basis, th)
}

/// Result of the traveling-wave modulation fit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PqFit {
    pub params: BoostParams,
    pub residual: f64,
    pub iterations: usize,
    /// `omega(d_a frak Q, d_b frak Q)` in the order `(q1, q2, q3, p1, p2, p3)`.
    pub pairing: [[f64; 6]; 6],
    pub condition: f64,
    pub converged: bool,
}

/// `d frak Q / d pi_a` for `pi = (q, p)`: spectral in `q`, central differences in `p`.
fn tangents(gs: &GroundState, bp: &BoostParams, bx: BoxGrid, base: &Field) -> Result<Vec<Field>> {
    let mut out = Vec::with_capacity(6);
    for a in 0..3 {
        let d = bx.derivative(base.data(), a);
        out.push(Field::new(Grid::Box(bx), d.iter().map(|z| -z).collect())?);
    }
    let h = 1e-5;
    for a in 0..3 {
        let mut pp = bp.p;
        let mut pm = bp.p;
        pp[a] += h;
        pm[a] -= h;
        let fp = traveling_wave(gs, &BoostParams { p: pp, q: bp.q }, bx)?;
        let fm = traveling_wave(gs, &BoostParams { p: pm, q: bp.q }, bx)?;
        out.push(fp.sub(&fm)?.scale(0.5 / h));
    }
    Ok(out)
}

fn pairing_matrix(t: &[Field]) -> Result<[[f64; 6]; 6]> {
    let mut m = [[0.0; 6]; 6];
    for a in 0..6 {
        for b in 0..6 {
            m[a][b] = omega(&t[a], &t[b])?;
        }
    }
    Ok(m)
}

fn condition_number(m: &[[f64; 6]; 6]) -> f64 {
    let a = nalgebra::DMatrix::from_fn(6, 6, |i, j| m[i][j]);
    let s = a.singular_values();
    let max = s.iter().cloned().fold(0.0, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Pairing matrix `omega(d_a frak Q, d_b frak Q)` of the traveling-wave family at `bp`,
/// with its condition number.
pub fn pairing_at(gs: &GroundState, bp: &BoostParams, bx: BoxGrid) -> Result<([[f64; 6]; 6], f64)> {
    let base = traveling_wave(gs, bp, bx)?;
    let m = pairing_matrix(&tangents(gs, bp, bx, &base)?)?;
    Ok((m, condition_number(&m)))
}

/// Newton solve of `omega(u - frak Q(p, q), d_pi frak Q(p, q)) = 0` over the six
/// traveling-wave parameters, started from `p = P(u) / J`, `q` = quartic centroid.
pub fn fit_pq(u: &Field, gs: &GroundState, tol: f64) -> Result<PqFit> {
    let bx = *u.grid().boxed().ok_or_else(|| Error::InvalidArgument("fit_pq needs box mode".into()))?;
    let jq = gs.jq;
    let pm = momentum(u);
    let mut bp = BoostParams { p: [pm[0] / jq, pm[1] / jq, pm[2] / jq], q: quartic_centroid(u)? };
    let mut residual = f64::INFINITY;
    let mut pairing = [[0.0; 6]; 6];
    let mut converged = false;
    let mut its = 0;
    while its < 30 {
        its += 1;
        let base = traveling_wave(gs, &bp, bx)?;
        let t = tangents(gs, &bp, bx, &base)?;
        pairing = pairing_matrix(&t)?;
        let v = u.sub(&base)?;
        let f: Vec<f64> = t.iter().map(|ta| omega(&v, ta)).collect::<Result<_>>()?;
        residual = f.iter().map(|x| x * x).sum::<f64>().sqrt();
        if residual <= tol {
            converged = true;
            break;
        }
        // dF_a / dpi_b = -omega(d_b Q, d_a Q) to leading order in v.
        let jac = nalgebra::DMatrix::from_fn(6, 6, |a, b| -pairing[b][a]);
        let rhs = nalgebra::DVector::from_iterator(6, f.iter().cloned());
        let Some(step) = jac.lu().solve(&rhs) else {
            break;
        };
        for a in 0..3 {
            bp.q[a] -= step[a];
            bp.p[a] -= step[3 + a];
        }
        if step.norm() > 1.0 {
            break;
        }
    }
    let condition = condition_number(&pairing);
    Ok(PqFit {
        params: bp,
        residual,
        iterations: its,
        pairing,
        condition,
        converged: converged && condition.is_finite(),
    })
}
