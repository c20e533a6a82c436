//! Dense operators on restricted radial grids.
//!
//! All matrices act on `psi = r u` node values, where the sine transform is an
//! orthogonal symmetric matrix and every Fourier multiplier is `S diag S`.
//! Grid quadrature for `u` becomes the Euclidean product times `4 pi dr`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Linearization;
use crate::error::{Error, Result};
use crate::field::{Complex64, RadialGrid};
use crate::ground_state::GroundState;

type CMat = DMatrix<Complex64>;
type CVec = DVector<Complex64>;

const CI: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Orthonormal DST-I matrix.
pub fn dst_matrix(n: usize) -> DMatrix<f64> {
    let s = (2.0 / (n as f64 + 1.0)).sqrt();
    let h = std::f64::consts::PI / (n as f64 + 1.0);
    DMatrix::from_fn(n, n, |i, j| s * (h * ((i + 1) * (j + 1)) as f64).sin())
}

/// Dense Schrodinger-type operator `-Delta + 1 + V` on a radial grid.
#[derive(Clone, Debug)]
pub struct DenseRadial {
    pub grid: RadialGrid,
    pub potential: Vec<f64>,
    s: DMatrix<f64>,
}

impl DenseRadial {
    pub fn new(grid: RadialGrid, potential: Vec<f64>) -> Result<Self> {
        if potential.len() != grid.n() {
            return Err(Error::GridMismatch("potential length".into()));
        }
        Ok(DenseRadial { grid, potential, s: dst_matrix(grid.n()) })
    }

    /// `L+` potential `-3 Q^2` from a ground state resampled onto `grid`.
    pub fn lplus(gs: &GroundState, grid: RadialGrid) -> Result<(Self, Vec<f64>)> {
        let q = restricted_q(gs, grid)?;
        let v = q.iter().map(|x| -3.0 * x * x).collect();
        Ok((DenseRadial::new(grid, v)?, q))
    }

    /// Matrix of the multiplier with symbol `f(xi^2)`.
    pub fn multiplier(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let n = self.grid.n();
        let d = DVector::from_fn(n, |k, _| f(self.grid.xi(k).powi(2)));
        let sd = DMatrix::from_fn(n, n, |i, j| self.s[(i, j)] * d[j]);
        &sd * &self.s
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let mut m = self.multiplier(|x2| 1.0 + x2);
        for i in 0..self.grid.n() {
            m[(i, i)] += self.potential[i];
        }
        m
    }

    /// Eigenvalues ascending with matching eigenvector columns (psi-node basis).
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let se = SymmetricEigen::new(self.matrix());
        let mut idx: Vec<usize> = (0..self.grid.n()).collect();
        idx.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
        let vals = idx.iter().map(|&i| se.eigenvalues[i]).collect();
        let vecs = DMatrix::from_fn(self.grid.n(), self.grid.n(), |r, c| se.eigenvectors[(r, idx[c])]);
        (vals, vecs)
    }

    pub fn node_weight(&self) -> f64 {
        self.grid.weight()
    }
}

fn restricted_q(gs: &GroundState, grid: RadialGrid) -> Result<Vec<f64>> {
    if grid == gs.grid {
        return Ok(gs.q.clone());
    }
    Ok(gs.resample(grid, 1e-9)?.q)
}

/// Eigenvalues of `-Delta + 1 + V` below `below` on `grid`.
pub fn discrete_spectrum(grid: RadialGrid, potential: Vec<f64>, below: f64) -> Result<Vec<f64>> {
    let (vals, _) = DenseRadial::new(grid, potential)?.eigen();
    Ok(vals.into_iter().filter(|&v| v < below).collect())
}

/// Lowest eigenvalue of `-psi'' + (1 + V) psi` by fourth-order finite differences,
/// with odd reflection of `psi` at both ends.
pub fn lowest_eigenvalue_fd(potential: &dyn Fn(f64) -> f64, r_max: f64, n: usize) -> f64 {
    let h = r_max / (n as f64 + 1.0);
    let c = 1.0 / (12.0 * h * h);
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let r = (i as f64 + 1.0) * h;
        m[(i, i)] = 30.0 * c + 1.0 + potential(r);
        if i + 1 < n {
            m[(i, i + 1)] = -16.0 * c;
            m[(i + 1, i)] = -16.0 * c;
        }
        if i + 2 < n {
            m[(i, i + 2)] = c;
            m[(i + 2, i)] = c;
        }
    }
    // psi_{-1} = -psi_1 and psi_{n+2} = -psi_n.
    m[(0, 0)] -= c;
    m[(n - 1, n - 1)] -= c;
    SymmetricEigen::new(m).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Threshold resonance indicator from domain doubling.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ResonanceReport {
    /// Radii `R, 2R, 4R` at equal spacing.
    pub radii: [f64; 3],
    pub interior_radius: f64,
    /// Interior norms of the threshold solution on each radius.
    pub norms: [f64; 3],
    /// `|n3 - n2| / |n2 - n1|`: about 1/2 without a resonance (interior solution converges
    /// like `1/R`) and about 2 with one (interior solution grows like `R`).
    pub increment_ratio: f64,
    pub max_ratio: f64,
    pub pass: bool,
}

/// Solves `(-Delta + V) phi = e^{-r}`, i.e. `(L - 1) phi` at the threshold, on radii `R, 2R, 4R`
/// with equal spacing and compares the interior norms.
pub fn resonance_test(potential: &dyn Fn(f64) -> f64, r1: f64, n1: usize, max_ratio: f64) -> Result<ResonanceReport> {
    let interior = (0.25 * r1).min(10.0);
    let solve = |r: f64, n: usize| -> Result<f64> {
        let grid = RadialGrid::new(r, n)?;
        let v: Vec<f64> = (0..n).map(|m| potential(grid.node(m))).collect();
        let d = DenseRadial::new(grid, v)?;
        let mut m = d.matrix();
        for i in 0..n {
            m[(i, i)] -= 1.0;
        }
        let f = DVector::from_fn(n, |i, _| {
            let r = grid.node(i);
            r * (-r).exp()
        });
        let psi = m.lu().solve(&f).ok_or_else(|| Error::NonConvergence("threshold solve singular".into()))?;
        let s: f64 = (0..n).filter(|&i| grid.node(i) <= interior).map(|i| psi[i] * psi[i]).sum();
        Ok((s * grid.weight()).sqrt())
    };
    let radii = [r1, 2.0 * r1, 4.0 * r1];
    let sizes = [n1, 2 * n1 + 1, 4 * n1 + 3];
    let mut norms = [0.0; 3];
    for i in 0..3 {
        norms[i] = solve(radii[i], sizes[i])?;
    }
    let increment_ratio = (norms[2] - norms[1]).abs() / (norms[1] - norms[0]).abs().max(1e-300);
    Ok(ResonanceReport {
        radii,
        interior_radius: interior,
        norms,
        increment_ratio,
        max_ratio,
        pass: increment_ratio.is_finite() && increment_ratio < max_ratio,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GapOptions {
    pub r_dense: f64,
    pub n_dense: usize,
    pub margin: f64,
    pub fd_r: f64,
    pub fd_n: usize,
    pub resonance_r: f64,
    pub resonance_n: usize,
    pub resonance_max_ratio: f64,
    pub k2_rel_tol: f64,
}

impl Default for GapOptions {
    fn default() -> Self {
        GapOptions {
            r_dense: 30.0,
            n_dense: 511,
            margin: 0.05,
            fd_r: 24.0,
            fd_n: 799,
            resonance_r: 30.0,
            resonance_n: 511,
            resonance_max_ratio: 1.0,
            k2_rel_tol: 1e-4,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GapReport {
    /// Eigenvalues of `L+` below `1 + margin` on the dense grid.
    pub eigenvalues_below: Vec<f64>,
    pub threshold: f64,
    pub negative_count: usize,
    pub count_in_0_1: usize,
    pub k2_main: f64,
    pub k2_dense: f64,
    pub k2_fd: f64,
    pub k2_rel_diff: f64,
    pub resonance: ResonanceReport,
    pub options: GapOptions,
    pub pass: bool,
}

/// Certifies the spectral gap of `L+` in the radial sector.
pub fn verify_gap(lin: &Linearization, opts: &GapOptions) -> Result<GapReport> {
    let grid = RadialGrid::new(opts.r_dense, opts.n_dense)?;
    let (d, _) = DenseRadial::lplus(&lin.gs, grid)?;
    let (vals, _) = d.eigen();
    let threshold = 1.0 + opts.margin;
    let below: Vec<f64> = vals.iter().cloned().filter(|&v| v < threshold).collect();
    let negative_count = below.iter().filter(|&&v| v < 0.0).count();
    let count_in_0_1 = below.iter().filter(|&&v| v > 0.0 && v <= 1.0).count();
    let sp = lin.gs.spline();
    let pot = |r: f64| -3.0 * sp.eval(r).powi(2);
    let k2_fd = -lowest_eigenvalue_fd(&pot, opts.fd_r, opts.fd_n);
    let k2_dense = -vals[0];
    let k2_rel_diff = (lin.k2 - k2_fd).abs() / lin.k2;
    let resonance = resonance_test(&pot, opts.resonance_r, opts.resonance_n, opts.resonance_max_ratio)?;
    let pass = negative_count == 1 && count_in_0_1 == 0 && resonance.pass && k2_rel_diff <= opts.k2_rel_tol;
    Ok(GapReport {
        eigenvalues_below: below,
        threshold,
        negative_count,
        count_in_0_1,
        k2_main: lin.k2,
        k2_dense,
        k2_fd,
        k2_rel_diff,
        resonance,
        options: opts.clone(),
        pass,
    })
}

/// Coercivity constant of `<calL gamma | gamma>` on the symplectic complement:
/// `min(1, min spec of D^{-1} L+ D^{-1} restricted to (D^{-1} rho)^perp)`.
pub fn coercivity(gs: &GroundState, grid: RadialGrid) -> Result<f64> {
    let (d, _) = DenseRadial::lplus(gs, grid)?;
    let (vals, vecs) = d.eigen();
    if vals[0] >= 0.0 {
        return Err(Error::Inconsistent("L+ has no negative eigenvalue".into()));
    }
    let rho = vecs.column(0).into_owned();
    let dinv = d.multiplier(|x2| 1.0 / (1.0 + x2).sqrt());
    let mut v = &dinv * &rho;
    v /= v.norm();
    let a = &dinv * d.matrix() * &dinv;
    let n = grid.n();
    let p = DMatrix::<f64>::identity(n, n) - &v * v.transpose();
    let b = &p * a * &p + (&v * v.transpose()) * 1e3;
    let m = SymmetricEigen::new(b).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(m.min(1.0))
}

/// Matrix operator on `C^2`-valued radial functions in the `psi`-node basis.
#[derive(Clone, Debug)]
pub struct MatrixOperator {
    pub grid: RadialGrid,
    pub k: f64,
    /// `rho` in the `psi`-node basis, unit norm in `L^2`.
    pub rho: DVector<f64>,
    pub q: Vec<f64>,
    /// `2n x 2n` operator.
    pub mat: CMat,
    pub gplus: CVec,
    pub gminus: CVec,
    /// Continuous-spectrum projection `1 - P+ - P-`.
    pub pc: CMat,
    d: DMatrix<f64>,
    dinv: DMatrix<f64>,
}

fn to_c(m: &DMatrix<f64>) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

impl MatrixOperator {
    pub fn dim(&self) -> usize {
        2 * self.grid.n()
    }

    /// `<u, v> = (1/2) integral sum_j u_j conj(v_j)`.
    pub fn inner(&self, u: &CVec, v: &CVec) -> Complex64 {
        let s: Complex64 = u.iter().zip(v.iter()).map(|(a, b)| a * b.conj()).sum();
        s * (0.5 * self.grid.weight())
    }

    pub fn norm(&self, u: &CVec) -> f64 {
        self.inner(u, u).re.sqrt()
    }

    fn sigma3_dinv(&self, u: &CVec) -> CVec {
        let n = self.grid.n();
        let dc = to_c(&self.dinv);
        let a = &dc * u.rows(0, n);
        let b = &dc * u.rows(n, n);
        let mut out = CVec::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&a);
        out.rows_mut(n, n).copy_from(&(-b));
        out
    }

    /// `Omega(u, v) = i <sigma3 D^{-1} u, v>`, which restricts to `omega` on pairs `(phi, conj phi)`.
    pub fn omega(&self, u: &CVec, v: &CVec) -> Complex64 {
        CI * self.inner(&self.sigma3_dinv(u), v)
    }

    /// Embeds a scalar field (`psi`-node values) as `(phi, conj phi)`.
    pub fn embed(&self, phi: &CVec) -> CVec {
        let n = self.grid.n();
        let mut out = CVec::zeros(2 * n);
        out.rows_mut(0, n).copy_from(phi);
        out.rows_mut(n, n).copy_from(&phi.map(|z| z.conj()));
        out
    }

    /// `(||i M g+ - k g+||, ||i M g- + k g-||)`.
    pub fn eigen_residuals(&self) -> (f64, f64) {
        let rp = (&self.mat * &self.gplus) * CI - &self.gplus * Complex64::new(self.k, 0.0);
        let rm = (&self.mat * &self.gminus) * CI + &self.gminus * Complex64::new(self.k, 0.0);
        (self.norm(&rp), self.norm(&rm))
    }

    /// Max-entry errors of `P_c^2 - P_c` and `P_c P_d`.
    pub fn projection_errors(&self) -> (f64, f64) {
        let n2 = self.dim();
        let pd = CMat::identity(n2, n2) - &self.pc;
        let e1 = (&self.pc * &self.pc - &self.pc).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let e2 = (&self.pc * &pd).iter().map(|z| z.norm()).fold(0.0, f64::max);
        (e1, e2)
    }

    /// `(u+, u-) = (D^{-1}(u1 + u2), u1 - u2)`.
    pub fn to_pm(&self, u: &CVec) -> (CVec, CVec) {
        let n = self.grid.n();
        let a = u.rows(0, n).into_owned();
        let b = u.rows(n, n).into_owned();
        (to_c(&self.dinv) * (&a + &b), a - b)
    }

    /// Inverse of [`MatrixOperator::to_pm`].
    pub fn from_pm(&self, up: &CVec, um: &CVec) -> CVec {
        let n = self.grid.n();
        let dp = to_c(&self.d) * up;
        let mut out = CVec::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&((&dp + um) * Complex64::new(0.5, 0.0)));
        out.rows_mut(n, n).copy_from(&((&dp - um) * Complex64::new(0.5, 0.0)));
        out
    }
}

/// Assembles the matrix operator, its eigenvectors `(g+-, conj g+-)` and the projections on `grid`.
pub fn assemble_matrix_l(gs: &GroundState, grid: RadialGrid) -> Result<MatrixOperator> {
    let (dr, q) = DenseRadial::lplus(gs, grid)?;
    let (vals, vecs) = dr.eigen();
    if vals[0] >= 0.0 {
        return Err(Error::Inconsistent("L+ has no negative eigenvalue".into()));
    }
    let k = (-vals[0]).sqrt();
    let n = grid.n();
    let w = grid.weight();
    let mut rho = vecs.column(0).into_owned();
    if rho.sum() < 0.0 {
        rho = -rho;
    }
    rho /= (rho.norm_squared() * w).sqrt();
    let d = dr.multiplier(|x2| (1.0 + x2).sqrt());
    let dinv = dr.multiplier(|x2| 1.0 / (1.0 + x2).sqrt());
    let q2 = DMatrix::from_diagonal(&DVector::from_iterator(n, q.iter().map(|x| 1.5 * x * x)));
    let qd = to_c(&(&q2 * &dinv));
    let dc = to_c(&d);
    let mut mat = CMat::zeros(2 * n, 2 * n);
    mat.view_mut((0, 0), (n, n)).copy_from(&(&dc - &qd));
    mat.view_mut((0, n), (n, n)).copy_from(&(-&qd));
    mat.view_mut((n, 0), (n, n)).copy_from(&qd);
    mat.view_mut((n, n), (n, n)).copy_from(&(&qd - &dc));
    let a = (2.0 * k).powf(-0.5);
    let b = (0.5 * k).sqrt();
    let drho = &d * &rho;
    let gp_s = CVec::from_fn(n, |i, _| Complex64::new(a * drho[i], -b * rho[i]));
    let gm_s = CVec::from_fn(n, |i, _| Complex64::new(a * drho[i], b * rho[i]));
    let mut op = MatrixOperator {
        grid,
        k,
        rho,
        q,
        mat,
        gplus: CVec::zeros(2 * n),
        gminus: CVec::zeros(2 * n),
        pc: CMat::identity(2 * n, 2 * n),
        d,
        dinv,
    };
    op.gplus = op.embed(&gp_s);
    op.gminus = op.embed(&gm_s);
    // P+ u = Omega(u, g-) g+ and P- u = -Omega(u, g+) g-, with Omega(u, v) = row(v) . u.
    let row = |v: &CVec| -> CVec {
        let s = op.sigma3_dinv(v);
        s.map(|z| CI * z.conj() * (0.5 * w))
    };
    let rm = row(&op.gminus);
    let rp = row(&op.gplus);
    let pd = &op.gplus * rm.transpose() - &op.gminus * rp.transpose();
    op.pc = CMat::identity(2 * n, 2 * n) - pd;
    Ok(op)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ResolventOptions {
    pub r: f64,
    pub n: usize,
    /// Weight exponent: `<x>^{-sigma}` on both sides.
    pub sigma: f64,
    /// Absorbing-layer strength; zero disables it.
    pub cap_eta: f64,
    /// Absorbing layer starts at `cap_start * R`.
    pub cap_start: f64,
    pub project: bool,
    pub power_iters: usize,
    pub seed: u64,
}

impl Default for ResolventOptions {
    fn default() -> Self {
        ResolventOptions {
            r: 40.0,
            n: 383,
            sigma: 1.0,
            cap_eta: 1.0,
            cap_start: 0.5,
            project: true,
            power_iters: 200,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ResolventSample {
    pub z_re: f64,
    pub z_im: f64,
    /// Operator norm estimate of `<x>^{-s} (M - z)^{-1} [P_c] <x>^{-s}`.
    pub norm: Option<f64>,
    /// Distance from `z` to the spectrum of the matrix operator on the whole space.
    pub dist: f64,
    pub projected: bool,
    pub error: Option<String>,
}

/// Distance from `z` to `(-inf, -1] u [1, inf) u {+-ik}` (`{+-ik}` only when `discrete`).
pub fn spectrum_distance(z: Complex64, k: f64, discrete: bool) -> f64 {
    let cont = if z.re.abs() >= 1.0 { z.im.abs() } else { ((z.re.abs() - 1.0).powi(2) + z.im.powi(2)).sqrt() };
    if discrete {
        let a = (z - Complex64::new(0.0, k)).norm();
        let b = (z + Complex64::new(0.0, k)).norm();
        cont.min(a).min(b)
    } else {
        cont
    }
}

/// Weighted resolvent norms at the requested points.
pub fn resolvent_probe(gs: &GroundState, zs: &[Complex64], opts: &ResolventOptions) -> Result<Vec<ResolventSample>> {
    let grid = RadialGrid::new(opts.r, opts.n)?;
    let op = assemble_matrix_l(gs, grid)?;
    let n = grid.n();
    let r0 = opts.cap_start * opts.r;
    let cap: Vec<f64> = (0..n)
        .map(|i| {
            let r = grid.node(i);
            if r > r0 {
                ((r - r0) / (opts.r - r0)).powi(2)
            } else {
                0.0
            }
        })
        .collect();
    let weight: Vec<f64> = (0..2 * n).map(|i| (1.0 + grid.node(i % n).powi(2)).powf(-0.5 * opts.sigma)).collect();
    let mut base = op.mat.clone();
    for i in 0..2 * n {
        base[(i, i)] -= CI * (opts.cap_eta * cap[i % n]);
    }
    let out = zs
        .par_iter()
        .map(|&z| {
            let dist = spectrum_distance(z, op.k, !opts.project);
            let mut sample =
                ResolventSample { z_re: z.re, z_im: z.im, norm: None, dist, projected: opts.project, error: None };
            let mut m = base.clone();
            for i in 0..2 * n {
                m[(i, i)] -= z;
            }
            let mh = m.adjoint();
            let lu = m.lu();
            let luh = mh.lu();
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut x =
                CVec::from_fn(2 * n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            x /= Complex64::new(x.norm(), 0.0);
            let mut est = 0.0;
            let pch = op.pc.adjoint();
            for it in 0..opts.power_iters {
                let wx = x.component_mul(&CVec::from_fn(2 * n, |i, _| Complex64::new(weight[i], 0.0)));
                let px = if opts.project { &op.pc * wx } else { wx };
                let Some(y) = lu.solve(&px) else {
                    sample.error = Some("singular system".into());
                    return sample;
                };
                let wy = y.component_mul(&CVec::from_fn(2 * n, |i, _| Complex64::new(weight[i] * weight[i], 0.0)));
                let Some(y2) = luh.solve(&wy) else {
                    sample.error = Some("singular adjoint system".into());
                    return sample;
                };
                let z2 = if opts.project { &pch * y2 } else { y2 };
                let ax = z2.component_mul(&CVec::from_fn(2 * n, |i, _| Complex64::new(weight[i], 0.0)));
                let nrm = ax.norm();
                let new_est = nrm.sqrt();
                x = ax / Complex64::new(nrm, 0.0);
                if it > 5 && (new_est - est).abs() <= 1e-9 * new_est {
                    est = new_est;
                    break;
                }
                est = new_est;
            }
            if est.is_finite() {
                sample.norm = Some(est);
            } else {
                sample.error = Some("non-finite estimate".into());
            }
            sample
        })
        .collect();
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EvolutionProbe {
    pub r: f64,
    pub n: usize,
    pub t_max: f64,
    pub samples_t: usize,
    pub sigma: f64,
    /// Parameters of the translation-perturbation analysis, recorded only.
    pub recorded_sigma: f64,
    pub recorded_nu: f64,
    /// `integral_0^T ||<x>^{-sigma} e^{iMt} P_c phi||^2 dt / ||phi||^2` per random `phi`.
    pub ratios: Vec<f64>,
}

/// Time-integrated weighted norm of the projected evolution for random localized data.
pub fn weighted_evolution_probe(
    gs: &GroundState,
    grid: RadialGrid,
    t_max: f64,
    samples_t: usize,
    count: usize,
    seed: u64,
) -> Result<EvolutionProbe> {
    let sigma = 1.0;
    let op = assemble_matrix_l(gs, grid)?;
    let (dr, _) = DenseRadial::lplus(gs, grid)?;
    let (vals, vecs) = dr.eigen();
    let n = grid.n();
    let w = grid.weight();
    let s: Vec<f64> = vals.iter().map(|&l| if l > 0.0 { l.sqrt() } else { 0.0 }).collect();
    let ed = &op.d * &vecs;
    let wt: Vec<f64> = (0..n).map(|i| (1.0 + grid.node(i).powi(2)).powf(-sigma)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = Vec::with_capacity(count);
    let ts: Vec<f64> = (0..samples_t).map(|i| t_max * i as f64 / (samples_t - 1) as f64).collect();
    for _ in 0..count {
        // Random sum of Gaussian shells for both components.
        let mut u = CVec::zeros(2 * n);
        for _ in 0..4 {
            let c: f64 = rng.random::<f64>() * 6.0;
            let width: f64 = 0.5 + rng.random::<f64>() * 1.5;
            let a = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            let b = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            for i in 0..n {
                let r = grid.node(i);
                let g = (-((r - c) / width).powi(2)).exp() * r;
                u[i] += a * g;
                u[n + i] += b * g;
            }
        }
        let norm0 = op.norm(&u);
        let pu = &op.pc * &u;
        let (up, um) = op.to_pm(&pu);
        let vt = to_c(&vecs.transpose());
        let ap = &vt * up;
        let am = &vt * um;
        let mut values = Vec::with_capacity(ts.len());
        let ec = to_c(&vecs);
        let edc = to_c(&ed);
        for &t in &ts {
            let mut cp = CVec::zeros(n);
            let mut cm = CVec::zeros(n);
            for m in 1..n {
                let (sn, cs) = (s[m] * t).sin_cos();
                cp[m] = ap[m] * cs + CI * am[m] * (sn / s[m]);
                cm[m] = CI * ap[m] * (s[m] * sn) + am[m] * cs;
            }
            let dp = &edc * &cp;
            let mv = &ec * &cm;
            let mut acc = 0.0;
            for i in 0..n {
                let u1 = (dp[i] + mv[i]) * 0.5;
                let u2 = (dp[i] - mv[i]) * 0.5;
                acc += wt[i] * (u1.norm_sqr() + u2.norm_sqr());
            }
            values.push(0.5 * w * acc);
        }
        let integral = crate::numerics::trapezoid(&ts, &values);
        ratios.push(integral / (norm0 * norm0));
    }
    Ok(EvolutionProbe { r: grid.r_max(), n, t_max, samples_t, sigma, recorded_sigma: 15.0, recorded_nu: 0.1, ratios })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::compute_ground_state;

    fn gs() -> GroundState {
        compute_ground_state(RadialGrid::new(30.0, 255).unwrap(), 1e-9).unwrap()
    }

    #[test]
    fn dst_matrix_is_orthogonal() {
        let s = dst_matrix(64);
        let e = (&s * &s - DMatrix::<f64>::identity(64, 64)).abs().max();
        assert!(e < 1e-13);
    }

    #[test]
    fn free_operator_has_no_eigenvalue_below_one() {
        let g = RadialGrid::new(30.0, 255).unwrap();
        assert!(discrete_spectrum(g, vec![0.0; 255], 1.0).unwrap().is_empty());
    }

    #[test]
    fn free_operator_has_no_threshold_resonance() {
        let r = resonance_test(&|_| 0.0, 20.0, 255, 1.0).unwrap();
        assert!(r.pass, "{r:?}");
        assert!((r.increment_ratio - 0.5).abs() < 0.1, "{r:?}");
    }

    #[test]
    fn fd_eigenvalue_of_free_box_matches_closed_form() {
        let l = lowest_eigenvalue_fd(&|_| 0.0, 10.0, 399);
        let exact = 1.0 + (std::f64::consts::PI / 10.0).powi(2);
        assert!((l - exact).abs() < 1e-8, "{l} {exact}");
    }

    #[test]
    fn matrix_operator_eigenpairs_and_projections() {
        let g = gs();
        let op = assemble_matrix_l(&g, g.grid).unwrap();
        let (rp, rm) = op.eigen_residuals();
        assert!(rp < 1e-8 && rm < 1e-8, "{rp} {rm}");
        let w = op.omega(&op.gplus, &op.gminus);
        assert!((w - Complex64::new(1.0, 0.0)).norm() < 1e-10, "{w}");
        let (e1, e2) = op.projection_errors();
        assert!(e1 < 1e-10 && e2 < 1e-10, "{e1} {e2}");
        assert!(op.omega(&op.gplus, &op.gplus).norm() < 1e-12);
    }

    #[test]
    fn pm_variables_round_trip_and_split_the_operator() {
        let g = gs();
        let op = assemble_matrix_l(&g, g.grid).unwrap();
        let n = g.grid.n();
        let u = CVec::from_fn(2 * n, |i, _| {
            let r = g.grid.node(i % n);
            Complex64::new((-r * r / 8.0).exp() * r, 0.3 * (-r).exp() * r * (i / n) as f64)
        });
        let (up, um) = op.to_pm(&u);
        let back = op.from_pm(&up, &um);
        assert!((&back - &u).norm() < 1e-10 * u.norm());
        let lu = &op.mat * &u;
        let (lp, lm) = op.to_pm(&lu);
        assert!((&lp - &um).norm() < 1e-9 * u.norm());
        let (d, _) = DenseRadial::lplus(&g, g.grid).unwrap();
        let lup = to_c(&d.matrix()) * &up;
        assert!((&lm - &lup).norm() < 1e-9 * lup.norm());
    }
}
