//! Ground state `Q` of `-Delta Q + Q = Q^3`: positive, radial, decaying.
//!
//! The profile is found by shooting on `Q(0)` with a bisection between
//! "crosses zero" and "turns upward", patched with the linear tail
//! `A e^{-r}/r` beyond the radius where double precision loses the orbit,
//! projected onto the sine grid and relaxed there so that it solves the
//! discrete equation used by every other module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{BoxGrid, Complex64, Field, Grid, RadialGrid};
use crate::numerics::CubicSpline;

/// Outcome of one shooting trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shot {
    /// `Q` became negative at the given radius: `Q(0)` too large.
    CrossesZero(f64),
    /// `Q'` became positive at the given radius: `Q(0)` too small.
    TurnsUpward(f64),
    /// Neither event before the end radius.
    Reached,
}

fn rhs(r: f64, q: f64, p: f64) -> (f64, f64) {
    (p, q - q * q * q - 2.0 * p / r)
}

fn rk4(r: f64, q: f64, p: f64, h: f64) -> (f64, f64) {
    let (k1q, k1p) = rhs(r, q, p);
    let (k2q, k2p) = rhs(r + 0.5 * h, q + 0.5 * h * k1q, p + 0.5 * h * k1p);
    let (k3q, k3p) = rhs(r + 0.5 * h, q + 0.5 * h * k2q, p + 0.5 * h * k2p);
    let (k4q, k4p) = rhs(r + h, q + h * k3q, p + h * k3p);
    (q + h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q), p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p))
}

/// Series start at small `r`: `Q = Q0 + a2 r^2 + a4 r^4` with
/// `a2 = (Q0 - Q0^3)/6` (so `Q''(0) = (Q0 - Q0^3)/3`) and `a4 = (1 - 3 Q0^2) a2 / 20`.
pub fn series_start(q0: f64, r: f64) -> (f64, f64) {
    let a2 = (q0 - q0 * q0 * q0) / 6.0;
    let a4 = (1.0 - 3.0 * q0 * q0) * a2 / 20.0;
    (q0 + a2 * r * r + a4 * r.powi(4), 2.0 * a2 * r + 4.0 * a4 * r.powi(3))
}

/// Integrates outward from `r0` with step `h` until an event or `r_end`.
/// Returns the event and the sampled trajectory `(r, Q, Q')` at every step.
pub fn shoot(q0: f64, r0: f64, h: f64, r_end: f64) -> (Shot, Vec<(f64, f64, f64)>) {
    let (mut q, mut p) = series_start(q0, r0);
    let mut r = r0;
    let mut path = vec![(r, q, p)];
    while r < r_end {
        let (nq, np) = rk4(r, q, p, h);
        r += h;
        q = nq;
        p = np;
        path.push((r, q, p));
        if q < 0.0 {
            return (Shot::CrossesZero(r), path);
        }
        if p > 0.0 {
            return (Shot::TurnsUpward(r), path);
        }
    }
    (Shot::Reached, path)
}

/// Bisected shooting profile.
#[derive(Clone, Debug)]
pub struct ShootingProfile {
    pub q0: f64,
    /// Radius up to which the shooting orbit is trusted.
    pub r_valid: f64,
    /// Coefficient of the fitted tail `A e^{-r}/r`.
    pub tail_amplitude: f64,
    pub path: Vec<(f64, f64, f64)>,
    pub bisection_steps: usize,
}

impl ShootingProfile {
    /// Profile value at radius `r` (shooting orbit, then the fitted tail).
    pub fn value(&self, r: f64, h: f64, r0: f64) -> f64 {
        if r <= r0 {
            return series_start(self.q0, r.max(0.0)).0;
        }
        if r >= self.r_valid {
            return self.tail_amplitude * (-r).exp() / r;
        }
        let x = (r - r0) / h;
        let i = (x.floor() as usize).min(self.path.len() - 2);
        let t = x - i as f64;
        // Cubic Hermite interpolation between RK nodes.
        let (_, q_a, p_a) = self.path[i];
        let (_, q_b, p_b) = self.path[i + 1];
        let h00 = 2.0 * t * t * t - 3.0 * t * t + 1.0;
        let h10 = t * t * t - 2.0 * t * t + t;
        let h01 = -2.0 * t * t * t + 3.0 * t * t;
        let h11 = t * t * t - t * t;
        h00 * q_a + h10 * h * p_a + h01 * q_b + h11 * h * p_b
    }
}

/// Brackets and bisects `Q(0)` in `[lo, hi]`.
pub fn shooting_profile(lo: f64, hi: f64, h: f64, r_end: f64) -> Result<ShootingProfile> {
    let r0 = h;
    let (slo, _) = shoot(lo, r0, h, r_end);
    let (shi, _) = shoot(hi, r0, h, r_end);
    if !matches!(slo, Shot::TurnsUpward(_)) || !matches!(shi, Shot::CrossesZero(_)) {
        return Err(Error::Bracketing { msg: format!("endpoint classification {slo:?} / {shi:?}"), lo, hi });
    }
    let (mut a, mut b) = (lo, hi);
    let mut steps = 0;
    let mut last_event = 0.0f64;
    while b - a > 4.0 * f64::EPSILON * b && steps < 200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        steps += 1;
        match shoot(m, r0, h, r_end).0 {
            Shot::CrossesZero(r) => {
                b = m;
                last_event = last_event.max(r);
            }
            Shot::TurnsUpward(r) => {
                a = m;
                last_event = last_event.max(r);
            }
            Shot::Reached => {
                a = m;
                b = m;
                last_event = r_end;
            }
        }
    }
    let q0 = 0.5 * (a + b);
    let (ev, path) = shoot(q0, r0, h, r_end);
    let r_event = match ev {
        Shot::CrossesZero(r) | Shot::TurnsUpward(r) => r,
        Shot::Reached => r_end,
    };
    // The orbit separates from the true profile a few decay lengths before the event.
    let r_valid = (r_event.min(last_event.max(r_event)) - 4.0).max(2.0);
    let idx = ((r_valid - r0) / h).floor() as usize;
    let idx = idx.min(path.len() - 1);
    let (rv, qv, _) = path[idx];
    let tail_amplitude = qv * rv * rv.exp();
    Ok(ShootingProfile { q0, r_valid: rv, tail_amplitude, path, bisection_steps: steps })
}

/// Ground state on a radial grid with its integral invariants.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub grid: RadialGrid,
    /// Samples `Q(r_m)`.
    pub q: Vec<f64>,
    /// Sine coefficients of `r Q`.
    pub coeffs: Vec<f64>,
    pub q0: f64,
    /// `integral |grad Q|^2`
    pub a: f64,
    /// `integral Q^2`
    pub b: f64,
    /// `integral Q^4`
    pub c4: f64,
    /// `J(Q) = (a + b)/2 - c4/4`
    pub jq: f64,
    /// Discrete residual `||(1 - Delta)Q - Q^3||_2`.
    pub residual: f64,
    /// Central value from the bisected shooting orbit.
    pub shooting_q0: f64,
    /// Radius up to which the shooting orbit was used.
    pub shooting_r_valid: f64,
    pub relax_iterations: usize,
}

/// JSON summary of a ground state.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GroundStateSummary {
    #[serde(rename = "R")]
    pub r_max: f64,
    pub n: usize,
    #[serde(rename = "Q0")]
    pub q0: f64,
    pub a: f64,
    pub b: f64,
    pub c4: f64,
    #[serde(rename = "JQ")]
    pub jq: f64,
    pub residual: f64,
    pub shooting_q0: f64,
    pub shooting_r_valid: f64,
    pub relax_iterations: usize,
}

impl GroundState {
    pub fn grid_ref(&self) -> Grid {
        Grid::Radial(self.grid)
    }

    /// `Q` as a real field (not a state).
    pub fn q_field(&self) -> Field {
        Field::from_real(self.grid_ref(), &self.q).expect("finite profile")
    }

    /// The static state `frak Q = D Q` (that is, `(w, w_t) = (Q, 0)`).
    pub fn state(&self) -> Field {
        Field::static_state(self.grid_ref(), &self.q).expect("finite profile")
    }

    pub fn summary(&self) -> GroundStateSummary {
        GroundStateSummary {
            r_max: self.grid.r_max(),
            n: self.grid.n(),
            q0: self.q0,
            a: self.a,
            b: self.b,
            c4: self.c4,
            jq: self.jq,
            residual: self.residual,
            shooting_q0: self.shooting_q0,
            shooting_r_valid: self.shooting_r_valid,
            relax_iterations: self.relax_iterations,
        }
    }

    /// Clamped cubic spline of the radial profile on `[0, R]`.
    pub fn spline(&self) -> CubicSpline {
        let mut x = Vec::with_capacity(self.grid.n() + 2);
        let mut y = Vec::with_capacity(self.grid.n() + 2);
        x.push(0.0);
        y.push(self.q0);
        for (m, &v) in self.q.iter().enumerate() {
            x.push(self.grid.node(m));
            y.push(v);
        }
        x.push(self.grid.r_max());
        y.push(0.0);
        CubicSpline::clamped(x, y, 0.0, 0.0).expect("valid knots")
    }

    /// Recomputes the ground state on another grid by sine-coefficient resampling and relaxation.
    pub fn resample(&self, grid: RadialGrid, tol: f64) -> Result<GroundState> {
        let seed: Vec<f64> = if (grid.r_max() - self.grid.r_max()).abs() < 1e-12 {
            let mut c = vec![0.0; grid.n()];
            let m = grid.n().min(self.grid.n());
            // Same-R orthonormal coefficients scale with sqrt((n+1)/(n'+1)) for equal psi.
            let s = ((grid.n() as f64 + 1.0) / (self.grid.n() as f64 + 1.0)).sqrt();
            c[..m].copy_from_slice(&self.coeffs[..m]);
            let psi_c: Vec<f64> = c.iter().map(|v| v * s).collect();
            grid.samples_real(&psi_c)
        } else {
            let sp = self.spline();
            (0..grid.n()).map(|m| sp.eval(grid.node(m))).collect()
        };
        relax(grid, seed, tol, self.shooting_q0, self.shooting_r_valid)
    }
}

/// Discrete residual `(1 - Delta) Q - Q^3` of a sampled profile.
pub fn residual_samples(grid: &RadialGrid, q: &[f64]) -> Vec<f64> {
    let g = Grid::Radial(*grid);
    let lq = g.helmholtz_real(q);
    lq.iter().zip(q).map(|(a, &v)| a - v * v * v).collect()
}

fn l2(grid: &RadialGrid, f: &[f64]) -> f64 {
    Grid::Radial(*grid).dot(f, f).sqrt()
}

/// Petviashvili iteration `Q <- M^{3/2} (1 - Delta)^{-1} Q^3`,
/// `M = <Q, (1 - Delta) Q> / <Q, Q^3>`, which is stable where the plain fixed point is not.
fn relax(grid: RadialGrid, seed: Vec<f64>, tol: f64, shooting_q0: f64, r_valid: f64) -> Result<GroundState> {
    let n = grid.n();
    let w = grid.weight();
    let xi2: Vec<f64> = (0..n).map(|k| grid.xi(k).powi(2)).collect();
    let mut q = seed;
    let mut best = f64::INFINITY;
    let mut stall = 0;
    let mut it = 0;
    let mut res = l2(&grid, &residual_samples(&grid, &q));
    while it < 2000 {
        if res <= tol * 0.25 {
            break;
        }
        it += 1;
        let c = grid.coeffs_real(&q);
        let cube: Vec<f64> = q.iter().map(|v| v * v * v).collect();
        let nc = grid.coeffs_real(&cube);
        let num: f64 = c.iter().zip(&xi2).map(|(c, x)| c * c * (1.0 + x)).sum();
        let den: f64 = c.iter().zip(&nc).map(|(a, b)| a * b).sum();
        if den <= 0.0 {
            return Err(Error::NonConvergence("relaxation lost positivity".into()));
        }
        let m = (num / den).powf(1.5);
        let next: Vec<f64> = nc.iter().zip(&xi2).map(|(v, x)| m * v / (1.0 + x)).collect();
        q = grid.samples_real(&next);
        res = l2(&grid, &residual_samples(&grid, &q));
        if res < best * 0.999 {
            best = res;
            stall = 0;
        } else {
            stall += 1;
            if stall > 40 {
                break;
            }
        }
    }
    if res > tol {
        return Err(Error::NonConvergence(format!(
            "ground-state residual {res:.3e} above tolerance {tol:.1e} after {it} iterations"
        )));
    }
    let coeffs = grid.coeffs_real(&q);
    let q0 = grid.value_at_origin(&coeffs);
    let a = w * coeffs.iter().zip(&xi2).map(|(c, x)| c * c * x).sum::<f64>();
    let b = w * coeffs.iter().map(|c| c * c).sum::<f64>();
    let g = Grid::Radial(grid);
    let c4 = g.integrate(&q.iter().map(|v| v.powi(4)).collect::<Vec<_>>());
    let jq = 0.5 * (a + b) - 0.25 * c4;
    if let Some(m) = q.iter().position(|&v| v <= 0.0) {
        // Beyond r ~ 20 the profile is below the residual floor; only the core is checked.
        if grid.node(m) < (0.5 * grid.r_max()).min(20.0) {
            return Err(Error::Inconsistent(format!("ground state not positive at r = {}", grid.node(m))));
        }
    }
    Ok(GroundState {
        grid,
        q,
        coeffs,
        q0,
        a,
        b,
        c4,
        jq,
        residual: res,
        shooting_q0,
        shooting_r_valid: r_valid,
        relax_iterations: it,
    })
}

/// Computes the ground state on `grid` to discrete residual `tol`.
pub fn compute_ground_state(grid: RadialGrid, tol: f64) -> Result<GroundState> {
    if !(tol > 1e-14 && tol < 1e-4) {
        return Err(Error::InvalidArgument(format!("tolerance {tol:e} outside (1e-14, 1e-4)")));
    }
    if grid.r_max() < 12.0 {
        return Err(Error::Bracketing {
            msg: format!("radius {} too small to contain the ground state", grid.r_max()),
            lo: 1.5,
            hi: 8.0,
        });
    }
    let h = (grid.dr() / 4.0).min(2.5e-3);
    let prof = shooting_profile(1.5, 8.0, h, 0.8 * grid.r_max())?;
    let seed: Vec<f64> = (0..grid.n()).map(|m| prof.value(grid.node(m), h, h)).collect();
    relax(grid, seed, tol, prof.q0, prof.r_valid)
}

/// Relaxes stored samples (for example a reloaded snapshot) to a ground state on `grid`.
/// No shooting orbit is involved; the first node value stands in for the shooting data.
/// Samples already at the rounding floor are accepted within twice their own residual.
pub fn ground_state_from_samples(grid: RadialGrid, q: &[f64], tol: f64) -> Result<GroundState> {
    if q.len() != grid.n() {
        return Err(Error::InvalidArgument(format!("{} samples for a grid of {} nodes", q.len(), grid.n())));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("profile samples must be finite".into()));
    }
    let r0 = l2(&grid, &residual_samples(&grid, q));
    relax(grid, q.to_vec(), tol.max(2.0 * r0), q[0], grid.r_max())
}

/// Ground state of the dealiased periodic box discretization `(1 - Delta) Q = Pi(Q^3)`,
/// seeded by the spline of the radial profile.
pub fn box_ground_state(gs: &GroundState, bx: BoxGrid, tol: f64) -> Result<Vec<f64>> {
    let sp = gs.spline();
    let seed: Vec<f64> = (0..bx.len())
        .map(|i| {
            let p = bx.point(i);
            sp.eval((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt())
        })
        .collect();
    let symbol: Vec<f64> = bx.xi2().iter().map(|x| 1.0 + x).collect();
    box_relax(bx, seed, &symbol, tol)
}

/// Petviashvili relaxation of `A Q = Pi(Q^3)` in the box, `A` a positive Fourier symbol.
pub fn box_relax(bx: BoxGrid, seed: Vec<f64>, symbol: &[f64], tol: f64) -> Result<Vec<f64>> {
    let g = Grid::Box(bx);
    let mut q = seed;
    let to_c = |v: &[f64]| -> Vec<Complex64> { v.iter().map(|&x| Complex64::new(x, 0.0)).collect() };
    let mut res = f64::INFINITY;
    for _ in 0..500 {
        let a = bx.fft(&to_c(&q));
        let b = bx.fft(&to_c(&bx.product3(&q, &q, &q)));
        let num: f64 = a.iter().zip(symbol).map(|(z, s)| z.norm_sqr() * s).sum();
        let den: f64 = a.iter().zip(&b).map(|(x, y)| (x * y.conj()).re).sum();
        let m = (num / den).powf(1.5);
        let next: Vec<Complex64> = b.iter().zip(symbol).map(|(z, s)| z * (m / s)).collect();
        q = bx.ifft(&next).iter().map(|z| z.re).collect();
        let aq: Vec<f64> = bx
            .ifft(&bx.fft(&to_c(&q)).iter().zip(symbol).map(|(z, s)| z * s).collect::<Vec<_>>())
            .iter()
            .map(|z| z.re)
            .collect();
        let nl = bx.product3(&q, &q, &q);
        let r: Vec<f64> = aq.iter().zip(&nl).map(|(a, v)| a - v).collect();
        res = g.dot(&r, &r).sqrt();
        if res < tol {
            return Ok(q);
        }
    }
    Err(Error::NonConvergence(format!("box ground state residual {res:.3e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_start_satisfies_the_ode_near_the_origin() {
        let q0 = 4.3;
        for r in [1e-3, 5e-3, 1e-2] {
            let h = 1e-5;
            let (q, p) = series_start(q0, r);
            let (_, pp) = series_start(q0, r + h);
            let (_, pm) = series_start(q0, r - h);
            let qpp = (pp - pm) / (2.0 * h);
            // Truncation of the series leaves an O(r^4) residual.
            let res = qpp + 2.0 * p / r - (q - q * q * q);
            assert!(res.abs() < 1e5 * r.powi(4) + 1e-5, "r = {r}: {res}");
        }
    }

    #[test]
    fn shooting_classifies_the_bracket() {
        assert!(matches!(shoot(3.0, 1e-3, 1e-2, 30.0).0, Shot::TurnsUpward(_)));
        assert!(matches!(shoot(6.0, 1e-3, 1e-2, 30.0).0, Shot::CrossesZero(_)));
    }

    #[test]
    fn small_ground_state_satisfies_identities() {
        let gs = compute_ground_state(RadialGrid::new(30.0, 511).unwrap(), 1e-9).unwrap();
        assert!((gs.a / gs.b - 3.0).abs() < 1e-6);
        assert!((gs.c4 / gs.b - 4.0).abs() < 1e-6);
        assert!((gs.jq / gs.b - 1.0).abs() < 1e-6);
        assert!(gs.q.windows(2).take(300).all(|w| w[1] < w[0]));
    }

    #[test]
    fn bad_domain_reports_the_bracket() {
        let e = compute_ground_state(RadialGrid::new(5.0, 128).unwrap(), 1e-8).unwrap_err();
        assert!(matches!(e, Error::Bracketing { .. }));
    }

    #[test]
    fn tolerance_range_is_checked() {
        assert!(compute_ground_state(RadialGrid::new(30.0, 128).unwrap(), 1e-3).is_err());
    }
}
