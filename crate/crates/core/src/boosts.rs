//! Lorentz boosts of statics: traveling waves, the `(E, P)` transformation law and the
//! momentum-normalizing boost.

use serde::{Deserialize, Serialize};

use crate::decomposition::{translate_field, ModeBasis};
use crate::error::{Error, Result};
use crate::field::{omega, BoxGrid, Complex64, Field, Grid};
use crate::functionals::gradient;
use crate::ground_state::{box_relax, GroundState};

/// Relativistic momentum `p` and center `q` of a traveling wave.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct BoostParams {
    pub p: [f64; 3],
    pub q: [f64; 3],
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl BoostParams {
    pub fn new(p: [f64; 3], q: [f64; 3]) -> Result<Self> {
        if p.iter().chain(&q).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("boost parameters must be finite".into()));
        }
        Ok(BoostParams { p, q })
    }

    pub fn at_rest() -> Self {
        BoostParams { p: [0.0; 3], q: [0.0; 3] }
    }

    /// `<p> = sqrt(1 + |p|^2)`.
    pub fn bracket(&self) -> f64 {
        (1.0 + dot3(self.p, self.p)).sqrt()
    }

    /// Velocity `tau = p / <p>`.
    pub fn tau(&self) -> [f64; 3] {
        let b = self.bracket();
        [self.p[0] / b, self.p[1] / b, self.p[2] / b]
    }

    /// Direction `theta = p / |p|`; `None` at rest.
    pub fn theta(&self) -> Option<[f64; 3]> {
        let s = norm3(self.p);
        (s > 0.0).then(|| [self.p[0] / s, self.p[1] / s, self.p[2] / s])
    }

    /// Rapidity `nu` with `sinh nu = |p|`.
    pub fn rapidity(&self) -> f64 {
        norm3(self.p).asinh()
    }

    /// Contracted coordinate `y + theta (<p> - 1) theta.y`, `y = x - q`.
    pub fn contract(&self, x: [f64; 3]) -> [f64; 3] {
        let y = [x[0] - self.q[0], x[1] - self.q[1], x[2] - self.q[2]];
        match self.theta() {
            None => y,
            Some(th) => {
                let s = (self.bracket() - 1.0) * dot3(th, y);
                [y[0] + s * th[0], y[1] + s * th[1], y[2] + s * th[2]]
            }
        }
    }
}

fn sample_profile(gs: &GroundState, bp: &BoostParams, bx: BoxGrid) -> Vec<f64> {
    let sp = gs.spline();
    let r_max = gs.grid.r_max();
    (0..bx.len())
        .map(|i| {
            let r = norm3(bp.contract(bx.point(i)));
            if r < r_max {
                sp.eval(r)
            } else {
                0.0
            }
        })
        .collect()
}

/// `Q(p, q)` sampled on the box by spline interpolation of the radial profile.
pub fn contracted_profile(gs: &GroundState, bp: &BoostParams, bx: BoxGrid) -> Result<Vec<f64>> {
    let q = sample_profile(gs, bp, bx);
    let n = bx.n();
    let mut edge: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if i == 0 || j == 0 || k == 0 {
                    edge = edge.max(q[bx.index(i, j, k)].abs());
                }
            }
        }
    }
    if edge > 1e-6 {
        return Err(Error::DomainTooSmall(format!("profile is {edge:.2e} at the box boundary")));
    }
    Ok(q)
}

/// `(D + i tau.grad) phi` for a real profile `phi`.
pub fn vector_state(bx: BoxGrid, phi: &[f64], tau: [f64; 3]) -> Result<Field> {
    let g = Grid::Box(bx);
    let grad = gradient(&g, phi);
    let u2: Vec<f64> =
        (0..phi.len()).map(|i| tau[0] * grad[0][i] + tau[1] * grad[1][i] + tau[2] * grad[2][i]).collect();
    let d = g.d_real(phi);
    Field::new(g, d.iter().zip(&u2).map(|(&a, &b)| Complex64::new(a, b)).collect())
}

/// Traveling wave `VQ(p, q) = (D + i tau.grad) Q(p, q)` from the interpolated contracted profile.
pub fn traveling_wave(gs: &GroundState, bp: &BoostParams, bx: BoxGrid) -> Result<Field> {
    if norm3(bp.p) > 0.5 {
        return Err(Error::InvalidArgument(format!("|p| = {} exceeds the small-boost regime 0.5", norm3(bp.p))));
    }
    let q = contracted_profile(gs, bp, bx)?;
    vector_state(bx, &q, bp.tau())
}

/// Symbol `1 + |xi|^2 - (tau.xi)^2` of the traveling-wave profile operator.
fn profile_symbol(bx: BoxGrid, tau: [f64; 3]) -> Vec<f64> {
    let n = bx.n();
    let mut s = vec![0.0; bx.len()];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let xi = [bx.freq(i), bx.freq(j), bx.freq(k)];
                s[bx.index(i, j, k)] = 1.0 + dot3(xi, xi) - dot3(tau, xi).powi(2);
            }
        }
    }
    s
}

/// Exact traveling wave of the Galerkin box system: solves
/// `(1 - Delta + (tau.grad)^2) Q_p = Pi(Q_p^3)`, then translates to `q`.
pub fn box_traveling_wave(gs: &GroundState, bp: &BoostParams, bx: BoxGrid, tol: f64) -> Result<Field> {
    let centered = BoostParams { p: bp.p, q: [0.0; 3] };
    // The periodic Galerkin problem only uses the interpolant as a seed.
    let seed = sample_profile(gs, &centered, bx);
    let tau = bp.tau();
    let mut q = box_relax(bx, seed, &profile_symbol(bx, tau), tol)?;
    if bp.q != [0.0; 3] {
        let z: Vec<Complex64> = q.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        q = bx.translate(&z, bp.q).iter().map(|z| z.re).collect();
    }
    vector_state(bx, &q, tau)
}

/// Box norm of `i D u + tau.grad u - i u1^3` with pointwise cubes.
pub fn profile_residual(u: &Field, tau: [f64; 3]) -> Result<f64> {
    let bx = *u.grid().boxed().ok_or_else(|| Error::InvalidArgument("profile residual needs box mode".into()))?;
    let du = u.apply(crate::field::Multiplier::D);
    let u1 = u.u1();
    let mut r: Vec<Complex64> =
        du.data().iter().zip(&u1).map(|(z, &a)| Complex64::new(0.0, 1.0) * (z - a * a * a)).collect();
    for (axis, &t) in tau.iter().enumerate() {
        if t != 0.0 {
            for (x, d) in r.iter_mut().zip(bx.derivative(u.data(), axis)) {
                *x += d * t;
            }
        }
    }
    Ok(Field::new(Grid::Box(bx), r)?.norm())
}

/// Hyperbolic rotation of `(E, P.theta)` by rapidity `nu`; `theta` is normalized here.
pub fn transform_ep(e: f64, p: [f64; 3], nu: f64, theta: [f64; 3]) -> Result<(f64, [f64; 3])> {
    let t = norm3(theta);
    if !(t > 0.0) {
        return Err(Error::InvalidArgument("boost direction must be nonzero".into()));
    }
    let th = [theta[0] / t, theta[1] / t, theta[2] / t];
    let pt = dot3(p, th);
    let (sh, ch) = (nu.sinh(), nu.cosh());
    let e2 = e * ch + pt * sh;
    let pt2 = e * sh + pt * ch;
    let d = pt2 - pt;
    Ok((e2, [p[0] + d * th[0], p[1] + d * th[1], p[2] + d * th[2]]))
}

/// Outcome of the momentum normalization.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub enum Normalization {
    /// `transform_ep(E, P, nu, theta)` has zero momentum and energy `e_rest`.
    Boost { nu: f64, theta: [f64; 3], e_rest: f64, params: BoostParams },
    /// `|E| = |P|`: no frame with zero momentum.
    Lightlike { e: f64, p_abs: f64 },
    /// `|E| < |P|`: some frame has negative energy, which forces blowup in both time directions.
    Spacelike { e: f64, p_abs: f64 },
}

/// The unique boost that brings `P` to zero when `|E| > |P|`.
pub fn normalize_momentum(e: f64, p: [f64; 3]) -> Normalization {
    let pa = norm3(p);
    if pa == 0.0 {
        return Normalization::Boost { nu: 0.0, theta: [1.0, 0.0, 0.0], e_rest: e, params: BoostParams::at_rest() };
    }
    let gap = e.abs() - pa;
    if gap.abs() <= 1e-12 * e.abs().max(pa) {
        return Normalization::Lightlike { e, p_abs: pa };
    }
    if gap < 0.0 {
        return Normalization::Spacelike { e, p_abs: pa };
    }
    // Boost against the energy-weighted momentum direction.
    let dir = if e > 0.0 { -1.0 } else { 1.0 };
    let theta = [dir * p[0] / pa, dir * p[1] / pa, dir * p[2] / pa];
    let nu = (pa / e.abs()).atanh();
    let e_rest = e.signum() * (e * e - pa * pa).sqrt();
    let s = nu.sinh();
    Normalization::Boost {
        nu,
        theta,
        e_rest,
        params: BoostParams { p: [s * theta[0], s * theta[1], s * theta[2]], q: [0.0; 3] },
    }
}

/// Centroid of `u1^4`, a translation-covariant center estimate for a localized wave.
pub fn quartic_centroid(u: &Field) -> Result<[f64; 3]> {
    let bx = *u.grid().boxed().ok_or_else(|| Error::InvalidArgument("centroid needs box mode".into()))?;
    let u1 = u.u1();
    let mut c = [0.0; 3];
    let mut m = 0.0;
    for (i, v) in u1.iter().enumerate() {
        let w = v.powi(4);
        let x = bx.point(i);
        for a in 0..3 {
            c[a] += w * x[a];
        }
        m += w;
    }
    if !(m > 0.0) {
        return Err(Error::Inconsistent("state has no mass for a centroid".into()));
    }
    Ok([c[0] / m, c[1] / m, c[2] / m])
}

/// Controlled box run of a traveling wave.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct VelocityOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Interval between centroid readings and unstable-mode removals.
    pub control_every: f64,
    /// Remove the `lambda_+` component at each control time.
    pub suppress: bool,
}

impl Default for VelocityOptions {
    fn default() -> Self {
        VelocityOptions { dt: 1e-2, t_end: 10.0, control_every: 0.25, suppress: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct VelocityReport {
    pub expected: [f64; 3],
    pub measured: [f64; 3],
    /// Euclidean distance between measured and expected velocity.
    pub error: f64,
    /// `(t, centroid)` at each control time, unwrapped across the periodic box.
    pub track: Vec<(f64, [f64; 3])>,
    /// Largest `|lambda_+|` removed.
    pub max_removed: f64,
    pub completed: bool,
}

/// Evolves the discrete traveling wave `u0` with velocity `tau` and fits the centroid path.
/// `basis` supplies the rest-frame unstable pair on the same box.
pub fn velocity_law(u0: &Field, tau: [f64; 3], basis: &ModeBasis, opts: &VelocityOptions) -> Result<VelocityReport> {
    use crate::evolution::{evolve, EvolveOptions, Monitors, Status};
    use std::sync::Mutex;
    let bx = *u0.grid().boxed().ok_or_else(|| Error::InvalidArgument("velocity law needs box mode".into()))?;
    if basis.grid() != u0.grid() {
        return Err(Error::GridMismatch("mode basis and traveling wave differ".into()));
    }
    let c0 = quartic_centroid(u0)?;
    let profile = translate_field(u0, [-c0[0], -c0[1], -c0[2]])?;
    let l = bx.l();
    let log: Mutex<(Vec<(f64, [f64; 3])>, f64, [f64; 3])> = Mutex::new((vec![(0.0, c0)], 0.0, c0));
    let hook = |t: f64, u: &Field| -> Result<Option<Field>> {
        let raw = quartic_centroid(u)?;
        let mut g = log.lock().map_err(|_| Error::Inconsistent("poisoned control log".into()))?;
        // Unwrap against the previous reading.
        let prev = g.2;
        let mut c = raw;
        for a in 0..3 {
            c[a] += l * ((prev[a] - raw[a]) / l).round();
        }
        g.2 = c;
        g.0.push((t, c));
        if !opts.suppress {
            return Ok(None);
        }
        let v = u.sub(&translate_field(&profile, c)?)?;
        let gm = translate_field(&basis.gminus, c)?;
        let lp = omega(&v, &gm)?;
        g.1 = f64::max(g.1, lp.abs());
        Ok(Some(u.axpy(-lp, &translate_field(&basis.gplus, c)?)?))
    };
    let eo = EvolveOptions {
        dt: opts.dt,
        t_end: opts.t_end,
        dt_sample: opts.control_every,
        snapshot_every: None,
        ..EvolveOptions::default()
    };
    let tr = evolve(u0, &eo, &Monitors { hook: Some(&hook), ..Monitors::default() })?;
    let (track, max_removed, _) = log.into_inner().map_err(|_| Error::Inconsistent("poisoned control log".into()))?;
    let t: Vec<f64> = track.iter().map(|p| p.0).collect();
    let mut measured = [0.0; 3];
    for (a, m) in measured.iter_mut().enumerate() {
        let x: Vec<f64> = track.iter().map(|p| p.1[a]).collect();
        *m = crate::numerics::linear_fit(&t, &x).map(|f| f.1).unwrap_or(f64::NAN);
    }
    let d = [measured[0] - tau[0], measured[1] - tau[1], measured[2] - tau[2]];
    Ok(VelocityReport {
        expected: tau,
        measured,
        error: norm3(d),
        track,
        max_removed,
        completed: tr.status == Status::Completed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_boost_leaves_ep_fixed() {
        let (e, p) = transform_ep(1.3, [0.2, -0.1, 0.4], 0.0, [0.0, 0.0, 1.0]).unwrap();
        assert_eq!(e, 1.3);
        assert_eq!(p, [0.2, -0.1, 0.4]);
    }

    #[test]
    fn normalization_of_the_reference_pair() {
        match normalize_momentum(2.0, [1.0, 0.0, 0.0]) {
            Normalization::Boost { nu, theta, e_rest, .. } => {
                assert!((nu.tanh() - 0.5).abs() < 1e-15);
                assert!((e_rest - 3f64.sqrt()).abs() < 1e-15);
                let (e2, p2) = transform_ep(2.0, [1.0, 0.0, 0.0], nu, theta).unwrap();
                assert!((e2 - 3f64.sqrt()).abs() < 1e-14);
                assert!(norm3(p2) < 1e-14);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(normalize_momentum(1.0, [1.0, 0.0, 0.0]), Normalization::Lightlike { .. }));
        assert!(matches!(normalize_momentum(0.5, [0.0, 1.0, 0.0]), Normalization::Spacelike { .. }));
        match normalize_momentum(3.0, [0.0; 3]) {
            Normalization::Boost { nu, .. } => assert_eq!(nu, 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn contraction_scales_along_the_boost() {
        let bp = BoostParams::new([0.3, 0.0, 0.0], [1.0, 0.0, 0.0]).unwrap();
        let y = bp.contract([2.0, 1.0, -1.0]);
        assert!((y[0] - bp.bracket()).abs() < 1e-15);
        assert_eq!((y[1], y[2]), (1.0, -1.0));
    }
}
