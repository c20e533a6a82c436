//! Strang splitting for `u_t = i D u - i u1^3` with exact substeps.
//!
//! The linear substep multiplies transform coefficients by `exp(i h D)`; the nonlinear
//! substep `u <- u - i h f(u1)` only changes `Im u` and so leaves `u1 = D^{-1} Re u` fixed.
//! The state is kept in coefficient space between samples and the two linear half
//! steps of consecutive Strang steps are fused.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decomposition::{decompose, sign_from, Decomposition, DistanceRule, ModeBasis, Thresholds};
use crate::error::{Error, Result};
use crate::field::{BoxGrid, Complex64, Field, Grid, RadialGrid};
use crate::functionals::{evaluate, FunctionalSet};

/// Early termination used by classification runs.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct StopRule {
    /// Stop here if no ejection has been seen.
    pub horizon: f64,
    /// Run this long past the first ejection, then stop.
    pub t_confirm: f64,
    /// Ejection distance.
    pub delta_x: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EvolveOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Rounded to a whole number of steps.
    pub dt_sample: f64,
    pub snapshot_every: Option<f64>,
    /// Blowup when `||u|| > n_blow (1 + ||u0||)`.
    pub n_blow: f64,
    /// Evolve `v = u - frak Q` with `f = (Q + v1)^3 - Q^3`, so that `frak Q` is an exact fixed point.
    pub centered: bool,
    /// Step with `-dt`.
    pub backward: bool,
    pub stop: Option<StopRule>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            dt: 1e-3,
            t_end: 10.0,
            dt_sample: 0.01,
            snapshot_every: Some(1.0),
            n_blow: 100.0,
            centered: false,
            backward: false,
            stop: None,
        }
    }
}

/// Sample-time modification of the state (used by controlled runs).
pub type Hook<'a> = &'a (dyn Fn(f64, &Field) -> Result<Option<Field>> + Sync);

/// What to compute at each sample.
#[derive(Clone, Copy, Default)]
pub struct Monitors<'a> {
    pub basis: Option<&'a ModeBasis>,
    pub th: Thresholds,
    pub sign: bool,
    pub hook: Option<Hook<'a>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DecompositionRow {
    pub sgn: i8,
    pub c: [f64; 3],
    pub lamp: f64,
    pub lamm: f64,
    pub lam1: f64,
    pub lam2: f64,
    pub gamma_norm: f64,
    pub dq: f64,
    pub rule: DistanceRule,
    pub converged: bool,
}

impl From<&Decomposition> for DecompositionRow {
    fn from(d: &Decomposition) -> Self {
        DecompositionRow {
            sgn: d.sgn,
            c: d.c,
            lamp: d.lamp,
            lamm: d.lamm,
            lam1: d.lam1,
            lam2: d.lam2,
            gamma_norm: d.gamma_norm,
            dq: d.dq,
            rule: d.rule,
            converged: d.converged,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub f: FunctionalSet,
    pub dec: Option<DecompositionRow>,
    /// Sign functional where the state is admissible.
    pub sign: Option<i8>,
    pub sign_consistent: Option<bool>,
}

impl Sample {
    /// `integral u1^4`.
    pub fn quartic(&self) -> f64 {
        self.f.h1_norm * self.f.h1_norm - self.f.k0
    }

    pub fn dq(&self) -> Option<f64> {
        self.dec.as_ref().map(|d| d.dq)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "status")]
pub enum Status {
    Completed,
    Blowup { t_star: f64 },
    Aborted { t_last: f64 },
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub snapshots: Vec<(f64, Field)>,
    pub status: Status,
    pub final_state: Field,
    pub t_final: f64,
    pub dt: f64,
    /// First sample time with `dQ > deltaX` when a stop rule is active.
    pub ejection_time: Option<f64>,
    pub steps: usize,
    pub blowup_norm: f64,
}

/// Windowed space-time norm `(integral_window integral u1^4)^{1/4}`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct L4Window {
    pub t0: f64,
    pub t1: f64,
    pub value: f64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// L4 norms over consecutive windows of length `w` on `[from, t_final]`.
    pub fn l4_windows(&self, from: f64, w: f64) -> Vec<L4Window> {
        let mut out = Vec::new();
        let mut t0 = from;
        while t0 + w <= self.t_final + 1e-9 {
            let t1 = t0 + w;
            let pts: Vec<&Sample> = self.samples.iter().filter(|s| s.t >= t0 - 1e-12 && s.t <= t1 + 1e-12).collect();
            if pts.len() >= 2 {
                let t: Vec<f64> = pts.iter().map(|s| s.t).collect();
                let f: Vec<f64> = pts.iter().map(|s| s.quartic().max(0.0)).collect();
                out.push(L4Window { t0, t1, value: crate::numerics::trapezoid(&t, &f).powf(0.25) });
            }
            t0 = t1;
        }
        out
    }

    /// Series CSV with columns `t,E,P,Em,K0,K2,dQ,lam_plus,lam_minus,gamma_norm,sign`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "E", "P", "Em", "K0", "K2", "dQ", "lam_plus", "lam_minus", "gamma_norm", "sign"])?;
        for s in &self.samples {
            let p = (s.f.p[0] * s.f.p[0] + s.f.p[1] * s.f.p[1] + s.f.p[2] * s.f.p[2]).sqrt();
            let opt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
            let d = s.dec.as_ref();
            w.write_record([
                format!("{:.6}", s.t),
                format!("{:.12e}", s.f.e),
                format!("{p:.12e}"),
                format!("{:.12e}", s.f.em),
                format!("{:.12e}", s.f.k0),
                format!("{:.12e}", s.f.k2),
                opt(d.map(|d| d.dq)),
                opt(d.map(|d| d.lamp)),
                opt(d.map(|d| d.lamm)),
                opt(d.map(|d| d.gamma_norm)),
                s.sign.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// State in transform space with the splitting substeps.
enum Spectral {
    Radial { g: RadialGrid, c: Vec<Complex64>, omega: Vec<f64>, q: Option<Vec<f64>> },
    Box { b: BoxGrid, a: Vec<Complex64>, omega: Vec<f64>, q_hat: Option<(Vec<Complex64>, Vec<Complex64>)> },
}

/// Index of `-xi` in FFT order.
fn neg_index(b: &BoxGrid, idx: usize) -> usize {
    let n = b.n();
    let (i, j, k) = (idx / (n * n), (idx / n) % n, idx % n);
    b.index((n - i) % n, (n - j) % n, (n - k) % n)
}

impl Spectral {
    fn new(u: &Field, center: Option<&[f64]>) -> Self {
        match *u.grid() {
            Grid::Radial(g) => {
                let omega = (0..g.n()).map(|k| (1.0 + g.xi(k).powi(2)).sqrt()).collect();
                Spectral::Radial { g, c: g.coeffs(u.data()), omega, q: center.map(|q| q.to_vec()) }
            }
            Grid::Box(b) => {
                let omega = b.xi2().iter().map(|x| (1.0 + x).sqrt()).collect();
                let q_hat = center.map(|q| {
                    let qh = b.fft(&q.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>());
                    let mut masked = qh;
                    b.mask_modes(&mut masked);
                    let cube = b.cube_spectral(&masked);
                    (masked, cube)
                });
                Spectral::Box { b, a: b.fft(u.data()), omega, q_hat }
            }
        }
    }

    fn linear(&mut self, h: f64) {
        let (z, omega) = match self {
            Spectral::Radial { c, omega, .. } => (c, omega),
            Spectral::Box { a, omega, .. } => (a, omega),
        };
        for (z, w) in z.iter_mut().zip(omega.iter()) {
            *z *= Complex64::from_polar(1.0, w * h);
        }
    }

    fn nonlinear(&mut self, h: f64) {
        match self {
            Spectral::Radial { g, c, omega, q } => {
                let r: Vec<f64> = c.iter().zip(omega.iter()).map(|(z, w)| z.re / w).collect();
                let u1 = g.samples_real(&r);
                let f: Vec<f64> = match q {
                    None => u1.iter().map(|x| x * x * x).collect(),
                    Some(q) => u1.iter().zip(q.iter()).map(|(v, q)| v * (3.0 * q * q + v * (3.0 * q + v))).collect(),
                };
                let fc = g.coeffs_real(&f);
                for (z, f) in c.iter_mut().zip(&fc) {
                    z.im -= h * f;
                }
            }
            Spectral::Box { b, a, omega, q_hat } => {
                let mut u1: Vec<Complex64> =
                    (0..a.len()).map(|i| 0.5 * (a[i] + a[neg_index(b, i)].conj()) / omega[i]).collect();
                let f = match q_hat {
                    None => b.cube_spectral(&u1),
                    Some((qh, q3)) => {
                        for (z, q) in u1.iter_mut().zip(qh.iter()) {
                            *z += q;
                        }
                        let mut f = b.cube_spectral(&u1);
                        for (z, q) in f.iter_mut().zip(q3.iter()) {
                            *z -= q;
                        }
                        f
                    }
                };
                for (z, f) in a.iter_mut().zip(&f) {
                    *z -= Complex64::new(0.0, h) * f;
                }
            }
        }
    }

    fn norm(&self) -> f64 {
        match self {
            Spectral::Radial { g, c, .. } => (g.weight() * c.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt(),
            Spectral::Box { b, a, .. } => {
                (b.cell_volume() / b.len() as f64 * a.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
            }
        }
    }

    fn physical(&self) -> Result<Field> {
        match self {
            Spectral::Radial { g, c, .. } => Field::new(Grid::Radial(*g), g.samples(c)),
            Spectral::Box { b, a, .. } => Field::new(Grid::Box(*b), b.ifft(a)),
        }
    }
}

fn sample(t: f64, u: &Field, mon: &Monitors) -> Sample {
    let f = evaluate(u);
    let mut s = Sample { t, f, dec: None, sign: None, sign_consistent: None };
    if let Some(basis) = mon.basis {
        if let Ok(d) = decompose(u, basis, &mon.th) {
            if mon.sign {
                if let Ok(r) = sign_from(u, &d, basis, &mon.th) {
                    s.sign = Some(r.value);
                    s.sign_consistent = Some(r.consistent);
                }
            }
            s.dec = Some(DecompositionRow::from(&d));
        }
    }
    s
}

/// Integrates from `u0` and samples the monitors.
pub fn evolve(u0: &Field, opts: &EvolveOptions, mon: &Monitors) -> Result<Trajectory> {
    if !(opts.dt > 0.0 && opts.dt <= 0.01) {
        return Err(Error::InvalidArgument(format!("dt must lie in (0, 0.01], got {}", opts.dt)));
    }
    if !(opts.t_end > 0.0) {
        return Err(Error::InvalidArgument(format!("T must be positive, got {}", opts.t_end)));
    }
    let center = if opts.centered {
        let basis = mon.basis.ok_or_else(|| Error::InvalidArgument("centered stepping needs a mode basis".into()))?;
        if basis.grid() != u0.grid() {
            return Err(Error::GridMismatch("mode basis and initial data differ".into()));
        }
        Some(basis)
    } else {
        None
    };
    let h = if opts.backward { -opts.dt } else { opts.dt };
    let per_sample = ((opts.dt_sample / opts.dt).round() as usize).max(1);
    let per_snapshot = opts.snapshot_every.map(|s| ((s / opts.dt).round() as usize).max(1));
    let total = (opts.t_end / opts.dt).round() as usize;
    let blowup_norm = opts.n_blow * (1.0 + u0.norm());

    let to_state = |u: &Field| -> Result<Spectral> {
        Ok(match center {
            Some(b) => Spectral::new(&u.sub(&b.state)?, Some(&b.q)),
            None => Spectral::new(u, None),
        })
    };
    let to_field = |s: &Spectral| -> Result<Field> {
        let v = s.physical()?;
        match center {
            Some(b) => v.add(&b.state),
            None => Ok(v),
        }
    };

    let mut state = to_state(u0)?;
    let mut samples = vec![sample(0.0, u0, mon)];
    let mut snapshots = Vec::new();
    if per_snapshot.is_some() {
        snapshots.push((0.0, u0.clone()));
    }
    let mut ejection_time = None;
    let mut stop_at = total;
    if let Some(rule) = &opts.stop {
        stop_at = stop_at.min((rule.horizon / opts.dt).round() as usize);
    }
    let mut step = 0usize;
    let mut last_good = u0.clone();
    let mut status = Status::Completed;
    'outer: while step < stop_at {
        let m = per_sample.min(stop_at - step);
        state.linear(0.5 * h);
        for i in 0..m {
            state.nonlinear(h);
            state.linear(if i + 1 == m { 0.5 * h } else { h });
            step += 1;
            let nrm = state.norm();
            if !nrm.is_finite() {
                status = Status::Aborted { t_last: samples.last().map(|s| s.t).unwrap_or(0.0) };
                break 'outer;
            }
            if nrm > blowup_norm {
                // Finish the fused half step so the recorded state is synchronized.
                if i + 1 < m {
                    state.linear(-0.5 * h);
                }
                let t = step as f64 * opts.dt;
                let u = to_field(&state)?;
                samples.push(sample(t, &u, &Monitors { basis: None, ..*mon }));
                last_good = u;
                status = Status::Blowup { t_star: t };
                break 'outer;
            }
        }
        let t = step as f64 * opts.dt;
        let mut u = to_field(&state)?;
        if u.data().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            status = Status::Aborted { t_last: samples.last().map(|s| s.t).unwrap_or(0.0) };
            break;
        }
        if let Some(hook) = mon.hook {
            if let Some(w) = hook(t, &u)? {
                u = w;
                state = to_state(&u)?;
            }
        }
        let s = sample(t, &u, mon);
        if let (Some(rule), None) = (&opts.stop, ejection_time) {
            if s.dq().is_some_and(|d| d > rule.delta_x) {
                ejection_time = Some(t);
                stop_at = total.min(step + (rule.t_confirm / opts.dt).round() as usize);
            }
        }
        samples.push(s);
        if let Some(ps) = per_snapshot {
            if step % ps == 0 {
                snapshots.push((t, u.clone()));
            }
        }
        last_good = u;
    }
    let t_final = samples.last().map(|s| s.t).unwrap_or(0.0);
    Ok(Trajectory {
        samples,
        snapshots,
        status,
        final_state: last_good,
        t_final,
        dt: opts.dt,
        ejection_time,
        steps: step,
        blowup_norm,
    })
}

/// Complex conjugation of samples: time reversal `(w, w_t) -> (w, -w_t)`.
pub fn conjugate(u: &Field) -> Field {
    u.conj()
}

/// Final state of a monitor-free run.
pub fn flow(u0: &Field, t: f64, dt: f64, backward: bool) -> Result<Field> {
    let opts = EvolveOptions { dt, t_end: t, dt_sample: t, snapshot_every: None, backward, ..EvolveOptions::default() };
    let tr = evolve(u0, &opts, &Monitors::default())?;
    match tr.status {
        Status::Completed => Ok(tr.final_state),
        s => Err(Error::Inconsistent(format!("flow did not complete: {s:?}"))),
    }
}

/// Exact free flow `exp(i t D) u`.
pub fn free_flow(u: &Field, t: f64) -> Field {
    u.apply(crate::field::Multiplier::ExpIDt(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump_state(amp: f64) -> Field {
        let g = RadialGrid::new(30.0, 255).unwrap();
        let w: Vec<f64> = g.nodes().iter().map(|r| amp * (-r * r / 2.0).exp()).collect();
        Field::static_state(Grid::Radial(g), &w).unwrap()
    }

    #[test]
    fn linear_regime_follows_the_free_flow() {
        let u0 = bump_state(1e-6);
        let u = flow(&u0, 2.0, 1e-2, false).unwrap();
        let v = free_flow(&u0, 2.0);
        assert!(u.sub(&v).unwrap().norm() < 1e-15 * 1e6 * u0.norm());
    }

    #[test]
    fn backward_step_inverts_forward_step() {
        let u0 = bump_state(1.0);
        let u = flow(&u0, 0.5, 1e-3, false).unwrap();
        let back = flow(&u, 0.5, 1e-3, true).unwrap();
        assert!(back.sub(&u0).unwrap().norm() < 1e-10 * u0.norm());
    }

    #[test]
    fn invalid_options_are_rejected() {
        let u0 = bump_state(1.0);
        let o = EvolveOptions { dt: 0.1, ..EvolveOptions::default() };
        assert!(evolve(&u0, &o, &Monitors::default()).is_err());
        assert_eq!(conjugate(&conjugate(&u0)), u0);
    }
}
