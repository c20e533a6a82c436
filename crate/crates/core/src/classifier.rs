//! Finite-horizon classification of trajectories: scatter, blowup or trapped in each time
//! direction, ejection-rate fits, the one-pass audit and bisection for threshold data.

use serde::{Deserialize, Serialize};

use crate::decomposition::{ModeBasis, Thresholds};
use crate::error::{Error, Result};
use crate::evolution::{conjugate, evolve, EvolveOptions, Monitors, Status, StopRule, Trajectory};
use crate::field::{omega, Complex64, Field};
use crate::functionals::{energy, minimal_energy, momentum};
use crate::numerics::{linear_fit, trapezoid};

/// Outcome in one time direction.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    #[serde(rename = "S")]
    Scatter,
    #[serde(rename = "B")]
    Blowup,
    #[serde(rename = "T")]
    Trapped,
    /// No decision within the tested horizon.
    #[serde(rename = "U")]
    Undecided,
}

impl Label {
    pub fn letter(&self) -> char {
        match self {
            Label::Scatter => 'S',
            Label::Blowup => 'B',
            Label::Trapped => 'T',
            Label::Undecided => 'U',
        }
    }

    pub fn is_definite(&self) -> bool {
        matches!(self, Label::Scatter | Label::Blowup)
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ClassifyOptions {
    pub dt: f64,
    pub dt_sample: f64,
    /// Longest run.
    pub t_end: f64,
    /// Trapped horizon; `None` means `10 / k`.
    pub t_trap: Option<f64>,
    /// Required duration of the post-ejection sign.
    pub t_confirm: f64,
    /// Window length for the space-time L4 guard.
    pub l4_window: f64,
    /// Centered stepping around the basis ground state.
    pub centered: bool,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            dt: 1e-3,
            dt_sample: 0.01,
            t_end: 100.0,
            t_trap: None,
            t_confirm: 20.0,
            l4_window: 2.0,
            centered: true,
        }
    }
}

impl ClassifyOptions {
    pub fn trap_horizon(&self, k: f64) -> f64 {
        self.t_trap.unwrap_or(10.0 / k)
    }

    /// Evolution settings with the classification stop rule.
    pub fn evolve_options(&self, basis: &ModeBasis, th: &Thresholds) -> EvolveOptions {
        EvolveOptions {
            dt: self.dt,
            t_end: self.t_end,
            dt_sample: self.dt_sample,
            snapshot_every: None,
            centered: self.centered,
            stop: Some(StopRule {
                horizon: self.trap_horizon(basis.k),
                t_confirm: self.t_confirm,
                delta_x: th.delta_x,
            }),
            ..EvolveOptions::default()
        }
    }
}

/// Label of one direction with the quantities it was decided from.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Diagnostics {
    pub label: Label,
    pub t_final: f64,
    pub blowup_time: Option<f64>,
    pub ejection_time: Option<f64>,
    /// Sign functional at the first sample after ejection.
    pub sign_at_ejection: Option<i8>,
    /// Every post-ejection sample has sign `+1`.
    pub sign_persistent: bool,
    pub l4_first: Option<f64>,
    pub l4_last: Option<f64>,
    pub dq_min: Option<f64>,
    pub dq_max: Option<f64>,
    /// Largest `dQ` over the final trapped window.
    pub dq_final_window: Option<f64>,
    /// First time `dQ > deltaStar`.
    pub exit_time: Option<f64>,
    pub t_trap: f64,
}

/// Reads a label from a monitored trajectory.
pub fn classify_forward(
    traj: &Trajectory,
    th: &Thresholds,
    t_trap: f64,
    t_confirm: f64,
    l4_window: f64,
) -> Diagnostics {
    let dqs: Vec<(f64, f64)> = traj.samples.iter().filter_map(|s| s.dq().map(|d| (s.t, d))).collect();
    let dq_min = dqs.iter().map(|p| p.1).reduce(f64::min);
    let dq_max = dqs.iter().map(|p| p.1).reduce(f64::max);
    let exit_time = dqs.iter().find(|p| p.1 > th.delta_star).map(|p| p.0);
    let ejection_time = traj.ejection_time.or_else(|| dqs.iter().find(|p| p.1 > th.delta_x).map(|p| p.0));
    let mut d = Diagnostics {
        label: Label::Undecided,
        t_final: traj.t_final,
        blowup_time: None,
        ejection_time,
        sign_at_ejection: None,
        sign_persistent: false,
        l4_first: None,
        l4_last: None,
        dq_min,
        dq_max,
        dq_final_window: None,
        exit_time,
        t_trap,
    };
    if let Status::Blowup { t_star } = traj.status {
        d.blowup_time = Some(t_star);
        d.label = Label::Blowup;
        return d;
    }
    if let Some(te) = ejection_time {
        let after: Vec<Option<i8>> = traj.samples.iter().filter(|s| s.t >= te).map(|s| s.sign).collect();
        d.sign_at_ejection = after.first().copied().flatten();
        d.sign_persistent = !after.is_empty() && after.iter().all(|s| *s == Some(1));
        let w = traj.l4_windows(te, l4_window);
        d.l4_first = w.first().map(|x| x.value);
        d.l4_last = w.last().map(|x| x.value);
        let decreasing = w.len() >= 2 && w.last().unwrap().value < w[0].value;
        let long_enough = traj.t_final - te >= t_confirm - 1e-9;
        if d.sign_persistent && long_enough && decreasing && traj.status == Status::Completed {
            d.label = Label::Scatter;
        }
        return d;
    }
    // The horizon is rounded to whole steps.
    if traj.t_final + traj.dt >= t_trap {
        let t0 = (traj.t_final - t_trap).max(0.0);
        let window: Vec<f64> = dqs.iter().filter(|p| p.0 >= t0 - 1e-9).map(|p| p.1).collect();
        let covered = traj.samples.iter().filter(|s| s.t >= t0 - 1e-9).all(|s| s.dec.is_some());
        d.dq_final_window = window.iter().copied().reduce(f64::max);
        if covered && !window.is_empty() && d.dq_final_window.unwrap() < th.delta_star {
            d.label = Label::Trapped;
        }
    }
    d
}

/// Runs the classification evolution and labels it.
pub fn classify_run(
    u0: &Field,
    basis: &ModeBasis,
    th: &Thresholds,
    opts: &ClassifyOptions,
) -> Result<(Trajectory, Diagnostics)> {
    let eo = opts.evolve_options(basis, th);
    let tr = evolve(u0, &eo, &Monitors { basis: Some(basis), th: *th, sign: true, hook: None })?;
    let d = classify_forward(&tr, th, opts.trap_horizon(basis.k), opts.t_confirm, opts.l4_window);
    Ok((tr, d))
}

/// Forward and backward labels.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct NineLabel {
    pub forward: Diagnostics,
    pub backward: Diagnostics,
}

impl NineLabel {
    pub fn pair(&self) -> (Label, Label) {
        (self.forward.label, self.backward.label)
    }

    /// Two-letter code, forward first.
    pub fn code(&self) -> String {
        format!("{}{}", self.forward.label, self.backward.label)
    }
}

/// The minimal energy must lie below `J + epsStar^2`.
pub fn check_energy_window(u0: &Field, basis: &ModeBasis, th: &Thresholds) -> Result<f64> {
    let em = minimal_energy(energy(u0), momentum(u0));
    let cap = basis.jq + th.eps_star * th.eps_star;
    if !(em < cap) {
        return Err(Error::OutOfRegion(format!("minimal energy {em:.8} is not below J + epsStar^2 = {cap:.8}")));
    }
    Ok(em)
}

/// Labels both time directions; the backward run is the forward run of the conjugate data.
pub fn classify_nine(u0: &Field, basis: &ModeBasis, th: &Thresholds, opts: &ClassifyOptions) -> Result<NineLabel> {
    check_energy_window(u0, basis, th)?;
    let (_, forward) = classify_run(u0, basis, th, opts)?;
    let (_, backward) = classify_run(&conjugate(u0), basis, th, opts)?;
    Ok(NineLabel { forward, backward })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EjectionFit {
    pub exponent: f64,
    pub t0: f64,
    pub t1: f64,
    pub dq0: f64,
    pub points: usize,
}

/// Least-squares slope of `log dQ` on the monotone run that first crosses `deltaX`,
/// provided it starts at or below `deltaX / 10`.
pub fn ejection_fit(traj: &Trajectory, th: &Thresholds) -> Option<EjectionFit> {
    let pts: Vec<(f64, f64)> = traj.samples.iter().filter_map(|s| s.dq().map(|d| (s.t, d))).collect();
    let end = pts.iter().position(|p| p.1 >= th.delta_x)?;
    let mut start = end;
    while start > 0 && pts[start - 1].1 < pts[start].1 {
        start -= 1;
    }
    if pts[start].1 > th.delta_x / 10.0 || end - start < 2 {
        return None;
    }
    let t: Vec<f64> = pts[start..=end].iter().map(|p| p.0).collect();
    let y: Vec<f64> = pts[start..=end].iter().map(|p| p.1.ln()).collect();
    let (_, slope) = linear_fit(&t, &y)?;
    Some(EjectionFit { exponent: slope, t0: t[0], t1: *t.last().unwrap(), dq0: pts[start].1, points: t.len() })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct OnePassReport {
    pub r: f64,
    /// `(tau1, tau2)` exit patterns found.
    pub exits: Vec<(f64, f64)>,
    /// Times of returns to `dQ <= R` after an exit.
    pub returns: Vec<f64>,
}

impl OnePassReport {
    pub fn violations(&self) -> usize {
        self.returns.len()
    }
}

/// Scans a `(t, dQ)` series for `dQ(tau1) < R < R + R^2 < dQ(tau2)` followed by `dQ <= R`.
pub fn one_pass_scan(series: &[(f64, f64)], r: f64) -> OnePassReport {
    let mut rep = OnePassReport { r, exits: Vec::new(), returns: Vec::new() };
    let mut tau1: Option<f64> = None;
    let mut exited = false;
    for &(t, d) in series {
        if exited {
            if d <= r {
                rep.returns.push(t);
                exited = false;
                tau1 = if d < r { Some(t) } else { None };
            }
        } else if d < r {
            tau1 = Some(t);
        } else if d > r + r * r {
            if let Some(t1) = tau1 {
                rep.exits.push((t1, t));
                exited = true;
            }
        }
    }
    rep
}

/// One-pass audit of a monitored trajectory; `R` must lie in `(2 epsStar, Rstar]`.
pub fn one_pass_audit(traj: &Trajectory, r: f64, th: &Thresholds) -> Result<OnePassReport> {
    if !(r > 2.0 * th.eps_star && r <= th.r_star) {
        return Err(Error::InvalidArgument(format!(
            "audit radius {r} outside (2 epsStar, Rstar] = ({}, {}]",
            2.0 * th.eps_star,
            th.r_star
        )));
    }
    let series: Vec<(f64, f64)> = traj.samples.iter().filter_map(|s| s.dq().map(|d| (s.t, d))).collect();
    Ok(one_pass_scan(&series, r))
}

/// Bisection settings.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BisectOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Per-run settings; the trapped horizon is raised to `t_end` so each run decides.
    pub classify: ClassifyOptions,
}

impl Default for BisectOptions {
    fn default() -> Self {
        BisectOptions {
            tol: 1e-12,
            max_iter: 64,
            classify: ClassifyOptions { t_end: 40.0, ..ClassifyOptions::default() },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BisectStep {
    pub s: f64,
    pub label: Label,
    pub exit_time: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThresholdTrajectory {
    pub threshold: f64,
    /// Final two-sided bracket.
    pub lo: f64,
    pub hi: f64,
    pub lo_label: Label,
    pub hi_label: Label,
    /// Time spent with `dQ <= deltaStar` on the threshold run and the original endpoints.
    pub trapped_duration: f64,
    pub trapped_lo: f64,
    pub trapped_hi: f64,
    /// Fitted decay rate of `|lambda_-|` on the threshold run.
    pub lambda_minus_rate: Option<f64>,
    /// Terminal label of the threshold run.
    pub terminal: Label,
    /// Sign of `lambda_-` at the start of the fit.
    pub lambda_minus_sign: Option<i8>,
    /// Largest `|lambda_+(t) + int_t^T e^{k(t-s)} omega(f, g_-) ds| / dQ(t)^2` on the checked range.
    pub relation_constant: Option<f64>,
    pub relation_points: usize,
    pub steps: Vec<BisectStep>,
    /// Sampled threshold run, without stored states.
    #[serde(skip)]
    pub run: Option<Trajectory>,
}

fn trapped_duration(traj: &Trajectory, th: &Thresholds) -> f64 {
    traj.samples.iter().find(|s| s.dq().is_none_or(|d| d > th.delta_star)).map(|s| s.t).unwrap_or(traj.t_final)
}

/// `omega(f, g_-)` for the nonlinear part `f = -i (3 Q v1^2 + v1^3)` of the equation for `v = u - frak Q`.
fn forcing(u: &Field, basis: &ModeBasis) -> Result<f64> {
    let v1 = u.sub(&basis.state)?.u1();
    let data: Vec<Complex64> = match u.grid().boxed() {
        Some(bx) => {
            let q2 = bx.product3(&basis.q, &v1, &v1);
            let v3 = bx.product3(&v1, &v1, &v1);
            q2.iter().zip(&v3).map(|(a, b)| Complex64::new(0.0, -(3.0 * a + b))).collect()
        }
        None => basis.q.iter().zip(&v1).map(|(q, v)| Complex64::new(0.0, -(3.0 * q * v * v + v * v * v))).collect(),
    };
    omega(&Field::new(*u.grid(), data)?, &basis.gminus)
}

/// Bisects a one-parameter family between a scattering and a blowup endpoint.
pub fn bisect_manifold(
    family: &(dyn Fn(f64) -> Result<Field> + Sync),
    lo: f64,
    hi: f64,
    basis: &ModeBasis,
    th: &Thresholds,
    opts: &BisectOptions,
) -> Result<ThresholdTrajectory> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidArgument(format!("bracket [{lo}, {hi}] is not an ordered finite interval")));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidArgument("bisection needs a positive tolerance and iteration cap".into()));
    }
    th.validate()?;
    let (u_lo, u_hi) = (family(lo)?, family(hi)?);
    for u in [&u_lo, &u_hi] {
        if u.grid() != basis.grid() {
            return Err(Error::GridMismatch("family and mode basis differ".into()));
        }
        check_energy_window(u, basis, th)?;
    }
    let mut copts = opts.classify.clone();
    copts.t_trap = Some(copts.t_end);
    let run = |u: &Field| classify_run(u, basis, th, &copts);
    let (tr_lo, d_lo) = run(&u_lo)?;
    let (tr_hi, d_hi) = run(&u_hi)?;
    let (la, lb) = (d_lo.label, d_hi.label);
    if !(la.is_definite() && lb.is_definite() && la != lb) {
        return Err(Error::InvalidArgument(format!(
            "bracket endpoints are labelled {la} and {lb}; need one S and one B"
        )));
    }
    let trapped_lo = trapped_duration(&tr_lo, th);
    let trapped_hi = trapped_duration(&tr_hi, th);
    let (mut a, mut b) = (lo, hi);
    let mut steps = vec![
        BisectStep { s: lo, label: la, exit_time: d_lo.exit_time },
        BisectStep { s: hi, label: lb, exit_time: d_hi.exit_time },
    ];
    let mut threshold_run: Option<(f64, Trajectory, Diagnostics)> = None;
    for _ in 0..opts.max_iter {
        if b - a <= opts.tol {
            break;
        }
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let (tr, d) = run(&family(m)?)?;
        steps.push(BisectStep { s: m, label: d.label, exit_time: d.exit_time });
        if d.label == la {
            a = m;
        } else if d.label == lb {
            b = m;
        } else {
            // Not ejected within the horizon: the midpoint is itself threshold data.
            threshold_run = Some((m, tr, d));
            break;
        }
    }
    let (threshold, tr, d) = match threshold_run {
        Some(x) => x,
        None => {
            let m = 0.5 * (a + b);
            let (tr, d) = run(&family(m)?)?;
            steps.push(BisectStep { s: m, label: d.label, exit_time: d.exit_time });
            (m, tr, d)
        }
    };
    // Rerun the threshold data with stored states for the stable-mode relation.
    let eo = EvolveOptions { snapshot_every: Some(copts.dt_sample), ..copts.evolve_options(basis, th) };
    let full = evolve(&family(threshold)?, &eo, &Monitors { basis: Some(basis), th: *th, sign: false, hook: None })?;
    let t_exit = trapped_duration(&full, th);
    let (rate, lm_sign) = lambda_minus_rate(&full, basis.k, t_exit);
    let (relation_constant, relation_points) = stable_relation(&full, basis, t_exit)?;
    Ok(ThresholdTrajectory {
        threshold,
        lo: a,
        hi: b,
        lo_label: la,
        hi_label: lb,
        trapped_duration: trapped_duration(&tr, th),
        trapped_lo,
        trapped_hi,
        lambda_minus_rate: rate,
        terminal: d.label,
        lambda_minus_sign: lm_sign,
        relation_constant,
        relation_points,
        steps,
        run: Some(tr),
    })
}

/// Decay rate of `|lambda_-|` over `[0, min(1.5/k, t_exit/2)]`.
fn lambda_minus_rate(traj: &Trajectory, k: f64, t_exit: f64) -> (Option<f64>, Option<i8>) {
    let t_max = (1.5 / k).min(0.5 * t_exit);
    let pts: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .filter(|s| s.t <= t_max + 1e-12)
        .filter_map(|s| s.dec.as_ref().map(|d| (s.t, d.lamm)))
        .collect();
    if pts.len() < 3 || pts[0].1 == 0.0 {
        return (None, None);
    }
    let sign = Some(if pts[0].1 > 0.0 { 1 } else { -1 });
    if pts.iter().any(|p| p.1 == 0.0 || p.1.signum() != pts[0].1.signum()) {
        return (None, sign);
    }
    let t: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.abs().ln()).collect();
    (linear_fit(&t, &y).map(|f| -f.1), sign)
}

/// Compares `lambda_+(t)` with `-int_t^T e^{k(t-s)} omega(f(s), g_-) ds` for `t <= T`, where `T`
/// is the last time with `|lambda_+| <= dQ^2`; beyond it the finite-precision offset from the
/// manifold dominates and the dropped boundary term `e^{k(t-T)} lambda_+(T)` is no longer small.
fn stable_relation(traj: &Trajectory, basis: &ModeBasis, t_exit: f64) -> Result<(Option<f64>, usize)> {
    let k = basis.k;
    let mut pts: Vec<(f64, f64, f64, f64)> = Vec::new();
    for ((t, u), s) in traj.snapshots.iter().zip(traj.samples.iter()) {
        let Some(d) = s.dec.as_ref() else { break };
        if *t > t_exit || d.lamp.abs() > d.dq * d.dq {
            break;
        }
        pts.push((*t, forcing(u, basis)?, d.lamp, d.dq));
    }
    let mut worst: Option<f64> = None;
    let mut count = 0;
    for (i, &(t, _, lamp, dq)) in pts.iter().enumerate().take(pts.len().saturating_sub(1)) {
        let ts: Vec<f64> = pts[i..].iter().map(|p| p.0).collect();
        let fs: Vec<f64> = pts[i..].iter().map(|p| (k * (t - p.0)).exp() * p.1).collect();
        let r = (lamp + trapezoid(&ts, &fs)).abs() / (dq * dq);
        if r.is_finite() {
            worst = Some(worst.map_or(r, |w: f64| w.max(r)));
            count += 1;
        }
    }
    Ok((worst, count))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_oscillation_is_flagged_by_the_auditor() {
        let r = 0.05;
        let series: Vec<(f64, f64)> = (0..400)
            .map(|i| {
                let t = i as f64 * 0.05;
                (t, 0.06 + 0.04 * (t).sin())
            })
            .collect();
        let rep = one_pass_scan(&series, r);
        assert!(rep.violations() >= 2, "{rep:?}");
        assert!(rep.exits.len() >= rep.violations());
    }

    #[test]
    fn monotone_exit_has_no_violation() {
        let series: Vec<(f64, f64)> = (0..100).map(|i| (i as f64 * 0.1, 1e-3 * (0.4 * i as f64).exp())).collect();
        let rep = one_pass_scan(&series, 0.05);
        assert_eq!(rep.exits.len(), 1);
        assert_eq!(rep.violations(), 0);
    }

    #[test]
    fn exit_needs_the_quadratic_margin() {
        // Rising to R + R^2 / 2 and falling back is not an exit.
        let r = 0.05;
        let series = [(0.0, 0.01), (1.0, r + 0.5 * r * r), (2.0, 0.01)];
        let rep = one_pass_scan(&series, r);
        assert!(rep.exits.is_empty() && rep.returns.is_empty());
    }

    #[test]
    fn labels_have_letters() {
        assert_eq!(Label::Scatter.to_string(), "S");
        assert_eq!(serde_json::to_string(&Label::Trapped).unwrap(), "\"T\"");
        assert!(!Label::Undecided.is_definite());
    }
}
