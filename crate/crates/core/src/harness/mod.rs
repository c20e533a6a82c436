//! Experiment catalog, run persistence and the parallel sweep scheduler.
//!
//! An experiment is selected by the top-level `experiment` key of a [`Config`]; each one
//! validates its parameters before any heavy computation, writes its artifacts into an
//! atomically committed run directory and records pass/fail assertions in the manifest.

pub mod config;
pub mod recipe;
pub mod run;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

pub use config::Config;
pub use recipe::{dispersive_component, thresholds_from_config, Context, GridSpec, Recipe};
pub use run::{output_root, Assertion, RunDir, RunManifest, OUT_ROOT_ENV};

use crate::boosts::{box_traveling_wave, profile_residual, traveling_wave, velocity_law, BoostParams, VelocityOptions};
use crate::classifier::{
    bisect_manifold, check_energy_window, classify_run, ejection_fit, one_pass_audit, one_pass_scan, BisectOptions,
    ClassifyOptions, Diagnostics, Label,
};
use crate::decomposition::{ModeBasis, Thresholds};
use crate::error::{Error, Result};
use crate::evolution::{conjugate, evolve, EvolveOptions, Monitors, Status};
use crate::field::{write_snapshot, BoxGrid, Complex64, Field, Grid, RadialGrid};
use crate::functionals::{energy, evaluate, k0, k2, momentum};
use crate::ground_state::{compute_ground_state, ground_state_from_samples};
use crate::linearization::{
    assemble_matrix_l, compute_linearization, kernel_probe, resolvent_probe, verify_gap, GapOptions, KernelOptions,
    ResolventOptions,
};

pub const EXPERIMENTS: &[&str] = &[
    "ground-state",
    "spectrum",
    "evolve",
    "classify",
    "nine-sweep",
    "ejection",
    "one-pass",
    "bisect",
    "probe-resolvent",
    "probe-kernel",
    "traveling-wave",
];

/// Where and how to run.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub root: PathBuf,
    /// Exact run directory; defaults to `root/<name or experiment>`.
    pub target: Option<PathBuf>,
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { root: output_root(), target: None, jobs: 1 }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

/// What an experiment hands back to the runner.
struct Report {
    assertions: Vec<Assertion>,
    summary: serde_json::Value,
    recipe: Option<serde_json::Value>,
}

/// Maps `f` over `items` on `jobs` workers; results are in item order.
pub fn par_map<T: Sync, R: Send>(jobs: usize, items: &[T], f: impl Fn(usize, &T) -> R + Sync) -> Result<Vec<R>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect()))
}

/// Runs the experiment named in `cfg` and commits its run directory.
pub fn run_experiment(cfg: &Config, opts: &RunOptions) -> Result<RunOutcome> {
    cfg.check_keys("", &["experiment", "seed", "name"])?;
    let experiment = cfg.require("", "experiment")?.to_string();
    if !EXPERIMENTS.contains(&experiment.as_str()) {
        return Err(Error::Config {
            line: 0,
            key: "experiment".into(),
            msg: format!("unknown experiment `{experiment}`; expected one of {}", EXPERIMENTS.join(", ")),
        });
    }
    let seed = cfg.u64_or("", "seed", 1)?;
    let target = match &opts.target {
        Some(t) => t.clone(),
        None => opts.root.join(cfg.str_or("", "name", &experiment)),
    };
    let start = Instant::now();
    // Parse everything before creating the run directory.
    let plan = Plan::parse(&experiment, cfg)?;
    let mut rd = RunDir::create(&target)?;
    let report = plan.execute(cfg, seed, opts.jobs.max(1), &mut rd)?;
    let passed = report.assertions.iter().all(|a| a.passed);
    let manifest = RunManifest {
        tool: "nlkg".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment,
        config: cfg.echo(),
        resolved: serde_json::to_value(&plan)?,
        recipe: report.recipe,
        seed,
        jobs: opts.jobs.max(1),
        outputs: rd.outputs(),
        wall_time_s: start.elapsed().as_secs_f64(),
        assertions: report.assertions,
        passed,
        summary: report.summary,
    };
    let dir = rd.commit(&manifest)?;
    Ok(RunOutcome { dir, manifest })
}

fn evolve_options(cfg: &Config) -> Result<EvolveOptions> {
    cfg.check_keys("evolve", &["dt", "t_end", "dt_sample", "snapshot_every", "n_blow", "centered", "backward"])?;
    let d = EvolveOptions::default();
    let snap = cfg.f64_or("evolve", "snapshot_every", d.snapshot_every.unwrap_or(0.0))?;
    let o = EvolveOptions {
        dt: cfg.f64_or("evolve", "dt", d.dt)?,
        t_end: cfg.f64_or("evolve", "t_end", d.t_end)?,
        dt_sample: cfg.f64_or("evolve", "dt_sample", d.dt_sample)?,
        snapshot_every: if snap > 0.0 { Some(snap) } else { None },
        n_blow: cfg.f64_or("evolve", "n_blow", d.n_blow)?,
        centered: cfg.bool_or("evolve", "centered", false)?,
        backward: cfg.bool_or("evolve", "backward", false)?,
        stop: None,
    };
    if !(o.dt > 0.0 && o.dt <= 0.01) {
        return Err(Error::Config {
            line: 0,
            key: "evolve.dt".into(),
            msg: format!("dt must lie in (0, 0.01], got {}", o.dt),
        });
    }
    if !(o.t_end > 0.0) || !(o.dt_sample > 0.0) {
        return Err(Error::Config {
            line: 0,
            key: "evolve.t_end".into(),
            msg: "T and dt_sample must be positive".into(),
        });
    }
    Ok(o)
}

fn classify_options(cfg: &Config, defaults: ClassifyOptions) -> Result<ClassifyOptions> {
    cfg.check_keys(
        "classify",
        &["dt", "dt_sample", "t_end", "t_trap", "t_confirm", "l4_window", "centered", "expect"],
    )?;
    let o = ClassifyOptions {
        dt: cfg.f64_or("classify", "dt", defaults.dt)?,
        dt_sample: cfg.f64_or("classify", "dt_sample", defaults.dt_sample)?,
        t_end: cfg.f64_or("classify", "t_end", defaults.t_end)?,
        t_trap: cfg.opt_f64("classify", "t_trap")?.or(defaults.t_trap),
        t_confirm: cfg.f64_or("classify", "t_confirm", defaults.t_confirm)?,
        l4_window: cfg.f64_or("classify", "l4_window", defaults.l4_window)?,
        centered: cfg.bool_or("classify", "centered", defaults.centered)?,
    };
    if !(o.dt > 0.0 && o.dt <= 0.01) {
        return Err(Error::Config {
            line: 0,
            key: "classify.dt".into(),
            msg: format!("dt must lie in (0, 0.01], got {}", o.dt),
        });
    }
    if !(o.t_end > 0.0 && o.t_confirm > 0.0 && o.l4_window > 0.0 && o.dt_sample > 0.0) {
        return Err(Error::Config { line: 0, key: "classify".into(), msg: "times must be positive".into() });
    }
    Ok(o)
}

/// Sweep classification defaults: coarser steps for throughput.
fn sweep_defaults() -> ClassifyOptions {
    ClassifyOptions { dt: 5e-3, dt_sample: 0.02, ..ClassifyOptions::default() }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
enum BisectFamily {
    ScaledQ,
    Modes { eps_minus: f64, gamma_amp: f64, gamma_seed: u64 },
}

/// Parsed experiment parameters, defaults resolved.
#[derive(Serialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
enum Plan {
    GroundState {
        spec: GridSpec,
    },
    Spectrum {
        spec: GridSpec,
        q_file: Option<PathBuf>,
        gap: GapOptions,
        matrix_grid: (f64, usize),
    },
    Evolve {
        spec: GridSpec,
        th: Thresholds,
        recipe: Recipe,
        eo: EvolveOptions,
    },
    Classify {
        spec: GridSpec,
        th: Thresholds,
        recipe: Recipe,
        co: ClassifyOptions,
        expect: Option<String>,
    },
    NineSweep {
        spec: GridSpec,
        th: Thresholds,
        co: ClassifyOptions,
        a: f64,
        n: usize,
        gamma_amp: f64,
        gamma_seed: u64,
    },
    Ejection {
        spec: GridSpec,
        th: Thresholds,
        co: ClassifyOptions,
        eps: Vec<f64>,
        stable_eps: f64,
    },
    OnePass {
        spec: GridSpec,
        th: Thresholds,
        co: ClassifyOptions,
        runs: usize,
        r: f64,
        eps_min: f64,
        eps_max: f64,
        gamma_amp: f64,
    },
    Bisect {
        spec: GridSpec,
        th: Thresholds,
        bo: BisectOptions,
        family: BisectFamily,
        lo: f64,
        hi: f64,
    },
    Resolvent {
        spec: GridSpec,
        #[serde(serialize_with = "serialize_points")]
        zs: Option<Vec<Complex64>>,
        ro: ResolventOptions,
        eps: Vec<f64>,
        re_z: f64,
    },
    Kernel {
        js: Vec<u32>,
    },
    TravelingWave {
        spec: GridSpec,
        p: [f64; 3],
        statics: TwGrid,
        velocity: Option<VelocityOptions>,
    },
}

fn serialize_points<S: serde::Serializer>(zs: &Option<Vec<Complex64>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    zs.as_ref().map(|v| v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()).serialize(s)
}

fn section_keys(cfg: &Config, section: &str, keys: &[&str]) -> Result<()> {
    cfg.check_keys(section, keys)
}

fn read_z_file(path: &Path) -> Result<Vec<Complex64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Format(format!("{}: row {} needs numeric re,im", path.display(), out.len() + 1)))
        };
        out.push(Complex64::new(get(0)?, get(1)?));
    }
    if out.is_empty() {
        return Err(Error::Format(format!("{} lists no spectral points", path.display())));
    }
    Ok(out)
}

impl Plan {
    fn parse(experiment: &str, cfg: &Config) -> Result<Plan> {
        let spec = || GridSpec::from_config(cfg);
        let th = || thresholds_from_config(cfg);
        cfg.check_sections(&[
            "",
            "grid",
            "thresholds",
            "evolve",
            "classify",
            "recipe",
            "sweep",
            "ejection",
            "audit",
            "bisect",
            "spectrum",
            "resolvent",
            "kernel",
            "tw",
        ])?;
        let plan = match experiment {
            "ground-state" => Plan::GroundState { spec: spec()? },
            "spectrum" => {
                section_keys(cfg, "spectrum", &["q", "r_dense", "n_dense", "matrix_r", "matrix_n"])?;
                let d = GapOptions::default();
                Plan::Spectrum {
                    spec: spec()?,
                    q_file: cfg.get("spectrum", "q").map(PathBuf::from),
                    gap: GapOptions {
                        r_dense: cfg.f64_or("spectrum", "r_dense", d.r_dense)?,
                        n_dense: cfg.usize_or("spectrum", "n_dense", d.n_dense)?,
                        ..d
                    },
                    matrix_grid: (
                        cfg.f64_or("spectrum", "matrix_r", 30.0)?,
                        cfg.usize_or("spectrum", "matrix_n", 383)?,
                    ),
                }
            }
            "evolve" => Plan::Evolve {
                spec: spec()?,
                th: th()?,
                recipe: Recipe::from_config(cfg, "recipe")?,
                eo: evolve_options(cfg)?,
            },
            "classify" => Plan::Classify {
                spec: spec()?,
                th: th()?,
                recipe: Recipe::from_config(cfg, "recipe")?,
                co: classify_options(cfg, ClassifyOptions::default())?,
                expect: cfg.get("classify", "expect").map(str::to_string),
            },
            "nine-sweep" => {
                section_keys(cfg, "sweep", &["a", "n", "gamma_amp", "gamma_seed"])?;
                let n = cfg.usize_or("sweep", "n", 21)?;
                let a = cfg.f64_or("sweep", "a", 0.0095)?;
                if n == 0 {
                    return Err(Error::Config { line: 0, key: "sweep.n".into(), msg: "empty sweep grid".into() });
                }
                if !(a >= 0.0) {
                    return Err(Error::Config {
                        line: 0,
                        key: "sweep.a".into(),
                        msg: "half-width must be non-negative".into(),
                    });
                }
                Plan::NineSweep {
                    spec: spec()?,
                    th: th()?,
                    co: classify_options(cfg, sweep_defaults())?,
                    a,
                    n,
                    gamma_amp: cfg.f64_or("sweep", "gamma_amp", 0.0)?,
                    gamma_seed: cfg.u64_or("sweep", "gamma_seed", 1)?,
                }
            }
            "ejection" => {
                section_keys(cfg, "ejection", &["eps", "stable_eps"])?;
                let eps = cfg.list_or("ejection", "eps", &[1e-4, 1e-3])?;
                if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) {
                    return Err(Error::Config {
                        line: 0,
                        key: "ejection.eps".into(),
                        msg: "need positive amplitudes".into(),
                    });
                }
                Plan::Ejection {
                    spec: spec()?,
                    th: th()?,
                    co: classify_options(cfg, ClassifyOptions::default())?,
                    eps,
                    stable_eps: cfg.f64_or("ejection", "stable_eps", 1e-3)?,
                }
            }
            "one-pass" => {
                section_keys(cfg, "audit", &["runs", "r", "eps_min", "eps_max", "gamma_amp"])?;
                let runs = cfg.usize_or("audit", "runs", 50)?;
                if runs == 0 {
                    return Err(Error::Config {
                        line: 0,
                        key: "audit.runs".into(),
                        msg: "empty audit campaign".into(),
                    });
                }
                let (eps_min, eps_max) = (cfg.f64_or("audit", "eps_min", 1e-3)?, cfg.f64_or("audit", "eps_max", 5e-3)?);
                if !(eps_min > 0.0 && eps_max >= eps_min) {
                    return Err(Error::Config {
                        line: 0,
                        key: "audit.eps_min".into(),
                        msg: "need 0 < eps_min <= eps_max".into(),
                    });
                }
                Plan::OnePass {
                    spec: spec()?,
                    th: th()?,
                    co: classify_options(
                        cfg,
                        ClassifyOptions { dt: 2e-3, dt_sample: 0.02, t_confirm: 10.0, ..ClassifyOptions::default() },
                    )?,
                    runs,
                    r: cfg.f64_or("audit", "r", 0.05)?,
                    eps_min,
                    eps_max,
                    gamma_amp: cfg.f64_or("audit", "gamma_amp", 1e-3)?,
                }
            }
            "bisect" => {
                section_keys(
                    cfg,
                    "bisect",
                    &["family", "lo", "hi", "tol", "max_iter", "eps_minus", "gamma_amp", "gamma_seed"],
                )?;
                let family = match cfg.str_or("bisect", "family", "modes") {
                    "scaled-q" => BisectFamily::ScaledQ,
                    "modes" => BisectFamily::Modes {
                        eps_minus: cfg.f64_or("bisect", "eps_minus", 5e-3)?,
                        gamma_amp: cfg.f64_or("bisect", "gamma_amp", 1e-3)?,
                        gamma_seed: cfg.u64_or("bisect", "gamma_seed", 5)?,
                    },
                    other => {
                        return Err(Error::Config {
                            line: 0,
                            key: "bisect.family".into(),
                            msg: format!("unknown family `{other}`"),
                        })
                    }
                };
                let (dlo, dhi) = if family == BisectFamily::ScaledQ { (-0.1, 0.1) } else { (-0.01, 0.01) };
                let d = BisectOptions::default();
                Plan::Bisect {
                    spec: spec()?,
                    th: th()?,
                    bo: BisectOptions {
                        tol: cfg.f64_or("bisect", "tol", d.tol)?,
                        max_iter: cfg.usize_or("bisect", "max_iter", d.max_iter)?,
                        classify: classify_options(cfg, d.classify)?,
                    },
                    family,
                    lo: cfg.f64_or("bisect", "lo", dlo)?,
                    hi: cfg.f64_or("bisect", "hi", dhi)?,
                }
            }
            "probe-resolvent" => {
                section_keys(cfg, "resolvent", &["z_file", "project", "eps", "re_z", "r", "n"])?;
                let d = ResolventOptions::default();
                Plan::Resolvent {
                    spec: spec()?,
                    zs: cfg.get("resolvent", "z_file").map(|p| read_z_file(Path::new(p))).transpose()?,
                    ro: ResolventOptions {
                        project: cfg.bool_or("resolvent", "project", true)?,
                        r: cfg.f64_or("resolvent", "r", d.r)?,
                        n: cfg.usize_or("resolvent", "n", d.n)?,
                        ..d
                    },
                    eps: cfg.list_or("resolvent", "eps", &[1e-1, 1e-2, 1e-3])?,
                    re_z: cfg.f64_or("resolvent", "re_z", 1.5)?,
                }
            }
            "probe-kernel" => {
                section_keys(cfg, "kernel", &["j"])?;
                let js = cfg.list_or("kernel", "j", &[0.0, 1.0, 2.0, 3.0, 4.0])?;
                if js.is_empty() || js.iter().any(|j| *j < 0.0 || j.fract() != 0.0 || *j > 12.0) {
                    return Err(Error::Config {
                        line: 0,
                        key: "kernel.j".into(),
                        msg: "j must be integers in 0..=12".into(),
                    });
                }
                Plan::Kernel { js: js.iter().map(|j| *j as u32).collect() }
            }
            "traveling-wave" => {
                section_keys(
                    cfg,
                    "tw",
                    &[
                        "p",
                        "statics_l",
                        "statics_n",
                        "statics_n_radial",
                        "write_profile",
                        "velocity",
                        "t_end",
                        "dt",
                        "control_every",
                    ],
                )?;
                let spec = spec()?;
                let velocity = if cfg.bool_or("tw", "velocity", true)? {
                    if !matches!(spec, GridSpec::Box { .. }) {
                        return Err(Error::Config {
                            line: 0,
                            key: "grid.mode".into(),
                            msg: "velocity law needs a box grid".into(),
                        });
                    }
                    let d = VelocityOptions::default();
                    Some(VelocityOptions {
                        dt: cfg.f64_or("tw", "dt", d.dt)?,
                        t_end: cfg.f64_or("tw", "t_end", d.t_end)?,
                        control_every: cfg.f64_or("tw", "control_every", d.control_every)?,
                        suppress: true,
                    })
                } else {
                    None
                };
                Plan::TravelingWave {
                    spec,
                    p: cfg.vec3_or("tw", "p", [0.2, 0.0, 0.0])?,
                    statics: {
                        let n = cfg.usize_or("tw", "statics_n", 256)?;
                        TwGrid {
                            l: cfg.f64_or("tw", "statics_l", 28.0)?,
                            n,
                            n_radial: cfg.usize_or("tw", "statics_n_radial", 2047)?,
                            write_profile: cfg.bool_or("tw", "write_profile", n <= 128)?,
                        }
                    },
                    velocity,
                }
            }
            other => unreachable!("checked experiment name {other}"),
        };
        Ok(plan)
    }

    fn execute(&self, _cfg: &Config, seed: u64, jobs: usize, rd: &mut RunDir) -> Result<Report> {
        match self {
            Plan::GroundState { spec } => ground_state_experiment(spec, rd),
            Plan::Spectrum { spec, q_file, gap, matrix_grid } => {
                spectrum_experiment(spec, q_file.as_deref(), gap, *matrix_grid, rd)
            }
            Plan::Evolve { spec, th, recipe, eo } => evolve_experiment(spec, th, recipe, eo, rd),
            Plan::Classify { spec, th, recipe, co, expect } => {
                classify_experiment(spec, th, recipe, co, expect.as_deref(), rd)
            }
            Plan::NineSweep { spec, th, co, a, n, gamma_amp, gamma_seed } => {
                nine_sweep_experiment(spec, th, co, *a, *n, *gamma_amp, *gamma_seed, jobs, rd)
            }
            Plan::Ejection { spec, th, co, eps, stable_eps } => {
                ejection_experiment(spec, th, co, eps, *stable_eps, jobs, rd)
            }
            Plan::OnePass { spec, th, co, runs, r, eps_min, eps_max, gamma_amp } => {
                one_pass_experiment(spec, th, co, *runs, *r, (*eps_min, *eps_max), *gamma_amp, seed, jobs, rd)
            }
            Plan::Bisect { spec, th, bo, family, lo, hi } => bisect_experiment(spec, th, bo, family, *lo, *hi, rd),
            Plan::Resolvent { spec, zs, ro, eps, re_z } => {
                resolvent_experiment(spec, zs.as_deref(), ro, eps, *re_z, rd)
            }
            Plan::Kernel { js } => kernel_experiment(js, jobs, rd),
            Plan::TravelingWave { spec, p, statics, velocity } => {
                traveling_wave_experiment(spec, *p, *statics, velocity.as_ref(), rd)
            }
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn radial_spec(spec: &GridSpec) -> Result<RadialGrid> {
    match *spec {
        GridSpec::Radial { r_max, n, .. } => RadialGrid::new(r_max, n),
        GridSpec::Box { .. } => Err(Error::InvalidArgument("this experiment runs on a radial grid".into())),
    }
}

fn spec_tol(spec: &GridSpec) -> f64 {
    match *spec {
        GridSpec::Radial { tol, .. } | GridSpec::Box { tol, .. } => tol,
    }
}

/// Identities of the ground state and its relative errors.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Identities {
    pub a_over_b: f64,
    pub c4_over_b: f64,
    pub j_over_b: f64,
    pub k0_over_b: f64,
    pub k2_over_b: f64,
    pub worst: f64,
}

pub fn ground_state_identities(gs: &crate::ground_state::GroundState) -> Identities {
    let g = gs.grid_ref();
    let (a_over_b, c4_over_b, j_over_b) = (gs.a / gs.b, gs.c4 / gs.b, gs.jq / gs.b);
    let (k0_over_b, k2_over_b) = (k0(&g, &gs.q) / gs.b, k2(&g, &gs.q) / gs.b);
    let worst = [rel(a_over_b, 3.0), rel(c4_over_b, 4.0), rel(j_over_b, 1.0), k0_over_b.abs(), k2_over_b.abs()]
        .into_iter()
        .fold(0.0, f64::max);
    Identities { a_over_b, c4_over_b, j_over_b, k0_over_b, k2_over_b, worst }
}

fn ground_state_experiment(spec: &GridSpec, rd: &mut RunDir) -> Result<Report> {
    let grid = radial_spec(spec)?;
    let gs = compute_ground_state(grid, spec_tol(spec))?;
    let id = ground_state_identities(&gs);
    rd.write_json("ground_state.json", &json!({ "summary": gs.summary(), "identities": id }))?;
    write_snapshot(&rd.file("q.bin")?, &gs.q_field(), 0.0)?;
    Ok(Report {
        assertions: vec![Assertion::new(
            "identities within 1e-5",
            id.worst <= 1e-5,
            format!("worst relative deviation {:.3e}", id.worst),
        )],
        summary: json!({ "summary": gs.summary(), "identities": id }),
        recipe: None,
    })
}

fn spectrum_experiment(
    spec: &GridSpec,
    q_file: Option<&Path>,
    gap: &GapOptions,
    mg: (f64, usize),
    rd: &mut RunDir,
) -> Result<Report> {
    let grid = radial_spec(spec)?;
    let gs = match q_file {
        Some(p) => {
            let s = crate::field::read_snapshot(p)?;
            if s.field.grid() != &Grid::Radial(grid) {
                return Err(Error::GridMismatch(format!("{} is not on the configured radial grid", p.display())));
            }
            ground_state_from_samples(grid, &s.field.re(), spec_tol(spec))?
        }
        None => compute_ground_state(grid, spec_tol(spec))?,
    };
    let lin = compute_linearization(&gs)?;
    let rep = verify_gap(&lin, gap)?;
    let sum = lin.summary();
    let op = assemble_matrix_l(&gs, RadialGrid::new(mg.0, mg.1)?)?;
    let (mp, mm) = op.eigen_residuals();
    rd.write_json("gap.json", &rep)?;
    rd.write_json("linearization.json", &json!({ "summary": sum, "matrix_eigen_residuals": [mp, mm] }))?;
    let a = vec![
        Assertion::new("one negative eigenvalue", rep.negative_count == 1, format!("{}", rep.negative_count)),
        Assertion::new("no eigenvalue in (0, 1]", rep.count_in_0_1 == 0, format!("{}", rep.count_in_0_1)),
        Assertion::new(
            "threshold resonance absent",
            rep.resonance.pass,
            format!("increment ratio {:.3}", rep.resonance.increment_ratio),
        ),
        Assertion::new(
            "k^2 agrees across discretizations",
            rep.k2_rel_diff <= 1e-4,
            format!("{:.3e}", rep.k2_rel_diff),
        ),
        Assertion::new(
            "generalized eigenrelations",
            sum.gplus_residual <= 1e-5 && sum.gminus_residual <= 1e-5,
            format!("{:.3e} {:.3e}", sum.gplus_residual, sum.gminus_residual),
        ),
        Assertion::new("omega(g+, g-) = 1", (sum.omega_gp_gm - 1.0).abs() <= 1e-6, format!("{:.12}", sum.omega_gp_gm)),
        Assertion::new("vector eigenpair residuals", mp <= 1e-5 && mm <= 1e-5, format!("{mp:.3e} {mm:.3e}")),
    ];
    Ok(Report { assertions: a, summary: json!({ "linearization": sum, "gap_pass": rep.pass }), recipe: None })
}

fn monitors<'a>(ctx: &'a Context) -> Monitors<'a> {
    Monitors { basis: Some(&ctx.basis), th: ctx.th, sign: true, hook: None }
}

fn evolve_experiment(
    spec: &GridSpec,
    th: &Thresholds,
    recipe: &Recipe,
    eo: &EvolveOptions,
    rd: &mut RunDir,
) -> Result<Report> {
    let ctx = Context::build(*spec, *th)?;
    let u0 = recipe.build(&ctx)?;
    let tr = evolve(&u0, eo, &monitors(&ctx))?;
    rd.write_trajectory("", &tr)?;
    let e0 = tr.samples[0].f.e;
    let drift = tr.samples.iter().map(|s| (s.f.e - e0).abs()).fold(0.0, f64::max) / (e0.abs() * tr.t_final.max(eo.dt));
    let summary = json!({
        "status": tr.status,
        "t_final": tr.t_final,
        "steps": tr.steps,
        "energy_drift_per_time": drift,
        "k": ctx.basis.k,
        "J": ctx.basis.jq,
        "evolve": eo,
        "thresholds": th,
        "grid": spec,
    });
    rd.write_json("trajectory.json", &summary)?;
    let ok = !matches!(tr.status, Status::Aborted { .. });
    Ok(Report {
        assertions: vec![Assertion::new("run not aborted", ok, format!("{:?}", tr.status))],
        summary,
        recipe: Some(serde_json::to_value(recipe)?),
    })
}

fn diag_row(dir: &str, d: &Diagnostics) -> Vec<String> {
    let f = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
    vec![
        dir.to_string(),
        d.label.to_string(),
        format!("{:.6}", d.t_final),
        f(d.blowup_time),
        f(d.ejection_time),
        f(d.exit_time),
        d.sign_at_ejection.map(|s| s.to_string()).unwrap_or_default(),
        d.sign_persistent.to_string(),
        f(d.l4_first),
        f(d.l4_last),
        f(d.dq_min),
        f(d.dq_max),
    ]
}

const DIAG_HEADER: [&str; 12] = [
    "direction",
    "label",
    "t_final",
    "blowup_time",
    "ejection_time",
    "exit_time",
    "sign_at_ejection",
    "sign_persistent",
    "l4_first",
    "l4_last",
    "dq_min",
    "dq_max",
];

fn classify_experiment(
    spec: &GridSpec,
    th: &Thresholds,
    recipe: &Recipe,
    co: &ClassifyOptions,
    expect: Option<&str>,
    rd: &mut RunDir,
) -> Result<Report> {
    let ctx = Context::build(*spec, *th)?;
    let u0 = recipe.build(&ctx)?;
    let em = check_energy_window(&u0, &ctx.basis, th)?;
    let (tf, df) = classify_run(&u0, &ctx.basis, th, co)?;
    let (tb, db) = classify_run(&conjugate(&u0), &ctx.basis, th, co)?;
    rd.write_trajectory("forward/", &tf)?;
    rd.write_trajectory("backward/", &tb)?;
    let mut w = csv::Writer::from_path(rd.file("diagnostics.csv")?)?;
    w.write_record(DIAG_HEADER)?;
    w.write_record(diag_row("forward", &df))?;
    w.write_record(diag_row("backward", &db))?;
    w.flush()?;
    let code = format!("{}{}", df.label, db.label);
    let fs = evaluate(&u0);
    let labels = json!({
        "code": code,
        "forward": df,
        "backward": db,
        "minimal_energy": em,
        "J": ctx.basis.jq,
        "energy": fs.e,
        "k0": fs.k0,
    });
    rd.write_json("labels.json", &labels)?;
    let mut a = vec![Assertion::new(
        "blowup status implies B",
        tf.status == Status::Completed || df.label == Label::Blowup,
        format!("{:?}", tf.status),
    )];
    if fs.e < ctx.basis.jq {
        let want = if fs.k0 > 0.0 { Label::Scatter } else { Label::Blowup };
        let agree = [&df, &db].iter().all(|d| !d.label.is_definite() || d.label == want);
        a.push(Assertion::new(
            "definite labels below J follow the sign of K0",
            agree,
            format!("E {:.6} < J {:.6}, K0 {:.6e}, code {code}", fs.e, ctx.basis.jq, fs.k0),
        ));
    }
    if let Some(e) = expect {
        a.push(Assertion::new("expected label", e == code, format!("expected {e}, got {code}")));
    }
    Ok(Report {
        assertions: a,
        summary: json!({ "labels": labels, "classify": co, "thresholds": th }),
        recipe: Some(serde_json::to_value(recipe)?),
    })
}

/// One cell of the nine-set sweep.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub eps_plus: f64,
    pub eps_minus: f64,
    pub energy: f64,
    /// Virial-type functional `K0` of the initial data.
    pub k0: f64,
    pub code: String,
    pub forward: Option<Diagnostics>,
    pub backward: Option<Diagnostics>,
    pub error: Option<String>,
}

/// Symmetric sweep coordinates `-a, ..., a` with `n` points, exact zero on odd `n`.
pub fn sweep_axis(a: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    let h = (n - 1) as f64 / 2.0;
    (0..n).map(|i| a * (i as f64 - h) / h).collect()
}

/// Classifies `frak Q + e+ g+ + e- g- + gamma` over an `n x n` grid, in index order.
#[allow(clippy::too_many_arguments)]
pub fn nine_sweep(
    basis: &ModeBasis,
    th: &Thresholds,
    co: &ClassifyOptions,
    a: f64,
    n: usize,
    gamma: Option<&Field>,
    jobs: usize,
) -> Result<Vec<SweepRow>> {
    if n == 0 {
        return Err(Error::InvalidArgument("empty sweep grid".into()));
    }
    let axis = sweep_axis(a, n);
    let cells: Vec<(f64, f64)> = axis.iter().flat_map(|&p| axis.iter().map(move |&m| (p, m))).collect();
    par_map(jobs, &cells, |index, &(ep, em)| {
        let row = |code: String, f, b, e: f64, k0: f64, error| SweepRow {
            index,
            eps_plus: ep,
            eps_minus: em,
            energy: e,
            k0,
            code,
            forward: f,
            backward: b,
            error,
        };
        let build = || -> Result<Field> {
            let u = basis.state.axpy(ep, &basis.gplus)?.axpy(em, &basis.gminus)?;
            match gamma {
                Some(g) => u.add(g),
                None => Ok(u),
            }
        };
        let u = match build() {
            Ok(u) => u,
            Err(e) => return row("X".into(), None, None, f64::NAN, f64::NAN, Some(e.to_string())),
        };
        let fs = evaluate(&u);
        match crate::classifier::classify_nine(&u, basis, th, co) {
            Ok(l) => row(l.code(), Some(l.forward), Some(l.backward), fs.e, fs.k0, None),
            Err(err) => row("X".into(), None, None, fs.e, fs.k0, Some(err.to_string())),
        }
    })
}

pub const NINE_CODES: [&str; 9] = ["SS", "BB", "SB", "BS", "TT", "ST", "TS", "BT", "TB"];

#[allow(clippy::too_many_arguments)]
fn nine_sweep_experiment(
    spec: &GridSpec,
    th: &Thresholds,
    co: &ClassifyOptions,
    a: f64,
    n: usize,
    gamma_amp: f64,
    gamma_seed: u64,
    jobs: usize,
    rd: &mut RunDir,
) -> Result<Report> {
    let ctx = Context::build(*spec, *th)?;
    let gamma = if gamma_amp > 0.0 { Some(dispersive_component(&ctx.basis, gamma_amp, gamma_seed)?) } else { None };
    let rows = nine_sweep(&ctx.basis, th, co, a, n, gamma.as_ref(), jobs)?;
    let mut w = csv::Writer::from_path(rd.file("labels.csv")?)?;
    w.write_record([
        "index",
        "eps_plus",
        "eps_minus",
        "E_minus_J",
        "K0",
        "code",
        "fwd_ejection",
        "bwd_ejection",
        "fwd_exit",
        "bwd_exit",
        "error",
    ])?;
    let f = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
    for r in &rows {
        w.write_record([
            r.index.to_string(),
            format!("{:.6e}", r.eps_plus),
            format!("{:.6e}", r.eps_minus),
            format!("{:.6e}", r.energy - ctx.basis.jq),
            format!("{:.6e}", r.k0),
            r.code.clone(),
            f(r.forward.as_ref().and_then(|d| d.ejection_time)),
            f(r.backward.as_ref().and_then(|d| d.ejection_time)),
            f(r.forward.as_ref().and_then(|d| d.exit_time)),
            f(r.backward.as_ref().and_then(|d| d.exit_time)),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    let mut counts = std::collections::BTreeMap::new();
    for r in &rows {
        *counts.entry(r.code.clone()).or_insert(0usize) += 1;
    }
    let missing: Vec<&str> = NINE_CODES.iter().copied().filter(|c| !counts.contains_key(*c)).collect();
    // The grid is symmetric and conjugation swaps the mode coefficients when gamma = 0.
    let mut conj_bad = 0;
    if gamma.is_none() {
        for r in &rows {
            let (i, j) = (r.index / n, r.index % n);
            let t = &rows[j * n + i];
            if let (Some(b), Some(f2)) = (&r.backward, &t.forward) {
                if b.label != f2.label {
                    conj_bad += 1;
                }
            }
        }
    }
    // Below J the labels are fixed by the sign of K0; T and U only mean the horizon ran out.
    let below: Vec<&SweepRow> = rows.iter().filter(|r| r.energy < ctx.basis.jq).collect();
    let mixed = below.iter().filter(|r| r.code == "SB" || r.code == "BS").count();
    let sign_bad = below
        .iter()
        .filter(|r| {
            let want = if r.k0 > 0.0 { Label::Scatter } else { Label::Blowup };
            [&r.forward, &r.backward].into_iter().flatten().any(|d| d.label.is_definite() && d.label != want)
        })
        .count();
    let errors = rows.iter().filter(|r| r.error.is_some()).count();
    let summary = json!({
        "counts": counts,
        "missing": missing,
        "axis": sweep_axis(a, n),
        "t_trap": co.trap_horizon(ctx.basis.k),
        "classify": co,
        "thresholds": th,
        "grid": spec,
        "errors": errors,
    });
    rd.write_json("counts.json", &summary)?;
    let a = vec![
        Assertion::new("all nine labels present", missing.is_empty(), format!("missing {missing:?}")),
        Assertion::new("conjugation consistency", conj_bad == 0, format!("{conj_bad} mismatches")),
        Assertion::new("no mixed code below J", mixed == 0, format!("{mixed} of {} cells below J", below.len())),
        Assertion::new(
            "definite labels below J follow the sign of K0",
            sign_bad == 0,
            format!("{sign_bad} of {} cells below J", below.len()),
        ),
    ];
    Ok(Report { assertions: a, summary, recipe: None })
}

fn ejection_experiment(
    spec: &GridSpec,
    th: &Thresholds,
    co: &ClassifyOptions,
    eps: &[f64],
    stable_eps: f64,
    jobs: usize,
    rd: &mut RunDir,
) -> Result<Report> {
    let ctx = Context::build(*spec, *th)?;
    let b = &ctx.basis;
    let fits = par_map(jobs, eps, |_, &e| -> Result<Option<crate::classifier::EjectionFit>> {
        let (tr, _) = classify_run(&b.state.axpy(e, &b.gplus)?, b, th, co)?;
        Ok(ejection_fit(&tr, th))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (ts, _) = classify_run(&b.state.axpy(stable_eps, &b.gminus)?, b, th, co)?;
    let stable = ejection_fit(&ts, th);
    let mut w = csv::Writer::from_path(rd.file("ejection.csv")?)?;
    w.write_record(["eps", "exponent", "k", "rel_error", "t0", "t1", "points"])?;
    let mut a = Vec::new();
    for (e, f) in eps.iter().zip(&fits) {
        match f {
            Some(f) => {
                w.write_record([
                    format!("{e:e}"),
                    format!("{:.8}", f.exponent),
                    format!("{:.8}", b.k),
                    format!("{:.3e}", rel(f.exponent, b.k)),
                    format!("{:.4}", f.t0),
                    format!("{:.4}", f.t1),
                    f.points.to_string(),
                ])?;
                a.push(Assertion::new(
                    &format!("exponent within 5% of k at eps {e:e}"),
                    rel(f.exponent, b.k) <= 0.05,
                    format!("{:.5} vs k {:.5}", f.exponent, b.k),
                ));
            }
            None => a.push(Assertion::new(&format!("qualifying segment at eps {e:e}"), false, "none")),
        }
    }
    w.flush()?;
    let ex: Vec<f64> = fits.iter().flatten().map(|f| f.exponent).collect();
    if ex.len() >= 2 {
        let spread = ex.iter().cloned().fold(f64::MIN, f64::max) / ex.iter().cloned().fold(f64::MAX, f64::min) - 1.0;
        a.push(Assertion::new("exponent invariant within 2%", spread <= 0.02, format!("spread {spread:.3e}")));
    }
    a.push(Assertion::new("stable push has no qualifying segment", stable.is_none(), format!("{stable:?}")));
    Ok(Report {
        assertions: a,
        summary: json!({ "fits": fits, "k": b.k, "stable": stable, "classify": co }),
        recipe: None,
    })
}

/// Random trapped-then-ejected data for the audit: unstable push of random sign and size,
/// random stable component and a seeded dispersive component, below `J + epsStar^2`.
pub fn audit_initial_data(
    basis: &ModeBasis,
    th: &Thresholds,
    seed: u64,
    i: usize,
    eps: (f64, f64),
    gamma_amp: f64,
) -> Result<(Field, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64));
    for _ in 0..64 {
        let mag = if eps.1 > eps.0 { rng.random_range(eps.0..eps.1) } else { eps.0 };
        let ep = if rng.random_bool(0.5) { mag } else { -mag };
        let em = rng.random_range(-eps.1..=eps.1);
        let mut u = basis.state.axpy(ep, &basis.gplus)?.axpy(em, &basis.gminus)?;
        if gamma_amp > 0.0 {
            u = u.add(&dispersive_component(basis, gamma_amp, rng.random())?)?;
        }
        if check_energy_window(&u, basis, th).is_ok() {
            return Ok((u, ep, em));
        }
    }
    Err(Error::OutOfRegion("could not draw audit data below J + epsStar^2".into()))
}

#[allow(clippy::too_many_arguments)]
fn one_pass_experiment(
    spec: &GridSpec,
    th: &Thresholds,
    co: &ClassifyOptions,
    runs: usize,
    r: f64,
    eps: (f64, f64),
    gamma_amp: f64,
    seed: u64,
    jobs: usize,
    rd: &mut RunDir,
) -> Result<Report> {
    if !(r > 2.0 * th.eps_star && r <= th.r_star) {
        return Err(Error::InvalidArgument(format!("audit radius {r} outside (2 epsStar, Rstar]")));
    }
    let ctx = Context::build(*spec, *th)?;
    let b = &ctx.basis;
    let idx: Vec<usize> = (0..runs).collect();
    let rows = par_map(jobs, &idx, |_, &i| -> Result<(f64, f64, f64, Label, usize, usize)> {
        let (u, ep, em) = audit_initial_data(b, th, seed, i, eps, gamma_amp)?;
        let (tr, d) = classify_run(&u, b, th, co)?;
        let rep = one_pass_audit(&tr, r, th)?;
        Ok((ep, em, energy(&u) - b.jq, d.label, rep.exits.len(), rep.violations()))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_path(rd.file("audit.csv")?)?;
    w.write_record(["run", "eps_plus", "eps_minus", "E_minus_J", "label", "exits", "returns"])?;
    for (i, x) in rows.iter().enumerate() {
        w.write_record([
            i.to_string(),
            format!("{:.6e}", x.0),
            format!("{:.6e}", x.1),
            format!("{:.6e}", x.2),
            x.3.to_string(),
            x.4.to_string(),
            x.5.to_string(),
        ])?;
    }
    w.flush()?;
    let ejected = rows.iter().filter(|x| x.4 > 0).count();
    let violations: usize = rows.iter().map(|x| x.5).sum();
    // Auditor self-test on an injected oscillating series.
    let synthetic: Vec<(f64, f64)> =
        (0..400).map(|i| (i as f64 * 0.05, r + 0.8 * r * (i as f64 * 0.05).sin())).collect();
    let st = one_pass_scan(&synthetic, r);
    let a = vec![
        Assertion::new("at least 50 ejected trajectories", ejected >= runs.min(50), format!("{ejected} of {runs}")),
        Assertion::new("no return below R", violations == 0, format!("{violations} returns")),
        Assertion::new(
            "auditor detects synthetic violations",
            st.violations() >= 2,
            format!("{} detected", st.violations()),
        ),
    ];
    Ok(Report {
        assertions: a,
        summary: json!({ "runs": runs, "ejected": ejected, "violations": violations, "r": r, "classify": co }),
        recipe: None,
    })
}

fn bisect_experiment(
    spec: &GridSpec,
    th: &Thresholds,
    bo: &BisectOptions,
    family: &BisectFamily,
    lo: f64,
    hi: f64,
    rd: &mut RunDir,
) -> Result<Report> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidArgument(format!("bracket [{lo}, {hi}] is not an ordered finite interval")));
    }
    let ctx = Context::build(*spec, *th)?;
    let b = &ctx.basis;
    let gamma = match family {
        BisectFamily::Modes { gamma_amp, gamma_seed, .. } if *gamma_amp > 0.0 => {
            Some(dispersive_component(b, *gamma_amp, *gamma_seed)?)
        }
        _ => None,
    };
    let fam = |s: f64| -> Result<Field> {
        match family {
            BisectFamily::ScaledQ => Ok(b.state.scale(1.0 + s)),
            BisectFamily::Modes { eps_minus, .. } => {
                let u = b.state.axpy(s, &b.gplus)?.axpy(*eps_minus, &b.gminus)?;
                match &gamma {
                    Some(g) => u.add(g),
                    None => Ok(u),
                }
            }
        }
    };
    let res = bisect_manifold(&fam, lo, hi, b, th, bo)?;
    if let Some(run) = &res.run {
        rd.write_trajectory("", run)?;
    }
    let mut w = csv::Writer::from_path(rd.file("steps.csv")?)?;
    w.write_record(["step", "s", "label", "exit_time"])?;
    for (i, s) in res.steps.iter().enumerate() {
        w.write_record([
            i.to_string(),
            format!("{:.17e}", s.s),
            s.label.to_string(),
            s.exit_time.map(|t| format!("{t:.4}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    rd.write_json("threshold.json", &res)?;
    let k = b.k;
    let mut a = vec![Assertion::new(
        "threshold located",
        res.hi - res.lo <= bo.tol.max(4.0 * f64::EPSILON * res.hi.abs().max(res.lo.abs()))
            || res.terminal == Label::Trapped,
        format!("width {:.3e}", res.hi - res.lo),
    )];
    match family {
        BisectFamily::ScaledQ => {
            a.push(Assertion::new("threshold at s = 0", res.threshold.abs() <= 1e-10, format!("{:e}", res.threshold)));
        }
        BisectFamily::Modes { .. } => {
            let margin = res.trapped_duration - res.trapped_lo.max(res.trapped_hi);
            a.push(Assertion::new(
                "trapped at least 3/k longer than endpoints",
                margin >= 3.0 / k,
                format!("margin {margin:.3} vs 3/k {:.3}", 3.0 / k),
            ));
            let rate_ok = res.lambda_minus_rate.is_some_and(|r| rel(r, k) <= 0.15);
            a.push(Assertion::new(
                "lambda- decays at rate k within 15%",
                rate_ok,
                format!("{:?} vs k {k:.5}", res.lambda_minus_rate),
            ));
            let rel_ok = res.relation_constant.is_some_and(|c| c <= RELATION_BOUND) && res.relation_points >= 10;
            a.push(Assertion::new(
                "stable-mode relation residual O(dQ^2)",
                rel_ok,
                format!("constant {:?} over {} points", res.relation_constant, res.relation_points),
            ));
        }
    }
    Ok(Report { assertions: a, summary: serde_json::to_value(&res)?, recipe: Some(serde_json::to_value(family)?) })
}

/// Bound on `|lambda+ + integral| / dQ^2` accepted as quadratic.
pub const RELATION_BOUND: f64 = 10.0;

fn resolvent_experiment(
    spec: &GridSpec,
    zs: Option<&[Complex64]>,
    ro: &ResolventOptions,
    eps: &[f64],
    re_z: f64,
    rd: &mut RunDir,
) -> Result<Report> {
    let gs = compute_ground_state(radial_spec(spec)?, spec_tol(spec))?;
    let mut w = csv::Writer::from_path(rd.file("resolvent.csv")?)?;
    w.write_record(["z_re", "z_im", "projected", "norm", "dist", "error"])?;
    let mut a = Vec::new();
    let mut write = |s: &crate::linearization::ResolventSample| -> Result<()> {
        w.write_record([
            format!("{:.6e}", s.z_re),
            format!("{:.6e}", s.z_im),
            s.projected.to_string(),
            s.norm.map(|x| format!("{x:.6e}")).unwrap_or_default(),
            format!("{:.6e}", s.dist),
            s.error.clone().unwrap_or_default(),
        ])?;
        Ok(())
    };
    let mut summary = json!({});
    match zs {
        Some(zs) => {
            let out = resolvent_probe(&gs, zs, ro)?;
            for s in &out {
                write(s)?;
            }
            let ok = out.iter().all(|s| s.norm.is_some_and(f64::is_finite));
            a.push(Assertion::new("all norms finite", ok, format!("{} points", out.len())));
            summary["samples"] = serde_json::to_value(&out)?;
        }
        None => {
            let zs: Vec<Complex64> = eps.iter().map(|&e| Complex64::new(re_z, e)).collect();
            let proj = resolvent_probe(&gs, &zs, &ResolventOptions { project: true, ..ro.clone() })?;
            let k = compute_linearization(&gs)?.k;
            let zp: Vec<Complex64> = eps.iter().map(|&e| Complex64::new(e, -k)).collect();
            let unproj = resolvent_probe(&gs, &zp, &ResolventOptions { project: false, ..ro.clone() })?;
            for s in proj.iter().chain(&unproj) {
                write(s)?;
            }
            let norms: Vec<f64> = proj.iter().map(|s| s.norm.unwrap_or(f64::NAN)).collect();
            let ratio = norms.iter().cloned().fold(f64::MIN, f64::max) / norms.iter().cloned().fold(f64::MAX, f64::min);
            a.push(Assertion::new("projected ratio <= 10", ratio <= 10.0, format!("ratio {ratio:.3}")));
            let un: Vec<f64> = unproj.iter().map(|s| s.norm.unwrap_or(f64::NAN)).collect();
            let growth: Vec<f64> =
                un.windows(2).zip(eps.windows(2)).map(|(n, e)| (n[1] / n[0]) / (e[0] / e[1])).collect();
            let ok = !growth.is_empty() && growth.iter().all(|g| (0.8..=1.2).contains(g));
            a.push(Assertion::new(
                "unprojected norm grows like 1/eps near the eigenvalue",
                ok,
                format!("normalized growth {growth:?}"),
            ));
            summary = json!({ "projected": proj, "unprojected": unproj, "ratio": ratio, "k": k });
        }
    }
    w.flush()?;
    rd.write_json("resolvent.json", &summary)?;
    Ok(Report { assertions: a, summary, recipe: None })
}

fn kernel_experiment(js: &[u32], jobs: usize, rd: &mut RunDir) -> Result<Report> {
    let reps = par_map(jobs, js, |_, &j| kernel_probe(j, &KernelOptions::default()))?;
    let mut w = csv::Writer::from_path(rd.file("kernel.csv")?)?;
    w.write_record(["j", "c1", "c2", "max_err", "unconverged", "samples"])?;
    for r in &reps {
        w.write_record([
            r.j.to_string(),
            format!("{:.6e}", r.c1),
            format!("{:.6e}", r.c2),
            format!("{:.3e}", r.max_err),
            r.unconverged.to_string(),
            r.samples.len().to_string(),
        ])?;
    }
    w.flush()?;
    let mut sw = csv::Writer::from_path(rd.file("kernel_samples.csv")?)?;
    sw.write_record(["j", "t", "r", "abs", "err"])?;
    for r in &reps {
        for s in &r.samples {
            sw.write_record([
                r.j.to_string(),
                format!("{:.6e}", s.t),
                format!("{:.6e}", s.r),
                format!("{:.6e}", s.abs),
                format!("{:.3e}", s.err),
            ])?;
        }
    }
    sw.flush()?;
    let c1: Vec<f64> = reps.iter().map(|r| r.c1).collect();
    let ratio = c1.iter().cloned().fold(f64::MIN, f64::max) / c1.iter().cloned().fold(f64::MAX, f64::min);
    let unconverged: usize = reps.iter().map(|r| r.unconverged).sum();
    let a = vec![
        Assertion::new("C1 stable within factor 3", ratio <= 3.0, format!("C1 {c1:?}")),
        Assertion::new("quadrature converged", unconverged == 0, format!("{unconverged} samples")),
    ];
    Ok(Report { assertions: a, summary: json!({ "c1": c1, "ratio": ratio }), recipe: None })
}

/// Box of the static traveling-wave checks and the radial seed it is interpolated from.
#[derive(Clone, Copy, Debug, Serialize)]
struct TwGrid {
    l: f64,
    n: usize,
    n_radial: usize,
    write_profile: bool,
}

fn traveling_wave_experiment(
    spec: &GridSpec,
    p: [f64; 3],
    statics: TwGrid,
    velocity: Option<&VelocityOptions>,
    rd: &mut RunDir,
) -> Result<Report> {
    let (r_max, n_rad, tol) = match *spec {
        GridSpec::Radial { r_max, n, tol } => (r_max, n, tol),
        GridSpec::Box { r_max, n_radial, tol, .. } => (r_max, n_radial, tol),
    };
    let bp = BoostParams::new(p, [0.0; 3])?;
    // Interpolation error of the seed enters the residual through two derivatives.
    let seed = compute_ground_state(RadialGrid::new(r_max, statics.n_radial)?, tol.max(1e-10))?;
    let tw = traveling_wave(&seed, &bp, BoxGrid::new(statics.l, statics.n)?)?;
    if statics.write_profile {
        write_snapshot(&rd.file("tw.bin")?, &tw, 0.0)?;
    }
    let st = tw_statics(&tw, seed.jq, &bp)?;
    drop(tw);
    drop(seed);
    let gs = compute_ground_state(RadialGrid::new(r_max, n_rad)?, tol)?;
    let mut a = vec![
        Assertion::new("profile residual <= 1e-4", st.residual <= 1e-4, format!("{:.3e}", st.residual)),
        Assertion::new("E = J <p> within 1e-3", st.e_rel <= 1e-3, format!("{:.3e}", st.e_rel)),
        Assertion::new("P = J p within 1e-3", st.p_rel <= 1e-3, format!("{:.3e}", st.p_rel)),
    ];
    let mut summary = json!({ "statics": st });
    if let (Some(vo), GridSpec::Box { l, n, .. }) = (velocity, spec) {
        let bx = BoxGrid::new(*l, *n)?;
        let lin = compute_linearization(&gs)?;
        let basis = ModeBasis::boxed(&gs, &lin, bx, 1e-9)?;
        let u0 = box_traveling_wave(&gs, &bp, bx, 1e-10)?;
        let rep = velocity_law(&u0, bp.tau(), &basis, vo)?;
        let mut w = csv::Writer::from_path(rd.file("track.csv")?)?;
        w.write_record(["t", "x", "y", "z"])?;
        for (t, c) in &rep.track {
            w.write_record([
                format!("{t:.6}"),
                format!("{:.10e}", c[0]),
                format!("{:.10e}", c[1]),
                format!("{:.10e}", c[2]),
            ])?;
        }
        w.flush()?;
        a.push(Assertion::new(
            "velocity within 1e-2 of p/<p>",
            rep.completed && rep.error <= 1e-2,
            format!("measured {:?} expected {:?}", rep.measured, rep.expected),
        ));
        summary["velocity"] = json!({ "measured": rep.measured, "expected": rep.expected, "error": rep.error, "max_removed": rep.max_removed, "options": vo });
    }
    rd.write_json("traveling_wave.json", &summary)?;
    Ok(Report { assertions: a, summary, recipe: Some(json!({ "kind": "traveling-wave", "p": p })) })
}

/// Static checks of the interpolated traveling wave.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TwStatics {
    pub residual: f64,
    pub e: f64,
    pub p: [f64; 3],
    pub e_expected: f64,
    pub p_expected: [f64; 3],
    pub e_rel: f64,
    pub p_rel: f64,
}

pub fn tw_statics(u: &Field, jq: f64, bp: &BoostParams) -> Result<TwStatics> {
    let residual = profile_residual(u, bp.tau())?;
    let e = energy(u);
    let pm = momentum(u);
    let e_expected = jq * bp.bracket();
    let p_expected = [jq * bp.p[0], jq * bp.p[1], jq * bp.p[2]];
    let dp =
        ((pm[0] - p_expected[0]).powi(2) + (pm[1] - p_expected[1]).powi(2) + (pm[2] - p_expected[2]).powi(2)).sqrt();
    let pn = (p_expected[0].powi(2) + p_expected[1].powi(2) + p_expected[2].powi(2)).sqrt();
    let p_rel = if pn > 0.0 { dp / pn } else { dp / jq };
    Ok(TwStatics { residual, e, p: pm, e_expected, p_expected, e_rel: rel(e, e_expected), p_rel })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_axis_is_symmetric_with_zero() {
        let a = sweep_axis(0.0095, 21);
        assert_eq!(a.len(), 21);
        assert_eq!(a[10], 0.0);
        assert!((a[0] + 0.0095).abs() < 1e-15 && (a[20] - 0.0095).abs() < 1e-15);
        for i in 0..21 {
            assert_eq!(a[i], -a[20 - i]);
        }
        assert_eq!(sweep_axis(1.0, 1), vec![0.0]);
    }

    #[test]
    fn empty_sweep_is_rejected_before_any_work() {
        let root = tempfile::tempdir().unwrap();
        let cfg = Config::parse("experiment = nine-sweep\n[sweep]\nn = 0\n").unwrap();
        let opts = RunOptions { root: root.path().to_path_buf(), target: None, jobs: 1 };
        let t = Instant::now();
        assert!(matches!(run_experiment(&cfg, &opts), Err(Error::Config { .. })));
        assert!(t.elapsed().as_secs_f64() < 1.0);
        assert_eq!(std::fs::read_dir(root.path()).unwrap().count(), 0);
    }

    #[test]
    fn unknown_experiment_and_keys_are_config_errors() {
        let opts = RunOptions { root: std::env::temp_dir(), target: None, jobs: 1 };
        for text in [
            "experiment = nope\n",
            "experiment = evolve\n[recipe]\nkind = scaled-q\nbogus = 1\n",
            "experiment = evolve\n[weird]\na = 1\n",
        ] {
            let cfg = Config::parse(text).unwrap();
            assert!(matches!(run_experiment(&cfg, &opts), Err(Error::Config { .. })), "{text}");
        }
    }

    #[test]
    fn par_map_keeps_index_order() {
        let items: Vec<u64> = (0..50).collect();
        for jobs in [1, 3] {
            let out = par_map(jobs, &items, |i, x| (i as u64) * 1000 + x).unwrap();
            assert_eq!(out, (0..50).map(|i| i * 1001).collect::<Vec<_>>());
        }
    }
}
