//! Grids, shared ground-state data and initial-data recipes.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::Config;
use crate::boosts::{box_traveling_wave, BoostParams};
use crate::decomposition::{ModeBasis, Thresholds};
use crate::error::{Error, Result};
use crate::field::{read_snapshot, BoxGrid, Field, Grid, RadialGrid};
use crate::ground_state::{compute_ground_state, GroundState};
use crate::linearization::{compute_linearization, Linearization};

/// Discretization of a run.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum GridSpec {
    Radial {
        r_max: f64,
        n: usize,
        tol: f64,
    },
    /// The radial data seed the box ground state and eigenpair.
    Box {
        l: f64,
        n: usize,
        r_max: f64,
        n_radial: usize,
        tol: f64,
    },
}

impl GridSpec {
    pub const KEYS: &'static [&'static str] = &["mode", "r_max", "n", "tol", "l", "n_radial"];

    pub fn from_config(cfg: &Config) -> Result<GridSpec> {
        cfg.check_keys("grid", Self::KEYS)?;
        let tol = cfg.f64_or("grid", "tol", 1e-11)?;
        match cfg.str_or("grid", "mode", "radial") {
            "radial" => Ok(GridSpec::Radial {
                r_max: cfg.f64_or("grid", "r_max", 40.0)?,
                n: cfg.usize_or("grid", "n", 511)?,
                tol,
            }),
            "box" => Ok(GridSpec::Box {
                l: cfg.f64_or("grid", "l", 20.0)?,
                n: cfg.usize_or("grid", "n", 64)?,
                r_max: cfg.f64_or("grid", "r_max", 40.0)?,
                n_radial: cfg.usize_or("grid", "n_radial", 1023)?,
                tol: tol.max(1e-10),
            }),
            other => {
                Err(Error::Config { line: 0, key: "grid.mode".into(), msg: format!("unknown grid mode `{other}`") })
            }
        }
    }

    fn radial_grid(&self) -> Result<RadialGrid> {
        match *self {
            GridSpec::Radial { r_max, n, .. } => RadialGrid::new(r_max, n),
            GridSpec::Box { r_max, n_radial, .. } => RadialGrid::new(r_max, n_radial),
        }
    }
}

/// Ground state, linearization and mode basis on the run grid.
#[derive(Clone, Debug)]
pub struct Context {
    pub spec: GridSpec,
    pub gs: GroundState,
    pub lin: Linearization,
    pub basis: ModeBasis,
    pub th: Thresholds,
}

impl Context {
    pub fn build(spec: GridSpec, th: Thresholds) -> Result<Context> {
        th.validate()?;
        let tol = match spec {
            GridSpec::Radial { tol, .. } | GridSpec::Box { tol, .. } => tol,
        };
        let gs = compute_ground_state(spec.radial_grid()?, tol)?;
        let lin = compute_linearization(&gs)?;
        let basis = match spec {
            GridSpec::Radial { .. } => ModeBasis::radial(&lin),
            GridSpec::Box { l, n, tol, .. } => ModeBasis::boxed(&gs, &lin, BoxGrid::new(l, n)?, tol.max(1e-9))?,
        };
        Ok(Context { spec, gs, lin, basis, th })
    }

    pub fn grid(&self) -> Grid {
        *self.basis.grid()
    }
}

pub fn thresholds_from_config(cfg: &Config) -> Result<Thresholds> {
    cfg.check_keys("thresholds", &["delta_e", "delta_x", "delta_star", "r_star", "eps_star", "c_star"])?;
    let d = Thresholds::default();
    let th = Thresholds {
        delta_e: cfg.f64_or("thresholds", "delta_e", d.delta_e)?,
        delta_x: cfg.f64_or("thresholds", "delta_x", d.delta_x)?,
        delta_star: cfg.f64_or("thresholds", "delta_star", d.delta_star)?,
        r_star: cfg.f64_or("thresholds", "r_star", d.r_star)?,
        eps_star: cfg.f64_or("thresholds", "eps_star", d.eps_star)?,
        c_star: cfg.f64_or("thresholds", "c_star", d.c_star)?,
    };
    th.validate()?;
    Ok(th)
}

/// Constructor of initial data.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Recipe {
    /// `(c Q, 0)`.
    ScaledQ { c: f64 },
    /// `frak Q + eps_plus g+ + eps_minus g- + gamma`, with `gamma` a seeded smooth dispersive
    /// component of energy norm `gamma_amp`.
    QPlusModes { eps_plus: f64, eps_minus: f64, gamma_amp: f64, gamma_seed: u64 },
    /// Exact box traveling wave with momentum `p` centred at `q`.
    TravelingWave { p: [f64; 3], q: [f64; 3] },
    /// Binary snapshot on the run grid.
    File { path: PathBuf },
}

impl Recipe {
    pub const KEYS: &'static [&'static str] =
        &["kind", "c", "eps_plus", "eps_minus", "gamma_amp", "gamma_seed", "p", "q", "path"];

    pub fn from_config(cfg: &Config, section: &str) -> Result<Recipe> {
        cfg.check_keys(section, Self::KEYS)?;
        let kind = cfg.require(section, "kind")?;
        let r = match kind {
            "scaled-q" => Recipe::ScaledQ { c: cfg.f64_or(section, "c", 1.0)? },
            "q-plus-modes" => Recipe::QPlusModes {
                eps_plus: cfg.f64_or(section, "eps_plus", 0.0)?,
                eps_minus: cfg.f64_or(section, "eps_minus", 0.0)?,
                gamma_amp: cfg.f64_or(section, "gamma_amp", 0.0)?,
                gamma_seed: cfg.u64_or(section, "gamma_seed", 1)?,
            },
            "traveling-wave" => Recipe::TravelingWave {
                p: cfg.vec3_or(section, "p", [0.0; 3])?,
                q: cfg.vec3_or(section, "q", [0.0; 3])?,
            },
            "file" => Recipe::File { path: PathBuf::from(cfg.require(section, "path")?) },
            other => {
                return Err(Error::Config {
                    line: 0,
                    key: format!("{section}.kind"),
                    msg: format!("unknown recipe `{other}` (scaled-q, q-plus-modes, traveling-wave, file)"),
                })
            }
        };
        Ok(r)
    }

    /// Parses `kind` or `kind:key=value,key=value`; vectors use `;` between components.
    pub fn parse_spec(s: &str) -> Result<Recipe> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut cfg = Config::default();
        cfg.set("recipe", "kind", kind.trim());
        if kind.trim() == "file" {
            cfg.set("recipe", "path", rest.trim());
        } else {
            for item in rest.split(',').filter(|x| !x.trim().is_empty()) {
                let (k, v) = item.split_once('=').ok_or_else(|| Error::Config {
                    line: 0,
                    key: item.to_string(),
                    msg: "expected key=value in recipe".into(),
                })?;
                cfg.set("recipe", k.trim(), v.trim().replace(';', ","));
            }
        }
        Recipe::from_config(&cfg, "recipe")
    }

    /// Writes the recipe fields into `section` of `cfg`.
    pub fn to_config(&self, cfg: &mut Config, section: &str) {
        let join = |v: [f64; 3]| format!("{},{},{}", v[0], v[1], v[2]);
        match self {
            Recipe::ScaledQ { c } => {
                cfg.set(section, "kind", "scaled-q");
                cfg.set(section, "c", c.to_string());
            }
            Recipe::QPlusModes { eps_plus, eps_minus, gamma_amp, gamma_seed } => {
                cfg.set(section, "kind", "q-plus-modes");
                cfg.set(section, "eps_plus", eps_plus.to_string());
                cfg.set(section, "eps_minus", eps_minus.to_string());
                cfg.set(section, "gamma_amp", gamma_amp.to_string());
                cfg.set(section, "gamma_seed", gamma_seed.to_string());
            }
            Recipe::TravelingWave { p, q } => {
                cfg.set(section, "kind", "traveling-wave");
                cfg.set(section, "p", join(*p));
                cfg.set(section, "q", join(*q));
            }
            Recipe::File { path } => {
                cfg.set(section, "kind", "file");
                cfg.set(section, "path", path.display().to_string());
            }
        }
    }

    /// Checks parameters against the grid.
    pub fn validate(&self, ctx: &Context) -> Result<()> {
        match self {
            Recipe::ScaledQ { c } if !(*c > 0.0) => {
                Err(Error::InvalidArgument(format!("scaled-q needs c > 0, got {c}")))
            }
            Recipe::QPlusModes { gamma_amp, .. } if *gamma_amp < 0.0 => {
                Err(Error::InvalidArgument("gamma_amp must be non-negative".into()))
            }
            Recipe::TravelingWave { p, q } => {
                let Grid::Box(bx) = ctx.grid() else {
                    return Err(Error::InvalidArgument("traveling-wave data needs a box grid".into()));
                };
                let pn = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                if pn > 0.5 {
                    return Err(Error::InvalidArgument(format!("|p| = {pn} exceeds 0.5")));
                }
                if q.iter().any(|c| c.abs() > 0.25 * bx.l()) {
                    return Err(Error::InvalidArgument(
                        "traveling-wave center must lie within L/4 of the origin".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self, ctx: &Context) -> Result<Field> {
        self.validate(ctx)?;
        let b = &ctx.basis;
        match self {
            Recipe::ScaledQ { c } => Ok(b.state.scale(*c)),
            Recipe::QPlusModes { eps_plus, eps_minus, gamma_amp, gamma_seed } => {
                let mut u = b.state.axpy(*eps_plus, &b.gplus)?.axpy(*eps_minus, &b.gminus)?;
                if *gamma_amp > 0.0 {
                    u = u.add(&dispersive_component(b, *gamma_amp, *gamma_seed)?)?;
                }
                Ok(u)
            }
            Recipe::TravelingWave { p, q } => {
                let bx = *ctx.grid().boxed().expect("validated");
                box_traveling_wave(&ctx.gs, &BoostParams::new(*p, *q)?, bx, 1e-10)
            }
            Recipe::File { path } => {
                let s = read_snapshot(path)?;
                if s.field.grid() != &ctx.grid() {
                    return Err(Error::GridMismatch(format!("{} is not on the run grid", path.display())));
                }
                Ok(s.field)
            }
        }
    }
}

/// Smooth localized state from a seed, projected onto the dispersive subspace and scaled
/// to energy norm `amp`.
pub fn dispersive_component(basis: &ModeBasis, amp: f64, seed: u64) -> Result<Field> {
    let g = *basis.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u1 = vec![0.0; g.len()];
    let mut u2 = vec![0.0; g.len()];
    let points: Vec<[f64; 3]> = match &g {
        Grid::Radial(r) => r.nodes().iter().map(|&x| [x, 0.0, 0.0]).collect(),
        Grid::Box(bx) => (0..bx.len()).map(|i| bx.point(i)).collect(),
    };
    for _ in 0..3 {
        let a: f64 = rng.random_range(-1.0..1.0);
        let bcoef: f64 = rng.random_range(-1.0..1.0);
        let c0: f64 = rng.random_range(0.0..4.0);
        let w: f64 = rng.random_range(0.5..2.0);
        for (m, x) in points.iter().enumerate() {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            let e = (-((r - c0) / w).powi(2)).exp();
            u1[m] += a * e;
            u2[m] += bcoef * e;
        }
    }
    let f = Field::from_components(g, &u1, &u2)?;
    let (_, _, gamma) = basis.split(&f)?;
    let n = gamma.norm();
    if !(n > 0.0) {
        return Err(Error::Inconsistent("dispersive component vanished".into()));
    }
    Ok(gamma.scale(amp / n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recipe_specs_round_trip() {
        for s in [
            "scaled-q:c=0.9",
            "q-plus-modes:eps_plus=1e-3,eps_minus=-2e-3,gamma_amp=1e-4,gamma_seed=3",
            "traveling-wave:p=0.2;0;0",
        ] {
            let r = Recipe::parse_spec(s).unwrap();
            let mut cfg = Config::default();
            r.to_config(&mut cfg, "recipe");
            assert_eq!(Recipe::from_config(&cfg, "recipe").unwrap(), r);
        }
        assert_eq!(Recipe::parse_spec("file:/tmp/x.bin").unwrap(), Recipe::File { path: "/tmp/x.bin".into() });
        assert!(Recipe::parse_spec("bogus").is_err());
        assert!(Recipe::parse_spec("scaled-q:c=abc").is_err());
    }
}
