//! `nlkg` command-line front end. Every subcommand is translated into an experiment
//! configuration and executed through the run harness; the exit status is zero iff all
//! assertions of the run pass.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand};
use nlkg::field::read_snapshot;
use nlkg::harness::{output_root, run_experiment, Config, GridSpec, Recipe, RunOptions, RunOutcome};
use nlkg::Grid;

#[derive(Parser, Debug)]
#[command(name = "nlkg", version, about = "Cubic Klein-Gordon ground-state laboratory")]
struct Cli {
    /// Worker threads for sweeps and campaigns; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Root directory for run directories (overrides NLKG_OUT_ROOT).
    #[arg(long, global = true)]
    out_root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct GridArgs {
    /// Radial grid extent, or the radial seed extent for box runs.
    #[arg(long = "R")]
    r_max: Option<f64>,
    /// Radial nodes, or box points per side with `--box`.
    #[arg(long)]
    n: Option<usize>,
    /// Periodic box side length; selects the box grid.
    #[arg(long = "box")]
    box_l: Option<f64>,
    /// Relaxation tolerance of the ground state.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Exact run directory (default: <out-root>/<experiment>).
    #[arg(long)]
    run_dir: Option<PathBuf>,
    /// Extra `section.key=value` overrides.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    /// Seed recorded in the manifest and used by seeded campaigns.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment described by a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compute the radial ground state and print {Q0, a, b, c4, JQ, residual}.
    GroundState {
        #[command(flatten)]
        grid: GridArgs,
        /// Copy of the profile snapshot.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Verify the spectral gap and the unstable-mode eigenrelations.
    Spectrum {
        /// Ground-state snapshot; its grid is used.
        #[arg(long)]
        q: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArgs,
        /// Copy of the gap report.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Weighted resolvent norms of the linearized operator.
    ProbeResolvent {
        /// CSV with header and columns re,im of spectral points.
        #[arg(long)]
        z_file: Option<PathBuf>,
        /// Skip the continuous-spectrum projection.
        #[arg(long)]
        no_project: bool,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Local decay constants of the free propagator kernel.
    ProbeKernel {
        /// Range `a..b` (inclusive) or comma list of multipole orders.
        #[arg(long, default_value = "0..4")]
        j: String,
        #[command(flatten)]
        common: Common,
    },
    /// Build the boosted traveling wave on a box and check its statics.
    TravelingWave {
        #[arg(long, default_value = "0.2,0,0", allow_hyphen_values = true)]
        p: String,
        #[arg(long = "L", default_value_t = 28.0)]
        l: f64,
        #[arg(long, default_value_t = 256)]
        n: usize,
        /// Also run the velocity law on the box grid `--velocity-L`, `--velocity-n`.
        #[arg(long)]
        velocity: bool,
        #[arg(long = "velocity-L", default_value_t = 20.0)]
        velocity_l: f64,
        #[arg(long = "velocity-n", default_value_t = 64)]
        velocity_n: usize,
        /// Copy of the traveling-wave snapshot.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Evolve initial data and write series.csv and snapshots.
    Evolve {
        /// Snapshot path or recipe `kind:key=value,...`.
        #[arg(long)]
        init: String,
        #[arg(long = "T", default_value_t = 50.0)]
        t: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 0.01)]
        dt_sample: f64,
        #[arg(long)]
        snapshot_every: Option<f64>,
        /// Energy-conserving centred splitting.
        #[arg(long)]
        centered: bool,
        /// Run directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Forward and backward labels of initial data.
    Classify {
        #[arg(long)]
        init: String,
        #[arg(long = "T", default_value_t = 100.0)]
        t: f64,
        #[arg(long)]
        dt: Option<f64>,
        /// Expected two-letter code, e.g. `SB`.
        #[arg(long)]
        expect: Option<String>,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Bisect a one-parameter family onto the threshold manifold.
    Bisect {
        /// `scaled-q` or `modes`.
        #[arg(long, default_value = "modes")]
        family: String,
        #[arg(long, allow_hyphen_values = true)]
        lo: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        hi: Option<f64>,
        /// Bracket width at which bisection stops.
        #[arg(long)]
        width: Option<f64>,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        common: Common,
    },
}

fn apply_grid(cfg: &mut Config, g: &GridArgs) {
    if let Some(l) = g.box_l {
        cfg.set("grid", "mode", "box");
        cfg.set("grid", "l", l.to_string());
        if let Some(r) = g.r_max {
            cfg.set("grid", "r_max", r.to_string());
        }
    } else if let Some(r) = g.r_max {
        cfg.set("grid", "r_max", r.to_string());
    }
    if let Some(n) = g.n {
        cfg.set("grid", "n", n.to_string());
    }
    if let Some(t) = g.tol {
        cfg.set("grid", "tol", t.to_string());
    }
}

fn apply_common(cfg: &mut Config, c: &Common) -> Result<()> {
    for s in &c.set {
        let (k, v) = s.split_once('=').with_context(|| format!("--set {s}: expected SECTION.KEY=VALUE"))?;
        let (sec, key) = k.split_once('.').unwrap_or(("", k));
        cfg.set(sec.trim(), key.trim(), v.trim());
    }
    if let Some(seed) = c.seed {
        cfg.set("", "seed", seed.to_string());
    }
    Ok(())
}

fn init_recipe(init: &str) -> Result<Recipe> {
    if Path::new(init).is_file() {
        return Ok(Recipe::File { path: PathBuf::from(init) });
    }
    Recipe::parse_spec(init).with_context(|| format!("--init {init}: neither a file nor a recipe"))
}

/// Parses `a..b` or `a,b,c`.
fn parse_js(s: &str) -> Result<String> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u32, u32) = (a.trim().parse()?, b.trim().parse()?);
        if a > b {
            bail!("empty range {s}");
        }
        return Ok((a..=b).map(|j| j.to_string()).collect::<Vec<_>>().join(","));
    }
    Ok(s.to_string())
}

/// Sets the grid from the header of a radial snapshot.
fn grid_from_snapshot(cfg: &mut Config, path: &Path) -> Result<()> {
    let snap = read_snapshot(path).with_context(|| format!("reading {}", path.display()))?;
    match snap.field.grid() {
        Grid::Radial(g) => {
            cfg.set("grid", "mode", "radial");
            cfg.set("grid", "r_max", g.r_max().to_string());
            cfg.set("grid", "n", g.n().to_string());
        }
        Grid::Box(_) => bail!("{} holds a box field; a radial profile is needed", path.display()),
    }
    Ok(())
}

fn copy_out(outcome: &RunOutcome, name: &str, dest: &Option<PathBuf>) -> Result<()> {
    if let Some(d) = dest {
        if let Some(p) = d.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(p)?;
        }
        std::fs::copy(outcome.dir.join(name), d).with_context(|| format!("copying {name} to {}", d.display()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = Config::default();
    let mut target = None;
    let common;
    let mut post: Option<(&'static str, Option<PathBuf>)> = None;
    let mut print_ground_state = false;
    match cli.command {
        Command::Run { config, common: c } => {
            cfg = Config::from_file(&config).with_context(|| format!("reading {}", config.display()))?;
            common = c;
        }
        Command::GroundState { grid, out, common: c } => {
            cfg.set("", "experiment", "ground-state");
            apply_grid(&mut cfg, &grid);
            post = Some(("q.bin", out));
            print_ground_state = true;
            common = c;
        }
        Command::Spectrum { q, grid, report, common: c } => {
            cfg.set("", "experiment", "spectrum");
            apply_grid(&mut cfg, &grid);
            if let Some(q) = q {
                grid_from_snapshot(&mut cfg, &q)?;
                cfg.set("spectrum", "q", q.display().to_string());
            }
            post = Some(("gap.json", report));
            common = c;
        }
        Command::ProbeResolvent { z_file, no_project, grid, common: c } => {
            cfg.set("", "experiment", "probe-resolvent");
            apply_grid(&mut cfg, &grid);
            if let Some(z) = z_file {
                cfg.set("resolvent", "z_file", z.display().to_string());
            }
            if no_project {
                cfg.set("resolvent", "project", "false");
            }
            common = c;
        }
        Command::ProbeKernel { j, common: c } => {
            cfg.set("", "experiment", "probe-kernel");
            cfg.set("kernel", "j", parse_js(&j)?);
            common = c;
        }
        Command::TravelingWave { p, l, n, velocity, velocity_l, velocity_n, out, common: c } => {
            cfg.set("", "experiment", "traveling-wave");
            cfg.set("tw", "p", p);
            cfg.set("tw", "statics_l", l.to_string());
            cfg.set("tw", "statics_n", n.to_string());
            cfg.set("tw", "velocity", velocity.to_string());
            if out.is_some() {
                cfg.set("tw", "write_profile", "true");
            }
            if velocity {
                cfg.set("grid", "mode", "box");
                cfg.set("grid", "l", velocity_l.to_string());
                cfg.set("grid", "n", velocity_n.to_string());
            } else {
                cfg.set("grid", "n", "1023");
            }
            post = Some(("tw.bin", out));
            common = c;
        }
        Command::Evolve { init, t, dt, dt_sample, snapshot_every, centered, out, grid, common: c } => {
            cfg.set("", "experiment", "evolve");
            apply_grid(&mut cfg, &grid);
            init_recipe(&init)?.to_config(&mut cfg, "recipe");
            cfg.set("evolve", "t_end", t.to_string());
            cfg.set("evolve", "dt", dt.to_string());
            cfg.set("evolve", "dt_sample", dt_sample.to_string());
            cfg.set("evolve", "centered", centered.to_string());
            if let Some(s) = snapshot_every {
                cfg.set("evolve", "snapshot_every", s.to_string());
            }
            target = out;
            common = c;
        }
        Command::Classify { init, t, dt, expect, grid, common: c } => {
            cfg.set("", "experiment", "classify");
            apply_grid(&mut cfg, &grid);
            init_recipe(&init)?.to_config(&mut cfg, "recipe");
            cfg.set("classify", "t_end", t.to_string());
            if let Some(dt) = dt {
                cfg.set("classify", "dt", dt.to_string());
            }
            if let Some(e) = expect {
                cfg.set("classify", "expect", e);
            }
            common = c;
        }
        Command::Bisect { family, lo, hi, width, grid, common: c } => {
            cfg.set("", "experiment", "bisect");
            apply_grid(&mut cfg, &grid);
            cfg.set("bisect", "family", family);
            for (k, v) in [("lo", lo), ("hi", hi), ("tol", width)] {
                if let Some(v) = v {
                    cfg.set("bisect", k, v.to_string());
                }
            }
            common = c;
        }
    }
    apply_common(&mut cfg, &common)?;
    // Validate the grid keys early so mistakes surface before any computation.
    GridSpec::from_config(&cfg)?;
    let opts = RunOptions {
        root: cli.out_root.unwrap_or_else(output_root),
        target: target.or(common.run_dir),
        jobs: cli.jobs.max(1),
    };
    let outcome = run_experiment(&cfg, &opts)?;
    if let Some((name, dest)) = post {
        copy_out(&outcome, name, &dest)?;
    }
    let m = &outcome.manifest;
    for a in &m.assertions {
        eprintln!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
    }
    eprintln!("run directory: {}", outcome.dir.display());
    let out = if print_ground_state {
        let s = &m.summary["summary"];
        serde_json::json!({ "Q0": s["Q0"], "a": s["a"], "b": s["b"], "c4": s["c4"], "JQ": s["JQ"], "residual": s["residual"] })
    } else {
        m.summary.clone()
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(m.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn multipole_ranges() {
        assert_eq!(parse_js("0..4").unwrap(), "0,1,2,3,4");
        assert_eq!(parse_js("1,3").unwrap(), "1,3");
        assert!(parse_js("3..1").is_err());
    }
}
