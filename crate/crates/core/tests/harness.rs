use std::path::Path;

use nlkg::harness::{run_experiment, Config, RunManifest, RunOptions};

fn opts(root: &Path, jobs: usize) -> RunOptions {
    RunOptions { root: root.to_path_buf(), target: None, jobs }
}

fn read_manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const EVOLVE: &str = "experiment = evolve
seed = 7
[grid]
n = 255
r_max = 30
[recipe]
kind = q-plus-modes
eps_plus = 1e-3
gamma_amp = 1e-3
gamma_seed = 3
[evolve]
t_end = 2
dt = 2e-3
snapshot_every = 1
";

#[test]
fn evolve_runs_are_byte_identical_and_fully_described() {
    let root = tempfile::tempdir().unwrap();
    let cfg = Config::parse(EVOLVE).unwrap();
    let mut series = Vec::new();
    for name in ["a", "b"] {
        let o = RunOptions { target: Some(root.path().join(name)), ..opts(root.path(), 1) };
        let out = run_experiment(&cfg, &o).unwrap();
        assert!(out.manifest.passed);
        series.push(std::fs::read(out.dir.join("series.csv")).unwrap());
        let m = read_manifest(&out.dir);
        assert_eq!(m, out.manifest);
        assert_eq!(m.seed, 7);
        assert_eq!(m.config["recipe.kind"], "q-plus-modes");
        assert_eq!(m.resolved["eo"]["dt"], 2e-3);
        assert_eq!(m.resolved["eo"]["t_end"], 2.0);
        assert_eq!(m.resolved["th"]["delta_star"], 0.05);
        assert_eq!(m.resolved["spec"]["n"], 255);
        assert_eq!(m.recipe.as_ref().unwrap()["kind"], "q-plus-modes");
        assert!(m.wall_time_s > 0.0);
        for f in
            ["series.csv", "snapshots/snap_00000.bin", "snapshots/snap_00002.bin", "trajectory.json", "manifest.json"]
        {
            assert!(m.outputs.iter().any(|o| o == f), "{f} missing from {:?}", m.outputs);
            assert!(out.dir.join(f).is_file());
        }
    }
    assert_eq!(series[0], series[1]);
    let header = String::from_utf8(series[0].clone()).unwrap();
    assert!(header.starts_with("t,E,P,Em,K0,K2,dQ,lam_plus,lam_minus,gamma_norm,sign\n"));
    // No staging leftovers next to the runs.
    let names: Vec<String> =
        std::fs::read_dir(root.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into()).collect();
    assert_eq!(names.len(), 2, "{names:?}");
}

#[test]
fn sweep_results_do_not_depend_on_the_worker_count() {
    let root = tempfile::tempdir().unwrap();
    let text =
        "experiment = nine-sweep\n[grid]\nn = 255\nr_max = 30\n[sweep]\nn = 3\na = 0.0095\n[classify]\nt_end = 40\n";
    let cfg = Config::parse(text).unwrap();
    let mut tables = Vec::new();
    for jobs in [1, 3] {
        let o = RunOptions { target: Some(root.path().join(format!("j{jobs}"))), ..opts(root.path(), jobs) };
        let out = run_experiment(&cfg, &o).unwrap();
        tables.push(std::fs::read(out.dir.join("labels.csv")).unwrap());
    }
    assert_eq!(tables[0], tables[1]);
    let text = String::from_utf8(tables[0].clone()).unwrap();
    let idx: Vec<usize> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(idx, (0..9).collect::<Vec<_>>());
}

#[test]
fn failed_assertions_are_reported_not_hidden() {
    let root = tempfile::tempdir().unwrap();
    let text = "experiment = classify\n[grid]\nn = 255\nr_max = 30\n[recipe]\nkind = scaled-q\nc = 0.9\n[classify]\nexpect = BB\n";
    let out = run_experiment(&Config::parse(text).unwrap(), &opts(root.path(), 1)).unwrap();
    assert!(!out.manifest.passed);
    let a = out.manifest.assertions.iter().find(|a| a.name == "expected label").unwrap();
    assert!(!a.passed && a.detail.contains("got SS"), "{a:?}");
}

#[test]
fn errors_leave_no_run_directory() {
    let root = tempfile::tempdir().unwrap();
    let missing = root.path().join("absent.bin");
    let text = format!("experiment = evolve\n[recipe]\nkind = file\npath = {}\n", missing.display());
    assert!(run_experiment(&Config::parse(&text).unwrap(), &opts(root.path(), 1)).is_err());
    assert_eq!(std::fs::read_dir(root.path()).unwrap().count(), 0);
    let bad = "experiment = evolve\n[recipe]\nkind = scaled-q\n[evolve]\ndt = 0.5\n";
    assert!(matches!(
        run_experiment(&Config::parse(bad).unwrap(), &opts(root.path(), 1)),
        Err(nlkg::Error::Config { .. })
    ));
    assert_eq!(std::fs::read_dir(root.path()).unwrap().count(), 0);
}

#[test]
fn snapshot_recipe_reproduces_the_stored_state() {
    let root = tempfile::tempdir().unwrap();
    let cfg = Config::parse(EVOLVE).unwrap();
    let first =
        run_experiment(&cfg, &RunOptions { target: Some(root.path().join("src")), ..opts(root.path(), 1) }).unwrap();
    let snap = first.dir.join("snapshots/snap_00000.bin");
    let text = format!(
        "experiment = evolve\n[grid]\nn = 255\nr_max = 30\n[recipe]\nkind = file\npath = {}\n[evolve]\nt_end = 2\ndt = 2e-3\nsnapshot_every = 1\n",
        snap.display()
    );
    let second = run_experiment(
        &Config::parse(&text).unwrap(),
        &RunOptions { target: Some(root.path().join("dst")), ..opts(root.path(), 1) },
    )
    .unwrap();
    let a = std::fs::read(first.dir.join("series.csv")).unwrap();
    let b = std::fs::read(second.dir.join("series.csv")).unwrap();
    assert_eq!(a, b);
}
