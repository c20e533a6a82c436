use std::path::Path;
use std::process::{Command, Output};

fn nlkg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlkg"))
        .current_dir(dir)
        .env("NLKG_OUT_ROOT", dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn ground_state_then_spectrum_from_the_stored_profile() {
    let d = tempfile::tempdir().unwrap();
    let o = nlkg(d.path(), &["ground-state", "--R", "30", "--n", "511", "--tol", "1e-10", "--out", "q.bin"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    for k in ["Q0", "a", "b", "c4", "JQ", "residual"] {
        assert!(v[k].is_f64(), "{k} in {v}");
    }
    assert!((v["a"].as_f64().unwrap() / v["b"].as_f64().unwrap() - 3.0).abs() < 1e-5);
    assert!(d.path().join("q.bin").is_file());
    assert!(d.path().join("out/ground-state/manifest.json").is_file());

    let o = nlkg(d.path(), &["spectrum", "--q", "q.bin", "--report", "gap.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let gap: serde_json::Value = serde_json::from_slice(&std::fs::read(d.path().join("gap.json")).unwrap()).unwrap();
    assert_eq!(gap["negative_count"], 1);
    assert_eq!(gap["count_in_0_1"], 0);
}

#[test]
fn evolve_writes_the_requested_run_directory() {
    let d = tempfile::tempdir().unwrap();
    let o = nlkg(
        d.path(),
        &[
            "evolve",
            "--init",
            "scaled-q:c=0.9",
            "--T",
            "1",
            "--dt",
            "2e-3",
            "--R",
            "30",
            "--n",
            "255",
            "--snapshot-every",
            "0.5",
            "--out",
            "run",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["manifest.json", "series.csv", "snapshots/snap_00000.bin", "snapshots/snap_00002.bin"] {
        assert!(d.path().join("run").join(f).is_file(), "{f}");
    }
    // The stored snapshot is accepted as initial data.
    let o = nlkg(
        d.path(),
        &[
            "evolve",
            "--init",
            "run/snapshots/snap_00002.bin",
            "--T",
            "0.5",
            "--dt",
            "2e-3",
            "--R",
            "30",
            "--n",
            "255",
            "--out",
            "run2",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.path().join("run2/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["recipe"]["kind"], "file");
}

#[test]
fn exit_status_reflects_assertions_and_errors() {
    let d = tempfile::tempdir().unwrap();
    let classify = |expect: &str| {
        nlkg(
            d.path(),
            &["classify", "--init", "scaled-q:c=1.2", "--T", "20", "--R", "30", "--n", "255", "--expect", expect],
        )
    };
    assert_eq!(classify("BB").status.code(), Some(0));
    assert!(d.path().join("out/classify/labels.json").is_file());
    assert_eq!(classify("SS").status.code(), Some(1));
    let bad = nlkg(d.path(), &["evolve", "--init", "no-such-recipe"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("no-such-recipe"));
    let cfg = d.path().join("x.cfg");
    std::fs::write(&cfg, "experiment = nine-sweep\n[sweep]\nn = 0\n").unwrap();
    let o = nlkg(d.path(), &["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sweep.n"));
    assert!(!d.path().join("out/nine-sweep").exists());
}

#[test]
fn out_root_flag_overrides_the_environment() {
    let d = tempfile::tempdir().unwrap();
    let o = nlkg(d.path(), &["--out-root", "elsewhere", "ground-state", "--R", "20", "--n", "255"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.path().join("elsewhere/ground-state/manifest.json").is_file());
    assert!(!d.path().join("out").exists());
}
