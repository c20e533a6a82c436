//! Run directories written through a staging directory and renamed into place, and the
//! manifest describing them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::Trajectory;
use crate::field::write_snapshot;

/// Environment variable overriding the output root.
pub const OUT_ROOT_ENV: &str = "NLKG_OUT_ROOT";

/// Root for run directories: the env override, else `runs`.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

/// One checked property of an experiment.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Assertion { name: name.to_string(), passed, detail: detail.into() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    /// Config entries as given, `section.key -> value`.
    pub config: BTreeMap<String, String>,
    /// Full parameter set of the run after defaults: grid, thresholds, steps, horizons.
    pub resolved: serde_json::Value,
    pub recipe: Option<serde_json::Value>,
    pub seed: u64,
    pub jobs: usize,
    /// Files in the run directory, relative paths, sorted.
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
    pub assertions: Vec<Assertion>,
    pub passed: bool,
    pub summary: serde_json::Value,
}

static STAGING: AtomicUsize = AtomicUsize::new(0);

/// A run directory under construction. Files go to a hidden sibling staging directory that
/// is renamed onto the target by [`RunDir::commit`] and removed if the run is dropped.
pub struct RunDir {
    target: PathBuf,
    staging: PathBuf,
    files: Vec<String>,
    committed: bool,
}

impl RunDir {
    pub fn create(target: &Path) -> Result<RunDir> {
        let name = target
            .file_name()
            .ok_or_else(|| Error::InvalidArgument(format!("run path {} has no final component", target.display())))?
            .to_string_lossy()
            .to_string();
        let parent = target.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        std::fs::create_dir_all(parent)?;
        let id = STAGING.fetch_add(1, Ordering::Relaxed);
        let staging = parent.join(format!(".{name}.staging-{}-{id}", std::process::id()));
        if staging.exists() {
            std::fs::remove_dir_all(&staging)?;
        }
        std::fs::create_dir_all(&staging)?;
        Ok(RunDir { target: target.to_path_buf(), staging, files: Vec::new(), committed: false })
    }

    pub fn target(&self) -> &Path {
        &self.target
    }

    /// Path for a new file; records it in the output index.
    pub fn file(&mut self, rel: &str) -> Result<PathBuf> {
        let p = self.staging.join(rel);
        if let Some(d) = p.parent() {
            std::fs::create_dir_all(d)?;
        }
        if !self.files.iter().any(|f| f == rel) {
            self.files.push(rel.to_string());
        }
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let p = self.file(rel)?;
        std::fs::write(p, serde_json::to_string_pretty(value)?)?;
        Ok(())
    }

    pub fn write_text(&mut self, rel: &str, text: &str) -> Result<()> {
        let p = self.file(rel)?;
        std::fs::write(p, text)?;
        Ok(())
    }

    /// `series.csv`-style CSV and the snapshots of a trajectory, under `prefix`.
    pub fn write_trajectory(&mut self, prefix: &str, traj: &Trajectory) -> Result<()> {
        let p = self.file(&format!("{prefix}series.csv"))?;
        traj.write_csv(&p)?;
        for (i, (t, u)) in traj.snapshots.iter().enumerate() {
            let p = self.file(&format!("{prefix}snapshots/snap_{i:05}.bin"))?;
            write_snapshot(&p, u, *t)?;
        }
        Ok(())
    }

    /// Sorted output index including the manifest itself.
    pub fn outputs(&self) -> Vec<String> {
        let mut v = self.files.clone();
        v.push("manifest.json".into());
        v.sort();
        v.dedup();
        v
    }

    /// Writes the manifest and renames the staging directory onto the target.
    pub fn commit(mut self, manifest: &RunManifest) -> Result<PathBuf> {
        std::fs::write(self.staging.join("manifest.json"), serde_json::to_string_pretty(manifest)?)?;
        if self.target.exists() {
            // Move the old run aside first so the target is never half-written.
            let old = self.staging.with_extension("old");
            std::fs::rename(&self.target, &old)?;
            std::fs::rename(&self.staging, &self.target)?;
            std::fs::remove_dir_all(&old)?;
        } else {
            std::fs::rename(&self.staging, &self.target)?;
        }
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = std::fs::remove_dir_all(&self.staging);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dropped_run_leaves_nothing() {
        let root = tempfile::tempdir().unwrap();
        let target = root.path().join("run");
        {
            let mut rd = RunDir::create(&target).unwrap();
            rd.write_text("a.txt", "x").unwrap();
        }
        assert!(!target.exists());
        assert_eq!(std::fs::read_dir(root.path()).unwrap().count(), 0);
    }

    #[test]
    fn commit_replaces_existing_run() {
        let root = tempfile::tempdir().unwrap();
        let target = root.path().join("run");
        for text in ["first", "second"] {
            let mut rd = RunDir::create(&target).unwrap();
            rd.write_text("a.txt", text).unwrap();
            let m = RunManifest {
                tool: "nlkg".into(),
                version: "0".into(),
                experiment: "test".into(),
                config: BTreeMap::new(),
                resolved: serde_json::Value::Null,
                recipe: None,
                seed: 0,
                jobs: 1,
                outputs: rd.outputs(),
                wall_time_s: 0.0,
                assertions: vec![],
                passed: true,
                summary: serde_json::Value::Null,
            };
            rd.commit(&m).unwrap();
        }
        assert_eq!(std::fs::read_to_string(target.join("a.txt")).unwrap(), "second");
        assert_eq!(std::fs::read_dir(root.path()).unwrap().count(), 1);
    }
}
