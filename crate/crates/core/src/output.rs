//! Persistence: trajectory CSV, JSON reports, and the run manifest.
//!
//! Every file opens with the hash of the generating configuration so outputs
//! can always be traced back to their run. Floats are written with 17
//! significant digits, which round-trips f64 exactly.

use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::vec3::Vec3;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// SHA-256 of the serialized configuration text, hex-encoded.
pub fn config_hash(config_text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(config_text.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub config_echo: String,
    pub seed: u64,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<ManifestEntry>,
}

impl RunManifest {
    pub fn new(config_echo: String, seed: u64) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash(&config_echo),
            config_echo,
            seed,
            started_unix: unix_now(),
            finished_unix: 0,
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, path: &Path, kind: &str) {
        self.outputs.push(ManifestEntry {
            path: path.to_path_buf(),
            kind: kind.to_string(),
        });
    }

    /// Stamps the finish time and writes the manifest itself.
    pub fn finish(mut self, path: &Path) -> Result<()> {
        self.finished_unix = unix_now();
        for entry in &self.outputs {
            if !entry.path.exists() {
                return Err(Error::Mismatch(format!(
                    "manifest lists missing file {}",
                    entry.path.display()
                )));
            }
        }
        let text = serde_json::to_string_pretty(&self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header comment + `t,agent,x1,x2,x3,w1,w2,w3` rows, one per agent per
/// sample. Rejects non-finite values.
pub fn write_trajectory_csv(traj: &Trajectory, path: &Path, hash: &str) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# config_hash = {hash}\n"));
    out.push_str("t,agent,x1,x2,x3,w1,w2,w3\n");
    for s in &traj.samples {
        if !s.is_finite() || !s.t.is_finite() {
            return Err(Error::Domain("trajectory contains non-finite values".into()));
        }
        for a in 0..s.n() {
            out.push_str(&fmt_f64(s.t));
            out.push(',');
            out.push_str(&a.to_string());
            for v in [s.x[a], s.w[a]] {
                for k in 0..3 {
                    out.push(',');
                    out.push_str(&fmt_f64(v.0[k]));
                }
            }
            out.push('\n');
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parsed CSV content: per-sample times and agent states.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTrajectory {
    pub config_hash: String,
    pub times: Vec<f64>,
    pub x: Vec<Vec<Vec3>>,
    pub w: Vec<Vec<Vec3>>,
}

pub fn read_trajectory_csv(path: &Path) -> Result<CsvTrajectory> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let hash_line = lines
        .next()
        .ok_or_else(|| Error::Domain("empty trajectory file".into()))?;
    let config_hash = hash_line
        .strip_prefix("# config_hash = ")
        .ok_or_else(|| Error::Domain("missing config hash header".into()))?
        .to_string();
    let header = lines
        .next()
        .ok_or_else(|| Error::Domain("missing column header".into()))?;
    if header != "t,agent,x1,x2,x3,w1,w2,w3" {
        return Err(Error::Domain(format!("unexpected column header: {header}")));
    }
    let mut times: Vec<f64> = Vec::new();
    let mut x: Vec<Vec<Vec3>> = Vec::new();
    let mut w: Vec<Vec<Vec3>> = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::Domain(format!("malformed row: {line}")));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Domain(format!("bad number {s:?}")))
        };
        let t = parse(fields[0])?;
        let agent: usize = fields[1]
            .parse()
            .map_err(|_| Error::Domain(format!("bad agent index {:?}", fields[1])))?;
        if times.last() != Some(&t) {
            times.push(t);
            x.push(Vec::new());
            w.push(Vec::new());
        }
        if agent != x.last().unwrap().len() {
            return Err(Error::Domain(format!("out-of-order agent index {agent}")));
        }
        x.last_mut().unwrap().push(Vec3::new(parse(fields[2])?, parse(fields[3])?, parse(fields[4])?));
        w.last_mut().unwrap().push(Vec3::new(parse(fields[5])?, parse(fields[6])?, parse(fields[7])?));
    }
    Ok(CsvTrajectory {
        config_hash,
        times,
        x,
        w,
    })
}

const REPORT_SCHEMA_VERSION: u32 = 1;

/// Versioned report envelope. Serialization fails on any non-finite float,
/// which serde_json would otherwise silently turn into null.
pub fn report_to_string<T: Serialize>(kind: &str, report: &T, hash: &str) -> Result<String> {
    let body = serde_json::to_value(report)?;
    reject_nulls(&body, kind)?;
    let envelope = serde_json::json!({
        "schema": kind,
        "version": REPORT_SCHEMA_VERSION,
        "config_hash": hash,
        "report": body,
    });
    Ok(serde_json::to_string_pretty(&envelope)? + "\n")
}

pub fn write_report_json<T: Serialize>(kind: &str, report: &T, path: &Path, hash: &str) -> Result<()> {
    let text = report_to_string(kind, report, hash)?;
    std::fs::write(path, text)?;
    Ok(())
}

// Option fields are skipped when None, so a null can only arise from a
// non-finite float.
fn reject_nulls(v: &Value, context: &str) -> Result<()> {
    match v {
        Value::Null => Err(Error::Domain(format!(
            "report {context} contains a non-finite value"
        ))),
        Value::Array(items) => items.iter().try_for_each(|item| reject_nulls(item, context)),
        Value::Object(map) => map.values().try_for_each(|item| reject_nulls(item, context)),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{EnsembleState, ModelKind};
    use crate::integrator::{simulate, SimConfig};
    use crate::relativity::{KernelSpec, ModelParams};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_trajectory() -> Trajectory {
        let p = ModelParams::uniform(10.0, 1.0, 1.0, 1.0, 3.0, 2, KernelSpec::Constant);
        let st = EnsembleState::new(
            0.0,
            vec![Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0)],
            vec![Vec3::new(0.1, 0.0, 0.0), Vec3::new(-0.1, 0.0, 0.0)],
        );
        let cfg = SimConfig {
            dt: 0.01,
            t_end: 0.5,
            sample_every: 10,
            model: ModelKind::Rcs,
            seed: 0,
        };
        simulate(&st, &p, &cfg).unwrap()
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash("c = 10\n");
        assert_eq!(a, config_hash("c = 10\n"));
        assert_ne!(a, config_hash("c = 20\n"));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn csv_row_count_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let mut traj = small_trajectory();
        traj.samples.truncate(2);
        // single agent, 2 samples -> 2 data rows
        for s in &mut traj.samples {
            s.x.truncate(1);
            s.w.truncate(1);
        }
        write_trajectory_csv(&traj, &path, "deadbeef").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "t,agent,x1,x2,x3,w1,w2,w3");

        traj.samples.clear();
        write_trajectory_csv(&traj, &path, "deadbeef").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2); // hash + header only
    }

    #[test]
    fn csv_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let traj = small_trajectory();
        write_trajectory_csv(&traj, &path, "cafe").unwrap();
        let back = read_trajectory_csv(&path).unwrap();
        assert_eq!(back.config_hash, "cafe");
        assert_eq!(back.times.len(), traj.samples.len());
        for (i, s) in traj.samples.iter().enumerate() {
            assert_eq!(back.times[i], s.t);
            assert_eq!(back.x[i], s.x);
            assert_eq!(back.w[i], s.w);
        }
        // idempotence: write the parsed content again, bytes identical
        let first = std::fs::read_to_string(&path).unwrap();
        let path2 = dir.path().join("traj2.csv");
        let rebuilt = Trajectory {
            samples: back
                .times
                .iter()
                .zip(back.x.iter().zip(back.w.iter()))
                .map(|(&t, (x, w))| EnsembleState::new(t, x.clone(), w.clone()))
                .collect(),
            ..traj.clone()
        };
        write_trajectory_csv(&rebuilt, &path2, "cafe").unwrap();
        assert_eq!(first, std::fs::read_to_string(&path2).unwrap());
    }

    #[test]
    fn csv_round_trip_random_doubles() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let mut traj = small_trajectory();
        for s in &mut traj.samples {
            for a in 0..s.n() {
                s.x[a] = Vec3::new(
                    (rng.gen::<f64>() - 0.5) * 1e8,
                    rng.gen::<f64>() * 1e-12,
                    -rng.gen::<f64>(),
                );
                s.w[a] = Vec3::new(rng.gen(), rng.gen::<f64>() * 1e-300, rng.gen());
            }
        }
        write_trajectory_csv(&traj, &path, "h").unwrap();
        let back = read_trajectory_csv(&path).unwrap();
        for (i, s) in traj.samples.iter().enumerate() {
            assert_eq!(back.x[i], s.x);
            assert_eq!(back.w[i], s.w);
        }
    }

    #[test]
    fn csv_rejects_non_finite() {
        let dir = tempfile::tempdir().unwrap();
        let mut traj = small_trajectory();
        traj.samples[0].w[0] = Vec3::new(f64::NAN, 0.0, 0.0);
        assert!(write_trajectory_csv(&traj, &dir.path().join("bad.csv"), "h").is_err());
    }

    #[test]
    fn report_envelope_schema() {
        #[derive(Serialize)]
        struct Demo {
            slope: f64,
        }
        let text = report_to_string("demo", &Demo { slope: -4.0 }, "abc").unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["schema"], "demo");
        assert_eq!(v["version"], 1);
        assert_eq!(v["config_hash"], "abc");
        assert_eq!(v["report"]["slope"], -4.0);
    }

    #[test]
    fn report_rejects_non_finite() {
        #[derive(Serialize)]
        struct Demo {
            values: Vec<f64>,
        }
        assert!(report_to_string("demo", &Demo { values: vec![1.0, f64::NAN] }, "h").is_err());
        assert!(report_to_string("demo", &Demo { values: vec![f64::INFINITY] }, "h").is_err());
        assert!(report_to_string("demo", &Demo { values: vec![1.0] }, "h").is_ok());
    }

    #[test]
    fn report_determinism() {
        let traj = small_trajectory();
        let series = crate::diagnostics::DiagnosticsSeries::from_trajectory(&traj).unwrap();
        let a = report_to_string("diagnostics", &series, "h").unwrap();
        let b = report_to_string("diagnostics", &series, "h").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn manifest_lifecycle() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("traj.csv");
        let echo = "c = 10\nn = 2\nkernel = constant\n".to_string();
        let mut manifest = RunManifest::new(echo.clone(), 7);
        assert_eq!(manifest.config_hash, config_hash(&echo));
        write_trajectory_csv(&small_trajectory(), &out, &manifest.config_hash).unwrap();
        manifest.record(&out, "trajectory");
        let mpath = dir.path().join("manifest.json");
        manifest.finish(&mpath).unwrap();
        let loaded: RunManifest = serde_json::from_str(&std::fs::read_to_string(&mpath).unwrap()).unwrap();
        assert_eq!(loaded.seed, 7);
        assert_eq!(loaded.outputs.len(), 1);
        // csv header carries the same hash
        let back = read_trajectory_csv(&out).unwrap();
        assert_eq!(back.config_hash, loaded.config_hash);
    }

    #[test]
    fn manifest_missing_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = RunManifest::new("x = 1\n".into(), 0);
        manifest.record(&dir.path().join("absent.csv"), "trajectory");
        assert!(manifest.finish(&dir.path().join("m.json")).is_err());
    }
}
