//! Coarse-grained training and validation datasets on disk.
//!
//! A dataset directory holds `series.cgqg` (concatenated snapshot records in
//! time order) and `manifest.toml`.

use crate::config::{ExperimentConfig, CODE_VERSION};
use crate::error::{CliError, Result};
use crate::snapshot::{read_series, Snapshot};
use closure_lab::qg::{QgModel, SECONDS_PER_YEAR};
use closure_lab::LayeredField;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};

pub const MANIFEST: &str = "manifest.toml";
pub const SERIES: &str = "series.cgqg";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: u32,
    pub code_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub fine_params_hash: String,
    pub coarse_params_hash: String,
    pub spin_up_seconds: f64,
    pub duration_seconds: f64,
    /// Fine steps per coarse snapshot.
    pub stride: usize,
    pub dt: f64,
    pub nx: usize,
    pub ny: usize,
    pub layers: usize,
    pub count: usize,
    pub series_sha256: String,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        toml::from_str(&text).map_err(|e| CliError::format(&path, e.to_string()))
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST);
        let text = toml::to_string(self).expect("manifest serializes");
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn hash_hex(h: u64) -> String {
    format!("{h:016x}")
}

/// Fine spin-up from seeded noise, then a production run coarsened every
/// coarse step. Returns the manifest written to `out`.
pub fn generate(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let fine = cfg.fine_params();
    let coarse = cfg.coarse_params();
    let stride = cfg.stride()?;
    let count = cfg.snapshot_count();
    let coarsener = cfg.coarsener()?;
    let model = QgModel::new(fine)?;

    let series_path = out.join(SERIES);
    let file = std::fs::File::create(&series_path).map_err(|e| CliError::io(&series_path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let mut digest = Sha256::new();
    let coarse_hash = coarse.hash();
    if count > 0 {
        let q0 = model.spin_up(seed, cfg.data.spin_up_years * SECONDS_PER_YEAR)?;
        let mut state = model.start(&q0)?;
        for _ in 0..count {
            for _ in 0..stride {
                model.step(&mut state)?;
            }
            let snap = Snapshot {
                dt: coarse.dt,
                params_hash: coarse_hash,
                field: coarsener.coarsen(&model.physical(&state)?)?,
            };
            let bytes = snap.to_bytes();
            digest.update(&bytes);
            w.write_all(&bytes)
                .map_err(|e| CliError::io(&series_path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(&series_path, e))?;
    let manifest = Manifest {
        format: 1,
        code_version: CODE_VERSION.into(),
        config_hash: cfg.hash(),
        seed,
        fine_params_hash: hash_hex(fine.hash()),
        coarse_params_hash: hash_hex(coarse_hash),
        spin_up_seconds: cfg.data.spin_up_years * SECONDS_PER_YEAR,
        duration_seconds: cfg.data.duration_years * SECONDS_PER_YEAR,
        stride,
        dt: coarse.dt,
        nx: coarse.nx,
        ny: coarse.ny,
        layers: 2,
        count,
        series_sha256: hex(&digest.finalize()),
    };
    manifest.write(out)?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub states: Vec<LayeredField>,
}

impl Dataset {
    /// Loads a dataset and checks it against its manifest and the coarse
    /// model of `cfg`.
    pub fn open(dir: &Path, cfg: &ExperimentConfig) -> Result<Self> {
        let manifest = Manifest::read(dir)?;
        let path = dir.join(SERIES);
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        if hex(&Sha256::digest(&bytes)) != manifest.series_sha256 {
            return Err(CliError::format(
                &path,
                "series hash does not match manifest",
            ));
        }
        let expected = hash_hex(cfg.coarse_params().hash());
        if manifest.coarse_params_hash != expected {
            return Err(CliError::format(
                dir.join(MANIFEST),
                format!(
                    "dataset was made for coarse params {}, config has {expected}",
                    manifest.coarse_params_hash
                ),
            ));
        }
        let snaps = read_series(&path)?;
        if snaps.len() != manifest.count {
            return Err(CliError::format(
                &path,
                format!("{} records, manifest says {}", snaps.len(), manifest.count),
            ));
        }
        let states = snaps.into_iter().map(|s| s.field).collect();
        Ok(Dataset {
            dir: dir.to_path_buf(),
            manifest,
            states,
        })
    }

    pub fn vectors(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s.values.clone()).collect()
    }
}

/// Rejects a validation set that shares its seed or data with training.
pub fn check_disjoint(train_seed: u64, train_hash: &str, validation: &Manifest) -> Result<()> {
    if validation.seed == train_seed {
        return Err(CliError::SeedCollision(train_seed));
    }
    if validation.series_sha256 == train_hash {
        return Err(CliError::Usage(
            "validation data is identical to the training data".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.fine.n = 16;
        cfg.coarse.n = 8;
        cfg.data.spin_up_years = 2.0 * 86_400.0 / SECONDS_PER_YEAR;
        cfg.data.duration_years = 1.0 * 86_400.0 / SECONDS_PER_YEAR;
        cfg
    }

    #[test]
    fn generate_then_open() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny();
        let m = generate(&cfg, 3, dir.path()).unwrap();
        assert_eq!(m.count, 12);
        assert_eq!(m.stride, 8);
        let d = Dataset::open(dir.path(), &cfg).unwrap();
        assert_eq!(d.states.len(), 12);
        assert!(d.states.iter().all(|s| s.nx == 8 && s.is_finite()));
        // snapshots are one coarse step apart
        assert_eq!(d.states[1].time - d.states[0].time, 7200.0);
    }

    #[test]
    fn open_detects_tampering_and_wrong_model() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny();
        generate(&cfg, 3, dir.path()).unwrap();
        let mut other = cfg.clone();
        other.physics.gamma *= 2.0;
        assert!(Dataset::open(dir.path(), &other).is_err());
        let p = dir.path().join(SERIES);
        let mut b = std::fs::read(&p).unwrap();
        b[100] ^= 1;
        std::fs::write(&p, b).unwrap();
        assert!(Dataset::open(dir.path(), &cfg).is_err());
    }

    #[test]
    fn disjointness() {
        let m = Manifest {
            format: 1,
            code_version: "x".into(),
            config_hash: "c".into(),
            seed: 5,
            fine_params_hash: String::new(),
            coarse_params_hash: String::new(),
            spin_up_seconds: 0.0,
            duration_seconds: 0.0,
            stride: 8,
            dt: 7200.0,
            nx: 32,
            ny: 32,
            layers: 2,
            count: 0,
            series_sha256: "abc".into(),
        };
        assert!(matches!(
            check_disjoint(5, "def", &m),
            Err(CliError::SeedCollision(5))
        ));
        assert!(check_disjoint(4, "abc", &m).is_err());
        assert!(check_disjoint(4, "def", &m).is_ok());
    }
}
