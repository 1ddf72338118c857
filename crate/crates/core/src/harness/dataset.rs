use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mackey_glass::{generate, IntegratorConfig, MackeyGlassParams};

/// Sidecar written next to a generated series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub file: String,
    pub samples: usize,
    pub params: MackeyGlassParams,
    pub integrator: IntegratorConfig,
    pub sha256: String,
}

pub struct WrittenDataset {
    pub csv: PathBuf,
    pub sidecar: PathBuf,
    pub info: DatasetInfo,
}

/// Writes `<tag>.csv` and `<tag>.json` into `dir`.
pub fn write_dataset(
    dir: &Path,
    params: &MackeyGlassParams,
    integrator: &IntegratorConfig,
    samples: usize,
) -> Result<WrittenDataset> {
    let series = generate(params, integrator, samples)?;
    let text = series.to_csv_string();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join(format!("{}.csv", series.tag));
    fs::write(&csv, &text).map_err(|e| Error::io(&csv, e))?;
    let info = DatasetInfo {
        file: format!("{}.csv", series.tag),
        samples,
        params: *params,
        integrator: *integrator,
        sha256: hex::encode(Sha256::digest(text.as_bytes())),
    };
    let sidecar = dir.join(format!("{}.json", series.tag));
    let mut json = serde_json::to_string_pretty(&info).expect("dataset info serializes");
    json.push('\n');
    fs::write(&sidecar, json).map_err(|e| Error::io(&sidecar, e))?;
    Ok(WrittenDataset { csv, sidecar, info })
}
