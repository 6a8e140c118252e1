use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use fidvr_core::grid::{FeederNetwork, NetworkFile};
use fidvr_core::rdsm::FittedParamsFile;
use fidvr_core::schema::check_version;
use fidvr_core::sim::{AreaSpec, AreasFile};
use serde::de::DeserializeOwned;

use crate::manifest::Run;
use crate::Cli;

/// Global settings shared by every command.
pub struct Context {
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
}

impl Context {
    pub fn new(cli: &Cli) -> Self {
        Self {
            seed: cli.seed,
            out_dir: cli.out_dir.clone(),
        }
    }

    pub fn run(&self, command: &str, seed: Option<u64>) -> Result<Run> {
        Run::new(command, seed, &self.out_dir)
    }
}

pub fn parse_json<T: DeserializeOwned>(bytes: &[u8], what: &str, path: &Path) -> Result<T> {
    serde_json::from_slice(bytes).with_context(|| format!("invalid {what} file {}", path.display()))
}

pub fn load_network(run: &mut Run, path: &Path) -> Result<FeederNetwork> {
    let bytes = run.input("network", path)?;
    let spec: NetworkFile = parse_json(&bytes, "network", path)?;
    FeederNetwork::from_file_spec(spec).with_context(|| format!("invalid network file {}", path.display()))
}

pub fn load_areas(run: &mut Run, path: &Path) -> Result<Vec<AreaSpec>> {
    let bytes = run.input("areas", path)?;
    let file: AreasFile = parse_json(&bytes, "areas", path)?;
    check_version("areas file", file.format_version)?;
    Ok(file.areas)
}

pub fn load_params(run: &mut Run, path: &Path) -> Result<FittedParamsFile> {
    let bytes = run.input("params", path)?;
    let text = std::str::from_utf8(&bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
    FittedParamsFile::from_json(text).with_context(|| format!("invalid parameter file {}", path.display()))
}

/// Resolves `path` against the directory of the file that names it.
pub fn relative_to(base_file: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    base_file.parent().map(|d| d.join(path)).unwrap_or_else(|| path.to_path_buf())
}
