use std::fs;
use std::path::{Path, PathBuf};

use qlink_core::LinkConfig;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// What a subcommand prints: a human summary and its JSON form.
pub struct Emitted {
    pub text: String,
    pub json: String,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_owned(),
        source,
    })
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_owned(),
        source,
    })
}

pub fn write(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    create_dir(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Built-in defaults, or the given file.
pub fn load_config(path: Option<&Path>) -> CliResult<LinkConfig> {
    match path {
        Some(p) => LinkConfig::load(p).map_err(CliError::at(p)),
        None => Ok(LinkConfig::default()),
    }
}
