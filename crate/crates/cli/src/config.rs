//! Run configuration: JSON file values overlaid by command-line flags, echoed back
//! into every output so a run can be replayed.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use nevlab::par::Execution;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sequential,
    Parallel,
}

impl From<Mode> for Execution {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Sequential => Execution::Sequential,
            Mode::Parallel => Execution::Parallel,
        }
    }
}

/// Everything needed to replay a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub execution: Mode,
    pub format: Format,
    pub params: Value,
}

/// Contents of a `--config` file: either an echoed [`RunConfig`] or a bare parameter object.
#[derive(Debug, Default)]
pub struct FileConfig {
    pub command: Option<String>,
    pub execution: Option<Mode>,
    pub format: Option<Format>,
    pub params: Map<String, Value>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let Value::Object(mut obj) = value else { bail!("config must be a JSON object") };
        let command = match obj.remove("command") {
            Some(Value::String(s)) => Some(s),
            Some(_) => bail!("config field `command` must be a string"),
            None => None,
        };
        let execution = obj.remove("execution").map(serde_json::from_value).transpose()?;
        let format = obj.remove("format").map(serde_json::from_value).transpose()?;
        let params = match obj.remove("params") {
            Some(Value::Object(p)) => {
                if let Some(k) = obj.keys().next() {
                    bail!("unexpected config field `{k}` next to `params`");
                }
                p
            }
            Some(_) => bail!("config field `params` must be an object"),
            None => obj,
        };
        Ok(FileConfig { command, execution, format, params })
    }
}

/// Overlays the non-null flag values of `cli` on the file parameters.
pub fn merge<T: Serialize + DeserializeOwned>(cli: &T, file: &Map<String, Value>) -> Result<T> {
    let Value::Object(flags) = serde_json::to_value(cli)? else { bail!("parameters must serialize to an object") };
    let mut merged = file.clone();
    for (k, v) in flags {
        if !v.is_null() {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged)).context("config parameters do not match the command")
}
