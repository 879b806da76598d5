use std::fs::{self, File};
use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Format, RunConfig};

/// Where a command's primary output goes, plus the config echo that travels with it.
pub struct Sink {
    pub out: Option<PathBuf>,
    pub config: RunConfig,
}

impl Sink {
    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(io::BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
            None => Box::new(io::stdout().lock()),
        })
    }

    fn echo_config(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.config)?;
        match &self.out {
            Some(p) => {
                let mut side = p.clone().into_os_string();
                side.push(".config.json");
                fs::write(&side, text + "\n").with_context(|| format!("writing {:?}", side))?;
            }
            None => eprintln!("# config: {}", serde_json::to_string(&self.config)?),
        }
        Ok(())
    }

    /// CSV rows or a JSON document holding the config, `payload` and the rows.
    pub fn emit<S: Serialize>(&self, rows: &[S], payload: Value) -> Result<()> {
        match self.config.format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(self.writer()?);
                for row in rows {
                    w.serialize(row)?;
                }
                w.flush()?;
                if let Some(v) = payload.get("verdict") {
                    eprintln!("# verdict: {}", serde_json::to_string(v)?);
                }
                self.echo_config()
            }
            Format::Json => {
                let mut doc = json!({ "config": self.config });
                if let (Some(d), Value::Object(p)) = (doc.as_object_mut(), payload) {
                    d.extend(p);
                }
                if let Some(d) = doc.as_object_mut() {
                    d.entry("rows").or_insert(serde_json::to_value(rows)?);
                }
                let mut w = self.writer()?;
                serde_json::to_writer_pretty(&mut w, &doc)?;
                writeln!(w)?;
                w.flush()?;
                Ok(())
            }
        }
    }
}
