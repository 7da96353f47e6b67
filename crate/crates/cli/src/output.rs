use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// First 12 hex digits of the SHA-256 of the canonical config JSON.
pub fn config_hash(canonical: &str) -> String {
    hex::encode(Sha256::digest(canonical.as_bytes()))[..12].to_string()
}

#[derive(Serialize)]
struct Envelope<'a, S: Serialize> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    config_hash: &'a str,
    config: &'a Value,
    pass: bool,
    summary: S,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    tables: BTreeMap<&'static str, Value>,
}

/// Collects the tables of one invocation. With `csv`, the first table is
/// written to `{subcommand}-{hash}.csv`, later ones to `{subcommand}-{hash}-{name}.csv`,
/// and the envelope to `{subcommand}-{hash}.meta.json`. With `json`,
/// everything goes into `{subcommand}-{hash}.json`.
pub struct Report {
    dir: PathBuf,
    subcommand: String,
    config: Value,
    hash: String,
    format: Format,
    tables: BTreeMap<&'static str, Value>,
    written: Vec<PathBuf>,
}

impl Report {
    pub fn new<C: Serialize>(
        dir: &Path,
        subcommand: &str,
        config: &C,
        format: Format,
    ) -> Result<Self> {
        let config = serde_json::to_value(config)?;
        let canonical = serde_json::to_string(&serde_json::json!({
            "subcommand": subcommand,
            "config": config,
        }))?;
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            subcommand: subcommand.to_string(),
            hash: config_hash(&canonical),
            config,
            format,
            tables: BTreeMap::new(),
            written: Vec::new(),
        })
    }

    fn stem(&self) -> String {
        format!("{}-{}", self.subcommand, self.hash)
    }

    pub fn table<T: Serialize>(&mut self, name: &'static str, rows: &[T]) -> Result<()> {
        match self.format {
            Format::Json => {
                self.tables.insert(name, serde_json::to_value(rows)?);
            }
            Format::Csv => {
                let file = if self.written.is_empty() {
                    format!("{}.csv", self.stem())
                } else {
                    format!("{}-{name}.csv", self.stem())
                };
                let path = self.dir.join(file);
                let mut w = csv::Writer::from_path(&path)
                    .with_context(|| format!("writing {}", path.display()))?;
                for row in rows {
                    w.serialize(row)?;
                }
                w.flush()?;
                self.written.push(path);
            }
        }
        Ok(())
    }

    pub fn finish<S: Serialize>(mut self, pass: bool, summary: S) -> Result<Vec<PathBuf>> {
        let file = match self.format {
            Format::Json => format!("{}.json", self.stem()),
            Format::Csv => format!("{}.meta.json", self.stem()),
        };
        let envelope = Envelope {
            tool: "reclab",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: &self.subcommand,
            config_hash: &self.hash,
            config: &self.config,
            pass,
            summary,
            tables: std::mem::take(&mut self.tables),
        };
        let path = self.dir.join(file);
        let mut w = BufWriter::new(
            File::create(&path).with_context(|| format!("writing {}", path.display()))?,
        );
        serde_json::to_writer_pretty(&mut w, &envelope)?;
        w.write_all(b"\n")?;
        w.flush()?;
        self.written.push(path);
        Ok(self.written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_short() {
        let h = config_hash("{}");
        assert_eq!(h.len(), 12);
        assert_eq!(h, "44136fa355b3");
    }

    #[derive(Serialize)]
    struct Row {
        a: u32,
        b: f64,
        c: Option<f64>,
    }

    #[test]
    fn csv_and_json_layouts() {
        let dir = tempfile::tempdir().unwrap();
        let rows = [
            Row {
                a: 1,
                b: 0.1,
                c: None,
            },
            Row {
                a: 2,
                b: 1e-20,
                c: Some(2.0),
            },
        ];
        let mut r = Report::new(
            dir.path(),
            "progress",
            &serde_json::json!({"x": 1}),
            Format::Csv,
        )
        .unwrap();
        r.table("cells", &rows).unwrap();
        r.table("extra", &rows).unwrap();
        let files = r.finish(true, "ok").unwrap();
        assert_eq!(files.len(), 3);
        let text = fs::read_to_string(&files[0]).unwrap();
        assert_eq!(text, "a,b,c\n1,0.1,\n2,1e-20,2.0\n");
        assert!(files[1].to_string_lossy().ends_with("-extra.csv"));
        assert!(files[2].to_string_lossy().ends_with(".meta.json"));

        let mut r = Report::new(
            dir.path(),
            "progress",
            &serde_json::json!({"x": 1}),
            Format::Json,
        )
        .unwrap();
        r.table("cells", &rows).unwrap();
        let files = r.finish(false, "ok").unwrap();
        let v: Value = serde_json::from_str(&fs::read_to_string(&files[0]).unwrap()).unwrap();
        assert_eq!(v["tables"]["cells"][1]["b"], 1e-20);
        assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
        assert_eq!(v["config_hash"].as_str().unwrap().len(), 12);
    }
}
