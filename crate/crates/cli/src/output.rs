//! Run directory layout: every command writes `data.csv`, `report.json`
//! and `manifest.json` into one directory.

use crate::config::ExperimentConfig;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    pub fn create(base: &Path, command: &str) -> std::io::Result<RunDir> {
        let path = base.join(command);
        fs::create_dir_all(&path)?;
        Ok(RunDir { path })
    }

    pub fn write_manifest(&self, command: &str, cfg: &ExperimentConfig) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            command: &'a str,
            config: &'a ExperimentConfig,
            versions: Versions,
        }
        #[derive(Serialize)]
        struct Versions {
            core: &'static str,
            cli: &'static str,
        }
        let manifest = Manifest {
            command,
            config: cfg,
            versions: Versions {
                core: env!("CARGO_PKG_VERSION"),
                cli: env!("CARGO_PKG_VERSION"),
            },
        };
        fs::write(
            self.path.join("manifest.json"),
            serde_json::to_string_pretty(&manifest).expect("serializable manifest") + "\n",
        )
    }

    pub fn write_report<T: Serialize>(&self, report: &T) -> std::io::Result<()> {
        fs::write(
            self.path.join("report.json"),
            serde_json::to_string_pretty(report).expect("serializable report") + "\n",
        )
    }

    pub fn write_csv(&self, header: &str, rows: &[String]) -> std::io::Result<()> {
        let mut text = String::with_capacity(rows.len() * 32 + header.len() + 1);
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        fs::write(self.path.join("data.csv"), text)
    }
}
