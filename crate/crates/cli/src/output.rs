//! CSV artifacts and the JSON run summary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SUMMARY_FILE: &str = "summary.json";

/// `<crate version>+<git hash>`.
pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("STICKYSIM_GIT_HASH"));

/// Everything an experiment produces, held in memory until written.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
    pub metrics: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub residuals: BTreeMap<String, f64>,
    pub tv_distances: BTreeMap<String, f64>,
    pub checks: BTreeMap<String, bool>,
    pub notes: BTreeMap<String, String>,
}

impl Artifacts {
    /// Serializes `rows` as CSV under `name`. Names must be distinct.
    pub fn csv<R, I>(&mut self, name: &str, rows: I) -> Result<()>
    where
        R: Serialize,
        I: IntoIterator<Item = R>,
    {
        if self.files.iter().any(|(f, _)| f == name) || name == SUMMARY_FILE {
            return Err(CliError::invalid(format!("duplicate output `{name}`")));
        }
        let csv_err = |source| CliError::Csv {
            path: PathBuf::from(name),
            source,
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in rows {
            w.serialize(row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io {
            path: PathBuf::from(name),
            source: e.into_error(),
        })?;
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    pub fn file_names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b.as_slice())
    }

    /// Writes every CSV into `dir` and returns their paths.
    pub fn write_files(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        self.files
            .iter()
            .map(|(name, bytes)| {
                let path = dir.join(name);
                fs::write(&path, bytes).map_err(|source| CliError::Io {
                    path: path.clone(),
                    source,
                })?;
                Ok(path)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: String,
    pub version: String,
    pub seed: u64,
    pub wall_clock_seconds: f64,
    pub params: BTreeMap<String, String>,
    pub tolerances: BTreeMap<String, f64>,
    pub residuals: BTreeMap<String, f64>,
    pub tv_distances: BTreeMap<String, f64>,
    pub metrics: BTreeMap<String, f64>,
    pub checks: BTreeMap<String, bool>,
    pub notes: BTreeMap<String, String>,
    pub files: Vec<String>,
}

impl Summary {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(SUMMARY_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("summary is serializable");
        text.push('\n');
        fs::write(&path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        i: usize,
        p: f64,
    }

    #[test]
    fn csv_header_and_rows() {
        let mut a = Artifacts::default();
        a.csv("x.csv", (0..2).map(|i| Row { i, p: 0.5 })).unwrap();
        assert_eq!(a.file("x.csv").unwrap(), b"i,p\n0,0.5\n1,0.5\n");
        assert!(a.csv("x.csv", std::iter::empty::<Row>()).is_err());
        assert!(a.csv(SUMMARY_FILE, std::iter::empty::<Row>()).is_err());
    }

    #[test]
    fn version_carries_hash() {
        assert!(VERSION.starts_with(env!("CARGO_PKG_VERSION")));
        assert!(VERSION.contains('+'));
    }
}
