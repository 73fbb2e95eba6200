//! TOML run configuration.
//!
//! Top-level keys apply to every experiment; a table named after an
//! experiment overrides them for that experiment. `seed` and `out` are run
//! options, every other key is an experiment parameter.
//!
//! ```toml
//! seed = 7
//! n = 100
//!
//! [fig-shedding]
//! h = 165
//! out = "results/shedding"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileSettings {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub params: BTreeMap<String, String>,
}

pub fn load(path: &Path, experiment: &str) -> Result<FileSettings> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text, experiment).map_err(|e| match e {
        ParseError::Toml(source) => CliError::Config {
            path: path.to_path_buf(),
            source,
        },
        ParseError::Value(msg) => CliError::invalid(format!("config {}: {msg}", path.display())),
    })
}

#[derive(Debug)]
enum ParseError {
    Toml(toml::de::Error),
    Value(String),
}

fn parse(text: &str, experiment: &str) -> std::result::Result<FileSettings, ParseError> {
    let table: Table = text.parse().map_err(ParseError::Toml)?;
    let mut out = FileSettings::default();
    apply(&mut out, &table, true)?;
    if let Some(section) = table.get(experiment) {
        let section = section
            .as_table()
            .ok_or_else(|| ParseError::Value(format!("`{experiment}` must be a table")))?;
        apply(&mut out, section, false)?;
    }
    Ok(out)
}

fn apply(
    out: &mut FileSettings,
    table: &Table,
    top_level: bool,
) -> std::result::Result<(), ParseError> {
    for (key, value) in table {
        match (key.as_str(), value) {
            (_, Value::Table(_)) if top_level => {}
            ("seed", Value::Integer(s)) if *s >= 0 => out.seed = Some(*s as u64),
            ("seed", _) => {
                return Err(ParseError::Value(
                    "`seed` must be a non-negative integer".into(),
                ))
            }
            ("out", Value::String(s)) => out.out = Some(PathBuf::from(s)),
            ("out", _) => return Err(ParseError::Value("`out` must be a string".into())),
            (k, v) => {
                out.params.insert(k.to_string(), scalar(k, v)?);
            }
        }
    }
    Ok(())
}

fn scalar(key: &str, v: &Value) -> std::result::Result<String, ParseError> {
    Ok(match v {
        Value::String(s) => s.clone(),
        Value::Integer(i) => i.to_string(),
        Value::Float(f) => f.to_string(),
        Value::Boolean(b) => b.to_string(),
        Value::Array(items) => items
            .iter()
            .map(|x| scalar(key, x))
            .collect::<std::result::Result<Vec<_>, _>>()?
            .join(","),
        _ => {
            return Err(ParseError::Value(format!(
                "`{key}` has an unsupported value type"
            )))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
seed = 7
n = 100
hs = [150, 160]

[fig-shedding]
h = 165
n = 50
out = "o"

[other]
h = 1
"#;

    #[test]
    fn sections_override_top_level() {
        let s = parse(TEXT, "fig-shedding").unwrap();
        assert_eq!(s.seed, Some(7));
        assert_eq!(s.out, Some(PathBuf::from("o")));
        assert_eq!(s.params["n"], "50");
        assert_eq!(s.params["h"], "165");
        assert_eq!(s.params["hs"], "150,160");
    }

    #[test]
    fn unrelated_sections_ignored() {
        let s = parse(TEXT, "fig-perfect-jsq").unwrap();
        assert_eq!(s.params.len(), 2);
        assert!(!s.params.contains_key("h"));
    }

    #[test]
    fn bad_types_rejected() {
        assert!(matches!(parse("seed = -1", "x"), Err(ParseError::Value(_))));
        assert!(matches!(parse("seed = ", "x"), Err(ParseError::Toml(_))));
        assert!(matches!(
            parse("x = 1\n[x]\n", "y"),
            Err(ParseError::Toml(_))
        ));
    }
}
