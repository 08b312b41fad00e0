//! Plain-text key=value config files. Flags override file values; file
//! values override built-in defaults.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Parsed key=value file. Keys are normalized: hyphens become underscores.
#[derive(Debug, Default, Clone)]
pub struct KnobFile {
    values: HashMap<String, String>,
}

impl KnobFile {
    pub fn load(path: &Path) -> Result<KnobFile> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut values = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "config {} line {}: expected key=value, got {raw:?}",
                    path.display(),
                    lineno + 1
                );
            };
            values.insert(
                key.trim().replace('-', "_"),
                value.trim().to_string(),
            );
        }
        Ok(KnobFile { values })
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => match raw.parse() {
                Ok(v) => Ok(Some(v)),
                Err(e) => bail!("config key {key}={raw}: {e}"),
            },
        }
    }
}

/// flag > config file > default.
pub fn resolve<T: Copy + std::str::FromStr>(
    flag: Option<T>,
    file: &KnobFile,
    key: &str,
    default: T,
) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    if let Some(v) = flag {
        return Ok(v);
    }
    Ok(file.get(key)?.unwrap_or(default))
}
