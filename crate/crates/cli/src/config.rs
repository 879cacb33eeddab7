//! Optional flat key-value config files. Flags always win; config fills
//! whatever the command line left unset, and unknown keys are rejected.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

pub struct FileConfig {
    entries: HashMap<String, String>,
}

impl FileConfig {
    pub fn empty() -> FileConfig {
        FileConfig {
            entries: HashMap::new(),
        }
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn load(path: &Path) -> Result<FileConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut entries = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!(
                    "{}: line {}: expected key = value",
                    path.display(),
                    lineno + 1
                ))
            })?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileConfig { entries })
    }

    /// Takes a typed value for `key`, if present.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::Usage(format!("config key {key}: cannot parse value {raw:?}"))
            }),
        }
    }

    /// Fails if any unrecognized keys remain.
    pub fn finish(self) -> Result<(), CliError> {
        if let Some(key) = self.entries.keys().next() {
            return Err(CliError::Usage(format!("unknown config key {key:?}")));
        }
        Ok(())
    }
}

/// `flag.or(config)` with a final default: the flags-beat-config rule.
pub fn resolve<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

pub fn resolve_opt<T>(flag: Option<T>, config: Option<T>) -> Option<T> {
    flag.or(config)
}
