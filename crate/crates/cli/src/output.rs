use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::error::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DDEGK_OUT_DIR";

/// Output directory plus the list of files written so far.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    /// `explicit` wins over the environment, which wins over the working
    /// directory.
    pub fn open(explicit: Option<&Path>) -> Result<Self, CliError> {
        let dir = match explicit {
            Some(p) => p.to_path_buf(),
            None => std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".")),
        };
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir, written: Vec::new() })
    }

    /// Writes `name` atomically: a temporary sibling is renamed into place.
    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp{}", std::process::id()));
        let io = |e: std::io::Error, p: &Path| CliError::Io(format!("{}: {e}", p.display()));
        fs::write(&tmp, contents).map_err(|e| io(e, &tmp))?;
        if let Err(e) = fs::rename(&tmp, &target) {
            let _ = fs::remove_file(&tmp);
            return Err(io(e, &target));
        }
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Metadata sufficient to replay the run with `--config <file>`.
    pub fn finish<C: Serialize>(mut self, command: &str, config: &C, extra: serde_json::Value) -> Result<(), CliError> {
        let mut meta = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "rng": ddegk::stochastic::RNG_ALGORITHM,
            "outputs": self.written,
        });
        if let (Some(m), serde_json::Value::Object(e)) = (meta.as_object_mut(), extra) {
            m.extend(e);
        }
        self.write_json(&format!("{command}_meta.json"), &meta)
    }
}

/// Comma-separated rows under a header, LF line endings.
pub fn csv<I, R>(header: &str, rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
