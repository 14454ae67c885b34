//! The server configuration file: one `key = value` per line, `#` starts a
//! comment. Unknown keys are an error so typos do not go unnoticed.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

pub const DEFAULT_MAX_UPLOAD_BYTES: u64 = 512 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub data_dir: PathBuf,
    pub listen_addr: SocketAddr,
    pub max_upload_bytes: u64,
    pub session_ttl_hours: i64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            listen_addr: SocketAddr::from(([127, 0, 0, 1], 8080)),
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
            session_ttl_hours: 24,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = Config::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |what: &str| ConfigError(format!("line {}: {what}", n + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value"))?;
            let value = value.trim();
            match key.trim() {
                "data_dir" => config.data_dir = PathBuf::from(value),
                "listen_addr" => config.listen_addr = value.parse().map_err(|_| err("bad listen_addr"))?,
                "max_upload_bytes" => config.max_upload_bytes = value.parse().map_err(|_| err("bad max_upload_bytes"))?,
                "session_ttl_hours" => {
                    config.session_ttl_hours = value.parse().ok().filter(|&h| h > 0).ok_or_else(|| err("bad session_ttl_hours"))?
                }
                other => return Err(err(&format!("unknown key {other:?}"))),
            }
        }
        Ok(config)
    }

    /// Read `path`; relative data directories resolve against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        if config.data_dir.is_relative() {
            if let Some(dir) = path.parent() {
                config.data_dir = dir.join(&config.data_dir);
            }
        }
        Ok(config)
    }
}
