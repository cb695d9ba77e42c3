//! CSV formatting and run manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use movm::PlatoonConfig;
use serde::Serialize;
use serde_json::Value;

use crate::Failure;

/// Shortest decimal that round-trips the value rounded to 12 significant
/// digits. Identical inputs always give identical text.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    let s = format!("{rounded}");
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub struct Csv {
    writer: csv::Writer<Vec<u8>>,
}

impl Csv {
    pub fn new(header: &[String]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Csv { writer }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn write(self, path: &Path) -> Result<(), Failure> {
        let bytes = self
            .writer
            .into_inner()
            .map_err(|e| Failure::io(path, e.into_error()))?;
        write_file(path, &bytes)
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Failure::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("serialisable");
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// `<prefix><suffix>`, e.g. `runs/a` + `.csv`.
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_file: PathBuf,
    pub config: PlatoonConfig,
    pub flags: Value,
    pub outputs: Vec<PathBuf>,
    /// Command-specific metadata (delay quantisation, history policy, …).
    #[serde(skip_serializing_if = "Value::is_null")]
    pub details: Value,
    pub wall_clock_s: f64,
}

pub struct Run {
    start: Instant,
    command: &'static str,
    config_file: PathBuf,
    config: PlatoonConfig,
    flags: Value,
}

impl Run {
    pub fn start(
        command: &'static str,
        config_file: &Path,
        config: &PlatoonConfig,
        flags: Value,
    ) -> Self {
        Run {
            start: Instant::now(),
            command,
            config_file: config_file.to_owned(),
            config: config.clone(),
            flags,
        }
    }

    /// Writes `<prefix>.manifest.json` listing `outputs`, which must already
    /// exist.
    pub fn finish(
        self,
        prefix: &Path,
        outputs: Vec<PathBuf>,
        details: Value,
    ) -> Result<PathBuf, Failure> {
        for p in &outputs {
            let len = fs::metadata(p).map_err(|e| Failure::io(p, e))?.len();
            if len == 0 {
                return Err(Failure::numeric(
                    format!("output {} is empty", p.display()),
                    Value::Null,
                ));
            }
        }
        let manifest = RunManifest {
            command: self.command.into(),
            version: movm::VERSION.into(),
            config_file: self.config_file,
            config: self.config,
            flags: self.flags,
            outputs,
            details,
            wall_clock_s: self.start.elapsed().as_secs_f64(),
        };
        let path = with_suffix(prefix, ".manifest.json");
        write_json(&path, &manifest)?;
        Ok(path)
    }
}
