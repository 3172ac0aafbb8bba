//! File I/O with provenance stamps.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Failure;
use cryo_edram::Error;

pub const TOOL: &str = concat!("cryo-edram ", env!("CARGO_PKG_VERSION"));

/// Where an output came from.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: String,
    /// SHA-256 of the input profile (or anchor file for `calibrate`).
    pub input_sha256: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(input: &[u8], seed: u64) -> Self {
        Self {
            tool: TOOL.into(),
            input_sha256: hex::encode(Sha256::digest(input)),
            seed,
        }
    }

    pub fn comment(&self) -> String {
        format!(
            "# {}; input_sha256={}; seed={}\n",
            self.tool, self.input_sha256, self.seed
        )
    }
}

pub fn read_text(path: &Path) -> Result<String, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    String::from_utf8(bytes)
        .map_err(|_| Failure::Model(Error::Parse(format!("{}: not UTF-8 text", path.display()))))
}

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(io(path))
}

/// Delimited table with a provenance comment line and optional extra comments.
pub fn write_csv(
    path: &Path,
    prov: &Provenance,
    comments: &[String],
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), Failure> {
    let mut buf = prov.comment().into_bytes();
    for c in comments {
        writeln!(buf, "# {c}").map_err(io(path))?;
    }
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        if !header.is_empty() {
            w.write_record(header).map_err(|e| Failure::Io(e.to_string()))?;
        }
        for r in rows {
            w.write_record(r).map_err(|e| Failure::Io(e.to_string()))?;
        }
        w.flush().map_err(io(path))?;
    }
    fs::write(path, buf).map_err(io(path))
}

/// Structured report: the serialized value followed by a `[provenance]` table.
pub fn write_toml(path: &Path, prov: &Provenance, value: &impl Serialize) -> Result<(), Failure> {
    let body = toml::to_string(value)
        .map_err(|e| Failure::Model(Error::Parse(format!("serializing {}: {e}", path.display()))))?;
    let tail = toml::to_string(&Wrap { provenance: prov })
        .map_err(|e| Failure::Model(Error::Parse(e.to_string())))?;
    write_text(path, &format!("{body}\n{tail}"))
}

#[derive(Serialize)]
struct Wrap<'a> {
    provenance: &'a Provenance,
}

pub fn num(x: f64) -> String {
    format!("{x:e}")
}
