use std::io;
use std::path::Path;

use sha2::{Digest, Sha256};

/// Rows of strings written as CSV with a header row and LF line endings.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        debug_assert_eq!(fields.len(), self.header.len());
        self.rows.push(fields.to_vec());
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Copies the config verbatim and writes manifest.txt next to the outputs.
pub fn write_manifest(out: &Path, subcommand: &str, config: &str, seed: u64, files: &[String]) -> io::Result<()> {
    std::fs::write(out.join("config.toml"), config)?;
    let mut m = String::new();
    m.push_str(&format!("subcommand = {subcommand}\n"));
    m.push_str(&format!("config_sha256 = {}\n", sha256_hex(config.as_bytes())));
    m.push_str(&format!("seed = {seed}\n"));
    m.push_str(&format!("svlift_cli_version = {}\n", env!("CARGO_PKG_VERSION")));
    m.push_str("seed_derivation = splitmix64(master + (index + 1) * 0x9E3779B97F4A7C15), ChaCha8 streams\n");
    for f in files {
        m.push_str(&format!("output = {f}\n"));
    }
    std::fs::write(out.join("manifest.txt"), m)
}
