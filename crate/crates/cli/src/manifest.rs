//! Pair manifests: `pair_id,ir,vi[,fused]` per line.
//!
//! Blank lines and `#` comments are skipped, as is a leading
//! `pair_id,...` header. Relative paths resolve against the manifest's
//! directory.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use depool_core::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRow {
    pub id: String,
    pub ir: PathBuf,
    pub vi: PathBuf,
    pub fused: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairManifest {
    pub rows: Vec<PairRow>,
}

impl PairManifest {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|msg| Error::Parameter(format!("{}: {msg}", path.display())))
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, String> {
        let mut rows = Vec::new();
        let mut seen = HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if rows.is_empty() && cols[0] == "pair_id" {
                continue;
            }
            if !(3..=4).contains(&cols.len()) || cols.iter().any(|c| c.is_empty()) {
                return Err(format!("line {}: expected pair_id,ir,vi[,fused]", n + 1));
            }
            if !seen.insert(cols[0].to_string()) {
                return Err(format!("line {}: duplicate pair id {:?}", n + 1, cols[0]));
            }
            rows.push(PairRow {
                id: cols[0].to_string(),
                ir: base.join(cols[1]),
                vi: base.join(cols[2]),
                fused: cols.get(3).map(|p| base.join(p)),
            });
        }
        if rows.is_empty() {
            return Err("manifest has no rows".into());
        }
        Ok(PairManifest { rows })
    }
}
