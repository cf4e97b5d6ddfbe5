use std::path::{Path, PathBuf};

use emocluster_core::{canonical, Result};
use serde::Serialize;

/// Provenance record written next to every artifact as `<out>.manifest.json`.
///
/// Everything except `duration_secs` is a pure function of the invocation.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a, C: Serialize> {
    pub command: &'static str,
    /// Every flag of the command with defaults filled in.
    pub config: &'a C,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub tool_version: &'static str,
    pub duration_secs: f64,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

pub fn write<C: Serialize>(out: &Path, manifest: &RunManifest<'_, C>) -> Result<()> {
    canonical::write_file(&manifest_path(out), manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_sits_next_to_output() {
        assert_eq!(manifest_path(Path::new("a/run.json")), Path::new("a/run.json.manifest.json"));
    }
}
