use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::ExperimentSpec;
use crate::{write_file, ExperimentError};

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), ExperimentError> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| ExperimentError::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| ExperimentError::io(dir, err)))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_files(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

/// `out_dir/manifest.txt`: configuration echo, seeds and the SHA-256 of every
/// artifact under `command_dir`, sorted by path.
pub fn write_manifest(spec: &ExperimentSpec, command_dir: &Path) -> Result<PathBuf, ExperimentError> {
    let mut files = Vec::new();
    collect_files(command_dir, &mut files)?;
    let mut s = String::new();
    let _ = writeln!(s, "# gradflow {}", env!("CARGO_PKG_VERSION"));
    s.push_str("# configuration\n");
    s.push_str(&spec.echo());
    let seeds: Vec<String> = spec.seeds().iter().map(|x| x.to_string()).collect();
    let _ = writeln!(s, "# seeds\nseeds = {}", seeds.join(","));
    s.push_str("# artifacts (sha256, path relative to out_dir)\n");
    for f in files {
        let bytes = fs::read(&f).map_err(|e| ExperimentError::io(&f, e))?;
        let rel = f.strip_prefix(&spec.out_dir).unwrap_or(&f);
        let _ = writeln!(s, "{:x}  {}", Sha256::digest(&bytes), rel.display());
    }
    let path = spec.out_dir.join("manifest.txt");
    write_file(&path, s.as_bytes())?;
    Ok(path)
}
