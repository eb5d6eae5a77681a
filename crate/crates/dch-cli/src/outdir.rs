//! Output directory handling. Each command that produces files claims a
//! directory with a lock file so two runs cannot interleave output, and
//! always leaves a manifest describing what ran, even on failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dch_core::diagnostics::DiagnosticsRecord;

use crate::error::{CliError, CliResult};

/// Environment variable that reroots relative output directories, so tests
/// and batch drivers can redirect runs without editing configs.
pub const OUTPUT_ROOT_ENV: &str = "DCH_OUTPUT_ROOT";

const LOCK_NAME: &str = ".lock";

pub struct OutputDir {
    path: PathBuf,
    started: Instant,
}

impl OutputDir {
    /// Create (if needed) and lock the directory. Fails if another run holds
    /// the lock; a crashed run leaves the lock behind on purpose, flagging
    /// the directory as suspect until it is inspected and the lock removed.
    pub fn claim(configured: &Path) -> CliResult<Self> {
        let path = match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if configured.is_relative() => PathBuf::from(root).join(configured),
            _ => configured.to_path_buf(),
        };
        fs::create_dir_all(&path).map_err(|e| {
            crate::error::runtime(format!("cannot create {}: {e}", path.display()))
        })?;
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(path.join(LOCK_NAME))
        {
            Ok(_) => {}
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(CliError::Validation(format!(
                    "{} is locked by another run (remove {}/{LOCK_NAME} if that run is dead)",
                    path.display(),
                    path.display()
                )));
            }
            Err(e) => {
                return Err(crate::error::runtime(format!(
                    "cannot lock {}: {e}",
                    path.display()
                )));
            }
        }
        Ok(OutputDir {
            path,
            started: Instant::now(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    /// Write the run manifest. Called once per command, with `outcome`
    /// describing success or the error that stopped the run.
    pub fn write_manifest(
        &self,
        command: &str,
        config_path: Option<&Path>,
        config_text: Option<&str>,
        seed: Option<u64>,
        outcome: &str,
    ) -> CliResult<()> {
        let mut s = String::new();
        s.push_str(&format!("command: {command}\n"));
        s.push_str(&format!("version: {}\n", env!("CARGO_PKG_VERSION")));
        s.push_str("diagnostics_schema: 1\n");
        s.push_str(&format!(
            "wall_seconds: {:.3}\n",
            self.started.elapsed().as_secs_f64()
        ));
        s.push_str(&format!("outcome: {outcome}\n"));
        if let Some(seed) = seed {
            s.push_str(&format!("seed: {seed}\n"));
        }
        if let Some(p) = config_path {
            s.push_str(&format!("config_path: {}\n", p.display()));
        }
        if let Some(text) = config_text {
            s.push_str("config:\n");
            for line in text.lines() {
                s.push_str("  ");
                s.push_str(line);
                s.push('\n');
            }
        }
        fs::write(self.file("manifest.txt"), s)
            .map_err(|e| crate::error::runtime(format!("cannot write manifest: {e}")))
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        // released only on orderly exit; a panic keeps the lock (see claim)
        if !std::thread::panicking() {
            let _ = fs::remove_file(self.path.join(LOCK_NAME));
        }
    }
}

/// Diagnostics CSV with a fixed schema. Floats are written with the shortest
/// round-trip formatting, so identical runs produce byte-identical files.
pub struct DiagnosticsCsv {
    file: fs::File,
}

pub const DIAGNOSTICS_HEADER: &str =
    "t,energy_e,energy_f,dissipation_d,conserved_g,min_g,max_abs_u";

impl DiagnosticsCsv {
    pub fn create(path: &Path) -> CliResult<Self> {
        let mut file = fs::File::create(path).map_err(|e| {
            crate::error::runtime(format!("cannot create {}: {e}", path.display()))
        })?;
        writeln!(file, "{DIAGNOSTICS_HEADER}")
            .map_err(|e| crate::error::runtime(format!("cannot write {}: {e}", path.display())))?;
        Ok(DiagnosticsCsv { file })
    }

    /// Open an existing file for appending without re-emitting the header;
    /// refuses files that do not start with the expected schema.
    pub fn append(path: &Path) -> CliResult<Self> {
        let head = fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read {}: {e}", path.display()))
        })?;
        if head.lines().next() != Some(DIAGNOSTICS_HEADER) {
            return Err(CliError::Validation(format!(
                "{} does not look like a diagnostics file (header mismatch)",
                path.display()
            )));
        }
        let file = fs::OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| crate::error::runtime(format!("cannot open {}: {e}", path.display())))?;
        Ok(DiagnosticsCsv { file })
    }

    pub fn write_record(&mut self, r: &DiagnosticsRecord) -> CliResult<()> {
        writeln!(
            self.file,
            "{},{},{},{},{},{},{}",
            r.t, r.energy_e, r.energy_f, r.dissipation_d, r.conserved_g, r.min_g, r.max_abs_u
        )
        .map_err(|e| crate::error::runtime(format!("cannot write diagnostics row: {e}")))
    }

    pub fn flush(&mut self) -> CliResult<()> {
        self.file
            .flush()
            .map_err(|e| crate::error::runtime(format!("cannot flush diagnostics: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_excludes_second_claim() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("run");
        let first = OutputDir::claim(&target).unwrap();
        let second = OutputDir::claim(&target);
        assert!(matches!(second, Err(CliError::Validation(_))));
        drop(first);
        // lock released on orderly drop, directory reusable
        let third = OutputDir::claim(&target).unwrap();
        drop(third);
    }

    #[test]
    fn manifest_embeds_config() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("run");
        let out = OutputDir::claim(&target).unwrap();
        out.write_manifest(
            "simulate",
            Some(Path::new("cfg.toml")),
            Some("t_end = 1.0\n[grid]\nn = 32"),
            Some(7),
            "ok",
        )
        .unwrap();
        let text = fs::read_to_string(out.file("manifest.txt")).unwrap();
        assert!(text.contains("command: simulate"));
        assert!(text.contains("outcome: ok"));
        assert!(text.contains("  n = 32"));
        assert!(text.contains("seed: 7"));
        assert!(text.contains("diagnostics_schema: 1"));
    }

    #[test]
    fn append_checks_header() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("d.csv");
        {
            let mut w = DiagnosticsCsv::create(&good).unwrap();
            w.write_record(&DiagnosticsRecord {
                t: 0.0,
                energy_e: 1.0,
                energy_f: 0.0,
                dissipation_d: 0.5,
                conserved_g: 2.0,
                min_g: 0.1,
                max_abs_u: 1.0,
            })
            .unwrap();
        }
        assert!(DiagnosticsCsv::append(&good).is_ok());
        let bad = dir.path().join("other.csv");
        fs::write(&bad, "a,b,c\n").unwrap();
        assert!(DiagnosticsCsv::append(&bad).is_err());
    }
}
