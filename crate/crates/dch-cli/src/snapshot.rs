//! Binary state snapshots. A snapshot stores the field together with enough
//! stepper state to resume a run exactly, a digest of the model parameters
//! so a resume against different physics is refused, and a trailing checksum
//! so truncated or corrupted files are detected before any work starts.
//!
//! Layout (all integers and floats little endian):
//!   8  bytes  magic "DCHSNAP1"
//!   u32       format version (currently 1)
//!   u32       grid dimension
//!   u64       grid points per axis
//!   u64       step count at capture
//!   f64       simulation time
//!   f64       next step size (adaptive runs resume their controller)
//!   32 bytes  sha256 of the canonical parameter string
//!   n^dim f64 field values, row major
//!   32 bytes  sha256 of everything above

use std::fs;
use std::io::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use dch_core::model::ModelParams;
use dch_core::spectral::{PeriodicField, PeriodicGrid};

use crate::error::{CliError, CliResult};

const MAGIC: &[u8; 8] = b"DCHSNAP1";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 + 8 + 8 + 8 + 8 + 32;

#[derive(Debug)]
pub struct SnapshotData {
    pub t: f64,
    pub step_count: u64,
    pub dt_next: f64,
    pub u: PeriodicField,
    pub params_digest: [u8; 32],
}

/// Digest of everything a resumed run must agree on: grid shape and every
/// model parameter. Floats are hashed by bit pattern, so the check is exact.
pub fn params_digest(grid: PeriodicGrid, p: &ModelParams) -> [u8; 32] {
    let mut line = format!(
        "grid {} {} eps {:016x} m {:016x} m0 {:016x} theta {:016x} pot {:?} scaled {} floor {:016x}",
        grid.dim(),
        grid.n(),
        p.epsilon.to_bits(),
        p.m.to_bits(),
        p.m0.to_bits(),
        p.theta.to_bits(),
        p.potential.kind,
        p.scaled_form,
        p.separation_floor.to_bits(),
    );
    match &p.climb {
        None => line.push_str(" climb none"),
        Some(c) => {
            line.push_str(&format!(
                " climb {:016x} {} ",
                c.coefficient.to_bits(),
                c.enabled
            ));
            match &c.f_app {
                dch_core::climb::AppliedForce::Constant(v) => {
                    line.push_str(&format!("const {:016x}", v.to_bits()));
                }
                dch_core::climb::AppliedForce::Field(f) => {
                    line.push_str("field ");
                    let mut h = Sha256::new();
                    for v in f.data() {
                        h.update(v.to_le_bytes());
                    }
                    line.push_str(&format!("{:x}", h.finalize()));
                }
            }
        }
    }
    let mut h = Sha256::new();
    h.update(line.as_bytes());
    h.finalize().into()
}

pub fn write_snapshot(
    path: &Path,
    u: &PeriodicField,
    t: f64,
    step_count: u64,
    dt_next: f64,
    params_digest: &[u8; 32],
) -> CliResult<()> {
    let grid = u.grid();
    let mut buf = Vec::with_capacity(HEADER_LEN + grid.len() * 8 + 32);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.n() as u64).to_le_bytes());
    buf.extend_from_slice(&step_count.to_le_bytes());
    buf.extend_from_slice(&t.to_le_bytes());
    buf.extend_from_slice(&dt_next.to_le_bytes());
    buf.extend_from_slice(params_digest);
    for v in u.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let sum: [u8; 32] = Sha256::digest(&buf).into();
    buf.extend_from_slice(&sum);

    let mut f = fs::File::create(path)
        .map_err(|e| crate::error::runtime(format!("cannot create {}: {e}", path.display())))?;
    f.write_all(&buf)
        .and_then(|()| f.sync_all())
        .map_err(|e| crate::error::runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn read_snapshot(path: &Path) -> CliResult<SnapshotData> {
    let buf = fs::read(path).map_err(|e| {
        CliError::Validation(format!("cannot read snapshot {}: {e}", path.display()))
    })?;
    let corrupt = |msg: &str| CliError::CorruptPayload(format!("{}: {msg}", path.display()));

    if buf.len() < HEADER_LEN + 32 {
        return Err(corrupt("file shorter than header"));
    }
    if &buf[0..8] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(buf[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(CliError::VersionMismatch(format!(
            "{} has format version {version}, this build reads version {VERSION}",
            path.display()
        )));
    }
    let body = &buf[..buf.len() - 32];
    let stored = &buf[buf.len() - 32..];
    let sum: [u8; 32] = Sha256::digest(body).into();
    if sum != stored {
        return Err(corrupt("checksum mismatch"));
    }

    let dim = u32::from_le_bytes(buf[12..16].try_into().unwrap()) as usize;
    let n = u64::from_le_bytes(buf[16..24].try_into().unwrap()) as usize;
    let step_count = u64::from_le_bytes(buf[24..32].try_into().unwrap());
    let t = f64::from_le_bytes(buf[32..40].try_into().unwrap());
    let dt_next = f64::from_le_bytes(buf[40..48].try_into().unwrap());
    let mut params_digest = [0u8; 32];
    params_digest.copy_from_slice(&buf[48..80]);

    let grid = PeriodicGrid::new(dim, n)
        .map_err(|e| corrupt(&format!("invalid grid in header: {e}")))?;
    let expected = HEADER_LEN + grid.len() * 8 + 32;
    if buf.len() != expected {
        return Err(corrupt(&format!(
            "expected {expected} bytes for a {n}^{dim} field, found {}",
            buf.len()
        )));
    }
    let data: Vec<f64> = body[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let u = PeriodicField::from_data(grid, data)
        .map_err(|e| corrupt(&format!("field rejected: {e}")))?;
    Ok(SnapshotData {
        t,
        step_count,
        dt_next,
        u,
        params_digest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_field() -> PeriodicField {
        let grid = PeriodicGrid::new(2, 8).unwrap();
        PeriodicField::from_fn(grid, |x, y| (x.sin() + 0.5 * y.cos()) * 0.3)
    }

    #[test]
    fn round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        let u = sample_field();
        let p = ModelParams::standard(0.2, 0.1);
        let digest = params_digest(u.grid(), &p);
        write_snapshot(&path, &u, 0.125, 37, 3.5e-4, &digest).unwrap();
        let s = read_snapshot(&path).unwrap();
        assert_eq!(s.t.to_bits(), 0.125f64.to_bits());
        assert_eq!(s.step_count, 37);
        assert_eq!(s.dt_next.to_bits(), 3.5e-4f64.to_bits());
        assert_eq!(s.params_digest, digest);
        let (a, b) = (u.data(), s.u.data());
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn rejects_truncation_and_flips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        let u = sample_field();
        let digest = [7u8; 32];
        write_snapshot(&path, &u, 1.0, 1, 1e-3, &digest).unwrap();
        let good = fs::read(&path).unwrap();

        fs::write(&path, &good[..good.len() - 9]).unwrap();
        assert!(matches!(
            read_snapshot(&path),
            Err(CliError::CorruptPayload(_))
        ));

        let mut flipped = good.clone();
        flipped[HEADER_LEN + 11] ^= 0x40;
        fs::write(&path, &flipped).unwrap();
        assert!(matches!(
            read_snapshot(&path),
            Err(CliError::CorruptPayload(_))
        ));
    }

    #[test]
    fn rejects_future_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        write_snapshot(&path, &sample_field(), 0.0, 0, 1e-3, &[0; 32]).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[8..12].copy_from_slice(&9u32.to_le_bytes());
        // checksum covers the version, so fix it up to isolate the check
        let body_len = bytes.len() - 32;
        let sum: [u8; 32] = Sha256::digest(&bytes[..body_len]).into();
        bytes[body_len..].copy_from_slice(&sum);
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_snapshot(&path),
            Err(CliError::VersionMismatch(_))
        ));
    }

    #[test]
    fn digest_tracks_parameters() {
        let grid = PeriodicGrid::new(2, 8).unwrap();
        let p = ModelParams::standard(0.2, 0.1);
        let mut q = p.clone();
        q.theta = 0.05;
        assert_ne!(params_digest(grid, &p), params_digest(grid, &q));
        assert_eq!(params_digest(grid, &p), params_digest(grid, &p.clone()));
        let other_grid = PeriodicGrid::new(2, 16).unwrap();
        assert_ne!(params_digest(grid, &p), params_digest(other_grid, &p));
    }
}
