//! Raw I/Q file exchange: headerless little-endian f32 interleaved pairs
//! plus a TOML sidecar (same basename, `.meta` extension) carrying the
//! sample rate and center frequency.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BasebandSignal, C64};
use crate::{Error, Result};

const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SidecarMeta {
    schema_version: u32,
    sample_rate: f64,
    center_frequency: f64,
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta")
}

/// Write interleaved f32 I/Q samples and the metadata sidecar.
pub fn write_iq(path: impl AsRef<Path>, sig: &BasebandSignal, center_frequency: f64) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(sig.samples.len() * 8);
    for z in &sig.samples {
        bytes.extend_from_slice(&(z.re as f32).to_le_bytes());
        bytes.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    let meta = SidecarMeta {
        schema_version: SCHEMA_VERSION,
        sample_rate: sig.sample_rate,
        center_frequency,
    };
    let text = toml::to_string(&meta).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(sidecar_path(path), text)?;
    Ok(())
}

/// Read a raw I/Q file and its sidecar; returns the signal and the recorded
/// center frequency.
pub fn read_iq(path: impl AsRef<Path>) -> Result<(BasebandSignal, f64)> {
    let path = path.as_ref();
    let bytes = fs::read(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::param(format!(
            "I/Q file {} length {} is not a whole number of complex f32 pairs",
            path.display(),
            bytes.len()
        )));
    }
    let meta_text = fs::read_to_string(sidecar_path(path)).map_err(|e| {
        Error::Config(format!(
            "missing sidecar {}: {e}",
            sidecar_path(path).display()
        ))
    })?;
    let meta: SidecarMeta =
        toml::from_str(&meta_text).map_err(|e| Error::Config(format!("bad sidecar: {e}")))?;
    if meta.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported sidecar schema_version {}",
            meta.schema_version
        )));
    }
    let mut samples = Vec::with_capacity(bytes.len() / 8);
    for chunk in bytes.chunks_exact(8) {
        let re = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64;
        let im = f32::from_le_bytes([chunk[4], chunk[5], chunk[6], chunk[7]]) as f64;
        samples.push(C64::new(re, im));
    }
    let sig = BasebandSignal::new(samples, meta.sample_rate)?;
    Ok((sig, meta.center_frequency))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmpdir(tag: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("iqfile-test-{tag}-{}", std::process::id()));
        fs::create_dir_all(&d).unwrap();
        d
    }

    #[test]
    fn round_trip_preserves_f32_samples() {
        let dir = tmpdir("rt");
        let path = dir.join("burst.iq");
        // values chosen representable in f32
        let samples: Vec<C64> = (0..300)
            .map(|i| C64::new(i as f64 * 0.25 - 10.0, (i % 17) as f64 * 0.5))
            .collect();
        let sig = BasebandSignal::new(samples, 48_000.0).unwrap();
        write_iq(&path, &sig, 12_500.0).unwrap();
        let (back, fc) = read_iq(&path).unwrap();
        assert_eq!(back.sample_rate, 48_000.0);
        assert_eq!(fc, 12_500.0);
        assert_eq!(back.samples, sig.samples);
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn file_layout_is_le_f32_pairs() {
        let dir = tmpdir("layout");
        let path = dir.join("two.iq");
        let sig = BasebandSignal::new(
            vec![C64::new(1.0, -2.0), C64::new(0.5, 3.25)],
            1000.0,
        )
        .unwrap();
        write_iq(&path, &sig, 0.0).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 16);
        let mut expect = Vec::new();
        for v in [1.0f32, -2.0, 0.5, 3.25] {
            expect.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(bytes, expect);
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn missing_or_bad_sidecar_is_an_error() {
        let dir = tmpdir("meta");
        let path = dir.join("orphan.iq");
        fs::write(&path, [0u8; 8]).unwrap();
        assert!(read_iq(&path).is_err());
        fs::write(
            sidecar_path(&path),
            "schema_version = 99\nsample_rate = 1.0\ncenter_frequency = 0.0\n",
        )
        .unwrap();
        assert!(read_iq(&path).is_err());
        // unknown keys rejected
        fs::write(
            sidecar_path(&path),
            "schema_version = 1\nsample_rate = 1.0\ncenter_frequency = 0.0\nbogus = 3\n",
        )
        .unwrap();
        assert!(read_iq(&path).is_err());
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn truncated_payload_is_an_error() {
        let dir = tmpdir("trunc");
        let path = dir.join("cut.iq");
        fs::write(&path, [1u8; 13]).unwrap();
        fs::write(
            sidecar_path(&path),
            "schema_version = 1\nsample_rate = 1.0\ncenter_frequency = 0.0\n",
        )
        .unwrap();
        assert!(read_iq(&path).is_err());
        fs::remove_dir_all(dir).ok();
    }
}
