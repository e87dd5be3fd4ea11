//! Shared on-disk layout for binary artifacts: one line of compact JSON
//! terminated by `\n`, followed by a block of little-endian IEEE-754 float64.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub(crate) fn write_artifact<H: Serialize>(path: &Path, header: &H, blocks: &[&[f64]]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for block in blocks {
        for v in block.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads the header and the whole float payload.
pub(crate) fn read_artifact<H: DeserializeOwned>(path: &Path) -> Result<(H, Vec<f64>)> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::ArtifactNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let mut reader = BufReader::new(file);
    let mut line = Vec::new();
    reader.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::InvalidFormat("missing header line".into()));
    }
    let header: H = serde_json::from_slice(&line)?;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::InvalidFormat(format!("payload of {} bytes is not a whole number of float64", bytes.len())));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    Ok((header, values))
}

/// Formats a float with 17 significant digits; non-finite values become `nan`/`inf`.
pub(crate) fn sci17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// JSON number with 17 significant digits (`null` when not finite).
#[derive(Debug, Clone, Copy)]
pub(crate) struct Sci17(pub f64);

impl Serialize for Sci17 {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            let raw = serde_json::value::RawValue::from_string(sci17(self.0)).map_err(serde::ser::Error::custom)?;
            raw.serialize(serializer)
        } else {
            serializer.serialize_none()
        }
    }
}
