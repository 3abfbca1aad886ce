//! On-disk formats: the binary embedding matrix file and the TOML scenario
//! file.
//!
//! Embedding file layout, all integers little-endian:
//!
//! ```text
//! offset  size  field
//! 0       8     magic "CBMBREMB"
//! 8       4     version (u32, currently 1)
//! 12      8     rows (u64)
//! 20      4     dims (u32)
//! 24      4*rows*dims   payload, f32 row-major
//! ```
//!
//! Write-then-read is bitwise identity; readers validate magic, version,
//! and exact payload length.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::synth::ScenarioSpec;
use crate::types::EmbeddingMatrix;

pub const MAGIC: [u8; 8] = *b"CBMBREMB";
pub const FORMAT_VERSION: u32 = 1;

const HEADER_LEN: u64 = 8 + 4 + 8 + 4;

pub fn write_embeddings<P: AsRef<Path>>(path: P, matrix: &EmbeddingMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(matrix.rows() as u64).to_le_bytes())?;
    w.write_all(&(matrix.dims() as u32).to_le_bytes())?;
    for v in matrix.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_embeddings<P: AsRef<Path>>(path: P) -> Result<EmbeddingMatrix> {
    let file = File::open(path)?;
    let file_len = file.metadata()?.len();
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 8];
    read_exact_or_truncated(&mut r, &mut magic, HEADER_LEN, file_len)?;
    if magic != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found: magic,
        });
    }

    let mut u32_buf = [0u8; 4];
    let mut u64_buf = [0u8; 8];
    read_exact_or_truncated(&mut r, &mut u32_buf, HEADER_LEN, file_len)?;
    let version = u32::from_le_bytes(u32_buf);
    if version != FORMAT_VERSION {
        return Err(Error::VersionUnsupported(version));
    }
    read_exact_or_truncated(&mut r, &mut u64_buf, HEADER_LEN, file_len)?;
    let rows = u64::from_le_bytes(u64_buf) as usize;
    read_exact_or_truncated(&mut r, &mut u32_buf, HEADER_LEN, file_len)?;
    let dims = u32::from_le_bytes(u32_buf) as usize;

    let expected_len = HEADER_LEN + (rows as u64) * (dims as u64) * 4;
    if file_len < expected_len {
        return Err(Error::TruncatedFile {
            expected: expected_len,
            actual: file_len,
        });
    }
    if file_len > expected_len {
        return Err(Error::TrailingData(file_len - expected_len));
    }

    let mut data = Vec::with_capacity(rows * dims);
    let mut f32_buf = [0u8; 4];
    for _ in 0..rows * dims {
        r.read_exact(&mut f32_buf)?;
        data.push(f32::from_le_bytes(f32_buf));
    }
    EmbeddingMatrix::new(data, rows, dims)
}

fn read_exact_or_truncated(
    r: &mut impl Read,
    buf: &mut [u8],
    expected: u64,
    actual: u64,
) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == ErrorKind::UnexpectedEof {
            Error::TruncatedFile { expected, actual }
        } else {
            Error::Io(e)
        }
    })
}

pub fn read_scenario<P: AsRef<Path>>(path: P) -> Result<ScenarioSpec> {
    let text = std::fs::read_to_string(path)?;
    let spec: ScenarioSpec =
        toml::from_str(&text).map_err(|e| Error::InvalidScenario(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

pub fn write_scenario<P: AsRef<Path>>(path: P, spec: &ScenarioSpec) -> Result<()> {
    spec.validate()?;
    let text =
        toml::to_string_pretty(spec).map_err(|e| Error::InvalidScenario(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}
