//! The `dvec` vector file: per vector a little-endian `u32` dimension
//! followed by that many little-endian `f64` values. Ids are positional.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

pub fn write_vectors<W: Write, V: AsRef<[f64]>>(out: &mut W, vectors: &[V]) -> Result<()> {
    for v in vectors {
        let v = v.as_ref();
        out.write_all(&u32::try_from(v.len()).context("vector too long")?.to_le_bytes())?;
        for x in v {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_vectors<R: Read>(input: &mut R) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    let mut head = [0u8; 4];
    loop {
        match input.read_exact(&mut head) {
            Ok(()) => {}
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let d = u32::from_le_bytes(head) as usize;
        let mut v = Vec::with_capacity(d.min(1 << 16));
        let mut buf = [0u8; 8];
        for _ in 0..d {
            input
                .read_exact(&mut buf)
                .with_context(|| format!("vector {} is truncated", out.len()))?;
            v.push(f64::from_le_bytes(buf));
        }
        if let Some(first) = out.first().map(Vec::len) {
            if first != d {
                bail!("vector {} has dimension {d}, expected {first}", out.len());
            }
        }
        out.push(v);
    }
    Ok(out)
}

pub fn save(path: &Path, vectors: &[impl AsRef<[f64]>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    write_vectors(&mut w, vectors)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    read_vectors(&mut r).with_context(|| format!("reading {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let vs = vec![vec![1.0, -2.5, f64::MIN_POSITIVE], vec![0.0, 3.0, 1e300]];
        let mut bytes = Vec::new();
        write_vectors(&mut bytes, &vs).unwrap();
        assert_eq!(bytes.len(), 2 * (4 + 3 * 8));
        assert_eq!(&bytes[..4], &3u32.to_le_bytes());
        assert_eq!(read_vectors(&mut bytes.as_slice()).unwrap(), vs);
    }

    #[test]
    fn rejects_truncation_and_ragged_files() {
        let mut bytes = Vec::new();
        write_vectors(&mut bytes, &[vec![1.0, 2.0]]).unwrap();
        assert!(read_vectors(&mut &bytes[..bytes.len() - 1]).is_err());
        write_vectors(&mut bytes, &[vec![1.0]]).unwrap();
        assert!(read_vectors(&mut bytes.as_slice()).is_err());
        assert!(read_vectors(&mut [].as_slice()).unwrap().is_empty());
    }
}
