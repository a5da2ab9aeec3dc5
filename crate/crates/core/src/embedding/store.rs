//! Vector files.
//!
//! JSON-lines: one `{"unit_id", "values"}` object per line.
//!
//! Binary (little-endian): magic `OLVE`, `u32` version, `u64` count, `u32` dim,
//! then `count * dim` row-major `f32`s, then `count` unit ids each stored as
//! a `u32` byte length followed by UTF-8 bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{check_vectors, EmbeddingVector};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"OLVE";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorFormat {
    JsonLines,
    Binary,
}

impl VectorFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => VectorFormat::Binary,
            _ => VectorFormat::JsonLines,
        }
    }
}

pub fn save_vectors(vectors: &[EmbeddingVector], path: &Path) -> Result<()> {
    check_vectors(vectors)?;
    match VectorFormat::from_path(path) {
        VectorFormat::JsonLines => crate::jsonl::write(path, vectors),
        VectorFormat::Binary => write_binary(vectors, path),
    }
}

pub fn load_vectors(path: &Path) -> Result<Vec<EmbeddingVector>> {
    let vectors = match VectorFormat::from_path(path) {
        VectorFormat::JsonLines => crate::jsonl::read(path)?,
        VectorFormat::Binary => read_binary(path)?,
    };
    check_vectors(&vectors)?;
    Ok(vectors)
}

fn write_binary(vectors: &[EmbeddingVector], path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let dim = vectors.first().map_or(0, EmbeddingVector::dim);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(vectors.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(dim as u32).to_le_bytes()).map_err(io)?;
    for v in vectors {
        for x in &v.values {
            w.write_all(&x.to_le_bytes()).map_err(io)?;
        }
    }
    for v in vectors {
        w.write_all(&(v.unit_id.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(v.unit_id.as_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

struct Cursor<'p, R> {
    inner: R,
    offset: u64,
    path: &'p Path,
}

impl<R: Read> Cursor<'_, R> {
    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Binary {
            path: self.path.to_path_buf(),
            offset: self.offset,
            message: message.into(),
        }
    }

    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| self.fail(format!("truncated {what}")))?;
        self.offset += N as u64;
        Ok(buf)
    }

    fn vec(&mut self, len: usize, what: &str) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; len];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| self.fail(format!("truncated {what}")))?;
        self.offset += len as u64;
        Ok(buf)
    }
}

fn read_binary(path: &Path) -> Result<Vec<EmbeddingVector>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if file.metadata().map_err(|e| Error::io(path, e))?.len() == 0 {
        return Ok(Vec::new());
    }
    let mut c = Cursor {
        inner: BufReader::new(file),
        offset: 0,
        path,
    };
    if &c.bytes::<4>("magic")? != MAGIC {
        c.offset = 0;
        return Err(c.fail("bad magic"));
    }
    let version = u32::from_le_bytes(c.bytes("version")?);
    if version != VERSION {
        return Err(c.fail(format!("unsupported version {version}")));
    }
    let count = u64::from_le_bytes(c.bytes("count")?) as usize;
    let dim = u32::from_le_bytes(c.bytes("dim")?) as usize;
    let mut rows = Vec::with_capacity(count.min(1 << 24));
    for _ in 0..count {
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            values.push(f32::from_le_bytes(c.bytes("vector data")?));
        }
        rows.push(values);
    }
    let mut out = Vec::with_capacity(rows.len());
    for values in rows {
        let len = u32::from_le_bytes(c.bytes("unit id length")?) as usize;
        let start = c.offset;
        let raw = c.vec(len, "unit id")?;
        let unit_id = String::from_utf8(raw).map_err(|_| {
            c.offset = start;
            c.fail("unit id is not UTF-8")
        })?;
        out.push(EmbeddingVector { unit_id, values });
    }
    let mut trailing = [0u8; 1];
    if c.inner.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
        return Err(c.fail("trailing bytes after last record"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn random_vectors(n: usize, dim: usize, seed: u64) -> Vec<EmbeddingVector> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| EmbeddingVector {
                unit_id: format!("u{i}"),
                values: (0..dim).map(|_| rng.random_range(-1e3f32..1e3)).collect(),
            })
            .collect()
    }

    #[test]
    fn hundred_vectors_round_trip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let vectors = random_vectors(100, 17, 3);
        for name in ["v.jsonl", "v.bin"] {
            let path = dir.path().join(name);
            save_vectors(&vectors, &path).unwrap();
            assert_eq!(load_vectors(&path).unwrap(), vectors, "{name}");
        }
    }

    #[test]
    fn empty_files_are_empty_lists() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["e.jsonl", "e.bin"] {
            let path = dir.path().join(name);
            std::fs::write(&path, b"").unwrap();
            assert!(load_vectors(&path).unwrap().is_empty());
        }
    }

    #[test]
    fn mixed_dims_file_is_dim_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        std::fs::write(
            &path,
            "{\"unit_id\":\"a\",\"values\":[1.0,2.0]}\n{\"unit_id\":\"b\",\"values\":[1.0]}\n",
        )
        .unwrap();
        assert!(matches!(load_vectors(&path), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn malformed_records_name_their_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"unit_id\":\"a\",\"values\":[1.0]}\nnot json\n").unwrap();
        assert!(matches!(load_vectors(&path), Err(Error::Record { line: 2, .. })));

        let path = dir.path().join("bad.bin");
        save_vectors(&random_vectors(2, 3, 1), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..30]).unwrap();
        match load_vectors(&path) {
            Err(Error::Binary { offset, .. }) => assert_eq!(offset, 28),
            other => panic!("expected binary error, got {other:?}"),
        }
        std::fs::write(&path, b"NOPE0000").unwrap();
        assert!(matches!(load_vectors(&path), Err(Error::Binary { offset: 0, .. })));
    }

    proptest! {
        #[test]
        fn binary_round_trip_is_exact(values in prop::collection::vec(prop::num::f32::NORMAL, 1..40)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("p.bin");
            let v = vec![EmbeddingVector { unit_id: "ü-1".into(), values }];
            save_vectors(&v, &path).unwrap();
            prop_assert_eq!(load_vectors(&path).unwrap(), v);
        }
    }
}
