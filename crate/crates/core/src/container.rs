//! Versioned binary container for fitted tree ensembles.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "PRECIPUQ"
//! kind     4 bytes  model kind tag
//! version  u32
//! hlen     u64, followed by hlen bytes of JSON header
//! plen     u64, followed by plen bytes of payload
//! ```

use std::io::{Read, Write};

use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"PRECIPUQ";

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a model container")]
    BadMagic,
    #[error("expected model kind {expected:?}, found {found:?}")]
    WrongKind { expected: String, found: String },
    #[error("unsupported container version {0}")]
    Version(u32),
    #[error("header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("truncated payload")]
    Truncated,
    #[error("corrupt payload: {0}")]
    Corrupt(String),
}

pub fn write_container<W: Write>(
    mut w: W,
    kind: &[u8; 4],
    version: u32,
    header: &serde_json::Value,
    payload: &[u8],
) -> Result<(), ContainerError> {
    let header = serde_json::to_vec(header)?;
    w.write_all(MAGIC)?;
    w.write_all(kind)?;
    w.write_all(&version.to_le_bytes())?;
    w.write_all(&(header.len() as u64).to_le_bytes())?;
    w.write_all(&header)?;
    w.write_all(&(payload.len() as u64).to_le_bytes())?;
    w.write_all(payload)?;
    Ok(())
}

pub fn read_container<R: Read>(
    mut r: R,
    kind: &[u8; 4],
    max_version: u32,
) -> Result<(u32, serde_json::Value, Vec<u8>), ContainerError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    let mut found = [0u8; 4];
    r.read_exact(&mut found)?;
    if &found != kind {
        return Err(ContainerError::WrongKind {
            expected: String::from_utf8_lossy(kind).into(),
            found: String::from_utf8_lossy(&found).into(),
        });
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version == 0 || version > max_version {
        return Err(ContainerError::Version(version));
    }
    let header = read_block(&mut r)?;
    let header = serde_json::from_slice(&header)?;
    let payload = read_block(&mut r)?;
    Ok((version, header, payload))
}

fn read_block<R: Read>(r: &mut R) -> Result<Vec<u8>, ContainerError> {
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let len = u64::from_le_bytes(b8) as usize;
    let mut buf = Vec::new();
    r.take(len as u64).read_to_end(&mut buf)?;
    if buf.len() != len {
        return Err(ContainerError::Truncated);
    }
    Ok(buf)
}

/// Little-endian payload builder.
#[derive(Default)]
pub struct PayloadWriter {
    buf: Vec<u8>,
}

impl PayloadWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u32s(&mut self, vs: &[u32]) {
        self.u64(vs.len() as u64);
        for &v in vs {
            self.u32(v);
        }
    }

    pub fn f64s(&mut self, vs: &[f64]) {
        self.u64(vs.len() as u64);
        for &v in vs {
            self.f64(v);
        }
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

/// Bounds-checked reader over a payload.
pub struct PayloadReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> PayloadReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        PayloadReader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ContainerError> {
        let end = self.pos.checked_add(n).ok_or(ContainerError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(ContainerError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<u32, ContainerError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64, ContainerError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn f64(&mut self) -> Result<f64, ContainerError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self, elem: usize) -> Result<usize, ContainerError> {
        let n = self.u64()? as usize;
        if n.saturating_mul(elem) > self.buf.len() - self.pos {
            return Err(ContainerError::Truncated);
        }
        Ok(n)
    }

    pub fn u32s(&mut self) -> Result<Vec<u32>, ContainerError> {
        let n = self.len(4)?;
        (0..n).map(|_| self.u32()).collect()
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>, ContainerError> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn finish(self) -> Result<(), ContainerError> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(ContainerError::Corrupt("trailing bytes".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_payload_survive() {
        let mut p = PayloadWriter::new();
        p.u32s(&[1, 2, 3]);
        p.f64(-0.5);
        let mut buf = Vec::new();
        let header = serde_json::json!({"n_trees": 3});
        write_container(&mut buf, b"TEST", 1, &header, &p.into_bytes()).unwrap();

        let (v, h, payload) = read_container(buf.as_slice(), b"TEST", 1).unwrap();
        assert_eq!((v, h), (1, header));
        let mut r = PayloadReader::new(&payload);
        assert_eq!(r.u32s().unwrap(), vec![1, 2, 3]);
        assert_eq!(r.f64().unwrap(), -0.5);
        r.finish().unwrap();
    }

    #[test]
    fn rejects_foreign_and_future_files() {
        let mut buf = Vec::new();
        write_container(&mut buf, b"AAAA", 2, &serde_json::json!({}), &[]).unwrap();
        assert!(matches!(
            read_container(buf.as_slice(), b"BBBB", 2),
            Err(ContainerError::WrongKind { .. })
        ));
        assert!(matches!(
            read_container(buf.as_slice(), b"AAAA", 1),
            Err(ContainerError::Version(2))
        ));
        assert!(matches!(
            read_container(&b"garbage!...."[..], b"AAAA", 1),
            Err(ContainerError::BadMagic)
        ));
        let mut r = PayloadReader::new(&[1, 0, 0, 0, 0, 0, 0, 0]);
        assert!(matches!(r.f64s(), Err(ContainerError::Truncated)));
    }
}
