//! Little-endian binary helpers for the level-set and model files.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub(crate) struct Encoder<W: Write> {
    inner: W,
}

impl<W: Write> Encoder<W> {
    pub fn new(inner: W) -> Self {
        Encoder { inner }
    }

    pub fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.inner.write_all(b)?;
        Ok(())
    }

    pub fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn i32(&mut self, v: i32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn f64(&mut self, v: f64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn f64s<'a>(&mut self, vs: impl IntoIterator<Item = &'a f64>) -> Result<()> {
        for v in vs {
            self.f64(*v)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

pub(crate) struct Decoder<R: Read> {
    inner: R,
    what: &'static str,
}

impl<R: Read> Decoder<R> {
    pub fn new(inner: R, what: &'static str) -> Self {
        Decoder { inner, what }
    }

    fn fill<const N: usize>(&mut self, field: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Malformed(format!("{} ended while reading {field}", self.what))
            } else {
                Error::Stream(e)
            }
        })?;
        Ok(buf)
    }

    pub fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let found = self.fill::<4>("magic")?;
        if found != expected {
            return Err(Error::BadMagic { expected, found });
        }
        Ok(())
    }

    pub fn version(&mut self, expected: u32) -> Result<()> {
        let found = self.u32("version")?;
        if found != expected {
            return Err(Error::VersionMismatch { expected, found });
        }
        Ok(())
    }

    pub fn u32(&mut self, field: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.fill(field)?))
    }

    pub fn i32(&mut self, field: &str) -> Result<i32> {
        Ok(i32::from_le_bytes(self.fill(field)?))
    }

    pub fn f64(&mut self, field: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.fill(field)?))
    }

    pub fn f64s(&mut self, n: usize, field: &str) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64(field)).collect()
    }

    /// Fails unless the stream is exhausted.
    pub fn end(mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe)? {
            0 => Ok(()),
            _ => Err(Error::Malformed(format!(
                "trailing bytes after {}",
                self.what
            ))),
        }
    }
}
