//! Little-endian helpers shared by the binary file formats.

use std::io::{self, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

/// Counts bytes consumed so parse errors can report an offset.
pub(crate) struct Counting<R> {
    inner: R,
    pub pos: u64,
}

impl<R: Read> Counting<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, pos: 0 }
    }
}

impl<R: Read> Read for Counting<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.pos += n as u64;
        Ok(n)
    }
}

pub(crate) fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

/// Reader that tags every failure with the byte offset where the
/// failing field began.
pub(crate) struct FieldReader<R> {
    pub r: Counting<R>,
    what: &'static str,
}

impl<R: Read> FieldReader<R> {
    pub fn new(inner: R, what: &'static str) -> Self {
        Self { r: Counting::new(inner), what }
    }

    pub fn pos(&self) -> u64 {
        self.r.pos
    }

    pub fn err(&self, at: u64, msg: impl Into<String>) -> Error {
        Error::parse(self.what, at, msg)
    }

    fn wrap<T>(&mut self, f: impl FnOnce(&mut Counting<R>) -> io::Result<T>) -> Result<T> {
        let at = self.r.pos;
        f(&mut self.r).map_err(|e| Error::parse(self.what, at, format!("truncated: {e}")))
    }

    pub fn magic(&mut self, expect: &[u8; 4]) -> Result<()> {
        let mut m = [0u8; 4];
        self.wrap(|r| r.read_exact(&mut m))?;
        if &m != expect {
            return Err(self.err(0, "bad magic"));
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8> {
        self.wrap(|r| r.read_u8())
    }

    pub fn u16(&mut self) -> Result<u16> {
        self.wrap(|r| r.read_u16::<LittleEndian>())
    }

    pub fn u32(&mut self) -> Result<u32> {
        self.wrap(|r| r.read_u32::<LittleEndian>())
    }

    pub fn u64(&mut self) -> Result<u64> {
        self.wrap(|r| r.read_u64::<LittleEndian>())
    }

    pub fn f64s(&mut self, out: &mut [f64]) -> Result<()> {
        self.wrap(|r| r.read_f64_into::<LittleEndian>(out))
    }

    pub fn u32s(&mut self, out: &mut [u32]) -> Result<()> {
        self.wrap(|r| r.read_u32_into::<LittleEndian>(out))
    }

    pub fn string(&mut self) -> Result<String> {
        let at = self.r.pos;
        let n = self.u32()? as usize;
        let mut buf = vec![0u8; n];
        self.wrap(|r| r.read_exact(&mut buf))?;
        String::from_utf8(buf).map_err(|_| self.err(at, "string is not utf-8"))
    }

    /// Errors unless the input is exhausted.
    pub fn end(&mut self) -> Result<()> {
        let at = self.r.pos;
        let mut b = [0u8; 1];
        match self.r.read(&mut b) {
            Ok(0) => Ok(()),
            Ok(_) => Err(self.err(at, "trailing bytes")),
            Err(e) => Err(self.err(at, e.to_string())),
        }
    }
}
