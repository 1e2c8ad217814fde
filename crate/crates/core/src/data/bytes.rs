//! Little-endian framing shared by the dataset and checkpoint files:
//! an 8-byte magic, a `u64` manifest length, a UTF-8 JSON manifest, then
//! raw payload blocks.

use crate::error::{FormatError, Result};
use crate::nn::Scalar;

pub(crate) fn write_header(out: &mut Vec<u8>, magic: &[u8; 8], manifest: &[u8]) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(manifest);
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn position(&self) -> usize {
        self.pos
    }

    pub(crate) fn take(&mut self, what: &'static str, n: usize) -> Result<&'a [u8], FormatError> {
        let available = self.buf.len() - self.pos;
        if n > available {
            return Err(FormatError::Truncated {
                what,
                needed: n,
                available,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u64(&mut self, what: &'static str) -> Result<u64, FormatError> {
        let b = self.take(what, 8)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    /// Checks the magic; the last two bytes carry the version.
    pub(crate) fn magic(&mut self, expected: &[u8; 8]) -> Result<(), FormatError> {
        let found = self.take("magic", 8)?;
        if found == expected {
            return Ok(());
        }
        let show = |b: &[u8]| String::from_utf8_lossy(b).into_owned();
        if found[..6] == expected[..6] {
            Err(FormatError::Version {
                expected: show(&expected[6..]),
                found: show(&found[6..]),
            })
        } else {
            Err(FormatError::BadMagic {
                expected: show(expected),
                found: show(found),
            })
        }
    }

    pub(crate) fn manifest<M: serde::de::DeserializeOwned>(&mut self) -> Result<M, FormatError> {
        let len = self.u64("manifest length")?;
        let len = usize::try_from(len).map_err(|_| FormatError::Manifest("length overflows usize".into()))?;
        let raw = self.take("manifest", len)?;
        serde_json::from_slice(raw).map_err(|e| FormatError::Manifest(e.to_string()))
    }

    pub(crate) fn scalars<T: Scalar>(&mut self, what: &'static str, count: usize) -> Result<Vec<T>, FormatError> {
        let bytes = count
            .checked_mul(T::BYTES)
            .ok_or(FormatError::Manifest(format!("{what}: element count overflows")))?;
        let raw = self.take(what, bytes)?;
        Ok(raw.chunks_exact(T::BYTES).map(T::read_le).collect())
    }

    pub(crate) fn u32s(&mut self, what: &'static str, count: usize) -> Result<Vec<u32>, FormatError> {
        let bytes = count
            .checked_mul(4)
            .ok_or(FormatError::Manifest(format!("{what}: element count overflows")))?;
        let raw = self.take(what, bytes)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }

    pub(crate) fn finish(&self) -> Result<(), FormatError> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            n => Err(FormatError::TrailingBytes(n)),
        }
    }
}

/// FNV-1a, 64-bit.
pub(crate) fn fnv1a64(data: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    data.iter().fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}
