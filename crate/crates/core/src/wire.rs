//! Byte-level helpers shared by the serialized formats.
//!
//! All integers are big-endian. Variable-length fields carry a 32-bit length
//! prefix. Every top-level artifact starts with the profile tag: one length
//! byte followed by the ASCII profile name.

use crate::error::{Error, Result};
use crate::group::{DualElement, Element, Scalar, DUAL_ELEMENT_BYTES, ELEMENT_BYTES, PROFILE_NAME};

pub(crate) fn put_profile_tag(out: &mut Vec<u8>) {
    out.push(PROFILE_NAME.len() as u8);
    out.extend_from_slice(PROFILE_NAME.as_bytes());
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_be_bytes());
}

pub(crate) fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_be_bytes());
}

pub(crate) fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    put_u32(out, bytes.len() as u32);
    out.extend_from_slice(bytes);
}

/// Cursor over a borrowed buffer.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8], what: &'static str) -> Self {
        Reader { buf, what }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::InvalidLength {
                what: self.what,
                expected: n,
                got: self.buf.len(),
            });
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    pub(crate) fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.take(N)?);
        Ok(out)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.array()?))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.array()?))
    }

    pub(crate) fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    pub(crate) fn element(&mut self) -> Result<Element> {
        Element::decode(self.take(ELEMENT_BYTES)?)
    }

    pub(crate) fn dual_element(&mut self) -> Result<DualElement> {
        DualElement::decode(self.take(DUAL_ELEMENT_BYTES)?)
    }

    #[allow(dead_code)]
    pub(crate) fn scalar(&mut self) -> Result<Scalar> {
        Scalar::from_bytes(&self.array()?)
    }

    pub(crate) fn profile_tag(&mut self) -> Result<()> {
        let n = self.u8()? as usize;
        let name = self.take(n)?;
        if name != PROFILE_NAME.as_bytes() {
            return Err(Error::ProfileMismatch {
                expected: PROFILE_NAME.to_string(),
                found: String::from_utf8_lossy(name).into_owned(),
            });
        }
        Ok(())
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len()
    }

    pub(crate) fn finish(self) -> Result<()> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(Error::TrailingBytes(self.what))
        }
    }
}
