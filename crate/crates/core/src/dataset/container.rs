//! Binary sample container.
//!
//! All integers and floats are little-endian.
//!
//! | bytes        | field                                               |
//! |--------------|-----------------------------------------------------|
//! | 4            | magic `WSMP`                                        |
//! | 2            | version (`u16`, currently 1)                        |
//! | 1            | sample type tag, ASCII `N`, `R`, `S` or `C`         |
//! | 1            | reserved, zero                                      |
//! | 4            | id length `L` (`u32`)                               |
//! | L            | id, UTF-8                                           |
//! | 4            | tensor rank (`u32`, always 3)                       |
//! | 12           | dims `receivers, steps, components` (`u32` each)    |
//! | 4·Π dims     | `f32` values, receiver-major                        |
//! | label block  | 100x100 label                                       |
//! | label block  | 16x16 label                                         |
//!
//! A label block is `u16` width, `u16` height, two `f64` pixel pitches
//! (x then y) and the rows packed MSB-first, each row padded to whole bytes.

use super::{SampleTensor, SampleType};
use crate::crack::LabelImage;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"WSMP";
pub const VERSION: u16 = 1;

/// Decoded container contents.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlob {
    pub id: String,
    pub sample_type: SampleType,
    pub record: SampleTensor,
    pub label100: LabelImage,
    pub label16: LabelImage,
}

pub fn encode(
    id: &str,
    sample_type: SampleType,
    record: &SampleTensor,
    label100: &LabelImage,
    label16: &LabelImage,
) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + id.len() + 4 * record.data.len() + 1400);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(sample_type.tag());
    out.push(0);
    out.extend_from_slice(&(id.len() as u32).to_le_bytes());
    out.extend_from_slice(id.as_bytes());
    out.extend_from_slice(&3u32.to_le_bytes());
    for d in record.shape {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in &record.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for label in [label100, label16] {
        out.extend_from_slice(&(label.width as u16).to_le_bytes());
        out.extend_from_slice(&(label.height as u16).to_le_bytes());
        out.extend_from_slice(&label.pixel_pitch[0].to_le_bytes());
        out.extend_from_slice(&label.pixel_pitch[1].to_le_bytes());
        out.extend_from_slice(&label.pack_bits());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Format {
            what: "sample container",
            reason: format!("truncated at byte {} (needed {n} more)", self.pos),
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn label(&mut self) -> Result<LabelImage> {
        let w = self.u16()? as usize;
        let h = self.u16()? as usize;
        let pitch = [self.f64()?, self.f64()?];
        let packed = self.take(w.div_ceil(8) * h)?;
        LabelImage::unpack_bits(w, h, pitch, packed)
    }
}

fn format_err(reason: impl Into<String>) -> Error {
    Error::Format {
        what: "sample container",
        reason: reason.into(),
    }
}

pub fn decode(bytes: &[u8]) -> Result<SampleBlob> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(format_err("bad magic"));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let tag = r.take(2)?[0];
    let sample_type = SampleType::from_tag(tag).ok_or_else(|| format_err(format!("unknown sample type {tag:#x}")))?;
    let id_len = r.u32()? as usize;
    let id = String::from_utf8(r.take(id_len)?.to_vec()).map_err(|_| format_err("id is not UTF-8"))?;
    if r.u32()? != 3 {
        return Err(format_err("tensor rank must be 3"));
    }
    let shape = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
    let count = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| format_err("tensor shape overflows"))?;
    let raw = r.take(count.checked_mul(4).ok_or_else(|| format_err("tensor shape overflows"))?)?;
    let data = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let label100 = r.label()?;
    let label16 = r.label()?;
    if r.pos != bytes.len() {
        return Err(format_err(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(SampleBlob {
        id,
        sample_type,
        record: SampleTensor { shape, data },
        label100,
        label16,
    })
}
