//! Compact binary container shared by particle flows and density snapshots.
//!
//! Layout (all little-endian):
//!
//! | offset | size | field                                          |
//! |--------|------|------------------------------------------------|
//! | 0      | 4    | magic `b"MVLF"`                                |
//! | 4      | 4    | version `u32` (= 1)                            |
//! | 8      | 4    | kind `u32`: 0 particle marginals, 1 density    |
//! | 12     | 4    | reserved `u32` (= 0)                           |
//! | 16     | 8    | `n` values per row, `u64`                      |
//! | 24     | 8    | `M` rows, `u64`                                |
//! | 32     | 8    | extent `f64`: half-width `L` for densities, 0 otherwise |
//! | 40     | ...  | `M` rows of `1 + n` doubles: time, then values |

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"MVLF";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    Particles = 0,
    Density = 1,
}

/// Decoded container.
#[derive(Debug, Clone, PartialEq)]
pub struct Frames {
    pub kind: FrameKind,
    pub extent: f64,
    pub width: usize,
    pub times: Vec<f64>,
    /// Row-major, `times.len() * width` values.
    pub values: Vec<f64>,
}

impl Frames {
    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.width..(k + 1) * self.width]
    }
}

pub fn write_frames<'a, W, I>(mut w: W, kind: FrameKind, extent: f64, width: usize, rows: I) -> Result<()>
where
    W: Write,
    I: ExactSizeIterator<Item = (f64, &'a [f64])>,
{
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(kind as u32).to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    w.write_all(&(width as u64).to_le_bytes())?;
    w.write_all(&(rows.len() as u64).to_le_bytes())?;
    w.write_all(&extent.to_le_bytes())?;
    for (t, row) in rows {
        if row.len() != width {
            return Err(Error::Format(format!("row of {} values, expected {width}", row.len())));
        }
        w.write_all(&t.to_le_bytes())?;
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

pub fn read_frames<R: Read>(mut r: R) -> Result<Frames> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let kind = match read_u32(&mut r)? {
        0 => FrameKind::Particles,
        1 => FrameKind::Density,
        k => return Err(Error::Format(format!("unknown kind {k}"))),
    };
    let _reserved = read_u32(&mut r)?;
    let width = read_u64(&mut r)? as usize;
    let rows = read_u64(&mut r)? as usize;
    let extent = read_f64(&mut r)?;
    let mut times = Vec::with_capacity(rows);
    let mut values = Vec::with_capacity(rows.saturating_mul(width));
    for _ in 0..rows {
        times.push(read_f64(&mut r)?);
        for _ in 0..width {
            values.push(read_f64(&mut r)?);
        }
    }
    Ok(Frames {
        kind,
        extent,
        width,
        times,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn roundtrip(width in 1usize..6, rows in proptest::collection::vec(proptest::collection::vec(-1e6f64..1e6, 6), 0..5), extent in 0.0f64..100.0) {
            let times: Vec<f64> = (0..rows.len()).map(|k| k as f64 * 0.5).collect();
            let data: Vec<Vec<f64>> = rows.iter().map(|r| r[..width].to_vec()).collect();
            let mut buf = Vec::new();
            write_frames(&mut buf, FrameKind::Density, extent, width,
                times.iter().copied().zip(data.iter().map(|r| r.as_slice()))).unwrap();
            prop_assert_eq!(buf.len(), 40 + data.len() * (1 + width) * 8);
            let back = read_frames(buf.as_slice()).unwrap();
            prop_assert_eq!(back.kind, FrameKind::Density);
            prop_assert_eq!(back.width, width);
            prop_assert_eq!(&back.times, &times);
            for (k, r) in data.iter().enumerate() {
                prop_assert_eq!(back.row(k), r.as_slice());
            }
        }
    }

    #[test]
    fn rejects_bad_magic() {
        assert!(read_frames(&b"NOPE\x01\0\0\0"[..]).is_err());
    }
}
