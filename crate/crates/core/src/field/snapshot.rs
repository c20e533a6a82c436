//! Binary field snapshots.
//!
//! Layout, all little-endian:
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 8     | magic `NLKGFLD\0`                         |
//! | 4     | format version (u32, currently 1)         |
//! | 4     | grid kind (u32: 0 radial, 1 box)          |
//! | 8     | extent `R` or `L` (f64)                   |
//! | 8     | `n` (u64; nodes for radial, per axis box) |
//! | 8     | time (f64)                                |
//! | 16·N  | `(Re, Im)` f64 pairs in node order        |

use std::io::{Read, Write};
use std::path::Path;

use super::{BoxGrid, Complex64, Field, Grid, RadialGrid};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"NLKGFLD\0";
const VERSION: u32 = 1;

/// A field together with its time stamp.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub field: Field,
    pub time: f64,
}

pub fn encode(field: &Field, time: f64) -> Vec<u8> {
    let mut out = Vec::with_capacity(40 + 16 * field.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let (kind, extent, n) = match field.grid() {
        Grid::Radial(g) => (0u32, g.r_max(), g.n() as u64),
        Grid::Box(b) => (1u32, b.l(), b.n() as u64),
    };
    out.extend_from_slice(&kind.to_le_bytes());
    out.extend_from_slice(&extent.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&time.to_le_bytes());
    for z in field.data() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

fn take<const N: usize>(buf: &[u8], pos: &mut usize) -> Result<[u8; N]> {
    let end = *pos + N;
    let s = buf.get(*pos..end).ok_or_else(|| Error::Format("snapshot truncated".into()))?;
    *pos = end;
    let mut a = [0u8; N];
    a.copy_from_slice(s);
    Ok(a)
}

pub fn decode(buf: &[u8]) -> Result<Snapshot> {
    let mut pos = 0;
    if &take::<8>(buf, &mut pos)? != MAGIC {
        return Err(Error::Format("bad snapshot magic".into()));
    }
    let version = u32::from_le_bytes(take(buf, &mut pos)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {version}")));
    }
    let kind = u32::from_le_bytes(take(buf, &mut pos)?);
    let extent = f64::from_le_bytes(take(buf, &mut pos)?);
    let n = u64::from_le_bytes(take(buf, &mut pos)?) as usize;
    let time = f64::from_le_bytes(take(buf, &mut pos)?);
    let grid = match kind {
        0 => Grid::Radial(RadialGrid::new(extent, n)?),
        1 => Grid::Box(BoxGrid::new(extent, n)?),
        k => return Err(Error::Format(format!("unknown grid kind {k}"))),
    };
    let count = grid.len();
    if buf.len() != pos + 16 * count {
        return Err(Error::Format(format!("snapshot payload has {} bytes, expected {}", buf.len() - pos, 16 * count)));
    }
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        let re = f64::from_le_bytes(take(buf, &mut pos)?);
        let im = f64::from_le_bytes(take(buf, &mut pos)?);
        data.push(Complex64::new(re, im));
    }
    Ok(Snapshot { field: Field::new(grid, data)?, time })
}

pub fn write_snapshot(path: &Path, field: &Field, time: f64) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(field, time))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    decode(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_radial() {
        let g = Grid::Radial(RadialGrid::new(12.5, 64).unwrap());
        let data = (0..64).map(|i| Complex64::new(i as f64 * 0.5, -(i as f64))).collect();
        let f = Field::new(g, data).unwrap();
        let s = decode(&encode(&f, 3.25)).unwrap();
        assert_eq!(s.field, f);
        assert_eq!(s.time, 3.25);
    }

    #[test]
    fn header_layout_is_stable() {
        let g = Grid::Box(BoxGrid::new(4.0, 4).unwrap());
        let b = encode(&Field::zeros(g), 0.0);
        assert_eq!(&b[0..8], MAGIC);
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 1);
        assert_eq!(f64::from_le_bytes(b[16..24].try_into().unwrap()), 4.0);
        assert_eq!(b.len(), 40 + 16 * 64);
    }

    #[test]
    fn truncated_input_is_rejected() {
        let g = Grid::Radial(RadialGrid::new(10.0, 64).unwrap());
        let b = encode(&Field::zeros(g), 1.0);
        assert!(decode(&b[..b.len() - 3]).is_err());
        assert!(decode(b"garbage").is_err());
    }
}
