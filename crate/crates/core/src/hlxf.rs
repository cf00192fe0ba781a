//! HLXF field snapshots: a 32-byte little-endian header followed by the raw samples.
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `b"HLXF"`                         |
//! | 4      | 4    | format version (`u32`, currently 1)     |
//! | 8      | 4    | dimension `d` (`u32`)                   |
//! | 12     | 12   | grid sizes `n₁, n₂, n₃` (`u32` each)    |
//! | 24     | 4    | component count (`u32`)                 |
//! | 28     | 4    | reserved, zero                          |
//!
//! The body holds `components × n₁n₂n₃` `f64` values, component-major, each component in grid
//! order with `x₁` fastest.

use crate::frame::{PerturbationFields, VecField};
use crate::grid::Grid;
use crate::{HelixError, Result};
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"HLXF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

/// Real component fields on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub d: usize,
    pub n: [usize; 3],
    pub components: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn new(d: usize, n: [usize; 3], components: Vec<Vec<f64>>) -> Result<Self> {
        let npts = n[0] * n[1] * n[2];
        if !(1..=3).contains(&d) || components.is_empty() || components.iter().any(|c| c.len() != npts) {
            return Err(HelixError::Format(format!("inconsistent snapshot: d = {d}, n = {n:?}, {} components", components.len())));
        }
        Ok(Snapshot { d, n, components })
    }

    /// The three components of `m`.
    pub fn from_m(grid: &Grid, m: &VecField) -> Result<Self> {
        Self::new(grid.d, grid.n, m.to_vec())
    }

    /// `m₁, m₂, m₃, Re u, Im u`.
    pub fn from_fields(grid: &Grid, f: &PerturbationFields) -> Result<Self> {
        let mut c = f.m.to_vec();
        c.push(f.u.iter().map(|z| z.re).collect());
        c.push(f.u.iter().map(|z| z.im).collect());
        Self::new(grid.d, grid.n, c)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = [0u8; HEADER_LEN];
        header[0..4].copy_from_slice(&MAGIC);
        let words = [VERSION, self.d as u32, self.n[0] as u32, self.n[1] as u32, self.n[2] as u32, self.components.len() as u32, 0];
        for (i, v) in words.iter().enumerate() {
            header[4 + 4 * i..8 + 4 * i].copy_from_slice(&v.to_le_bytes());
        }
        w.write_all(&header)?;
        let mut body = Vec::with_capacity(8 * self.components.len() * self.components[0].len());
        for c in &self.components {
            for x in c {
                body.extend_from_slice(&x.to_le_bytes());
            }
        }
        w.write_all(&body)?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header).map_err(|e| HelixError::Format(format!("short header: {e}")))?;
        if header[0..4] != MAGIC {
            return Err(HelixError::Format("bad magic".into()));
        }
        let word = |i: usize| u32::from_le_bytes(header[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes")) as usize;
        if word(0) != VERSION as usize {
            return Err(HelixError::Format(format!("unsupported version {}", word(0))));
        }
        let (d, n, ncomp) = (word(1), [word(2), word(3), word(4)], word(5));
        let npts = n[0].checked_mul(n[1]).and_then(|x| x.checked_mul(n[2])).ok_or_else(|| HelixError::Format("grid too large".into()))?;
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() != 8 * npts * ncomp {
            return Err(HelixError::Format(format!("body has {} bytes, expected {}", body.len(), 8 * npts * ncomp)));
        }
        let vals: Vec<f64> = body.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
        let components = vals.chunks(npts.max(1)).take(ncomp).map(<[f64]>::to_vec).collect();
        Self::new(d, n, components)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        self.write(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let s = Snapshot::new(2, [4, 2, 1], vec![(0..8).map(f64::from).collect(), vec![-0.5; 8]]).unwrap();
        let mut buf = Vec::new();
        s.write(&mut buf).unwrap();
        assert_eq!(buf.len(), 32 + 2 * 8 * 8);
        assert_eq!(&buf[0..4], b"HLXF");
        assert_eq!(buf[4..8], 1u32.to_le_bytes());
        assert_eq!(buf[8..12], 2u32.to_le_bytes());
        assert_eq!(buf[12..16], 4u32.to_le_bytes());
        assert_eq!(buf[16..20], 2u32.to_le_bytes());
        assert_eq!(buf[20..24], 1u32.to_le_bytes());
        assert_eq!(buf[24..28], 2u32.to_le_bytes());
        assert_eq!(buf[28..32], [0; 4]);
        assert_eq!(buf[32 + 8..32 + 16], 1.0f64.to_le_bytes());
    }

    #[test]
    fn rejects_corrupt_input() {
        let s = Snapshot::new(1, [3, 1, 1], vec![vec![1.0, 2.0, 3.0]]).unwrap();
        let mut buf = Vec::new();
        s.write(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(Snapshot::read(&bad[..]).is_err());
        assert!(Snapshot::read(&buf[..buf.len() - 1]).is_err());
        assert!(Snapshot::read(&buf[..10]).is_err());
        let mut v2 = buf.clone();
        v2[4] = 2;
        assert!(Snapshot::read(&v2[..]).is_err());
        assert!(Snapshot::new(1, [3, 1, 1], vec![vec![1.0]]).is_err());
    }

    #[test]
    fn fields_roundtrip_through_file() {
        let g = Grid::helical(2, 8, &[]).unwrap();
        let fr = crate::frame::FrameBasis::new(g).unwrap();
        let u = crate::frame::random_smooth_u(&g, 4, 0.3, 2);
        let f = crate::frame::u_to_m(&u, &fr).unwrap();
        let s = Snapshot::from_fields(&g, &f).unwrap();
        let path = std::env::temp_dir().join(format!("hlxf-test-{}.hlxf", std::process::id()));
        s.write_file(&path).unwrap();
        let back = Snapshot::read_file(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(back, s);
        assert_eq!(back.components[3][5], u[5].re);
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(
            d in 1usize..=3,
            n1 in 1usize..6,
            ncomp in 1usize..4,
            seed in any::<u64>(),
        ) {
            let n = [n1, if d > 1 { 3 } else { 1 }, if d > 2 { 2 } else { 1 }];
            let npts = n[0] * n[1] * n[2];
            let mut x = seed;
            let comps: Vec<Vec<f64>> = (0..ncomp)
                .map(|_| (0..npts).map(|_| { x = x.wrapping_mul(6364136223846793005).wrapping_add(1); f64::from_bits(x >> 2) }).collect())
                .collect();
            let s = Snapshot::new(d, n, comps).unwrap();
            let mut buf = Vec::new();
            s.write(&mut buf).unwrap();
            let back = Snapshot::read(&buf[..]).unwrap();
            prop_assert_eq!(back.n, s.n);
            for (a, b) in back.components.iter().zip(&s.components) {
                prop_assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
        }
    }
}
