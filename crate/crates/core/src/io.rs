//! Binary and CSV persistence.
//!
//! The binary container is little-endian throughout:
//!
//! ```text
//! magic      4 bytes  "LTVM"
//! version    u32      1
//! kind       u32      1 = channel matrix, 2 = SVD, 3 = time-frequency grid
//! n          u64      matrix / block dimension
//! ts         f64      sampling time
//! blocks     u32      number of payload blocks
//! then per block:
//!   rows     u64
//!   cols     u64
//!   elem     u32      1 = real f64, 2 = complex (re, im interleaved f64)
//!   payload  rows * cols elements, row-major
//! ```
//!
//! A channel matrix is one complex `n x n` block. An SVD is three blocks:
//! sigmas (`n x 1` real), `U` and `V` (`n x n` complex). A time-frequency
//! grid is the real value block (`nt x nf`) followed by a `1 x 6` real axis
//! block `[t_start, t_step, f_start, f_step, kind, 0]`.

use crate::discretize::{ChannelMatrix, Provenance};
use crate::error::{Error, Result};
use crate::spectral::SvdResult;
use crate::wkb::{Axis, TFGrid};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::fmt::Write as _;
use std::io::{Read, Write};

pub const MAGIC: &[u8; 4] = b"LTVM";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum ContainerKind {
    Matrix = 1,
    Svd = 2,
    TfGrid = 3,
}

impl ContainerKind {
    fn from_u32(v: u32) -> Result<Self> {
        match v {
            1 => Ok(ContainerKind::Matrix),
            2 => Ok(ContainerKind::Svd),
            3 => Ok(ContainerKind::TfGrid),
            _ => Err(Error::Format(format!("unknown container kind {v}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockData {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub rows: usize,
    pub cols: usize,
    pub data: BlockData,
}

impl Block {
    fn from_matrix(m: &DMatrix<Complex64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                data.push(m[(r, c)]);
            }
        }
        Block {
            rows: m.nrows(),
            cols: m.ncols(),
            data: BlockData::Complex(data),
        }
    }

    fn to_matrix(&self) -> Result<DMatrix<Complex64>> {
        match &self.data {
            BlockData::Complex(d) => Ok(DMatrix::from_row_slice(self.rows, self.cols, d)),
            BlockData::Real(_) => Err(Error::Format("expected a complex block".into())),
        }
    }

    fn real(&self) -> Result<&[f64]> {
        match &self.data {
            BlockData::Real(d) => Ok(d),
            BlockData::Complex(_) => Err(Error::Format("expected a real block".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: ContainerKind,
    pub n: usize,
    pub ts: f64,
    pub blocks: Vec<Block>,
}

pub fn write_container(w: &mut impl Write, c: &Container) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(c.kind as u32).to_le_bytes())?;
    w.write_all(&(c.n as u64).to_le_bytes())?;
    w.write_all(&c.ts.to_le_bytes())?;
    w.write_all(&(c.blocks.len() as u32).to_le_bytes())?;
    for b in &c.blocks {
        w.write_all(&(b.rows as u64).to_le_bytes())?;
        w.write_all(&(b.cols as u64).to_le_bytes())?;
        match &b.data {
            BlockData::Real(d) => {
                w.write_all(&1u32.to_le_bytes())?;
                for x in d {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
            BlockData::Complex(d) => {
                w.write_all(&2u32.to_le_bytes())?;
                for z in d {
                    w.write_all(&z.re.to_le_bytes())?;
                    w.write_all(&z.im.to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

fn read_array<const K: usize>(r: &mut impl Read) -> Result<[u8; K]> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated container: {e}")))?;
    Ok(buf)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

/// Upper bound on elements per block, to reject corrupt size fields before
/// allocating.
const MAX_BLOCK_ELEMS: u64 = 1 << 28;

pub fn read_container(r: &mut impl Read) -> Result<Container> {
    let magic: [u8; 4] = read_array(r)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic, not an LTVM container".into()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let kind = ContainerKind::from_u32(read_u32(r)?)?;
    let n = read_u64(r)? as usize;
    let ts = read_f64(r)?;
    let nblocks = read_u32(r)?;
    if nblocks > 16 {
        return Err(Error::Format(format!("implausible block count {nblocks}")));
    }
    let mut blocks = Vec::with_capacity(nblocks as usize);
    for _ in 0..nblocks {
        let rows = read_u64(r)?;
        let cols = read_u64(r)?;
        let count = rows
            .checked_mul(cols)
            .filter(|&c| c <= MAX_BLOCK_ELEMS)
            .ok_or_else(|| Error::Format(format!("implausible block size {rows} x {cols}")))?
            as usize;
        let data = match read_u32(r)? {
            1 => BlockData::Real((0..count).map(|_| read_f64(r)).collect::<Result<_>>()?),
            2 => BlockData::Complex(
                (0..count)
                    .map(|_| Ok(Complex64::new(read_f64(r)?, read_f64(r)?)))
                    .collect::<Result<_>>()?,
            ),
            e => return Err(Error::Format(format!("unknown element type {e}"))),
        };
        blocks.push(Block {
            rows: rows as usize,
            cols: cols as usize,
            data,
        });
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after last block", rest.len())));
    }
    Ok(Container { kind, n, ts, blocks })
}

fn expect_kind(c: &Container, kind: ContainerKind, blocks: usize) -> Result<()> {
    if c.kind != kind {
        return Err(Error::Format(format!("expected {kind:?} container, found {:?}", c.kind)));
    }
    if c.blocks.len() != blocks {
        return Err(Error::Format(format!(
            "{kind:?} container needs {blocks} blocks, found {}",
            c.blocks.len()
        )));
    }
    Ok(())
}

pub fn write_matrix(w: &mut impl Write, h: &ChannelMatrix) -> Result<()> {
    write_container(
        w,
        &Container {
            kind: ContainerKind::Matrix,
            n: h.n(),
            ts: h.ts,
            blocks: vec![Block::from_matrix(&h.entries)],
        },
    )
}

pub fn read_matrix(r: &mut impl Read) -> Result<ChannelMatrix> {
    let c = read_container(r)?;
    expect_kind(&c, ContainerKind::Matrix, 1)?;
    let entries = c.blocks[0].to_matrix()?;
    if entries.nrows() != c.n || entries.ncols() != c.n {
        return Err(Error::Format("matrix block does not match header size".into()));
    }
    Ok(ChannelMatrix {
        entries,
        ts: c.ts,
        provenance: Provenance {
            source: "file".into(),
            config_hash: String::new(),
        },
    })
}

pub fn write_svd(w: &mut impl Write, s: &SvdResult, ts: f64) -> Result<()> {
    write_container(
        w,
        &Container {
            kind: ContainerKind::Svd,
            n: s.n(),
            ts,
            blocks: vec![
                Block {
                    rows: s.n(),
                    cols: 1,
                    data: BlockData::Real(s.sigmas.clone()),
                },
                Block::from_matrix(&s.u),
                Block::from_matrix(&s.v),
            ],
        },
    )
}

pub fn read_svd(r: &mut impl Read) -> Result<(SvdResult, f64)> {
    let c = read_container(r)?;
    expect_kind(&c, ContainerKind::Svd, 3)?;
    let sigmas = c.blocks[0].real()?.to_vec();
    let u = c.blocks[1].to_matrix()?;
    let v = c.blocks[2].to_matrix()?;
    let n = c.n;
    if sigmas.len() != n || u.shape() != (n, n) || v.shape() != (n, n) {
        return Err(Error::Format("SVD blocks do not match header size".into()));
    }
    Ok((SvdResult { sigmas, u, v }, c.ts))
}

pub fn write_tf_grid(w: &mut impl Write, g: &TFGrid, kind_tag: u32) -> Result<()> {
    write_container(
        w,
        &Container {
            kind: ContainerKind::TfGrid,
            n: g.t.len,
            ts: 1.0,
            blocks: vec![
                Block {
                    rows: g.t.len,
                    cols: g.f.len,
                    data: BlockData::Real(g.values.clone()),
                },
                Block {
                    rows: 1,
                    cols: 6,
                    data: BlockData::Real(vec![g.t.start, g.t.step, g.f.start, g.f.step, kind_tag as f64, 0.0]),
                },
            ],
        },
    )
}

pub fn read_tf_grid(r: &mut impl Read) -> Result<(TFGrid, u32)> {
    let c = read_container(r)?;
    expect_kind(&c, ContainerKind::TfGrid, 2)?;
    let values = c.blocks[0].real()?.to_vec();
    let axes = c.blocks[1].real()?;
    if axes.len() != 6 {
        return Err(Error::Format("axis block must have 6 entries".into()));
    }
    let t = Axis::new(axes[0], axes[1], c.blocks[0].rows);
    let f = Axis::new(axes[2], axes[3], c.blocks[0].cols);
    Ok((TFGrid::new(t, f, values)?, axes[4] as u32))
}

/// `n,k,re,im` rows for every entry.
pub fn matrix_csv(h: &ChannelMatrix) -> String {
    let mut s = String::from("n,k,re,im\n");
    for r in 0..h.n() {
        for c in 0..h.n() {
            let z = h.entries[(r, c)];
            let _ = writeln!(s, "{r},{c},{},{}", z.re, z.im);
        }
    }
    s
}

/// `index,sigma` with 1-based indices.
pub fn sigmas_csv(sigmas: &[f64]) -> String {
    let mut s = String::from("index,sigma\n");
    for (i, x) in sigmas.iter().enumerate() {
        let _ = writeln!(s, "{},{x}", i + 1);
    }
    s
}

/// `t,f,value` triplets.
pub fn tf_grid_csv(g: &TFGrid) -> String {
    let mut s = String::from("t,f,value\n");
    for i in 0..g.t.len {
        for j in 0..g.f.len {
            let _ = writeln!(s, "{},{},{}", g.t.at(i), g.f.at(j), g.get(i, j));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_multipath, ExperimentConfig};
    use crate::discretize::build_channel_matrix;
    use crate::spectral::svd;

    #[test]
    fn matrix_round_trip_and_header_layout() {
        let h = build_channel_matrix(&sample_multipath(&ExperimentConfig::paper(1)).unwrap(), 16).unwrap();
        let mut buf = Vec::new();
        write_matrix(&mut buf, &h).unwrap();
        assert_eq!(&buf[0..4], b"LTVM");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[12..20].try_into().unwrap()), 16);
        assert_eq!(f64::from_le_bytes(buf[20..28].try_into().unwrap()), 1.0);
        // First payload element is H[0, 0], then H[0, 1] (row-major).
        let first = 28 + 4 + 8 + 8 + 4;
        let re01 = f64::from_le_bytes(buf[first + 16..first + 24].try_into().unwrap());
        assert_eq!(re01, h.entries[(0, 1)].re);
        assert_eq!(buf.len(), first + 16 * 16 * 16);
        let back = read_matrix(&mut buf.as_slice()).unwrap();
        assert_eq!(back.entries, h.entries);
    }

    #[test]
    fn svd_round_trip() {
        let h = build_channel_matrix(&sample_multipath(&ExperimentConfig::paper(2)).unwrap(), 12).unwrap();
        let s = svd(&h).unwrap();
        let mut buf = Vec::new();
        write_svd(&mut buf, &s, 1.0).unwrap();
        let (back, ts) = read_svd(&mut buf.as_slice()).unwrap();
        assert_eq!(back, s);
        assert_eq!(ts, 1.0);
        assert!(matches!(read_matrix(&mut buf.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn corrupt_inputs_are_format_errors() {
        let h = build_channel_matrix(&crate::channel::ChannelModel::identity(), 4).unwrap();
        let mut buf = Vec::new();
        write_matrix(&mut buf, &h).unwrap();
        let truncated = &buf[..buf.len() - 3];
        assert!(matches!(read_matrix(&mut &truncated[..]), Err(Error::Format(_))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_matrix(&mut bad.as_slice()), Err(Error::Format(_))));
        let mut huge = buf.clone();
        huge[32..40].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(read_matrix(&mut huge.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn csv_exports() {
        assert_eq!(sigmas_csv(&[2.0, 0.5]), "index,sigma\n1,2\n2,0.5\n");
        let h = build_channel_matrix(&crate::channel::ChannelModel::identity(), 2).unwrap();
        assert_eq!(matrix_csv(&h), "n,k,re,im\n0,0,1,0\n0,1,0,0\n1,0,0,0\n1,1,1,0\n");
    }
}
