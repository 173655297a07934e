//! On-disk grid format.
//!
//! A grid is stored as two files: a JSON header at the given path,
//! `{"n": <int>, "dtype": "f64"|"c128"|"u8", "layout": "row-major"}`, and a
//! raw payload next to it at `<path>.bin`. Real grids are little-endian `f64`,
//! complex grids interleave `re, im` pairs, masks are one byte per pixel
//! holding 0 or 1.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, RealGrid, SupportMask};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F64,
    C128,
    U8,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridHeader {
    pub n: usize,
    pub dtype: Dtype,
    pub layout: String,
}

const ROW_MAJOR: &str = "row-major";

pub fn payload_path(header: &Path) -> PathBuf {
    let mut s = header.as_os_str().to_owned();
    s.push(".bin");
    PathBuf::from(s)
}

fn write_pair(path: &Path, n: usize, dtype: Dtype, payload: &[u8]) -> Result<()> {
    let header = GridHeader {
        n,
        dtype,
        layout: ROW_MAJOR.to_string(),
    };
    fs::write(path, serde_json::to_vec(&header)?)?;
    fs::write(payload_path(path), payload)?;
    Ok(())
}

pub fn read_header(path: &Path) -> Result<GridHeader> {
    let header: GridHeader = serde_json::from_slice(&fs::read(path)?)?;
    if header.layout != ROW_MAJOR {
        return Err(Error::Format(format!("unsupported layout {:?}", header.layout)));
    }
    if header.n == 0 {
        return Err(Error::Format("grid side must be positive".into()));
    }
    Ok(header)
}

fn read_payload(path: &Path, expect: Dtype, bytes_per_pixel: usize) -> Result<(usize, Vec<u8>)> {
    let header = read_header(path)?;
    if header.dtype != expect {
        return Err(Error::Format(format!(
            "{} holds {:?}, expected {:?}",
            path.display(),
            header.dtype,
            expect
        )));
    }
    let raw = fs::read(payload_path(path))?;
    let want = header.n * header.n * bytes_per_pixel;
    if raw.len() != want {
        return Err(Error::Format(format!(
            "payload for {} has {} bytes, expected {want}",
            path.display(),
            raw.len()
        )));
    }
    Ok((header.n, raw))
}

fn f64s(raw: &[u8]) -> impl Iterator<Item = f64> + '_ {
    raw.chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
}

pub fn write_real(path: &Path, grid: &RealGrid) -> Result<()> {
    let payload: Vec<u8> = grid.as_slice().iter().flat_map(|v| v.to_le_bytes()).collect();
    write_pair(path, grid.n(), Dtype::F64, &payload)
}

pub fn read_real(path: &Path) -> Result<RealGrid> {
    let (n, raw) = read_payload(path, Dtype::F64, 8)?;
    let data: Vec<f64> = f64s(&raw).collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format(format!("{} contains non-finite values", path.display())));
    }
    RealGrid::from_vec(n, data)
}

pub fn write_complex(path: &Path, grid: &ComplexGrid) -> Result<()> {
    let payload: Vec<u8> = grid
        .as_slice()
        .iter()
        .flat_map(|c| c.re.to_le_bytes().into_iter().chain(c.im.to_le_bytes()))
        .collect();
    write_pair(path, grid.n(), Dtype::C128, &payload)
}

pub fn read_complex(path: &Path) -> Result<ComplexGrid> {
    let (n, raw) = read_payload(path, Dtype::C128, 16)?;
    let vals: Vec<f64> = f64s(&raw).collect();
    let data = vals
        .chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect();
    ComplexGrid::from_vec(n, data)
}

pub fn write_mask(path: &Path, mask: &SupportMask) -> Result<()> {
    let payload: Vec<u8> = mask.as_slice().iter().map(|&b| b as u8).collect();
    write_pair(path, mask.n(), Dtype::U8, &payload)
}

pub fn read_mask(path: &Path) -> Result<SupportMask> {
    let (n, raw) = read_payload(path, Dtype::U8, 1)?;
    let data = raw
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::Format(format!("mask value {other} is not 0/1"))),
        })
        .collect::<Result<Vec<_>>>()?;
    SupportMask::from_vec(n, data)
}
