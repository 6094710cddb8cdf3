//! Binary raster containers.
//!
//! A file is one line of JSON header terminated by `\n`, followed by a raw
//! little-endian payload. Payloads are band-major: all pixels of band 0 (in
//! row-major pixel order), then band 1, and so on. Abundance stacks repeat
//! that layout once per frame, with P components in place of L bands.

use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::write_atomic;
use crate::error::{Error, Result};
use crate::prior::AbundanceImage;

const MAX_HEADER: usize = 64 * 1024;

/// Pixel sums further than this from 1 are renormalized on read.
pub const STACK_SUM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    Float32,
    Float64,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::Float32 => 4,
            Dtype::Float64 => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandOrder {
    BandMajor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeHeader {
    #[serde(rename = "L")]
    pub bands: usize,
    pub width: usize,
    pub height: usize,
    pub dtype: Dtype,
    pub band_order: BandOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackHeader {
    #[serde(rename = "P")]
    pub components: usize,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub dtype: Dtype,
    pub band_order: BandOrder,
}

fn encode(out: &mut Vec<u8>, m: &DMatrix<f64>, dtype: Dtype) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            match dtype {
                Dtype::Float32 => out.extend_from_slice(&(m[(r, c)] as f32).to_le_bytes()),
                Dtype::Float64 => out.extend_from_slice(&m[(r, c)].to_le_bytes()),
            }
        }
    }
}

fn decode(bytes: &[u8], rows: usize, cols: usize, dtype: Dtype) -> DMatrix<f64> {
    let size = dtype.size();
    DMatrix::from_fn(rows, cols, |r, c| {
        let off = (r * cols + c) * size;
        let chunk = &bytes[off..off + size];
        match dtype {
            Dtype::Float32 => f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64,
            Dtype::Float64 => f64::from_le_bytes(chunk.try_into().expect("8 bytes")),
        }
    })
}

fn read_header<T: for<'de> Deserialize<'de>>(reader: &mut impl BufRead) -> Result<T> {
    let mut line = Vec::new();
    reader
        .take(MAX_HEADER as u64)
        .read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::Format(
            "missing or oversized JSON header line".into(),
        ));
    }
    line.pop();
    serde_json::from_slice(&line).map_err(|e| Error::Format(format!("bad header: {e}")))
}

fn read_payload(reader: &mut impl Read, expected: usize) -> Result<Vec<u8>> {
    let mut payload = Vec::with_capacity(expected);
    reader.read_to_end(&mut payload)?;
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload has {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    Ok(payload)
}

fn header_line<T: Serialize>(header: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec(header)?;
    out.push(b'\n');
    Ok(out)
}

/// Observed hyperspectral cube, stored as an L×N matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeFile {
    pub header: CubeHeader,
    pub data: DMatrix<f64>,
}

impl CubeFile {
    pub fn new(data: DMatrix<f64>, width: usize, height: usize, dtype: Dtype) -> Result<Self> {
        if data.ncols() != width * height {
            return Err(Error::DimensionMismatch {
                what: "cube pixels",
                expected: width * height,
                found: data.ncols(),
            });
        }
        Ok(Self {
            header: CubeHeader {
                bands: data.nrows(),
                width,
                height,
                dtype,
                band_order: BandOrder::BandMajor,
            },
            data,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = header_line(&self.header)?;
        encode(&mut out, &self.data, self.header.dtype);
        Ok(out)
    }

    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut reader = BufReader::new(reader);
        let header: CubeHeader = read_header(&mut reader)?;
        let n = header.width * header.height;
        let payload = read_payload(&mut reader, header.bands * n * header.dtype.size())?;
        let data = decode(&payload, header.bands, n, header.dtype);
        Ok(Self { header, data })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }
}

/// A sequence of abundance images, one P×N frame each.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceStackFile {
    pub header: StackHeader,
    pub frames: Vec<DMatrix<f64>>,
}

impl AbundanceStackFile {
    pub fn from_images(images: &[AbundanceImage], dtype: Dtype) -> Result<Self> {
        let first = images.first().ok_or_else(|| {
            Error::InvalidInput("abundance stack needs at least one frame".into())
        })?;
        for img in images {
            if (img.components(), img.width(), img.height())
                != (first.components(), first.width(), first.height())
            {
                return Err(Error::InvalidInput(
                    "stack frames have different shapes".into(),
                ));
            }
        }
        Ok(Self {
            header: StackHeader {
                components: first.components(),
                width: first.width(),
                height: first.height(),
                frames: images.len(),
                dtype,
                band_order: BandOrder::BandMajor,
            },
            frames: images.iter().map(|img| img.matrix().clone()).collect(),
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = header_line(&self.header)?;
        for f in &self.frames {
            encode(&mut out, f, self.header.dtype);
        }
        Ok(out)
    }

    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut reader = BufReader::new(reader);
        let header: StackHeader = read_header(&mut reader)?;
        if header.components < 2 {
            return Err(Error::Format("abundance stacks need P >= 2".into()));
        }
        let n = header.width * header.height;
        let frame_bytes = header.components * n * header.dtype.size();
        let payload = read_payload(&mut reader, frame_bytes * header.frames)?;
        let mut renormalized = 0usize;
        let frames = (0..header.frames)
            .map(|f| {
                let mut m = decode(
                    &payload[f * frame_bytes..(f + 1) * frame_bytes],
                    header.components,
                    n,
                    header.dtype,
                );
                for mut col in m.column_iter_mut() {
                    if col.iter().any(|x| !x.is_finite() || *x < 0.0) {
                        return Err(Error::Format(format!(
                            "frame {f} has a negative or non-finite abundance"
                        )));
                    }
                    let s = col.sum();
                    if (s - 1.0).abs() > STACK_SUM_TOL {
                        if s <= 0.0 {
                            return Err(Error::Format(format!("frame {f} has an all-zero pixel")));
                        }
                        col /= s;
                        renormalized += 1;
                    }
                }
                Ok(m)
            })
            .collect::<Result<Vec<_>>>()?;
        if renormalized > 0 {
            log::warn!("renormalized {renormalized} pixel vectors whose sums were off by more than {STACK_SUM_TOL:e}");
        }
        Ok(Self { header, frames })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    /// Frames as images. Pixel sums are closed exactly, which matters for
    /// float32 payloads whose sums are only good to ~1e-7.
    pub fn images(&self) -> Result<Vec<AbundanceImage>> {
        self.frames
            .iter()
            .map(|f| {
                let mut m = f.clone();
                for mut col in m.column_iter_mut() {
                    let s = col.sum();
                    col /= s;
                }
                AbundanceImage::new(m, self.header.width, self.header.height)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_header_is_one_json_line() {
        let cube = CubeFile::new(DMatrix::from_element(2, 6, 0.5), 3, 2, Dtype::Float64).unwrap();
        let bytes = cube.to_bytes().unwrap();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        let header: serde_json::Value = serde_json::from_slice(&bytes[..nl]).unwrap();
        assert_eq!(header["L"], 2);
        assert_eq!(header["band_order"], "band-major");
        assert_eq!(bytes.len() - nl - 1, 2 * 6 * 8);
    }

    #[test]
    fn band_major_ordering() {
        // band 0: pixels 0..3 = 0,1,2 ; band 1: 10,11,12
        let m = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        let bytes = CubeFile::new(m, 3, 1, Dtype::Float32)
            .unwrap()
            .to_bytes()
            .unwrap();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        let vals: Vec<f32> = bytes[nl + 1..]
            .chunks(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(vals, vec![0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let cube = CubeFile::new(DMatrix::from_element(2, 4, 0.5), 2, 2, Dtype::Float64).unwrap();
        let mut bytes = cube.to_bytes().unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(
            CubeFile::from_reader(&bytes[..]),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            CubeFile::from_reader(&b"{}"[..]),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn stack_renormalizes_far_off_pixels() {
        let m = DMatrix::from_column_slice(2, 2, &[0.3, 0.7, 0.2, 0.6]);
        let stack = AbundanceStackFile {
            header: StackHeader {
                components: 2,
                width: 2,
                height: 1,
                frames: 1,
                dtype: Dtype::Float64,
                band_order: BandOrder::BandMajor,
            },
            frames: vec![m],
        };
        let back = AbundanceStackFile::from_reader(&stack.to_bytes().unwrap()[..]).unwrap();
        assert_eq!(back.frames[0][(0, 0)], 0.3);
        assert!((back.frames[0][(0, 1)] - 0.25).abs() < 1e-15);
    }
}
