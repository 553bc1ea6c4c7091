//! File formats: the `.sib` spectrum-image container, mask JSON, and a
//! deterministic JSON writer for reports.
//!
//! A `.sib` file is one UTF-8 JSON header line terminated by `\n`,
//!
//! ```json
//! {"magic":"SIB1","bands":Nb,"height":H,"width":W,"dtype":"f64","layout":"band-major"}
//! ```
//!
//! followed by `bands*height*width` little-endian 64-bit floats, band-major:
//! band 0's pixels in row-major spatial order, then band 1, and so on.
//! Writers are deterministic (same object, same bytes); readers reject
//! malformed input rather than repairing it. Non-finite payload values are
//! legal on read — the caller decides whether to warn.

use crate::image::{SamplingMask, SpectrumImage};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

pub const SIB_MAGIC: &str = "SIB1";
pub const SIB_DTYPE: &str = "f64";
pub const SIB_LAYOUT: &str = "band-major";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("bad magic: expected {SIB_MAGIC:?}, got {0:?}")]
    BadMagic(String),
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("truncated payload: expected {expected} bytes, got {got}")]
    TruncatedPayload { expected: usize, got: usize },
    #[error("trailing bytes after payload")]
    TrailingBytes,
    #[error("invalid mask file: {0}")]
    InvalidMask(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SibHeader {
    pub magic: String,
    pub bands: usize,
    pub height: usize,
    pub width: usize,
    pub dtype: String,
    pub layout: String,
}

impl SibHeader {
    fn validate(&self) -> Result<(), IoError> {
        if self.magic != SIB_MAGIC {
            return Err(IoError::BadMagic(self.magic.clone()));
        }
        if self.dtype != SIB_DTYPE {
            return Err(IoError::InvalidHeader(format!(
                "unsupported dtype {:?}",
                self.dtype
            )));
        }
        if self.layout != SIB_LAYOUT {
            return Err(IoError::InvalidHeader(format!(
                "unsupported layout {:?}",
                self.layout
            )));
        }
        if self.bands == 0 || self.height == 0 || self.width == 0 {
            return Err(IoError::InvalidHeader(format!(
                "counts must be positive: bands={}, height={}, width={}",
                self.bands, self.height, self.width
            )));
        }
        Ok(())
    }
}

pub fn write_sib(image: &SpectrumImage, path: &Path) -> Result<(), IoError> {
    let header = SibHeader {
        magic: SIB_MAGIC.to_string(),
        bands: image.bands(),
        height: image.height(),
        width: image.width(),
        dtype: SIB_DTYPE.to_string(),
        layout: SIB_LAYOUT.to_string(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    // row-major dump of the bands x pixels matrix is exactly band-major
    for &v in image.data().iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sib(path: &Path) -> Result<SpectrumImage, IoError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header_line = Vec::new();
    r.read_until(b'\n', &mut header_line)?;
    if header_line.last() != Some(&b'\n') {
        return Err(IoError::InvalidHeader("missing header newline".into()));
    }
    header_line.pop();
    let header: SibHeader = serde_json::from_slice(&header_line)?;
    header.validate()?;

    let count = header.bands * header.height * header.width;
    let expected = count * 8;
    let mut payload = vec![0u8; expected];
    let mut got = 0;
    while got < expected {
        let n = r.read(&mut payload[got..])?;
        if n == 0 {
            return Err(IoError::TruncatedPayload { expected, got });
        }
        got += n;
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(IoError::TrailingBytes);
    }

    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let data = Array2::from_shape_vec((header.bands, header.height * header.width), values)
        .expect("length checked");
    SpectrumImage::new(header.height, header.width, data)
        .map_err(|e| IoError::InvalidHeader(e.to_string()))
}

#[derive(Debug, Serialize, Deserialize)]
struct MaskFile {
    np: usize,
    indices: Vec<usize>,
}

pub fn write_mask(mask: &SamplingMask, path: &Path) -> Result<(), IoError> {
    let file = MaskFile {
        np: mask.np(),
        indices: mask.indices().to_vec(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &file)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_mask(path: &Path) -> Result<SamplingMask, IoError> {
    let r = BufReader::new(File::open(path)?);
    let file: MaskFile = serde_json::from_reader(r)?;
    SamplingMask::new(file.np, file.indices).map_err(|e| IoError::InvalidMask(e.to_string()))
}

/// Pretty-printed JSON with a trailing newline; field order follows the
/// struct definition, so identical values serialize to identical bytes.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn write_text(text: &str, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tempdir() -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "sib-io-test-{}-{}",
            std::process::id(),
            rand::random::<u32>()
        ));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn random_image(seed: u64) -> SpectrumImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array2::from_shape_fn((5, 12), |_| {
            // mix in extreme magnitudes and negatives
            let v: f64 = rng.random::<f64>() - 0.5;
            v * 10f64.powi(rng.random_range(-300..300))
        });
        SpectrumImage::new(3, 4, data).unwrap()
    }

    #[test]
    fn sib_round_trip_is_bit_identical() {
        let dir = tempdir();
        let path = dir.join("image.sib");
        let img = random_image(1);
        write_sib(&img, &path).unwrap();
        let back = read_sib(&path).unwrap();
        assert_eq!(img.data().dim(), back.data().dim());
        for (a, b) in img.data().iter().zip(back.data().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn sib_writer_is_deterministic() {
        let dir = tempdir();
        let a = dir.join("a.sib");
        let b = dir.join("b.sib");
        let img = random_image(2);
        write_sib(&img, &a).unwrap();
        write_sib(&img, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempdir();
        let path = dir.join("short.sib");
        let img = random_image(3);
        write_sib(&img, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(
            read_sib(&path),
            Err(IoError::TruncatedPayload { .. })
        ));
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let dir = tempdir();
        let path = dir.join("long.sib");
        let img = random_image(4);
        write_sib(&img, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.push(0);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_sib(&path), Err(IoError::TrailingBytes)));
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn zero_band_header_is_invalid() {
        let dir = tempdir();
        let path = dir.join("bad.sib");
        std::fs::write(
            &path,
            b"{\"magic\":\"SIB1\",\"bands\":0,\"height\":1,\"width\":1,\"dtype\":\"f64\",\"layout\":\"band-major\"}\n",
        )
        .unwrap();
        assert!(matches!(read_sib(&path), Err(IoError::InvalidHeader(_))));
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempdir();
        let path = dir.join("magic.sib");
        std::fs::write(
            &path,
            b"{\"magic\":\"XIB1\",\"bands\":1,\"height\":1,\"width\":1,\"dtype\":\"f64\",\"layout\":\"band-major\"}\n",
        )
        .unwrap();
        assert!(matches!(read_sib(&path), Err(IoError::BadMagic(_))));
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn non_finite_values_read_back_without_error() {
        let dir = tempdir();
        let path = dir.join("nan.sib");
        let mut data = Array2::zeros((2, 4));
        data[[0, 1]] = f64::NAN;
        data[[1, 2]] = f64::INFINITY;
        let img = SpectrumImage::new(2, 2, data).unwrap();
        write_sib(&img, &path).unwrap();
        let back = read_sib(&path).unwrap();
        assert!(!back.all_finite());
        assert!(back.data()[[0, 1]].is_nan());
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn mask_round_trip_and_validation() {
        let dir = tempdir();
        let path = dir.join("mask.json");
        let mask = SamplingMask::new(10, vec![1, 4, 7]).unwrap();
        write_mask(&mask, &path).unwrap();
        let back = read_mask(&path).unwrap();
        assert_eq!(mask, back);

        std::fs::write(&path, b"{\"np\":10,\"indices\":[1,1,4]}").unwrap();
        assert!(matches!(read_mask(&path), Err(IoError::InvalidMask(_))));
        std::fs::write(&path, b"{\"np\":10,\"indices\":[3,10]}").unwrap();
        assert!(matches!(read_mask(&path), Err(IoError::InvalidMask(_))));
        std::fs::remove_dir_all(dir).ok();
    }
}
