//! Big-endian IDX containers as used by MNIST.

use std::path::Path;

use crate::error::{Error, Result};
use crate::problems::DenseRows;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub struct IdxDataset {
    /// One row per image, intensities `byte / 255`.
    pub images: DenseRows,
    pub labels: Vec<u8>,
    pub height: usize,
    pub width: usize,
}

impl IdxDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn err(&self, offset: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.into(),
            offset: offset as u64,
            msg: msg.into(),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let end = self.pos + 4;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| self.err(self.pos, format!("truncated header: missing {what}")))?;
        self.pos = end;
        Ok(u32::from_be_bytes(chunk.try_into().expect("4 bytes")))
    }

    fn payload(&mut self, len: usize) -> Result<&'a [u8]> {
        let avail = self.bytes.len() - self.pos;
        if avail < len {
            return Err(self.err(
                self.bytes.len(),
                format!("truncated payload: expected {len} bytes, found {avail}"),
            ));
        }
        if avail > len {
            return Err(self.err(self.pos + len, format!("{} trailing bytes", avail - len)));
        }
        let out = &self.bytes[self.pos..];
        self.pos += len;
        Ok(out)
    }

    fn magic(&mut self, want: u32) -> Result<()> {
        let got = self.u32("magic")?;
        if got != want {
            return Err(self.err(0, format!("wrong magic {got:#010x}, expected {want:#010x}")));
        }
        Ok(())
    }
}

/// Parses an image file into `(count, height, width, raw pixels)`.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let mut c = Cursor {
        bytes,
        pos: 0,
        path,
    };
    c.magic(IMAGE_MAGIC)?;
    let n = c.u32("image count")? as usize;
    let h = c.u32("row count")? as usize;
    let w = c.u32("column count")? as usize;
    let px = c.payload(n * h * w)?;
    Ok((n, h, w, px.to_vec()))
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let mut c = Cursor {
        bytes,
        pos: 0,
        path,
    };
    c.magic(LABEL_MAGIC)?;
    let n = c.u32("label count")? as usize;
    Ok(c.payload(n)?.to_vec())
}

pub fn write_idx_images(n: usize, h: usize, w: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), n * h * w, "pixel buffer size");
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGE_MAGIC, n as u32, h as u32, w as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<IdxDataset> {
    let (n, h, w, px) = parse_idx_images(&read(images_path)?, images_path)?;
    let labels = parse_idx_labels(&read(labels_path)?, labels_path)?;
    if labels.len() != n {
        return Err(Error::Parse {
            path: labels_path.into(),
            offset: 4,
            msg: format!(
                "label count {} does not match image count {n}",
                labels.len()
            ),
        });
    }
    if let Some(i) = labels.iter().position(|&l| l > 9) {
        return Err(Error::Parse {
            path: labels_path.into(),
            offset: 8 + i as u64,
            msg: format!("label {} outside 0..=9", labels[i]),
        });
    }
    let data = px.iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok(IdxDataset {
        images: DenseRows::new(data, n, h * w)?,
        labels,
        height: h,
        width: w,
    })
}

/// Keeps samples labelled `neg` or `pos` (in order) and maps them to
/// `−1` / `+1`.
pub fn binary_filter(data: &IdxDataset, neg: u8, pos: u8) -> Result<(DenseRows, Vec<f64>)> {
    if neg == pos || neg > 9 || pos > 9 {
        return Err(Error::InvalidConfig(format!(
            "digits must be distinct and in 0..=9, got {neg} and {pos}"
        )));
    }
    let keep: Vec<usize> = (0..data.len())
        .filter(|&i| data.labels[i] == neg || data.labels[i] == pos)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let y = keep
        .iter()
        .map(|&i| if data.labels[i] == pos { 1.0 } else { -1.0 })
        .collect();
    Ok((data.images.select_rows(&keep), y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_pair(dir: &Path, img: &[u8], lab: &[u8]) -> (std::path::PathBuf, std::path::PathBuf) {
        let ip = dir.join("img.idx");
        let lp = dir.join("lab.idx");
        std::fs::write(&ip, img).unwrap();
        std::fs::write(&lp, lab).unwrap();
        (ip, lp)
    }

    #[test]
    fn one_image_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = write_pair(
            dir.path(),
            &write_idx_images(1, 28, 28, &[0; 784]),
            &write_idx_labels(&[7]),
        );
        let d = load_idx(&ip, &lp).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.images.cols(), 784);
        assert!(d.images.row(0).iter().all(|&v| v == 0.0));
        assert_eq!(d.labels, vec![7]);
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let mut bytes = write_idx_images(1, 2, 2, &[0; 4]);
        bytes[3] = 0x02;
        let e = parse_idx_images(&bytes, Path::new("x")).unwrap_err();
        assert!(matches!(e, Error::Parse { offset: 0, .. }));
        assert!(e.to_string().contains("wrong magic 0x00000802"));
    }

    #[test]
    fn truncation_and_count_mismatch() {
        let bytes = write_idx_images(2, 2, 2, &[1; 8]);
        let e = parse_idx_images(&bytes[..bytes.len() - 1], Path::new("x")).unwrap_err();
        assert!(e.to_string().contains("truncated payload"));
        let e = parse_idx_images(&bytes[..10], Path::new("x")).unwrap_err();
        assert!(matches!(e, Error::Parse { offset: 8, .. }), "{e}");

        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = write_pair(dir.path(), &bytes, &write_idx_labels(&[1, 2, 3]));
        let e = load_idx(&ip, &lp).unwrap_err();
        assert!(e.to_string().contains("does not match"));
    }

    #[test]
    fn pixels_are_normalised() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = write_pair(
            dir.path(),
            &write_idx_images(1, 1, 3, &[0, 51, 255]),
            &write_idx_labels(&[0]),
        );
        let d = load_idx(&ip, &lp).unwrap();
        assert_eq!(d.images.row(0), &[0.0, 0.2, 1.0]);
    }

    #[test]
    fn filter_zero_eight() {
        let d = IdxDataset {
            images: DenseRows::new(vec![0.0, 1.0, 2.0, 3.0], 4, 1).unwrap(),
            labels: vec![0, 8, 3, 8],
            height: 1,
            width: 1,
        };
        let (z, y) = binary_filter(&d, 0, 8).unwrap();
        assert_eq!(y, vec![-1.0, 1.0, 1.0]);
        assert_eq!(z.as_slice(), &[0.0, 1.0, 3.0]);
        assert!(matches!(binary_filter(&d, 5, 6), Err(Error::EmptyDataset)));
        assert!(binary_filter(&d, 8, 8).is_err());
    }

    proptest! {
        #[test]
        fn reserialisation_reproduces_bytes(
            n in 0usize..5, h in 1usize..5, w in 1usize..5, seed in any::<u64>()
        ) {
            let px: Vec<u8> = (0..n * h * w).map(|i| (seed.rotate_left(i as u32) & 0xff) as u8).collect();
            let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
            let img = write_idx_images(n, h, w, &px);
            let lab = write_idx_labels(&labels);
            let dir = tempfile::tempdir().unwrap();
            let (ip, lp) = write_pair(dir.path(), &img, &lab);
            let d = load_idx(&ip, &lp).unwrap();
            let raw: Vec<u8> = d.images.as_slice().iter().map(|v| (v * 255.0).round() as u8).collect();
            prop_assert_eq!(write_idx_images(d.len(), d.height, d.width, &raw), img);
            prop_assert_eq!(write_idx_labels(&d.labels), lab);
        }
    }
}
