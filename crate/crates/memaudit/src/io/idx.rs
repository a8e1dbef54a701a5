//! IDX image ingestion: big-endian magic `0x00000803` (unsigned-byte
//! tensor of rank 3), dimension sizes, then the row-major pixel payload.
//! Pixels are scaled from `{0..255}` to `[0, 1]`.

use std::path::Path;

use byteorder::{BigEndian, ByteOrder};
use memaudit_core::{Dataset, ShapeTag};

use super::{IoError, Result};

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

pub fn load_idx(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".into());
    parse_idx_images(&name, &bytes)
}

pub fn parse_idx_images(name: &str, bytes: &[u8]) -> Result<Dataset> {
    if bytes.len() < 4 {
        return Err(IoError::Format("IDX file shorter than its magic".into()));
    }
    let magic = BigEndian::read_u32(&bytes[0..4]);
    if magic != IDX_IMAGE_MAGIC {
        return Err(IoError::Format(format!(
            "expected IDX image magic 0x{IDX_IMAGE_MAGIC:08x}, found 0x{magic:08x}"
        )));
    }
    if bytes.len() < 16 {
        return Err(IoError::Format(
            "IDX image header truncated (need 3 dimension sizes)".into(),
        ));
    }
    let n = BigEndian::read_u32(&bytes[4..8]) as usize;
    let height = BigEndian::read_u32(&bytes[8..12]) as usize;
    let width = BigEndian::read_u32(&bytes[12..16]) as usize;
    let expected = 16 + n * height * width;
    if bytes.len() != expected {
        return Err(IoError::Format(format!(
            "IDX payload length mismatch: header promises {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes[16..].iter().map(|&b| b as f64 / 255.0).collect();
    Ok(Dataset::from_rows(
        name,
        data,
        height * width,
        ShapeTag::Image {
            height,
            width,
            channels: 1,
        },
    )?)
}

/// Label files (`0x00000801`): one unsigned byte per observation.
pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 8 {
        return Err(IoError::Format("IDX label file truncated".into()));
    }
    let magic = BigEndian::read_u32(&bytes[0..4]);
    if magic != IDX_LABEL_MAGIC {
        return Err(IoError::Format(format!(
            "expected IDX label magic 0x{IDX_LABEL_MAGIC:08x}, found 0x{magic:08x}"
        )));
    }
    let n = BigEndian::read_u32(&bytes[4..8]) as usize;
    if bytes.len() != 8 + n {
        return Err(IoError::Format(format!(
            "IDX label payload length mismatch: expected {n} labels, found {}",
            bytes.len() - 8
        )));
    }
    Ok(bytes[8..].to_vec())
}

#[cfg(test)]
pub(crate) fn encode_idx_images(images: &[Vec<u8>], height: usize, width: usize) -> Vec<u8> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(images.len() as u32).to_be_bytes());
    bytes.extend_from_slice(&(height as u32).to_be_bytes());
    bytes.extend_from_slice(&(width as u32).to_be_bytes());
    for image in images {
        assert_eq!(image.len(), height * width);
        bytes.extend_from_slice(image);
    }
    bytes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_two_images() {
        let a: Vec<u8> = (0..16).collect();
        let b = vec![255u8; 16];
        let bytes = encode_idx_images(&[a, b], 4, 4);
        let d = parse_idx_images("t", &bytes).unwrap();
        assert_eq!((d.n(), d.dim()), (2, 16));
        assert_eq!(
            d.shape(),
            ShapeTag::Image {
                height: 4,
                width: 4,
                channels: 1
            }
        );
        assert_eq!(d.row(0)[1], 1.0 / 255.0);
        assert_eq!(d.row(1), vec![1.0; 16].as_slice());
    }

    #[test]
    fn wrong_magic_named_in_error() {
        let mut bytes = encode_idx_images(&[vec![0; 4], vec![0; 4]], 2, 2);
        bytes[2] = 0x08;
        bytes[3] = 0x01;
        let err = parse_idx_images("t", &bytes).unwrap_err().to_string();
        assert!(err.contains("0x00000801"), "{err}");
    }

    #[test]
    fn truncated_payload_rejected() {
        let mut bytes = encode_idx_images(&[vec![7; 4], vec![9; 4]], 2, 2);
        bytes.pop();
        let err = parse_idx_images("t", &bytes).unwrap_err().to_string();
        assert!(err.contains("length mismatch"), "{err}");
    }
}
