//! Grayscale portable float map (`Pf`). Rows are stored bottom-to-top; a
//! negative scale marks little-endian samples.

use std::path::Path;

use super::Heatmap;
use crate::error::{Error, Result};

pub fn write_heatmap_pfm(heatmap: &Heatmap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pfm(heatmap)).map_err(|e| Error::io(path, e))
}

pub fn encode_pfm(heatmap: &Heatmap) -> Vec<u8> {
    let mut out = format!("Pf\n{} {}\n-1.0\n", heatmap.width, heatmap.height).into_bytes();
    out.reserve(heatmap.values.len() * 4);
    for y in (0..heatmap.height).rev() {
        let row = &heatmap.values[y * heatmap.width..(y + 1) * heatmap.width];
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_heatmap_pfm(path: impl AsRef<Path>) -> Result<Heatmap> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pfm(&bytes)
}

/// Reads one newline-terminated header line starting at `pos`.
fn header_line(bytes: &[u8], pos: &mut usize) -> Result<String> {
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos] != b'\n' {
        *pos += 1;
    }
    if *pos >= bytes.len() {
        return Err(Error::Format {
            offset: start,
            message: "unterminated PFM header line".into(),
        });
    }
    let line = String::from_utf8_lossy(&bytes[start..*pos])
        .trim()
        .to_string();
    *pos += 1;
    Ok(line)
}

pub fn decode_pfm(bytes: &[u8]) -> Result<Heatmap> {
    let mut pos = 0;
    let magic = header_line(bytes, &mut pos)?;
    if magic != "Pf" {
        return Err(Error::Format {
            offset: 0,
            message: format!("expected grayscale 'Pf' magic, found '{magic}'"),
        });
    }
    let dims_offset = pos;
    let dims = header_line(bytes, &mut pos)?;
    let parsed: Vec<usize> = dims
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Format {
            offset: dims_offset,
            message: format!("bad PFM dimensions '{dims}'"),
        })?;
    let [width, height] = parsed[..] else {
        return Err(Error::Format {
            offset: dims_offset,
            message: format!("bad PFM dimensions '{dims}'"),
        });
    };
    let scale_offset = pos;
    let scale_text = header_line(bytes, &mut pos)?;
    let scale: f64 = scale_text.parse().map_err(|_| Error::Format {
        offset: scale_offset,
        message: format!("bad PFM scale '{scale_text}'"),
    })?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Format {
            offset: scale_offset,
            message: "PFM scale must be finite and nonzero".into(),
        });
    }
    let little_endian = scale < 0.0;

    let expected = width * height * 4;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: payload.len(),
        });
    }
    let mut values = vec![0f32; width * height];
    for (i, chunk) in payload[..expected].chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little_endian {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        if !v.is_finite() {
            return Err(Error::Validation(format!(
                "non-finite heatmap value at sample {i}"
            )));
        }
        let (x, file_row) = (i % width, i / width);
        values[(height - 1 - file_row) * width + x] = v;
    }
    Heatmap::new(width, height, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_map_round_trip() {
        let h = Heatmap::filled(5, 3, 0.5);
        assert_eq!(decode_pfm(&encode_pfm(&h)).unwrap(), h);
    }

    #[test]
    fn nan_is_rejected() {
        let mut h = Heatmap::filled(2, 2, 0.0);
        h.values[3] = f32::NAN;
        let err = decode_pfm(&encode_pfm(&h)).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn big_endian_files_are_read() {
        let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&0.25f32.to_be_bytes());
        bytes.extend_from_slice(&0.75f32.to_be_bytes());
        let h = decode_pfm(&bytes).unwrap();
        assert_eq!(h.values, vec![0.25, 0.75]);
    }

    #[test]
    fn rows_stored_bottom_up() {
        let h = Heatmap::new(1, 2, vec![1.0, 2.0]).unwrap();
        let bytes = encode_pfm(&h);
        let payload = &bytes[bytes.len() - 8..];
        assert_eq!(&payload[..4], &2.0f32.to_le_bytes());
    }

    #[test]
    fn colour_pfm_rejected() {
        assert!(matches!(
            decode_pfm(b"PF\n1 1\n-1\n\0\0\0\0\0\0\0\0\0\0\0\0"),
            Err(Error::Format { offset: 0, .. })
        ));
    }

    proptest! {
        #[test]
        fn finite_maps_round_trip_bit_exact(
            w in 1usize..8,
            vals in proptest::collection::vec(-1e30f32..1e30f32, 56),
        ) {
            let h = vals.len() / w;
            let map = Heatmap::new(w, h, vals[..w * h].to_vec()).unwrap();
            let back = decode_pfm(&encode_pfm(&map)).unwrap();
            prop_assert!(back.values.iter().zip(&map.values).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
