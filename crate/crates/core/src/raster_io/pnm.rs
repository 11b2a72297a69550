//! Binary portable any-map (P5 / P6) codecs.

use std::path::Path;

use super::{quantize_u8, BinaryMask, RawPlane, RgbImage};
use crate::cfa::CfaPattern;
use crate::error::{Error, Result};

#[derive(Debug)]
struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: u32,
    data_offset: usize,
    comments: Vec<String>,
}

impl Header {
    fn bytes_per_sample(&self) -> usize {
        if self.maxval < 256 {
            1
        } else {
            2
        }
    }
}

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset,
        message: message.into(),
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(format_err(0, "missing 'P' magic"));
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut comments = Vec::new();
    let mut fields = [0u64; 3];

    for (i, field) in fields.iter_mut().enumerate() {
        // whitespace and comments before each field
        let mut saw_separator = false;
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => {
                    saw_separator = true;
                    pos += 1;
                }
                Some(b'#') => {
                    let start = pos + 1;
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                    comments.push(
                        String::from_utf8_lossy(&bytes[start..pos])
                            .trim()
                            .to_string(),
                    );
                    saw_separator = true;
                }
                Some(_) => break,
                None => return Err(format_err(pos, "unexpected end of header")),
            }
        }
        if !saw_separator {
            return Err(format_err(pos, "expected whitespace"));
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(format_err(pos, format!("expected header field {}", i + 1)));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| format_err(start, format!("header field '{text}' out of range")))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        Some(_) => return Err(format_err(pos, "expected single whitespace after maxval")),
        None => return Err(format_err(pos, "unexpected end of header")),
    }

    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(format_err(2, "zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format_err(2, format!("maxval {maxval} outside 1..=65535")));
    }
    Ok(Header {
        magic,
        width: width as usize,
        height: height as usize,
        maxval: maxval as u32,
        data_offset: pos,
        comments,
    })
}

fn read_samples(bytes: &[u8], header: &Header, channels: usize) -> Result<Vec<u32>> {
    let bps = header.bytes_per_sample();
    let count = header.width * header.height * channels;
    let expected = count * bps;
    let payload = &bytes[header.data_offset..];
    if payload.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: payload.len(),
        });
    }
    let samples = if bps == 1 {
        payload[..count].iter().map(|&b| b as u32).collect()
    } else {
        payload[..expected]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32)
            .collect()
    };
    Ok(samples)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn cfa_from_comments(comments: &[String]) -> Option<CfaPattern> {
    comments.iter().find_map(|c| {
        let rest = c.strip_prefix("cfa")?.trim_start_matches([' ', '=', ':']);
        rest.trim().parse().ok()
    })
}

/// Decodes a P5 plane to the nominal `[0,255]` range.
///
/// A header comment of the form `# cfa RGGB` declares the sensor layout.
pub fn read_pgm16(path: impl AsRef<Path>) -> Result<RawPlane> {
    let bytes = read_file(path.as_ref())?;
    decode_pgm16(&bytes)
}

pub fn decode_pgm16(bytes: &[u8]) -> Result<RawPlane> {
    let header = parse_header(bytes)?;
    if &header.magic != b"P5" {
        return Err(format_err(0, "expected P5 magic"));
    }
    let scale = 255.0 / header.maxval as f64;
    let data = read_samples(bytes, &header, 1)?
        .into_iter()
        .map(|s| s as f64 * scale)
        .collect();
    Ok(RawPlane {
        width: header.width,
        height: header.height,
        data,
        native_cfa: cfa_from_comments(&header.comments),
    })
}

/// Encodes a plane as 16-bit P5, mapping `[0,255]` onto `[0,65535]`.
pub fn write_pgm16(plane: &RawPlane, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::with_capacity(plane.data.len() * 2 + 64);
    out.extend_from_slice(b"P5\n");
    if let Some(p) = plane.native_cfa {
        out.extend_from_slice(format!("# cfa {}\n", p.name()).as_bytes());
    }
    out.extend_from_slice(format!("{} {}\n65535\n", plane.width, plane.height).as_bytes());
    for &v in &plane.data {
        let s = (v * 65535.0 / 255.0).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&s.to_be_bytes());
    }
    write_file(path.as_ref(), &out)
}

pub fn write_ppm8(image: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_ppm8(image))
}

pub fn encode_ppm8(image: &RgbImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(image.len() * 3 + 32);
    out.extend_from_slice(format!("P6\n{} {}\n255\n", image.width, image.height).as_bytes());
    for i in 0..image.len() {
        for plane in &image.planes {
            out.push(quantize_u8(plane[i]));
        }
    }
    out
}

pub fn read_ppm8(path: impl AsRef<Path>) -> Result<RgbImage> {
    let bytes = read_file(path.as_ref())?;
    decode_ppm8(&bytes)
}

pub fn decode_ppm8(bytes: &[u8]) -> Result<RgbImage> {
    let header = parse_header(bytes)?;
    if &header.magic != b"P6" {
        return Err(format_err(0, "expected P6 magic"));
    }
    let scale = 255.0 / header.maxval as f64;
    let samples = read_samples(bytes, &header, 3)?;
    let n = header.width * header.height;
    let mut planes = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (i, px) in samples.chunks_exact(3).enumerate() {
        for c in 0..3 {
            planes[c][i] = px[c] as f64 * scale;
        }
    }
    RgbImage::from_planes(header.width, header.height, planes)
}

pub fn write_mask_pgm(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_mask_pgm(mask))
}

pub fn encode_mask_pgm(mask: &BinaryMask) -> Vec<u8> {
    let mut out = Vec::with_capacity(mask.data.len() + 32);
    out.extend_from_slice(format!("P5\n{} {}\n255\n", mask.width, mask.height).as_bytes());
    out.extend(mask.data.iter().map(|&v| if v != 0 { 255 } else { 0 }));
    out
}

/// Any nonzero sample reads back as forged.
pub fn read_mask_pgm(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let bytes = read_file(path.as_ref())?;
    decode_mask_pgm(&bytes)
}

pub fn decode_mask_pgm(bytes: &[u8]) -> Result<BinaryMask> {
    let header = parse_header(bytes)?;
    if &header.magic != b"P5" {
        return Err(format_err(0, "expected P5 magic"));
    }
    let data = read_samples(bytes, &header, 1)?
        .into_iter()
        .map(|s| u8::from(s != 0))
        .collect();
    BinaryMask::new(header.width, header.height, data)
}
