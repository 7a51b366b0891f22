//! Binary Netpbm I/O: PGM (`P5`) for grayscale frames and masks, PPM (`P6`)
//! for color frames. Only maxval 255 is supported.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{BinaryMask, Frame};
use crate::error::{Error, Result};

/// Encode a frame as P5 (1 channel) or P6 (3 channels).
pub fn encode(frame: &Frame) -> Vec<u8> {
    let magic = if frame.channels() == 1 { "P5" } else { "P6" };
    let mut out = Vec::with_capacity(frame.data().len() + 20);
    write!(out, "{magic}\n{} {}\n255\n", frame.width(), frame.height()).expect("vec write");
    out.extend_from_slice(frame.data());
    out
}

/// Decode a P5 or P6 image. `context` names the source in error messages.
pub fn decode(bytes: &[u8], context: &str) -> Result<Frame> {
    let mut pos = 0usize;
    let magic = token(bytes, &mut pos, context)?;
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => {
            return Err(Error::parse(
                context,
                format!("bad magic `{other}` at byte 0, expected P5 or P6"),
            ))
        }
    };
    let width = number(bytes, &mut pos, context, "width")?;
    let height = number(bytes, &mut pos, context, "height")?;
    let maxval = number(bytes, &mut pos, context, "maxval")?;
    if maxval != 255 {
        return Err(Error::parse(context, format!("unsupported maxval {maxval}, expected 255")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::parse(context, format!("missing raster separator at byte {pos}")));
    }
    pos += 1;
    let need = width * height * channels;
    let raster = &bytes[pos..];
    if raster.len() < need {
        return Err(Error::parse(
            context,
            format!("truncated raster at byte {}: have {} bytes, need {need}", pos, raster.len()),
        ));
    }
    Frame::new(width, height, channels, raster[..need].to_vec())
        .map_err(|e| Error::parse(context, e.to_string()))
}

fn skip_space_and_comments(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() {
        if bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        } else if bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
}

fn token(bytes: &[u8], pos: &mut usize, context: &str) -> Result<String> {
    skip_space_and_comments(bytes, pos);
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::parse(context, format!("unexpected end of header at byte {start}")));
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

fn number(bytes: &[u8], pos: &mut usize, context: &str, what: &str) -> Result<usize> {
    let at = *pos;
    let tok = token(bytes, pos, context)?;
    tok.parse::<usize>()
        .ok()
        .filter(|&v| v > 0)
        .ok_or_else(|| Error::parse(context, format!("bad {what} `{tok}` near byte {at}")))
}

pub fn read_frame(path: impl AsRef<Path>) -> Result<Frame> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, &path.display().to_string())
}

pub fn write_frame(path: impl AsRef<Path>, frame: &Frame) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(frame)).map_err(|e| Error::io(path, e))
}

/// Read a PGM mask, rejecting any pixel value other than 0 or 255.
pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mask(&bytes, &path.display().to_string())
}

pub fn decode_mask(bytes: &[u8], context: &str) -> Result<BinaryMask> {
    let frame = decode(bytes, context)?;
    if frame.channels() != 1 {
        return Err(Error::parse(context, "mask must be a P5 graymap"));
    }
    let header_len = bytes.len() - frame.data().len();
    if let Some(i) = frame.data().iter().position(|&v| v != 0 && v != 255) {
        return Err(Error::parse(
            context,
            format!("pixel value {} at byte {} is not 0 or 255", frame.data()[i], header_len + i),
        ));
    }
    let (w, h) = frame.dims();
    BinaryMask::new(w, h, frame.into_data())
}

pub fn write_mask(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    write_frame(path, &mask.to_frame())
}
