//! PPM frames, 16-bit PGM depth maps and PBM masks.

use std::path::{Path, PathBuf};

use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::render::Frame;
use crate::trajectory::{DepthMap, Mask};

struct Header {
    magic: [u8; 2],
    fields: Vec<usize>,
    /// Offset of the first raster byte (or token, for plain formats).
    data: usize,
}

/// Reads the magic number and `count` numeric header fields. Comments run
/// from `#` to end of line.
fn parse_header(bytes: &[u8], count: usize) -> Result<Header> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::parse("byte offset 0", "not a netpbm file"));
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut fields = Vec::with_capacity(count);
    while fields.len() < count {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::parse(format!("byte offset {pos}"), "expected a header number"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        fields.push(
            text.parse()
                .map_err(|_| Error::parse(format!("byte offset {start}"), "header number out of range"))?,
        );
    }
    // Exactly one whitespace byte separates the header from binary data.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::parse(
            format!("byte offset {pos}"),
            "header must end with whitespace",
        ));
    }
    Ok(Header {
        magic,
        fields,
        data: pos + 1,
    })
}

/// Whitespace-separated decimal values of a plain (ASCII) raster.
fn plain_values(bytes: &[u8], start: usize, count: usize) -> Result<Vec<usize>> {
    let text = std::str::from_utf8(&bytes[start..]).map_err(|e| {
        Error::parse(
            format!("byte offset {}", start + e.valid_up_to()),
            "raster is not ASCII",
        )
    })?;
    let mut out = Vec::with_capacity(count);
    for token in text.split_ascii_whitespace().take(count) {
        out.push(
            token
                .parse()
                .map_err(|_| Error::parse("raster", format!("bad sample '{token}'")))?,
        );
    }
    if out.len() != count {
        return Err(Error::parse(
            "raster",
            format!("expected {count} samples, found {}", out.len()),
        ));
    }
    Ok(out)
}

fn need(bytes: &[u8], start: usize, len: usize) -> Result<&[u8]> {
    bytes.get(start..start + len).ok_or_else(|| {
        Error::parse(
            format!("byte offset {}", bytes.len()),
            format!("raster truncated, need {len} bytes"),
        )
    })
}

pub fn parse_ppm(bytes: &[u8]) -> Result<Frame> {
    let h = parse_header(bytes, 3)?;
    let (w, ht, max) = (h.fields[0], h.fields[1], h.fields[2]);
    if h.magic != *b"P6" {
        return Err(Error::parse("byte offset 0", "expected binary PPM (P6)"));
    }
    if max != 255 {
        return Err(Error::parse(
            "header",
            format!("only maxval 255 is supported, got {max}"),
        ));
    }
    Frame::from_raw(w, ht, need(bytes, h.data, w * ht * 3)?.to_vec())
}

pub fn write_ppm(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(frame.pixels());
    out
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<Frame> {
    let path = path.as_ref();
    parse_ppm(&read_file(path)?).map_err(|e| located(path, e))
}

/// Depth in scene units from a PGM of millimeters (8- or 16-bit, plain or binary).
pub fn parse_pgm_depth(bytes: &[u8]) -> Result<DepthMap> {
    let h = parse_header(bytes, 3)?;
    let (w, ht, max) = (h.fields[0], h.fields[1], h.fields[2]);
    if max == 0 || max > 65535 {
        return Err(Error::parse("header", format!("invalid maxval {max}")));
    }
    let raw: Vec<usize> = match &h.magic {
        b"P5" if max < 256 => need(bytes, h.data, w * ht)?.iter().map(|&b| usize::from(b)).collect(),
        b"P5" => need(bytes, h.data, w * ht * 2)?
            .chunks_exact(2)
            .map(|c| usize::from(u16::from_be_bytes([c[0], c[1]])))
            .collect(),
        b"P2" => plain_values(bytes, h.data, w * ht)?,
        _ => return Err(Error::parse("byte offset 0", "expected PGM (P2 or P5)")),
    };
    DepthMap::new(w, ht, raw.into_iter().map(|mm| mm as f64 / 1000.0).collect())
}

/// Binary 16-bit PGM, depth rounded to whole millimeters.
pub fn write_pgm_depth(depth: &DepthMap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", depth.width, depth.height).into_bytes();
    for &d in &depth.data {
        let mm = (d * 1000.0).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&mm.to_be_bytes());
    }
    out
}

/// Foreground where the bit is 1.
pub fn parse_pbm(bytes: &[u8]) -> Result<Mask> {
    let h = parse_header(bytes, 2)?;
    let (w, ht) = (h.fields[0], h.fields[1]);
    let data = match &h.magic {
        b"P4" => {
            let stride = w.div_ceil(8);
            let raster = need(bytes, h.data, stride * ht)?;
            (0..w * ht)
                .map(|i| {
                    let (x, y) = (i % w, i / w);
                    raster[y * stride + x / 8] & (0x80 >> (x % 8)) != 0
                })
                .collect()
        }
        b"P1" => {
            // Plain PBM digits need no separators.
            let digits: Vec<bool> = bytes[h.data..]
                .iter()
                .filter(|b| matches!(b, b'0' | b'1'))
                .map(|&b| b == b'1')
                .take(w * ht)
                .collect();
            if digits.len() != w * ht {
                return Err(Error::parse(
                    "raster",
                    format!("expected {} bits, found {}", w * ht, digits.len()),
                ));
            }
            digits
        }
        _ => return Err(Error::parse("byte offset 0", "expected PBM (P1 or P4)")),
    };
    Mask::new(w, ht, data)
}

pub fn write_pbm(mask: &Mask) -> Vec<u8> {
    let mut out = format!("P4\n{} {}\n", mask.width, mask.height).into_bytes();
    let stride = mask.width.div_ceil(8);
    for y in 0..mask.height {
        let mut row = vec![0u8; stride];
        for x in 0..mask.width {
            if mask.get(x, y) {
                row[x / 8] |= 0x80 >> (x % 8);
            }
        }
        out.extend_from_slice(&row);
    }
    out
}

fn located(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { location, message } => Error::Parse {
            location: format!("{}: {location}", path.display()),
            message,
        },
        other => other,
    }
}

/// Files in `dir` with one of `extensions`, in lexicographic order.
fn sorted_files(dir: &Path, extensions: &[&str]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let matches = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| extensions.iter().any(|x| x.eq_ignore_ascii_case(e)));
        if matches && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn load_depth_dir(dir: impl AsRef<Path>) -> Result<Vec<DepthMap>> {
    sorted_files(dir.as_ref(), &["pgm"])?
        .iter()
        .map(|p| parse_pgm_depth(&read_file(p)?).map_err(|e| located(p, e)))
        .collect()
}

pub fn load_mask_dir(dir: impl AsRef<Path>) -> Result<Vec<Mask>> {
    sorted_files(dir.as_ref(), &["pbm"])?
        .iter()
        .map(|p| parse_pbm(&read_file(p)?).map_err(|e| located(p, e)))
        .collect()
}

pub fn frame_file_name(index: usize, extension: &str) -> String {
    format!("frame_{index:05}.{extension}")
}

/// Writes `frame_00000.ppm`, `frame_00001.ppm`, ... into `dir`.
pub fn write_frame_dir(dir: impl AsRef<Path>, frames: &[Frame]) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let path = dir.join(frame_file_name(i, "ppm"));
            write_file(&path, &write_ppm(f))?;
            Ok(path)
        })
        .collect()
}

pub fn read_frame_dir(dir: impl AsRef<Path>) -> Result<Vec<Frame>> {
    sorted_files(dir.as_ref(), &["ppm"])?.iter().map(read_ppm).collect()
}
