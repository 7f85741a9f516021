//! On-disk forms of view images (8-bit PGM) and cross-sections (`x,z` CSV).

use super::raster::{View, ViewImage, IMAGE_SIZE};
use super::section::CrossSection;
use crate::error::{Error, Result};
use std::path::Path;

pub fn encode_pgm(image: &ViewImage) -> Vec<u8> {
    let mut out = format!("P5\n{IMAGE_SIZE} {IMAGE_SIZE}\n255\n").into_bytes();
    out.extend(
        image
            .pixels()
            .iter()
            .map(|p| (p * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    out
}

/// Decodes binary (P5) or plain (P2) 8-bit graymaps of the fixed image size.
pub fn decode_pgm(bytes: &[u8], view: View) -> Result<ViewImage> {
    let mut pos = 0;
    let mut header = Vec::with_capacity(4);
    while header.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::data(format!("PGM header truncated at byte offset {pos}")));
        }
        header.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::data(format!("PGM header field '{s}' is not a number")))
    };
    let (w, h, maxval) = (num(&header[1])?, num(&header[2])?, num(&header[3])?);
    if w != IMAGE_SIZE || h != IMAGE_SIZE {
        return Err(Error::data(format!(
            "PGM is {w}x{h}, expected {IMAGE_SIZE}x{IMAGE_SIZE}"
        )));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::data(format!("PGM maxval {maxval} is not 8-bit")));
    }
    let scale = maxval as f64;
    let raw: Vec<u8> = match header[0].as_str() {
        "P5" => {
            let data = &bytes[(pos + 1).min(bytes.len())..];
            if data.len() < w * h {
                return Err(Error::data(format!(
                    "PGM raster truncated at byte offset {}",
                    pos + 1 + data.len()
                )));
            }
            data[..w * h].to_vec()
        }
        "P2" => {
            let text = String::from_utf8_lossy(&bytes[pos..]);
            let vals: std::result::Result<Vec<u8>, _> =
                text.split_whitespace().take(w * h).map(str::parse::<u8>).collect();
            let vals = vals.map_err(|_| Error::data("PGM plain raster has a bad sample"))?;
            if vals.len() < w * h {
                return Err(Error::data("PGM plain raster truncated"));
            }
            vals
        }
        other => return Err(Error::data(format!("unsupported graymap magic '{other}'"))),
    };
    let pixels = raw.into_iter().map(|v| (v as f64 / scale).min(1.0)).collect();
    ViewImage::new(view, pixels)
}

pub fn write_pgm(path: &Path, image: &ViewImage) -> Result<()> {
    std::fs::write(path, encode_pgm(image)).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: &Path, view: View) -> Result<ViewImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes, view).map_err(|e| match e {
        Error::Data(m) => Error::data(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn encode_section_csv(section: &CrossSection) -> String {
    let mut out = String::from("x,z\n");
    for p in &section.points {
        out.push_str(&format!("{},{}\n", p[0], p[1]));
    }
    out
}

pub fn decode_section_csv(text: &str, fraction: f64) -> Result<CrossSection> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim().replace(' ', "") == "x,z" => {}
        Some((n, h)) => {
            return Err(Error::data(format!(
                "section line {}: expected header 'x,z', found '{h}'",
                n + 1
            )))
        }
        None => return Err(Error::data("section file is empty")),
    }
    let mut points = Vec::new();
    for (n, line) in lines {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite());
        match cols.as_slice() {
            [x, z] => match (parse(x), parse(z)) {
                (Some(x), Some(z)) => points.push([x, z]),
                _ => {
                    return Err(Error::data(format!(
                        "section line {}: '{line}' is not two finite numbers",
                        n + 1
                    )))
                }
            },
            _ => return Err(Error::data(format!("section line {}: expected 2 columns", n + 1))),
        }
    }
    Ok(CrossSection { fraction, points })
}

pub fn write_section_csv(path: &Path, section: &CrossSection) -> Result<()> {
    std::fs::write(path, encode_section_csv(section)).map_err(|e| Error::io(path, e))
}

pub fn read_section_csv(path: &Path, fraction: f64) -> Result<CrossSection> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_section_csv(&text, fraction).map_err(|e| match e {
        Error::Data(m) => Error::data(format!("{}: {m}", path.display())),
        other => other,
    })
}
