//! Raster and sidecar file I/O.
//!
//! Supported rasters are binary PGM (P5, 8- or 16-bit) and grayscale PNG.
//! Samples are normalized to `[0, 1]` on load (divisor 255 or 65535) and
//! rescaled on write. World files are six-line plain text in `a d b e c f`
//! order, stored next to the raster with the extension replaced by `.wld`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{CfogError, Result};
use crate::geo::GeoTransform;
use crate::image::Image;

/// Pixel format of a raster on disk, remembered so outputs can be written
/// in the same format as their source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterFormat {
    Pgm8,
    Pgm16,
    Png8,
    Png16,
}

impl RasterFormat {
    /// Default format for a path based on its extension.
    pub fn for_path(path: &Path) -> RasterFormat {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("png") => RasterFormat::Png8,
            _ => RasterFormat::Pgm8,
        }
    }
}

/// Loads a raster plus its world file when one exists alongside it.
pub fn load_image(path: &Path) -> Result<(Image, RasterFormat)> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    let (mut img, fmt) = match ext.as_str() {
        "pgm" => load_pgm(path)?,
        "png" => load_png(path)?,
        other => {
            return Err(CfogError::format(
                path,
                format!("unsupported raster extension {other:?} (expected pgm or png)"),
            ))
        }
    };
    let wld = world_file_path(path);
    if wld.exists() {
        img.set_geo(Some(read_world_file(&wld)?));
    }
    Ok((img, fmt))
}

/// Writes a raster in the requested format, plus a world file when the
/// image carries a geotransform.
pub fn save_image(img: &Image, path: &Path, fmt: RasterFormat) -> Result<()> {
    match fmt {
        RasterFormat::Pgm8 => write_pgm(img, path, 255)?,
        RasterFormat::Pgm16 => write_pgm(img, path, 65535)?,
        RasterFormat::Png8 => write_png(img, path, 8)?,
        RasterFormat::Png16 => write_png(img, path, 16)?,
    }
    if let Some(geo) = img.geo() {
        write_world_file(&world_file_path(path), geo)?;
    }
    Ok(())
}

/// Path of the world file belonging to a raster.
pub fn world_file_path(raster: &Path) -> PathBuf {
    raster.with_extension("wld")
}

// ---------------------------------------------------------------------------
// PGM
// ---------------------------------------------------------------------------

fn load_pgm(path: &Path) -> Result<(Image, RasterFormat)> {
    let bytes = fs::read(path).map_err(|e| CfogError::io(path, e))?;
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(CfogError::format(path, "not a binary PGM (missing P5 magic)"));
    }

    // Header: three whitespace-separated integers after the magic, with
    // '#' comment lines allowed.
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        while pos < bytes.len() {
            let b = bytes[pos];
            if b == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                pos += 1;
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return Err(CfogError::format(path, "truncated PGM header"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).unwrap();
        *field = text
            .parse()
            .map_err(|_| CfogError::format(path, "bad integer in PGM header"))?;
    }
    // Exactly one whitespace byte separates the header from the samples.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(CfogError::format(path, "missing separator before PGM data"));
    }
    pos += 1;

    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(CfogError::format(path, "zero PGM dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(CfogError::format(path, format!("bad PGM maxval {maxval}")));
    }
    let wide = maxval > 255;
    let n = width * height;
    let needed = n * if wide { 2 } else { 1 };
    if bytes.len() < pos + needed {
        return Err(CfogError::format(path, "PGM sample data truncated"));
    }
    let data = &bytes[pos..pos + needed];
    let divisor = if wide { 65535.0 } else { 255.0 };
    let mut pixels = Vec::with_capacity(n);
    if wide {
        for c in data.chunks_exact(2) {
            pixels.push(u16::from_be_bytes([c[0], c[1]]) as f64 / divisor);
        }
    } else {
        pixels.extend(data.iter().map(|&b| b as f64 / divisor));
    }
    let img = Image::from_pixels(width, height, pixels)?;
    let fmt = if wide {
        RasterFormat::Pgm16
    } else {
        RasterFormat::Pgm8
    };
    Ok((img, fmt))
}

fn write_pgm(img: &Image, path: &Path, maxval: u32) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| CfogError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = format!("P5\n{} {}\n{}\n", img.width(), img.height(), maxval);
    w.write_all(header.as_bytes())
        .map_err(|e| CfogError::io(path, e))?;
    let scale = maxval as f64;
    if maxval > 255 {
        for &v in img.pixels() {
            let q = (v * scale).round().clamp(0.0, scale) as u16;
            w.write_all(&q.to_be_bytes())
                .map_err(|e| CfogError::io(path, e))?;
        }
    } else {
        let buf: Vec<u8> = img
            .pixels()
            .iter()
            .map(|&v| (v * scale).round().clamp(0.0, scale) as u8)
            .collect();
        w.write_all(&buf).map_err(|e| CfogError::io(path, e))?;
    }
    w.flush().map_err(|e| CfogError::io(path, e))
}

/// Writes an arbitrary-range image as an 8-bit PGM after a linear stretch
/// to `[0, 1]`. Used for descriptor-channel and similarity-map dumps.
pub fn write_pgm_stretched(img: &Image, path: &Path) -> Result<()> {
    write_pgm(&img.stretched(), path, 255)
}

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

fn load_png(path: &Path) -> Result<(Image, RasterFormat)> {
    let file = fs::File::open(path).map_err(|e| CfogError::io(path, e))?;
    let decoder = png::Decoder::new(std::io::BufReader::new(file));
    let mut reader = decoder
        .read_info()
        .map_err(|e| CfogError::format(path, e.to_string()))?;
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| CfogError::format(path, e.to_string()))?;
    let (width, height) = (info.width as usize, info.height as usize);
    let n = width * height;
    let mut pixels = Vec::with_capacity(n);

    use png::{BitDepth, ColorType};
    let wide = info.bit_depth == BitDepth::Sixteen;
    let divisor = if wide { 65535.0 } else { 255.0 };
    let sample = |buf: &[u8], idx: usize| -> f64 {
        if wide {
            u16::from_be_bytes([buf[2 * idx], buf[2 * idx + 1]]) as f64 / divisor
        } else {
            buf[idx] as f64 / divisor
        }
    };
    let channels = match info.color_type {
        ColorType::Grayscale => 1,
        ColorType::GrayscaleAlpha => 2,
        ColorType::Rgb => 3,
        ColorType::Rgba => 4,
        ColorType::Indexed => {
            return Err(CfogError::format(path, "indexed PNG is not supported"))
        }
    };
    if info.bit_depth != BitDepth::Eight && info.bit_depth != BitDepth::Sixteen {
        return Err(CfogError::format(
            path,
            format!("unsupported PNG bit depth {:?}", info.bit_depth),
        ));
    }
    for i in 0..n {
        let base = i * channels;
        let v = if channels >= 3 {
            // Rec. 601 luma for color input.
            0.299 * sample(&buf, base)
                + 0.587 * sample(&buf, base + 1)
                + 0.114 * sample(&buf, base + 2)
        } else {
            sample(&buf, base)
        };
        pixels.push(v);
    }
    let img = Image::from_pixels(width, height, pixels)?;
    let fmt = if wide {
        RasterFormat::Png16
    } else {
        RasterFormat::Png8
    };
    Ok((img, fmt))
}

fn write_png(img: &Image, path: &Path, depth: u8) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| CfogError::io(path, e))?;
    let w = BufWriter::new(file);
    let mut encoder = png::Encoder::new(w, img.width() as u32, img.height() as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(if depth > 8 {
        png::BitDepth::Sixteen
    } else {
        png::BitDepth::Eight
    });
    let mut writer = encoder
        .write_header()
        .map_err(|e| CfogError::io(path, e))?;
    let data: Vec<u8> = if depth > 8 {
        img.pixels()
            .iter()
            .flat_map(|&v| {
                let q = (v * 65535.0).round().clamp(0.0, 65535.0) as u16;
                q.to_be_bytes()
            })
            .collect()
    } else {
        img.pixels()
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    };
    writer
        .write_image_data(&data)
        .map_err(|e| CfogError::io(path, e))
}

// ---------------------------------------------------------------------------
// World files
// ---------------------------------------------------------------------------

/// Reads a six-line world file in `a d b e c f` order.
pub fn read_world_file(path: &Path) -> Result<GeoTransform> {
    let text = fs::read_to_string(path).map_err(|e| CfogError::io(path, e))?;
    let vals: Vec<f64> = text
        .lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse::<f64>()
                .map_err(|_| CfogError::format(path, format!("bad world-file line {l:?}")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != 6 {
        return Err(CfogError::format(
            path,
            format!("world file must have 6 lines, found {}", vals.len()),
        ));
    }
    let [a, d, b, e, c, f] = [vals[0], vals[1], vals[2], vals[3], vals[4], vals[5]];
    GeoTransform::new(a, b, c, d, e, f)
}

/// Writes the six world-file lines in `a d b e c f` order.
pub fn write_world_file(path: &Path, geo: &GeoTransform) -> Result<()> {
    let text = format!(
        "{}\n{}\n{}\n{}\n{}\n{}\n",
        geo.a, geo.d, geo.b, geo.e, geo.c, geo.f
    );
    fs::write(path, text).map_err(|e| CfogError::io(path, e))
}
