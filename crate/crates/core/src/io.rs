//! Bit-exact tensor file format (`HRT1`) and 8-bit PNG ingestion.
//!
//! `HRT1` layout: 4 ASCII magic bytes `HRT1`; three little-endian u32 values
//! H, W, C; then H*W*C little-endian IEEE-754 f32 values, row-major over
//! (row, col), channel-fastest. Save followed by load is bit-identical.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{FeatureMap, Image, LabelMap, Mask};

pub const TENSOR_MAGIC: [u8; 4] = *b"HRT1";

const HEADER_LEN: u64 = 16;

/// Write a feature map in `HRT1` layout.
pub fn save_tensor(map: &FeatureMap, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    out.write_all(&TENSOR_MAGIC)?;
    out.write_all(&(map.height() as u32).to_le_bytes())?;
    out.write_all(&(map.width() as u32).to_le_bytes())?;
    out.write_all(&(map.channels() as u32).to_le_bytes())?;
    for v in map.data() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Read a feature map written by [`save_tensor`].
pub fn load_tensor(path: impl AsRef<Path>) -> Result<FeatureMap> {
    let file = File::open(path)?;
    let mut src = BufReader::new(file);

    let mut magic = [0u8; 4];
    read_exact_at(&mut src, &mut magic, 0, "magic")?;
    if magic != TENSOR_MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: format!("bad magic {:?}, expected {:?}", magic, TENSOR_MAGIC),
        });
    }

    let mut dims = [0usize; 3];
    for (i, dim) in dims.iter_mut().enumerate() {
        let offset = 4 + 4 * i as u64;
        let mut b = [0u8; 4];
        read_exact_at(&mut src, &mut b, offset, "header")?;
        let v = u32::from_le_bytes(b);
        if v == 0 {
            return Err(Error::Format {
                offset,
                msg: format!("zero dimension in header field {i}"),
            });
        }
        *dim = v as usize;
    }
    let [h, w, c] = dims;
    let len = (h as u64)
        .checked_mul(w as u64)
        .and_then(|v| v.checked_mul(c as u64))
        .filter(|&v| v <= (u32::MAX as u64))
        .ok_or_else(|| Error::Format {
            offset: 4,
            msg: format!("dimensions {h}x{w}x{c} overflow the format"),
        })? as usize;

    let mut data = Vec::with_capacity(len);
    let mut buf = [0u8; 4];
    for i in 0..len {
        read_exact_at(&mut src, &mut buf, HEADER_LEN + 4 * i as u64, "payload")?;
        let v = f32::from_le_bytes(buf);
        if !v.is_finite() {
            return Err(Error::Format {
                offset: HEADER_LEN + 4 * i as u64,
                msg: format!("non-finite value at element {i}"),
            });
        }
        data.push(v);
    }
    FeatureMap::new(h, w, c, data)
}

fn read_exact_at(src: &mut impl Read, buf: &mut [u8], offset: u64, what: &str) -> Result<()> {
    src.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format {
                offset,
                msg: format!("truncated {what}"),
            }
        } else {
            Error::Io(e)
        }
    })
}

fn decode_png(path: impl AsRef<Path>) -> Result<image::DynamicImage> {
    let path = path.as_ref();
    let reader = image::ImageReader::open(path).map_err(Error::Io)?;
    Ok(reader.decode()?)
}

/// Load an 8-bit RGB PNG; values map to the unit interval as v/255.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    match decode_png(path)? {
        image::DynamicImage::ImageRgb8(img) => {
            let (w, h) = (img.width() as usize, img.height() as usize);
            let data = img.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
            Image::new(h, w, data)
        }
        other => Err(Error::Ingestion(format!(
            "expected 8-bit RGB PNG, got {:?}",
            other.color()
        ))),
    }
}

/// Write an image as an 8-bit RGB PNG (unit-interval values rounded to 0..=255).
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let buf: Vec<u8> = img
        .data()
        .iter()
        .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    let out = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, buf)
        .expect("buffer length matches dimensions");
    out.save(path)?;
    Ok(())
}

/// Load an 8-bit single-channel PNG as a label map; pixel value = class id,
/// unmodified. Multi-channel or >8-bit input is an ingestion error.
pub fn load_label_map(path: impl AsRef<Path>) -> Result<LabelMap> {
    match decode_png(path)? {
        image::DynamicImage::ImageLuma8(img) => {
            let (w, h) = (img.width() as usize, img.height() as usize);
            LabelMap::new(h, w, img.into_raw())
        }
        other => Err(Error::Ingestion(format!(
            "expected 8-bit single-channel PNG, got {:?}",
            other.color()
        ))),
    }
}

pub fn save_label_map(labels: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let out = image::GrayImage::from_raw(
        labels.width() as u32,
        labels.height() as u32,
        labels.data().to_vec(),
    )
    .expect("buffer length matches dimensions");
    out.save(path)?;
    Ok(())
}

/// Load an 8-bit single-channel PNG as a mask; nonzero = editable.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    match decode_png(path)? {
        image::DynamicImage::ImageLuma8(img) => {
            let (w, h) = (img.width() as usize, img.height() as usize);
            let data = img.as_raw().iter().map(|&v| v != 0).collect();
            Mask::new(h, w, data)
        }
        other => Err(Error::Ingestion(format!(
            "expected 8-bit single-channel PNG, got {:?}",
            other.color()
        ))),
    }
}

pub fn save_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    let buf: Vec<u8> = mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let out = image::GrayImage::from_raw(mask.width() as u32, mask.height() as u32, buf)
        .expect("buffer length matches dimensions");
    out.save(path)?;
    Ok(())
}
