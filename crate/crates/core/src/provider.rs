//! Deterministic cross-domain feature providers.
//!
//! These stand in for learned feature extractors and upsamplers: they give
//! the warping engine reproducible unit-norm feature maps from images and
//! label maps, and accept externally computed features through the tensor
//! file format.

use crate::error::{Error, Result};
use crate::grid::{bilinear_resize, normalize_location_wise, FeatureMap, Image, LabelMap};
use crate::rng::KeyedRng;

/// Seed of the frozen descriptor mixing table. Changing it changes every
/// handcrafted feature map, so it is a constant of the repository.
const MIXING_TABLE_SEED: u64 = 0x48525741_52503031;

/// Per-channel patch statistics produced by [`raw_patch_descriptors`].
/// The horizontal-gradient mean is the only stat whose sign flips under
/// horizontal mirroring.
pub const STATS_PER_CHANNEL: usize = 6;
pub const STAT_MEAN_OFFSET: usize = 0;
pub const STAT_GRAD_X: usize = 2;

#[derive(Debug, Clone)]
pub struct ProviderConfig {
    /// Patch half-width for local statistics; the window is (2r+1)^2.
    pub patch_radius: usize,
    /// Channel count of the handcrafted descriptor after mixing.
    pub descriptor_dims: usize,
    /// Number of semantic classes in label maps.
    pub class_count: usize,
}

impl ProviderConfig {
    pub fn new(class_count: usize) -> Self {
        ProviderConfig {
            patch_radius: 2,
            descriptor_dims: 16,
            class_count,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.descriptor_dims < 3 {
            return Err(Error::Argument(format!(
                "descriptor_dims must be >= 3, got {}",
                self.descriptor_dims
            )));
        }
        if self.class_count == 0 {
            return Err(Error::Argument("class_count must be >= 1".into()));
        }
        Ok(())
    }
}

/// Raw (unmixed, unnormalized) patch statistics: for each color channel,
/// [patch mean minus center value, patch std, mean horizontal gradient,
/// mean vertical gradient, mean |horizontal gradient|, mean |vertical
/// gradient|] over the (2r+1)^2 window with replicate padding. Every stat
/// vanishes on a constant image.
pub fn raw_patch_descriptors(x: &Image, cfg: &ProviderConfig) -> FeatureMap {
    let (h, w) = (x.height(), x.width());
    let r = cfg.patch_radius as isize;
    let clamp_y = |y: isize| y.clamp(0, h as isize - 1) as usize;
    let clamp_x = |xx: isize| xx.clamp(0, w as isize - 1) as usize;
    let value = |y: isize, xx: isize, ch: usize| x.pixel(clamp_y(y), clamp_x(xx))[ch] as f64;
    // Central differences with clamped indices; one-sided at the borders.
    let grad_x = |y: isize, xx: isize, ch: usize| (value(y, xx + 1, ch) - value(y, xx - 1, ch)) / 2.0;
    let grad_y = |y: isize, xx: isize, ch: usize| (value(y + 1, xx, ch) - value(y - 1, xx, ch)) / 2.0;

    let raw_dims = Image::CHANNELS * STATS_PER_CHANNEL;
    let area = ((2 * r + 1) * (2 * r + 1)) as f64;
    FeatureMap::from_fn(h, w, raw_dims, |py, px, out| {
        for ch in 0..Image::CHANNELS {
            let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
            let (mut gx, mut gy, mut agx, mut agy) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            for dy in -r..=r {
                for dx in -r..=r {
                    let (yy, xx) = (py as isize + dy, px as isize + dx);
                    let v = value(yy, xx, ch);
                    sum += v;
                    sum_sq += v * v;
                    let dgx = grad_x(yy, xx, ch);
                    let dgy = grad_y(yy, xx, ch);
                    gx += dgx;
                    gy += dgy;
                    agx += dgx.abs();
                    agy += dgy.abs();
                }
            }
            let mean = sum / area;
            let var = (sum_sq / area - mean * mean).max(0.0);
            let center = value(py as isize, px as isize, ch);
            let s = &mut out[ch * STATS_PER_CHANNEL..(ch + 1) * STATS_PER_CHANNEL];
            s[STAT_MEAN_OFFSET] = (mean - center) as f32;
            s[1] = var.sqrt() as f32;
            s[STAT_GRAD_X] = (gx / area) as f32;
            s[3] = (gy / area) as f32;
            s[4] = (agx / area) as f32;
            s[5] = (agy / area) as f32;
        }
    })
}

/// The frozen mixing table: `dims` rows of length `raw_dims`. Rows are
/// orthonormalized against each other while the raw dimension allows it;
/// any surplus rows stay as unit-norm pseudo-random directions.
fn mixing_table(dims: usize, raw_dims: usize) -> Vec<Vec<f64>> {
    let rng = KeyedRng::new(MIXING_TABLE_SEED);
    let mut rows: Vec<Vec<f64>> = (0..dims)
        .map(|i| {
            (0..raw_dims)
                .map(|j| rng.symmetric(&[i as u64, j as u64]))
                .collect()
        })
        .collect();
    for i in 0..dims {
        // Gram-Schmidt against rows that could stay orthogonal.
        for k in 0..i.min(raw_dims) {
            let dot: f64 = rows[i].iter().zip(&rows[k]).map(|(a, b)| a * b).sum();
            for j in 0..raw_dims {
                rows[i][j] -= dot * rows[k][j];
            }
        }
        let norm: f64 = rows[i].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-9 {
            rows[i].iter_mut().for_each(|v| *v /= norm);
        } else {
            // Rank exhausted; fall back to a fresh pseudo-random unit row.
            let fresh: Vec<f64> = (0..raw_dims)
                .map(|j| rng.symmetric(&[dims as u64 + i as u64, j as u64]))
                .collect();
            let n: f64 = fresh.iter().map(|v| v * v).sum::<f64>().sqrt();
            rows[i] = fresh.into_iter().map(|v| v / n).collect();
        }
    }
    rows
}

/// Project raw descriptors through the frozen mixing table (no
/// normalization).
pub fn project_descriptors(raw: &FeatureMap, dims: usize) -> FeatureMap {
    let table = mixing_table(dims, raw.channels());
    FeatureMap::from_fn(raw.height(), raw.width(), dims, |y, x, out| {
        let v = raw.at(y, x);
        for (d, row) in table.iter().enumerate() {
            out[d] = row
                .iter()
                .zip(v)
                .map(|(t, &val)| t * val as f64)
                .sum::<f64>() as f32;
        }
    })
}

/// Handcrafted image features: patch statistics, mixed to
/// `descriptor_dims` channels, location-wise normalized.
pub fn handcrafted_image_features(x: &Image, cfg: &ProviderConfig) -> Result<FeatureMap> {
    cfg.validate()?;
    let raw = raw_patch_descriptors(x, cfg);
    Ok(normalize_location_wise(&project_descriptors(
        &raw,
        cfg.descriptor_dims,
    )))
}

/// One-hot class encoding per location (no normalization).
pub fn label_onehot_raw(c: &LabelMap, class_count: usize) -> Result<FeatureMap> {
    if let Some(&id) = c.data().iter().find(|&&id| (id as usize) >= class_count) {
        return Err(Error::Argument(format!(
            "label id {id} out of range for class_count {class_count}"
        )));
    }
    Ok(FeatureMap::from_fn(
        c.height(),
        c.width(),
        class_count,
        |y, x, out| {
            out[c.class(y, x) as usize] = 1.0;
        },
    ))
}

/// One-hot class features, location-wise normalized.
pub fn label_onehot_features(c: &LabelMap, cfg: &ProviderConfig) -> Result<FeatureMap> {
    cfg.validate()?;
    Ok(normalize_location_wise(&label_onehot_raw(c, cfg.class_count)?))
}

/// Guidance input for [`upsample_features`].
pub enum Guidance<'a> {
    Image(&'a Image),
    Labels(&'a LabelMap),
}

/// Upsample low-resolution features to the target resolution, append
/// guidance-derived channels, and normalize. With no guidance and equal
/// dimensions this reduces to `normalize_location_wise(lowres)`.
pub fn upsample_features(
    lowres: &FeatureMap,
    guidance: Option<Guidance<'_>>,
    target_h: usize,
    target_w: usize,
    cfg: &ProviderConfig,
) -> Result<FeatureMap> {
    cfg.validate()?;
    if target_h < lowres.height() || target_w < lowres.width() {
        return Err(Error::Argument(format!(
            "target {}x{} smaller than source {}x{}",
            target_h,
            target_w,
            lowres.height(),
            lowres.width()
        )));
    }
    let up = bilinear_resize(lowres, target_h, target_w)?;
    let extra = match guidance {
        None => None,
        Some(Guidance::Image(img)) => {
            if img.height() != target_h || img.width() != target_w {
                return Err(Error::Argument("guidance image dimensions must match target".into()));
            }
            Some(project_descriptors(
                &raw_patch_descriptors(img, cfg),
                cfg.descriptor_dims,
            ))
        }
        Some(Guidance::Labels(labels)) => {
            if labels.height() != target_h || labels.width() != target_w {
                return Err(Error::Argument("guidance label dimensions must match target".into()));
            }
            Some(label_onehot_raw(labels, cfg.class_count)?)
        }
    };

    let combined = match extra {
        None => up,
        Some(extra) => {
            let c = up.channels() + extra.channels();
            FeatureMap::from_fn(target_h, target_w, c, |y, x, out| {
                out[..up.channels()].copy_from_slice(up.at(y, x));
                out[up.channels()..].copy_from_slice(extra.at(y, x));
            })
        }
    };
    Ok(normalize_location_wise(&combined))
}

/// Per-pixel distinct unit-norm feature vectors for synthetic
/// correspondence instances: every location gets an independent
/// pseudo-random direction, so exact matches are unambiguous.
pub fn synthetic_distinct_features(h: usize, w: usize, c: usize, seed: u64) -> FeatureMap {
    let rng = KeyedRng::new(seed ^ 0x5359_4e54_4845_5449);
    let raw = FeatureMap::from_fn(h, w, c, |y, x, out| {
        let pixel = (y * w + x) as u64;
        for (ch, v) in out.iter_mut().enumerate() {
            *v = rng.symmetric(&[pixel, ch as u64]) as f32;
        }
    });
    normalize_location_wise(&raw)
}

/// Copy of `map` translated by (dy, dx) with replicate padding:
/// `out(y, x) = map(clamp(y+dy), clamp(x+dx))`.
pub fn translate_features(map: &FeatureMap, dy: isize, dx: isize) -> FeatureMap {
    let (h, w) = (map.height(), map.width());
    FeatureMap::from_fn(h, w, map.channels(), |y, x, out| {
        let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
        let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
        out.copy_from_slice(map.at(sy, sx));
    })
}
