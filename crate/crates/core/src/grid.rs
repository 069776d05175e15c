//! Core grid types and the shared numeric primitives (bilinear sampling,
//! location-wise feature normalization).
//!
//! All grids are row-major. `FeatureMap` and `Image` are channel-fastest:
//! the vector at location (y, x) is contiguous in memory. Every type is
//! immutable after construction and safe to share read-only across workers.

use crate::error::{Error, Result};

/// Locations whose mean-subtracted vector has an l2 norm below this are
/// emitted as the all-zero vector by [`normalize_location_wise`].
pub const DEGENERATE_NORM_EPS: f64 = 1e-12;

/// A fractional 2-D position in sample coordinates: `y` in [0, H-1],
/// `x` in [0, W-1] after clamping. Integer values address grid cells exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coord {
    pub y: f64,
    pub x: f64,
}

impl Coord {
    pub fn new(y: f64, x: f64) -> Self {
        Coord { y, x }
    }

    /// Clamp into the sample-safe range [0, h-1] x [0, w-1].
    pub fn clamped(self, h: usize, w: usize) -> Self {
        Coord {
            y: self.y.clamp(0.0, (h - 1) as f64),
            x: self.x.clamp(0.0, (w - 1) as f64),
        }
    }

    pub fn is_finite(self) -> bool {
        self.y.is_finite() && self.x.is_finite()
    }

    /// Nearest integer pixel, assuming the coordinate is already clamped.
    pub fn rounded(self) -> (usize, usize) {
        (self.y.round() as usize, self.x.round() as usize)
    }
}

/// An RGB image with channel values in [0, 1]. Channel-fastest row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    h: usize,
    w: usize,
    data: Vec<f32>,
}

impl Image {
    pub const CHANNELS: usize = 3;

    pub fn new(h: usize, w: usize, data: Vec<f32>) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::Argument("image dimensions must be >= 1".into()));
        }
        if data.len() != h * w * Self::CHANNELS {
            return Err(Error::Argument(format!(
                "image data length {} != {}x{}x3",
                data.len(),
                h,
                w
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::Argument(format!(
                "image values must be finite and in [0,1], found {v}"
            )));
        }
        Ok(Image { h, w, data })
    }

    /// Construct by evaluating `f(y, x) -> [r, g, b]` at every pixel.
    pub fn from_fn(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(h * w * 3);
        for y in 0..h {
            for x in 0..w {
                data.extend_from_slice(&f(y, x));
            }
        }
        Image::new(h, w, data).expect("from_fn produced invalid image values")
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn pixel(&self, y: usize, x: usize) -> &[f32] {
        let i = (y * self.w + x) * 3;
        &self.data[i..i + 3]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// View the pixel grid as a 3-channel feature map (copies the buffer).
    pub fn as_feature_map(&self) -> FeatureMap {
        FeatureMap::new(self.h, self.w, 3, self.data.clone()).expect("image is a valid map")
    }
}

/// An integer class-id grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    h: usize,
    w: usize,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn new(h: usize, w: usize, data: Vec<u8>) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::Argument("label map dimensions must be >= 1".into()));
        }
        if data.len() != h * w {
            return Err(Error::Argument(format!(
                "label data length {} != {}x{}",
                data.len(),
                h,
                w
            )));
        }
        Ok(LabelMap { h, w, data })
    }

    pub fn from_fn(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                data.push(f(y, x));
            }
        }
        LabelMap { h, w, data }
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn class(&self, y: usize, x: usize) -> u8 {
        self.data[y * self.w + x]
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Smallest class count that covers every id present.
    pub fn min_class_count(&self) -> usize {
        self.data.iter().copied().max().unwrap_or(0) as usize + 1
    }
}

/// A boolean editable-region grid. `true` marks pixels inside the region
/// to be modified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    h: usize,
    w: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(h: usize, w: usize, data: Vec<bool>) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::Argument("mask dimensions must be >= 1".into()));
        }
        if data.len() != h * w {
            return Err(Error::Argument(format!(
                "mask data length {} != {}x{}",
                data.len(),
                h,
                w
            )));
        }
        Ok(Mask { h, w, data })
    }

    pub fn from_fn(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                data.push(f(y, x));
            }
        }
        Mask { h, w, data }
    }

    pub fn filled(h: usize, w: usize, value: bool) -> Self {
        Mask {
            h,
            w,
            data: vec![value; h * w],
        }
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn editable(&self, y: usize, x: usize) -> bool {
        self.data[y * self.w + x]
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count_editable(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// An H x W x C grid of feature vectors, row-major, channel-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    h: usize,
    w: usize,
    c: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(h: usize, w: usize, c: usize, data: Vec<f32>) -> Result<Self> {
        if h == 0 || w == 0 || c == 0 {
            return Err(Error::Argument("feature map dimensions must be >= 1".into()));
        }
        if data.len() != h * w * c {
            return Err(Error::Argument(format!(
                "feature data length {} != {}x{}x{}",
                data.len(),
                h,
                w,
                c
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("feature values must be finite".into()));
        }
        Ok(FeatureMap { h, w, c, data })
    }

    pub fn zeros(h: usize, w: usize, c: usize) -> Self {
        FeatureMap {
            h,
            w,
            c,
            data: vec![0.0; h * w * c],
        }
    }

    /// Construct by evaluating `f(y, x, channel_buffer)` at every location.
    pub fn from_fn(h: usize, w: usize, c: usize, mut f: impl FnMut(usize, usize, &mut [f32])) -> Self {
        let mut map = FeatureMap::zeros(h, w, c);
        for y in 0..h {
            for x in 0..w {
                let i = (y * w + x) * c;
                f(y, x, &mut map.data[i..i + c]);
            }
        }
        map
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn channels(&self) -> usize {
        self.c
    }

    pub fn pixels(&self) -> usize {
        self.h * self.w
    }

    /// The feature vector stored at integer location (y, x).
    pub fn at(&self, y: usize, x: usize) -> &[f32] {
        let i = (y * self.w + x) * self.c;
        &self.data[i..i + self.c]
    }

    pub fn at_mut(&mut self, y: usize, x: usize) -> &mut [f32] {
        let i = (y * self.w + x) * self.c;
        &mut self.data[i..i + self.c]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn same_shape(&self, other: &FeatureMap) -> bool {
        self.h == other.h && self.w == other.w && self.c == other.c
    }
}

/// 4-neighbor bilinear interpolation of the feature vector at fractional
/// coordinate `t`. At integer coordinates this returns the stored vector
/// exactly. `t` must already be clamped to [0, H-1] x [0, W-1].
pub fn bilinear_sample(map: &FeatureMap, t: Coord) -> Result<Vec<f32>> {
    if !t.is_finite() {
        return Err(Error::Argument(format!(
            "bilinear sample coordinate must be finite, got ({}, {})",
            t.y, t.x
        )));
    }
    let mut out = vec![0.0f64; map.c];
    bilinear_sample_into(map, t, &mut out);
    Ok(out.into_iter().map(|v| v as f32).collect())
}

/// Accumulator-reuse form of [`bilinear_sample`]: writes the interpolated
/// vector into `out` (f64, caller-owned scratch). Coordinates are trusted
/// (finite, clamped) - this is the hot path of scoring.
#[inline]
pub(crate) fn bilinear_sample_into(map: &FeatureMap, t: Coord, out: &mut [f64]) {
    debug_assert_eq!(out.len(), map.c);
    let h = map.h;
    let w = map.w;
    let y0 = (t.y.floor() as usize).min(h - 1);
    let x0 = (t.x.floor() as usize).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let fy = t.y - y0 as f64;
    let fx = t.x - x0 as f64;

    let w00 = (1.0 - fy) * (1.0 - fx);
    let w01 = (1.0 - fy) * fx;
    let w10 = fy * (1.0 - fx);
    let w11 = fy * fx;

    let a = map.at(y0, x0);
    let b = map.at(y0, x1);
    let c = map.at(y1, x0);
    let d = map.at(y1, x1);
    for ch in 0..map.c {
        out[ch] = w00 * a[ch] as f64 + w01 * b[ch] as f64 + w10 * c[ch] as f64 + w11 * d[ch] as f64;
    }
}

/// The integer pixels with nonzero bilinear weight at `t` (at most 4).
/// Weight-zero neighbors are excluded, so an integer coordinate has a
/// single-pixel footprint.
pub fn bilinear_footprint(h: usize, w: usize, t: Coord) -> Vec<(usize, usize)> {
    let y0 = (t.y.floor() as usize).min(h - 1);
    let x0 = (t.x.floor() as usize).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let fy = t.y - y0 as f64;
    let fx = t.x - x0 as f64;

    let mut px = vec![(y0, x0)];
    if fx > 0.0 && x1 != x0 {
        px.push((y0, x1));
    }
    if fy > 0.0 && y1 != y0 {
        px.push((y1, x0));
        if fx > 0.0 && x1 != x0 {
            px.push((y1, x1));
        }
    }
    px
}

/// Per-location normalization: subtract the channel mean, then divide by
/// the l2 norm of the residual. Locations whose residual norm is below
/// [`DEGENERATE_NORM_EPS`] become the all-zero vector.
pub fn normalize_location_wise(map: &FeatureMap) -> FeatureMap {
    let c = map.c;
    let mut out = map.clone();
    for i in 0..map.pixels() {
        let v = &mut out.data[i * c..(i + 1) * c];
        normalize_vector(v);
    }
    out
}

/// In-place single-vector form of [`normalize_location_wise`].
pub(crate) fn normalize_vector(v: &mut [f32]) {
    let c = v.len();
    let mean = v.iter().map(|&x| x as f64).sum::<f64>() / c as f64;
    let mut norm_sq = 0.0f64;
    for x in v.iter() {
        let r = *x as f64 - mean;
        norm_sq += r * r;
    }
    let norm = norm_sq.sqrt();
    if norm < DEGENERATE_NORM_EPS {
        v.iter_mut().for_each(|x| *x = 0.0);
    } else {
        for x in v.iter_mut() {
            *x = ((*x as f64 - mean) / norm) as f32;
        }
    }
}

/// Bilinear resize to an arbitrary target resolution. Corner-aligned: the
/// four corner samples map exactly onto the source corners, and a 1x1
/// source broadcasts to every target location.
pub fn bilinear_resize(map: &FeatureMap, target_h: usize, target_w: usize) -> Result<FeatureMap> {
    if target_h == 0 || target_w == 0 {
        return Err(Error::Argument("resize target dimensions must be >= 1".into()));
    }
    let scale = |t: usize, tn: usize, sn: usize| -> f64 {
        if tn <= 1 {
            0.0
        } else {
            t as f64 * (sn - 1) as f64 / (tn - 1) as f64
        }
    };
    let mut out = FeatureMap::zeros(target_h, target_w, map.c);
    let mut buf = vec![0.0f64; map.c];
    for y in 0..target_h {
        let sy = scale(y, target_h, map.h);
        for x in 0..target_w {
            let sx = scale(x, target_w, map.w);
            bilinear_sample_into(map, Coord::new(sy, sx), &mut buf);
            let dst = out.at_mut(y, x);
            for ch in 0..buf.len() {
                dst[ch] = buf[ch] as f32;
            }
        }
    }
    Ok(out)
}
