//! Exact dense attention warping and the cycle-consistency metric.
//!
//! These operations evaluate every query/key pair, so they are quadratic in
//! pixel count and guarded by a size cap. They exist as the ground-truth
//! oracle the sparse path is verified against.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{bilinear_sample_into, Coord, FeatureMap, Image};
use crate::warp::WarpResult;

#[derive(Debug, Clone)]
pub struct AttentionConfig {
    /// Softmax temperature: weights are softmax(gamma * score).
    pub gamma: f64,
    /// Maximum H*W a dense operation will accept.
    pub dense_size_cap: usize,
    /// Run dense operations above the cap anyway.
    pub force_dense: bool,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        AttentionConfig {
            gamma: 100.0,
            dense_size_cap: 16_384,
            force_dense: false,
        }
    }
}

impl AttentionConfig {
    pub fn check_dense_size(&self, pixels: usize) -> Result<()> {
        if pixels > self.dense_size_cap && !self.force_dense {
            return Err(Error::SizeCap {
                pixels,
                cap: self.dense_size_cap,
            });
        }
        Ok(())
    }
}

/// Per-query best match over all integer key positions.
#[derive(Debug, Clone)]
pub struct CorrespondenceField {
    h: usize,
    w: usize,
    coords: Vec<(usize, usize)>,
    scores: Vec<f64>,
}

impl CorrespondenceField {
    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn best(&self, y: usize, x: usize) -> ((usize, usize), f64) {
        let q = y * self.w + x;
        (self.coords[q], self.scores[q])
    }
}

#[inline]
pub(crate) fn dot_f32(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        acc += *x as f64 * *y as f64;
    }
    acc
}

#[inline]
pub(crate) fn dot_mixed(a: &[f32], b: &[f64]) -> f64 {
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        acc += *x as f64 * y;
    }
    acc
}

/// Numerically stable in-place softmax: subtracts the max before
/// exponentiation, then normalizes to sum 1.
pub(crate) fn softmax_inplace(scores: &mut [f64]) {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0f64;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

fn check_pair(u_c: &FeatureMap, u_x: &FeatureMap) -> Result<()> {
    if u_c.channels() != u_x.channels() {
        return Err(Error::Argument(format!(
            "feature channel mismatch: {} vs {}",
            u_c.channels(),
            u_x.channels()
        )));
    }
    Ok(())
}

/// Feature matching score between query location `q` of `u_c` and the
/// (fractional) key position `t` of `u_x`: the inner product of the query
/// vector with the bilinearly sampled key vector.
pub fn similarity(u_c: &FeatureMap, u_x: &FeatureMap, q: (usize, usize), t: Coord) -> Result<f64> {
    check_pair(u_c, u_x)?;
    if !t.is_finite() {
        return Err(Error::Argument("similarity coordinate must be finite".into()));
    }
    let mut buf = vec![0.0f64; u_x.channels()];
    bilinear_sample_into(u_x, t, &mut buf);
    Ok(dot_mixed(u_c.at(q.0, q.1), &buf))
}

/// The attention weight row of a single query against every integer key
/// position (row-major), for diagnostics and oracle comparisons.
pub fn dense_weight_row(
    u_c: &FeatureMap,
    u_x: &FeatureMap,
    q: (usize, usize),
    cfg: &AttentionConfig,
) -> Result<Vec<f64>> {
    check_pair(u_c, u_x)?;
    cfg.check_dense_size(u_x.pixels())?;
    let qv = u_c.at(q.0, q.1);
    let mut row: Vec<f64> = Vec::with_capacity(u_x.pixels());
    for y in 0..u_x.height() {
        for x in 0..u_x.width() {
            row.push(cfg.gamma * dot_f32(qv, u_x.at(y, x)));
        }
    }
    softmax_inplace(&mut row);
    Ok(row)
}

/// Dense attention warp: every output pixel is the softmax-weighted sum of
/// all source pixels, ranked by feature similarity.
pub fn dense_warp(
    x: &Image,
    u_x: &FeatureMap,
    u_c: &FeatureMap,
    cfg: &AttentionConfig,
) -> Result<WarpResult> {
    check_pair(u_c, u_x)?;
    if u_x.height() != x.height() || u_x.width() != x.width() || !same_dims(u_x, u_c) {
        return Err(Error::Argument("dense_warp inputs must share dimensions".into()));
    }
    cfg.check_dense_size(u_x.pixels())?;

    let (h, w) = (x.height(), x.width());
    let rows: Vec<([f32; 3], f64)> = (0..h * w)
        .into_par_iter()
        .map_init(
            || Vec::<f64>::with_capacity(h * w),
            |scores, q| {
                let (qy, qx) = (q / w, q % w);
                scores.clear();
                let qv = u_c.at(qy, qx);
                for y in 0..h {
                    for x_ in 0..w {
                        scores.push(cfg.gamma * dot_f32(qv, u_x.at(y, x_)));
                    }
                }
                softmax_inplace(scores);
                let mut acc = [0.0f64; 3];
                let mut wsum = 0.0f64;
                for (p, &wgt) in scores.iter().enumerate() {
                    let px = x.pixel(p / w, p % w);
                    acc[0] += wgt * px[0] as f64;
                    acc[1] += wgt * px[1] as f64;
                    acc[2] += wgt * px[2] as f64;
                    wsum += wgt;
                }
                (
                    [
                        acc[0].clamp(0.0, 1.0) as f32,
                        acc[1].clamp(0.0, 1.0) as f32,
                        acc[2].clamp(0.0, 1.0) as f32,
                    ],
                    wsum,
                )
            },
        )
        .collect();

    let mut data = Vec::with_capacity(h * w * 3);
    let mut weight_sums = Vec::with_capacity(h * w);
    for (px, wsum) in rows {
        data.extend_from_slice(&px);
        weight_sums.push(wsum);
    }
    Ok(WarpResult {
        warped: Image::new(h, w, data)?,
        keys: None,
        weight_sums,
    })
}

fn same_dims(a: &FeatureMap, b: &FeatureMap) -> bool {
    a.height() == b.height() && a.width() == b.width()
}

/// Exact per-query argmax over integer key positions; ties break toward
/// the smallest linear index.
pub fn dense_argmax_field(
    u_x: &FeatureMap,
    u_c: &FeatureMap,
    cfg: &AttentionConfig,
) -> Result<CorrespondenceField> {
    check_pair(u_c, u_x)?;
    if !same_dims(u_x, u_c) {
        return Err(Error::Argument("argmax inputs must share dimensions".into()));
    }
    cfg.check_dense_size(u_x.pixels())?;

    let (h, w) = (u_x.height(), u_x.width());
    let best: Vec<((usize, usize), f64)> = (0..h * w)
        .into_par_iter()
        .map(|q| {
            let qv = u_c.at(q / w, q % w);
            let mut best_p = 0usize;
            let mut best_s = f64::NEG_INFINITY;
            for p in 0..h * w {
                let s = dot_f32(qv, u_x.at(p / w, p % w));
                if s > best_s {
                    best_s = s;
                    best_p = p;
                }
            }
            ((best_p / w, best_p % w), best_s)
        })
        .collect();

    let (coords, scores) = best.into_iter().unzip();
    Ok(CorrespondenceField { h, w, coords, scores })
}

/// Cycle-consistency metric on low-resolution inputs: the squared error
/// between the forward warp of `x_low` and the forward-backward warp built
/// from the transposed similarities. Callers downsample before invoking.
pub fn cycle_loss(
    x_low: &Image,
    u_x_low: &FeatureMap,
    u_c_low: &FeatureMap,
    cfg: &AttentionConfig,
) -> Result<f64> {
    check_pair(u_c_low, u_x_low)?;
    if u_x_low.height() != x_low.height()
        || u_x_low.width() != x_low.width()
        || !same_dims(u_x_low, u_c_low)
    {
        return Err(Error::Argument("cycle_loss inputs must share dimensions".into()));
    }
    cfg.check_dense_size(u_x_low.pixels())?;

    let (h, w) = (x_low.height(), x_low.width());
    let n = h * w;

    // Forward warp: rows of softmax(gamma * <u_c(q), u_x(p)>).
    let forward: Vec<[f64; 3]> = (0..n)
        .into_par_iter()
        .map_init(
            || Vec::<f64>::with_capacity(n),
            |scores, q| {
                scores.clear();
                let qv = u_c_low.at(q / w, q % w);
                for p in 0..n {
                    scores.push(cfg.gamma * dot_f32(qv, u_x_low.at(p / w, p % w)));
                }
                softmax_inplace(scores);
                let mut acc = [0.0f64; 3];
                for (p, &wgt) in scores.iter().enumerate() {
                    let px = x_low.pixel(p / w, p % w);
                    for c in 0..3 {
                        acc[c] += wgt * px[c] as f64;
                    }
                }
                acc
            },
        )
        .collect();

    // Backward pass over the transposed similarity: weights
    // softmax_p(gamma * <u_c(p), u_x(q)>) applied to the forward image.
    let loss = (0..n)
        .into_par_iter()
        .map_init(
            || Vec::<f64>::with_capacity(n),
            |scores, q| {
                scores.clear();
                let qv = u_x_low.at(q / w, q % w);
                for p in 0..n {
                    scores.push(cfg.gamma * dot_f32(u_c_low.at(p / w, p % w), qv));
                }
                softmax_inplace(scores);
                let mut cycle = [0.0f64; 3];
                for (p, &wgt) in scores.iter().enumerate() {
                    for c in 0..3 {
                        cycle[c] += wgt * forward[p][c];
                    }
                }
                let mut err = 0.0f64;
                for c in 0..3 {
                    let d = forward[q][c] - cycle[c];
                    err += d * d;
                }
                err
            },
        )
        .sum();
    Ok(loss)
}
