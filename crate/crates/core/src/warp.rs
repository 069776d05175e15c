//! Sparse attentive warping: softmax weights over each query's key set and
//! the bilinear gather that realizes the warp.
//!
//! With the key set enumerating every integer position this reproduces the
//! dense warp exactly; with sampled keys it costs O(pixels * keys) instead
//! of O(pixels^2).

use rayon::prelude::*;

use crate::attention::{dot_mixed, softmax_inplace, AttentionConfig};
use crate::error::{Error, Result};
use crate::grid::{bilinear_sample_into, Coord, FeatureMap, Image};
use crate::sampler::{constrained_score, KeyIndexSets, ScoreConstraints};

/// Keys collide when equal after rounding to 1/8 pixel.
const DEDUPE_SCALE: f64 = 8.0;

/// Per-query key coordinates and modulation weights, CSR-packed over
/// queries (key counts vary after deduplication).
#[derive(Debug, Clone)]
pub struct QueryKeys {
    h: usize,
    w: usize,
    offsets: Vec<usize>,
    coords: Vec<Coord>,
    weights: Vec<f64>,
}

impl QueryKeys {
    /// Assemble key sets by evaluating `f(y, x) -> (keys, weights)` per
    /// query. Key and weight counts must agree and be non-empty.
    pub fn build(
        h: usize,
        w: usize,
        mut f: impl FnMut(usize, usize) -> (Vec<Coord>, Vec<f64>),
    ) -> Result<QueryKeys> {
        let mut offsets = Vec::with_capacity(h * w + 1);
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for y in 0..h {
            for x in 0..w {
                let (k, wt) = f(y, x);
                if k.is_empty() || k.len() != wt.len() {
                    return Err(Error::Argument(format!(
                        "query ({y},{x}) has {} keys and {} weights",
                        k.len(),
                        wt.len()
                    )));
                }
                coords.extend(k);
                weights.extend(wt);
                offsets.push(coords.len());
            }
        }
        Ok(QueryKeys {
            h,
            w,
            offsets,
            coords,
            weights,
        })
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn keys(&self, y: usize, x: usize) -> &[Coord] {
        let q = y * self.w + x;
        &self.coords[self.offsets[q]..self.offsets[q + 1]]
    }

    pub fn weights(&self, y: usize, x: usize) -> &[f64] {
        let q = y * self.w + x;
        &self.weights[self.offsets[q]..self.offsets[q + 1]]
    }

    pub fn max_keys_per_query(&self) -> usize {
        (0..self.h * self.w)
            .map(|q| self.offsets[q + 1] - self.offsets[q])
            .max()
            .unwrap_or(0)
    }
}

/// Result of a warp: the output image plus diagnostics. `keys` is present
/// for sparse warps; dense warps enumerate the full grid implicitly.
#[derive(Debug, Clone)]
pub struct WarpResult {
    pub warped: Image,
    pub keys: Option<QueryKeys>,
    /// Per-query softmax weight sums (should be 1 within rounding).
    pub weight_sums: Vec<f64>,
}

/// Drop key coordinates that collide at 1/8-pixel resolution, keeping the
/// first occurrence and preserving order otherwise.
pub fn dedupe_keys(keys: &[Coord]) -> Vec<Coord> {
    let mut seen: Vec<(i64, i64)> = Vec::with_capacity(keys.len());
    let mut out = Vec::with_capacity(keys.len());
    for &t in keys {
        let id = (
            (t.y * DEDUPE_SCALE).round() as i64,
            (t.x * DEDUPE_SCALE).round() as i64,
        );
        if !seen.contains(&id) {
            seen.push(id);
            out.push(t);
        }
    }
    out
}

/// Softmax attention weights of one query over its (deduplicated, clamped)
/// key set: `softmax_k(gamma * constrained_score(similarity(q, k)))`.
pub fn sparse_attention_weights(
    u_c: &FeatureMap,
    u_x: &FeatureMap,
    keys: &[Coord],
    q: (usize, usize),
    cfg: &AttentionConfig,
    sc: &ScoreConstraints,
) -> Result<Vec<f64>> {
    if keys.is_empty() {
        return Err(Error::Argument("key set must not be empty".into()));
    }
    if u_c.channels() != u_x.channels() {
        return Err(Error::Argument("feature channel mismatch".into()));
    }
    let mut buf = vec![0.0f64; u_x.channels()];
    let qv = u_c.at(q.0, q.1);
    let mut scores: Vec<f64> = keys
        .iter()
        .map(|&t| {
            bilinear_sample_into(u_x, t, &mut buf);
            cfg.gamma * constrained_score(dot_mixed(qv, &buf), q, t, sc)
        })
        .collect();
    softmax_inplace(&mut scores);
    Ok(scores)
}

/// Gather pass: each output pixel is the weight-modulated sum of bilinear
/// samples of `x` at its key coordinates, accumulated in key order.
pub fn sparse_attentive_warp(x: &Image, attention: &QueryKeys) -> Result<Image> {
    if x.height() != attention.h || x.width() != attention.w {
        return Err(Error::Argument("image dimensions must match the key sets".into()));
    }
    let (h, w) = (x.height(), x.width());
    let x_map = x.as_feature_map();
    let pixels: Vec<[f32; 3]> = (0..h * w)
        .into_par_iter()
        .map_init(
            || vec![0.0f64; 3],
            |buf, q| {
                let (qy, qx) = (q / w, q % w);
                let mut acc = [0.0f64; 3];
                for (&t, &wgt) in attention.keys(qy, qx).iter().zip(attention.weights(qy, qx)) {
                    bilinear_sample_into(&x_map, t, buf);
                    for c in 0..3 {
                        acc[c] += wgt * buf[c];
                    }
                }
                [
                    acc[0].clamp(0.0, 1.0) as f32,
                    acc[1].clamp(0.0, 1.0) as f32,
                    acc[2].clamp(0.0, 1.0) as f32,
                ]
            },
        )
        .collect();
    let mut data = Vec::with_capacity(h * w * 3);
    for px in pixels {
        data.extend_from_slice(&px);
    }
    Image::new(h, w, data)
}

/// Per-query key/weight assembly: deduplicate the sampled keys (unless
/// disabled) and run the attention softmax for every query.
pub fn attention_keys(
    u_x: &FeatureMap,
    u_c: &FeatureMap,
    keysets: &KeyIndexSets,
    cfg: &AttentionConfig,
    sc: &ScoreConstraints,
    dedupe: bool,
) -> Result<QueryKeys> {
    if u_c.channels() != u_x.channels() {
        return Err(Error::Argument("feature channel mismatch".into()));
    }
    if u_x.height() != keysets.height() || u_x.width() != keysets.width() {
        return Err(Error::Argument("feature maps must match the key sets".into()));
    }
    let (h, w) = (keysets.height(), keysets.width());

    let per_query: Vec<(Vec<Coord>, Vec<f64>)> = (0..h * w)
        .into_par_iter()
        .map(|q| {
            let (qy, qx) = (q / w, q % w);
            let keys = if dedupe {
                dedupe_keys(keysets.keys(qy, qx))
            } else {
                keysets.keys(qy, qx).to_vec()
            };
            let weights = sparse_attention_weights(u_c, u_x, &keys, (qy, qx), cfg, sc)
                .expect("sampled key sets are non-empty");
            (keys, weights)
        })
        .collect();

    let mut offsets = Vec::with_capacity(h * w + 1);
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    offsets.push(0);
    for (k, wgt) in per_query {
        coords.extend(k);
        weights.extend(wgt);
        offsets.push(coords.len());
    }
    Ok(QueryKeys {
        h,
        w,
        offsets,
        coords,
        weights,
    })
}

/// Full sparse warp: assemble attention keys, then gather.
pub fn sparse_warp(
    x: &Image,
    u_x: &FeatureMap,
    u_c: &FeatureMap,
    keysets: &KeyIndexSets,
    cfg: &AttentionConfig,
    sc: &ScoreConstraints,
    dedupe: bool,
) -> Result<WarpResult> {
    if x.height() != keysets.height() || x.width() != keysets.width() {
        return Err(Error::Argument("warp inputs must share dimensions".into()));
    }
    let keys = attention_keys(u_x, u_c, keysets, cfg, sc, dedupe)?;
    let weight_sums = (0..x.height() * x.width())
        .map(|q| keys.weights(q / x.width(), q % x.width()).iter().sum())
        .collect();
    let warped = sparse_attentive_warp(x, &keys)?;
    Ok(WarpResult {
        warped,
        keys: Some(keys),
        weight_sums,
    })
}

/// Pack per-query keys and weights into a tensor with 3 channels per key
/// slot (y, x, weight). Queries with fewer keys than `slot_capacity` are
/// padded with (-1, -1, 0).
pub fn keys_to_tensor(keys: &QueryKeys, slot_capacity: usize) -> FeatureMap {
    FeatureMap::from_fn(keys.h, keys.w, 3 * slot_capacity, |y, x, out| {
        out.iter_mut().for_each(|v| *v = 0.0);
        for slot in 0..slot_capacity {
            out[3 * slot] = -1.0;
            out[3 * slot + 1] = -1.0;
        }
        let ks = keys.keys(y, x);
        let ws = keys.weights(y, x);
        for (slot, (&t, &wgt)) in ks.iter().zip(ws).enumerate().take(slot_capacity) {
            out[3 * slot] = t.y as f32;
            out[3 * slot + 1] = t.x as f32;
            out[3 * slot + 2] = wgt as f32;
        }
    })
}
