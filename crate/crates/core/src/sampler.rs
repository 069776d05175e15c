//! Key index sampling: a randomized, propagation-based search that builds a
//! sparse set of candidate source coordinates per query pixel.
//!
//! Each query carries a live particle (a fractional source coordinate) per
//! slot. One iteration jitters the particle inside a decaying window, shares
//! candidates with the 8-adjacent neighbors, keeps the best-scoring
//! candidate, and appends it to the query's key set. Every random draw is a
//! pure function of (seed, slot, pixel, iteration, draw), so runs are
//! bit-identical no matter how the per-query work is scheduled.

use rayon::prelude::*;

use crate::attention::dot_mixed;
use crate::error::{Error, Result};
use crate::grid::{bilinear_sample_into, Coord, FeatureMap, LabelMap, Mask};
use crate::rng::KeyedRng;

const NEIGHBOR_OFFSETS: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// How a neighbor's candidate moves when it is shared with a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagationMode {
    /// Shift the candidate by the query-to-neighbor displacement, so a
    /// match propagates as a displacement (classic nearest-neighbor-field
    /// behavior; exact on pure translations).
    Adjusted,
    /// Share the absolute coordinate unchanged.
    Raw,
}

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    /// Total iterations N; the key set grows to `particle_slots * iterations`.
    pub iterations: usize,
    /// Independent particle slots M per query.
    pub particle_slots: usize,
    /// Random candidates k drawn around the particle each iteration.
    pub init_samples: usize,
    /// Initial search window; `None` resolves to max(H, W).
    pub window_init: Option<f64>,
    /// Exponential window decay rate per iteration.
    pub decay_rate: f64,
    /// Iteration index at which the window drops to zero.
    pub decay_cutoff: usize,
    /// Additional propagate-evaluate rounds per iteration (no jitter).
    pub extra_propagations: usize,
    pub propagation_mode: PropagationMode,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            iterations: 15,
            particle_slots: 2,
            init_samples: 4,
            window_init: None,
            decay_rate: 0.4,
            decay_cutoff: 10,
            extra_propagations: 0,
            propagation_mode: PropagationMode::Adjusted,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    /// The local-editing preset: more propagation and semantic penalties.
    pub fn local_edit_preset() -> Self {
        SamplerConfig {
            extra_propagations: 2,
            ..SamplerConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::Argument("iterations must be >= 1".into()));
        }
        if self.particle_slots < 1 {
            return Err(Error::Argument("particle_slots must be >= 1".into()));
        }
        if self.decay_rate < 0.0 {
            return Err(Error::Argument("decay_rate must be >= 0".into()));
        }
        if let Some(w0) = self.window_init {
            if w0.is_nan() || w0 < 0.0 {
                return Err(Error::Argument("window_init must be >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn resolved_window(&self, h: usize, w: usize) -> f64 {
        self.window_init.unwrap_or_else(|| h.max(w) as f64)
    }
}

/// Window size for iteration `i`: `w0 * exp(-rate * i)` while `i < cutoff`,
/// zero afterwards.
pub fn window_schedule(iteration: usize, window_init: f64, decay_rate: f64, decay_cutoff: usize) -> f64 {
    if iteration >= decay_cutoff {
        0.0
    } else {
        window_init * (-decay_rate * iteration as f64).exp()
    }
}

/// Score adjustments applied during evaluation: a semantic-label penalty
/// and a reconstruction-mode exclusion mask. Both subtract `penalty_value`
/// and stack.
#[derive(Debug, Clone, Default)]
pub struct ScoreConstraints<'a> {
    pub label_penalty_enabled: bool,
    pub penalty_value: f64,
    pub source_labels: Option<&'a LabelMap>,
    pub target_labels: Option<&'a LabelMap>,
    pub excluded_mask: Option<&'a Mask>,
}

impl<'a> ScoreConstraints<'a> {
    pub fn none() -> Self {
        ScoreConstraints {
            penalty_value: DEFAULT_PENALTY,
            ..ScoreConstraints::default()
        }
    }

    pub fn label_penalty(source: &'a LabelMap, target: &'a LabelMap) -> Self {
        ScoreConstraints {
            label_penalty_enabled: true,
            penalty_value: DEFAULT_PENALTY,
            source_labels: Some(source),
            target_labels: Some(target),
            excluded_mask: None,
        }
    }

    pub fn with_excluded_mask(mut self, mask: &'a Mask) -> Self {
        self.excluded_mask = Some(mask);
        self
    }

    fn validate(&self, h: usize, w: usize) -> Result<()> {
        if self.penalty_value <= 0.0 {
            return Err(Error::Argument("penalty_value must be > 0".into()));
        }
        if self.label_penalty_enabled && (self.source_labels.is_none() || self.target_labels.is_none()) {
            return Err(Error::Argument(
                "label penalty requires both source and target label maps".into(),
            ));
        }
        for labels in [self.source_labels, self.target_labels].into_iter().flatten() {
            if labels.height() != h || labels.width() != w {
                return Err(Error::Argument("label map dimensions must match features".into()));
            }
        }
        if let Some(mask) = self.excluded_mask {
            if mask.height() != h || mask.width() != w {
                return Err(Error::Argument("excluded mask dimensions must match features".into()));
            }
        }
        Ok(())
    }
}

pub const DEFAULT_PENALTY: f64 = 1e4;

/// True when any integer pixel in the bilinear footprint of `t` is inside
/// the mask. Weight-zero neighbors do not count.
#[inline]
fn footprint_touches_mask(mask: &Mask, t: Coord) -> bool {
    let (h, w) = (mask.height(), mask.width());
    let y0 = (t.y.floor() as usize).min(h - 1);
    let x0 = (t.x.floor() as usize).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let fy = t.y - y0 as f64;
    let fx = t.x - x0 as f64;

    if mask.editable(y0, x0) {
        return true;
    }
    if fx > 0.0 && x1 != x0 && mask.editable(y0, x1) {
        return true;
    }
    if fy > 0.0 && y1 != y0 {
        if mask.editable(y1, x0) {
            return true;
        }
        if fx > 0.0 && x1 != x0 && mask.editable(y1, x1) {
            return true;
        }
    }
    false
}

/// Apply the score constraints to a raw matching score for query `q` and
/// candidate coordinate `t` (already clamped).
pub fn constrained_score(base: f64, q: (usize, usize), t: Coord, sc: &ScoreConstraints) -> f64 {
    let mut score = base;
    if sc.label_penalty_enabled {
        if let (Some(src), Some(tgt)) = (sc.source_labels, sc.target_labels) {
            let (ry, rx) = t.rounded();
            if tgt.class(q.0, q.1) != src.class(ry, rx) {
                score -= sc.penalty_value;
            }
        }
    }
    if let Some(mask) = sc.excluded_mask {
        if footprint_touches_mask(mask, t) {
            score -= sc.penalty_value;
        }
    }
    score
}

/// Accumulated key coordinates with cached constrained scores, `per_query`
/// entries per pixel ordered iteration-major then slot.
#[derive(Debug, Clone)]
pub struct KeyIndexSets {
    h: usize,
    w: usize,
    per_query: usize,
    slots: usize,
    coords: Vec<Coord>,
    scores: Vec<f64>,
}

impl KeyIndexSets {
    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn per_query(&self) -> usize {
        self.per_query
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn keys(&self, y: usize, x: usize) -> &[Coord] {
        let q = y * self.w + x;
        &self.coords[q * self.per_query..(q + 1) * self.per_query]
    }

    pub fn scores(&self, y: usize, x: usize) -> &[f64] {
        let q = y * self.w + x;
        &self.scores[q * self.per_query..(q + 1) * self.per_query]
    }

    /// Cached scores of one slot's particle across iterations.
    pub fn slot_scores(&self, y: usize, x: usize, slot: usize) -> Vec<f64> {
        self.scores(y, x)
            .iter()
            .skip(slot)
            .step_by(self.slots)
            .copied()
            .collect()
    }
}

/// Final live particles, `slots` per query, with their constrained scores.
#[derive(Debug, Clone)]
pub struct ParticleField {
    h: usize,
    w: usize,
    slots: usize,
    coords: Vec<Coord>,
    scores: Vec<f64>,
}

impl ParticleField {
    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn particle(&self, y: usize, x: usize, slot: usize) -> (Coord, f64) {
        let i = (y * self.w + x) * self.slots + slot;
        (self.coords[i], self.scores[i])
    }

    /// Highest-scoring particle across slots (lower slot wins ties).
    pub fn best(&self, y: usize, x: usize) -> (Coord, f64) {
        let mut best = self.particle(y, x, 0);
        for slot in 1..self.slots {
            let cand = self.particle(y, x, slot);
            if cand.1 > best.1 {
                best = cand;
            }
        }
        best
    }
}

#[derive(Debug)]
pub struct SampleOutput {
    pub keys: KeyIndexSets,
    pub particles: ParticleField,
    /// Total similarity evaluations performed by the evaluate steps.
    pub evaluations: u64,
}

struct SlotState {
    coords: Vec<Coord>,
    scores: Vec<f64>,
}

/// Run the full sampling procedure, producing `particle_slots * iterations`
/// key coordinates per query plus the final particle field.
pub fn sample_key_indices(
    u_x: &FeatureMap,
    u_c: &FeatureMap,
    cfg: &SamplerConfig,
    sc: &ScoreConstraints,
) -> Result<SampleOutput> {
    if !u_x.same_shape(u_c) {
        return Err(Error::Argument(format!(
            "feature maps must share dimensions: {}x{}x{} vs {}x{}x{}",
            u_x.height(),
            u_x.width(),
            u_x.channels(),
            u_c.height(),
            u_c.width(),
            u_c.channels()
        )));
    }
    cfg.validate()?;
    let (h, w) = (u_x.height(), u_x.width());
    sc.validate(h, w)?;

    let n_px = h * w;
    let slots = cfg.particle_slots;
    let iters = cfg.iterations;
    let k = cfg.init_samples;
    let w0 = cfg.resolved_window(h, w);
    let rng = KeyedRng::new(cfg.seed);
    let channels = u_x.channels();

    let per_query = slots * iters;
    let mut key_coords = vec![Coord::new(0.0, 0.0); n_px * per_query];
    let mut key_scores = vec![0.0f64; n_px * per_query];
    let mut final_coords = vec![Coord::new(0.0, 0.0); n_px * slots];
    let mut final_scores = vec![0.0f64; n_px * slots];
    let mut evaluations = 0u64;

    let score_of = |q: usize, t: Coord, buf: &mut [f64]| -> f64 {
        bilinear_sample_into(u_x, t, buf);
        let raw = dot_mixed(u_c.at(q / w, q % w), buf);
        constrained_score(raw, (q / w, q % w), t, sc)
    };

    for slot in 0..slots {
        // Initialization: one uniform particle per query. Its score is
        // cached for the key set but is not an evaluate-step lookup, so it
        // does not enter the evaluation counter.
        let mut state: SlotState = {
            let pairs: Vec<(Coord, f64)> = (0..n_px)
                .into_par_iter()
                .map_init(
                    || vec![0.0f64; channels],
                    |buf, q| {
                        let t = Coord::new(
                            rng.unit(&[slot as u64, q as u64, 0, 0]) * (h - 1) as f64,
                            rng.unit(&[slot as u64, q as u64, 0, 1]) * (w - 1) as f64,
                        );
                        (t, score_of(q, t, buf))
                    },
                )
                .collect();
            let mut coords = Vec::with_capacity(n_px);
            let mut scores = Vec::with_capacity(n_px);
            for (c, s) in pairs {
                coords.push(c);
                scores.push(s);
            }
            SlotState { coords, scores }
        };
        accumulate(&mut key_coords, &mut key_scores, &state, per_query, 0, slots, slot);

        let pool_len = k + 1;
        let mut pools = vec![Coord::new(0.0, 0.0); n_px * pool_len];

        for iter in 1..iters {
            let window = window_schedule(iter, w0, cfg.decay_rate, cfg.decay_cutoff);

            // Initialize step: each query's local pool is its particle
            // followed by k window-jittered copies.
            pools
                .par_chunks_mut(pool_len)
                .enumerate()
                .for_each(|(q, pool)| {
                    let t = state.coords[q];
                    pool[0] = t;
                    for j in 0..k {
                        let dy = rng.symmetric(&[slot as u64, q as u64, iter as u64, 2 * j as u64]);
                        let dx =
                            rng.symmetric(&[slot as u64, q as u64, iter as u64, 2 * j as u64 + 1]);
                        pool[j + 1] =
                            Coord::new(t.y + window * dy, t.x + window * dx).clamped(h, w);
                    }
                });

            // Propagate + evaluate: argmax over the union of the query's own
            // pool and its 8-adjacent neighbors' pools.
            let (next, evals) = evaluate_pools(
                &pools,
                pool_len,
                h,
                w,
                channels,
                cfg.propagation_mode,
                &score_of,
            );
            state = next;
            evaluations += evals;

            // Extra propagate-evaluate rounds on singleton pools.
            for _ in 0..cfg.extra_propagations {
                let singleton = state.coords.clone();
                let (next, evals) = evaluate_pools(
                    &singleton,
                    1,
                    h,
                    w,
                    channels,
                    cfg.propagation_mode,
                    &score_of,
                );
                state = next;
                evaluations += evals;
            }

            accumulate(&mut key_coords, &mut key_scores, &state, per_query, iter, slots, slot);
        }

        for q in 0..n_px {
            final_coords[q * slots + slot] = state.coords[q];
            final_scores[q * slots + slot] = state.scores[q];
        }
    }

    Ok(SampleOutput {
        keys: KeyIndexSets {
            h,
            w,
            per_query,
            slots,
            coords: key_coords,
            scores: key_scores,
        },
        particles: ParticleField {
            h,
            w,
            slots,
            coords: final_coords,
            scores: final_scores,
        },
        evaluations,
    })
}

/// Argmax over each query's propagated pool. Pool entries are visited own
/// pool first, then the 8 neighbors in fixed row-major order; only a
/// strictly better score replaces the incumbent, so the earliest pool
/// position wins ties.
fn evaluate_pools(
    pools: &[Coord],
    pool_len: usize,
    h: usize,
    w: usize,
    channels: usize,
    mode: PropagationMode,
    score_of: &(impl Fn(usize, Coord, &mut [f64]) -> f64 + Sync),
) -> (SlotState, u64) {
    let results: Vec<(Coord, f64, u64)> = (0..h * w)
        .into_par_iter()
        .map_init(
            || vec![0.0f64; channels],
            |buf, q| {
                let (qy, qx) = ((q / w) as isize, (q % w) as isize);
                let mut best_t = Coord::new(0.0, 0.0);
                let mut best_s = f64::NEG_INFINITY;
                let mut count = 0u64;
                let mut visit = |src_y: isize, src_x: isize, buf: &mut [f64]| {
                    let src = (src_y as usize * w + src_x as usize) * pool_len;
                    let (dy, dx) = match mode {
                        PropagationMode::Adjusted => ((qy - src_y) as f64, (qx - src_x) as f64),
                        PropagationMode::Raw => (0.0, 0.0),
                    };
                    for cand in &pools[src..src + pool_len] {
                        let t = Coord::new(cand.y + dy, cand.x + dx).clamped(h, w);
                        let s = score_of(q, t, buf);
                        count += 1;
                        if s > best_s {
                            best_s = s;
                            best_t = t;
                        }
                    }
                };
                visit(qy, qx, buf);
                for (oy, ox) in NEIGHBOR_OFFSETS {
                    let (ny, nx) = (qy + oy, qx + ox);
                    if ny >= 0 && ny < h as isize && nx >= 0 && nx < w as isize {
                        visit(ny, nx, buf);
                    }
                }
                (best_t, best_s, count)
            },
        )
        .collect();

    let mut coords = Vec::with_capacity(h * w);
    let mut scores = Vec::with_capacity(h * w);
    let mut evals = 0u64;
    for (t, s, c) in results {
        coords.push(t);
        scores.push(s);
        evals += c;
    }
    (SlotState { coords, scores }, evals)
}

fn accumulate(
    key_coords: &mut [Coord],
    key_scores: &mut [f64],
    state: &SlotState,
    per_query: usize,
    iter: usize,
    slots: usize,
    slot: usize,
) {
    for (q, (&c, &s)) in state.coords.iter().zip(&state.scores).enumerate() {
        let i = q * per_query + iter * slots + slot;
        key_coords[i] = c;
        key_scores[i] = s;
    }
}

/// Expected evaluate-step lookups for a full run on an `h` x `w` grid:
/// every iteration evaluates each query's own pool plus the pools of its
/// in-bounds 8-neighbors, and each extra propagation re-evaluates the
/// singleton equivalents.
pub fn expected_evaluations(h: usize, w: usize, cfg: &SamplerConfig) -> u64 {
    let mut per_iteration = 0u64;
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut sources = 1u64;
            for (oy, ox) in NEIGHBOR_OFFSETS {
                let (ny, nx) = (y + oy, x + ox);
                if ny >= 0 && ny < h as isize && nx >= 0 && nx < w as isize {
                    sources += 1;
                }
            }
            per_iteration +=
                sources * (cfg.init_samples as u64 + 1 + cfg.extra_propagations as u64);
        }
    }
    cfg.particle_slots as u64 * (cfg.iterations as u64 - 1) * per_iteration
}
