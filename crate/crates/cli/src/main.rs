//! Command-line surface of the sparse attention warping engine.
//!
//! Exit codes: 0 success, 2 argument error, 3 format/ingestion error,
//! 4 dense size-cap error.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hrwarp_core::{
    attention_keys, cycle_loss, dense_argmax_field, dense_warp, keys_to_tensor, load_image,
    load_label_map, load_mask, load_tensor, normalize_location_wise, prepare_features,
    sample_key_indices, save_image, save_tensor, synth_manipulation_pair,
    synthetic_distinct_features, translate_features, upsample_features, warp_full,
    AttentionConfig, Error, FeatureMap, FeatureSource, Guidance, Image, LabelMap, PipelineConfig,
    PropagationMode, ProviderConfig, SamplerConfig, ScoreConstraints, SynthConfig,
};

#[derive(Parser)]
#[command(name = "hrwarp", version, about = "Sparse attention warping engine")]
struct Cli {
    /// Worker thread count (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Warp an image toward an edited label map and composite inside a mask.
    Warp(WarpArgs),
    /// Exact dense attention warp (quadratic; guarded by a size cap).
    DenseWarp(DenseWarpArgs),
    /// Run key index sampling and dump per-query keys and weights.
    SampleKeys(SampleKeysArgs),
    /// Cycle-consistency metric on downsampled inputs.
    CycleLoss(CycleLossArgs),
    /// Synthesize manipulation evaluation pairs from an image + label map.
    SynthDataset(SynthArgs),
    /// Dense-vs-sparse evaluation-count and wall-clock benchmark.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PropMode {
    Adjusted,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Args)]
struct SamplerOpts {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sampling iterations N (key set grows to particles * iters).
    #[arg(long, default_value_t = 15)]
    iters: usize,
    /// Particle slots M per query.
    #[arg(long, default_value_t = 2)]
    particles: usize,
    /// Random candidates drawn around the particle each iteration.
    #[arg(long = "init-samples", default_value_t = 4)]
    init_samples: usize,
    /// Initial search window (defaults to max(H, W)).
    #[arg(long)]
    w0: Option<f64>,
    /// Window decay rate per iteration.
    #[arg(long = "lambda", default_value_t = 0.4)]
    decay: f64,
    /// Iteration at which the window drops to zero.
    #[arg(long, default_value_t = 10)]
    cutoff: usize,
    #[arg(long = "prop-mode", value_enum, default_value_t = PropMode::Adjusted)]
    prop_mode: PropMode,
    /// Extra propagate-evaluate rounds per iteration.
    #[arg(long = "extra-prop")]
    extra_prop: Option<usize>,
}

impl SamplerOpts {
    fn config(&self, default_extra: usize) -> SamplerConfig {
        SamplerConfig {
            iterations: self.iters,
            particle_slots: self.particles,
            init_samples: self.init_samples,
            window_init: self.w0,
            decay_rate: self.decay,
            decay_cutoff: self.cutoff,
            extra_propagations: self.extra_prop.unwrap_or(default_extra),
            propagation_mode: match self.prop_mode {
                PropMode::Adjusted => PropagationMode::Adjusted,
                PropMode::Raw => PropagationMode::Raw,
            },
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct AttentionOpts {
    /// Softmax temperature.
    #[arg(long, default_value_t = 100.0)]
    gamma: f64,
    /// Run dense operations above the size cap anyway.
    #[arg(long = "force-dense")]
    force_dense: bool,
}

impl AttentionOpts {
    fn config(&self) -> AttentionConfig {
        AttentionConfig {
            gamma: self.gamma,
            force_dense: self.force_dense,
            ..AttentionConfig::default()
        }
    }
}

#[derive(Args)]
struct FeatureOpts {
    /// Source-branch feature tensor (HRT1); replaces the built-in provider.
    #[arg(long = "features-src")]
    features_src: Option<PathBuf>,
    /// Target-branch feature tensor (HRT1).
    #[arg(long = "features-tgt")]
    features_tgt: Option<PathBuf>,
    /// Semantic class count (defaults to the label maps' maximum id + 1).
    #[arg(long)]
    classes: Option<usize>,
}

#[derive(Args)]
struct WarpArgs {
    /// Input image x0 (8-bit RGB PNG).
    #[arg(long)]
    image: PathBuf,
    /// Original label map (8-bit gray PNG).
    #[arg(long = "labels-src")]
    labels_src: PathBuf,
    /// Edited label map.
    #[arg(long = "labels-tgt")]
    labels_tgt: PathBuf,
    /// Editable-region mask (gray PNG, nonzero = editable).
    #[arg(long)]
    mask: PathBuf,
    /// Composited output PNG.
    #[arg(long)]
    out: PathBuf,
    /// Also write the raw (pre-composite) warp.
    #[arg(long = "warped-out")]
    warped_out: Option<PathBuf>,
    /// Dump per-query key coordinates and weights as an HRT1 tensor.
    #[arg(long = "dump-keys")]
    dump_keys: Option<PathBuf>,
    /// Penalize matches whose source label differs from the query label.
    #[arg(long = "label-penalty", value_enum, default_value_t = Toggle::On)]
    label_penalty: Toggle,
    #[arg(long = "penalty-value", default_value_t = 1e4)]
    penalty_value: f64,
    /// Exclude mask pixels from the source side of matching.
    #[arg(long)]
    reconstruction: bool,
    #[command(flatten)]
    sampler: SamplerOpts,
    #[command(flatten)]
    attention: AttentionOpts,
    #[command(flatten)]
    features: FeatureOpts,
}

#[derive(Args)]
struct DenseWarpArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long = "labels-src")]
    labels_src: Option<PathBuf>,
    #[arg(long = "labels-tgt")]
    labels_tgt: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    attention: AttentionOpts,
    #[command(flatten)]
    features: FeatureOpts,
}

#[derive(Args)]
struct SampleKeysArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long = "labels-src")]
    labels_src: Option<PathBuf>,
    #[arg(long = "labels-tgt")]
    labels_tgt: Option<PathBuf>,
    /// Output HRT1 tensor of keys and weights (3 channels per key slot).
    #[arg(long = "dump-keys")]
    dump_keys: PathBuf,
    #[arg(long = "label-penalty", value_enum, default_value_t = Toggle::Off)]
    label_penalty: Toggle,
    #[arg(long = "penalty-value", default_value_t = 1e4)]
    penalty_value: f64,
    /// Exclusion mask for reconstruction-style matching.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    reconstruction: bool,
    #[command(flatten)]
    sampler: SamplerOpts,
    #[command(flatten)]
    attention: AttentionOpts,
    #[command(flatten)]
    features: FeatureOpts,
}

#[derive(Args)]
struct CycleLossArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long = "labels-src")]
    labels_src: Option<PathBuf>,
    #[arg(long = "labels-tgt")]
    labels_tgt: Option<PathBuf>,
    /// Downsampling factor applied to the image and features.
    #[arg(long, default_value_t = 4)]
    downsample: usize,
    #[command(flatten)]
    attention: AttentionOpts,
    #[command(flatten)]
    features: FeatureOpts,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Output directory for the emitted pairs and the JSONL record file.
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
    /// Number of pairs to attempt.
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trials per pair before giving up.
    #[arg(long = "max-iters", default_value_t = 10)]
    max_iters: usize,
    /// Use the published hull-ratio gate verbatim (rejects everything).
    #[arg(long = "literal-hull-gate")]
    literal_hull_gate: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated square sizes, e.g. 64,128,256.
    #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
    sizes: Vec<usize>,
    /// Benchmark the sparse sampler, the dense oracle, or both.
    #[arg(long, value_enum, default_value_t = BenchMode::Sparse)]
    mode: BenchMode,
    /// Write the JSONL report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    sampler: SamplerOpts,
    #[command(flatten)]
    attention: AttentionOpts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BenchMode {
    Sparse,
    Dense,
    Both,
}

fn main() {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
    let result = match cli.command {
        Command::Warp(args) => cmd_warp(args),
        Command::DenseWarp(args) => cmd_dense_warp(args),
        Command::SampleKeys(args) => cmd_sample_keys(args),
        Command::CycleLoss(args) => cmd_cycle_loss(args),
        Command::SynthDataset(args) => cmd_synth(args),
        Command::Bench(args) => cmd_bench(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(match e {
            Error::Argument(_) | Error::Io(_) => 2,
            Error::Format { .. } | Error::Ingestion(_) => 3,
            Error::SizeCap { .. } => 4,
        });
    }
}

fn class_count(explicit: Option<usize>, maps: &[Option<&LabelMap>]) -> usize {
    explicit.unwrap_or_else(|| {
        maps.iter()
            .flatten()
            .map(|m| m.min_class_count())
            .max()
            .unwrap_or(2)
    })
}

fn cmd_warp(args: WarpArgs) -> Result<(), Error> {
    let x0 = load_image(&args.image)?;
    let c0 = load_label_map(&args.labels_src)?;
    let c1 = load_label_map(&args.labels_tgt)?;
    let mask = load_mask(&args.mask)?;

    let classes = class_count(args.features.classes, &[Some(&c0), Some(&c1)]);
    let (u_x, u_c) = feature_pair(&x0, Some(&c0), Some(&c1), &args.features)?;
    let cfg = PipelineConfig {
        sampler: args.sampler.config(2),
        attention: args.attention.config(),
        reconstruction_mode: args.reconstruction,
        label_penalty_enabled: args.label_penalty == Toggle::On,
        penalty_value: args.penalty_value,
        features: FeatureSource::Supplied {
            source: u_x,
            target: u_c,
        },
        provider: ProviderConfig::new(classes),
        dedupe_keys: true,
    };

    let out = warp_full(&x0, &c0, &c1, &mask, &cfg)?;
    save_image(&out.x_warp, &args.out)?;
    if let Some(path) = &args.warped_out {
        save_image(&out.warp.warped, path)?;
    }
    if let Some(path) = &args.dump_keys {
        let keys = out.warp.keys.as_ref().expect("sparse warp returns keys");
        let capacity = cfg.sampler.particle_slots * cfg.sampler.iterations;
        save_tensor(&keys_to_tensor(keys, capacity), path)?;
    }
    println!(
        "{}",
        serde_json::json!({
            "evaluations": out.evaluations,
            "out": args.out,
        })
    );
    Ok(())
}

/// Build the (source, target) feature pair: an HRT1 file replaces either
/// branch (upsampled under label guidance when smaller than the image),
/// and the handcrafted provider fills whichever branches remain.
fn feature_pair(
    image: &Image,
    labels_src: Option<&LabelMap>,
    labels_tgt: Option<&LabelMap>,
    opts: &FeatureOpts,
) -> Result<(FeatureMap, FeatureMap), Error> {
    let (h, w) = (image.height(), image.width());
    let classes = class_count(opts.classes, &[labels_src, labels_tgt]);
    let provider = ProviderConfig::new(classes);
    let ingest = |path: &PathBuf, labels: Option<&LabelMap>| -> Result<FeatureMap, Error> {
        let f = load_tensor(path)?;
        if f.height() == h && f.width() == w {
            Ok(normalize_location_wise(&f))
        } else {
            upsample_features(&f, labels.map(Guidance::Labels), h, w, &provider)
        }
    };

    let handcrafted = |caller: &str| -> Result<(FeatureMap, FeatureMap), Error> {
        let (Some(c0), Some(c1)) = (labels_src, labels_tgt) else {
            return Err(Error::Argument(format!(
                "{caller} requires both label maps when feature tensors are not supplied"
            )));
        };
        let cfg = PipelineConfig {
            features: FeatureSource::Handcrafted,
            provider: provider.clone(),
            ..PipelineConfig::local_edit(classes)
        };
        prepare_features(image, c0, c1, &cfg)
    };

    let (u_x, u_c) = match (&opts.features_src, &opts.features_tgt) {
        (Some(src), Some(tgt)) => (ingest(src, labels_src)?, ingest(tgt, labels_tgt)?),
        (None, None) => handcrafted("feature preparation")?,
        (Some(src), None) => {
            let (_, u_c) = handcrafted("a one-sided feature tensor")?;
            (ingest(src, labels_src)?, u_c)
        }
        (None, Some(tgt)) => {
            let (u_x, _) = handcrafted("a one-sided feature tensor")?;
            (u_x, ingest(tgt, labels_tgt)?)
        }
    };
    if u_x.channels() != u_c.channels() {
        return Err(Error::Argument(format!(
            "feature channels disagree: {} vs {}",
            u_x.channels(),
            u_c.channels()
        )));
    }
    Ok((u_x, u_c))
}

fn load_optional_labels(path: &Option<PathBuf>) -> Result<Option<LabelMap>, Error> {
    path.as_ref().map(load_label_map).transpose()
}

fn cmd_dense_warp(args: DenseWarpArgs) -> Result<(), Error> {
    let image = load_image(&args.image)?;
    let c0 = load_optional_labels(&args.labels_src)?;
    let c1 = load_optional_labels(&args.labels_tgt)?;
    let (u_x, u_c) = feature_pair(&image, c0.as_ref(), c1.as_ref(), &args.features)?;
    let out = dense_warp(&image, &u_x, &u_c, &args.attention.config())?;
    save_image(&out.warped, &args.out)?;
    println!("{}", serde_json::json!({ "out": args.out }));
    Ok(())
}

fn cmd_sample_keys(args: SampleKeysArgs) -> Result<(), Error> {
    let image = load_image(&args.image)?;
    let c0 = load_optional_labels(&args.labels_src)?;
    let c1 = load_optional_labels(&args.labels_tgt)?;
    let mask = args.mask.as_ref().map(load_mask).transpose()?;
    let (u_x, u_c) = feature_pair(&image, c0.as_ref(), c1.as_ref(), &args.features)?;

    let mut sc = ScoreConstraints {
        label_penalty_enabled: args.label_penalty == Toggle::On,
        penalty_value: args.penalty_value,
        source_labels: (args.label_penalty == Toggle::On)
            .then_some(c0.as_ref())
            .flatten(),
        target_labels: (args.label_penalty == Toggle::On)
            .then_some(c1.as_ref())
            .flatten(),
        excluded_mask: None,
    };
    if args.reconstruction {
        sc.excluded_mask = Some(mask.as_ref().ok_or_else(|| {
            Error::Argument("--reconstruction requires --mask".into())
        })?);
    }

    let cfg = args.sampler.config(0);
    let out = sample_key_indices(&u_x, &u_c, &cfg, &sc)?;
    let keys = attention_keys(&u_x, &u_c, &out.keys, &args.attention.config(), &sc, true)?;
    let capacity = cfg.particle_slots * cfg.iterations;
    save_tensor(&keys_to_tensor(&keys, capacity), &args.dump_keys)?;
    println!(
        "{}",
        serde_json::json!({
            "evaluations": out.evaluations,
            "keys_per_query": capacity,
            "dump": args.dump_keys,
        })
    );
    Ok(())
}

fn cmd_cycle_loss(args: CycleLossArgs) -> Result<(), Error> {
    if args.downsample == 0 {
        return Err(Error::Argument("--downsample must be >= 1".into()));
    }
    let image = load_image(&args.image)?;
    let c0 = load_optional_labels(&args.labels_src)?;
    let c1 = load_optional_labels(&args.labels_tgt)?;
    let (u_x, u_c) = feature_pair(&image, c0.as_ref(), c1.as_ref(), &args.features)?;

    let lh = (image.height() / args.downsample).max(1);
    let lw = (image.width() / args.downsample).max(1);
    let x_low = hrwarp_core::resize_image(&image, lh, lw)?;
    let u_x_low = normalize_location_wise(&hrwarp_core::bilinear_resize(&u_x, lh, lw)?);
    let u_c_low = normalize_location_wise(&hrwarp_core::bilinear_resize(&u_c, lh, lw)?);

    let loss = cycle_loss(&x_low, &u_x_low, &u_c_low, &args.attention.config())?;
    println!(
        "{}",
        serde_json::json!({ "cycle_loss": loss, "height": lh, "width": lw })
    );
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), Error> {
    let image = load_image(&args.image)?;
    let labels = load_label_map(&args.labels)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let cfg = SynthConfig {
        max_iters: args.max_iters,
        literal_hull_gate: args.literal_hull_gate,
        ..SynthConfig::default()
    };

    #[derive(Serialize)]
    struct Line<'a> {
        index: usize,
        seed: u64,
        image: String,
        labels: String,
        #[serde(flatten)]
        record: &'a hrwarp_core::SynthRecord,
    }

    let mut records = String::new();
    let mut emitted = 0usize;
    for i in 0..args.count {
        let seed = args.seed.wrapping_add(i as u64);
        let Some(pair) = synth_manipulation_pair(&image, &labels, seed, &cfg)? else {
            continue;
        };
        let image_name = format!("{i:04}_image.png");
        let labels_name = format!("{i:04}_labels.png");
        save_image(&pair.image, args.out_dir.join(&image_name))?;
        hrwarp_core::save_label_map(&pair.labels, args.out_dir.join(&labels_name))?;
        let line = Line {
            index: i,
            seed,
            image: image_name,
            labels: labels_name,
            record: &pair.record,
        };
        records.push_str(&serde_json::to_string(&line).expect("record serializes"));
        records.push('\n');
        emitted += 1;
    }
    std::fs::write(args.out_dir.join("records.jsonl"), records)?;
    println!(
        "{}",
        serde_json::json!({ "attempted": args.count, "emitted": emitted })
    );
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), Error> {
    let attention = args.attention.config();
    let mut lines = Vec::new();
    for &size in &args.sizes {
        if size == 0 {
            return Err(Error::Argument("bench sizes must be positive".into()));
        }
        let pixels = size * size;
        // Synthetic translated-feature instance: ground truth is a shift.
        let u_x = synthetic_distinct_features(size, size, 8, args.sampler.seed);
        let u_c = translate_features(&u_x, 2, 3);

        if matches!(args.mode, BenchMode::Sparse | BenchMode::Both) {
            let cfg = args.sampler.config(0);
            let start = Instant::now();
            let out = sample_key_indices(&u_x, &u_c, &cfg, &ScoreConstraints::none())?;
            lines.push(serde_json::json!({
                "size": size,
                "pixels": pixels,
                "mode": "sparse",
                "evaluations": out.evaluations,
                "wall_ms": start.elapsed().as_secs_f64() * 1e3,
            }));
        }
        if matches!(args.mode, BenchMode::Dense | BenchMode::Both) {
            // All-pairs evaluation count is analytic: (H*W)^2.
            let evaluations = (pixels as u128) * (pixels as u128);
            let wall_ms = if pixels <= attention.dense_size_cap || attention.force_dense {
                attention.check_dense_size(pixels)?;
                let start = Instant::now();
                let _ = dense_argmax_field(&u_x, &u_c, &attention)?;
                Some(start.elapsed().as_secs_f64() * 1e3)
            } else {
                None
            };
            lines.push(serde_json::json!({
                "size": size,
                "pixels": pixels,
                "mode": "dense",
                "evaluations": evaluations,
                "wall_ms": wall_ms,
            }));
        }
    }
    let report = lines
        .iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    match &args.out {
        Some(path) => std::fs::write(path, report)?,
        None => print!("{report}"),
    }
    Ok(())
}
