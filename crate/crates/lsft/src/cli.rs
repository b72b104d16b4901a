//! Command-line surface: feature generation, single transformations,
//! convergence / balance / timing experiments, and the method ablation.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::feature::FeatureMatrix;
use crate::ftz::{self, Dtype};
use crate::harness::{self, Dist, LayerSchedule, LayerSpec, Method};
use crate::optim::{EtaMode, TransformConfig};
use crate::report::{self, RunManifest};
use crate::rng;

#[derive(Debug, Parser)]
#[command(
    name = "lsft",
    version,
    about = "Feature transformations for style transfer: closed-form baselines, fixed-step \
             gradient descent, and exact line search"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded synthetic feature matrix to an FTZ file.
    Gen(GenArgs),
    /// Transform a content feature toward a style feature.
    Transform(TransformArgs),
    /// Convergence curves over seeded pairs, one CSV per method and layer.
    Converge(ConvergeArgs),
    /// Content/style balance across a sweep of alpha values.
    Balance(BalanceArgs),
    /// Median wall times per method across resolution-analog shapes.
    Bench(BenchArgs),
    /// Fixed-step vs line-search comparison with re-centering toggles.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    channels: usize,
    #[arg(long)]
    samples: usize,
    /// unit-gaussian, scaled-gaussian (with --mean/--std), or low-rank
    /// (with --rank).
    #[arg(long, default_value = "unit-gaussian")]
    dist: String,
    #[arg(long, default_value_t = 0.0)]
    mean: f64,
    #[arg(long, default_value_t = 1.0)]
    std: f64,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long, default_value = "f64")]
    dtype: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TransformArgs {
    /// adain, adain-ablated, zca, zca-gram, interp, iterft, m-iterft, ls-ft.
    #[arg(long)]
    method: String,
    #[arg(long)]
    content: PathBuf,
    #[arg(long)]
    style: PathBuf,
    #[arg(long, conflicts_with_all = ["lambda", "alpha_preset"])]
    alpha: Option<f64>,
    #[arg(long, conflicts_with = "alpha_preset")]
    lambda: Option<f64>,
    /// wct2, photowct, photowct2, or pca-d.
    #[arg(long)]
    alpha_preset: Option<String>,
    /// Fixed learning rate (iterft / m-iterft only).
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    /// Blend factor for interp: 0 = content, 1 = full stylization.
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long)]
    no_recenter: bool,
    #[arg(long, default_value = "f64")]
    dtype: String,
    #[arg(long)]
    out: PathBuf,
    /// Also write the per-iteration loss trace (iterative methods only).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConvergeArgs {
    #[arg(long, default_value_t = 100)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// "vgg", "vgg:<base-samples>", or a comma list of C:n entries.
    #[arg(long, default_value = "vgg:1024")]
    layers: String,
    #[arg(long, default_value = "m-iterft,ls-ft")]
    methods: String,
    #[arg(long, default_value_t = 15)]
    iters: usize,
    #[arg(long, conflicts_with = "alpha_preset")]
    alpha: Option<f64>,
    #[arg(long)]
    alpha_preset: Option<String>,
    /// Output directory for the per-method, per-layer CSVs.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BalanceArgs {
    #[arg(long, default_value = "0.2,1,10,200")]
    alphas: String,
    #[arg(long, default_value = "ls-ft")]
    methods: String,
    #[arg(long, default_value_t = 20)]
    pairs: usize,
    #[arg(long, default_value_t = 32)]
    channels: usize,
    #[arg(long, default_value_t = 512)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Comma list of hd, fhd, qhd, uhd, or C:n entries.
    #[arg(long, default_value = "fhd")]
    shapes: String,
    #[arg(long, default_value = "m-iterft,ls-ft")]
    methods: String,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[arg(long, default_value_t = 20)]
    pairs: usize,
    #[arg(long, default_value_t = 32)]
    channels: usize,
    #[arg(long, default_value_t = 512)]
    samples: usize,
    #[arg(long, default_value_t = 15)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

/// Parse arguments and run; the binary maps errors to exit code 1.
pub fn run_from_args<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    run(cli)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Transform(a) => transform(a),
        Command::Converge(a) => converge(a),
        Command::Balance(a) => balance(a),
        Command::Bench(a) => bench(a),
        Command::Ablate(a) => ablate(a),
    }
}

fn parse_dtype(s: &str) -> Result<Dtype> {
    match s {
        "f32" => Ok(Dtype::F32),
        "f64" => Ok(Dtype::F64),
        other => Err(Error::InvalidArgument(format!("unknown dtype {other:?}, use f32 or f64"))),
    }
}

fn parse_methods(s: &str) -> Result<Vec<Method>> {
    s.split(',').map(|m| m.trim().parse()).collect()
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad number {v:?}")))
        })
        .collect()
}

fn parse_layers(s: &str) -> Result<LayerSchedule> {
    if s == "vgg" {
        return Ok(LayerSchedule::vgg_like(4096));
    }
    if let Some(base) = s.strip_prefix("vgg:") {
        let base: usize = base
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad layer base {base:?}")))?;
        return Ok(LayerSchedule::vgg_like(base));
    }
    let layers = s
        .split(',')
        .enumerate()
        .map(|(i, entry)| {
            let (c, n) = entry
                .trim()
                .split_once(':')
                .ok_or_else(|| Error::InvalidArgument(format!("bad layer {entry:?}, use C:n")))?;
            let channels = c
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad channel count {c:?}")))?;
            let samples: usize = n
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad sample count {n:?}")))?;
            Ok(LayerSpec {
                label: format!("layer{}", i + 1),
                channels,
                content_samples: samples,
                style_samples: samples,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LayerSchedule { layers })
}

fn parse_shapes(s: &str) -> Result<Vec<(String, usize, usize)>> {
    let presets = harness::resolution_shapes();
    s.split(',')
        .map(|entry| {
            let entry = entry.trim();
            if let Some(p) = presets.iter().find(|(name, _, _)| name == entry) {
                return Ok(p.clone());
            }
            let (c, n) = entry
                .split_once(':')
                .ok_or_else(|| Error::InvalidArgument(format!("unknown shape {entry:?}")))?;
            let channels: usize = c
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad channel count {c:?}")))?;
            let samples: usize = n
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad sample count {n:?}")))?;
            Ok((entry.to_string(), channels, samples))
        })
        .collect()
}

fn build_config(
    method: Method,
    alpha: Option<f64>,
    lambda: Option<f64>,
    preset: Option<&str>,
    eta: Option<f64>,
    iters: Option<usize>,
    no_recenter: bool,
) -> Result<TransformConfig> {
    let mut cfg = method.default_config();
    if let Some(name) = preset {
        let a = harness::alpha_preset(name, method).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "unknown alpha preset {name:?}, use wct2, photowct, photowct2, or pca-d"
            ))
        })?;
        cfg = cfg.with_alpha(a);
    }
    if let Some(a) = alpha {
        cfg = cfg.with_alpha(a);
    }
    if let Some(l) = lambda {
        cfg = cfg.with_lambda(l);
    }
    if let Some(e) = eta {
        if !matches!(cfg.eta_mode, EtaMode::Fixed(_)) {
            return Err(Error::InvalidArgument(
                "--eta only applies to fixed-step methods; ls-ft searches its own step".into(),
            ));
        }
        cfg.eta_mode = EtaMode::Fixed(e);
    }
    if let Some(n) = iters {
        cfg.iterations = n;
    }
    if no_recenter {
        cfg.recenter_each_step = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

fn gen(a: GenArgs) -> Result<()> {
    let dist = match a.dist.as_str() {
        "unit-gaussian" => Dist::UnitGaussian,
        "scaled-gaussian" => Dist::ScaledGaussian { mean: a.mean, std: a.std },
        "low-rank" => {
            let rank = a.rank.ok_or_else(|| {
                Error::InvalidArgument("--dist low-rank requires --rank".into())
            })?;
            Dist::LowRank { rank }
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown dist {other:?}, use unit-gaussian, scaled-gaussian, or low-rank"
        )))?,
    };
    let f = harness::gen_features(a.seed, a.channels, a.samples, dist)?;
    ftz::write_ftz(&f, &a.out, parse_dtype(&a.dtype)?)?;
    announce(&a.out);
    Ok(())
}

fn transform(a: TransformArgs) -> Result<()> {
    let mut method: Method = a.method.parse()?;
    if let Method::Interp { .. } = method {
        if !(0.0..=1.0).contains(&a.beta) {
            return Err(Error::InvalidArgument(format!("--beta {} must be in [0, 1]", a.beta)));
        }
        method = Method::Interp { beta: a.beta };
    }
    let cfg = build_config(
        method,
        a.alpha,
        a.lambda,
        a.alpha_preset.as_deref(),
        a.eta,
        a.iters,
        a.no_recenter,
    )?;
    let fc = ftz::read_ftz(&a.content)?;
    let fs = ftz::read_ftz(&a.style)?;
    let (out, trace) = harness::apply_method(method, &fc, &fs, &cfg)?;
    ftz::write_ftz(&out, &a.out, parse_dtype(&a.dtype)?)?;
    announce(&a.out);
    if let Some(trace_path) = a.trace {
        let trace = trace.ok_or_else(|| {
            Error::InvalidArgument(format!("{} records no trace; --trace needs an iterative method", method.label()))
        })?;
        let inputs = format!("content={} style={}", a.content.display(), a.style.display());
        let manifest = RunManifest::new(method.label(), &cfg, None, inputs);
        report::write_trace_csv(&trace, &manifest, &trace_path)?;
        announce(&trace_path);
    }
    Ok(())
}

fn converge(a: ConvergeArgs) -> Result<()> {
    let methods = parse_methods(&a.methods)?;
    let schedule = parse_layers(&a.layers)?;
    std::fs::create_dir_all(&a.out)
        .map_err(|e| Error::Io { path: a.out.display().to_string(), source: e })?;
    for method in methods {
        let mut cfg =
            build_config(method, a.alpha, None, a.alpha_preset.as_deref(), None, Some(a.iters), false)?;
        cfg.early_stop = false;
        for (li, spec) in schedule.layers.iter().enumerate() {
            let pairs = (0..a.pairs)
                .map(|p| {
                    harness::gen_pair(
                        rng::derive(a.seed, (li as u64) << 32 | p as u64),
                        spec.channels,
                        spec.content_samples,
                        spec.style_samples,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let traces = harness::convergence_experiment(&pairs, method, &cfg, a.iters)?;
            let failures = traces.iter().filter(|t| t.failure.is_some()).count();
            let curve = harness::aggregate_traces(&traces)?;
            let inputs = format!(
                "gen:unit-gaussian channels={} samples={} pairs={} failures={}",
                spec.channels, spec.content_samples, a.pairs, failures
            );
            let manifest = RunManifest::new(method.label(), &cfg, Some(a.seed), inputs.clone());
            let path = a.out.join(format!("converge_{}_{}.csv", method.label(), spec.label));
            report::write_convergence_csv(&curve, &manifest, &path)?;
            announce(&path);
            if method == Method::LsFt {
                let hist = harness::eta_histogram(&traces)?;
                let manifest = RunManifest::new(method.label(), &cfg, Some(a.seed), inputs);
                let path = a.out.join(format!("eta_hist_{}_{}.csv", method.label(), spec.label));
                report::write_histogram_csv(&hist, &manifest, &path)?;
                announce(&path);
            }
        }
    }
    Ok(())
}

fn balance(a: BalanceArgs) -> Result<()> {
    let methods = parse_methods(&a.methods)?;
    let alphas = parse_f64_list(&a.alphas)?;
    let pairs = (0..a.pairs)
        .map(|p| harness::gen_pair(rng::derive(a.seed, p as u64), a.channels, a.samples, a.samples))
        .collect::<Result<Vec<_>>>()?;
    for &method in &methods {
        let cfg = method.default_config();
        let points = harness::alpha_sweep(&pairs, method, &cfg, &alphas)?;
        let inputs = format!(
            "gen:unit-gaussian channels={} samples={} pairs={}",
            a.channels, a.samples, a.pairs
        );
        let manifest = RunManifest::new(method.label(), &cfg, Some(a.seed), inputs);
        let path = if methods.len() == 1 {
            a.out.clone()
        } else {
            suffixed(&a.out, method.label())
        };
        report::write_balance_csv(&points, &manifest, &path)?;
        announce(&path);
    }
    Ok(())
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

fn bench(a: BenchArgs) -> Result<()> {
    let shapes = parse_shapes(&a.shapes)?;
    let methods = parse_methods(&a.methods)?
        .into_iter()
        .map(|m| (m, m.default_config()))
        .collect::<Vec<_>>();
    let rows = harness::timing_bench(&shapes, &methods, a.repeats, a.seed)?;
    let labels: Vec<&str> = methods.iter().map(|(m, _)| m.label()).collect();
    let manifest = RunManifest::new(
        labels.join(","),
        &TransformConfig::default(),
        Some(a.seed),
        format!("shapes={} repeats={}", a.shapes, a.repeats),
    );
    report::write_timing_csv(&rows, &manifest, &a.out)?;
    announce(&a.out);
    Ok(())
}

fn ablate(a: AblateArgs) -> Result<()> {
    let pairs = (0..a.pairs)
        .map(|p| harness::gen_pair(rng::derive(a.seed, p as u64), a.channels, a.samples, a.samples))
        .collect::<Result<Vec<(FeatureMatrix, FeatureMatrix)>>>()?;

    let mut variants: Vec<(Method, bool)> = vec![(Method::IterFt, false)];
    for method in [Method::ModifiedIterFt, Method::LsFt] {
        for recenter in [true, false] {
            variants.push((method, recenter));
        }
    }

    let mut body = RunManifest::new(
        "ablate",
        &TransformConfig::default(),
        Some(a.seed),
        format!(
            "gen:unit-gaussian channels={} samples={} pairs={} iters={}",
            a.channels, a.samples, a.pairs, a.iters
        ),
    )
    .comment_block();
    body.push_str("method,recenter,mean_final_loss,failures\n");
    for (method, recenter) in variants {
        let mut cfg = method.default_config();
        cfg.iterations = a.iters;
        cfg.early_stop = false;
        cfg.recenter_each_step = recenter;
        if let Some(alpha) = a.alpha {
            cfg = cfg.with_alpha(alpha);
        }
        let mut finals = Vec::new();
        let mut failures = 0usize;
        for (fc, fs) in &pairs {
            match harness::apply_method(method, fc, fs, &cfg) {
                Ok((_, trace)) => {
                    let t = trace.expect("iterative methods always trace");
                    finals.push(t.final_loss().expect("trace has a loss").total);
                }
                Err(_) => failures += 1,
            }
        }
        let mean = if finals.is_empty() {
            f64::NAN
        } else {
            finals.iter().sum::<f64>() / finals.len() as f64
        };
        body.push_str(&format!(
            "{},{},{},{}\n",
            method.label(),
            recenter,
            report::fmt(mean),
            failures
        ));
    }
    std::fs::write(&a.out, body)
        .map_err(|e| Error::Io { path: a.out.display().to_string(), source: e })?;
    announce(&a.out);
    Ok(())
}
