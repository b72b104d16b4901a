//! Experiment engine: synthetic feature generation, method dispatch,
//! convergence aggregation, content/style-balance metrics, alpha sweeps,
//! timing benchmarks, and step-size histograms.
//!
//! There is no encoder/decoder here: the multi-layer cascade is modeled as
//! independent per-layer transformations, which is exactly the granularity
//! the convergence curves are reported at. Real exported features can be
//! substituted through the feature-file format.

use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::classic::{self, ZcaOptions};
use crate::error::{Error, Result};
use crate::feature::{centralize, frobenius_sq_diff, gram, FeatureMatrix};
use crate::linesearch;
use crate::optim::{self, TransformConfig};
use crate::rng;
use crate::trace::ConvergenceTrace;

/// Synthetic feature distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dist {
    UnitGaussian,
    ScaledGaussian { mean: f64, std: f64 },
    /// `B * W` with `B` of shape `C x rank` and `W` of shape `rank x n`,
    /// both unit Gaussian, drawn sequentially from the seed's stream.
    LowRank { rank: usize },
}

/// Deterministic seeded feature matrix. Identical `(seed, shape, dist)`
/// always reproduces the same bytes; see the random-stream module for the
/// generator definition.
pub fn gen_features(seed: u64, channels: usize, samples: usize, dist: Dist) -> Result<FeatureMatrix> {
    if channels == 0 || samples == 0 {
        return Err(Error::InvalidArgument(format!(
            "feature shape must be positive, got {channels}x{samples}"
        )));
    }
    let data = match dist {
        Dist::UnitGaussian => {
            let mut data = vec![0.0; channels * samples];
            rng::fill_normal(seed, &mut data);
            data
        }
        Dist::ScaledGaussian { mean, std } => {
            if !(mean.is_finite() && std.is_finite() && std >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "scaled gaussian needs finite mean and non-negative std, got ({mean}, {std})"
                )));
            }
            let mut data = vec![0.0; channels * samples];
            rng::fill_normal(seed, &mut data);
            for v in &mut data {
                *v = mean + std * *v;
            }
            data
        }
        Dist::LowRank { rank } => {
            if rank == 0 || rank > channels {
                return Err(Error::InvalidArgument(format!(
                    "low-rank rank {rank} must be in 1..={channels}"
                )));
            }
            let mut draws = vec![0.0; channels * rank + rank * samples];
            rng::fill_normal(seed, &mut draws);
            let (b, w) = draws.split_at(channels * rank);
            let mut data = vec![0.0; channels * samples];
            for i in 0..channels {
                for k in 0..rank {
                    let bik = b[i * rank + k];
                    let wrow = &w[k * samples..(k + 1) * samples];
                    let drow = &mut data[i * samples..(i + 1) * samples];
                    for (dv, wv) in drow.iter_mut().zip(wrow) {
                        *dv += bik * wv;
                    }
                }
            }
            data
        }
    };
    Ok(FeatureMatrix::new(channels, samples, data)?)
}

/// A seeded (content, style) pair with independent substreams.
pub fn gen_pair(seed: u64, channels: usize, n_c: usize, n_s: usize) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let fc = gen_features(rng::derive(seed, 1), channels, n_c, Dist::UnitGaussian)?;
    let fs = gen_features(rng::derive(seed, 2), channels, n_s, Dist::UnitGaussian)?;
    Ok((fc, fs))
}

/// Every transformation the harness and CLI can dispatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    AdaIn,
    AdaInAblated,
    Zca,
    ZcaGram,
    /// ZCA output blended back toward the content feature by `beta`
    /// (0 = pure content, 1 = pure ZCA).
    Interp { beta: f64 },
    IterFt,
    ModifiedIterFt,
    LsFt,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::AdaIn => "adain",
            Method::AdaInAblated => "adain-ablated",
            Method::Zca => "zca",
            Method::ZcaGram => "zca-gram",
            Method::Interp { .. } => "interp",
            Method::IterFt => "iterft",
            Method::ModifiedIterFt => "m-iterft",
            Method::LsFt => "ls-ft",
        }
    }

    pub fn is_iterative(&self) -> bool {
        matches!(self, Method::IterFt | Method::ModifiedIterFt | Method::LsFt)
    }

    /// The step-mode and iteration defaults the method was specified with.
    pub fn default_config(&self) -> TransformConfig {
        match self {
            Method::IterFt | Method::ModifiedIterFt => TransformConfig::fixed_step(),
            _ => TransformConfig::line_search(),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adain" => Ok(Method::AdaIn),
            "adain-ablated" => Ok(Method::AdaInAblated),
            "zca" => Ok(Method::Zca),
            "zca-gram" => Ok(Method::ZcaGram),
            "interp" => Ok(Method::Interp { beta: 0.5 }),
            "iterft" => Ok(Method::IterFt),
            "m-iterft" => Ok(Method::ModifiedIterFt),
            "ls-ft" => Ok(Method::LsFt),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

/// Per-model alpha presets. Fixed-step methods get the stronger weights they
/// are conventionally paired with; everything else uses the line-search table.
pub fn alpha_preset(name: &str, method: Method) -> Option<f64> {
    let fixed = matches!(method, Method::IterFt | Method::ModifiedIterFt);
    match name {
        "wct2" => Some(if fixed { 50.0 } else { 10.0 }),
        "photowct" => Some(if fixed { 0.5 } else { 0.2 }),
        "photowct2" => Some(if fixed { 2.0 } else { 1.0 }),
        "pca-d" => Some(200.0),
        _ => None,
    }
}

/// Run one transformation. Iterative methods also return their trace.
pub fn apply_method(
    method: Method,
    fc: &FeatureMatrix,
    fs: &FeatureMatrix,
    cfg: &TransformConfig,
) -> Result<(FeatureMatrix, Option<ConvergenceTrace>)> {
    let opts = ZcaOptions::default();
    match method {
        Method::AdaIn => Ok((classic::adain(fc, fs, &opts)?, None)),
        Method::AdaInAblated => Ok((classic::adain_ablated(fc, fs, &opts)?, None)),
        Method::Zca => Ok((classic::zca(fc, fs, &opts)?, None)),
        Method::ZcaGram => Ok((classic::zca_gram_ablated(fc, fs, &opts)?, None)),
        Method::Interp { beta } => {
            let stylized = classic::zca(fc, fs, &opts)?;
            Ok((classic::interpolate(&stylized, fc, beta)?, None))
        }
        Method::IterFt => optim::iterft(fc, fs, cfg).map(|(f, t)| (f, Some(t))),
        Method::ModifiedIterFt => optim::modified_iterft(fc, fs, cfg).map(|(f, t)| (f, Some(t))),
        Method::LsFt => linesearch::ls_ft(fc, fs, cfg).map(|(f, t)| (f, Some(t))),
    }
}

/// Run an iterative method over many pairs, one trace per pair with exactly
/// `iters` records (early stop disabled; stalled iterations pad the trace).
/// Per-pair failures land in the trace's `failure` field, not the batch.
pub fn convergence_experiment(
    pairs: &[(FeatureMatrix, FeatureMatrix)],
    method: Method,
    cfg: &TransformConfig,
    iters: usize,
) -> Result<Vec<ConvergenceTrace>> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("convergence experiment needs at least one pair".into()));
    }
    if !method.is_iterative() {
        return Err(Error::InvalidArgument(format!(
            "{} has no iterations to trace",
            method.label()
        )));
    }
    let mut run_cfg = cfg.clone();
    run_cfg.iterations = iters;
    run_cfg.early_stop = false;
    Ok(pairs
        .par_iter()
        .map(|(fc, fs)| match apply_method(method, fc, fs, &run_cfg) {
            Ok((_, trace)) => trace.expect("iterative methods always trace"),
            Err(e) => {
                let mut t = ConvergenceTrace::new(method.label());
                t.failure = Some(e.to_string());
                t
            }
        })
        .collect())
}

/// Pointwise mean and population standard deviation of loss across trials.
#[derive(Debug, Clone)]
pub struct AggregateCurve {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub trials: usize,
}

/// Aggregate equal-length successful traces. Failed traces are rejected so
/// the caller decides how to report them.
pub fn aggregate_traces(traces: &[ConvergenceTrace]) -> Result<AggregateCurve> {
    let ok: Vec<&ConvergenceTrace> = traces.iter().filter(|t| t.failure.is_none()).collect();
    if ok.is_empty() {
        return Err(Error::EmptyInput("no successful traces to aggregate".into()));
    }
    let len = ok[0].records.len();
    if ok.iter().any(|t| t.records.len() != len) {
        return Err(Error::ShapeMismatch("traces have unequal iteration counts".into()));
    }
    let trials = ok.len();
    let mut mean = vec![0.0; len];
    let mut std = vec![0.0; len];
    for k in 0..len {
        let m = ok.iter().map(|t| t.records[k].loss.total).sum::<f64>() / trials as f64;
        let v = ok
            .iter()
            .map(|t| {
                let d = t.records[k].loss.total - m;
                d * d
            })
            .sum::<f64>()
            / trials as f64;
        mean[k] = m;
        std[k] = v.sqrt();
    }
    Ok(AggregateCurve { mean, std, trials })
}

/// The two balance metrics: content distance on the deepest layer's
/// centralized features, and the summed per-layer Gram distances to the
/// style. Expects exactly four layers ordered shallow to deep.
pub fn content_style_losses(
    sty: &[FeatureMatrix],
    content: &[FeatureMatrix],
    style: &[FeatureMatrix],
) -> Result<(f64, f64)> {
    for (name, list) in [("stylized", sty), ("content", content), ("style", style)] {
        if list.len() != 4 {
            return Err(Error::MissingLayer(format!(
                "{name} has {} layers, need 4",
                list.len()
            )));
        }
    }
    let (sty4, _) = centralize(&sty[3]);
    let (c4, _) = centralize(&content[3]);
    if !sty4.same_shape(&c4) {
        return Err(Error::ShapeMismatch("layer-4 stylized and content shapes differ".into()));
    }
    let content_loss = frobenius_sq_diff(sty4.data(), c4.data());
    let mut style_loss = 0.0;
    for n in 0..4 {
        if sty[n].channels() != style[n].channels() {
            return Err(Error::ShapeMismatch(format!(
                "layer {} channel counts differ",
                n + 1
            )));
        }
        let (sty_bar, _) = centralize(&sty[n]);
        let (s_bar, _) = centralize(&style[n]);
        let g_sty = gram(&sty_bar, sty_bar.samples());
        let g_s = gram(&s_bar, s_bar.samples());
        style_loss += frobenius_sq_diff(g_sty.data(), g_s.data());
    }
    Ok((content_loss, style_loss))
}

/// One layer of a synthetic multi-layer schedule.
#[derive(Debug, Clone)]
pub struct LayerSpec {
    pub label: String,
    pub channels: usize,
    pub content_samples: usize,
    pub style_samples: usize,
}

/// Ordered per-layer feature shapes standing in for an encoder cascade.
#[derive(Debug, Clone)]
pub struct LayerSchedule {
    pub layers: Vec<LayerSpec>,
}

impl LayerSchedule {
    /// Four layers with the conventional channel widths 64/128/256/512 and
    /// spatial size quartered per level (x2 downscale per dimension).
    /// `base_samples` is the shallowest layer's sample count.
    pub fn vgg_like(base_samples: usize) -> Self {
        let layers = (0..4)
            .map(|level| {
                let n = (base_samples / 4usize.pow(level)).max(1);
                LayerSpec {
                    label: format!("layer{}", level + 1),
                    channels: 64 << level,
                    content_samples: n,
                    style_samples: n,
                }
            })
            .collect();
        Self { layers }
    }
}

/// One layer's inputs, output, and (for iterative methods) trace.
#[derive(Debug, Clone)]
pub struct LayerRun {
    pub label: String,
    pub content: FeatureMatrix,
    pub style: FeatureMatrix,
    pub output: FeatureMatrix,
    pub trace: Option<ConvergenceTrace>,
}

/// Apply a method independently to every layer of a seeded schedule.
pub fn layer_schedule_run(
    schedule: &LayerSchedule,
    method: Method,
    cfg: &TransformConfig,
    seed: u64,
) -> Result<Vec<LayerRun>> {
    if schedule.layers.is_empty() {
        return Err(Error::EmptyInput("schedule has no layers".into()));
    }
    schedule
        .layers
        .iter()
        .enumerate()
        .map(|(idx, spec)| {
            let run = || -> Result<LayerRun> {
                let layer_seed = rng::derive(seed, 100 + idx as u64);
                let fc = gen_features(
                    rng::derive(layer_seed, 1),
                    spec.channels,
                    spec.content_samples,
                    Dist::UnitGaussian,
                )?;
                let fs = gen_features(
                    rng::derive(layer_seed, 2),
                    spec.channels,
                    spec.style_samples,
                    Dist::UnitGaussian,
                )?;
                let (output, mut trace) = apply_method(method, &fc, &fs, cfg)?;
                if let Some(t) = &mut trace {
                    t.layer = spec.label.clone();
                    t.seed = Some(seed);
                }
                Ok(LayerRun { label: spec.label.clone(), content: fc, style: fs, output, trace })
            };
            run().map_err(|e| Error::LayerFailed { layer: spec.label.clone(), source: Box::new(e) })
        })
        .collect()
}

/// Mean content and style losses at one alpha.
#[derive(Debug, Clone, Copy)]
pub struct BalancePoint {
    pub alpha: f64,
    pub mean_content_loss: f64,
    pub mean_style_loss: f64,
}

/// Sweep the style-weight multiplier over seeded pairs, reporting mean
/// single-layer content and style losses at each value.
pub fn alpha_sweep(
    pairs: &[(FeatureMatrix, FeatureMatrix)],
    method: Method,
    cfg: &TransformConfig,
    alphas: &[f64],
) -> Result<Vec<BalancePoint>> {
    if alphas.is_empty() {
        return Err(Error::EmptyInput("alpha sweep needs at least one alpha".into()));
    }
    if pairs.is_empty() {
        return Err(Error::EmptyInput("alpha sweep needs at least one pair".into()));
    }
    alphas
        .iter()
        .map(|&alpha| {
            let cfg = cfg.clone().with_alpha(alpha);
            let losses: Vec<(f64, f64)> = pairs
                .par_iter()
                .map(|(fc, fs)| {
                    let (out, _) = apply_method(method, fc, fs, &cfg)?;
                    let (out_bar, _) = centralize(&out);
                    let (fc_bar, _) = centralize(fc);
                    let (fs_bar, _) = centralize(fs);
                    let content = frobenius_sq_diff(out_bar.data(), fc_bar.data());
                    let g_out = gram(&out_bar, out_bar.samples());
                    let g_s = gram(&fs_bar, fs_bar.samples());
                    let style = frobenius_sq_diff(g_out.data(), g_s.data());
                    Ok((content, style))
                })
                .collect::<Result<_>>()?;
            let n = losses.len() as f64;
            Ok(BalancePoint {
                alpha,
                mean_content_loss: losses.iter().map(|l| l.0).sum::<f64>() / n,
                mean_style_loss: losses.iter().map(|l| l.1).sum::<f64>() / n,
            })
        })
        .collect()
}

/// Median wall time of one method at one shape.
#[derive(Debug, Clone)]
pub struct TimingRow {
    pub shape: String,
    pub channels: usize,
    pub samples: usize,
    pub method: String,
    pub median_seconds: f64,
}

/// Feature-map analogs of common image resolutions at 64 channels: the
/// spatial size divided by 16 (a /4-per-dimension encoder stride).
pub fn resolution_shapes() -> Vec<(String, usize, usize)> {
    vec![
        ("hd".into(), 64, 1280 * 720 / 16),
        ("fhd".into(), 64, 1920 * 1080 / 16),
        ("qhd".into(), 64, 2560 * 1440 / 16),
        ("uhd".into(), 64, 3840 * 2160 / 16),
    ]
}

/// Median-of-`repeats` wall time per (shape, method), two warm-up runs
/// excluded, everything sequential to keep the numbers contention-free.
pub fn timing_bench(
    shapes: &[(String, usize, usize)],
    methods: &[(Method, TransformConfig)],
    repeats: usize,
    seed: u64,
) -> Result<Vec<TimingRow>> {
    if repeats < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 repeats, got {repeats}")));
    }
    let mut rows = Vec::new();
    for (shape_idx, (label, c, n)) in shapes.iter().enumerate() {
        let (fc, fs) = gen_pair(rng::derive(seed, shape_idx as u64), *c, *n, *n)?;
        for (method, cfg) in methods {
            for _ in 0..2 {
                apply_method(*method, &fc, &fs, cfg)?;
            }
            let mut times: Vec<f64> = (0..repeats)
                .map(|_| {
                    let tick = Instant::now();
                    apply_method(*method, &fc, &fs, cfg).map(|_| tick.elapsed().as_secs_f64())
                })
                .collect::<Result<_>>()?;
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = if repeats % 2 == 1 {
                times[repeats / 2]
            } else {
                0.5 * (times[repeats / 2 - 1] + times[repeats / 2])
            };
            rows.push(TimingRow {
                shape: label.clone(),
                channels: *c,
                samples: *n,
                method: method.label().to_string(),
                median_seconds: median,
            });
        }
    }
    Ok(rows)
}

/// Fixed-width histogram of observed step sizes.
#[derive(Debug, Clone)]
pub struct Histogram {
    /// `bins + 1` ascending edges from 0 to the largest observation.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

pub const ETA_HISTOGRAM_BINS: usize = 40;

/// Histogram of all step sizes recorded in the given traces, 40 bins over
/// `[0, max eta]`; the maximum lands in the last bin.
pub fn eta_histogram(traces: &[ConvergenceTrace]) -> Result<Histogram> {
    let etas: Vec<f64> = traces.iter().flat_map(|t| t.etas()).collect();
    if etas.is_empty() {
        return Err(Error::EmptyInput("no step sizes recorded in these traces".into()));
    }
    let max = etas.iter().fold(0.0f64, |a, &v| a.max(v));
    let bins = ETA_HISTOGRAM_BINS;
    let width = max / bins as f64;
    let edges = (0..=bins).map(|i| i as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for &eta in &etas {
        let idx = if width > 0.0 { ((eta / width) as usize).min(bins - 1) } else { 0 };
        counts[idx] += 1;
    }
    Ok(Histogram { edges, counts })
}
