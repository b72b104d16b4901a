//! CSV report emission. Every report opens with a `#`-commented manifest
//! block so the file is self-describing and re-runnable, followed by a
//! header row and the data. Floats are printed with 17 significant digits,
//! which round-trips f64 exactly.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::{AggregateCurve, BalancePoint, Histogram, TimingRow};
use crate::optim::{EtaMode, LambdaMode, TransformConfig};
use crate::trace::ConvergenceTrace;

/// Provenance embedded at the top of every report.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub method: String,
    pub config: String,
    pub seed: Option<u64>,
    /// Input file paths or generator specs.
    pub inputs: String,
    pub version: String,
}

impl RunManifest {
    pub fn new(
        method: impl Into<String>,
        cfg: &TransformConfig,
        seed: Option<u64>,
        inputs: impl Into<String>,
    ) -> Self {
        Self {
            method: method.into(),
            config: describe_config(cfg),
            seed,
            inputs: inputs.into(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub(crate) fn comment_block(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        format!(
            "# method: {}\n# config: {}\n# seed: {}\n# inputs: {}\n# version: {}\n",
            self.method, self.config, seed, self.inputs, self.version
        )
    }
}

/// Key=value summary of a configuration, stable field order.
pub fn describe_config(cfg: &TransformConfig) -> String {
    let lambda = match cfg.lambda_mode {
        LambdaMode::Explicit(l) => format!("lambda={}", fmt(l)),
        LambdaMode::Auto { alpha } => format!("alpha={}", fmt(alpha)),
    };
    let eta = match cfg.eta_mode {
        EtaMode::Fixed(e) => format!("eta={}", fmt(e)),
        EtaMode::LineSearch => "eta=line-search".to_string(),
    };
    format!(
        "{lambda} {eta} iterations={} recenter={} grad_tol={} early_stop={}",
        cfg.iterations,
        cfg.recenter_each_step,
        fmt(cfg.grad_tol),
        cfg.early_stop
    )
}

/// 17 significant digits; parses back to the identical f64.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write(path: &Path, body: String) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

/// Columns: iteration, mean_loss, std_loss. Iterations are 1-based.
pub fn write_convergence_csv(
    curve: &AggregateCurve,
    manifest: &RunManifest,
    path: impl AsRef<Path>,
) -> Result<()> {
    if curve.mean.is_empty() {
        return Err(Error::EmptyInput("convergence curve has no iterations".into()));
    }
    let mut body = manifest.comment_block();
    body.push_str(&format!("# trials: {}\n", curve.trials));
    body.push_str("iteration,mean_loss,std_loss\n");
    for (k, (m, s)) in curve.mean.iter().zip(&curve.std).enumerate() {
        body.push_str(&format!("{},{},{}\n", k + 1, fmt(*m), fmt(*s)));
    }
    write(path.as_ref(), body)
}

/// Columns: alpha, content_loss, style_loss.
pub fn write_balance_csv(
    points: &[BalancePoint],
    manifest: &RunManifest,
    path: impl AsRef<Path>,
) -> Result<()> {
    if points.is_empty() {
        return Err(Error::EmptyInput("balance sweep has no points".into()));
    }
    let mut body = manifest.comment_block();
    body.push_str("alpha,content_loss,style_loss\n");
    for p in points {
        body.push_str(&format!(
            "{},{},{}\n",
            fmt(p.alpha),
            fmt(p.mean_content_loss),
            fmt(p.mean_style_loss)
        ));
    }
    write(path.as_ref(), body)
}

/// Columns: shape, method, median_seconds.
pub fn write_timing_csv(
    rows: &[TimingRow],
    manifest: &RunManifest,
    path: impl AsRef<Path>,
) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("timing table has no rows".into()));
    }
    let mut body = manifest.comment_block();
    body.push_str("shape,method,median_seconds\n");
    for r in rows {
        body.push_str(&format!("{},{},{}\n", r.shape, r.method, fmt(r.median_seconds)));
    }
    write(path.as_ref(), body)
}

/// Columns: bin_lo, bin_hi, count.
pub fn write_histogram_csv(
    hist: &Histogram,
    manifest: &RunManifest,
    path: impl AsRef<Path>,
) -> Result<()> {
    if hist.counts.is_empty() {
        return Err(Error::EmptyInput("histogram has no bins".into()));
    }
    let mut body = manifest.comment_block();
    body.push_str("bin_lo,bin_hi,count\n");
    for (i, count) in hist.counts.iter().enumerate() {
        body.push_str(&format!("{},{},{}\n", fmt(hist.edges[i]), fmt(hist.edges[i + 1]), count));
    }
    write(path.as_ref(), body)
}

/// Columns: iteration, loss, content_part, style_part, eta (empty when the
/// iteration took no step).
pub fn write_trace_csv(
    trace: &ConvergenceTrace,
    manifest: &RunManifest,
    path: impl AsRef<Path>,
) -> Result<()> {
    if trace.records.is_empty() {
        return Err(Error::EmptyInput("trace has no iterations".into()));
    }
    let mut body = manifest.comment_block();
    body.push_str("iteration,loss,content_part,style_part,eta\n");
    for (k, r) in trace.records.iter().enumerate() {
        let eta = r.eta.map(fmt).unwrap_or_default();
        body.push_str(&format!(
            "{},{},{},{},{}\n",
            k + 1,
            fmt(r.loss.total),
            fmt(r.loss.content_part),
            fmt(r.loss.style_part),
            eta
        ));
    }
    write(path.as_ref(), body)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> RunManifest {
        RunManifest::new("ls-ft", &TransformConfig::default(), Some(42), "gen:unit-gaussian")
    }

    fn data_lines(csv: &str) -> Vec<&str> {
        csv.lines().filter(|l| !l.starts_with('#')).collect()
    }

    #[test]
    fn fmt_round_trips_f64_exactly() {
        for v in [0.0, 1.0, -3.5, 0.1, 1e-300, 6.02214076e23, std::f64::consts::PI] {
            let s = fmt(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v} printed as {s}");
        }
    }

    #[test]
    fn one_row_curve_is_two_line_body() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let curve = AggregateCurve { mean: vec![2.5], std: vec![0.5], trials: 3 };
        write_convergence_csv(&curve, &manifest(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines = data_lines(&text);
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "iteration,mean_loss,std_loss");
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields[0], "1");
        assert_eq!(fields[1].parse::<f64>().unwrap(), 2.5);
        assert_eq!(fields[2].parse::<f64>().unwrap(), 0.5);
    }

    #[test]
    fn manifest_block_present_and_commented() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let curve = AggregateCurve { mean: vec![1.0], std: vec![0.0], trials: 1 };
        write_convergence_csv(&curve, &manifest(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# method: ls-ft\n"));
        assert!(text.contains("# seed: 42"));
        assert!(text.contains("# version: "));
        assert!(text.contains("# inputs: gen:unit-gaussian"));
    }

    #[test]
    fn balance_csv_reparses_to_full_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        let points = vec![
            BalancePoint { alpha: 0.2, mean_content_loss: 1.0 / 3.0, mean_style_loss: 2.0 / 7.0 },
            BalancePoint { alpha: 200.0, mean_content_loss: 1e-17, mean_style_loss: 9.9e99 },
        ];
        write_balance_csv(&points, &manifest(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines = data_lines(&text);
        assert_eq!(lines[0], "alpha,content_loss,style_loss");
        for (line, p) in lines[1..].iter().zip(&points) {
            let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            assert_eq!(f[0].to_bits(), p.alpha.to_bits());
            assert_eq!(f[1].to_bits(), p.mean_content_loss.to_bits());
            assert_eq!(f[2].to_bits(), p.mean_style_loss.to_bits());
        }
    }

    #[test]
    fn timing_and_histogram_schemas() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![TimingRow {
            shape: "fhd".into(),
            channels: 64,
            samples: 129600,
            method: "ls-ft".into(),
            median_seconds: 0.25,
        }];
        let tp = dir.path().join("t.csv");
        write_timing_csv(&rows, &manifest(), &tp).unwrap();
        let text = std::fs::read_to_string(&tp).unwrap();
        let lines = data_lines(&text);
        assert_eq!(lines[0], "shape,method,median_seconds");
        assert!(lines[1].starts_with("fhd,ls-ft,"));

        let hist = Histogram { edges: vec![0.0, 0.25, 0.5], counts: vec![1, 3] };
        let hp = dir.path().join("h.csv");
        write_histogram_csv(&hist, &manifest(), &hp).unwrap();
        let text = std::fs::read_to_string(&hp).unwrap();
        let lines = data_lines(&text);
        assert_eq!(lines[0], "bin_lo,bin_hi,count");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].ends_with(",3"));
    }

    #[test]
    fn empty_reports_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        let curve = AggregateCurve { mean: vec![], std: vec![], trials: 0 };
        assert!(write_convergence_csv(&curve, &manifest(), &p).is_err());
        assert!(write_balance_csv(&[], &manifest(), &p).is_err());
        assert!(write_timing_csv(&[], &manifest(), &p).is_err());
    }
}
