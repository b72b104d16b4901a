//! Exact line search along the gradient direction.
//!
//! With iterate `Ft`, direction `D`, and Gram difference
//! `S = (1/nc) Ft Ft^T - (1/ns) Fs Fs^T`, the step objective
//! `phi(eta) = l(Ft - eta D)` is an explicit quartic in `eta`, so its
//! derivative is a cubic `phi'(eta) = 2(a eta^3 + b eta^2 + c eta + d)`
//! whose positive roots are the candidate exact minimizers. With
//! `D2 = D D^T` and `DF = D Ft^T`:
//!
//! ```text
//! a = (2 lambda / nc^2) tr[D2 D2]
//! b = -(6 lambda / nc^2) tr[DF D2]
//! c = tr[D2] + (2 lambda / nc) tr[D2 S]
//!            + (2 lambda / nc^2) (tr[DF DF] + tr[DF DF^T])
//! d = -(tr[D (Ft - Fc)^T] + (2 lambda / nc) tr[S DF])
//! ```
//!
//! When `D` is the exact gradient, `d = -tr[D2] / 2 < 0`; the product of the
//! cubic's roots is `-d / a > 0` and their pairwise-sum structure guarantees
//! at least one positive real root, so the search cannot come up empty on a
//! non-stationary iterate.

use crate::error::{Error, Result};
use crate::feature::{
    centralize, decentralize, frobenius_sq, frobenius_sq_diff, gram, trace_product_raw,
    FeatureMatrix, SymMatrix,
};
use crate::linalg;
use crate::optim::{self, EtaMode, TransformConfig};
use crate::trace::ConvergenceTrace;

/// Relative threshold below which the leading coefficient is treated as zero
/// and the cubic degrades to a quadratic (then linear) solve.
const DEGREE_DROP_TOL: f64 = 1e-14;

/// Cubic coefficients of half the step-objective derivative, together with
/// the cached traces needed to evaluate the full quartic in O(1).
///
/// `d` is computed as `-tr[D2] / 2`, the gradient-direction form; the
/// direction passed in must therefore be the exact gradient at `ft`.
#[derive(Debug, Clone)]
pub struct CubicCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub tr_d2: f64,
    pub tr_d2d2: f64,
    pub tr_df_d2: f64,
    pub tr_d2s: f64,
    pub tr_dfdf: f64,
    pub tr_dfdft: f64,
    lambda: f64,
    n_c: f64,
    content0: f64,
    style0: f64,
    tr_dr: f64,
    tr_dfs: f64,
}

impl CubicCoefficients {
    /// Evaluate the step objective `phi(eta)` from the cached traces.
    pub fn phi_at(&self, eta: f64) -> f64 {
        let (content, style) = self.parts_at(eta);
        content + self.lambda * style
    }

    /// Content and style terms of `phi(eta)` separately (style pre-lambda).
    pub(crate) fn parts_at(&self, eta: f64) -> (f64, f64) {
        let n = self.n_c;
        let content = self.content0 - 2.0 * eta * self.tr_dr + eta * eta * self.tr_d2;
        let style = self.style0 - 4.0 * eta / n * self.tr_dfs
            + eta * eta * (2.0 / n * self.tr_d2s + 2.0 / (n * n) * (self.tr_dfdf + self.tr_dfdft))
            - 4.0 * eta.powi(3) / (n * n) * self.tr_df_d2
            + eta.powi(4) / (n * n) * self.tr_d2d2;
        (content, style)
    }

    /// `phi'(eta) / 2`, the cubic whose roots are the candidate steps.
    pub fn half_derivative_at(&self, eta: f64) -> f64 {
        ((self.a * eta + self.b) * eta + self.c) * eta + self.d
    }
}

/// The outcome of one exact line search.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub eta: f64,
    pub phi_before: f64,
    pub phi_after: f64,
    pub real_roots: Vec<f64>,
    pub positive_roots_considered: Vec<f64>,
}

fn coefficients_raw(
    d: &[f64],
    ft: &[f64],
    s: &[f64],
    lambda: f64,
    n_c: usize,
    order: usize,
    content0: f64,
    style0: f64,
    tr_dr: f64,
    tr_d2: f64,
) -> CubicCoefficients {
    let n = n_c as f64;
    let cols = d.len() / order;
    let mut d2 = vec![0.0; order * order];
    linalg::syrk_aat(d, order, cols, 1.0, &mut d2);
    let mut df = vec![0.0; order * order];
    linalg::gemm_abt(d, ft, order, cols, 1.0, &mut df);

    let tr_dfs = trace_product_raw(s, &df, order);
    let tr_d2s = trace_product_raw(&d2, s, order);
    let tr_dfdf = trace_product_raw(&df, &df, order);
    let tr_dfdft = frobenius_sq(&df);
    let tr_df_d2 = trace_product_raw(&df, &d2, order);
    let tr_d2d2 = frobenius_sq(&d2);

    CubicCoefficients {
        a: 2.0 * lambda / (n * n) * tr_d2d2,
        b: -6.0 * lambda / (n * n) * tr_df_d2,
        c: tr_d2 + 2.0 * lambda / n * tr_d2s + 2.0 * lambda / (n * n) * (tr_dfdf + tr_dfdft),
        d: -0.5 * tr_d2,
        tr_d2,
        tr_d2d2,
        tr_df_d2,
        tr_d2s,
        tr_dfdf,
        tr_dfdft,
        lambda,
        n_c: n,
        content0,
        style0,
        tr_dr,
        tr_dfs,
    }
}

/// Build the cubic coefficients for descending from `ft` along direction `d`.
/// `s` must be the Gram difference the style term is measured against, with
/// `ft`'s own pixel count as the content-side divisor.
pub fn cubic_coefficients(
    d: &FeatureMatrix,
    ft: &FeatureMatrix,
    fc: &FeatureMatrix,
    s: &SymMatrix,
    lambda: f64,
) -> Result<CubicCoefficients> {
    if !d.same_shape(ft) || !d.same_shape(fc) {
        return Err(Error::ShapeMismatch("direction, iterate, and content must agree".into()));
    }
    if s.order() != ft.channels() {
        return Err(Error::ShapeMismatch(format!(
            "gram difference order {} does not match {} channels",
            s.order(),
            ft.channels()
        )));
    }
    let content0 = frobenius_sq_diff(ft.data(), fc.data());
    let style0 = frobenius_sq(s.data());
    let tr_dr: f64 = d
        .data()
        .iter()
        .zip(ft.data().iter().zip(fc.data()))
        .map(|(dv, (t, c))| dv * (t - c))
        .sum();
    let tr_d2 = frobenius_sq(d.data());
    Ok(coefficients_raw(
        d.data(),
        ft.data(),
        s.data(),
        lambda,
        ft.samples(),
        ft.channels(),
        content0,
        style0,
        tr_dr,
        tr_d2,
    ))
}

/// Direct evaluation of the step objective `l(ft - eta * d)`; the reference
/// the cached-trace evaluation is validated against.
pub fn phi(
    ft: &FeatureMatrix,
    fc: &FeatureMatrix,
    fs: &FeatureMatrix,
    d: &FeatureMatrix,
    lambda: f64,
    eta: f64,
) -> Result<f64> {
    if !d.same_shape(ft) {
        return Err(Error::ShapeMismatch("direction must match the iterate".into()));
    }
    let stepped: Vec<f64> =
        ft.data().iter().zip(d.data()).map(|(t, dv)| t - eta * dv).collect();
    let stepped = FeatureMatrix::new(ft.channels(), ft.samples(), stepped)?;
    Ok(optim::total_loss(&stepped, fc, fs, lambda)?.total)
}

fn polish(root: f64, a: f64, b: f64, c: f64, d: f64) -> f64 {
    // One Newton round sharpens roots from the closed-form branches, which
    // lose digits when coefficients span many orders of magnitude.
    let p = ((a * root + b) * root + c) * root + d;
    let dp = (3.0 * a * root + 2.0 * b) * root + c;
    if dp == 0.0 {
        return root;
    }
    let refined = root - p / dp;
    let rp = ((a * refined + b) * refined + c) * refined + d;
    if refined.is_finite() && rp.abs() <= p.abs() {
        refined
    } else {
        root
    }
}

/// All real roots of `a x^3 + b x^2 + c x + d = 0`, ascending. A leading
/// coefficient that is negligible against the rest drops the degree instead
/// of poisoning the solve.
pub fn solve_cubic(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let mut roots = if a.abs() <= DEGREE_DROP_TOL * b.abs().max(c.abs()).max(d.abs()) {
        if b.abs() <= DEGREE_DROP_TOL * c.abs().max(d.abs()) {
            if c == 0.0 {
                Vec::new()
            } else {
                vec![-d / c]
            }
        } else {
            let disc = c * c - 4.0 * b * d;
            if disc < 0.0 {
                Vec::new()
            } else {
                let sq = disc.sqrt();
                vec![(-c + sq) / (2.0 * b), (-c - sq) / (2.0 * b)]
            }
        }
    } else {
        // Monic then depressed: x = y - p/3 turns x^3 + p x^2 + q x + r into
        // y^3 + P y + Q.
        let p = b / a;
        let q = c / a;
        let r = d / a;
        let big_p = q - p * p / 3.0;
        let big_q = 2.0 * p * p * p / 27.0 - p * q / 3.0 + r;
        let disc = -4.0 * big_p * big_p * big_p - 27.0 * big_q * big_q;
        let shift = -p / 3.0;
        if disc > 0.0 {
            // Three real roots: the trigonometric branch (big_p < 0 here).
            let m = 2.0 * (-big_p / 3.0).sqrt();
            let arg = (3.0 * big_q / (big_p * m)).clamp(-1.0, 1.0);
            let theta = arg.acos() / 3.0;
            (0..3)
                .map(|k| {
                    m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + shift
                })
                .collect()
        } else {
            // One real root: Cardano.
            let s = (big_q * big_q / 4.0 + big_p * big_p * big_p / 27.0).max(0.0).sqrt();
            let y = (-big_q / 2.0 + s).cbrt() + (-big_q / 2.0 - s).cbrt();
            vec![y + shift]
        }
    };
    for r in &mut roots {
        *r = polish(*r, a, b, c, d);
    }
    roots.retain(|r| r.is_finite());
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    roots
}

/// Solve the cubic and return the positive root with the lowest objective.
pub fn select_step(coeffs: &CubicCoefficients) -> Result<StepResult> {
    let (a, b, c, d) = (coeffs.a, coeffs.b, coeffs.c, coeffs.d);
    if a == 0.0 && b == 0.0 && c == 0.0 && d == 0.0 {
        return Err(Error::DegenerateGradient);
    }
    let real_roots = solve_cubic(a, b, c, d);
    let mut best: Option<(f64, f64)> = None;
    let mut considered = Vec::new();
    for &r in &real_roots {
        if r <= 0.0 {
            continue;
        }
        considered.push(r);
        let value = coeffs.phi_at(r);
        if best.map_or(true, |(_, v)| value < v) {
            best = Some((r, value));
        }
    }
    let Some((eta, phi_after)) = best else {
        return Err(Error::NoPositiveRoot { a, b, c, d });
    };
    Ok(StepResult {
        eta,
        phi_before: coeffs.phi_at(0.0),
        phi_after,
        real_roots,
        positive_roots_considered: considered,
    })
}

/// Returns the selected step plus the closed-form content/style terms at it,
/// so the caller can record the post-step loss without another Gram pass.
pub(crate) fn line_search_step(
    d: &[f64],
    ft: &[f64],
    s: &[f64],
    lambda: f64,
    n_c: usize,
    order: usize,
    content0: f64,
    style0: f64,
    tr_dr: f64,
    tr_d2: f64,
) -> Result<(StepResult, f64, f64)> {
    let coeffs = coefficients_raw(d, ft, s, lambda, n_c, order, content0, style0, tr_dr, tr_d2);
    let step = select_step(&coeffs)?;
    let (content_after, style_after) = coeffs.parts_at(step.eta);
    Ok((step, content_after, style_after))
}

/// The line-search transformation: centralize, take exact line-search steps
/// along the gradient (one by default), then decentralize by the style mean.
pub fn ls_ft(
    fc: &FeatureMatrix,
    fs: &FeatureMatrix,
    cfg: &TransformConfig,
) -> Result<(FeatureMatrix, ConvergenceTrace)> {
    cfg.validate()?;
    if cfg.eta_mode != EtaMode::LineSearch {
        return Err(Error::InvalidArgument("ls_ft requires line-search step mode".into()));
    }
    if fc.channels() != fs.channels() {
        return Err(Error::ShapeMismatch(format!(
            "content has {} channels, style has {}",
            fc.channels(),
            fs.channels()
        )));
    }
    let (fc_bar, _) = centralize(fc);
    let (fs_bar, mu_s) = centralize(fs);
    let g_s = gram(&fs_bar, fs.samples());
    let lambda = optim::resolve(cfg, &fc_bar, &g_s)?;
    let ft0 = optim::perturbed(fc_bar.clone(), cfg.perturb_start, true);
    let mut trace = ConvergenceTrace::new("ls-ft");
    let out_bar = optim::run_descent(
        optim::DescentSetup {
            ft0,
            fc: &fc_bar,
            g_s,
            lambda,
            recenter: cfg.recenter_each_step,
            line_search: true,
            start_at_content: cfg.perturb_start.is_none(),
        },
        cfg,
        &mut trace,
    )?;
    let out = decentralize(&out_bar, &mu_s)?;
    Ok((out, trace))
}
