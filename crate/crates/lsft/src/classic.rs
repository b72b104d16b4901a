//! Closed-form baseline transformations: AdaIN, ZCA, their
//! centralization-ablated gram variants, and the linear-interpolation control.

use crate::error::{Error, Result};
use crate::feature::{centralize, decentralize, gram, FeatureMatrix, SquareMatrix, SymMatrix};
use crate::linalg;

/// Eigendecomposition of a symmetric matrix: eigenvalues descending, column
/// `i` of `eigenvectors` paired with eigenvalue `i`.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: SquareMatrix,
}

impl EigDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &SquareMatrix {
        &self.eigenvectors
    }

    /// `V diag(f(lambda)) V^T`.
    pub fn reassemble(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let c = self.eigenvalues.len();
        let v = self.eigenvectors.data();
        // W = V * diag(f(lambda)): scale column k by f(lambda_k).
        let mut w = vec![0.0; c * c];
        for i in 0..c {
            for k in 0..c {
                w[i * c + k] = v[i * c + k] * f(self.eigenvalues[k]);
            }
        }
        // out = W * V^T
        let mut out = vec![0.0; c * c];
        linalg::gemm_abt(&w, v, c, c, 1.0, &mut out);
        // Rotations leave tiny asymmetry; force exact symmetry.
        for i in 0..c {
            for j in (i + 1)..c {
                let avg = 0.5 * (out[i * c + j] + out[j * c + i]);
                out[i * c + j] = avg;
                out[j * c + i] = avg;
            }
        }
        SymMatrix::from_parts_unchecked(c, out)
    }
}

/// Regularization knobs for the whitening path.
#[derive(Debug, Clone, Copy)]
pub struct ZcaOptions {
    /// Eigenvalue floor, applied as `eigen_clamp * trace / C`.
    pub eigen_clamp: f64,
    /// Guard added inside the square roots of the AdaIN scale.
    pub std_epsilon: f64,
}

impl Default for ZcaOptions {
    fn default() -> Self {
        Self { eigen_clamp: 1e-8, std_epsilon: 0.0 }
    }
}

impl ZcaOptions {
    pub fn exact() -> Self {
        Self { eigen_clamp: 0.0, std_epsilon: 0.0 }
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_TOL: f64 = 1e-12;

/// Eigendecomposition by cyclic Jacobi sweeps with a fixed (row-wise) element
/// order. Converges when the off-diagonal Frobenius norm drops below
/// `1e-12` times the diagonal Frobenius norm.
pub fn sym_eig(m: &SymMatrix) -> Result<EigDecomposition> {
    let c = m.order();
    let mut a = m.data().to_vec();
    let mut v = vec![0.0; c * c];
    for i in 0..c {
        v[i * c + i] = 1.0;
    }

    let norms = |a: &[f64]| {
        let mut off = 0.0;
        let mut diag = 0.0;
        for i in 0..c {
            for j in 0..c {
                let x = a[i * c + j] * a[i * c + j];
                if i == j {
                    diag += x;
                } else {
                    off += x;
                }
            }
        }
        (off.sqrt(), diag.sqrt())
    };

    let mut sweeps = 0;
    loop {
        let (off, diag) = norms(&a);
        if off <= JACOBI_REL_TOL * diag {
            break;
        }
        if sweeps >= JACOBI_MAX_SWEEPS {
            return Err(Error::EigenNoConvergence { sweeps, residual: off });
        }
        for p in 0..c {
            for q in (p + 1)..c {
                let apq = a[p * c + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * c + p];
                let aqq = a[q * c + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let cos = 1.0 / (t * t + 1.0).sqrt();
                let sin = t * cos;

                // Rotate rows/columns p and q of A.
                for k in 0..c {
                    let akp = a[k * c + p];
                    let akq = a[k * c + q];
                    a[k * c + p] = cos * akp - sin * akq;
                    a[k * c + q] = sin * akp + cos * akq;
                }
                for k in 0..c {
                    let apk = a[p * c + k];
                    let aqk = a[q * c + k];
                    a[p * c + k] = cos * apk - sin * aqk;
                    a[q * c + k] = sin * apk + cos * aqk;
                }
                // Accumulate the rotation into V (columns are eigenvectors).
                for k in 0..c {
                    let vkp = v[k * c + p];
                    let vkq = v[k * c + q];
                    v[k * c + p] = cos * vkp - sin * vkq;
                    v[k * c + q] = sin * vkp + cos * vkq;
                }
            }
        }
        sweeps += 1;
    }

    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&i, &j| a[j * c + j].partial_cmp(&a[i * c + i]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i * c + i]).collect();
    let mut vectors = vec![0.0; c * c];
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..c {
            vectors[k * c + new_col] = v[k * c + old_col];
        }
    }
    Ok(EigDecomposition {
        eigenvalues,
        eigenvectors: SquareMatrix::new(c, vectors)?,
    })
}

/// `M^p` for symmetric PSD `M`, with eigenvalues floored at
/// `eigen_clamp * trace / C` before taking the power.
pub fn matrix_power_sym(m: &SymMatrix, p: f64, opts: &ZcaOptions) -> Result<SymMatrix> {
    let eig = sym_eig(m)?;
    let c = m.order() as f64;
    let clamp = opts.eigen_clamp * m.trace() / c;
    if p < 0.0 {
        let worst = eig.eigenvalues().iter().fold(f64::INFINITY, |a, &l| a.min(l.max(clamp)));
        if worst <= 0.0 {
            return Err(Error::Singular(format!(
                "negative power {p} with eigenvalue floor {worst:e}"
            )));
        }
    }
    Ok(eig.reassemble(|l| l.max(clamp).powf(p)))
}

fn check_channels(fc: &FeatureMatrix, fs: &FeatureMatrix) -> Result<()> {
    if fc.channels() != fs.channels() {
        return Err(Error::ShapeMismatch(format!(
            "content has {} channels, style has {}",
            fc.channels(),
            fs.channels()
        )));
    }
    Ok(())
}

fn channel_stds(f_bar: &FeatureMatrix) -> Vec<f64> {
    let n = f_bar.samples() as f64;
    (0..f_bar.channels())
        .map(|i| (f_bar.row(i).iter().map(|v| v * v).sum::<f64>() / n).sqrt())
        .collect()
}

/// Per-channel mean and standard-deviation matching.
pub fn adain(fc: &FeatureMatrix, fs: &FeatureMatrix, opts: &ZcaOptions) -> Result<FeatureMatrix> {
    check_channels(fc, fs)?;
    let (fc_bar, _) = centralize(fc);
    let (fs_bar, mu_s) = centralize(fs);
    let sigma_c = channel_stds(&fc_bar);
    let sigma_s = channel_stds(&fs_bar);
    let mut data = fc_bar.data().to_vec();
    for i in 0..fc.channels() {
        let denom = sigma_c[i] * sigma_c[i] + opts.std_epsilon;
        let scale = if denom > 0.0 { sigma_s[i] / denom.sqrt() } else { 0.0 };
        let shift = mu_s.values()[i];
        for v in &mut data[i * fc.samples()..(i + 1) * fc.samples()] {
            *v = scale * *v + shift;
        }
    }
    FeatureMatrix::new(fc.channels(), fc.samples(), data)
}

/// AdaIN with centralization/decentralization removed: matches the
/// per-channel root-mean-square of the raw features, no mean shift.
pub fn adain_ablated(fc: &FeatureMatrix, fs: &FeatureMatrix, opts: &ZcaOptions) -> Result<FeatureMatrix> {
    check_channels(fc, fs)?;
    let rms_c = channel_stds(fc);
    let rms_s = channel_stds(fs);
    let mut data = fc.data().to_vec();
    for i in 0..fc.channels() {
        let denom = rms_c[i] * rms_c[i] + opts.std_epsilon;
        let scale = if denom > 0.0 { rms_s[i] / denom.sqrt() } else { 0.0 };
        for v in &mut data[i * fc.samples()..(i + 1) * fc.samples()] {
            *v *= scale;
        }
    }
    FeatureMatrix::new(fc.channels(), fc.samples(), data)
}

fn coloring_matrix(cov_s: &SymMatrix, cov_c: &SymMatrix, opts: &ZcaOptions) -> Result<SquareMatrix> {
    let half = matrix_power_sym(cov_s, 0.5, opts)?;
    let inv_half = matrix_power_sym(cov_c, -0.5, opts)?;
    let c = cov_s.order();
    let mut w = vec![0.0; c * c];
    linalg::gemm_square(half.data(), inv_half.data(), c, &mut w);
    SquareMatrix::new(c, w)
}

/// Whitening-coloring transform: output mean and covariance match the style's.
pub fn zca(fc: &FeatureMatrix, fs: &FeatureMatrix, opts: &ZcaOptions) -> Result<FeatureMatrix> {
    check_channels(fc, fs)?;
    let (fc_bar, _) = centralize(fc);
    let (fs_bar, mu_s) = centralize(fs);
    let cov_c = gram(&fc_bar, fc.samples());
    let cov_s = gram(&fs_bar, fs.samples());
    let w = coloring_matrix(&cov_s, &cov_c, opts)?;
    let mut out = vec![0.0; fc.channels() * fc.samples()];
    linalg::gemm_square_b(w.data(), fc_bar.data(), fc.channels(), fc.samples(), &mut out);
    let colored = FeatureMatrix::new(fc.channels(), fc.samples(), out)?;
    decentralize(&colored, &mu_s)
}

/// ZCA with centralization/decentralization removed, built on raw Gram
/// matrices. The output's gram matches the style's but its mean does not.
pub fn zca_gram_ablated(fc: &FeatureMatrix, fs: &FeatureMatrix, opts: &ZcaOptions) -> Result<FeatureMatrix> {
    check_channels(fc, fs)?;
    let g_c = gram(fc, fc.samples());
    let g_s = gram(fs, fs.samples());
    let w = coloring_matrix(&g_s, &g_c, opts)?;
    let mut out = vec![0.0; fc.channels() * fc.samples()];
    linalg::gemm_square_b(w.data(), fc.data(), fc.channels(), fc.samples(), &mut out);
    FeatureMatrix::new(fc.channels(), fc.samples(), out)
}

/// Elementwise `beta * F_t + (1 - beta) * F_base`.
pub fn interpolate(ft: &FeatureMatrix, fbase: &FeatureMatrix, beta: f64) -> Result<FeatureMatrix> {
    if !ft.same_shape(fbase) {
        return Err(Error::ShapeMismatch(format!(
            "interpolation operands {}x{} and {}x{}",
            ft.channels(),
            ft.samples(),
            fbase.channels(),
            fbase.samples()
        )));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidArgument(format!("beta {beta} outside [0, 1]")));
    }
    let data = ft
        .data()
        .iter()
        .zip(fbase.data())
        .map(|(t, b)| beta * t + (1.0 - beta) * b)
        .collect();
    FeatureMatrix::new(ft.channels(), ft.samples(), data)
}
