//! Feature-matrix representation and the statistical primitives every
//! transformation is built from: means, centralization, Gram matrices, and
//! trace kernels.
//!
//! A deep feature of shape `C x H x W` is handled as a `C x n` matrix with
//! `n = H * W`, one row per channel, spatial positions flattened row-major
//! (H outer, W inner). All arithmetic is double precision.

use crate::error::{Error, Result};
use crate::linalg;

/// A `C x n` matrix of deep-feature activations, row-major by channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    channels: usize,
    samples: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(channels: usize, samples: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || samples == 0 {
            return Err(Error::InvalidArgument(format!(
                "feature matrix shape must be positive, got {channels}x{samples}"
            )));
        }
        if data.len() != channels * samples {
            return Err(Error::ShapeMismatch(format!(
                "feature data length {} does not match {channels}x{samples}",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("feature matrix entries".into()));
        }
        Ok(Self { channels, samples, data })
    }

    /// Construct without the finiteness scan. Callers must guarantee finite
    /// entries (used on hot paths where the data was just computed from
    /// finite inputs and checked via its loss value).
    pub(crate) fn from_parts_unchecked(channels: usize, samples: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), channels * samples);
        Self { channels, samples, data }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, channel: usize) -> &[f64] {
        &self.data[channel * self.samples..(channel + 1) * self.samples]
    }

    pub fn get(&self, channel: usize, sample: usize) -> f64 {
        self.data[channel * self.samples + sample]
    }

    pub(crate) fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.channels == other.channels && self.samples == other.samples
    }
}

/// Per-channel mean, length equals the source matrix's channel count.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanVector(Vec<f64>);

impl MeanVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inf_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A general square `C x C` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    order: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn new(order: usize, data: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("matrix order must be positive".into()));
        }
        if data.len() != order * order {
            return Err(Error::ShapeMismatch(format!(
                "square data length {} does not match {order}x{order}",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("square matrix entries".into()));
        }
        Ok(Self { order, data })
    }

    pub(crate) fn from_parts_unchecked(order: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), order * order);
        Self { order, data }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.order + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self.get(i, i)).sum()
    }
}

/// A symmetric square matrix. Construction checks symmetry to 1e-12 relative.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(SquareMatrix);

const SYM_REL_TOL: f64 = 1e-12;

impl SymMatrix {
    pub fn new(order: usize, data: Vec<f64>) -> Result<Self> {
        let m = SquareMatrix::new(order, data)?;
        let scale = m.data.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut max_asym = 0.0f64;
        for i in 0..order {
            for j in (i + 1)..order {
                max_asym = max_asym.max((m.get(i, j) - m.get(j, i)).abs());
            }
        }
        if max_asym > SYM_REL_TOL * scale.max(1.0) {
            return Err(Error::NotSymmetric { max_asym, tol: SYM_REL_TOL * scale.max(1.0) });
        }
        Ok(Self(m))
    }

    pub(crate) fn from_parts_unchecked(order: usize, data: Vec<f64>) -> Self {
        Self(SquareMatrix::from_parts_unchecked(order, data))
    }

    pub fn as_square(&self) -> &SquareMatrix {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.order
    }

    pub fn data(&self) -> &[f64] {
        self.0.data()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }
}

/// Reshape a `C x H x W` activation tensor (row-major, H outer, W inner) into
/// a `C x HW` feature matrix.
pub fn reshape_feature(tensor: &[f64], channels: usize, height: usize, width: usize) -> Result<FeatureMatrix> {
    if channels == 0 || height == 0 || width == 0 {
        return Err(Error::InvalidArgument(format!(
            "tensor shape must be positive, got {channels}x{height}x{width}"
        )));
    }
    if tensor.len() != channels * height * width {
        return Err(Error::ShapeMismatch(format!(
            "tensor length {} does not match {channels}x{height}x{width}",
            tensor.len()
        )));
    }
    // The flattening is the identity on storage: channel planes are already
    // contiguous in row-major order.
    FeatureMatrix::new(channels, height * width, tensor.to_vec())
}

/// Mean across the spatial columns, one entry per channel.
pub fn mean_vector(f: &FeatureMatrix) -> MeanVector {
    let n = f.samples() as f64;
    let means = (0..f.channels())
        .map(|i| f.row(i).iter().sum::<f64>() / n)
        .collect();
    MeanVector::new(means)
}

/// Subtract the per-channel mean: returns the centralized matrix and the mean
/// that was removed.
pub fn centralize(f: &FeatureMatrix) -> (FeatureMatrix, MeanVector) {
    let mu = mean_vector(f);
    let mut data = f.data().to_vec();
    for (i, &m) in mu.values().iter().enumerate() {
        for v in &mut data[i * f.samples()..(i + 1) * f.samples()] {
            *v -= m;
        }
    }
    (FeatureMatrix::from_parts_unchecked(f.channels(), f.samples(), data), mu)
}

/// Add a per-channel mean back onto a centralized matrix.
pub fn decentralize(f_bar: &FeatureMatrix, mu: &MeanVector) -> Result<FeatureMatrix> {
    if mu.len() != f_bar.channels() {
        return Err(Error::ShapeMismatch(format!(
            "mean vector length {} does not match {} channels",
            mu.len(),
            f_bar.channels()
        )));
    }
    let mut data = f_bar.data().to_vec();
    for (i, &m) in mu.values().iter().enumerate() {
        for v in &mut data[i * f_bar.samples()..(i + 1) * f_bar.samples()] {
            *v += m;
        }
    }
    Ok(FeatureMatrix::from_parts_unchecked(f_bar.channels(), f_bar.samples(), data))
}

/// `(1/divisor) * F * F^T`. The divisor is explicit because the objective
/// normalizes the content and style terms by their own pixel counts.
pub fn gram(f: &FeatureMatrix, divisor: usize) -> SymMatrix {
    assert!(divisor >= 1, "gram divisor must be positive");
    let c = f.channels();
    let mut out = vec![0.0; c * c];
    linalg::syrk_aat(f.data(), c, f.samples(), 1.0 / divisor as f64, &mut out);
    SymMatrix::from_parts_unchecked(c, out)
}

/// `tr[A * B]` computed as a paired elementwise sum without forming `A * B`.
pub fn trace_product(a: &SquareMatrix, b: &SquareMatrix) -> Result<f64> {
    if a.order() != b.order() {
        return Err(Error::ShapeMismatch(format!(
            "trace_product orders {} and {}",
            a.order(),
            b.order()
        )));
    }
    Ok(trace_product_raw(a.data(), b.data(), a.order()))
}

pub(crate) fn trace_product_raw(a: &[f64], b: &[f64], order: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..order {
        for j in 0..order {
            acc += a[i * order + j] * b[j * order + i];
        }
    }
    acc
}

/// Sum of squared entries; equals `tr[M M^T]`.
pub fn frobenius_sq(entries: &[f64]) -> f64 {
    entries.iter().map(|v| v * v).sum()
}

/// Squared Frobenius distance between two equal-length buffers.
pub(crate) fn frobenius_sq_diff(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{gen_features, Dist};

    #[test]
    fn reshape_identity_case() {
        let f = reshape_feature(&[5.0], 1, 1, 1).unwrap();
        assert_eq!(f.channels(), 1);
        assert_eq!(f.samples(), 1);
        assert_eq!(f.data(), &[5.0]);
    }

    #[test]
    fn reshape_row_major() {
        let f = reshape_feature(&[1.0, 2.0, 3.0, 4.0], 2, 1, 2).unwrap();
        assert_eq!(f.row(0), &[1.0, 2.0]);
        assert_eq!(f.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn reshape_matches_index_arithmetic() {
        // Independent oracle: entry (c, h, w) of the tensor must land at
        // row c, column h*W + w.
        let (c, h, w) = (3usize, 4usize, 4usize);
        let src = gen_features(11, c, h * w, Dist::UnitGaussian).unwrap();
        let tensor = src.data().to_vec();
        let f = reshape_feature(&tensor, c, h, w).unwrap();
        for ci in 0..c {
            for hi in 0..h {
                for wi in 0..w {
                    let expect = tensor[ci * h * w + hi * w + wi];
                    assert_eq!(f.get(ci, hi * w + wi), expect);
                }
            }
        }
    }

    #[test]
    fn reshape_rejects_non_finite() {
        let err = reshape_feature(&[f64::NAN], 1, 1, 1).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn mean_vector_arithmetic() {
        let f = FeatureMatrix::new(2, 2, vec![1.0, 3.0, 0.0, 0.0]).unwrap();
        assert_eq!(mean_vector(&f).values(), &[2.0, 0.0]);
    }

    #[test]
    fn mean_vector_constant() {
        let f = FeatureMatrix::new(3, 5, vec![4.25; 15]).unwrap();
        for &m in mean_vector(&f).values() {
            assert_eq!(m, 4.25);
        }
    }

    #[test]
    fn mean_vector_matches_summation_oracle() {
        let f = gen_features(7, 8, 64, Dist::UnitGaussian).unwrap();
        let mu = mean_vector(&f);
        for i in 0..8 {
            // Kahan-compensated oracle sum.
            let (mut s, mut comp) = (0.0f64, 0.0f64);
            for &v in f.row(i) {
                let y = v - comp;
                let t = s + y;
                comp = (t - s) - y;
                s = t;
            }
            let expect = s / 64.0;
            assert!((mu.values()[i] - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn centralize_simple() {
        let f = FeatureMatrix::new(1, 2, vec![1.0, 3.0]).unwrap();
        let (fbar, mu) = centralize(&f);
        assert_eq!(fbar.data(), &[-1.0, 1.0]);
        assert_eq!(mu.values(), &[2.0]);
    }

    #[test]
    fn centralize_idempotent_on_centered() {
        let f = FeatureMatrix::new(1, 2, vec![-2.0, 2.0]).unwrap();
        let (fbar, mu) = centralize(&f);
        assert_eq!(fbar.data(), f.data());
        assert_eq!(mu.values(), &[0.0]);
    }

    #[test]
    fn centralize_zero_mean_output() {
        let f = gen_features(3, 16, 100, Dist::ScaledGaussian { mean: 2.5, std: 1.5 }).unwrap();
        let (fbar, _) = centralize(&f);
        let mu = mean_vector(&fbar);
        assert!(mu.inf_norm() < 1e-12);
    }

    #[test]
    fn decentralize_round_trip() {
        let f = gen_features(5, 6, 20, Dist::ScaledGaussian { mean: -1.0, std: 3.0 }).unwrap();
        let (fbar, mu) = centralize(&f);
        let back = decentralize(&fbar, &mu).unwrap();
        for (a, b) in back.data().iter().zip(f.data()) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }

    #[test]
    fn decentralize_zero_mean_is_identity() {
        let f = gen_features(6, 6, 10, Dist::UnitGaussian).unwrap();
        let zeros = MeanVector::new(vec![0.0; 6]);
        assert_eq!(decentralize(&f, &zeros).unwrap().data(), f.data());
    }

    #[test]
    fn decentralize_restores_mean() {
        let f = gen_features(9, 4, 50, Dist::ScaledGaussian { mean: 0.7, std: 2.0 }).unwrap();
        let (fbar, _) = centralize(&f);
        let mu = MeanVector::new(vec![1.5, -0.5, 3.25, 0.0]);
        let out = decentralize(&fbar, &mu).unwrap();
        let got = mean_vector(&out);
        for (g, e) in got.values().iter().zip(mu.values()) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn decentralize_rejects_mismatch() {
        let f = FeatureMatrix::new(2, 2, vec![0.0; 4]).unwrap();
        let mu = MeanVector::new(vec![1.0]);
        assert!(matches!(decentralize(&f, &mu), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn gram_identity_like() {
        let f = FeatureMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let g = gram(&f, 2);
        assert_eq!(g.data(), &[0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn gram_rank_one() {
        let f = FeatureMatrix::new(3, 4, vec![1.0, 2.0, 3.0, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let g = gram(&f, 4);
        // Only the (0,0) entry is nonzero.
        for i in 0..3 {
            for j in 0..3 {
                if i == 0 && j == 0 {
                    assert!(g.get(i, j) > 0.0);
                } else {
                    assert_eq!(g.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn gram_matches_triple_loop_oracle() {
        let f = gen_features(21, 4, 32, Dist::UnitGaussian).unwrap();
        let g = gram(&f, 32);
        let mut oracle = vec![0.0; 16];
        for i in 0..4 {
            for j in 0..4 {
                let mut s = 0.0;
                for k in 0..32 {
                    s += f.get(i, k) * f.get(j, k);
                }
                oracle[i * 4 + j] = s / 32.0;
            }
        }
        let num = frobenius_sq_diff(g.data(), &oracle).sqrt();
        let den = frobenius_sq(&oracle).sqrt();
        assert!(num <= 1e-12 * den);
    }

    #[test]
    fn gram_is_psd() {
        use crate::classic::sym_eig;
        for seed in 0..8u64 {
            let f = gen_features(seed, 5, 24, Dist::UnitGaussian).unwrap();
            let g = gram(&f, 24);
            let eig = sym_eig(&g).unwrap();
            let min = eig.eigenvalues().last().copied().unwrap();
            assert!(min >= -1e-9 * g.trace());
        }
    }

    #[test]
    fn trace_product_identity() {
        let c = 7;
        let eye: Vec<f64> = (0..c * c).map(|k| if k % (c + 1) == 0 { 1.0 } else { 0.0 }).collect();
        let a = SquareMatrix::new(c, eye.clone()).unwrap();
        let b = SquareMatrix::new(c, eye).unwrap();
        assert_eq!(trace_product(&a, &b).unwrap(), c as f64);
    }

    #[test]
    fn trace_product_cyclic() {
        for seed in 0..5u64 {
            let fa = gen_features(seed * 2 + 100, 5, 5, Dist::UnitGaussian).unwrap();
            let fb = gen_features(seed * 2 + 101, 5, 5, Dist::UnitGaussian).unwrap();
            let a = SquareMatrix::new(5, fa.data().to_vec()).unwrap();
            let b = SquareMatrix::new(5, fb.data().to_vec()).unwrap();
            let ab = trace_product(&a, &b).unwrap();
            let ba = trace_product(&b, &a).unwrap();
            assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1.0));
        }
    }

    #[test]
    fn trace_product_matches_explicit_product() {
        let fa = gen_features(200, 5, 5, Dist::UnitGaussian).unwrap();
        let fb = gen_features(201, 5, 5, Dist::UnitGaussian).unwrap();
        let a = SquareMatrix::new(5, fa.data().to_vec()).unwrap();
        let b = SquareMatrix::new(5, fb.data().to_vec()).unwrap();
        let got = trace_product(&a, &b).unwrap();
        let mut prod = vec![0.0; 25];
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..5 {
                    prod[i * 5 + j] += a.get(i, k) * b.get(k, j);
                }
            }
        }
        let tr: f64 = (0..5).map(|i| prod[i * 5 + i]).sum();
        assert!((got - tr).abs() <= 1e-12 * tr.abs().max(1.0));
    }

    #[test]
    fn trace_product_rejects_order_mismatch() {
        let a = SquareMatrix::new(2, vec![0.0; 4]).unwrap();
        let b = SquareMatrix::new(3, vec![0.0; 9]).unwrap();
        assert!(trace_product(&a, &b).is_err());
    }

    #[test]
    fn frobenius_cases() {
        assert_eq!(frobenius_sq(&[0.0; 6]), 0.0);
        assert_eq!(frobenius_sq(&[3.0, 4.0]), 25.0);
    }

    #[test]
    fn frobenius_equals_trace_identity() {
        let f = gen_features(42, 6, 6, Dist::UnitGaussian).unwrap();
        let m = SquareMatrix::new(6, f.data().to_vec()).unwrap();
        let fro = frobenius_sq(m.data());
        // tr[M M^T] = sum_{i,j} M[i,j]^2 via the trace kernel against M^T.
        let mut mt = vec![0.0; 36];
        for i in 0..6 {
            for j in 0..6 {
                mt[j * 6 + i] = m.get(i, j);
            }
        }
        let mt = SquareMatrix::new(6, mt).unwrap();
        let tr = trace_product(&m, &mt).unwrap();
        assert!((fro - tr).abs() <= 1e-12 * fro);
    }

    #[test]
    fn sym_matrix_rejects_asymmetric() {
        let err = SymMatrix::new(2, vec![1.0, 2.0, 3.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NotSymmetric { .. }));
    }
}
