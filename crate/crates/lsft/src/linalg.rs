//! Thin safe wrappers over the CBLAS double-precision kernels used by the
//! transformations. All matrices are row-major.

use cblas_sys::{
    cblas_dgemm, cblas_dsymm, cblas_dsyrk, CBLAS_LAYOUT, CBLAS_SIDE, CBLAS_TRANSPOSE, CBLAS_UPLO,
};

/// `out = alpha * A * A^T` for a `rows x cols` matrix A, producing a full
/// symmetric `rows x rows` matrix (both triangles filled).
pub fn syrk_aat(a: &[f64], rows: usize, cols: usize, alpha: f64, out: &mut [f64]) {
    assert_eq!(a.len(), rows * cols);
    assert_eq!(out.len(), rows * rows);
    unsafe {
        cblas_dsyrk(
            CBLAS_LAYOUT::CblasRowMajor,
            CBLAS_UPLO::CblasUpper,
            CBLAS_TRANSPOSE::CblasNoTrans,
            rows as i32,
            cols as i32,
            alpha,
            a.as_ptr(),
            cols as i32,
            0.0,
            out.as_mut_ptr(),
            rows as i32,
        );
    }
    // Mirror the upper triangle into the lower.
    for i in 0..rows {
        for j in (i + 1)..rows {
            out[j * rows + i] = out[i * rows + j];
        }
    }
}

/// `out = alpha * S * B` where S is a symmetric `order x order` matrix and B
/// is `order x cols`.
pub fn symm_sb(s: &[f64], b: &[f64], order: usize, cols: usize, alpha: f64, out: &mut [f64]) {
    assert_eq!(s.len(), order * order);
    assert_eq!(b.len(), order * cols);
    assert_eq!(out.len(), order * cols);
    unsafe {
        cblas_dsymm(
            CBLAS_LAYOUT::CblasRowMajor,
            CBLAS_SIDE::CblasLeft,
            CBLAS_UPLO::CblasUpper,
            order as i32,
            cols as i32,
            alpha,
            s.as_ptr(),
            order as i32,
            b.as_ptr(),
            cols as i32,
            0.0,
            out.as_mut_ptr(),
            cols as i32,
        );
    }
}

/// `out = alpha * A * B^T` for `rows x cols` matrices A and B, producing
/// `rows x rows`.
pub fn gemm_abt(a: &[f64], b: &[f64], rows: usize, cols: usize, alpha: f64, out: &mut [f64]) {
    assert_eq!(a.len(), rows * cols);
    assert_eq!(b.len(), rows * cols);
    assert_eq!(out.len(), rows * rows);
    unsafe {
        cblas_dgemm(
            CBLAS_LAYOUT::CblasRowMajor,
            CBLAS_TRANSPOSE::CblasNoTrans,
            CBLAS_TRANSPOSE::CblasTrans,
            rows as i32,
            rows as i32,
            cols as i32,
            alpha,
            a.as_ptr(),
            cols as i32,
            b.as_ptr(),
            cols as i32,
            0.0,
            out.as_mut_ptr(),
            rows as i32,
        );
    }
}

/// `out = A * B` for a square `order x order` A and an `order x cols` B.
pub fn gemm_square_b(a: &[f64], b: &[f64], order: usize, cols: usize, out: &mut [f64]) {
    assert_eq!(a.len(), order * order);
    assert_eq!(b.len(), order * cols);
    assert_eq!(out.len(), order * cols);
    unsafe {
        cblas_dgemm(
            CBLAS_LAYOUT::CblasRowMajor,
            CBLAS_TRANSPOSE::CblasNoTrans,
            CBLAS_TRANSPOSE::CblasNoTrans,
            order as i32,
            cols as i32,
            order as i32,
            1.0,
            a.as_ptr(),
            order as i32,
            b.as_ptr(),
            cols as i32,
            0.0,
            out.as_mut_ptr(),
            cols as i32,
        );
    }
}

/// `out = A * B` for square `order x order` matrices.
pub fn gemm_square(a: &[f64], b: &[f64], order: usize, out: &mut [f64]) {
    gemm_square_b(a, b, order, order, out);
}
