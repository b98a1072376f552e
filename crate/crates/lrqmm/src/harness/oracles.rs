//! Independent reference implementations used to cross-check the fast
//! paths. Everything here is deliberately written the slow, obvious way
//! and shares no code with the kernels it verifies.

use crate::error::Result;
use crate::matrix::{matmul_exact, DenseMatrix};
use crate::quantize::{quantize, QuantizedMatrix, RoundingMode};

/// Plain i-j-k scalar product.
pub fn naive_matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    assert_eq!(k, b.rows(), "oracle product needs conformable shapes");
    DenseMatrix::from_fn(m, n, |i, j| {
        let mut acc = 0.0;
        for kk in 0..k {
            acc += a.get(i, kk) * b.get(kk, j);
        }
        acc
    })
}

/// Codes of a quantized matrix as exactly representable doubles.
pub fn codes_as_matrix(q: &QuantizedMatrix) -> DenseMatrix {
    DenseMatrix::from_vec(
        q.rows(),
        q.cols(),
        q.values().iter().map(|&v| v as f64).collect(),
    )
    .expect("codes form a valid matrix")
}

/// Integer product evaluated with the scalar double-precision loop.
/// Exact as long as the accumulation stays inside the 2^53 range, which
/// the checked pipelines guarantee.
pub fn int_gemm_reference(aq: &QuantizedMatrix, bq: &QuantizedMatrix) -> DenseMatrix {
    naive_matmul(&codes_as_matrix(aq), &codes_as_matrix(bq))
}

/// Literal four-term assembly of the residual split: base product plus the
/// two cross terms plus the residual-residual term, each evaluated with
/// the scalar loop on re-quantized residuals and rescaled by its pair of
/// scales.
pub fn four_term_reference(
    a: &DenseMatrix,
    b: &DenseMatrix,
    bits: u8,
    mode: RoundingMode,
) -> Result<DenseMatrix> {
    let aq = quantize(a, bits, mode)?;
    let bq = quantize(b, bits, mode)?;
    let r_a = a.sub(&crate::quantize::dequantize(&aq))?;
    let r_b = b.sub(&crate::quantize::dequantize(&bq))?;
    let raq = quantize(&r_a, bits, mode)?;
    let rbq = quantize(&r_b, bits, mode)?;

    let t1 = int_gemm_reference(&aq, &bq).scale(1.0 / (aq.scale() * bq.scale()));
    let t2 = int_gemm_reference(&aq, &rbq).scale(1.0 / (aq.scale() * rbq.scale()));
    let t3 = int_gemm_reference(&raq, &bq).scale(1.0 / (raq.scale() * bq.scale()));
    let t4 = int_gemm_reference(&raq, &rbq).scale(1.0 / (raq.scale() * rbq.scale()));

    let mut out = t1;
    out.add_assign(&t2)?;
    out.add_assign(&t3)?;
    out.add_assign(&t4)?;
    Ok(out)
}

/// Eigenvalues of the smaller Gram matrix of `b`, descending, via a
/// classical two-sided Jacobi iteration. Squares of the singular values.
pub fn gram_eigenvalues(b: &DenseMatrix) -> Vec<f64> {
    let gram = if b.rows() >= b.cols() {
        naive_matmul(&b.transpose(), b)
    } else {
        naive_matmul(b, &b.transpose())
    };
    symmetric_jacobi_eigenvalues(&gram)
}

/// Two-sided Jacobi on a small symmetric matrix; returns eigenvalues in
/// descending order.
pub fn symmetric_jacobi_eigenvalues(s: &DenseMatrix) -> Vec<f64> {
    let n = s.rows();
    assert_eq!(n, s.cols(), "eigen oracle needs a square matrix");
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| s.row(i).to_vec()).collect();
    let scale = 1.0 + s.frobenius_norm();
    for _ in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off.sqrt() < 1e-14 * scale {
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for i in 0..n {
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = c * aip - sn * aiq;
                    a[i][q] = sn * aip + c * aiq;
                }
                for i in 0..n {
                    let api = a[p][i];
                    let aqi = a[q][i];
                    a[p][i] = c * api - sn * aqi;
                    a[q][i] = sn * api + c * aqi;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
    eig
}

/// Leading singular value by power iteration on the Gram operator with a
/// fixed starting vector. Converges from below; callers that feed bounds
/// get the conservative side.
pub fn power_iteration_sigma1(a: &DenseMatrix, iters: usize) -> f64 {
    let (m, k) = a.shape();
    let mut v: Vec<f64> = (0..k).map(|i| 1.0 + (i as f64 * 0.7).cos()).collect();
    let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm0);
    let mut sigma = 0.0;
    let mut w = vec![0.0; m];
    for _ in 0..iters {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = a.row(i).iter().zip(&v).map(|(x, y)| x * y).sum();
        }
        let mut next = vec![0.0; k];
        for (i, wi) in w.iter().enumerate() {
            for (nj, aij) in next.iter_mut().zip(a.row(i)) {
                *nj += aij * wi;
            }
        }
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        sigma = norm.sqrt();
        next.iter_mut().for_each(|x| *x /= norm);
        v = next;
    }
    sigma
}

/// Top eigenvalue of a symmetric matrix by the same iteration, Rayleigh
/// refined.
pub fn power_iteration_top_eig(s: &DenseMatrix, iters: usize) -> f64 {
    let n = s.rows();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.7).sin()).collect();
    let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm0);
    let mut w = vec![0.0; n];
    for _ in 0..iters {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = s.row(i).iter().zip(&v).map(|(x, y)| x * y).sum();
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
    }
    for (i, wi) in w.iter_mut().enumerate() {
        *wi = s.row(i).iter().zip(&v).map(|(x, y)| x * y).sum();
    }
    w.iter().zip(&v).map(|(x, y)| x * y).sum()
}
