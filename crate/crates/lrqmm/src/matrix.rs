//! Dense row-major matrices in double precision: seeded random generation,
//! Frobenius norms, sample statistics, and the exact reference GEMM that every
//! error measurement in the crate is taken against.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Exp, Normal, Poisson, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows of the output matrix processed together per pass over `B`.
const ROW_BLOCK: usize = 8;
/// Depth of the reduction panel kept hot in cache.
const K_PANEL: usize = 256;

/// Row-major dense matrix of finite doubles. Immutable after construction
/// except through the explicitly mutating helpers; safe to share across
/// threads for reads.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major data, enforcing the shape and
    /// finiteness invariants.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "matrix dimensions must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "data length {} does not equal {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(idx));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be >= 1");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be >= 1");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// Sample statistics with the 1/n variance convention used by the
    /// sample-covariance spectral bounds.
    pub fn stats(&self) -> MatrixStats {
        let n = self.data.len() as f64;
        let mean = self.data.iter().sum::<f64>() / n;
        let variance = self.data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        MatrixStats {
            mean,
            variance,
            max_abs: self.max_abs(),
            rows: self.rows,
            cols: self.cols,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
        Ok(())
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// Scales column `j` by `factors[j]`.
    pub fn scale_cols(&self, factors: &[f64]) -> Result<Self> {
        if factors.len() != self.cols {
            return Err(Error::ShapeMismatch(format!(
                "{} factors for {} columns",
                factors.len(),
                self.cols
            )));
        }
        let mut out = self.clone();
        for row in out.data.chunks_mut(self.cols) {
            for (v, f) in row.iter_mut().zip(factors) {
                *v *= *f;
            }
        }
        Ok(out)
    }

    /// Scales row `i` by `factors[i]`.
    pub fn scale_rows(&self, factors: &[f64]) -> Result<Self> {
        if factors.len() != self.rows {
            return Err(Error::ShapeMismatch(format!(
                "{} factors for {} rows",
                factors.len(),
                self.rows
            )));
        }
        let mut out = self.clone();
        for (row, f) in out.data.chunks_mut(self.cols).zip(factors) {
            for v in row.iter_mut() {
                *v *= *f;
            }
        }
        Ok(out)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }
}

/// Sample statistics of a matrix: mean, 1/n variance, and largest
/// absolute entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixStats {
    pub mean: f64,
    pub variance: f64,
    pub max_abs: f64,
    pub rows: usize,
    pub cols: usize,
}

impl MatrixStats {
    pub fn stddev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// The input families used by the experiment harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionKind {
    Normal { mean: f64, stddev: f64 },
    Uniform { lo: f64, hi: f64 },
    Exponential { rate: f64 },
    ChiSquare { dof: f64 },
    Poisson { rate: f64 },
}

impl DistributionKind {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            DistributionKind::Normal { stddev, .. } => *stddev > 0.0 && stddev.is_finite(),
            DistributionKind::Uniform { lo, hi } => lo < hi && lo.is_finite() && hi.is_finite(),
            DistributionKind::Exponential { rate } => *rate > 0.0 && rate.is_finite(),
            DistributionKind::ChiSquare { dof } => *dof >= 1.0 && dof.is_finite(),
            DistributionKind::Poisson { rate } => *rate > 0.0 && rate.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "distribution parameters out of domain: {self}"
            )))
        }
    }
}

impl std::fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DistributionKind::Normal { mean, stddev } => write!(f, "Normal({mean},{stddev})"),
            DistributionKind::Uniform { lo, hi } => write!(f, "Uniform({lo},{hi})"),
            DistributionKind::Exponential { rate } => write!(f, "Exponent({rate})"),
            DistributionKind::ChiSquare { dof } => write!(f, "ChiSquare({dof})"),
            DistributionKind::Poisson { rate } => write!(f, "Poisson({rate})"),
        }
    }
}

/// A distribution plus the seed that makes generation a pure function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub kind: DistributionKind,
    pub seed: u64,
}

impl DistributionSpec {
    pub fn new(kind: DistributionKind, seed: u64) -> Self {
        Self { kind, seed }
    }
}

/// Draws an i.i.d. matrix from `spec`. Identical `(spec, rows, cols)`
/// reproduce identical matrices bit for bit: the stream comes from a
/// counter-based ChaCha8 generator seeded with `spec.seed`, filled in
/// row-major order with one draw per entry.
pub fn generate(spec: &DistributionSpec, rows: usize, cols: usize) -> Result<DenseMatrix> {
    spec.kind.validate()?;
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter(format!(
            "matrix dimensions must be at least 1x1, got {rows}x{cols}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let count = rows * cols;
    let param_err = |e: String| Error::InvalidParameter(e);
    let data: Vec<f64> = match spec.kind {
        DistributionKind::Normal { mean, stddev } => {
            let d = Normal::new(mean, stddev).map_err(|e| param_err(e.to_string()))?;
            (0..count).map(|_| d.sample(&mut rng)).collect()
        }
        DistributionKind::Uniform { lo, hi } => {
            let d = Uniform::new(lo, hi).map_err(|e| param_err(e.to_string()))?;
            (0..count).map(|_| d.sample(&mut rng)).collect()
        }
        DistributionKind::Exponential { rate } => {
            let d = Exp::new(rate).map_err(|e| param_err(e.to_string()))?;
            (0..count).map(|_| d.sample(&mut rng)).collect()
        }
        DistributionKind::ChiSquare { dof } => {
            let d = ChiSquared::new(dof).map_err(|e| param_err(e.to_string()))?;
            (0..count).map(|_| d.sample(&mut rng)).collect()
        }
        DistributionKind::Poisson { rate } => {
            let d = Poisson::new(rate).map_err(|e| param_err(e.to_string()))?;
            (0..count).map(|_| d.sample(&mut rng)).collect()
        }
    };
    DenseMatrix::from_vec(rows, cols, data)
}

pub fn frobenius_norm(a: &DenseMatrix) -> f64 {
    a.frobenius_norm()
}

/// `||exact - approx||_F / ||exact||_F`, the accuracy metric used
/// throughout the harness.
pub fn relative_error(exact: &DenseMatrix, approx: &DenseMatrix) -> Result<f64> {
    if exact.shape() != approx.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            exact.shape(),
            approx.shape()
        )));
    }
    let denom = exact.frobenius_norm();
    if denom == 0.0 {
        return Err(Error::ZeroNormReference);
    }
    Ok(exact.sub(approx)?.frobenius_norm() / denom)
}

/// Double-precision GEMM, the ground-truth product for every error
/// measurement. Each output element accumulates over k in ascending
/// order, so results are bitwise independent of blocking and thread
/// count.
pub fn matmul_exact(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.rows {
        return Err(Error::ShapeMismatch(format!(
            "inner dimensions {} vs {}",
            a.cols, b.rows
        )));
    }
    use rayon::prelude::*;
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut c = vec![0.0f64; m * n];
    for k0 in (0..k).step_by(K_PANEL) {
        let k1 = (k0 + K_PANEL).min(k);
        c.par_chunks_mut(ROW_BLOCK * n)
            .enumerate()
            .for_each(|(blk, c_blk)| {
                let i0 = blk * ROW_BLOCK;
                for kk in k0..k1 {
                    let b_row = &b.data[kk * n..kk * n + n];
                    for (bi, c_row) in c_blk.chunks_mut(n).enumerate() {
                        let aik = a.data[(i0 + bi) * k + kk];
                        for (cv, bv) in c_row.iter_mut().zip(b_row) {
                            *cv += aik * *bv;
                        }
                    }
                }
            });
    }
    Ok(DenseMatrix {
        rows: m,
        cols: n,
        data: c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Plain i-j-k scalar product, kept separate from the blocked kernel on
    /// purpose.
    fn naive_matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        let (m, k, n) = (a.rows(), a.cols(), b.cols());
        DenseMatrix::from_fn(m, n, |i, j| {
            let mut acc = 0.0;
            for kk in 0..k {
                acc += a.get(i, kk) * b.get(kk, j);
            }
            acc
        })
    }

    fn uniform(seed: u64, rows: usize, cols: usize) -> DenseMatrix {
        let spec = DistributionSpec::new(DistributionKind::Uniform { lo: -1.0, hi: 1.0 }, seed);
        generate(&spec, rows, cols).unwrap()
    }

    #[test]
    fn frobenius_examples() {
        assert_eq!(DenseMatrix::zeros(3, 4).frobenius_norm(), 0.0);
        assert!((DenseMatrix::identity(2).frobenius_norm() - 2.0f64.sqrt()).abs() < 1e-15);
        let a = DenseMatrix::from_vec(1, 2, vec![3.0, 4.0]).unwrap();
        assert_eq!(a.frobenius_norm(), 5.0);
    }

    #[test]
    fn relative_error_examples() {
        let c = uniform(7, 4, 4);
        assert_eq!(relative_error(&c, &c).unwrap(), 0.0);
        let i2 = DenseMatrix::identity(2);
        let err = relative_error(&i2, &i2.scale(2.0)).unwrap();
        assert!((err - 1.0).abs() < 1e-15);
    }

    #[test]
    fn relative_error_matches_scalar_recomputation() {
        let a = uniform(11, 5, 6);
        let b = uniform(12, 5, 6);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..5 {
            for j in 0..6 {
                num += (a.get(i, j) - b.get(i, j)).powi(2);
                den += a.get(i, j).powi(2);
            }
        }
        let expected = (num / den).sqrt();
        assert!((relative_error(&a, &b).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn relative_error_rejects_zero_reference() {
        let z = DenseMatrix::zeros(2, 2);
        assert!(matches!(
            relative_error(&z, &z),
            Err(Error::ZeroNormReference)
        ));
    }

    #[test]
    fn matmul_identity_and_scalar() {
        let a = uniform(3, 6, 4);
        let c = matmul_exact(&a, &DenseMatrix::identity(4)).unwrap();
        assert_eq!(c, a);
        let x = DenseMatrix::from_vec(1, 1, vec![2.0]).unwrap();
        let y = DenseMatrix::from_vec(1, 1, vec![3.0]).unwrap();
        assert_eq!(matmul_exact(&x, &y).unwrap().get(0, 0), 6.0);
    }

    #[test]
    fn matmul_integer_entries_exact() {
        let spec = DistributionSpec::new(DistributionKind::Uniform { lo: -9.0, hi: 9.0 }, 42);
        let a = generate(&spec, 5, 5).unwrap();
        let a = DenseMatrix::from_fn(5, 5, |i, j| a.get(i, j).round());
        let b_spec = DistributionSpec::new(DistributionKind::Uniform { lo: -9.0, hi: 9.0 }, 43);
        let b = generate(&b_spec, 5, 5).unwrap();
        let b = DenseMatrix::from_fn(5, 5, |i, j| b.get(i, j).round());
        let c = matmul_exact(&a, &b).unwrap();
        let r = naive_matmul(&a, &b);
        for (x, y) in c.data().iter().zip(r.data()) {
            assert_eq!(x, y);
            assert_eq!(x.fract(), 0.0);
        }
    }

    #[test]
    fn matmul_agrees_with_naive_loop_up_to_50() {
        for &(m, k, n) in &[(3usize, 4usize, 5usize), (17, 9, 23), (50, 50, 50)] {
            let a = uniform(m as u64 * 100 + 1, m, k);
            let b = uniform(n as u64 * 100 + 2, k, n);
            let c = matmul_exact(&a, &b).unwrap();
            let r = naive_matmul(&a, &b);
            let err = relative_error(&r, &c).unwrap();
            assert!(err <= 1e-12, "blocked vs naive mismatch: {err}");
        }
    }

    #[test]
    fn matmul_shape_mismatch() {
        let a = uniform(1, 3, 4);
        let b = uniform(2, 5, 3);
        assert!(matches!(matmul_exact(&a, &b), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn generate_is_deterministic() {
        let spec = DistributionSpec::new(
            DistributionKind::Normal {
                mean: 0.0,
                stddev: 1.0,
            },
            91,
        );
        let a = generate(&spec, 17, 13).unwrap();
        let b = generate(&spec, 17, 13).unwrap();
        assert_eq!(a, b);
        let other = DistributionSpec::new(spec.kind, 92);
        assert_ne!(a, generate(&other, 17, 13).unwrap());
    }

    #[test]
    fn generate_uniform_support() {
        let spec = DistributionSpec::new(DistributionKind::Uniform { lo: 0.0, hi: 1.0 }, 5);
        let a = generate(&spec, 2, 2).unwrap();
        assert!(a.data().iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn generate_normal_moments() {
        // Tolerances are 3-sigma bands of the sample estimators at 10^6
        // draws: sd(mean) = 1e-3, sd(variance) ~ sqrt(2)e-3.
        let spec = DistributionSpec::new(
            DistributionKind::Normal {
                mean: 0.0,
                stddev: 1.0,
            },
            2024,
        );
        let a = generate(&spec, 1000, 1000).unwrap();
        let s = a.stats();
        assert!(s.mean.abs() < 0.01, "mean {}", s.mean);
        assert!((s.variance - 1.0).abs() < 0.02, "variance {}", s.variance);
    }

    #[test]
    fn generate_rejects_bad_parameters() {
        let bad = DistributionSpec::new(
            DistributionKind::Normal {
                mean: 0.0,
                stddev: 0.0,
            },
            1,
        );
        assert!(generate(&bad, 2, 2).is_err());
        let bad = DistributionSpec::new(DistributionKind::Uniform { lo: 1.0, hi: 1.0 }, 1);
        assert!(generate(&bad, 2, 2).is_err());
        let bad = DistributionSpec::new(DistributionKind::Exponential { rate: -1.0 }, 1);
        assert!(generate(&bad, 2, 2).is_err());
        let bad = DistributionSpec::new(DistributionKind::ChiSquare { dof: 0.5 }, 1);
        assert!(generate(&bad, 2, 2).is_err());
    }

    #[test]
    fn stats_examples() {
        let ones = DenseMatrix::from_fn(3, 3, |_, _| 1.0);
        let s = ones.stats();
        assert_eq!((s.mean, s.variance, s.max_abs), (1.0, 0.0, 1.0));

        let pm = DenseMatrix::from_vec(1, 2, vec![-2.0, 2.0]).unwrap();
        let s = pm.stats();
        assert_eq!((s.mean, s.variance, s.max_abs), (0.0, 4.0, 2.0));
    }

    #[test]
    fn stats_uniform_moments() {
        let spec = DistributionSpec::new(DistributionKind::Uniform { lo: 0.0, hi: 1.0 }, 77);
        let a = generate(&spec, 1000, 1000).unwrap();
        let s = a.stats();
        assert!((s.mean - 0.5).abs() < 0.01);
        assert!((s.variance - 1.0 / 12.0).abs() < 0.01);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        // Triangle inequality for the Frobenius norm.
        #[test]
        fn norm_triangle_inequality(seed in 0u64..500, rows in 1usize..10, cols in 1usize..10) {
            let a = uniform(seed, rows, cols);
            let b = uniform(seed + 1000, rows, cols);
            let lhs = a.add(&b).unwrap().frobenius_norm();
            let rhs = a.frobenius_norm() + b.frobenius_norm();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }

        // Submultiplicativity of the Frobenius norm over products.
        #[test]
        fn norm_submultiplicative(seed in 0u64..500, m in 1usize..8, k in 1usize..8, n in 1usize..8) {
            let a = uniform(seed, m, k);
            let b = uniform(seed + 2000, k, n);
            let lhs = matmul_exact(&a, &b).unwrap().frobenius_norm();
            let rhs = a.frobenius_norm() * b.frobenius_norm();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }
}
