//! Randomized SVD: Gaussian range finder with oversampling and power
//! iterations, a deterministic one-sided Jacobi SVD for the small projected
//! matrix, and factor assembly. The classical construction from Halko,
//! Martinsson & Tropp, specialized to dense CPU matrices.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{matmul_exact, DenseMatrix};

/// Relative threshold below which a column pair counts as orthogonal.
const JACOBI_TOL: f64 = 1e-12;
/// One-sided Jacobi converges quadratically; this is a hard stop, not a
/// budget that gets used.
const MAX_SWEEPS: usize = 30;
/// Singular values below `sigma_max * RANK_TOL` are treated as zero when
/// forming left singular vectors.
const RANK_TOL: f64 = 1e-12;

/// Parameters of the randomized factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RsvdConfig {
    pub rank: usize,
    pub oversampling: usize,
    pub power_iters: usize,
    pub seed: u64,
}

impl RsvdConfig {
    /// Defaults: oversampling 5, one power iteration.
    pub fn new(rank: usize, seed: u64) -> Self {
        Self {
            rank,
            oversampling: 5,
            power_iters: 1,
            seed,
        }
    }

    pub fn sketch_width(&self) -> usize {
        self.rank + self.oversampling
    }

    fn validate_for(&self, rows: usize, cols: usize) -> Result<()> {
        if self.rank < 1 {
            return Err(Error::RankOutOfRange("rank must be at least 1".into()));
        }
        let min_dim = rows.min(cols);
        if self.sketch_width() > min_dim {
            return Err(Error::RankOutOfRange(format!(
                "rank {} + oversampling {} exceeds min dimension {min_dim}",
                self.rank, self.oversampling
            )));
        }
        Ok(())
    }
}

/// Truncated factorization `A ~ U diag(sigma) Vt` with orthonormal U
/// columns and Vt rows, singular values nonincreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactors {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub vt: DenseMatrix,
}

impl LowRankFactors {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `(||U^T U - I||_F, ||Vt Vt^T - I||_F)`.
    pub fn orthonormality_defect(&self) -> (f64, f64) {
        let r = self.rank();
        let utu = matmul_exact(&self.u.transpose(), &self.u).expect("shape");
        let vvt = matmul_exact(&self.vt, &self.vt.transpose()).expect("shape");
        let eye = DenseMatrix::identity(r);
        (
            utu.sub(&eye).expect("shape").frobenius_norm(),
            vvt.sub(&eye).expect("shape").frobenius_norm(),
        )
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        reconstruct(self)
    }

    fn truncate(mut self, rank: usize) -> Self {
        if rank >= self.rank() {
            return self;
        }
        self.sigma.truncate(rank);
        self.u = take_cols(&self.u, rank);
        self.vt = take_rows(&self.vt, rank);
        self
    }
}

/// Dense evaluation of `U diag(sigma) Vt`.
pub fn reconstruct(f: &LowRankFactors) -> DenseMatrix {
    let scaled = f.u.scale_cols(&f.sigma).expect("factor shapes agree");
    matmul_exact(&scaled, &f.vt).expect("factor shapes agree")
}

fn take_cols(a: &DenseMatrix, c: usize) -> DenseMatrix {
    DenseMatrix::from_fn(a.rows(), c, |i, j| a.get(i, j))
}

fn take_rows(a: &DenseMatrix, r: usize) -> DenseMatrix {
    DenseMatrix::from_fn(r, a.cols(), |i, j| a.get(i, j))
}

fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    DenseMatrix::from_vec(rows, cols, data).expect("gaussian matrix shape")
}

/// Thin Q of a Householder QR of `y` (rows >= cols). Built by applying the
/// reflectors to the leading identity columns, so Q has exactly
/// `y.cols()` orthonormal columns even when `y` is rank deficient.
pub fn householder_qr_q(y: &DenseMatrix) -> DenseMatrix {
    let (m, c) = y.shape();
    assert!(c <= m, "QR panel must be tall, got {m}x{c}");
    // Column-contiguous copy: row j of `cols` is column j of y.
    let mut cols: Vec<Vec<f64>> = (0..c)
        .map(|j| (0..m).map(|i| y.get(i, j)).collect())
        .collect();
    // Reflector j stores (v over rows j.., beta); empty v means identity.
    let mut reflectors: Vec<(Vec<f64>, f64)> = Vec::with_capacity(c);
    for j in 0..c {
        let norm2: f64 = cols[j][j..].iter().map(|v| v * v).sum();
        if norm2 == 0.0 {
            reflectors.push((Vec::new(), 0.0));
            continue;
        }
        let norm = norm2.sqrt();
        let x0 = cols[j][j];
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = cols[j][j..].to_vec();
        v[0] = x0 - alpha;
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        if vtv == 0.0 {
            reflectors.push((Vec::new(), 0.0));
            continue;
        }
        let beta = 2.0 / vtv;
        for col in cols.iter_mut().skip(j) {
            let w: f64 = v.iter().zip(&col[j..]).map(|(a, b)| a * b).sum();
            let bw = beta * w;
            for (vi, ci) in v.iter().zip(col[j..].iter_mut()) {
                *ci -= bw * *vi;
            }
        }
        cols[j][j] = alpha;
        for x in cols[j][j + 1..].iter_mut() {
            *x = 0.0;
        }
        reflectors.push((v, beta));
    }
    // Q = H_0 ... H_{c-1} applied to the first c identity columns.
    let mut q_cols: Vec<Vec<f64>> = (0..c)
        .map(|j| {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            e
        })
        .collect();
    for j in (0..c).rev() {
        let (v, beta) = &reflectors[j];
        if v.is_empty() {
            continue;
        }
        for col in q_cols.iter_mut() {
            let w: f64 = v.iter().zip(&col[j..]).map(|(a, b)| a * b).sum();
            let bw = beta * w;
            for (vi, ci) in v.iter().zip(col[j..].iter_mut()) {
                *ci -= bw * *vi;
            }
        }
    }
    DenseMatrix::from_fn(m, c, |i, j| q_cols[j][i])
}

/// Orthonormal basis for an approximate range of `a`: Gaussian sketch of
/// width rank + oversampling, orthonormalized, then `power_iters` rounds
/// of `(A A^T)` applied with re-orthonormalization between steps.
pub fn range_finder(a: &DenseMatrix, cfg: &RsvdConfig) -> Result<DenseMatrix> {
    let (m, n) = a.shape();
    cfg.validate_for(m, n)?;
    let omega = gaussian_matrix(n, cfg.sketch_width(), cfg.seed);
    let y = matmul_exact(a, &omega)?;
    let mut q = householder_qr_q(&y);
    if cfg.power_iters > 0 {
        let at = a.transpose();
        for _ in 0..cfg.power_iters {
            let z = householder_qr_q(&matmul_exact(&at, &q)?);
            q = householder_qr_q(&matmul_exact(a, &z)?);
        }
    }
    Ok(q)
}

/// Thin SVD by one-sided Jacobi on the short side. Deterministic: sweeps
/// run in a fixed cyclic order until every off-diagonal rotation falls
/// below 1e-12 relative, hard-capped at 30 sweeps. Intended for panels
/// whose short side is at most a few hundred (the harness stays <= 512).
pub fn small_svd(b: &DenseMatrix) -> LowRankFactors {
    let (m, n) = b.shape();
    if m < n {
        let f = small_svd(&b.transpose());
        return LowRankFactors {
            u: f.vt.transpose(),
            sigma: f.sigma,
            vt: f.u.transpose(),
        };
    }
    // Row j of `w` holds column j of B; rotations act on contiguous rows.
    let mut w: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..m).map(|i| b.get(i, j)).collect())
        .collect();
    let mut vt: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let (head, tail) = w.split_at_mut(q);
                let wp = &mut head[p];
                let wq = &mut tail[0];
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for (x, y) in wp.iter().zip(wq.iter()) {
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if apq == 0.0 || apq.abs() <= JACOBI_TOL * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for (x, y) in wp.iter_mut().zip(wq.iter_mut()) {
                    let xp = *x;
                    let yq = *y;
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
                let (vhead, vtail) = vt.split_at_mut(q);
                for (x, y) in vhead[p].iter_mut().zip(vtail[0].iter_mut()) {
                    let xp = *x;
                    let yq = *y;
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = w
        .iter()
        .map(|col| col.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap().then(a.cmp(&b)));
    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    // Left vectors: normalized columns where sigma is meaningful,
    // orthonormal completion where it is numerically zero.
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (rank_pos, &j) in order.iter().enumerate() {
        if sigma[rank_pos] > sigma_max * RANK_TOL && sigma[rank_pos] > 0.0 {
            let inv = 1.0 / sigma[rank_pos];
            u_cols.push(w[j].iter().map(|v| v * inv).collect());
        } else {
            u_cols.push(Vec::new());
        }
    }
    complete_orthonormal(&mut u_cols, m);
    let u = DenseMatrix::from_fn(m, n, |i, j| u_cols[j][i]);
    let vt_mat = DenseMatrix::from_fn(n, n, |i, j| vt[order[i]][j]);
    LowRankFactors {
        u,
        sigma,
        vt: vt_mat,
    }
}

/// Fills empty slots with unit vectors orthogonal to every present column,
/// drawn from the canonical basis and re-orthogonalized twice.
fn complete_orthonormal(cols: &mut [Vec<f64>], dim: usize) {
    for idx in 0..cols.len() {
        if !cols[idx].is_empty() {
            continue;
        }
        let mut chosen = None;
        for cand in 0..dim {
            let mut v = vec![0.0; dim];
            v[cand] = 1.0;
            for _ in 0..2 {
                for other in cols.iter() {
                    if other.is_empty() {
                        continue;
                    }
                    let dot: f64 = other.iter().zip(&v).map(|(a, b)| a * b).sum();
                    for (ov, vv) in other.iter().zip(v.iter_mut()) {
                        *vv -= dot * *ov;
                    }
                }
            }
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.5 {
                for x in v.iter_mut() {
                    *x /= norm;
                }
                chosen = Some(v);
                break;
            }
        }
        cols[idx] = chosen.expect("orthonormal completion always exists");
    }
}

/// Randomized SVD truncated to `cfg.rank`. Deterministic per seed.
pub fn rsvd(a: &DenseMatrix, cfg: &RsvdConfig) -> Result<LowRankFactors> {
    let q = range_finder(a, cfg)?;
    let b = matmul_exact(&q.transpose(), a)?;
    let f = small_svd(&b);
    let u = matmul_exact(&q, &f.u)?;
    let lifted = LowRankFactors {
        u,
        sigma: f.sigma,
        vt: f.vt,
    };
    let out = lifted.truncate(cfg.rank);
    debug_assert!({
        let (du, dv) = out.orthonormality_defect();
        du <= 1e-8 && dv <= 1e-8
    });
    Ok(out)
}

/// Exact thin SVD for matrices small enough for the Jacobi path, used as
/// the full-spectrum oracle in tests and verification runs.
pub fn exact_svd(a: &DenseMatrix) -> LowRankFactors {
    small_svd(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{generate, relative_error, DistributionKind, DistributionSpec};

    fn gaussian(seed: u64, rows: usize, cols: usize) -> DenseMatrix {
        generate(
            &DistributionSpec::new(
                DistributionKind::Normal {
                    mean: 0.0,
                    stddev: 1.0,
                },
                seed,
            ),
            rows,
            cols,
        )
        .unwrap()
    }

    /// Matrix with a prescribed singular spectrum: Q1 diag(sigma) Q2^T with
    /// random orthonormal factors.
    fn with_spectrum(seed: u64, m: usize, n: usize, sigma: &[f64]) -> DenseMatrix {
        let r = sigma.len();
        let q1 = householder_qr_q(&gaussian(seed, m, r));
        let q2 = householder_qr_q(&gaussian(seed + 7777, n, r));
        let scaled = q1.scale_cols(sigma).unwrap();
        matmul_exact(&scaled, &q2.transpose()).unwrap()
    }

    /// Classical two-sided Jacobi eigen-iteration on a small symmetric
    /// matrix, independent of the one-sided SVD path.
    fn symmetric_eigenvalues(s: &DenseMatrix) -> Vec<f64> {
        let n = s.rows();
        let mut a: Vec<Vec<f64>> = (0..n).map(|i| s.row(i).to_vec()).collect();
        for _ in 0..60 {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += a[p][q] * a[p][q];
                }
            }
            if off.sqrt() < 1e-14 * (1.0 + s.frobenius_norm()) {
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
                    let sj = c * t;
                    for i in 0..n {
                        let aip = a[i][p];
                        let aiq = a[i][q];
                        a[i][p] = c * aip - sj * aiq;
                        a[i][q] = sj * aip + c * aiq;
                    }
                    for i in 0..n {
                        let api = a[p][i];
                        let aqi = a[q][i];
                        a[p][i] = c * api - sj * aqi;
                        a[q][i] = sj * api + c * aqi;
                    }
                }
            }
        }
        let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
        eig
    }

    #[test]
    fn qr_produces_orthonormal_columns() {
        for &(m, c, seed) in &[(10usize, 4usize, 1u64), (30, 30, 2), (200, 15, 3)] {
            let q = householder_qr_q(&gaussian(seed, m, c));
            let qtq = matmul_exact(&q.transpose(), &q).unwrap();
            let defect = qtq.sub(&DenseMatrix::identity(c)).unwrap().frobenius_norm();
            assert!(defect < 1e-12, "QR defect {defect} at {m}x{c}");
        }
    }

    #[test]
    fn qr_handles_rank_deficiency() {
        let mut y = DenseMatrix::zeros(6, 3);
        for i in 0..6 {
            y.set(i, 0, 1.0);
            y.set(i, 2, 2.0); // column 2 parallel to column 0
        }
        let q = householder_qr_q(&y);
        let qtq = matmul_exact(&q.transpose(), &q).unwrap();
        let defect = qtq.sub(&DenseMatrix::identity(3)).unwrap().frobenius_norm();
        assert!(defect < 1e-12);
    }

    #[test]
    fn small_svd_diagonal() {
        let b = DenseMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                [3.0, 2.0, 1.0][i]
            } else {
                0.0
            }
        });
        let f = small_svd(&b);
        assert_eq!(f.sigma, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn small_svd_zero_matrix() {
        let f = small_svd(&DenseMatrix::zeros(4, 3));
        assert!(f.sigma.iter().all(|&s| s == 0.0));
        let (du, dv) = f.orthonormality_defect();
        assert!(du < 1e-12 && dv < 1e-12);
    }

    #[test]
    fn small_svd_matches_gram_eigen_oracle() {
        for &(m, n, seed) in &[(8usize, 5usize, 11u64), (5, 8, 12), (20, 20, 13)] {
            let b = gaussian(seed, m, n);
            let f = small_svd(&b);
            // Gram matrix on the short side.
            let gram = if m >= n {
                matmul_exact(&b.transpose(), &b).unwrap()
            } else {
                matmul_exact(&b, &b.transpose()).unwrap()
            };
            let eig = symmetric_eigenvalues(&gram);
            for (s, e) in f.sigma.iter().zip(&eig) {
                let expected = e.max(0.0).sqrt();
                assert!(
                    (s - expected).abs() <= 1e-8 * f.sigma[0].max(1.0),
                    "sigma {s} vs sqrt(eig) {expected}"
                );
            }
        }
    }

    #[test]
    fn small_svd_reconstructs() {
        for &(m, n, seed) in &[(12usize, 7usize, 3u64), (7, 12, 4), (16, 16, 5)] {
            let b = gaussian(seed, m, n);
            let f = small_svd(&b);
            let err = b.sub(&f.reconstruct()).unwrap().frobenius_norm();
            assert!(err <= 1e-8 * b.frobenius_norm());
            let (du, dv) = f.orthonormality_defect();
            assert!(du <= 1e-8 && dv <= 1e-8);
            assert!(f.sigma.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn range_finder_captures_identity() {
        let a = DenseMatrix::identity(5);
        let cfg = RsvdConfig {
            rank: 5,
            oversampling: 0,
            power_iters: 0,
            seed: 1,
        };
        let q = range_finder(&a, &cfg).unwrap();
        let proj = matmul_exact(&q, &matmul_exact(&q.transpose(), &a).unwrap()).unwrap();
        assert!(proj.sub(&a).unwrap().frobenius_norm() <= 1e-10);
    }

    #[test]
    fn range_finder_captures_rank_one() {
        let u = gaussian(21, 10, 1);
        let v = gaussian(22, 6, 1);
        let a = matmul_exact(&u, &v.transpose()).unwrap();
        let cfg = RsvdConfig {
            rank: 1,
            oversampling: 0,
            power_iters: 0,
            seed: 9,
        };
        let q = range_finder(&a, &cfg).unwrap();
        let proj = matmul_exact(&q, &matmul_exact(&q.transpose(), &a).unwrap()).unwrap();
        assert!(proj.sub(&a).unwrap().frobenius_norm() <= 1e-10 * a.frobenius_norm().max(1.0));
    }

    #[test]
    fn range_finder_rejects_oversized_sketch() {
        let a = gaussian(1, 10, 6);
        let cfg = RsvdConfig {
            rank: 5,
            oversampling: 5,
            power_iters: 0,
            seed: 0,
        };
        assert!(matches!(
            range_finder(&a, &cfg),
            Err(Error::RankOutOfRange(_))
        ));
    }

    #[test]
    fn range_finder_meets_expected_envelope_on_decaying_spectrum() {
        // Envelope with the oracle sigma_{r+1}; meaningful for decaying
        // spectra where the tail is dominated by its leading term.
        let sigma: Vec<f64> = (0..60).map(|i| 0.6f64.powi(i)).collect();
        let a = with_spectrum(31, 200, 100, &sigma);
        let cfg = RsvdConfig {
            rank: 10,
            oversampling: 5,
            power_iters: 1,
            seed: 77,
        };
        let q = range_finder(&a, &cfg).unwrap();
        let proj = matmul_exact(&q, &matmul_exact(&q.transpose(), &a).unwrap()).unwrap();
        let err = a.sub(&proj).unwrap().frobenius_norm();
        let oracle = exact_svd(&a);
        let bound = crate::bounds::rsvd_expected_bound(200, 100, 10, 1, oracle.sigma[10]).unwrap();
        assert!(err <= bound, "range error {err} above envelope {bound}");
    }

    #[test]
    fn rsvd_rank_one_exact() {
        let u = gaussian(41, 30, 1);
        let v = gaussian(42, 20, 1);
        let a = matmul_exact(&u, &v.transpose()).unwrap();
        let cfg = RsvdConfig::new(1, 5);
        let f = rsvd(&a, &cfg).unwrap();
        assert_eq!(f.rank(), 1);
        let err = relative_error(&a, &f.reconstruct()).unwrap();
        assert!(err <= 1e-8, "rank-1 reconstruction error {err}");
    }

    #[test]
    fn rsvd_known_spectrum_truncation() {
        let a = with_spectrum(51, 40, 40, &[10.0, 1e-8, 1e-9, 1e-10]);
        let cfg = RsvdConfig::new(1, 3);
        let f = rsvd(&a, &cfg).unwrap();
        let err = relative_error(&a, &f.reconstruct()).unwrap();
        assert!(err <= 1e-6, "truncation tail error {err}");
    }

    #[test]
    fn rsvd_expected_error_over_seeds() {
        // 20-seed mean against the expected-error envelope, oracle tail.
        let sigma: Vec<f64> = (0..40).map(|i| 0.7f64.powi(i)).collect();
        let a = with_spectrum(61, 200, 200, &sigma);
        let oracle = exact_svd(&a);
        let bound = crate::bounds::rsvd_expected_bound(200, 200, 10, 1, oracle.sigma[10]).unwrap();
        let mut total = 0.0;
        for seed in 0..20 {
            let cfg = RsvdConfig {
                rank: 10,
                oversampling: 5,
                power_iters: 1,
                seed,
            };
            let f = rsvd(&a, &cfg).unwrap();
            total += a.sub(&f.reconstruct()).unwrap().frobenius_norm();
        }
        let mean = total / 20.0;
        assert!(mean <= bound, "mean error {mean} above envelope {bound}");
    }

    #[test]
    fn rsvd_is_deterministic() {
        let a = gaussian(71, 50, 40);
        let cfg = RsvdConfig::new(8, 123);
        let f1 = rsvd(&a, &cfg).unwrap();
        let f2 = rsvd(&a, &cfg).unwrap();
        assert_eq!(f1, f2);
        let other = RsvdConfig::new(8, 124);
        assert_ne!(f1, rsvd(&a, &other).unwrap());
    }

    #[test]
    fn truncation_bound_holds_with_oracle_tail() {
        // Deterministic truncation of the exact SVD against
        // sigma_{r+1} sqrt(p - r).
        for seed in 0..8u64 {
            let a = gaussian(100 + seed, 30, 30);
            let f = exact_svd(&a);
            let r = 6;
            let truncated = LowRankFactors {
                u: DenseMatrix::from_fn(30, r, |i, j| f.u.get(i, j)),
                sigma: f.sigma[..r].to_vec(),
                vt: DenseMatrix::from_fn(r, 30, |i, j| f.vt.get(i, j)),
            };
            let err = a.sub(&truncated.reconstruct()).unwrap().frobenius_norm();
            let bound = crate::bounds::svd_truncation_bound(30, r, f.sigma[r]).unwrap();
            assert!(err <= bound * (1.0 + 1e-10));
        }
    }

    #[test]
    fn reconstruct_matches_scalar_loop() {
        let f = LowRankFactors {
            u: gaussian(81, 6, 2),
            sigma: vec![3.0, 0.5],
            vt: gaussian(82, 2, 5),
        };
        let r = reconstruct(&f);
        assert_eq!(r.shape(), (6, 5));
        for i in 0..6 {
            for j in 0..5 {
                let mut acc = 0.0;
                for l in 0..2 {
                    acc += f.u.get(i, l) * f.sigma[l] * f.vt.get(l, j);
                }
                assert!((r.get(i, j) - acc).abs() <= 1e-12 * acc.abs().max(1.0));
            }
        }
    }

    #[test]
    fn reconstruct_identity_factors() {
        let f = LowRankFactors {
            u: DenseMatrix::identity(3),
            sigma: vec![5.0, 4.0, 3.0],
            vt: DenseMatrix::identity(3),
        };
        let r = reconstruct(&f);
        for i in 0..3 {
            assert_eq!(r.get(i, i), f.sigma[i]);
        }
    }
}
