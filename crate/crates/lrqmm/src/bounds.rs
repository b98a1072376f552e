//! Closed-form error bounds and spectral estimates for quantized and
//! low-rank-compensated products, so measured errors can be checked against
//! theory. Two flavours exist side by side: deterministic inequalities fed
//! by oracle singular values, and estimate-based forms built from the
//! Marchenko-Pastur edge and the rank-one mean component. The estimates are
//! approximations; the harness treats them statistically (slack factor 2,
//! 90% pass rate) while the oracle forms must hold on every instance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::MatrixStats;

/// Which of the two spectral regimes the estimate lands in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Noise-dominated: the bulk edge is the leading singular value.
    Case1,
    /// Mean-dominated: the rank-one mean component leads and the bulk
    /// follows detached.
    Case2,
}

/// Leading singular value estimates from first and second moments.
/// `kappa1` is the Marchenko-Pastur bulk edge in sample-covariance units
/// (the raw-matrix value is `sqrt(larger dim)` times bigger; both are
/// surfaced downstream); `kappa2` is the exact singular value of the
/// rank-one mean matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularEstimate {
    pub kappa1: f64,
    pub kappa2: f64,
    pub sigma1_est: f64,
    pub sigma2_est: f64,
    pub regime: Regime,
}

/// Everything the closed forms need about one quantized product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Mean of the matrix the bound reasons about (inputs for the direct
    /// quantization forms, residuals for the compensated forms).
    pub mu: f64,
    /// Standard deviation, same convention as `mu`.
    pub s: f64,
    /// Oracle leading singular value of A, when available.
    pub sigma1: Option<f64>,
    /// Oracle leading singular value of B, when available.
    pub gamma1: Option<f64>,
    pub rank: usize,
    pub bits: u8,
}

/// Support edges of the Marchenko-Pastur density for variance `variance`
/// and aspect ratio `aspect` in (0, 1]: `(var (1-sqrt y)^2, var (1+sqrt y)^2)`.
pub fn mp_edges(variance: f64, aspect: f64) -> Result<(f64, f64)> {
    if !(variance >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "variance must be nonnegative, got {variance}"
        )));
    }
    if !(aspect > 0.0 && aspect <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "aspect ratio must lie in (0, 1], got {aspect}"
        )));
    }
    let root = aspect.sqrt();
    Ok((
        variance * (1.0 - root) * (1.0 - root),
        variance * (1.0 + root) * (1.0 + root),
    ))
}

/// First- and second-moment estimate of the two leading singular values:
/// `kappa1 = |s| (1 + sqrt(small/large))` (bulk edge, covariance units) and
/// `kappa2 = |mu| sqrt(mn)` (rank-one mean). The larger is the sigma-1
/// estimate and decides the regime.
pub fn estimate_singular(stats: &MatrixStats) -> SingularEstimate {
    let (large, small) = if stats.rows >= stats.cols {
        (stats.rows as f64, stats.cols as f64)
    } else {
        (stats.cols as f64, stats.rows as f64)
    };
    let kappa1 = (stats.stddev() * (1.0 + (small / large).sqrt())).abs();
    let kappa2 = stats.mean.abs() * (stats.rows as f64 * stats.cols as f64).sqrt();
    let (sigma1_est, sigma2_est) = (kappa1.max(kappa2), kappa1.min(kappa2));
    let regime = if kappa1 >= kappa2 {
        Regime::Case1
    } else {
        Regime::Case2
    };
    SingularEstimate {
        kappa1,
        kappa2,
        sigma1_est,
        sigma2_est,
        regime,
    }
}

/// Per-matrix quantization error bound: `||A - dequant(quant(A))||_F <=
/// sqrt(mn) / lambda`. Deterministic.
pub fn quant_matrix_bound(m: usize, n: usize, lambda: f64) -> Result<f64> {
    if m == 0 || n == 0 || !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need positive dimensions and scale, got {m}x{n}, lambda {lambda}"
        )));
    }
    Ok((m as f64 * n as f64).sqrt() / lambda)
}

/// Quantized-product bound with oracle singular values:
/// `k (sigma1 sqrt(n)/l2 + gamma1 sqrt(m)/l1 + sqrt(mn)/(l1 l2))`.
/// A deterministic inequality chain; holds on every instance.
pub fn quant_gemm_bound_oracle(
    m: usize,
    k: usize,
    n: usize,
    sigma1: f64,
    gamma1: f64,
    lambda1: f64,
    lambda2: f64,
) -> Result<f64> {
    if !(lambda1 > 0.0 && lambda2 > 0.0) {
        return Err(Error::InvalidParameter("scales must be positive".into()));
    }
    let (mf, kf, nf) = (m as f64, k as f64, n as f64);
    Ok(kf
        * (sigma1 * nf.sqrt() / lambda2
            + gamma1 * mf.sqrt() / lambda1
            + (mf * nf).sqrt() / (lambda1 * lambda2)))
}

/// Quantized-product bound from input moments alone, dispatching on the
/// regime of the input matrices. `mu` and `s` are the input statistics and
/// a single scale serves both sides.
pub fn quant_gemm_bound_estimated(
    m: usize,
    k: usize,
    n: usize,
    mu: f64,
    s: f64,
    lambda: f64,
) -> Result<(f64, Regime)> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter("scale must be positive".into()));
    }
    if !(s > 0.0) && mu == 0.0 {
        return Err(Error::DegenerateInput(
            "estimate needs a nonzero moment".into(),
        ));
    }
    let (mf, kf, nf) = (m as f64, k as f64, n as f64);
    let inv = 1.0 / lambda;
    // Regime of the inputs, judged on the A shape (A and B share moments
    // under the i.i.d. assumption).
    let est = estimate_singular(&MatrixStats {
        mean: mu,
        variance: s * s,
        max_abs: f64::NAN,
        rows: m,
        cols: k,
    });
    let value = match est.regime {
        Regime::Case1 => {
            kf * inv
                * (nf.sqrt() * s * (1.0 + (kf / mf).sqrt())
                    + mf.sqrt() * s * (1.0 + (nf / kf).sqrt())
                    + (mf * nf).sqrt() * inv)
        }
        Regime::Case2 => {
            kf * inv
                * (s * (nf.sqrt() + mf.sqrt() + (nf * kf / mf).sqrt() + (mf * nf / kf).sqrt())
                    + 2.0 * mu.abs() * (mf * nf).sqrt())
                + inv * inv * (mf * nf).sqrt()
        }
    };
    Ok((value, est.regime))
}

/// Dual-entry dispatch: the oracle form when both leading singular values
/// are supplied, the moment-based form otherwise.
pub fn quant_gemm_bound(inputs: &BoundInputs) -> Result<(f64, Regime)> {
    match (inputs.sigma1, inputs.gamma1) {
        (Some(sigma1), Some(gamma1)) => {
            let v = quant_gemm_bound_oracle(
                inputs.m,
                inputs.k,
                inputs.n,
                sigma1,
                gamma1,
                inputs.lambda1,
                inputs.lambda2,
            )?;
            let est = estimate_singular(&MatrixStats {
                mean: inputs.mu,
                variance: inputs.s * inputs.s,
                max_abs: f64::NAN,
                rows: inputs.m,
                cols: inputs.k,
            });
            Ok((v, est.regime))
        }
        _ => quant_gemm_bound_estimated(
            inputs.m,
            inputs.k,
            inputs.n,
            inputs.mu,
            inputs.s,
            inputs.lambda1,
        ),
    }
}

/// Compensated-product bound. `mu` and `s` are the floor-residual
/// statistics and the regime is judged from them; the compensation rank
/// must satisfy `rank < k - 1`.
pub fn lrqmm_bound(
    m: usize,
    k: usize,
    n: usize,
    lambda: f64,
    rank: usize,
    resid_mu: f64,
    resid_s: f64,
) -> Result<(f64, Regime)> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter("scale must be positive".into()));
    }
    if rank + 1 >= k {
        return Err(Error::RankOutOfRange(format!(
            "compensation bound needs rank < k - 1, got rank {rank} at k {k}"
        )));
    }
    let (mf, kf, nf) = (m as f64, k as f64, n as f64);
    let inv = 1.0 / lambda;
    let tail = (kf * (kf - rank as f64)).sqrt();
    let p1 = inv
        * tail
        * ((2.0 * resid_s + inv) * (1.0 + (kf / mf).sqrt()) * (1.0 + (nf / kf).sqrt())
            + inv * mf.sqrt() * (1.0 + (nf / kf).sqrt()));
    let est = estimate_singular(&MatrixStats {
        mean: resid_mu,
        variance: resid_s * resid_s,
        max_abs: f64::NAN,
        rows: m,
        cols: k,
    });
    let value = match est.regime {
        Regime::Case1 => p1,
        Regime::Case2 => {
            p1 + inv
                * resid_mu.abs()
                * tail
                * (nf.sqrt() + mf.sqrt() + (nf * kf / mf).sqrt() + (mf * nf / kf).sqrt())
        }
    };
    Ok((value, est.regime))
}

/// Predicted ratio of compensated to direct error on square inputs, from
/// the input moments. Requires `k > rank + 1`; the mean-dominated form is
/// undefined at `mu = 0`.
pub fn error_ratio_bound(
    k: usize,
    rank: usize,
    mu: f64,
    s: f64,
    lambda: f64,
    regime: Regime,
) -> Result<f64> {
    if k <= rank + 1 {
        return Err(Error::RankOutOfRange(format!(
            "ratio bound needs k > rank + 1, got k {k}, rank {rank}"
        )));
    }
    if !(lambda > 0.0) || !(s > 0.0) {
        return Err(Error::InvalidParameter(
            "ratio bound needs positive scale and spread".into(),
        ));
    }
    let kf = k as f64;
    let tail = (kf - rank as f64).sqrt();
    let inv = 1.0 / lambda;
    match regime {
        Regime::Case1 => Ok(inv * tail / (2.0 * s * kf.sqrt())
            + 2.0 * tail / kf
            + inv * tail / (s * kf)),
        Regime::Case2 => {
            if mu == 0.0 {
                return Err(Error::DegenerateInput(
                    "mean-dominated ratio undefined at mu = 0".into(),
                ));
            }
            Ok(tail * (2.0 * mu.abs() + inv) / (kf * mu.abs())
                + (kf * (kf - rank as f64)).sqrt() * (8.0 * s + 4.0 * inv)
                    / (2.0 * kf * kf * mu.abs()))
        }
    }
}

/// Leading term of the noise-dominated ratio at large k: `1/(2 s lambda)`.
pub fn ratio_case1_leading_term(k: usize, rank: usize, s: f64, lambda: f64) -> f64 {
    let kf = k as f64;
    (kf - rank as f64).sqrt() / (lambda * 2.0 * s * kf.sqrt())
}

/// The constant the noise-dominated ratio approaches: `1 / (2^N - 2)`.
pub fn ratio_constant(bits: u8) -> f64 {
    1.0 / ((1u64 << bits) as f64 - 2.0)
}

/// Expected randomized-SVD error envelope:
/// `[1 + 4 sqrt(2 min(m,n) / (r-1))]^(1/(2q+1)) * sigma_{r+1}`.
pub fn rsvd_expected_bound(
    m: usize,
    n: usize,
    rank: usize,
    power_iters: usize,
    sigma_r_plus_1: f64,
) -> Result<f64> {
    if rank < 2 {
        return Err(Error::RankOutOfRange(
            "expected-error envelope needs rank >= 2".into(),
        ));
    }
    let min_dim = m.min(n) as f64;
    let base = 1.0 + 4.0 * (2.0 * min_dim / (rank as f64 - 1.0)).sqrt();
    let exponent = 1.0 / (2.0 * power_iters as f64 + 1.0);
    Ok(base.powf(exponent) * sigma_r_plus_1)
}

/// Deterministic truncation bound: keeping `kept` of `true_rank` terms
/// loses at most `sigma_{r+1} sqrt(p - r)` in the Frobenius norm.
pub fn svd_truncation_bound(true_rank: usize, kept: usize, sigma_r_plus_1: f64) -> Result<f64> {
    if kept >= true_rank {
        return Err(Error::RankOutOfRange(format!(
            "truncation bound needs kept < true rank, got {kept} >= {true_rank}"
        )));
    }
    Ok(sigma_r_plus_1 * ((true_rank - kept) as f64).sqrt())
}
