//! The multiplication pipelines under comparison: exact GEMM, direct
//! quantized GEMM, full residual compensation with re-quantized residuals
//! (three- and four-term variants), and low-rank residual compensation
//! where the residual factors come from a randomized SVD. All pipelines
//! honour the BLAS-style `D = alpha * A * B + beta * D` contract through
//! `lrqmm_gemm`.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{matmul_exact, relative_error, DenseMatrix};
use crate::quantize::{
    dequant_result, dequantize, quantize, QuantizedMatrix, RoundingMode,
};
use crate::rsvd::{exact_svd, rsvd, LowRankFactors, RsvdConfig};
use crate::seeding::derive_seed;

const ROW_BLOCK: usize = 8;
const K_PANEL: usize = 256;

/// Per-phase wall-clock durations in nanoseconds. Phases a scheme does not
/// execute stay `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub quantize_ns: Option<u64>,
    pub int_gemm_ns: Option<u64>,
    pub rsvd_ns: Option<u64>,
    pub residual_terms_ns: Option<u64>,
    pub package_ns: Option<u64>,
}

impl PhaseTimings {
    pub fn total_ns(&self) -> u64 {
        [
            self.quantize_ns,
            self.int_gemm_ns,
            self.rsvd_ns,
            self.residual_terms_ns,
            self.package_ns,
        ]
        .iter()
        .flatten()
        .sum()
    }

    /// Everything except the integer product: the compensation overhead.
    pub fn overhead_ns(&self) -> u64 {
        self.total_ns() - self.int_gemm_ns.unwrap_or(0)
    }
}

/// How the residual matrices get their low-rank factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowRankMethod {
    /// Randomized SVD; the config seeds the A-side sketch, the B-side uses
    /// a derived stream.
    Randomized(RsvdConfig),
    /// Deterministic Jacobi SVD truncated to `rank`; the verification path.
    ExactSvd { rank: usize },
}

/// A multiplication pipeline with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum GemmScheme {
    /// Double-precision reference product.
    Exact,
    /// Quantize, integer GEMM, rescale.
    DirectQuant { bits: u8, mode: RoundingMode },
    /// First three terms of the residual split (base + two cross terms).
    QtPartial { bits: u8, mode: RoundingMode },
    /// All four terms of the residual split.
    QtFull { bits: u8, mode: RoundingMode },
    /// Base quantized product plus rank-r compensation of both residuals.
    Lrqmm { bits: u8, method: LowRankMethod },
}

impl GemmScheme {
    pub fn label(&self) -> &'static str {
        match self {
            GemmScheme::Exact => "exact",
            GemmScheme::DirectQuant { .. } => "direct",
            GemmScheme::QtPartial { .. } => "qt3",
            GemmScheme::QtFull { .. } => "qt4",
            GemmScheme::Lrqmm { .. } => "lrqmm",
        }
    }
}

/// Output of a pipeline run: the product, where the time went, and the
/// scheme that produced it.
#[derive(Debug, Clone)]
pub struct GemmResult {
    pub output: DenseMatrix,
    pub timings: PhaseTimings,
    pub scheme: GemmScheme,
}

fn ns(since: Instant) -> u64 {
    since.elapsed().as_nanos() as u64
}

/// Exact integer product of two quantized matrices, accumulated in i64 and
/// returned as exactly representable doubles. Fails up front if the worst
/// case `k * limit_a * limit_b` could leave the exact range; silent
/// wraparound is never possible.
pub fn int_gemm(aq: &QuantizedMatrix, bq: &QuantizedMatrix) -> Result<DenseMatrix> {
    if aq.cols() != bq.rows() {
        return Err(Error::ShapeMismatch(format!(
            "inner dimensions {} vs {}",
            aq.cols(),
            bq.rows()
        )));
    }
    let (m, k, n) = (aq.rows(), aq.cols(), bq.cols());
    let worst = (k as i128) * (aq.code_limit() as i128) * (bq.code_limit() as i128);
    if worst >= 1i128 << 53 {
        return Err(Error::Overflow(format!(
            "k={k} at bit widths {}/{} can reach {worst}, past the exact double range",
            aq.bit_width(),
            bq.bit_width()
        )));
    }
    let a = aq.values();
    let b = bq.values();
    let mut c = vec![0i64; m * n];
    for k0 in (0..k).step_by(K_PANEL) {
        let k1 = (k0 + K_PANEL).min(k);
        c.par_chunks_mut(ROW_BLOCK * n)
            .enumerate()
            .for_each(|(blk, c_blk)| {
                let i0 = blk * ROW_BLOCK;
                for kk in k0..k1 {
                    let b_row = &b[kk * n..kk * n + n];
                    for (bi, c_row) in c_blk.chunks_mut(n).enumerate() {
                        let aik = a[(i0 + bi) * k + kk] as i64;
                        for (cv, bv) in c_row.iter_mut().zip(b_row) {
                            *cv += aik * *bv as i64;
                        }
                    }
                }
            });
    }
    DenseMatrix::from_vec(m, n, c.iter().map(|&v| v as f64).collect())
}

/// Quantize both inputs, multiply in integers, rescale.
pub fn direct_quant_gemm(
    a: &DenseMatrix,
    b: &DenseMatrix,
    bits: u8,
    mode: RoundingMode,
) -> Result<GemmResult> {
    let t = Instant::now();
    let aq = quantize(a, bits, mode)?;
    let bq = quantize(b, bits, mode)?;
    let quantize_ns = ns(t);

    let t = Instant::now();
    let c_int = int_gemm(&aq, &bq)?;
    let int_gemm_ns = ns(t);

    let t = Instant::now();
    let output = dequant_result(&c_int, aq.scale(), bq.scale())?;
    let package_ns = ns(t);

    Ok(GemmResult {
        output,
        timings: PhaseTimings {
            quantize_ns: Some(quantize_ns),
            int_gemm_ns: Some(int_gemm_ns),
            package_ns: Some(package_ns),
            ..Default::default()
        },
        scheme: GemmScheme::DirectQuant { bits, mode },
    })
}

/// Residual compensation with the residuals themselves re-quantized at the
/// same bit width under their own scales. `terms = 3` adds the two cross
/// terms to the base product; `terms = 4` also adds the residual-residual
/// term.
pub fn qt_gemm(
    a: &DenseMatrix,
    b: &DenseMatrix,
    bits: u8,
    terms: u8,
    mode: RoundingMode,
) -> Result<GemmResult> {
    if terms != 3 && terms != 4 {
        return Err(Error::InvalidParameter(format!(
            "residual compensation takes 3 or 4 terms, got {terms}"
        )));
    }
    let t = Instant::now();
    let aq = quantize(a, bits, mode)?;
    let bq = quantize(b, bits, mode)?;
    let quantize_ns = ns(t);

    let mut int_gemm_ns = 0u64;
    let t = Instant::now();
    let c_int = int_gemm(&aq, &bq)?;
    int_gemm_ns += ns(t);

    let t = Instant::now();
    let r_a = a.sub(&dequantize(&aq))?;
    let r_b = b.sub(&dequantize(&bq))?;
    let raq = quantize(&r_a, bits, mode)?;
    let rbq = quantize(&r_b, bits, mode)?;
    let residual_terms_ns = ns(t);

    let t = Instant::now();
    let t2_int = int_gemm(&aq, &rbq)?;
    let t3_int = int_gemm(&raq, &bq)?;
    let t4_int = if terms == 4 {
        Some(int_gemm(&raq, &rbq)?)
    } else {
        None
    };
    int_gemm_ns += ns(t);

    let t = Instant::now();
    let mut output = dequant_result(&c_int, aq.scale(), bq.scale())?;
    output.add_assign(&dequant_result(&t2_int, aq.scale(), rbq.scale())?)?;
    output.add_assign(&dequant_result(&t3_int, raq.scale(), bq.scale())?)?;
    if let Some(t4) = t4_int {
        output.add_assign(&dequant_result(&t4, raq.scale(), rbq.scale())?)?;
    }
    let package_ns = ns(t);

    let scheme = if terms == 3 {
        GemmScheme::QtPartial { bits, mode }
    } else {
        GemmScheme::QtFull { bits, mode }
    };
    Ok(GemmResult {
        output,
        timings: PhaseTimings {
            quantize_ns: Some(quantize_ns),
            int_gemm_ns: Some(int_gemm_ns),
            residual_terms_ns: Some(residual_terms_ns),
            package_ns: Some(package_ns),
            ..Default::default()
        },
        scheme,
    })
}

fn factorize(r: &DenseMatrix, method: &LowRankMethod) -> Result<LowRankFactors> {
    match method {
        LowRankMethod::Randomized(cfg) => rsvd(r, cfg),
        LowRankMethod::ExactSvd { rank } => {
            let min_dim = r.rows().min(r.cols());
            if *rank < 1 || *rank > min_dim {
                return Err(Error::RankOutOfRange(format!(
                    "exact SVD rank {rank} for a {}x{} residual",
                    r.rows(),
                    r.cols()
                )));
            }
            Ok(exact_svd(r).truncated(*rank))
        }
    }
}

struct PipelineOutput {
    compensated: DenseMatrix,
    timings: PhaseTimings,
}

/// Shared core: base quantized product plus the three compensation terms
/// built from low-rank factors of the floor-mode residuals.
fn lrqmm_pipeline(
    a: &DenseMatrix,
    b: &DenseMatrix,
    bits: u8,
    method_a: &LowRankMethod,
    method_b: &LowRankMethod,
) -> Result<PipelineOutput> {
    let t = Instant::now();
    let aq = quantize(a, bits, RoundingMode::Floor)?;
    let bq = quantize(b, bits, RoundingMode::Floor)?;
    let quantize_ns = ns(t);

    let t = Instant::now();
    let c_int = int_gemm(&aq, &bq)?;
    let int_gemm_ns = ns(t);

    let t = Instant::now();
    let a_f = dequantize(&aq);
    let b_f = dequantize(&bq);
    let r_a = a.sub(&a_f)?;
    let r_b = b.sub(&b_f)?;
    let mut residual_terms_ns = ns(t);

    let t = Instant::now();
    let f_a = factorize(&r_a, method_a)?;
    let f_b = factorize(&r_b, method_b)?;
    let rsvd_ns = ns(t);

    let t = Instant::now();
    // Fold the singular values into the outer factors, then keep every
    // intermediate at most r wide: U~ (V^T B~), (A~ W) Z~', (U~ (V^T W)) Z~'.
    let u_tilde = f_a.u.scale_cols(&f_a.sigma)?;
    let zt_tilde = f_b.vt.scale_rows(&f_b.sigma)?;
    let rc1 = matmul_exact(&u_tilde, &matmul_exact(&f_a.vt, &b_f)?)?;
    let rc2 = matmul_exact(&matmul_exact(&a_f, &f_b.u)?, &zt_tilde)?;
    let vtw = matmul_exact(&f_a.vt, &f_b.u)?;
    let rc3 = matmul_exact(&matmul_exact(&u_tilde, &vtw)?, &zt_tilde)?;
    residual_terms_ns += ns(t);

    let t = Instant::now();
    let mut compensated = dequant_result(&c_int, aq.scale(), bq.scale())?;
    compensated.add_assign(&rc1)?;
    compensated.add_assign(&rc2)?;
    compensated.add_assign(&rc3)?;
    let package_ns = ns(t);

    Ok(PipelineOutput {
        compensated,
        timings: PhaseTimings {
            quantize_ns: Some(quantize_ns),
            int_gemm_ns: Some(int_gemm_ns),
            rsvd_ns: Some(rsvd_ns),
            residual_terms_ns: Some(residual_terms_ns),
            package_ns: Some(package_ns),
        },
    })
}

/// `D' = alpha * (compensated product) + beta * D` with floor rounding
/// enforced internally; the compensation touches only the `alpha * A * B`
/// contribution.
pub fn lrqmm_gemm(
    a: &DenseMatrix,
    b: &DenseMatrix,
    d: &DenseMatrix,
    alpha: f64,
    beta: f64,
    scheme: &GemmScheme,
) -> Result<GemmResult> {
    let (bits, method) = match scheme {
        GemmScheme::Lrqmm { bits, method } => (*bits, method),
        other => {
            return Err(Error::InvalidParameter(format!(
                "lrqmm_gemm drives the lrqmm pipeline, got scheme {}",
                other.label()
            )))
        }
    };
    if a.cols() != b.rows() {
        return Err(Error::ShapeMismatch(format!(
            "inner dimensions {} vs {}",
            a.cols(),
            b.rows()
        )));
    }
    if d.shape() != (a.rows(), b.cols()) {
        return Err(Error::ShapeMismatch(format!(
            "accumulator {:?} vs product {:?}",
            d.shape(),
            (a.rows(), b.cols())
        )));
    }
    let method_b = match method {
        LowRankMethod::Randomized(cfg) => LowRankMethod::Randomized(RsvdConfig {
            seed: derive_seed(cfg.seed, 0xb),
            ..*cfg
        }),
        exact => *exact,
    };
    let mut run = lrqmm_pipeline(a, b, bits, method, &method_b)?;

    let t = Instant::now();
    let output = DenseMatrix::from_vec(
        a.rows(),
        b.cols(),
        run.compensated
            .data()
            .iter()
            .zip(d.data())
            .map(|(c, dv)| alpha * *c + beta * *dv)
            .collect(),
    )?;
    run.timings.package_ns = Some(run.timings.package_ns.unwrap_or(0) + ns(t));

    Ok(GemmResult {
        output,
        timings: run.timings,
        scheme: *scheme,
    })
}

/// Algebraic identity check: with full-rank exact SVD of both residuals the
/// four terms reassemble `A * B` to float tolerance. Returns the measured
/// relative error; the contract is <= 1e-9. Intended for shapes small
/// enough for the Jacobi SVD (min dimension <= 512).
pub fn lrqmm_full_rank_check(a: &DenseMatrix, b: &DenseMatrix, bits: u8) -> Result<f64> {
    let method_a = LowRankMethod::ExactSvd {
        rank: a.rows().min(a.cols()),
    };
    let method_b = LowRankMethod::ExactSvd {
        rank: b.rows().min(b.cols()),
    };
    let run = lrqmm_pipeline(a, b, bits, &method_a, &method_b)?;
    let exact = matmul_exact(a, b)?;
    relative_error(&exact, &run.compensated)
}

/// Runs a scheme as a plain product (`alpha = 1`, `beta = 0`).
pub fn run_scheme(a: &DenseMatrix, b: &DenseMatrix, scheme: &GemmScheme) -> Result<GemmResult> {
    match scheme {
        GemmScheme::Exact => {
            let t = Instant::now();
            let output = matmul_exact(a, b)?;
            Ok(GemmResult {
                output,
                timings: PhaseTimings {
                    // For the reference scheme the core product is the only
                    // phase; it lands in the gemm bucket.
                    int_gemm_ns: Some(ns(t)),
                    ..Default::default()
                },
                scheme: *scheme,
            })
        }
        GemmScheme::DirectQuant { bits, mode } => direct_quant_gemm(a, b, *bits, *mode),
        GemmScheme::QtPartial { bits, mode } => qt_gemm(a, b, *bits, 3, *mode),
        GemmScheme::QtFull { bits, mode } => qt_gemm(a, b, *bits, 4, *mode),
        GemmScheme::Lrqmm { .. } => {
            let d = DenseMatrix::zeros(a.rows(), b.cols());
            lrqmm_gemm(a, b, &d, 1.0, 0.0, scheme)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{generate, DistributionKind, DistributionSpec};

    fn random(kind: DistributionKind, seed: u64, rows: usize, cols: usize) -> DenseMatrix {
        generate(&DistributionSpec::new(kind, seed), rows, cols).unwrap()
    }

    fn uniform01(seed: u64, rows: usize, cols: usize) -> DenseMatrix {
        random(DistributionKind::Uniform { lo: 0.0, hi: 1.0 }, seed, rows, cols)
    }

    fn int_valued(seed: u64, rows: usize, cols: usize, limit: f64) -> DenseMatrix {
        let a = random(
            DistributionKind::Uniform {
                lo: -limit,
                hi: limit,
            },
            seed,
            rows,
            cols,
        );
        DenseMatrix::from_fn(rows, cols, |i, j| a.get(i, j).round())
    }

    fn lrqmm_scheme(bits: u8, rank: usize, seed: u64) -> GemmScheme {
        GemmScheme::Lrqmm {
            bits,
            method: LowRankMethod::Randomized(RsvdConfig::new(rank, seed)),
        }
    }

    #[test]
    fn int_gemm_identity_and_scalar() {
        let eye_codes: Vec<i32> = (0..16).map(|i| if i % 5 == 0 { 1 } else { 0 }).collect();
        let eye = QuantizedMatrix::from_parts(4, 4, eye_codes, 4, 1.0, RoundingMode::Nearest);
        let a = quantize(&int_valued(3, 4, 4, 7.0), 4, RoundingMode::Nearest).unwrap();
        assert_eq!(a.scale(), 1.0);
        let c = int_gemm(&a, &eye).unwrap();
        for (x, y) in c.data().iter().zip(a.values()) {
            assert_eq!(*x, *y as f64);
        }

        let s = quantize(&DenseMatrix::from_vec(1, 1, vec![7.0]).unwrap(), 4, RoundingMode::Floor)
            .unwrap();
        assert_eq!(int_gemm(&s, &s).unwrap().get(0, 0), 49.0);
    }

    #[test]
    fn int_gemm_matches_double_oracle_to_zero_ulp() {
        for (bits, seed) in [(4u8, 10u64), (8, 11)] {
            let limit = ((1i32 << (bits - 1)) - 1) as f64;
            let a = int_valued(seed, 100, 100, limit);
            let b = int_valued(seed + 1, 100, 100, limit);
            let aq = quantize(&a, bits, RoundingMode::Nearest).unwrap();
            let bq = quantize(&b, bits, RoundingMode::Nearest).unwrap();
            // Integer-valued inputs with lambda = 1: codes equal the inputs.
            assert_eq!(aq.scale(), 1.0);
            let c = int_gemm(&aq, &bq).unwrap();
            let oracle = matmul_exact(&a, &b).unwrap();
            assert_eq!(c.data(), oracle.data());
        }
    }

    #[test]
    fn int_gemm_rejects_overflow_risk() {
        // 2^16-bit codes squared times a huge k cannot fit the exact range;
        // fake the k by building a long inner dimension.
        let a = DenseMatrix::from_fn(1, 1 << 22, |_, _| 1.0);
        let b = DenseMatrix::from_fn(1 << 22, 1, |_, _| 1.0);
        let aq = quantize(&a, 16, RoundingMode::Nearest).unwrap();
        let bq = quantize(&b, 16, RoundingMode::Nearest).unwrap();
        assert!(matches!(int_gemm(&aq, &bq), Err(Error::Overflow(_))));
    }

    #[test]
    fn direct_quant_exact_on_representable_inputs() {
        let a = int_valued(21, 12, 9, 7.0);
        let b = int_valued(22, 9, 15, 7.0);
        let r = direct_quant_gemm(&a, &b, 4, RoundingMode::Nearest).unwrap();
        let exact = matmul_exact(&a, &b).unwrap();
        let err = relative_error(&exact, &r.output).unwrap();
        assert!(err <= 1e-12, "integer-valued inputs should be exact: {err}");
        assert!(r.timings.rsvd_ns.is_none());
        assert!(r.timings.int_gemm_ns.is_some());
    }

    #[test]
    fn qt_residual_free_inputs_collapse_to_direct() {
        let a = int_valued(31, 10, 10, 7.0);
        let b = int_valued(32, 10, 10, 7.0);
        let direct = direct_quant_gemm(&a, &b, 4, RoundingMode::Nearest).unwrap();
        for terms in [3u8, 4] {
            let qt = qt_gemm(&a, &b, 4, terms, RoundingMode::Nearest).unwrap();
            assert_eq!(qt.output.data(), direct.output.data());
        }
    }

    #[test]
    fn qt_matches_literal_four_term_assembly() {
        let a = uniform01(41, 20, 20);
        let b = uniform01(42, 20, 20);
        for mode in [RoundingMode::Nearest, RoundingMode::Floor] {
            let qt = qt_gemm(&a, &b, 4, 4, mode).unwrap();
            let reference = crate::harness::oracles::four_term_reference(&a, &b, 4, mode).unwrap();
            let err = relative_error(&reference, &qt.output).unwrap();
            assert!(err <= 1e-12, "literal assembly mismatch {err}");
        }
    }

    #[test]
    fn lrqmm_exact_when_residual_is_rank_one() {
        // Construct A = A~ + R with R rank 1 on the quantization lattice:
        // integer base entries in [-6, 6] plus a rank-1 perturbation inside
        // one lattice cell. Pinning one corner to +7 with a zeroed
        // perturbation row keeps lambda at exactly 1.
        let bits = 4u8;
        let mut base_a = int_valued(51, 24, 24, 6.0);
        base_a.set(0, 0, 7.0);
        let mut base_b = int_valued(52, 24, 24, 6.0);
        base_b.set(0, 0, 7.0);
        let mut u = uniform01(53, 24, 1);
        u.set(0, 0, 0.0);
        let v = uniform01(54, 24, 1);
        let pert = matmul_exact(&u, &v.transpose()).unwrap().scale(0.4);
        let a = base_a.add(&pert).unwrap();
        let mut w = uniform01(55, 24, 1);
        w.set(0, 0, 0.0);
        let z = uniform01(56, 24, 1);
        let pert_b = matmul_exact(&w, &z.transpose()).unwrap().scale(0.4);
        let b = base_b.add(&pert_b).unwrap();

        let scheme = GemmScheme::Lrqmm {
            bits,
            method: LowRankMethod::ExactSvd { rank: 1 },
        };
        let d = DenseMatrix::zeros(24, 24);
        let r = lrqmm_gemm(&a, &b, &d, 1.0, 0.0, &scheme).unwrap();
        let exact = matmul_exact(&a, &b).unwrap();
        let err = relative_error(&exact, &r.output).unwrap();
        assert!(err <= 1e-9, "rank-1 residual should be captured: {err}");
    }

    #[test]
    fn full_rank_identity_examples() {
        let a = random(
            DistributionKind::Normal {
                mean: 0.0,
                stddev: 1.0,
            },
            61,
            50,
            50,
        );
        let b = uniform01(62, 50, 50);
        for bits in [4u8, 8] {
            let err = lrqmm_full_rank_check(&a, &b, bits).unwrap();
            assert!(err <= 1e-9, "four-term identity failed at {bits} bits: {err}");
        }
        let x = DenseMatrix::from_vec(1, 1, vec![2.0]).unwrap();
        let y = DenseMatrix::from_vec(1, 1, vec![3.0]).unwrap();
        assert_eq!(lrqmm_full_rank_check(&x, &y, 4).unwrap(), 0.0);
    }

    #[test]
    fn alpha_beta_contract() {
        let a = uniform01(71, 16, 12);
        let b = uniform01(72, 12, 18);
        let d = uniform01(73, 16, 18);
        let scheme = lrqmm_scheme(4, 3, 99);

        let plain = lrqmm_gemm(&a, &b, &DenseMatrix::zeros(16, 18), 1.0, 0.0, &scheme).unwrap();
        let with_d = lrqmm_gemm(&a, &b, &d, 1.0, 0.0, &scheme).unwrap();
        assert_eq!(plain.output.data(), with_d.output.data());

        let passthrough = lrqmm_gemm(&a, &b, &d, 0.0, 1.0, &scheme).unwrap();
        assert_eq!(passthrough.output.data(), d.data());
    }

    #[test]
    fn scheme_phase_consistency() {
        let a = uniform01(81, 20, 20);
        let b = uniform01(82, 20, 20);
        let direct = run_scheme(&a, &b, &GemmScheme::DirectQuant {
            bits: 4,
            mode: RoundingMode::Floor,
        })
        .unwrap();
        assert!(direct.timings.rsvd_ns.is_none());
        assert!(direct.timings.residual_terms_ns.is_none());

        let lr = run_scheme(&a, &b, &lrqmm_scheme(4, 3, 7)).unwrap();
        assert!(lr.timings.quantize_ns.is_some());
        assert!(lr.timings.int_gemm_ns.is_some());
        assert!(lr.timings.rsvd_ns.is_some());
        assert!(lr.timings.residual_terms_ns.is_some());
        assert!(lr.timings.package_ns.is_some());
    }

    #[test]
    fn pipelines_are_deterministic() {
        let a = uniform01(91, 30, 30);
        let b = uniform01(92, 30, 30);
        let scheme = lrqmm_scheme(4, 5, 1234);
        let r1 = run_scheme(&a, &b, &scheme).unwrap();
        let r2 = run_scheme(&a, &b, &scheme).unwrap();
        assert_eq!(r1.output.data(), r2.output.data());
    }

    #[test]
    fn rank_exceeding_dimension_errors() {
        let a = uniform01(93, 10, 10);
        let b = uniform01(94, 10, 10);
        let scheme = lrqmm_scheme(4, 20, 5);
        assert!(matches!(
            run_scheme(&a, &b, &scheme),
            Err(Error::RankOutOfRange(_))
        ));
    }

    #[test]
    fn error_ordering_across_schemes() {
        // Median relative error over seeds: lrqmm < direct, and the
        // four-term split < three-term < direct.
        let n = 500;
        let bits = 4;
        let mut errs: std::collections::BTreeMap<&str, Vec<f64>> = Default::default();
        for seed in 0..20u64 {
            let a = uniform01(derive_seed(seed, 1), n, n);
            let b = uniform01(derive_seed(seed, 2), n, n);
            let exact = matmul_exact(&a, &b).unwrap();
            for scheme in [
                GemmScheme::DirectQuant {
                    bits,
                    mode: RoundingMode::Floor,
                },
                GemmScheme::QtPartial {
                    bits,
                    mode: RoundingMode::Floor,
                },
                GemmScheme::QtFull {
                    bits,
                    mode: RoundingMode::Floor,
                },
                lrqmm_scheme(bits, 10, derive_seed(seed, 3)),
            ] {
                let r = run_scheme(&a, &b, &scheme).unwrap();
                let e = relative_error(&exact, &r.output).unwrap();
                errs.entry(r.scheme.label()).or_default().push(e);
            }
        }
        let median = |v: &mut Vec<f64>| {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v[v.len() / 2]
        };
        let direct = median(errs.get_mut("direct").unwrap());
        let qt3 = median(errs.get_mut("qt3").unwrap());
        let qt4 = median(errs.get_mut("qt4").unwrap());
        let lr = median(errs.get_mut("lrqmm").unwrap());
        assert!(lr < direct, "lrqmm {lr} !< direct {direct}");
        assert!(qt4 < qt3, "qt4 {qt4} !< qt3 {qt3}");
        assert!(qt3 < direct, "qt3 {qt3} !< direct {direct}");
    }

    #[test]
    fn lrqmm_error_improves_with_rank() {
        let n = 200;
        let ranks = [1usize, 21, 41];
        let mut means = Vec::new();
        for &rank in &ranks {
            let mut total = 0.0;
            for seed in 0..10u64 {
                let a = uniform01(derive_seed(seed, 11), n, n);
                let b = uniform01(derive_seed(seed, 12), n, n);
                let exact = matmul_exact(&a, &b).unwrap();
                let r = run_scheme(&a, &b, &lrqmm_scheme(4, rank, derive_seed(seed, 13))).unwrap();
                total += relative_error(&exact, &r.output).unwrap();
            }
            means.push(total / 10.0);
        }
        assert!(
            means[1] <= means[0] && means[2] <= means[1],
            "mean error not improving with rank: {means:?}"
        );
    }
}
