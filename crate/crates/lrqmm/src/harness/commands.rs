//! The harness commands as library functions. Each returns a structured
//! report that renders to schema-stable CSV or self-describing JSON; the
//! CLI is a thin shell over these.

use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::BTreeMap;
use std::time::Instant;

use crate::bounds::{
    self, error_ratio_bound, estimate_singular, lrqmm_bound, quant_gemm_bound_estimated,
    quant_gemm_bound_oracle, quant_matrix_bound, ratio_case1_leading_term, ratio_constant,
    Regime,
};
use crate::error::{Error, Result};
use crate::matrix::{
    generate, matmul_exact, relative_error, DenseMatrix, DistributionKind, DistributionSpec,
    MatrixStats,
};
use crate::qgemm::{
    self, int_gemm, lrqmm_full_rank_check, qt_gemm, run_scheme, GemmScheme, LowRankMethod,
};
use crate::quantize::{quantize, residual, RoundingMode};
use crate::rsvd::{exact_svd, rsvd, RsvdConfig};
use crate::seeding::derive_seed;

use super::oracles;
use super::{
    log_log_slope, median, run_trial, trial_inputs, ExperimentConfig, ExperimentRecord,
    RankPolicy, SchemeKind,
};

fn config_comment<T: Serialize>(cfg: &T) -> Result<String> {
    Ok(format!("# config = {}", serde_json::to_string(cfg)?))
}

fn csv_with_comment<T: Serialize>(comment: &str, rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| csv_err(e.into_error().into()))?)
        .expect("csv output is utf-8");
    Ok(format!("{comment}\n{body}"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

// ---------------------------------------------------------------------------
// error-table

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorTableRow {
    pub distribution: String,
    pub scheme: String,
    pub bits: u8,
    pub size_m: usize,
    pub size_k: usize,
    pub size_n: usize,
    pub rank: usize,
    pub seed_count: usize,
    pub median_rel_err: f64,
    pub min_rel_err: f64,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorTable {
    pub config: ExperimentConfig,
    pub rows: Vec<ErrorTableRow>,
    pub records: Vec<ExperimentRecord>,
}

impl ErrorTable {
    pub fn to_csv(&self) -> Result<String> {
        csv_with_comment(&config_comment(&self.config)?, &self.rows)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.records)?)
    }

    pub fn cell(&self, distribution: &DistributionKind, scheme: SchemeKind) -> Option<f64> {
        let label = distribution.to_string();
        self.rows
            .iter()
            .find(|r| r.distribution == label && r.scheme == scheme.label())
            .map(|r| r.median_rel_err)
    }
}

/// One row per (distribution, scheme) with the median relative error over
/// seeds.
pub fn run_error_table(cfg: &ExperimentConfig) -> Result<ErrorTable> {
    cfg.validate()?;
    let rank = cfg.rank.rank_for(cfg.min_dim());
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for dist in &cfg.distributions {
        let mut per_scheme: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for &seed in &cfg.seeds {
            let record = run_trial(cfg, *dist, rank, seed)?;
            for (scheme, err) in &record.measured {
                per_scheme.entry(scheme.clone()).or_default().push(*err);
            }
            records.push(record);
        }
        for kind in &cfg.schemes {
            let errs = &per_scheme[kind.label()];
            rows.push(ErrorTableRow {
                distribution: dist.to_string(),
                scheme: kind.label().to_string(),
                bits: cfg.bits,
                size_m: cfg.m,
                size_k: cfg.k,
                size_n: cfg.n,
                rank,
                seed_count: errs.len(),
                median_rel_err: median(errs),
                min_rel_err: errs.iter().cloned().fold(f64::INFINITY, f64::min),
                max_rel_err: errs.iter().cloned().fold(0.0, f64::max),
            });
        }
    }
    Ok(ErrorTable {
        config: cfg.clone(),
        rows,
        records,
    })
}

// ---------------------------------------------------------------------------
// rank-sweep

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankSweepRow {
    pub distribution: String,
    pub bits: u8,
    pub size_m: usize,
    pub size_k: usize,
    pub size_n: usize,
    pub rank: usize,
    pub exact_svd: bool,
    pub seed_count: usize,
    pub mean_rel_err: f64,
    pub median_rel_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankSweep {
    pub config: ExperimentConfig,
    pub ranks: Vec<usize>,
    pub rows: Vec<RankSweepRow>,
}

impl RankSweep {
    pub fn to_csv(&self) -> Result<String> {
        csv_with_comment(&config_comment(&self.config)?, &self.rows)
    }
}

/// Compensated-pipeline error as a function of rank. At full rank the
/// randomized factorization gives way to the exact SVD, which turns the
/// four-term split into an identity.
pub fn run_rank_sweep(cfg: &ExperimentConfig, ranks: &[usize]) -> Result<RankSweep> {
    cfg.validate()?;
    if ranks.is_empty() {
        return Err(Error::Usage("rank sweep needs at least one rank".into()));
    }
    let min_dim = cfg.min_dim();
    if ranks.iter().any(|&r| r == 0 || r > min_dim) {
        return Err(Error::RankOutOfRange(format!(
            "ranks must lie in 1..={min_dim}"
        )));
    }
    let dist = cfg.distributions[0];
    let mut rows = Vec::new();
    for &rank in ranks {
        let exact = rank == min_dim;
        let mut errs = Vec::new();
        for &seed in &cfg.seeds {
            let err = if exact {
                let (a, b) = trial_inputs(cfg, dist, seed)?;
                let scheme = GemmScheme::Lrqmm {
                    bits: cfg.bits,
                    method: LowRankMethod::ExactSvd { rank },
                };
                let exact_c = matmul_exact(&a, &b)?;
                let r = run_scheme(&a, &b, &scheme)?;
                relative_error(&exact_c, &r.output)?
            } else {
                run_trial(
                    &ExperimentConfig {
                        schemes: vec![SchemeKind::Lrqmm],
                        ..cfg.clone()
                    },
                    dist,
                    rank,
                    seed,
                )?
                .measured["lrqmm"]
            };
            errs.push(err);
        }
        rows.push(RankSweepRow {
            distribution: dist.to_string(),
            bits: cfg.bits,
            size_m: cfg.m,
            size_k: cfg.k,
            size_n: cfg.n,
            rank,
            exact_svd: exact,
            seed_count: errs.len(),
            mean_rel_err: errs.iter().sum::<f64>() / errs.len() as f64,
            median_rel_err: median(&errs),
        });
    }
    Ok(RankSweep {
        config: cfg.clone(),
        ranks: ranks.to_vec(),
        rows,
    })
}

/// Default rank grid for a square size: 1, 21, 41, ... capped below the
/// size, then the size itself (exact-SVD identity row).
pub fn default_rank_grid(size: usize) -> Vec<usize> {
    let mut ranks: Vec<usize> = (1..size).step_by(20).collect();
    ranks.push(size);
    ranks
}

// ---------------------------------------------------------------------------
// dim-sweep

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimSweepRow {
    pub distribution: String,
    pub bits: u8,
    pub size: usize,
    pub rank_policy: String,
    pub rank: usize,
    pub seed_count: usize,
    pub median_rel_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DimSweep {
    pub config: ExperimentConfig,
    pub sizes: Vec<usize>,
    pub rows: Vec<DimSweepRow>,
}

impl DimSweep {
    pub fn to_csv(&self) -> Result<String> {
        csv_with_comment(&config_comment(&self.config)?, &self.rows)
    }
}

/// Compensated-pipeline error across square sizes for each rank policy.
pub fn run_dim_sweep(
    cfg: &ExperimentConfig,
    sizes: &[usize],
    policies: &[RankPolicy],
) -> Result<DimSweep> {
    cfg.validate()?;
    if sizes.is_empty() || policies.is_empty() {
        return Err(Error::Usage("dim sweep needs sizes and policies".into()));
    }
    let dist = cfg.distributions[0];
    let mut rows = Vec::new();
    for &size in sizes {
        for policy in policies {
            let rank = policy.rank_for(size).min(size);
            let sized = ExperimentConfig {
                m: size,
                k: size,
                n: size,
                schemes: vec![SchemeKind::Lrqmm],
                rank: *policy,
                ..cfg.clone()
            };
            let mut errs = Vec::new();
            for &seed in &cfg.seeds {
                errs.push(run_trial(&sized, dist, rank, seed)?.measured["lrqmm"]);
            }
            rows.push(DimSweepRow {
                distribution: dist.to_string(),
                bits: cfg.bits,
                size,
                rank_policy: policy.label(),
                rank,
                seed_count: errs.len(),
                median_rel_err: median(&errs),
            });
        }
    }
    Ok(DimSweep {
        config: cfg.clone(),
        sizes: sizes.to_vec(),
        rows,
    })
}

// ---------------------------------------------------------------------------
// bound-check

/// Pass statistics for one named check.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct PassRate {
    pub passed: usize,
    pub total: usize,
}

impl PassRate {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.passed as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheckReport {
    pub config: ExperimentConfig,
    pub records: Vec<ExperimentRecord>,
    pub summary: BTreeMap<String, PassRate>,
}

impl BoundCheckReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&json!({
            "config": self.config,
            "trials": self.records,
            "summary": self.summary,
        }))?)
    }

    pub fn rate(&self, name: &str) -> f64 {
        self.summary.get(name).map(|p| p.rate()).unwrap_or(0.0)
    }
}

/// Statistical slack for the estimate-based bounds; documented alongside
/// the 90% pass-rate policy.
pub const ESTIMATE_SLACK: f64 = 2.0;

/// Measures direct and compensated errors per trial and evaluates every
/// applicable bound. Deterministic inequalities (per-matrix quantization
/// bound, oracle-sigma product bound) must pass on every instance;
/// moment-estimate bounds pass at slack 2 and are summarized as rates.
/// Oracle singular values come from a seeded power iteration when the
/// shape allows it (min dimension <= 512).
pub fn run_bound_check(cfg: &ExperimentConfig) -> Result<BoundCheckReport> {
    cfg.validate()?;
    let rank = cfg.rank.rank_for(cfg.min_dim());
    let use_oracle = cfg.min_dim() <= 512;
    let mut records = Vec::new();
    let mut summary: BTreeMap<String, PassRate> = BTreeMap::new();
    let mut tally = |summary: &mut BTreeMap<String, PassRate>, name: &str, ok: bool| {
        let e = summary.entry(name.to_string()).or_default();
        e.total += 1;
        if ok {
            e.passed += 1;
        }
    };

    for dist in &cfg.distributions {
        for &seed in &cfg.seeds {
            let (a, b) = trial_inputs(cfg, *dist, seed)?;
            let exact = matmul_exact(&a, &b)?;
            let exact_norm = exact.frobenius_norm();

            let direct = run_scheme(
                &a,
                &b,
                &cfg.scheme_for(SchemeKind::Direct, rank, derive_seed(seed, 3)),
            )?;
            let lr = run_scheme(
                &a,
                &b,
                &cfg.scheme_for(SchemeKind::Lrqmm, rank, derive_seed(seed, 3)),
            )?;
            let direct_rel = relative_error(&exact, &direct.output)?;
            let lr_rel = relative_error(&exact, &lr.output)?;
            let direct_abs = direct_rel * exact_norm;
            let lr_abs = lr_rel * exact_norm;

            // Per-matrix quantization bound, deterministic.
            let aq = quantize(&a, cfg.bits, cfg.mode)?;
            let bq = quantize(&b, cfg.bits, cfg.mode)?;
            let ra = residual(&a, &aq)?;
            let rb = residual(&b, &bq)?;
            let qm_bound_a = quant_matrix_bound(cfg.m, cfg.k, aq.scale())?;
            let qm_bound_b = quant_matrix_bound(cfg.k, cfg.n, bq.scale())?;
            let qm_pass_a = ra.frobenius_norm() <= qm_bound_a;
            let qm_pass_b = rb.frobenius_norm() <= qm_bound_b;

            // Oracle-sigma product bound, deterministic inequality chain.
            let (oracle_bound, sigma1, gamma1) = if use_oracle {
                let s1 = oracles::power_iteration_sigma1(&a, 300);
                let g1 = oracles::power_iteration_sigma1(&b, 300);
                (
                    Some(quant_gemm_bound_oracle(
                        cfg.m,
                        cfg.k,
                        cfg.n,
                        s1,
                        g1,
                        aq.scale(),
                        bq.scale(),
                    )?),
                    Some(s1),
                    Some(g1),
                )
            } else {
                (None, None, None)
            };

            // Moment-estimate product bound from the input statistics.
            let stats_a = a.stats();
            let (est_bound, input_regime) = quant_gemm_bound_estimated(
                cfg.m,
                cfg.k,
                cfg.n,
                stats_a.mean,
                stats_a.stddev(),
                aq.scale(),
            )?;

            // Compensated bound from the floor-residual statistics.
            let aq_floor = quantize(&a, cfg.bits, RoundingMode::Floor)?;
            let resid_stats = residual(&a, &aq_floor)?.stats();
            let (lr_bound, resid_regime) = lrqmm_bound(
                cfg.m,
                cfg.k,
                cfg.n,
                aq_floor.scale(),
                rank,
                resid_stats.mean,
                resid_stats.stddev(),
            )?;

            // Ratio prediction from the input regime.
            let measured_ratio = if direct_rel > 0.0 {
                lr_rel / direct_rel
            } else {
                0.0
            };
            let ratio_pred = error_ratio_bound(
                cfg.k,
                rank,
                stats_a.mean,
                stats_a.stddev(),
                aq_floor.scale(),
                input_regime,
            )?;

            let est = estimate_singular(&stats_a);
            let big_dim = cfg.m.max(cfg.k) as f64;

            let oracle_pass = oracle_bound.map(|bnd| direct_abs <= bnd);
            let est_pass = direct_abs <= ESTIMATE_SLACK * est_bound;
            let lr_pass = lr_abs <= ESTIMATE_SLACK * lr_bound;
            let ratio_pass = measured_ratio <= ESTIMATE_SLACK * ratio_pred;

            tally(&mut summary, "quant_matrix_a", qm_pass_a);
            tally(&mut summary, "quant_matrix_b", qm_pass_b);
            if let Some(ok) = oracle_pass {
                tally(&mut summary, "quant_gemm_oracle", ok);
            }
            tally(&mut summary, "quant_gemm_estimated_slack2", est_pass);
            tally(&mut summary, "lrqmm_estimated_slack2", lr_pass);
            tally(&mut summary, "ratio_below_predicted_slack2", ratio_pass);

            let mut measured = BTreeMap::new();
            measured.insert("direct".to_string(), direct_rel);
            measured.insert("lrqmm".to_string(), lr_rel);
            measured.insert("ratio".to_string(), measured_ratio);

            let mut pass = BTreeMap::new();
            pass.insert("quant_matrix_a".to_string(), qm_pass_a);
            pass.insert("quant_matrix_b".to_string(), qm_pass_b);
            if let Some(ok) = oracle_pass {
                pass.insert("quant_gemm_oracle".to_string(), ok);
            }
            pass.insert("quant_gemm_estimated_slack2".to_string(), est_pass);
            pass.insert("lrqmm_estimated_slack2".to_string(), lr_pass);
            pass.insert("ratio_below_predicted_slack2".to_string(), ratio_pass);

            let mut timings = BTreeMap::new();
            timings.insert("direct".to_string(), direct.timings);
            timings.insert("lrqmm".to_string(), lr.timings);

            records.push(ExperimentRecord {
                config: super::TrialConfig {
                    distribution: *dist,
                    m: cfg.m,
                    k: cfg.k,
                    n: cfg.n,
                    bits: cfg.bits,
                    rank,
                    mode: cfg.mode,
                    oversampling: cfg.oversampling,
                    power_iters: cfg.power_iters,
                    seed,
                    schemes: vec![SchemeKind::Direct, SchemeKind::Lrqmm],
                },
                seed,
                measured,
                bounds: Some(json!({
                    "quant_matrix": {
                        "bound_a": qm_bound_a,
                        "measured_a": ra.frobenius_norm(),
                        "bound_b": qm_bound_b,
                        "measured_b": rb.frobenius_norm(),
                    },
                    "quant_gemm_oracle": oracle_bound.map(|bnd| json!({
                        "sigma1": sigma1,
                        "gamma1": gamma1,
                        "bound_abs": bnd,
                        "measured_abs": direct_abs,
                    })),
                    "quant_gemm_estimated": {
                        "bound_abs": est_bound,
                        "regime": input_regime,
                        "measured_abs": direct_abs,
                    },
                    "lrqmm_estimated": {
                        "bound_abs": lr_bound,
                        "regime": resid_regime,
                        "measured_abs": lr_abs,
                        "residual_mean": resid_stats.mean,
                        "residual_stddev": resid_stats.stddev(),
                    },
                    "ratio": {
                        "measured": measured_ratio,
                        "predicted_bound": ratio_pred,
                        "regime": input_regime,
                    },
                    "singular_surface": {
                        "kappa1_covariance_units": est.kappa1,
                        "kappa1_raw_units": est.kappa1 * big_dim.sqrt(),
                        "kappa2": est.kappa2,
                        "sigma1_oracle": sigma1,
                    },
                })),
                timings_ns: timings,
                pass: Some(pass),
            });
        }
    }
    Ok(BoundCheckReport {
        config: cfg.clone(),
        records,
        summary,
    })
}

/// Deterministic truncation-bound trials: exact SVD, keep `rank`, compare
/// the measured tail against `sigma_{r+1} sqrt(p - r)`.
pub fn truncation_bound_trials(size: usize, rank: usize, seeds: &[u64]) -> Result<PassRate> {
    let mut rate = PassRate::default();
    for &seed in seeds {
        let a = generate(
            &DistributionSpec::new(
                DistributionKind::Normal {
                    mean: 0.0,
                    stddev: 1.0,
                },
                derive_seed(seed, 21),
            ),
            size,
            size,
        )?;
        let f = exact_svd(&a);
        let truncated = crate::rsvd::LowRankFactors {
            u: DenseMatrix::from_fn(size, rank, |i, j| f.u.get(i, j)),
            sigma: f.sigma[..rank].to_vec(),
            vt: DenseMatrix::from_fn(rank, size, |i, j| f.vt.get(i, j)),
        };
        let err = a.sub(&truncated.reconstruct())?.frobenius_norm();
        let bound = bounds::svd_truncation_bound(size, rank, f.sigma[rank])?;
        rate.total += 1;
        if err <= bound * (1.0 + 1e-9) {
            rate.passed += 1;
        }
    }
    Ok(rate)
}

/// Twenty-seed mean of the randomized factorization error on a matrix with
/// a decaying spectrum, against the expected-error envelope with the
/// oracle tail value. The envelope is stated through the leading tail
/// singular value, so it is meaningful exactly when the spectrum decays.
pub fn rsvd_envelope_trial(
    size: usize,
    rank: usize,
    power_iters: usize,
    seeds: &[u64],
) -> Result<(f64, f64)> {
    let decay: Vec<f64> = (0..size.min(40)).map(|i| 0.7f64.powi(i as i32)).collect();
    let q1 = crate::rsvd::householder_qr_q(&generate(
        &DistributionSpec::new(
            DistributionKind::Normal {
                mean: 0.0,
                stddev: 1.0,
            },
            424242,
        ),
        size,
        decay.len(),
    )?);
    let q2 = crate::rsvd::householder_qr_q(&generate(
        &DistributionSpec::new(
            DistributionKind::Normal {
                mean: 0.0,
                stddev: 1.0,
            },
            434343,
        ),
        size,
        decay.len(),
    )?);
    let a = matmul_exact(&q1.scale_cols(&decay)?, &q2.transpose())?;
    let oracle = exact_svd(&a);
    let bound = bounds::rsvd_expected_bound(size, size, rank, power_iters, oracle.sigma[rank])?;
    let mut total = 0.0;
    for &seed in seeds {
        let cfg = RsvdConfig {
            rank,
            oversampling: 5,
            power_iters,
            seed,
        };
        let f = rsvd(&a, &cfg)?;
        total += a.sub(&f.reconstruct())?.frobenius_norm();
    }
    Ok((total / seeds.len() as f64, bound))
}

/// Evaluation of the noise-dominated ratio constant: the leading term of
/// the predicted ratio at the measured input statistics, against
/// `1/(2^N - 2)`.
#[derive(Debug, Clone, Serialize)]
pub struct RatioConstantCheck {
    pub bits: u8,
    pub size: usize,
    pub rank: usize,
    pub leading_term: f64,
    pub constant: f64,
    pub ratio_of_terms: f64,
}

pub fn ratio_constant_check(
    dist: DistributionKind,
    size: usize,
    bits: u8,
    rank: usize,
    seed: u64,
) -> Result<RatioConstantCheck> {
    let a = generate(&DistributionSpec::new(dist, derive_seed(seed, 1)), size, size)?;
    let stats = a.stats();
    let lambda = crate::quantize::compute_scale(stats.max_abs, bits)?;
    let leading = ratio_case1_leading_term(size, rank, stats.stddev(), lambda);
    let constant = ratio_constant(bits);
    Ok(RatioConstantCheck {
        bits,
        size,
        rank,
        leading_term: leading,
        constant,
        ratio_of_terms: leading / constant,
    })
}

/// Median compensated/direct error ratio per square size; the
/// mean-dominated regime predicts a decrease like 1/sqrt(size).
pub fn ratio_size_sweep(
    dist: DistributionKind,
    sizes: &[usize],
    bits: u8,
    rank: usize,
    seeds: &[u64],
) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    for &size in sizes {
        let cfg = ExperimentConfig {
            distributions: vec![dist],
            m: size,
            k: size,
            n: size,
            bits,
            rank: RankPolicy::Fixed(rank),
            schemes: vec![SchemeKind::Direct, SchemeKind::Lrqmm],
            seeds: seeds.to_vec(),
            ..Default::default()
        };
        let mut ratios = Vec::new();
        for &seed in seeds {
            let r = run_trial(&cfg, dist, rank, seed)?;
            ratios.push(r.measured["lrqmm"] / r.measured["direct"]);
        }
        out.push((size, median(&ratios)));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// profile

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileRow {
    pub size: usize,
    pub phase: String,
    pub reps: usize,
    pub min_ns: u64,
    pub fraction_of_total: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileReport {
    pub sizes: Vec<usize>,
    pub bits: u8,
    pub rank: usize,
    pub reps: usize,
    pub rows: Vec<ProfileRow>,
    /// log-log slope of the integer-product time against size.
    pub gemm_slope: f64,
    /// log-log slope of everything else against size.
    pub overhead_slope: f64,
    pub overhead_fraction_by_size: Vec<(usize, f64)>,
}

impl ProfileReport {
    pub fn to_csv(&self) -> Result<String> {
        let comment = format!(
            "# config = {}",
            json!({
                "sizes": self.sizes,
                "bits": self.bits,
                "rank": self.rank,
                "reps": self.reps,
                "gemm_slope": self.gemm_slope,
                "overhead_slope": self.overhead_slope,
            })
        );
        csv_with_comment(&comment, &self.rows)
    }
}

/// Phase timings of the compensated pipeline across sizes: one warm-up run
/// is discarded, then the minimum over `reps >= 3` repetitions is kept per
/// phase (standard microbenchmark hygiene on a monotonic clock).
pub fn run_profile(
    sizes: &[usize],
    bits: u8,
    rank: usize,
    reps: usize,
    seed: u64,
) -> Result<ProfileReport> {
    if sizes.len() < 2 {
        return Err(Error::Usage("profile needs at least two sizes".into()));
    }
    if reps < 3 {
        return Err(Error::Usage("profile needs at least 3 repetitions".into()));
    }
    let dist = DistributionKind::Uniform { lo: 0.0, hi: 1.0 };
    let mut rows = Vec::new();
    let mut gemm_points = Vec::new();
    let mut overhead_points = Vec::new();
    let mut fractions = Vec::new();
    for &size in sizes {
        let a = generate(&DistributionSpec::new(dist, derive_seed(seed, 1)), size, size)?;
        let b = generate(&DistributionSpec::new(dist, derive_seed(seed, 2)), size, size)?;
        let scheme = GemmScheme::Lrqmm {
            bits,
            method: LowRankMethod::Randomized(RsvdConfig::new(rank, derive_seed(seed, 3))),
        };
        run_scheme(&a, &b, &scheme)?; // warm-up, discarded
        let mut mins: BTreeMap<&str, u64> = BTreeMap::new();
        for _ in 0..reps {
            let r = run_scheme(&a, &b, &scheme)?;
            let t = r.timings;
            for (name, value) in [
                ("quantize", t.quantize_ns),
                ("int_gemm", t.int_gemm_ns),
                ("rsvd", t.rsvd_ns),
                ("residual_terms", t.residual_terms_ns),
                ("package", t.package_ns),
            ] {
                if let Some(v) = value {
                    mins.entry(name)
                        .and_modify(|m| *m = (*m).min(v))
                        .or_insert(v);
                }
            }
        }
        let total: u64 = mins.values().sum();
        let gemm = mins["int_gemm"];
        let overhead = total - gemm;
        for (phase, min_ns) in &mins {
            rows.push(ProfileRow {
                size,
                phase: phase.to_string(),
                reps,
                min_ns: *min_ns,
                fraction_of_total: *min_ns as f64 / total as f64,
            });
        }
        gemm_points.push((size as f64, gemm as f64));
        overhead_points.push((size as f64, overhead as f64));
        fractions.push((size, overhead as f64 / total as f64));
    }
    Ok(ProfileReport {
        sizes: sizes.to_vec(),
        bits,
        rank,
        reps,
        rows,
        gemm_slope: log_log_slope(&gemm_points),
        overhead_slope: log_log_slope(&overhead_points),
        overhead_fraction_by_size: fractions,
    })
}

// ---------------------------------------------------------------------------
// oracle-verify

/// Which check to sabotage, proving the suite notices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultTarget {
    IntGemm,
    QtAssembly,
    SmallSvd,
    FullRankIdentity,
}

impl FaultTarget {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "int_gemm" | "int-gemm" => Ok(FaultTarget::IntGemm),
            "qt_assembly" | "qt-assembly" => Ok(FaultTarget::QtAssembly),
            "small_svd" | "small-svd" => Ok(FaultTarget::SmallSvd),
            "full_rank_identity" | "full-rank-identity" => Ok(FaultTarget::FullRankIdentity),
            other => Err(Error::Usage(format!("unknown fault target: {other}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyCheck {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub config: serde_json::Value,
    pub checks: Vec<VerifyCheck>,
    pub pass: bool,
}

impl VerifyReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Brute-force equivalence suite: the integer kernel against the scalar
/// loop, the re-quantized residual assembly against its literal four-term
/// form, the Jacobi SVD against a Gram eigen-iteration, and the full-rank
/// compensation identity. `fault` perturbs one measured quantity to prove
/// the corresponding check can fail.
pub fn run_oracle_verify(
    max_size: usize,
    seed: u64,
    fault: Option<FaultTarget>,
) -> Result<VerifyReport> {
    if max_size < 4 {
        return Err(Error::Usage("oracle-verify needs max size >= 4".into()));
    }
    let mut checks = Vec::new();
    let inject = |target: FaultTarget, value: f64| -> f64 {
        if fault == Some(target) {
            value + 1.0
        } else {
            value
        }
    };

    // Integer kernel vs scalar loop, int4 and int8 codes, zero ulps.
    {
        let size = max_size.min(200);
        let mut worst: f64 = 0.0;
        for (bits, s) in [(4u8, seed), (8, seed + 1)] {
            let limit = ((1i32 << (bits - 1)) - 1) as f64;
            let gen = |which: u64, rows: usize, cols: usize| -> Result<DenseMatrix> {
                let raw = generate(
                    &DistributionSpec::new(
                        DistributionKind::Uniform {
                            lo: -limit,
                            hi: limit,
                        },
                        derive_seed(s, which),
                    ),
                    rows,
                    cols,
                )?;
                Ok(DenseMatrix::from_fn(rows, cols, |i, j| raw.get(i, j).round()))
            };
            let a = gen(1, size, size)?;
            let b = gen(2, size, size)?;
            let aq = quantize(&a, bits, RoundingMode::Nearest)?;
            let bq = quantize(&b, bits, RoundingMode::Nearest)?;
            let fast = int_gemm(&aq, &bq)?;
            let slow = oracles::int_gemm_reference(&aq, &bq);
            let diff = fast
                .data()
                .iter()
                .zip(slow.data())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            worst = worst.max(diff);
        }
        let measured = inject(FaultTarget::IntGemm, worst);
        checks.push(VerifyCheck {
            name: "int_gemm_matches_scalar_loop".into(),
            pass: measured == 0.0,
            measured,
            threshold: 0.0,
            detail: format!("max absolute difference over {0}^3 products at 4 and 8 bits", max_size.min(200)),
        });
    }

    // Re-quantized residual assembly vs the literal four-term form.
    {
        let dist = DistributionKind::Uniform { lo: 0.0, hi: 1.0 };
        let a = generate(&DistributionSpec::new(dist, derive_seed(seed, 11)), 20, 20)?;
        let b = generate(&DistributionSpec::new(dist, derive_seed(seed, 12)), 20, 20)?;
        let qt = qt_gemm(&a, &b, 4, 4, RoundingMode::Nearest)?;
        let reference = oracles::four_term_reference(&a, &b, 4, RoundingMode::Nearest)?;
        let measured = inject(
            FaultTarget::QtAssembly,
            relative_error(&reference, &qt.output)?,
        );
        checks.push(VerifyCheck {
            name: "qt_matches_four_term_assembly".into(),
            pass: measured <= 1e-12,
            measured,
            threshold: 1e-12,
            detail: "relative error against the literal term-by-term evaluation at 20^3".into(),
        });
    }

    // Jacobi SVD vs the Gram eigen oracle.
    {
        let mut worst: f64 = 0.0;
        for (rows, cols, s) in [(8usize, 5usize, 31u64), (30, 20, 32)] {
            let b = generate(
                &DistributionSpec::new(
                    DistributionKind::Normal {
                        mean: 0.0,
                        stddev: 1.0,
                    },
                    derive_seed(seed, s),
                ),
                rows,
                cols,
            )?;
            let f = exact_svd(&b);
            let eig = oracles::gram_eigenvalues(&b);
            let top = f.sigma[0].max(1e-300);
            for (sv, ev) in f.sigma.iter().zip(&eig) {
                worst = worst.max((sv - ev.max(0.0).sqrt()).abs() / top);
            }
        }
        let measured = inject(FaultTarget::SmallSvd, worst);
        checks.push(VerifyCheck {
            name: "small_svd_matches_gram_eigen".into(),
            pass: measured <= 1e-8,
            measured,
            threshold: 1e-8,
            detail: "singular values against square roots of Gram eigenvalues".into(),
        });
    }

    // Full-rank compensation identity.
    {
        let size = max_size.min(50);
        let a = generate(
            &DistributionSpec::new(
                DistributionKind::Normal {
                    mean: 0.0,
                    stddev: 1.0,
                },
                derive_seed(seed, 41),
            ),
            size,
            size,
        )?;
        let b = generate(
            &DistributionSpec::new(DistributionKind::Uniform { lo: 0.0, hi: 1.0 }, derive_seed(seed, 42)),
            size,
            size,
        )?;
        let mut worst: f64 = 0.0;
        for bits in [4u8, 8] {
            worst = worst.max(lrqmm_full_rank_check(&a, &b, bits)?);
        }
        let measured = inject(FaultTarget::FullRankIdentity, worst);
        checks.push(VerifyCheck {
            name: "full_rank_compensation_identity".into(),
            pass: measured <= 1e-9,
            measured,
            threshold: 1e-9,
            detail: format!("four-term identity at full rank, {size}^3, 4 and 8 bits"),
        });
    }

    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport {
        config: json!({ "max_size": max_size, "seed": seed, "fault": fault }),
        checks,
        pass,
    })
}

// ---------------------------------------------------------------------------

/// Statistics snapshot used by the bound-check surfaces.
pub fn input_stats(
    dist: DistributionKind,
    rows: usize,
    cols: usize,
    seed: u64,
) -> Result<MatrixStats> {
    Ok(generate(&DistributionSpec::new(dist, seed), rows, cols)?.stats())
}

/// Total nanoseconds helper for reports.
pub fn total_ns(t: &qgemm::PhaseTimings) -> u64 {
    t.total_ns()
}

#[allow(unused)]
fn unused_instant_guard(_: Instant) {}
