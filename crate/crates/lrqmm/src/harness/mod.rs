//! Experiment harness: configuration, trial execution, and the commands
//! that reproduce the desk-scale accuracy and timing experiments as
//! machine-readable CSV/JSON.

pub mod cli;
pub mod commands;
pub mod oracles;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::matrix::{
    generate, matmul_exact, relative_error, DenseMatrix, DistributionKind, DistributionSpec,
};
use crate::qgemm::{run_scheme, GemmScheme, LowRankMethod, PhaseTimings};
use crate::quantize::RoundingMode;
use crate::rsvd::RsvdConfig;
use crate::seeding::derive_seed;

/// How the compensation rank is chosen for a given square size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankPolicy {
    Fixed(usize),
    /// `rank = size / divisor`, clamped up to 1 for small sizes.
    Ratio(usize),
}

impl RankPolicy {
    pub fn rank_for(&self, size: usize) -> usize {
        match self {
            RankPolicy::Fixed(r) => *r,
            RankPolicy::Ratio(d) => (size / d).max(1),
        }
    }

    pub fn label(&self) -> String {
        match self {
            RankPolicy::Fixed(r) => format!("r={r}"),
            RankPolicy::Ratio(d) => format!("size/{d}"),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        if let Some(rest) = text.strip_prefix("ratio:") {
            let d: usize = rest
                .parse()
                .map_err(|_| Error::Usage(format!("bad rank ratio divisor: {rest}")))?;
            if d == 0 {
                return Err(Error::Usage("rank ratio divisor must be > 0".into()));
            }
            Ok(RankPolicy::Ratio(d))
        } else {
            let r: usize = text
                .parse()
                .map_err(|_| Error::Usage(format!("bad rank: {text}")))?;
            if r == 0 {
                return Err(Error::Usage("rank must be > 0".into()));
            }
            Ok(RankPolicy::Fixed(r))
        }
    }
}

/// Pipeline selector as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Exact,
    Direct,
    Qt3,
    Qt4,
    Lrqmm,
}

impl SchemeKind {
    pub fn label(&self) -> &'static str {
        match self {
            SchemeKind::Exact => "exact",
            SchemeKind::Direct => "direct",
            SchemeKind::Qt3 => "qt3",
            SchemeKind::Qt4 => "qt4",
            SchemeKind::Lrqmm => "lrqmm",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(SchemeKind::Exact),
            "direct" | "dq" => Ok(SchemeKind::Direct),
            "qt3" | "qt110" => Ok(SchemeKind::Qt3),
            "qt4" | "qt111" => Ok(SchemeKind::Qt4),
            "lrqmm" => Ok(SchemeKind::Lrqmm),
            other => Err(Error::Usage(format!("unknown scheme: {other}"))),
        }
    }
}

/// Parses a distribution written like `uniform(0,1)` or `poisson(10)`.
pub fn parse_distribution(text: &str) -> Result<DistributionKind> {
    let trimmed = text.trim();
    let open = trimmed
        .find('(')
        .ok_or_else(|| Error::Usage(format!("distribution needs parameters: {trimmed}")))?;
    if !trimmed.ends_with(')') {
        return Err(Error::Usage(format!("unbalanced parentheses: {trimmed}")));
    }
    let name = trimmed[..open].to_ascii_lowercase();
    let params: Vec<f64> = trimmed[open + 1..trimmed.len() - 1]
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Usage(format!("bad distribution parameter in {trimmed}")))
        })
        .collect::<Result<_>>()?;
    let arity = |want: usize| {
        if params.len() == want {
            Ok(())
        } else {
            Err(Error::Usage(format!(
                "{name} takes {want} parameter(s), got {}",
                params.len()
            )))
        }
    };
    let kind = match name.as_str() {
        "normal" | "gaussian" => {
            arity(2)?;
            DistributionKind::Normal {
                mean: params[0],
                stddev: params[1],
            }
        }
        "uniform" => {
            arity(2)?;
            DistributionKind::Uniform {
                lo: params[0],
                hi: params[1],
            }
        }
        "exponent" | "exponential" | "exp" => {
            arity(1)?;
            DistributionKind::Exponential { rate: params[0] }
        }
        "chisquare" | "chi2" => {
            arity(1)?;
            DistributionKind::ChiSquare { dof: params[0] }
        }
        "poisson" => {
            arity(1)?;
            DistributionKind::Poisson { rate: params[0] }
        }
        other => return Err(Error::Usage(format!("unknown distribution: {other}"))),
    };
    kind.validate()
        .map_err(|e| Error::Usage(format!("{e}")))?;
    Ok(kind)
}

/// The six input families of the accuracy tables, in table order.
pub fn table_distributions() -> Vec<DistributionKind> {
    vec![
        DistributionKind::Normal {
            mean: 0.0,
            stddev: 1.0,
        },
        DistributionKind::Uniform { lo: 0.0, hi: 1.0 },
        DistributionKind::Uniform { lo: -1.0, hi: 1.0 },
        DistributionKind::Exponential { rate: 4.0 },
        DistributionKind::ChiSquare { dof: 1.0 },
        DistributionKind::Poisson { rate: 10.0 },
    ]
}

/// Full configuration of one experiment family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub distributions: Vec<DistributionKind>,
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub bits: u8,
    pub rank: RankPolicy,
    pub schemes: Vec<SchemeKind>,
    pub seeds: Vec<u64>,
    /// Rounding for the quantized schemes. The compensated pipeline always
    /// rounds down internally; this governs direct and re-quantized
    /// residual schemes. The accuracy tables use floor, matching the
    /// truncating cast the integer pipelines are built on.
    pub mode: RoundingMode,
    pub oversampling: usize,
    pub power_iters: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            distributions: table_distributions(),
            m: 2000,
            k: 2000,
            n: 2000,
            bits: 4,
            rank: RankPolicy::Fixed(10),
            schemes: vec![
                SchemeKind::Direct,
                SchemeKind::Qt3,
                SchemeKind::Qt4,
                SchemeKind::Lrqmm,
            ],
            seeds: vec![1, 2, 3, 4, 5],
            mode: RoundingMode::Floor,
            oversampling: 5,
            power_iters: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn min_dim(&self) -> usize {
        self.m.min(self.k).min(self.n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.distributions.is_empty() {
            return Err(Error::Usage("at least one distribution required".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Usage("at least one scheme required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Usage("at least one seed required".into()));
        }
        if self.m < 2 || self.k < 2 || self.n < 2 {
            return Err(Error::Usage(format!(
                "sizes must be at least 2, got {}x{}x{}",
                self.m, self.k, self.n
            )));
        }
        for kind in &self.distributions {
            kind.validate()?;
        }
        Ok(())
    }

    /// Concrete pipeline for a scheme kind at this configuration. The
    /// sketch seed separates the randomized factorization stream from the
    /// data streams; oversampling shrinks near full rank so the sketch
    /// never exceeds the matrix.
    pub fn scheme_for(&self, kind: SchemeKind, rank: usize, sketch_seed: u64) -> GemmScheme {
        match kind {
            SchemeKind::Exact => GemmScheme::Exact,
            SchemeKind::Direct => GemmScheme::DirectQuant {
                bits: self.bits,
                mode: self.mode,
            },
            SchemeKind::Qt3 => GemmScheme::QtPartial {
                bits: self.bits,
                mode: self.mode,
            },
            SchemeKind::Qt4 => GemmScheme::QtFull {
                bits: self.bits,
                mode: self.mode,
            },
            SchemeKind::Lrqmm => {
                let min_dim = self.min_dim();
                let oversampling = self.oversampling.min(min_dim.saturating_sub(rank));
                GemmScheme::Lrqmm {
                    bits: self.bits,
                    method: LowRankMethod::Randomized(RsvdConfig {
                        rank,
                        oversampling,
                        power_iters: self.power_iters,
                        seed: sketch_seed,
                    }),
                }
            }
        }
    }
}

/// Echo of everything that determines one trial's numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub distribution: DistributionKind,
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub bits: u8,
    pub rank: usize,
    pub mode: RoundingMode,
    pub oversampling: usize,
    pub power_iters: usize,
    pub seed: u64,
    pub schemes: Vec<SchemeKind>,
}

/// One harness trial: configuration echo, measured errors, optional bound
/// evaluations, timings, and pass flags where a pass policy applies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub config: TrialConfig,
    pub seed: u64,
    pub measured: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<serde_json::Value>,
    pub timings_ns: BTreeMap<String, PhaseTimings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass: Option<BTreeMap<String, bool>>,
}

/// Runs every configured scheme on one seeded input pair and measures the
/// relative error against the exact product. Matrix A, matrix B, and the
/// sketch draw their seeds from disjoint streams of the trial seed.
pub fn run_trial(
    cfg: &ExperimentConfig,
    dist: DistributionKind,
    rank: usize,
    seed: u64,
) -> Result<ExperimentRecord> {
    let (a, b) = trial_inputs(cfg, dist, seed)?;
    let exact = matmul_exact(&a, &b)?;
    let mut measured = BTreeMap::new();
    let mut timings = BTreeMap::new();
    for kind in &cfg.schemes {
        let scheme = cfg.scheme_for(*kind, rank, derive_seed(seed, 3));
        let result = run_scheme(&a, &b, &scheme)?;
        let err = relative_error(&exact, &result.output)?;
        measured.insert(kind.label().to_string(), err);
        timings.insert(kind.label().to_string(), result.timings);
    }
    Ok(ExperimentRecord {
        config: TrialConfig {
            distribution: dist,
            m: cfg.m,
            k: cfg.k,
            n: cfg.n,
            bits: cfg.bits,
            rank,
            mode: cfg.mode,
            oversampling: cfg.oversampling,
            power_iters: cfg.power_iters,
            seed,
            schemes: cfg.schemes.clone(),
        },
        seed,
        measured,
        bounds: None,
        timings_ns: timings,
        pass: None,
    })
}

/// Rebuilds a trial from its embedded configuration; used by the
/// determinism checks.
pub fn rerun_record(config: &TrialConfig) -> Result<BTreeMap<String, f64>> {
    let cfg = ExperimentConfig {
        distributions: vec![config.distribution],
        m: config.m,
        k: config.k,
        n: config.n,
        bits: config.bits,
        rank: RankPolicy::Fixed(config.rank),
        schemes: config.schemes.clone(),
        seeds: vec![config.seed],
        mode: config.mode,
        oversampling: config.oversampling,
        power_iters: config.power_iters,
    };
    Ok(run_trial(&cfg, config.distribution, config.rank, config.seed)?.measured)
}

pub(crate) fn trial_inputs(
    cfg: &ExperimentConfig,
    dist: DistributionKind,
    seed: u64,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let a = generate(
        &DistributionSpec::new(dist, derive_seed(seed, 1)),
        cfg.m,
        cfg.k,
    )?;
    let b = generate(
        &DistributionSpec::new(dist, derive_seed(seed, 2)),
        cfg.k,
        cfg.n,
    )?;
    Ok((a, b))
}

/// Median with the usual mid-average for even counts.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Least-squares slope of ln(y) against ln(x).
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (x, y) in points {
        let lx = x.ln();
        let ly = y.ln();
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_policy_arithmetic() {
        assert_eq!(RankPolicy::Ratio(100).rank_for(1000), 10);
        assert_eq!(RankPolicy::Ratio(100).rank_for(50), 1);
        assert_eq!(RankPolicy::Fixed(7).rank_for(1000), 7);
        assert!(RankPolicy::parse("ratio:0").is_err());
        assert_eq!(RankPolicy::parse("ratio:100").unwrap(), RankPolicy::Ratio(100));
        assert_eq!(RankPolicy::parse("12").unwrap(), RankPolicy::Fixed(12));
    }

    #[test]
    fn distribution_parsing() {
        assert_eq!(
            parse_distribution("uniform(0,1)").unwrap(),
            DistributionKind::Uniform { lo: 0.0, hi: 1.0 }
        );
        assert_eq!(
            parse_distribution("Normal(0, 1)").unwrap(),
            DistributionKind::Normal {
                mean: 0.0,
                stddev: 1.0
            }
        );
        assert_eq!(
            parse_distribution("exponent(4)").unwrap(),
            DistributionKind::Exponential { rate: 4.0 }
        );
        assert!(parse_distribution("uniform(1,0)").is_err());
        assert!(parse_distribution("cauchy(0,1)").is_err());
        assert!(parse_distribution("uniform").is_err());
    }

    #[test]
    fn trial_is_reproducible() {
        let cfg = ExperimentConfig {
            m: 24,
            k: 24,
            n: 24,
            seeds: vec![7],
            schemes: vec![SchemeKind::Direct, SchemeKind::Lrqmm],
            rank: RankPolicy::Fixed(3),
            ..Default::default()
        };
        let dist = DistributionKind::Uniform { lo: 0.0, hi: 1.0 };
        let r1 = run_trial(&cfg, dist, 3, 7).unwrap();
        let r2 = rerun_record(&r1.config).unwrap();
        for (k, v) in &r1.measured {
            assert_eq!(v.to_bits(), r2[k].to_bits(), "scheme {k} not bitwise stable");
        }
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn slope_recovers_cubic() {
        let pts: Vec<(f64, f64)> = [256.0, 512.0, 1024.0, 2048.0]
            .iter()
            .map(|&s: &f64| (s, s.powi(3) * 1e-9))
            .collect();
        assert!((log_log_slope(&pts) - 3.0).abs() < 1e-9);
    }
}
