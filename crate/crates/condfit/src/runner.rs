//! High-level commands behind the `condfit` binary: the full
//! goodness-of-fit pipeline, the P-value correlation experiment, the
//! conditional-vs-bootstrap distance study, the Rao-Blackwell shape
//! estimate, the limit-law table and the Edgeworth diagnostics. All
//! results are plain serializable records; the binary only parses
//! arguments and writes files.

use rayon::prelude::*;
use std::io::BufRead;
use std::path::Path;

use crate::asymptotic::{nystrom_spectrum, weighted_chisq_quantile, KernelGrid, Spectrum};
use crate::bootstrap::{self, NullCdfEstimate};
use crate::conditional::{self, ChainConfig, ChainDiagnostics, ConditionalMethod};
use crate::edfstat::{self, StatKind};
use crate::edgeworth;
use crate::error::{Error, Result};
use crate::expfam::{self, FamilyKind, NaturalParam, SufficientStat, TWO_PI};
use crate::rng::{derive_seed, stream_rng, Stream};

/// Version tag embedded in every emitted report.
pub const SCHEMA_VERSION: u32 = 1;

/// Full configuration of a single goodness-of-fit run. The seed is
/// mandatory: no command falls back to wall-clock entropy.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RunConfig {
    pub family: FamilyKind,
    pub stat: StatKind,
    pub bootstrap_replicates: usize,
    pub conditional_replicates: usize,
    pub burn_in_sweeps: usize,
    pub thin_sweeps: usize,
    pub shards: usize,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(family: FamilyKind, stat: StatKind, seed: u64) -> Self {
        let chain = ChainConfig::default();
        RunConfig {
            family,
            stat,
            bootstrap_replicates: 2000,
            conditional_replicates: 999,
            burn_in_sweeps: chain.burn_in_sweeps,
            thin_sweeps: chain.thin_sweeps,
            shards: chain.shards,
            seed,
        }
    }

    fn chain_config(&self, seed: u64) -> ChainConfig {
        ChainConfig {
            burn_in_sweeps: self.burn_in_sweeps,
            thin_sweeps: self.thin_sweeps,
            shards: self.shards,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.bootstrap_replicates < 99 || self.conditional_replicates < 99 {
            return Err(Error::Domain("B and M must both be at least 99".into()));
        }
        Ok(())
    }
}

/// One P-value with its provenance.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PValueReport {
    pub estimate: f64,
    pub mc_se: f64,
    pub replicates: usize,
    pub seed: u64,
    /// "bootstrap", "exact_simplex" or "triple_move_chain".
    pub method: String,
}

/// Result record of `condfit gof`; serializes losslessly round-trip.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct GofReport {
    pub schema_version: u32,
    pub version: String,
    pub family: FamilyKind,
    pub statistic: StatKind,
    pub n: usize,
    pub theta_hat: Vec<f64>,
    pub statistic_value: f64,
    pub p_bootstrap: PValueReport,
    pub p_conditional: PValueReport,
    pub chain_diagnostics: Option<ChainDiagnostics>,
    pub seed: u64,
}

impl GofReport {
    /// True when every sampler diagnostic is in its healthy range.
    pub fn diagnostics_healthy(&self) -> bool {
        self.chain_diagnostics.as_ref().is_none_or(|d| d.healthy)
    }
}

fn crate_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

/// Read a sample from CSV text: one observation per line, optional
/// header. Von Mises angles are normalized into [0, 2pi) with a warning.
pub fn read_sample(reader: impl BufRead, family: FamilyKind) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let field = line.trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(mut v) => {
                if family == FamilyKind::VonMises && !(0.0..TWO_PI).contains(&v) {
                    log::warn!("line {}: angle {v} normalized into [0, 2pi)", lineno + 1);
                    v = v.rem_euclid(TWO_PI);
                }
                out.push(v);
            }
            Err(_) if lineno == 0 && out.is_empty() => continue, // header
            Err(_) => {
                return Err(Error::Parse(format!(
                    "line {}: cannot parse '{field}'",
                    lineno + 1
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Parse("no observations in input".into()));
    }
    Ok(out)
}

pub fn read_sample_file(path: &Path, family: FamilyKind) -> Result<Vec<f64>> {
    let file = std::fs::File::open(path)?;
    read_sample(std::io::BufReader::new(file), family)
}

/// Full pipeline: fit, statistic, bootstrap P-value, conditional P-value.
pub fn cmd_gof(sample: &[f64], config: &RunConfig) -> Result<GofReport> {
    config.validate()?;
    let theta_hat = expfam::mle(config.family, sample)?;
    let s_obs = edfstat::statistic(config.stat, &edfstat::pit(sample, &theta_hat)?).value;

    let seed_b = derive_seed(config.seed, 0xB00);
    let seed_c = derive_seed(config.seed, 0xC00);
    let p_b = bootstrap::bootstrap_pvalue_given(
        &theta_hat,
        sample.len(),
        s_obs,
        config.stat,
        config.bootstrap_replicates,
        seed_b,
    )?;
    let cond = conditional::conditional_pvalue_given(
        sample,
        config.family,
        s_obs,
        config.stat,
        config.conditional_replicates,
        &config.chain_config(seed_c),
    )?;

    let theta_components = theta_hat.components()[..config.family.dim()].to_vec();
    Ok(GofReport {
        schema_version: SCHEMA_VERSION,
        version: crate_version(),
        family: config.family,
        statistic: config.stat,
        n: sample.len(),
        theta_hat: theta_components,
        statistic_value: s_obs,
        p_bootstrap: PValueReport {
            estimate: p_b.estimate,
            mc_se: p_b.mc_se,
            replicates: p_b.replicates,
            seed: seed_b,
            method: "bootstrap".into(),
        },
        p_conditional: PValueReport {
            estimate: cond.pvalue.estimate,
            mc_se: cond.pvalue.mc_se,
            replicates: cond.pvalue.replicates,
            seed: seed_c,
            method: match cond.method {
                ConditionalMethod::ExactSimplex => "exact_simplex".into(),
                ConditionalMethod::TripleMoveChain => "triple_move_chain".into(),
            },
        },
        chain_diagnostics: cond.diagnostics,
        seed: config.seed,
    })
}

/// Pearson correlation with mean.
fn pearson(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Summary of the bootstrap-vs-conditional P-value agreement experiment.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CorrelationSummary {
    pub family: FamilyKind,
    pub statistic: StatKind,
    pub n: usize,
    pub num_datasets: usize,
    pub bootstrap_replicates: usize,
    pub conditional_replicates: usize,
    pub seed: u64,
    pub theta: Vec<f64>,
    pub pearson: f64,
    /// Percentile bootstrap CI over datasets (2.5%, 97.5%).
    pub pearson_ci: (f64, f64),
    /// Mean and max of |P_c - P_b|: the almost-sure convergence
    /// diagnostic for the difference of the two P-values.
    pub mean_abs_diff: f64,
    pub max_abs_diff: f64,
    /// Raw per-dataset (P_b, P_c) pairs.
    pub pairs: Vec<(f64, f64)>,
}

/// Simulate `num_datasets` null von Mises datasets at a fixed parameter and
/// compare the Watson-statistic bootstrap and conditional P-values.
pub fn cmd_reproduce_correlation(
    n: usize,
    num_datasets: usize,
    b: usize,
    m: usize,
    seed: u64,
    theta: Option<NaturalParam>,
) -> Result<CorrelationSummary> {
    let theta = theta.unwrap_or(NaturalParam::VonMises {
        theta1: 2.0,
        theta2: 0.0,
    });
    if theta.family() != FamilyKind::VonMises {
        return Err(Error::Domain(
            "correlation experiment is defined for the von Mises family".into(),
        ));
    }
    let pairs: Vec<(f64, f64)> = (0..num_datasets as u64)
        .into_par_iter()
        .map(|d| -> Result<(f64, f64)> {
            let mut rng = stream_rng(seed, Stream::Dataset, d);
            let data = expfam::sample(&theta, n, &mut rng);
            let p_b = bootstrap::bootstrap_pvalue(
                &data,
                FamilyKind::VonMises,
                StatKind::Watson,
                b,
                derive_seed(seed, 2 * d),
            )?;
            let chain = ChainConfig::with_seed(derive_seed(seed, 2 * d + 1));
            let p_c = conditional::conditional_pvalue(
                &data,
                FamilyKind::VonMises,
                StatKind::Watson,
                m,
                &chain,
            )?;
            Ok((p_b.estimate, p_c.pvalue.estimate))
        })
        .collect::<Result<_>>()?;

    let corr = pearson(&pairs);
    // percentile bootstrap over datasets
    let resamples = 1000;
    let mut corrs: Vec<f64> = (0..resamples as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, Stream::Generic(7), r);
            let resampled: Vec<(f64, f64)> = (0..pairs.len())
                .map(|_| pairs[rand::Rng::gen_range(&mut rng, 0..pairs.len())])
                .collect();
            pearson(&resampled)
        })
        .collect();
    corrs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ci = (
        corrs[(resamples as f64 * 0.025) as usize],
        corrs[(resamples as f64 * 0.975) as usize],
    );

    let diffs: Vec<f64> = pairs.iter().map(|&(pb, pc)| (pb - pc).abs()).collect();
    Ok(CorrelationSummary {
        family: FamilyKind::VonMises,
        statistic: StatKind::Watson,
        n,
        num_datasets,
        bootstrap_replicates: b,
        conditional_replicates: m,
        seed,
        theta: theta.components()[..2].to_vec(),
        pearson: corr,
        pearson_ci: ci,
        mean_abs_diff: diffs.iter().sum::<f64>() / diffs.len() as f64,
        max_abs_diff: diffs.iter().cloned().fold(0.0, f64::max),
        pairs,
    })
}

/// One sample size of the conditional-vs-unconditional distance study.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Theorem1Row {
    pub n: usize,
    /// sup_x |G_hat(x | n mu) - H_hat(x; theta)|.
    pub sup_distance: f64,
    /// Combined simulation band: DKW at alpha = 0.01 for both CDFs.
    pub mc_band: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Theorem1Table {
    pub family: FamilyKind,
    pub statistic: StatKind,
    pub theta: Vec<f64>,
    pub bootstrap_replicates: usize,
    pub conditional_replicates: usize,
    pub seed: u64,
    pub rows: Vec<Theorem1Row>,
    /// Distances nonincreasing in n, up to the simulation bands. Only
    /// asserted when more than one sample size was run.
    pub trend_nonincreasing: Option<bool>,
}

/// Statistic values over conditional draws at t = n mu(theta), as an
/// empirical CDF (parameters refit per dataset, as in the bootstrap).
fn conditional_statistic_cdf(
    theta: &NaturalParam,
    n: usize,
    kind: StatKind,
    m: usize,
    chain: &ChainConfig,
) -> Result<NullCdfEstimate> {
    let ms = expfam::moment_structure(theta)?;
    let family = theta.family();
    let target = SufficientStat {
        family,
        t: [ms.mu[0] * n as f64, ms.mu[1] * n as f64],
        n,
    };
    let (draws, _) = conditional::conditional_draws_at(&target, m, chain)?;
    let values: Vec<f64> = draws
        .par_iter()
        .map(|d| -> Result<f64> {
            let refit = expfam::mle_from_stat(&expfam::sufficient_stat(family, d)?)?;
            Ok(edfstat::statistic(kind, &edfstat::pit(d, &refit)?).value)
        })
        .collect::<Result<_>>()?;
    Ok(NullCdfEstimate::new(values, kind))
}

/// Estimate H_n(.; theta) by bootstrap at the true theta and G_n(. | n mu)
/// by conditional sampling at exactly t = n mu, and report their sup
/// distance for each n.
pub fn cmd_theorem1_check(
    family: FamilyKind,
    theta: &NaturalParam,
    n_list: &[usize],
    b: usize,
    m: usize,
    seed: u64,
) -> Result<Theorem1Table> {
    if theta.family() != family {
        return Err(Error::Domain("family/parameter mismatch".into()));
    }
    if n_list.is_empty() {
        return Err(Error::Domain("need at least one sample size".into()));
    }
    let kind = StatKind::Cvm;
    let mut rows = Vec::new();
    for (i, &n) in n_list.iter().enumerate() {
        let h_hat =
            bootstrap::null_cdf(family, theta, n, kind, b, derive_seed(seed, 10 + i as u64))?;
        let chain = ChainConfig::with_seed(derive_seed(seed, 100 + i as u64));
        let g_hat = conditional_statistic_cdf(theta, n, kind, m, &chain)?;
        let sup = h_hat.sup_distance(&g_hat);
        let band = ((2.0f64 / 0.01).ln() / (2.0 * b as f64)).sqrt()
            + ((2.0f64 / 0.01).ln() / (2.0 * m as f64)).sqrt();
        rows.push(Theorem1Row {
            n,
            sup_distance: sup,
            mc_band: band,
        });
    }
    let trend = if rows.len() > 1 {
        Some(
            rows.windows(2)
                .all(|w| w[1].sup_distance <= w[0].sup_distance + w[0].mc_band + w[1].mc_band),
        )
    } else {
        None
    };
    Ok(Theorem1Table {
        family,
        statistic: kind,
        theta: theta.components()[..family.dim()].to_vec(),
        bootstrap_replicates: b,
        conditional_replicates: m,
        seed,
        rows,
        trend_nonincreasing: trend,
    })
}

/// Rao-Blackwell shape estimate record for a Gamma sample.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RbEstimateReport {
    pub schema_version: u32,
    pub version: String,
    pub n: usize,
    pub theta_hat: Vec<f64>,
    pub shape_mle: f64,
    pub shape_rao_blackwell: f64,
}

pub fn cmd_rb_estimate(sample: &[f64]) -> Result<RbEstimateReport> {
    let theta_hat = expfam::mle(FamilyKind::Gamma, sample)?;
    let NaturalParam::Gamma { shape, .. } = theta_hat else {
        unreachable!()
    };
    let tilde = edgeworth::gamma_shape_rb_estimate(&theta_hat, sample.len())?;
    Ok(RbEstimateReport {
        schema_version: SCHEMA_VERSION,
        version: crate_version(),
        n: sample.len(),
        theta_hat: theta_hat.components()[..2].to_vec(),
        shape_mle: shape,
        shape_rao_blackwell: tilde,
    })
}

/// Spectrum and quantile table of the limiting law.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LimitDistReport {
    pub schema_version: u32,
    pub version: String,
    /// None for the simple-null (fully specified parameter) law.
    pub family: Option<FamilyKind>,
    pub theta: Option<Vec<f64>>,
    pub statistic: StatKind,
    pub grid_size: usize,
    pub eigenvalues: Vec<f64>,
    pub tail_mass: f64,
    /// (level, quantile) at 0.90 / 0.95 / 0.99.
    pub quantiles: Vec<(f64, f64)>,
}

pub fn cmd_limit_dist(
    theta: Option<&NaturalParam>,
    stat: StatKind,
    grid_size: usize,
    k: usize,
) -> Result<LimitDistReport> {
    let kernel = match theta {
        Some(t) => KernelGrid::for_family(t, stat, grid_size)?,
        None => KernelGrid::simple_null(stat, grid_size)?,
    };
    let spec = nystrom_spectrum(&kernel, k)?;
    let quantiles = limit_quantiles(&spec)?;
    Ok(LimitDistReport {
        schema_version: SCHEMA_VERSION,
        version: crate_version(),
        family: theta.map(|t| t.family()),
        theta: theta.map(|t| t.components()[..t.dim()].to_vec()),
        statistic: stat,
        grid_size,
        eigenvalues: spec.lambdas.clone(),
        tail_mass: spec.tail_mass,
        quantiles,
    })
}

fn limit_quantiles(spec: &Spectrum) -> Result<Vec<(f64, f64)>> {
    [0.90, 0.95, 0.99]
        .iter()
        .map(|&p| Ok((p, weighted_chisq_quantile(spec, p)?)))
        .collect()
}

/// Diagnostics of the Edgeworth expansion machinery: the one-term density
/// error against the exact exponential law, and the O(n^-2) remainder of
/// the conditional-expectation expansion.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EdgeworthCheckReport {
    pub schema_version: u32,
    pub version: String,
    /// sup-norm error of the one-term density at n = 10 and n = 20.
    pub density_sup_err: Vec<(usize, f64)>,
    /// e(20)/e(10); the one-term correction halves it up to slack.
    pub density_error_ratio: f64,
    /// (x, n, n^2 |exact - A(n, J, theta)|) for J = 1(X1 <= x).
    pub expansion_rows: Vec<(f64, usize, f64)>,
    /// All scaled errors within a factor 2 of their n = 10 value.
    pub expansion_within_factor2: bool,
}

pub fn cmd_edgeworth_check() -> Result<EdgeworthCheckReport> {
    let theta = NaturalParam::Exponential { rate: 1.0 };
    let ms = expfam::moment_structure(&theta)?;
    let psi = edgeworth::psi11_coefficients(&ms);

    let exact_density = |n: usize, u: f64| -> f64 {
        let nf = n as f64;
        let s = nf - nf.sqrt() * u; // total at rate 1
        if s <= 0.0 {
            return 0.0;
        }
        ((nf - 1.0) * s.ln() - s - crate::special::ln_gamma(nf)).exp() * nf.sqrt()
    };
    let sup_err = |n: usize| -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..=400 {
            let u = -5.0 + 10.0 * i as f64 / 400.0;
            let approx = edgeworth::edgeworth_density_1d(&ms, n, u)?;
            worst = worst.max((approx - exact_density(n, u)).abs());
        }
        Ok(worst)
    };
    let e10 = sup_err(10)?;
    let e20 = sup_err(20)?;

    let mut rows = Vec::new();
    let mut within = true;
    for x in [0.5, 1.0, 2.0] {
        let input = edgeworth::indicator_expansion_input(&theta, x)?;
        let mut base = 0.0;
        for n in [10usize, 20, 40, 80] {
            let a = edgeworth::rao_blackwell_expansion(&input, &ms, &psi, n)?.a;
            let exact = 1.0 - (1.0 - x / n as f64).powi(n as i32 - 1);
            let scaled = (n * n) as f64 * (exact - a).abs();
            if n == 10 {
                base = scaled;
            } else if scaled > 2.0 * base || scaled < base / 2.0 {
                within = false;
            }
            rows.push((x, n, scaled));
        }
    }
    Ok(EdgeworthCheckReport {
        schema_version: SCHEMA_VERSION,
        version: crate_version(),
        density_sup_err: vec![(10, e10), (20, e20)],
        density_error_ratio: e20 / e10,
        expansion_rows: rows,
        expansion_within_factor2: within,
    })
}
