//! Parametric bootstrap: the null distribution of an EDF statistic at a
//! fitted (or given) parameter, estimated by simulation with per-replicate
//! refitting, and the associated add-one P-value.

use rayon::prelude::*;

use crate::edfstat::{self, StatKind};
use crate::error::{Error, Result};
use crate::expfam::{self, NaturalParam};
use crate::rng::{stream_rng, Stream};

/// Fraction of replicates allowed to be re-drawn after a failed refit
/// before the whole run is declared non-convergent.
const MAX_REDRAW_FRACTION: f64 = 0.01;
/// Attempts per replicate before giving up on it entirely.
const MAX_ATTEMPTS_PER_REPLICATE: u64 = 64;

/// Monte Carlo P-value with its add-one estimate and standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PValue {
    /// (1 + #exceedances) / (replicates + 1); never exactly 0 or 1.
    pub estimate: f64,
    /// sqrt(p (1-p) / replicates).
    pub mc_se: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl PValue {
    pub fn from_exceedances(count: usize, replicates: usize, seed: u64) -> PValue {
        let p = (1 + count) as f64 / (replicates + 1) as f64;
        PValue {
            estimate: p,
            mc_se: (p * (1.0 - p) / replicates as f64).sqrt(),
            replicates,
            seed,
        }
    }
}

/// Sorted statistic values from null replicates; evaluable as a
/// right-continuous empirical CDF.
#[derive(Debug, Clone)]
pub struct NullCdfEstimate {
    values: Vec<f64>,
    pub kind: StatKind,
}

impl NullCdfEstimate {
    pub fn new(mut values: Vec<f64>, kind: StatKind) -> Self {
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        NullCdfEstimate { values, kind }
    }

    /// Empirical CDF: fraction of replicate values <= x.
    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.values.partition_point(|&v| v <= x);
        idx as f64 / self.values.len() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest pointwise gap between two empirical CDFs, scanned over the
    /// jump points of both.
    pub fn sup_distance(&self, other: &NullCdfEstimate) -> f64 {
        let mut sup: f64 = 0.0;
        for &v in self.values.iter().chain(other.values.iter()) {
            sup = sup.max((self.eval(v) - other.eval(v)).abs());
        }
        sup
    }
}

/// One null replicate of the statistic at `theta`: simulate n points,
/// refit, transform, evaluate. Re-draws (with a counter) when the refit
/// fails.
fn replicate_statistic(
    theta: &NaturalParam,
    n: usize,
    kind: StatKind,
    seed: u64,
    stream: Stream,
    index: u64,
) -> Result<(f64, u64)> {
    let mut rng = stream_rng(seed, stream, index);
    let mut redraws = 0;
    for _ in 0..MAX_ATTEMPTS_PER_REPLICATE {
        let data = expfam::sample(theta, n, &mut rng);
        let refit = match expfam::mle(theta.family(), &data) {
            Ok(t) => t,
            Err(_) => {
                redraws += 1;
                continue;
            }
        };
        let u = edfstat::pit(&data, &refit)?;
        return Ok((edfstat::statistic(kind, &u).value, redraws));
    }
    Err(Error::NonConvergence(format!(
        "replicate {index}: refit failed {MAX_ATTEMPTS_PER_REPLICATE} times"
    )))
}

fn run_replicates(
    theta: &NaturalParam,
    n: usize,
    kind: StatKind,
    b: usize,
    seed: u64,
    stream: Stream,
) -> Result<Vec<f64>> {
    let results: Vec<Result<(f64, u64)>> = (0..b as u64)
        .into_par_iter()
        .map(|i| replicate_statistic(theta, n, kind, seed, stream, i))
        .collect();
    let mut values = Vec::with_capacity(b);
    let mut redraws = 0;
    for r in results {
        let (v, rd) = r?;
        values.push(v);
        redraws += rd;
    }
    if redraws as f64 > MAX_REDRAW_FRACTION * b as f64 {
        return Err(Error::NonConvergence(format!(
            "{redraws} re-drawn replicates out of {b} exceeds the {MAX_REDRAW_FRACTION} budget"
        )));
    }
    Ok(values)
}

/// Parametric bootstrap P-value of `statistic_kind` for `sample`.
///
/// Fits the MLE, simulates `b` null datasets of the same size at the fit,
/// refits inside every replicate, and counts replicate statistics at least
/// as large as the observed one (ties count as exceedances).
pub fn bootstrap_pvalue(
    sample: &[f64],
    family: expfam::FamilyKind,
    statistic_kind: StatKind,
    b: usize,
    seed: u64,
) -> Result<PValue> {
    let theta_hat = expfam::mle(family, sample)?;
    let s_obs = edfstat::statistic(statistic_kind, &edfstat::pit(sample, &theta_hat)?).value;
    bootstrap_pvalue_given(&theta_hat, sample.len(), s_obs, statistic_kind, b, seed)
}

/// Bootstrap P-value against an externally supplied observed value; the
/// entry point for forced-statistic tests and for callers that already
/// fitted the parameter.
pub fn bootstrap_pvalue_given(
    theta_hat: &NaturalParam,
    n: usize,
    s_obs: f64,
    statistic_kind: StatKind,
    b: usize,
    seed: u64,
) -> Result<PValue> {
    if b < 99 {
        return Err(Error::Domain("bootstrap needs B >= 99 replicates".into()));
    }
    let values = run_replicates(theta_hat, n, statistic_kind, b, seed, Stream::Bootstrap)?;
    let count = values.iter().filter(|&&v| v >= s_obs).count();
    Ok(PValue::from_exceedances(count, b, seed))
}

/// Estimate of the null CDF H_n(.; theta) of the statistic with parameters
/// refit per replicate; deterministic given the seed.
pub fn null_cdf(
    family: expfam::FamilyKind,
    theta: &NaturalParam,
    n: usize,
    statistic_kind: StatKind,
    b: usize,
    seed: u64,
) -> Result<NullCdfEstimate> {
    if family != theta.family() {
        return Err(Error::Domain("family/parameter mismatch".into()));
    }
    if b < 1000 {
        return Err(Error::Domain("null_cdf needs B >= 1000 replicates".into()));
    }
    let values = run_replicates(theta, n, statistic_kind, b, seed, Stream::NullCdf)?;
    Ok(NullCdfEstimate::new(values, statistic_kind))
}
