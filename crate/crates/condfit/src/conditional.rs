//! Sampling from the conditional law of a dataset given its sufficient
//! statistic, and the exact conditional P-value built on it.
//!
//! The Exponential family admits direct draws: given the total, the data
//! are a scaled uniform point of the simplex. Gamma and von Mises use a
//! Metropolis chain whose move updates three observations at a time --
//! the smallest block that leaves one degree of freedom under a
//! two-dimensional constraint. The stationary law of each move is derived
//! here from the carrier density and the change-of-variables Jacobian and
//! is validated against an ABC rejection oracle in the tests and the
//! acceptance suite.

use rand::seq::index::sample as index_sample;
use rand::Rng;
use rayon::prelude::*;

use crate::bootstrap::PValue;
use crate::edfstat::{self, StatKind};
use crate::error::{Error, Result};
use crate::expfam::{self, FamilyKind, NaturalParam, SufficientStat, TWO_PI};
use crate::numerics::brent_root;
use crate::rng::{stream_rng, Stream};

/// Tuning for the triple-move chain. One sweep is `n` triple-move
/// attempts. Thinning is measured in sweeps between retained draws. The
/// retained draws may be sharded across independent chains, each burned in
/// separately; the shard count is part of the configuration (never derived
/// from the worker count) so results do not depend on parallelism.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChainConfig {
    pub burn_in_sweeps: usize,
    pub thin_sweeps: usize,
    pub shards: usize,
    pub seed: u64,
}

impl ChainConfig {
    pub fn with_seed(seed: u64) -> Self {
        ChainConfig {
            seed,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.burn_in_sweeps == 0 || self.thin_sweeps == 0 || self.shards == 0 {
            return Err(Error::Domain("chain config fields must be positive".into()));
        }
        Ok(())
    }
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            burn_in_sweeps: 200,
            thin_sweeps: 5,
            shards: 4,
            seed: 0,
        }
    }
}

/// How a conditional P-value was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionalMethod {
    ExactSimplex,
    TripleMoveChain,
}

/// Health report for a chain run. Violations are reported, not fatal.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ChainDiagnostics {
    pub acceptance_rate: f64,
    /// Effective sample size of the retained statistic trace, summed over
    /// shards; None until a statistic trace has been evaluated.
    pub ess: Option<f64>,
    pub retained: usize,
    pub root_failures: u64,
    pub healthy: bool,
    pub notes: Vec<String>,
}

/// Exact draw from the conditional law of an Exponential sample given its
/// total `s`: `s` times a uniform point of the simplex.
pub fn exact_conditional_sample_exponential<R: Rng + ?Sized>(
    s: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if s <= 0.0 || !s.is_finite() {
        return Err(Error::Domain("exponential total must be positive".into()));
    }
    if n < 2 {
        return Err(Error::Domain("need n >= 2".into()));
    }
    let exp = rand_distr::Exp1;
    let mut e: Vec<f64> = (0..n)
        .map(|_| rand_distr::Distribution::sample(&exp, rng))
        .collect();
    let total: f64 = e.iter().sum();
    for v in &mut e {
        *v *= s / total;
    }
    Ok(e)
}

/// Outcome of one triple-move attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveOutcome {
    Accepted,
    Rejected,
    /// Feasible set empty or root extraction failed; counted separately.
    RootFailure,
}

/// Dataset confined to the fiber of its sufficient statistic.
#[derive(Debug, Clone)]
pub struct ConstraintState {
    family: FamilyKind,
    x: Vec<f64>,
    target: SufficientStat,
    accepted: u64,
    proposed: u64,
    root_failures: u64,
}

impl ConstraintState {
    pub fn new(family: FamilyKind, x: Vec<f64>) -> Result<Self> {
        if x.len() < 3 {
            return Err(Error::Domain("triple moves need n >= 3".into()));
        }
        if family == FamilyKind::Exponential {
            return Err(Error::Domain(
                "exponential conditioning has an exact sampler; no chain needed".into(),
            ));
        }
        let target = expfam::sufficient_stat(family, &x)?;
        Ok(ConstraintState {
            family,
            x,
            target,
            accepted: 0,
            proposed: 0,
            root_failures: 0,
        })
    }

    pub fn data(&self) -> &[f64] {
        &self.x
    }

    pub fn target(&self) -> &SufficientStat {
        &self.target
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn root_failures(&self) -> u64 {
        self.root_failures
    }

    /// Total move attempts so far.
    pub fn proposals(&self) -> u64 {
        self.proposed
    }

    /// Max relative deviation of the current sums from the conditioning
    /// statistic. The chain recomputes its local invariants from the data
    /// at every move, so this stays at rounding level.
    pub fn constraint_error(&self) -> f64 {
        let now = expfam::sufficient_stat(self.family, &self.x).expect("state stays in space");
        let mut worst: f64 = 0.0;
        for i in 0..self.family.dim() {
            let scale = self.target.t[i].abs().max(1.0);
            worst = worst.max((now.t[i] - self.target.t[i]).abs() / scale);
        }
        worst
    }

    /// One Metropolis-Hastings update of the observations at `(i, j, k)`,
    /// holding their joint sufficient contribution fixed.
    pub fn triple_move<R: Rng + ?Sized>(
        &mut self,
        idx: (usize, usize, usize),
        rng: &mut R,
    ) -> MoveOutcome {
        let (i, j, k) = idx;
        debug_assert!(i != j && j != k && i != k, "indices must be distinct");
        self.proposed += 1;
        let out = match self.family {
            FamilyKind::Gamma => gamma_triple_move(&mut self.x, i, j, k, rng),
            FamilyKind::VonMises => von_mises_triple_move(&mut self.x, i, j, k, rng),
            FamilyKind::Exponential => unreachable!("rejected in constructor"),
        };
        match out {
            MoveOutcome::Accepted => self.accepted += 1,
            MoveOutcome::RootFailure => self.root_failures += 1,
            MoveOutcome::Rejected => {}
        }
        out
    }

    /// One sweep = n triple-move attempts on uniformly drawn distinct triples.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for _ in 0..self.x.len() {
            let picked = index_sample(rng, self.x.len(), 3);
            self.triple_move((picked.index(0), picked.index(1), picked.index(2)), rng);
        }
    }
}

/// Log fiber density of the first coordinate `v` of a Gamma triple with
/// fixed sum `s3` and product `p3`:  pi(v) ~ 1 / (v sqrt((s3-v)^2 - 4 p3/v)).
/// Returns None at the boundary where the discriminant vanishes.
pub(crate) fn gamma_fiber_log_density(v: f64, s3: f64, p3: f64) -> Option<f64> {
    let disc = (s3 - v) * (s3 - v) - 4.0 * p3 / v;
    if disc <= 0.0 {
        None
    } else {
        Some(-v.ln() - 0.5 * disc.ln())
    }
}

/// Feasible interval {v : v (s3 - v)^2 >= 4 p3} of the Gamma triple move.
/// `c(v) = v (s3-v)^2` rises to its maximum at s3/3 and falls back to zero
/// at s3, so the set is an interval around s3/3.
pub(crate) fn gamma_feasible_interval(s3: f64, p3: f64) -> Option<(f64, f64)> {
    let c = |v: f64| v * (s3 - v) * (s3 - v) - 4.0 * p3;
    let peak = s3 / 3.0;
    if c(peak) <= 0.0 {
        return None; // only the fully degenerate triple fits
    }
    let lo = brent_root(c, 0.0, peak, 0.0, 200).ok()?;
    let hi = brent_root(c, peak, s3, 0.0, 200).ok()?;
    if hi - lo <= 0.0 {
        None
    } else {
        Some((lo, hi))
    }
}

fn gamma_triple_move<R: Rng + ?Sized>(
    x: &mut [f64],
    i: usize,
    j: usize,
    k: usize,
    rng: &mut R,
) -> MoveOutcome {
    let (xi, xj, xk) = (x[i], x[j], x[k]);
    let s3 = xi + xj + xk;
    let p3 = xi * xj * xk;
    let Some((lo, hi)) = gamma_feasible_interval(s3, p3) else {
        return MoveOutcome::RootFailure;
    };
    let v = lo + (hi - lo) * rng.gen::<f64>();
    let sigma = s3 - v;
    let q = p3 / v;
    let disc = (sigma * sigma - 4.0 * q).max(0.0);
    // stable root pair: y+ via the formula, y- via the product
    let y_plus = 0.5 * (sigma + disc.sqrt());
    if y_plus <= 0.0 || y_plus.is_nan() {
        return MoveOutcome::RootFailure;
    }
    let y_minus = q / y_plus;

    // current point: disc reduces exactly to (xj - xk)^2
    let log_pi_cur = gamma_fiber_log_density_from_pair(xi, xj, xk);
    let log_pi_new = gamma_fiber_log_density(v, s3, p3);
    let accept = metropolis_accept(log_pi_cur, log_pi_new, rng);
    if accept {
        let flip = rng.gen::<bool>();
        x[i] = v;
        x[j] = if flip { y_plus } else { y_minus };
        x[k] = if flip { y_minus } else { y_plus };
        MoveOutcome::Accepted
    } else {
        MoveOutcome::Rejected
    }
}

/// Same density as [`gamma_fiber_log_density`] but evaluated from the
/// current triple, where the discriminant is exactly (xj - xk)^2.
fn gamma_fiber_log_density_from_pair(v: f64, xj: f64, xk: f64) -> Option<f64> {
    let diff = (xj - xk).abs();
    if diff <= 0.0 {
        None
    } else {
        Some(-v.ln() - diff.ln())
    }
}

/// Shared Metropolis decision on log target values. A singular current
/// point (None, infinite density at a boundary of the fiber) escapes
/// unconditionally: the event has probability zero at stationarity and the
/// chain must not be absorbed there.
fn metropolis_accept<R: Rng + ?Sized>(cur: Option<f64>, new: Option<f64>, rng: &mut R) -> bool {
    match (cur, new) {
        (None, _) => true,
        (Some(_), None) => true, // proposal on the singular set: density ratio is +inf
        (Some(c), Some(nw)) => {
            let log_ratio = nw - c; // ln pi(new) - ln pi(cur); proposal is symmetric
            log_ratio >= 0.0 || rng.gen::<f64>().ln() < log_ratio
        }
    }
}

/// Log fiber density of one angle `a` of a von Mises triple with fixed
/// resultant `r`: pi(a) ~ 1 / (|w| sqrt(1 - |w|^2/4)) with w = r - u(a).
pub(crate) fn von_mises_fiber_log_density(a: f64, r: [f64; 2]) -> Option<f64> {
    let w = [r[0] - a.cos(), r[1] - a.sin()];
    let rho2 = w[0] * w[0] + w[1] * w[1];
    let rho = rho2.sqrt();
    let rem = 1.0 - 0.25 * rho2;
    if rho <= 1e-14 || rem <= 0.0 {
        None
    } else {
        Some(-rho.ln() - 0.5 * rem.ln())
    }
}

/// Feasible set {a : |r - u(a)| <= 2}: the whole circle when |r| <= 1,
/// otherwise the arc of half-width arccos((|r|^2-3)/(2|r|)) around arg(r).
pub(crate) fn von_mises_feasible_arc(r: [f64; 2]) -> Option<(f64, f64)> {
    let big_r = r[0].hypot(r[1]);
    if big_r > 3.0 + 1e-9 {
        return None;
    }
    if big_r <= 1.0 {
        return Some((0.0, TWO_PI));
    }
    let cos_gamma = ((big_r * big_r - 3.0) / (2.0 * big_r)).clamp(-1.0, 1.0);
    let gamma = cos_gamma.acos();
    let psi = r[1].atan2(r[0]);
    Some((psi - gamma, psi + gamma))
}

fn von_mises_triple_move<R: Rng + ?Sized>(
    x: &mut [f64],
    i: usize,
    j: usize,
    k: usize,
    rng: &mut R,
) -> MoveOutcome {
    let (xi, xj, xk) = (x[i], x[j], x[k]);
    let r = [
        xi.cos() + xj.cos() + xk.cos(),
        xi.sin() + xj.sin() + xk.sin(),
    ];
    let Some((arc_lo, arc_hi)) = von_mises_feasible_arc(r) else {
        return MoveOutcome::RootFailure;
    };
    let a = arc_lo + (arc_hi - arc_lo) * rng.gen::<f64>();
    let w = [r[0] - a.cos(), r[1] - a.sin()];
    let rho = w[0].hypot(w[1]);
    if rho > 2.0 + 1e-12 {
        return MoveOutcome::RootFailure;
    }
    let phi = w[1].atan2(w[0]);
    let beta = (0.5 * rho).clamp(-1.0, 1.0).acos();

    let log_pi_cur = von_mises_fiber_log_density(xi, r);
    let log_pi_new = von_mises_fiber_log_density(a, r);
    if metropolis_accept(log_pi_cur, log_pi_new, rng) {
        let flip = rng.gen::<bool>();
        let (b1, b2) = if flip {
            (phi + beta, phi - beta)
        } else {
            (phi - beta, phi + beta)
        };
        x[i] = a.rem_euclid(TWO_PI);
        x[j] = b1.rem_euclid(TWO_PI);
        x[k] = b2.rem_euclid(TWO_PI);
        MoveOutcome::Accepted
    } else {
        MoveOutcome::Rejected
    }
}

/// A dataset lying exactly on the fiber of `stat`, used to start chains
/// when no observed dataset is available (conditioning at t = n mu).
pub fn fiber_point(stat: &SufficientStat) -> Result<Vec<f64>> {
    stat.validate()?;
    let n = stat.n;
    if n < 2 {
        return Err(Error::Domain("fiber point needs n >= 2".into()));
    }
    match stat.family {
        FamilyKind::Exponential => {
            let s = -stat.t[0];
            Ok(vec![s / n as f64; n])
        }
        FamilyKind::Gamma => {
            let s = -stat.t[1];
            let c = s / n as f64;
            // the equal split maximizes the log-sum (AM-GM); spread the
            // log deficit evenly over pairs (c+d, c-d) so no coordinate
            // collapses to zero even when n times the per-point deficit is
            // large
            let pairs = n / 2;
            let mut x = vec![c; n];
            let mut log_target = stat.t[0];
            if n % 2 == 1 {
                log_target -= c.ln();
            }
            let pair_log = log_target / pairs as f64;
            let prod = pair_log.exp().min(c * c);
            let d = (c * c - prod).max(0.0).sqrt().min(c * (1.0 - 1e-12));
            for p in 0..pairs {
                let base = n % 2 + 2 * p;
                x[base] = c + d;
                x[base + 1] = c - d;
            }
            Ok(x)
        }
        FamilyKind::VonMises => {
            let rho = stat.t[0].hypot(stat.t[1]);
            let psi = stat.t[1].atan2(stat.t[0]);
            let mut x = Vec::with_capacity(n);
            if n.is_multiple_of(2) {
                let beta = (rho / n as f64).clamp(-1.0, 1.0).acos();
                for idx in 0..n {
                    let sign = if idx % 2 == 0 { 1.0 } else { -1.0 };
                    x.push((psi + sign * beta).rem_euclid(TWO_PI));
                }
            } else {
                x.push(psi.rem_euclid(TWO_PI));
                let beta = ((rho - 1.0) / (n - 1) as f64).clamp(-1.0, 1.0).acos();
                for idx in 0..n - 1 {
                    let sign = if idx % 2 == 0 { 1.0 } else { -1.0 };
                    x.push((psi + sign * beta).rem_euclid(TWO_PI));
                }
            }
            Ok(x)
        }
    }
}

/// Retained draws from the conditional law given the sufficient statistic
/// of `start`, via sharded triple-move chains all started at `start`.
pub fn conditional_draws_from(
    start: &[f64],
    family: FamilyKind,
    count: usize,
    config: &ChainConfig,
) -> Result<(Vec<Vec<f64>>, ChainDiagnostics)> {
    config.validate()?;
    if count == 0 {
        return Err(Error::Domain("need at least one retained draw".into()));
    }
    let shards = config.shards.min(count);
    let per_shard: Vec<usize> = (0..shards)
        .map(|s| count / shards + usize::from(s < count % shards))
        .collect();

    struct ShardRun {
        draws: Vec<Vec<f64>>,
        accepted: u64,
        proposed: u64,
        root_failures: u64,
    }
    let shard_results: Vec<Result<ShardRun>> = per_shard
        .par_iter()
        .enumerate()
        .map(|(shard, &take)| {
            let mut rng = stream_rng(config.seed, Stream::Conditional, shard as u64);
            let mut state = ConstraintState::new(family, start.to_vec())?;
            for _ in 0..config.burn_in_sweeps {
                state.sweep(&mut rng);
            }
            let mut draws = Vec::with_capacity(take);
            for _ in 0..take {
                for _ in 0..config.thin_sweeps {
                    state.sweep(&mut rng);
                }
                draws.push(state.data().to_vec());
            }
            Ok(ShardRun {
                draws,
                accepted: state.accepted,
                proposed: state.proposed,
                root_failures: state.root_failures(),
            })
        })
        .collect();

    let mut draws = Vec::with_capacity(count);
    let mut accepted = 0u64;
    let mut proposed = 0u64;
    let mut root_failures = 0u64;
    for r in shard_results {
        let run = r?;
        draws.extend(run.draws);
        accepted += run.accepted;
        proposed += run.proposed;
        root_failures += run.root_failures;
    }
    let acceptance_rate = accepted as f64 / proposed.max(1) as f64;
    let diagnostics = ChainDiagnostics {
        acceptance_rate,
        ess: None, // filled by callers that retain a statistic trace
        retained: draws.len(),
        root_failures,
        healthy: (0.05..=0.95).contains(&acceptance_rate),
        notes: Vec::new(),
    };
    Ok((draws, diagnostics))
}

/// Draws conditioned on an explicit statistic value (e.g. t = n mu for the
/// limit-theorem checks): exact for the Exponential family, chain from a
/// constructed fiber point otherwise.
pub fn conditional_draws_at(
    stat: &SufficientStat,
    count: usize,
    config: &ChainConfig,
) -> Result<(Vec<Vec<f64>>, Option<ChainDiagnostics>)> {
    stat.validate()?;
    match stat.family {
        FamilyKind::Exponential => {
            let s = -stat.t[0];
            let draws: Vec<Vec<f64>> = (0..count as u64)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream_rng(config.seed, Stream::Conditional, i);
                    exact_conditional_sample_exponential(s, stat.n, &mut rng)
                })
                .collect::<Result<_>>()?;
            Ok((draws, None))
        }
        _ => {
            let start = fiber_point(stat)?;
            let got = expfam::sufficient_stat(stat.family, &start)?;
            for i in 0..stat.family.dim() {
                let scale = stat.t[i].abs().max(1.0);
                if (got.t[i] - stat.t[i]).abs() > 1e-9 * scale {
                    return Err(Error::NonConvergence(format!(
                        "fiber start misses the conditioning statistic: {:?} vs {:?}",
                        got.t, stat.t
                    )));
                }
            }
            let (draws, diag) = conditional_draws_from(&start, stat.family, count, config)?;
            Ok((draws, Some(diag)))
        }
    }
}

/// Conditional P-value result: the estimate plus how it was obtained.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ConditionalPValue {
    pub pvalue: PValue,
    pub method: ConditionalMethod,
    pub diagnostics: Option<ChainDiagnostics>,
}

/// Exact conditional P-value of `statistic_kind` given the sufficient
/// statistic of `sample`.
///
/// The parameter entering the PIT is re-estimated from every conditional
/// dataset, mirroring the bootstrap pipeline (on the fiber the MLE is a
/// function of the conditioning statistic, so this re-fit reproduces the
/// observed fit up to solver tolerance).
pub fn conditional_pvalue(
    sample: &[f64],
    family: FamilyKind,
    statistic_kind: StatKind,
    m: usize,
    config: &ChainConfig,
) -> Result<ConditionalPValue> {
    let theta_hat = expfam::mle(family, sample)?;
    let s_obs = edfstat::statistic(statistic_kind, &edfstat::pit(sample, &theta_hat)?).value;
    conditional_pvalue_given(sample, family, s_obs, statistic_kind, m, config)
}

/// As [`conditional_pvalue`] with the observed statistic supplied by the
/// caller (used to force extreme values in tests).
pub fn conditional_pvalue_given(
    sample: &[f64],
    family: FamilyKind,
    s_obs: f64,
    statistic_kind: StatKind,
    m: usize,
    config: &ChainConfig,
) -> Result<ConditionalPValue> {
    if m < 99 {
        return Err(Error::Domain(
            "conditional P-value needs M >= 99 retained datasets".into(),
        ));
    }
    config.validate()?;
    let stat_of = |data: &[f64]| -> Result<f64> {
        let refit = expfam::mle_from_stat(&expfam::sufficient_stat(family, data)?)?;
        Ok(edfstat::statistic(statistic_kind, &edfstat::pit(data, &refit)?).value)
    };

    let (values, method, mut diagnostics) = match family {
        FamilyKind::Exponential => {
            let total: f64 = sample.iter().sum();
            let n = sample.len();
            let values: Vec<f64> = (0..m as u64)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream_rng(config.seed, Stream::Conditional, i);
                    let data = exact_conditional_sample_exponential(total, n, &mut rng)?;
                    stat_of(&data)
                })
                .collect::<Result<_>>()?;
            (values, ConditionalMethod::ExactSimplex, None)
        }
        _ => {
            let (draws, diag) = conditional_draws_from(sample, family, m, config)?;
            let values: Vec<f64> = draws
                .par_iter()
                .map(|d| stat_of(d))
                .collect::<Result<_>>()?;
            (values, ConditionalMethod::TripleMoveChain, Some(diag))
        }
    };

    if let Some(d) = diagnostics.as_mut() {
        let ess = effective_sample_size(&values);
        d.ess = Some(ess);
        if ess < m as f64 / 10.0 {
            d.healthy = false;
            d.notes.push(format!("ESS {ess:.1} below M/10"));
        }
        if !(0.05..=0.95).contains(&d.acceptance_rate) {
            d.notes.push(format!(
                "acceptance rate {:.3} outside [0.05, 0.95]",
                d.acceptance_rate
            ));
        }
    }

    let count = values.iter().filter(|&&v| v >= s_obs).count();
    Ok(ConditionalPValue {
        pvalue: PValue::from_exceedances(count, m, config.seed),
        method,
        diagnostics,
    })
}

/// Effective sample size by Geyer's initial positive sequence.
pub fn effective_sample_size(trace: &[f64]) -> f64 {
    let n = trace.len();
    if n < 4 {
        return n as f64;
    }
    let nf = n as f64;
    let mean = trace.iter().sum::<f64>() / nf;
    let gamma = |lag: usize| -> f64 {
        trace[..n - lag]
            .iter()
            .zip(&trace[lag..])
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / nf
    };
    let g0 = gamma(0);
    if g0 <= 0.0 {
        return nf;
    }
    let mut tau = 1.0;
    let mut lag = 1;
    while lag + 1 < n / 2 {
        let pair = gamma(lag) + gamma(lag + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair / g0;
        lag += 2;
    }
    (nf / tau.max(1.0)).min(nf)
}

/// ABC rejection oracle: unconditional samples at `theta` accepted when
/// every component of the sufficient statistic lands within
/// `eps * max(|t_i|, 1)` of the target. Consistent as eps -> 0; used to
/// validate the chains, not in any production path.
pub fn rejection_oracle<R: Rng + ?Sized>(
    theta: &NaturalParam,
    target: &SufficientStat,
    eps: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if eps <= 0.0 {
        return Err(Error::Domain("eps must be positive".into()));
    }
    let family = theta.family();
    let tol: Vec<f64> = (0..family.dim())
        .map(|i| eps * target.t[i].abs().max(1.0))
        .collect();
    const MAX_ATTEMPTS: u64 = 20_000_000;
    for _ in 0..MAX_ATTEMPTS {
        let data = expfam::sample(theta, target.n, rng);
        let stat = expfam::sufficient_stat(family, &data)?;
        let ok = (0..family.dim()).all(|i| (stat.t[i] - target.t[i]).abs() <= tol[i]);
        if ok {
            return Ok(data);
        }
    }
    Err(Error::Diagnostics(format!(
        "rejection oracle acceptance rate below {:.1e}",
        1.0 / MAX_ATTEMPTS as f64
    )))
}

/// Batch of oracle draws with deterministic per-draw streams.
pub fn rejection_oracle_draws(
    theta: &NaturalParam,
    target: &SufficientStat,
    eps: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, Stream::Oracle, i);
            rejection_oracle(theta, target, eps, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let (mut ia, mut ib) = (0usize, 0usize);
        let mut d: f64 = 0.0;
        while ia < a.len() && ib < b.len() {
            if a[ia] <= b[ib] {
                ia += 1;
            } else {
                ib += 1;
            }
            d = d.max((ia as f64 / na - ib as f64 / nb).abs());
        }
        d
    }

    fn ks_vs_cdf(xs: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
        xs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let n = xs.len() as f64;
        let mut d: f64 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let f = cdf(x);
            d = d
                .max((f - i as f64 / n).abs())
                .max(((i + 1) as f64 / n - f).abs());
        }
        d
    }

    #[test]
    fn exact_exponential_draws_satisfy_constraint() {
        let mut rng = stream_rng(1, Stream::Oracle, 0);
        for _ in 0..200 {
            let data = exact_conditional_sample_exponential(5.0, 5, &mut rng).unwrap();
            let total: f64 = data.iter().sum();
            assert_abs_diff_eq!(total, 5.0, epsilon = 5.0 * 1e-12);
            assert!(data.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn exact_exponential_uniform_marginal_at_n2() {
        let mut rng = stream_rng(2, Stream::Oracle, 0);
        let mut xs: Vec<f64> = (0..100_000)
            .map(|_| exact_conditional_sample_exponential(1.0, 2, &mut rng).unwrap()[0])
            .collect();
        // X1 ~ Uniform(0,1): DKW band at alpha 0.01
        let band = ((2.0f64 / 0.01).ln() / (2.0 * 100_000.0)).sqrt();
        assert!(ks_vs_cdf(&mut xs, |x| x.clamp(0.0, 1.0)) < band);
    }

    #[test]
    fn exact_exponential_beta_marginal_at_n5() {
        let mut rng = stream_rng(3, Stream::Oracle, 0);
        let mut xs: Vec<f64> = (0..100_000)
            .map(|_| exact_conditional_sample_exponential(5.0, 5, &mut rng).unwrap()[0])
            .collect();
        // X1/5 ~ Beta(1,4): F(x) = 1 - (1 - x/5)^4
        let d = ks_vs_cdf(&mut xs, |x| 1.0 - (1.0 - (x / 5.0).clamp(0.0, 1.0)).powi(4));
        assert!(d <= 0.01, "KS {d}");
    }

    #[test]
    fn gamma_move_feasibility_and_detailed_balance() {
        // detailed balance over a grid of the fiber: pi(a) q alpha(a->b)
        // must be symmetric; with a uniform proposal this reduces to
        // min(pi(a), pi(b)) which we verify through the implementation's
        // density on a 100-point grid.
        let (s3, p3) = (6.0, 4.0);
        let (lo, hi) = gamma_feasible_interval(s3, p3).unwrap();
        assert!(lo > 0.0 && hi < s3 && lo < hi);
        let grid: Vec<f64> = (1..=100)
            .map(|i| lo + (hi - lo) * i as f64 / 101.0)
            .collect();
        for (gi, &a) in grid.iter().enumerate() {
            for &b in &grid[gi + 1..] {
                let pa = gamma_fiber_log_density(a, s3, p3).unwrap().exp();
                let pb = gamma_fiber_log_density(b, s3, p3).unwrap().exp();
                let flow_ab = pa * (pb / pa).min(1.0);
                let flow_ba = pb * (pa / pb).min(1.0);
                assert_abs_diff_eq!(flow_ab, flow_ba, epsilon = 1e-10);
            }
        }
        // endpoints of the interval solve v (s3-v)^2 = 4 p3
        for v in [lo, hi] {
            assert_abs_diff_eq!(v * (s3 - v) * (s3 - v), 4.0 * p3, epsilon = 1e-9);
        }
    }

    #[test]
    fn von_mises_zero_resultant_is_always_accepted() {
        // r = 0: the feasible set is the whole circle and pi is constant,
        // so every proposal is accepted.
        let r = [0.0, 0.0];
        assert_eq!(von_mises_feasible_arc(r), Some((0.0, TWO_PI)));
        let reference = von_mises_fiber_log_density(0.3, r).unwrap();
        for i in 0..100 {
            let a = TWO_PI * i as f64 / 100.0;
            let d = von_mises_fiber_log_density(a, r).unwrap();
            assert_abs_diff_eq!(d, reference, epsilon = 1e-12);
        }
    }

    #[test]
    fn chain_preserves_sufficient_statistic() {
        for family in [FamilyKind::Gamma, FamilyKind::VonMises] {
            let start = match family {
                FamilyKind::Gamma => vec![0.5, 1.0, 2.0, 3.0, 0.8, 1.7],
                _ => vec![0.1, 1.0, 2.0, 3.0, 4.4, 5.9],
            };
            let mut state = ConstraintState::new(family, start).unwrap();
            let mut rng = stream_rng(11, Stream::Conditional, 9);
            for _ in 0..2000 {
                state.sweep(&mut rng);
            }
            assert!(
                state.constraint_error() < 1e-9,
                "{family}: {}",
                state.constraint_error()
            );
            assert!(state.acceptance_rate() > 0.05 && state.acceptance_rate() < 0.95);
        }
    }

    #[test]
    fn chain_marginal_matches_rejection_oracle_n3() {
        // single triple, both families: the chain explores the whole fiber
        for family in [FamilyKind::Gamma, FamilyKind::VonMises] {
            let theta = match family {
                FamilyKind::Gamma => NaturalParam::Gamma {
                    shape: 2.0,
                    rate: 1.0,
                },
                _ => NaturalParam::VonMises {
                    theta1: 1.0,
                    theta2: 0.5,
                },
            };
            let ms = expfam::moment_structure(&theta).unwrap();
            let n = 3;
            let target = SufficientStat {
                family,
                t: [ms.mu[0] * n as f64, ms.mu[1] * n as f64],
                n,
            };
            let start = fiber_point(&target).unwrap();
            let cfg = ChainConfig {
                burn_in_sweeps: 300,
                thin_sweeps: 10,
                shards: 4,
                seed: 21,
            };
            let (draws, _) = conditional_draws_from(&start, family, 10_000, &cfg).unwrap();
            let mut chain_x1: Vec<f64> = draws.iter().map(|d| d[0]).collect();

            // eps small enough that the oracle's window bias is below the
            // KS budget (n = 3 conditioning is sharp in t)
            let oracle = rejection_oracle_draws(&theta, &target, 0.01, 10_000, 22).unwrap();
            let mut oracle_x1: Vec<f64> = oracle.iter().map(|d| d[0]).collect();
            let d = ks_two_sample(&mut chain_x1, &mut oracle_x1);
            assert!(d <= 0.03, "{family}: KS {d}");
        }
    }

    #[test]
    fn rejection_oracle_agrees_with_exact_exponential_sampler() {
        // cross-oracle agreement: approximate ABC draws against the exact
        // simplex sampler on the same fiber
        let n = 5;
        let s = 5.0;
        let theta = NaturalParam::Exponential { rate: 1.0 };
        let target = SufficientStat {
            family: FamilyKind::Exponential,
            t: [-s, 0.0],
            n,
        };
        let oracle = rejection_oracle_draws(&theta, &target, 0.01, 10_000, 33).unwrap();
        let mut oracle_x1: Vec<f64> = oracle.iter().map(|d| d[0]).collect();
        let mut exact_x1: Vec<f64> = (0..10_000)
            .map(|i| {
                let mut rng = stream_rng(34, Stream::Oracle, i);
                exact_conditional_sample_exponential(s, n, &mut rng).unwrap()[0]
            })
            .collect();
        let d = ks_two_sample(&mut oracle_x1, &mut exact_x1);
        assert!(d <= 0.02, "KS {d}");
    }

    #[test]
    fn oracle_acceptance_monotone_in_eps() {
        let theta = NaturalParam::Gamma {
            shape: 2.0,
            rate: 1.0,
        };
        let ms = expfam::moment_structure(&theta).unwrap();
        let n = 4;
        let target = SufficientStat {
            family: FamilyKind::Gamma,
            t: [ms.mu[0] * n as f64, ms.mu[1] * n as f64],
            n,
        };
        let mut rates = Vec::new();
        for eps in [0.05, 0.1, 0.2] {
            let mut rng = stream_rng(5, Stream::Oracle, 1000);
            let mut attempts = 0u64;
            let mut accepted = 0u64;
            while accepted < 50 {
                let data = expfam::sample(&theta, n, &mut rng);
                let stat = expfam::sufficient_stat(FamilyKind::Gamma, &data).unwrap();
                attempts += 1;
                let ok = (0..2)
                    .all(|i| (stat.t[i] - target.t[i]).abs() <= eps * target.t[i].abs().max(1.0));
                if ok {
                    accepted += 1;
                }
            }
            rates.push(accepted as f64 / attempts as f64);
        }
        assert!(rates[0] < rates[1] && rates[1] < rates[2], "{rates:?}");
    }

    #[test]
    fn forced_infinite_statistic_gives_minimal_pvalue() {
        let mut rng = stream_rng(6, Stream::Dataset, 0);
        let theta = NaturalParam::Exponential { rate: 1.0 };
        let sample = expfam::sample(&theta, 20, &mut rng);
        let cfg = ChainConfig::with_seed(17);
        let out = conditional_pvalue_given(
            &sample,
            FamilyKind::Exponential,
            f64::INFINITY,
            StatKind::Cvm,
            99,
            &cfg,
        )
        .unwrap();
        assert_eq!(out.pvalue.estimate, 1.0 / 100.0);
        assert_eq!(out.method, ConditionalMethod::ExactSimplex);
    }

    #[test]
    fn conditional_pvalue_is_distribution_free_for_exponential() {
        // two different true rates give indistinguishable P_c laws
        let cfg = ChainConfig::with_seed(1);
        let mut all = Vec::new();
        for (case, rate) in [(0u64, 0.5), (1u64, 3.0)] {
            let theta = NaturalParam::Exponential { rate };
            let ps: Vec<f64> = (0..500u64)
                .into_par_iter()
                .map(|d| {
                    let mut rng = stream_rng(900 + case, Stream::Dataset, d);
                    let data = expfam::sample(&theta, 15, &mut rng);
                    let mut c = cfg;
                    c.seed = d * 2 + case;
                    conditional_pvalue(&data, FamilyKind::Exponential, StatKind::Cvm, 99, &c)
                        .unwrap()
                        .pvalue
                        .estimate
                })
                .collect();
            all.push(ps);
        }
        let mut a = all.remove(0);
        let mut b = all.remove(0);
        let d = ks_two_sample(&mut a, &mut b);
        // two-sample KS critical value at alpha = 0.01 for n = m = 500
        let crit = 1.628 * (2.0f64 / 500.0).sqrt();
        assert!(d < crit, "KS {d} vs {crit}");
    }

    #[test]
    fn fiber_point_hits_target_exactly() {
        // the gamma case at n = 200 carries a large total log deficit and
        // needs it spread across coordinates
        let ms = expfam::moment_structure(&NaturalParam::Gamma {
            shape: 2.0,
            rate: 1.0,
        })
        .unwrap();
        for (family, t, n) in [
            (FamilyKind::Gamma, [-1.2, -14.0], 7usize),
            (FamilyKind::Gamma, [200.0 * ms.mu[0], 200.0 * ms.mu[1]], 200),
            (FamilyKind::VonMises, [2.3, -1.1], 6),
            (FamilyKind::VonMises, [2.3, -1.1], 7),
            (FamilyKind::Exponential, [-9.0, 0.0], 4),
        ] {
            let stat = SufficientStat { family, t, n };
            let x = fiber_point(&stat).unwrap();
            assert_eq!(x.len(), n);
            let got = expfam::sufficient_stat(family, &x).unwrap();
            for i in 0..family.dim() {
                assert_abs_diff_eq!(got.t[i], t[i], epsilon = 1e-9 * t[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn ess_detects_correlation() {
        let mut rng = stream_rng(8, Stream::Oracle, 3);
        let iid: Vec<f64> = (0..4000).map(|_| rng.gen::<f64>()).collect();
        let e = effective_sample_size(&iid);
        assert!(e > 2000.0, "iid ESS {e}");
        // strongly autocorrelated AR(1)
        let mut ar = vec![0.0f64];
        for i in 1..4000 {
            ar.push(0.95 * ar[i - 1] + rng.gen::<f64>() - 0.5);
        }
        let e_ar = effective_sample_size(&ar);
        assert!(e_ar < 1000.0, "AR ESS {e_ar}");
    }
}
