//! The limiting null law of the statistics: covariance kernel of the
//! estimated empirical process, Nystrom eigenvalues of the kernel
//! operator, and the CDF of the weighted chi-square series by numerical
//! characteristic-function inversion.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::edfstat::StatKind;
use crate::error::{Error, Result};
use crate::expfam::{self, NaturalParam};
use crate::numerics::{adaptive_simpson, brent_root};
use crate::rng::{stream_rng, Stream};

/// Derivative of the CDF in the natural parameter at fixed x, computed
/// through the identity  xi_j(s) = E[(T_j(X) - mu_j) 1(X <= x)]  with
/// x the s-quantile; evaluated by adaptive quadrature.
pub fn score_shift(theta: &NaturalParam, s: f64) -> Result<[f64; 2]> {
    if !(0.0 < s && s < 1.0) {
        return Err(Error::Domain("score shift needs s in (0,1)".into()));
    }
    let x = expfam::quantile(theta, s)?;
    let ms = expfam::moment_structure(theta)?;
    let family = theta.family();
    let mut xi = [0.0; 2];
    for j in 0..family.dim() {
        xi[j] = adaptive_simpson(
            |y| {
                let yy = y.max(1e-300);
                (family.t_of(yy)[j] - ms.mu[j]) * expfam::density(theta, yy)
            },
            0.0,
            x,
            1e-9,
        );
    }
    Ok(xi)
}

/// rho_theta(s, t) = min(s,t) - st - xi(s)' V^{-1} xi(t); the covariance of
/// the limiting process of the estimated empirical process. V is the
/// per-observation Fisher information of the family.
pub fn limit_covariance(theta: &NaturalParam, s: f64, t: f64) -> Result<f64> {
    let xi_s = score_shift(theta, s)?;
    let xi_t = score_shift(theta, t)?;
    let ms = expfam::moment_structure(theta)?;
    Ok(covariance_from_shift(
        &ms.d,
        s,
        t,
        &xi_s,
        &xi_t,
        theta.dim(),
    ))
}

fn covariance_from_shift(
    d: &[[f64; 2]; 2],
    s: f64,
    t: f64,
    xi_s: &[f64; 2],
    xi_t: &[f64; 2],
    k: usize,
) -> f64 {
    let mut quad = 0.0;
    for i in 0..k {
        for j in 0..k {
            quad += xi_s[i] * d[i][j] * xi_t[j];
        }
    }
    s.min(t) - s * t - quad
}

/// Midpoint-rule discretization of the covariance kernel on (0,1).
#[derive(Debug, Clone)]
pub struct KernelGrid {
    /// Midpoints s_i = (i + 1/2)/m.
    pub points: Vec<f64>,
    /// Kernel values zeta(s_i, s_j), row-major.
    pub matrix: Vec<f64>,
    pub m: usize,
}

impl KernelGrid {
    fn from_fn(m: usize, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        let points: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
        let mut matrix = vec![0.0; m * m];
        let rows: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|i| (0..m).map(|j| f(points[i], points[j])).collect())
            .collect();
        for (i, row) in rows.into_iter().enumerate() {
            matrix[i * m..(i + 1) * m].copy_from_slice(&row);
        }
        KernelGrid { points, matrix, m }
    }

    /// Kernel of the estimated-parameter process for `theta`, for the
    /// Cramer-von Mises or Watson statistic (unit weight).
    pub fn for_family(theta: &NaturalParam, kind: StatKind, m: usize) -> Result<Self> {
        let points: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
        let ms = expfam::moment_structure(theta)?;
        let k = theta.dim();
        let shifts: Vec<[f64; 2]> = points
            .par_iter()
            .map(|&s| score_shift(theta, s))
            .collect::<Result<_>>()?;
        let mut grid = Self::from_fn(m, |_, _| 0.0);
        for i in 0..m {
            for j in i..m {
                let v =
                    covariance_from_shift(&ms.d, points[i], points[j], &shifts[i], &shifts[j], k);
                grid.matrix[i * m + j] = v;
                grid.matrix[j * m + i] = v;
            }
        }
        grid.points = points;
        Self::finish(grid, kind)
    }

    /// Simple-null kernel (no estimated parameter): the Brownian bridge
    /// kernel, mean-subtracted for the Watson statistic.
    pub fn simple_null(kind: StatKind, m: usize) -> Result<Self> {
        let grid = Self::from_fn(m, |s, t| s.min(t) - s * t);
        Self::finish(grid, kind)
    }

    fn finish(mut grid: KernelGrid, kind: StatKind) -> Result<Self> {
        match kind {
            StatKind::Cvm => Ok(grid),
            StatKind::Watson => {
                grid.subtract_means();
                Ok(grid)
            }
            _ => Err(Error::Domain(
                "limit spectra are defined for the cvm and watson statistics".into(),
            )),
        }
    }

    /// Watson's statistic integrates the mean-subtracted process, which
    /// replaces the kernel by zeta - row means - column means + grand mean.
    fn subtract_means(&mut self) {
        let m = self.m;
        let row_mean: Vec<f64> = (0..m)
            .map(|i| self.matrix[i * m..(i + 1) * m].iter().sum::<f64>() / m as f64)
            .collect();
        let grand = row_mean.iter().sum::<f64>() / m as f64;
        for i in 0..m {
            for j in 0..m {
                self.matrix[i * m + j] += grand - row_mean[i] - row_mean[j];
            }
        }
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.matrix[i * self.m + i]
    }

    /// Midpoint approximation of the trace integral of the kernel diagonal.
    pub fn trace(&self) -> f64 {
        (0..self.m).map(|i| self.diagonal(i)).sum::<f64>() / self.m as f64
    }
}

/// Truncated eigenvalue sequence of the kernel operator plus the lumped
/// tail mass (kept as one extra pseudo-eigenvalue so the total variance is
/// preserved).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Spectrum {
    /// lambda_1 >= ... >= lambda_K >= 0.
    pub lambdas: Vec<f64>,
    /// Remaining trace mass beyond the truncation.
    pub tail_mass: f64,
}

impl Spectrum {
    pub fn total_mass(&self) -> f64 {
        self.lambdas.iter().sum::<f64>() + self.tail_mass
    }

    /// Eigenvalues including the tail lump, as used by the CDF inversion.
    pub fn effective_lambdas(&self) -> Vec<f64> {
        let mut l = self.lambdas.clone();
        if self.tail_mass > 0.0 {
            l.push(self.tail_mass);
        }
        l
    }
}

/// Top-K eigenvalues of the midpoint-rule Nystrom matrix (1/m) zeta(s_i, s_j).
pub fn nystrom_spectrum(kernel: &KernelGrid, k: usize) -> Result<Spectrum> {
    if kernel.m < 4 * k {
        return Err(Error::Domain(format!(
            "grid of {} points too coarse for {k} eigenvalues (need m >= 4K)",
            kernel.m
        )));
    }
    let m = kernel.m;
    let scaled = DMatrix::from_fn(m, m, |i, j| kernel.matrix[i * m + j] / m as f64);
    let eig = scaled.symmetric_eigen();
    let mut lambdas: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    lambdas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if let Some(&low) = lambdas.last() {
        if low < -1e-10 {
            return Err(Error::NonConvergence(format!(
                "kernel matrix has a significantly negative eigenvalue {low}"
            )));
        }
    }
    let total: f64 = lambdas.iter().sum();
    let kept: Vec<f64> = lambdas.iter().take(k).map(|&l| l.max(0.0)).collect();
    let tail = (total - kept.iter().sum::<f64>()).max(0.0);
    Ok(Spectrum {
        lambdas: kept,
        tail_mass: tail,
    })
}

/// CDF value together with the Monte Carlo standard error when the
/// fallback path was used.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct CdfValue {
    pub value: f64,
    /// None when computed by characteristic-function inversion.
    pub mc_se: Option<f64>,
}

const IMHOF_TOL: f64 = 1e-6;

/// P(sum lambda_j Z_j^2 <= x) by Imhof's oscillatory integral,
///
///   1/2 - (1/pi) int_0^U sin(beta(u)) / (u gamma(u)) du,
///   beta(u) = 1/2 sum arctan(lambda_j u) - x u / 2,
///   ln gamma(u) = 1/4 sum ln(1 + lambda_j^2 u^2),
///
/// truncated at a U giving absolute error below 1e-6. Falls back to a
/// 10^6-draw Monte Carlo estimate (with reported standard error) if the
/// inversion misbehaves.
pub fn weighted_chisq_cdf(spec: &Spectrum, x: f64) -> Result<CdfValue> {
    let lambdas: Vec<f64> = spec
        .effective_lambdas()
        .into_iter()
        .filter(|&l| l > 0.0)
        .collect();
    if lambdas.is_empty() {
        return Err(Error::Domain("spectrum has no positive eigenvalues".into()));
    }
    if x <= 0.0 {
        return Ok(CdfValue {
            value: 0.0,
            mc_se: None,
        });
    }
    match imhof_cdf(&lambdas, x) {
        Some(v) => Ok(CdfValue {
            value: v.clamp(0.0, 1.0),
            mc_se: None,
        }),
        None => {
            log::warn!("imhof inversion failed at x = {x}; falling back to Monte Carlo");
            let (value, se) = monte_carlo_cdf(&lambdas, x, 1_000_000, 0x1234_5678);
            Ok(CdfValue {
                value,
                mc_se: Some(se),
            })
        }
    }
}

fn imhof_cdf(lambdas: &[f64], x: f64) -> Option<f64> {
    use std::f64::consts::PI;
    let beta = |u: f64| -> f64 {
        lambdas.iter().map(|&l| 0.5 * (l * u).atan()).sum::<f64>() - 0.5 * x * u
    };
    let beta_prime = |u: f64| -> f64 {
        lambdas
            .iter()
            .map(|&l| 0.5 * l / (1.0 + l * l * u * u))
            .sum::<f64>()
            - 0.5 * x
    };
    let lambda_sum: f64 = lambdas.iter().sum();
    let integrand = |u: f64| -> f64 {
        if u < 1e-14 {
            return 0.5 * (lambda_sum - x); // limit of sin(beta)/(u gamma)
        }
        let mut b = -0.5 * x * u;
        let mut ln_gamma = 0.0;
        for &l in lambdas {
            b += 0.5 * (l * u).atan();
            ln_gamma += 0.25 * (l * l * u * u).ln_1p();
        }
        b.sin() * (-u.ln() - ln_gamma).exp()
    };

    // beta is concave (beta'' < 0 for u > 0) and decays like -x u / 2, so
    // it has a single peak; beyond it the zeros of sin(beta) are the
    // solutions of beta = m pi for descending integers m.
    let u_peak = if beta_prime(0.0) <= 0.0 {
        0.0
    } else {
        let mut hi = 1.0;
        while beta_prime(hi) > 0.0 {
            hi *= 2.0;
            if hi > 1e14 {
                return None;
            }
        }
        brent_root(beta_prime, 0.0, hi, 0.0, 200).ok()?
    };
    let spacing = 2.0 * PI / x;
    let find_zero = |target: f64, lo: f64| -> Option<f64> {
        if beta(lo) <= target {
            return Some(lo);
        }
        let mut span = 0.25 * spacing;
        while beta(lo + span) > target {
            span *= 2.0;
            if span > 1e9 * spacing {
                return None;
            }
        }
        brent_root(|u| beta(u) - target, lo, lo + span, 0.0, 200).ok()
    };

    // head: everything up to the first zero past the peak
    let mut target = (beta(u_peak) / PI).floor() * PI;
    if target >= beta(u_peak) {
        target -= PI;
    }
    let z0 = find_zero(target, u_peak)?;
    let head = adaptive_simpson(integrand, 0.0, z0, IMHOF_TOL / 20.0);

    // tail: one term per half period of sin(beta); the signed terms
    // alternate, so repeated averaging of the partial sums converges even
    // when the amplitudes decay as slowly as u^{-3/2}
    const TERMS: usize = 48;
    let mut partial = Vec::with_capacity(TERMS);
    let mut sum = 0.0;
    let mut lo = z0;
    for _ in 0..TERMS {
        target -= PI;
        let hi = find_zero(target, lo)?;
        sum += adaptive_simpson(integrand, lo, hi, IMHOF_TOL / 200.0);
        partial.push(sum);
        lo = hi;
    }
    let mut avg = partial;
    for level in 1..avg.len() {
        for i in 0..avg.len() - level {
            avg[i] = 0.5 * (avg[i] + avg[i + 1]);
        }
    }
    let tail = avg[0];

    let value = 0.5 - (head + tail) / PI;
    if value.is_finite() && (-1e-3..=1.0 + 1e-3).contains(&value) {
        Some(value)
    } else {
        None
    }
}

fn monte_carlo_cdf(lambdas: &[f64], x: f64, draws: usize, seed: u64) -> (f64, f64) {
    let hits: u64 = (0..draws as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, Stream::Oracle, i);
            let q: f64 = lambdas
                .iter()
                .map(|&l| {
                    let z: f64 =
                        rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                    l * z * z
                })
                .sum();
            u64::from(q <= x)
        })
        .sum();
    let p = hits as f64 / draws as f64;
    (p, (p * (1.0 - p) / draws as f64).sqrt())
}

/// Quantile of the weighted chi-square law by root finding on the CDF.
pub fn weighted_chisq_quantile(spec: &Spectrum, p: f64) -> Result<f64> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::Domain("quantile needs p in (0,1)".into()));
    }
    let mut hi = spec.total_mass().max(1e-6);
    while weighted_chisq_cdf(spec, hi)?.value < p {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::NonConvergence(
                "quantile bracket expansion failed".into(),
            ));
        }
    }
    brent_root(
        |x| {
            weighted_chisq_cdf(spec, x)
                .map(|c| c.value - p)
                .unwrap_or(f64::NAN)
        },
        0.0,
        hi,
        1e-9,
        200,
    )
}
