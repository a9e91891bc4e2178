//! The three natural exponential families the engine supports, with their
//! cumulant machinery, maximum-likelihood fitting, CDFs and samplers.
//!
//! Conventions (fixed throughout the crate):
//! * Exponential: density `theta * exp(-theta x)` on (0, inf),
//!   `T(x) = -x`, `kappa(theta) = -ln theta`, natural space `theta > 0`.
//! * Gamma: shape `theta1 > 0`, rate `theta2 > 0`, `T(x) = (ln x, -x)`,
//!   `kappa = ln Gamma(theta1) - theta1 ln theta2`.
//! * Von Mises: angles on [0, 2pi), `T(x) = (cos x, sin x)`,
//!   `kappa = ln I0(|theta|)`, natural space all of R^2.

use rand::Rng;
use rand_distr::Distribution;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{adaptive_simpson, brent_root, kahan_sum};
use crate::special;

pub const TWO_PI: f64 = 2.0 * PI;

/// Which of the three supported families a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Exponential,
    Gamma,
    VonMises,
}

impl FamilyKind {
    /// Dimension k of the natural parameter / sufficient statistic.
    pub fn dim(self) -> usize {
        match self {
            FamilyKind::Exponential => 1,
            FamilyKind::Gamma | FamilyKind::VonMises => 2,
        }
    }

    /// Is `x` inside the sample space?
    pub fn in_sample_space(self, x: f64) -> bool {
        match self {
            FamilyKind::Exponential | FamilyKind::Gamma => x > 0.0 && x.is_finite(),
            FamilyKind::VonMises => (0.0..TWO_PI).contains(&x),
        }
    }

    /// Per-observation sufficient statistic T(x), padded to two components.
    pub fn t_of(self, x: f64) -> [f64; 2] {
        match self {
            FamilyKind::Exponential => [-x, 0.0],
            FamilyKind::Gamma => [x.ln(), -x],
            FamilyKind::VonMises => [x.cos(), x.sin()],
        }
    }
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exponential" | "exp" => Ok(FamilyKind::Exponential),
            "gamma" => Ok(FamilyKind::Gamma),
            "vonmises" | "von-mises" | "von_mises" => Ok(FamilyKind::VonMises),
            other => Err(Error::Parse(format!("unknown family '{other}'"))),
        }
    }
}

impl std::fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FamilyKind::Exponential => write!(f, "exponential"),
            FamilyKind::Gamma => write!(f, "gamma"),
            FamilyKind::VonMises => write!(f, "vonmises"),
        }
    }
}

/// A point of the natural parameter space.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NaturalParam {
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    VonMises { theta1: f64, theta2: f64 },
}

impl NaturalParam {
    pub fn family(&self) -> FamilyKind {
        match self {
            NaturalParam::Exponential { .. } => FamilyKind::Exponential,
            NaturalParam::Gamma { .. } => FamilyKind::Gamma,
            NaturalParam::VonMises { .. } => FamilyKind::VonMises,
        }
    }

    pub fn dim(&self) -> usize {
        self.family().dim()
    }

    /// Natural coordinates, padded to two components (k = 1 uses slot 0).
    pub fn components(&self) -> [f64; 2] {
        match *self {
            NaturalParam::Exponential { rate } => [rate, 0.0],
            NaturalParam::Gamma { shape, rate } => [shape, rate],
            NaturalParam::VonMises { theta1, theta2 } => [theta1, theta2],
        }
    }

    pub fn from_components(family: FamilyKind, c: [f64; 2]) -> Result<Self> {
        let p = match family {
            FamilyKind::Exponential => NaturalParam::Exponential { rate: c[0] },
            FamilyKind::Gamma => NaturalParam::Gamma {
                shape: c[0],
                rate: c[1],
            },
            FamilyKind::VonMises => NaturalParam::VonMises {
                theta1: c[0],
                theta2: c[1],
            },
        };
        p.validate()?;
        Ok(p)
    }

    /// Check membership of the open natural parameter space.
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NaturalParam::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            NaturalParam::Gamma { shape, rate } => {
                shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()
            }
            NaturalParam::VonMises { theta1, theta2 } => theta1.is_finite() && theta2.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "parameter outside natural space: {self:?}"
            )))
        }
    }

    /// Von Mises concentration and mean direction (kappa, x0).
    pub fn vm_polar(&self) -> Option<(f64, f64)> {
        match *self {
            NaturalParam::VonMises { theta1, theta2 } => Some((
                theta1.hypot(theta2),
                theta2.atan2(theta1).rem_euclid(TWO_PI),
            )),
            _ => None,
        }
    }
}

/// Sum of per-observation sufficient statistics together with the sample size.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SufficientStat {
    pub family: FamilyKind,
    /// Componentwise sums, padded to two entries.
    pub t: [f64; 2],
    pub n: usize,
}

impl SufficientStat {
    /// Feasibility of the constraint fiber: von Mises needs |t| <= n,
    /// Gamma needs t2 < 0 (positive total) and, by AM-GM,
    /// t1 <= n ln(-t2/n).
    pub fn validate(&self) -> Result<()> {
        match self.family {
            FamilyKind::Exponential => {
                if self.t[0] < 0.0 {
                    Ok(())
                } else {
                    Err(Error::Domain(
                        "exponential sufficient stat needs t1 < 0".into(),
                    ))
                }
            }
            FamilyKind::Gamma => {
                let s = -self.t[1];
                if s <= 0.0 {
                    return Err(Error::Domain("gamma sufficient stat needs t2 < 0".into()));
                }
                if self.t[0] > self.n as f64 * (s / self.n as f64).ln() + 1e-9 {
                    return Err(Error::Domain(
                        "gamma sufficient stat violates AM-GM bound".into(),
                    ));
                }
                Ok(())
            }
            FamilyKind::VonMises => {
                let r = self.t[0].hypot(self.t[1]);
                if r <= self.n as f64 + 1e-9 {
                    Ok(())
                } else {
                    Err(Error::Domain(
                        "von Mises sufficient stat needs |t| <= n".into(),
                    ))
                }
            }
        }
    }
}

/// Mean vector, covariance, its inverse and the third-cumulant tensor of
/// T(X) at a parameter point. Entries beyond dimension k are zero.
#[derive(Debug, Clone, Copy)]
pub struct MomentStructure {
    pub k: usize,
    pub mu: [f64; 2],
    pub v: [[f64; 2]; 2],
    pub d: [[f64; 2]; 2],
    pub kappa3: [[[f64; 2]; 2]; 2],
}

/// kappa(theta) for the family the parameter belongs to.
fn cumulant(theta: &NaturalParam) -> f64 {
    match *theta {
        NaturalParam::Exponential { rate } => -rate.ln(),
        NaturalParam::Gamma { shape, rate } => special::ln_gamma(shape) - shape * rate.ln(),
        NaturalParam::VonMises { theta1, theta2 } => special::ln_bessel_i0(theta1.hypot(theta2)),
    }
}

/// kappa(theta + phi) - kappa(theta): the log moment generating function of
/// T(X1) evaluated at phi.
pub fn cumulant_shift(theta: &NaturalParam, phi: &[f64]) -> Result<f64> {
    theta.validate()?;
    let k = theta.dim();
    if phi.len() != k {
        return Err(Error::Domain(format!(
            "shift has length {}, expected {k}",
            phi.len()
        )));
    }
    let mut c = theta.components();
    for (ci, pi) in c.iter_mut().zip(phi) {
        *ci += pi;
    }
    let shifted = NaturalParam::from_components(theta.family(), c)
        .map_err(|_| Error::Domain("shifted parameter leaves the natural space".into()))?;
    Ok(cumulant(&shifted) - cumulant(theta))
}

fn invert_2x2(v: [[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let det = v[0][0] * v[1][1] - v[0][1] * v[1][0];
    if det <= 0.0 || !det.is_finite() {
        return Err(Error::Domain("covariance not positive definite".into()));
    }
    Ok([
        [v[1][1] / det, -v[0][1] / det],
        [-v[1][0] / det, v[0][0] / det],
    ])
}

/// First three cumulant arrays of T(X) from closed-form derivatives of
/// kappa.
pub fn moment_structure(theta: &NaturalParam) -> Result<MomentStructure> {
    theta.validate()?;
    match *theta {
        NaturalParam::Exponential { rate } => {
            let v = 1.0 / (rate * rate);
            let mut kappa3 = [[[0.0; 2]; 2]; 2];
            kappa3[0][0][0] = -2.0 / (rate * rate * rate);
            Ok(MomentStructure {
                k: 1,
                mu: [-1.0 / rate, 0.0],
                v: [[v, 0.0], [0.0, 0.0]],
                d: [[1.0 / v, 0.0], [0.0, 0.0]],
                kappa3,
            })
        }
        NaturalParam::Gamma { shape, rate } => {
            let tri = special::trigamma(shape);
            let tet = special::tetragamma(shape);
            let mu = [special::digamma(shape) - rate.ln(), -shape / rate];
            // Direct differentiation of kappa gives V12 = -1/rate; the
            // inverse below then matches the usual D table.
            let v = [[tri, -1.0 / rate], [-1.0 / rate, shape / (rate * rate)]];
            let d = invert_2x2(v)?;
            let mut kappa3 = [[[0.0; 2]; 2]; 2];
            let r2 = rate * rate;
            kappa3[0][0][0] = tet;
            // kappa_112 and permutations vanish.
            for (i, j, k) in [(0, 1, 1), (1, 0, 1), (1, 1, 0)] {
                kappa3[i][j][k] = 1.0 / r2;
            }
            kappa3[1][1][1] = -2.0 * shape / (r2 * rate);
            Ok(MomentStructure {
                k: 2,
                mu,
                v,
                d,
                kappa3,
            })
        }
        NaturalParam::VonMises { theta1, theta2 } => {
            let r = theta1.hypot(theta2);
            if r < 1e-150 {
                // Uniform distribution on the circle: V = I/2, kappa3 = 0.
                let v = [[0.5, 0.0], [0.0, 0.5]];
                return Ok(MomentStructure {
                    k: 2,
                    mu: [0.0, 0.0],
                    v,
                    d: [[2.0, 0.0], [0.0, 2.0]],
                    kappa3: [[[0.0; 2]; 2]; 2],
                });
            }
            let u = [theta1 / r, theta2 / r];
            // Radial derivatives of g(r) = ln I0(r).
            let (g1, g2, g3, coef_d, coef_t) = if r < 1e-4 {
                // Series about r = 0: g = r^2/4 - r^4/64 + r^6/576.
                let g1 = 0.5 * r - r.powi(3) / 16.0;
                let g2 = 0.5 - 3.0 * r * r / 16.0;
                let g3 = -3.0 * r / 8.0;
                (g1, g2, g3, -r / 8.0 + r.powi(3) / 24.0, r.powi(3) / 12.0)
            } else {
                let a = special::bessel_i1_over_i0(r);
                let ap = 1.0 - a * a - a / r;
                let app = -2.0 * a * ap - ap / r + a / (r * r);
                let coef_d = (ap - a / r) / r;
                (a, ap, app, coef_d, app - 3.0 * coef_d)
            };
            let mu = [g1 * u[0], g1 * u[1]];
            let mut v = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    v[i][j] = (g2 - g1 / r) * u[i] * u[j] + if i == j { g1 / r } else { 0.0 };
                }
            }
            let d = invert_2x2(v)?;
            // assemble on sorted index triples and mirror, so the tensor is
            // bitwise symmetric under permutations
            let mut kappa3 = [[[0.0; 2]; 2]; 2];
            for i in 0..2 {
                for j in i..2 {
                    for k in j..2 {
                        let deltas = (if i == j { u[k] } else { 0.0 })
                            + (if i == k { u[j] } else { 0.0 })
                            + (if j == k { u[i] } else { 0.0 });
                        let val = coef_t * u[i] * u[j] * u[k] + coef_d * deltas;
                        for (a, b, c) in [
                            (i, j, k),
                            (i, k, j),
                            (j, i, k),
                            (j, k, i),
                            (k, i, j),
                            (k, j, i),
                        ] {
                            kappa3[a][b][c] = val;
                        }
                    }
                }
            }
            let _ = g3;
            Ok(MomentStructure {
                k: 2,
                mu,
                v,
                d,
                kappa3,
            })
        }
    }
}

/// Componentwise Kahan sums of T(x_i).
pub fn sufficient_stat(family: FamilyKind, sample: &[f64]) -> Result<SufficientStat> {
    for &x in sample {
        if !family.in_sample_space(x) {
            return Err(Error::Domain(format!(
                "observation {x} outside sample space of {family}"
            )));
        }
    }
    let t0 = kahan_sum(sample.iter().map(|&x| family.t_of(x)[0]));
    let t1 = if family.dim() == 2 {
        kahan_sum(sample.iter().map(|&x| family.t_of(x)[1]))
    } else {
        0.0
    };
    Ok(SufficientStat {
        family,
        t: [t0, t1],
        n: sample.len(),
    })
}

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 100;

/// Damped Newton iteration on a scalar residual, keeping iterates inside
/// `(lo, hi)` by step halving.
fn newton_scalar(
    f: impl Fn(f64) -> f64,
    fp: impl Fn(f64) -> f64,
    x0: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let mut x = x0;
    for _ in 0..NEWTON_MAX_ITER {
        let r = f(x);
        if r.abs() < NEWTON_TOL {
            return Ok(x);
        }
        let mut step = -r / fp(x);
        let mut xn = x + step;
        let mut halvings = 0;
        while !(lo < xn && xn < hi) {
            step *= 0.5;
            xn = x + step;
            halvings += 1;
            if halvings > 60 {
                return Err(Error::NonConvergence(
                    "newton step trapped at domain boundary".into(),
                ));
            }
        }
        x = xn;
    }
    Err(Error::NonConvergence(
        "newton iteration exceeded max iterations".into(),
    ))
}

/// Maximum likelihood estimate, solving the moment equation
/// `grad kappa(theta) = T_n / n`.
pub fn mle(family: FamilyKind, sample: &[f64]) -> Result<NaturalParam> {
    if sample.len() < 2 {
        return Err(Error::Domain("mle needs at least 2 observations".into()));
    }
    let stat = sufficient_stat(family, sample)?;
    mle_from_stat(&stat)
}

/// MLE from the sufficient statistic alone (the estimate depends on the
/// sample only through it).
pub fn mle_from_stat(stat: &SufficientStat) -> Result<NaturalParam> {
    let n = stat.n as f64;
    match stat.family {
        FamilyKind::Exponential => {
            let mean = -stat.t[0] / n;
            if mean <= 0.0 {
                return Err(Error::Domain("nonpositive mean".into()));
            }
            Ok(NaturalParam::Exponential { rate: 1.0 / mean })
        }
        FamilyKind::Gamma => {
            let mean_log = stat.t[0] / n;
            let mean = -stat.t[1] / n;
            if mean <= 0.0 {
                return Err(Error::Domain("nonpositive mean".into()));
            }
            // delta = ln(mean) - mean(ln x) >= 0, zero iff all equal.
            let delta = mean.ln() - mean_log;
            if delta < 1e-13 {
                return Err(Error::Domain(
                    "degenerate sample: all observations equal".into(),
                ));
            }
            let init = (3.0 - delta + ((delta - 3.0) * (delta - 3.0) + 24.0 * delta).sqrt())
                / (12.0 * delta);
            let shape = newton_scalar(
                |a| a.ln() - special::digamma(a) - delta,
                |a| 1.0 / a - special::trigamma(a),
                init.max(1e-8),
                1e-300,
                1e300,
            )?;
            Ok(NaturalParam::Gamma {
                shape,
                rate: shape / mean,
            })
        }
        FamilyKind::VonMises => {
            let rbar = stat.t[0].hypot(stat.t[1]) / n;
            if rbar < 1e-12 {
                return Ok(NaturalParam::VonMises {
                    theta1: 0.0,
                    theta2: 0.0,
                });
            }
            if rbar > 1.0 - 1e-9 {
                return Err(Error::NonConvergence(
                    "resultant length at 1: concentration diverges".into(),
                ));
            }
            let init = rbar * (2.0 - rbar * rbar) / (1.0 - rbar * rbar);
            let kappa = newton_scalar(
                |k| special::bessel_i1_over_i0(k) - rbar,
                |k| {
                    let a = special::bessel_i1_over_i0(k);
                    1.0 - a * a - a / k
                },
                init.max(1e-8),
                0.0,
                1e12,
            )?;
            let dir = stat.t[1].atan2(stat.t[0]);
            Ok(NaturalParam::VonMises {
                theta1: kappa * dir.cos(),
                theta2: kappa * dir.sin(),
            })
        }
    }
}

/// Log density of one observation.
pub fn log_density(theta: &NaturalParam, x: f64) -> f64 {
    match *theta {
        NaturalParam::Exponential { rate } => rate.ln() - rate * x,
        NaturalParam::Gamma { shape, rate } => {
            shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - special::ln_gamma(shape)
        }
        NaturalParam::VonMises { theta1, theta2 } => {
            let r = theta1.hypot(theta2);
            theta1 * x.cos() + theta2 * x.sin() - special::ln_bessel_i0(r) - TWO_PI.ln()
        }
    }
}

pub fn density(theta: &NaturalParam, x: f64) -> f64 {
    log_density(theta, x).exp()
}

/// Cumulative distribution function. For the von Mises family the origin
/// of the circle is fixed at 0, so `cdf` integrates the density over
/// `[0, x]`.
pub fn cdf(theta: &NaturalParam, x: f64) -> Result<f64> {
    theta.validate()?;
    match *theta {
        NaturalParam::Exponential { rate } => {
            if x < 0.0 {
                return Err(Error::Domain("exponential cdf needs x >= 0".into()));
            }
            Ok(-(-rate * x).exp_m1())
        }
        NaturalParam::Gamma { shape, rate } => {
            if x < 0.0 {
                return Err(Error::Domain("gamma cdf needs x >= 0".into()));
            }
            if x == 0.0 {
                return Ok(0.0);
            }
            Ok(special::reg_lower_gamma(shape, rate * x))
        }
        NaturalParam::VonMises { .. } => {
            if !(0.0..=TWO_PI).contains(&x) {
                return Err(Error::Domain("von Mises cdf needs x in [0, 2pi]".into()));
            }
            let dens = von_mises_density_fn(theta)?;
            Ok(adaptive_simpson(dens, 0.0, x, 1e-10).clamp(0.0, 1.0))
        }
    }
}

/// Normalized von Mises density as a closure (normalization precomputed).
pub(crate) fn von_mises_density_fn(theta: &NaturalParam) -> Result<impl Fn(f64) -> f64> {
    match *theta {
        NaturalParam::VonMises { theta1, theta2 } => {
            let r = theta1.hypot(theta2);
            if r > 1e6 {
                return Err(Error::Domain(
                    "von Mises concentration too large for quadrature".into(),
                ));
            }
            let ln_norm = special::ln_bessel_i0(r) + TWO_PI.ln();
            Ok(move |t: f64| (theta1 * t.cos() + theta2 * t.sin() - ln_norm).exp())
        }
        _ => Err(Error::Domain("not a von Mises parameter".into())),
    }
}

/// Inverse CDF by bracketed root finding; `cdf(quantile(p)) = p` to 1e-10.
pub fn quantile(theta: &NaturalParam, p: f64) -> Result<f64> {
    theta.validate()?;
    if !(0.0 < p && p < 1.0) {
        return Err(Error::Domain("quantile needs p in (0,1)".into()));
    }
    match *theta {
        NaturalParam::Exponential { rate } => Ok(-(-p).ln_1p() / rate),
        NaturalParam::Gamma { shape, rate } => {
            let mean = shape / rate;
            let sd = shape.sqrt() / rate;
            let mut hi = mean + 8.0 * sd;
            while special::reg_lower_gamma(shape, rate * hi) < p {
                hi *= 2.0;
                if hi > 1e300 {
                    return Err(Error::NonConvergence("gamma quantile bracket".into()));
                }
            }
            brent_root(
                |x| special::reg_lower_gamma(shape, rate * x) - p,
                0.0,
                hi,
                1e-12,
                200,
            )
        }
        NaturalParam::VonMises { .. } => {
            let dens = von_mises_density_fn(theta)?;
            // cumulative integral is monotone; bisect on panels then refine
            let f = |x: f64| adaptive_simpson(&dens, 0.0, x, 1e-12) - p;
            brent_root(f, 0.0, TWO_PI, 1e-12, 200)
        }
    }
}

/// `n` i.i.d. draws, deterministic given the generator state.
pub fn sample<R: Rng + ?Sized>(theta: &NaturalParam, n: usize, rng: &mut R) -> Vec<f64> {
    match *theta {
        NaturalParam::Exponential { rate } => {
            let d = rand_distr::Exp::new(rate).expect("validated rate");
            (0..n).map(|_| d.sample(rng)).collect()
        }
        NaturalParam::Gamma { shape, rate } => {
            let d = rand_distr::Gamma::new(shape, 1.0 / rate).expect("validated shape/rate");
            (0..n).map(|_| d.sample(rng)).collect()
        }
        NaturalParam::VonMises { .. } => {
            let (kappa, x0) = theta.vm_polar().expect("von Mises");
            (0..n).map(|_| sample_von_mises(kappa, x0, rng)).collect()
        }
    }
}

/// Best-Fisher wrapping rejection sampler for the von Mises distribution.
pub fn sample_von_mises<R: Rng + ?Sized>(kappa: f64, x0: f64, rng: &mut R) -> f64 {
    if kappa < 1e-8 {
        return rng.gen::<f64>() * TWO_PI;
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.gen();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        let u2: f64 = rng.gen();
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            return (x0 + sign * f.clamp(-1.0, 1.0).acos()).rem_euclid(TWO_PI);
        }
    }
}
