//! First-order Edgeworth machinery: the linear correction polynomial
//! built from third cumulants, the O(1/n) expansion of Rao-Blackwell
//! estimates about the plug-in value, and the one-term Edgeworth density
//! for scalar sufficient statistics.

use crate::error::{Error, Result};
use crate::expfam::{self, MomentStructure, NaturalParam};
use crate::special;

/// Coefficients of the linear polynomial psi(u) = -sum_l a_l u_l.
#[derive(Debug, Clone, Copy)]
pub struct Psi11 {
    pub k: usize,
    pub a: [f64; 2],
}

impl Psi11 {
    /// Evaluate psi_{1,1}(u); psi(0) = 0 by construction.
    pub fn eval(&self, u: &[f64]) -> f64 {
        -(0..self.k).map(|l| self.a[l] * u[l]).sum::<f64>()
    }
}

/// Coefficients a_l = (1/2) sum_{abc} kappa_{abc} D_{ab} D_{cl}, assembled
/// from the full symmetric triple sum. For k = 1 this collapses to
/// a = kappa_111 D^2 / 2.
pub fn psi11_coefficients(ms: &MomentStructure) -> Psi11 {
    let mut a = [0.0; 2];
    for l in 0..ms.k {
        let mut acc = 0.0;
        for i in 0..ms.k {
            for j in 0..ms.k {
                for c in 0..ms.k {
                    acc += ms.kappa3[i][j][c] * ms.d[i][j] * ms.d[c][l];
                }
            }
        }
        a[l] = 0.5 * acc;
    }
    Psi11 { k: ms.k, a }
}

/// Expectation of a statistic J of m observations together with its
/// gradient and Hessian in the natural parameter. By differentiation under
/// the integral sign the gradient equals Cov(J, T_m) and the Hessian
/// equals Cov(J, B_m B_m'), which the tests verify by Monte Carlo.
#[derive(Debug, Clone, Copy)]
pub struct ExpansionInput {
    /// Observations consumed by J.
    pub m: usize,
    /// E_theta(J).
    pub value: f64,
    pub gradient: [f64; 2],
    pub hessian: [[f64; 2]; 2],
}

/// A(n, J, theta) = E_theta(J) + R(J, theta)/n and the remainder R itself.
#[derive(Debug, Clone, Copy)]
pub struct ExpansionResult {
    pub a: f64,
    pub r: f64,
}

/// O(1/n) expansion of the Rao-Blackwell estimate E(J | T_n = n mu) about
/// the unconditional expectation:
///
///   R = -1/2 trace(hessian . V^{-1}) - psi_{1,1}(gradient).
///
/// For any J that is a linear function of T(X_1) this remainder vanishes
/// identically (the conditional expectation is exact), which the tests use
/// as an algebraic cross-check of the coefficients.
pub fn rao_blackwell_expansion(
    input: &ExpansionInput,
    ms: &MomentStructure,
    psi11: &Psi11,
    n: usize,
) -> Result<ExpansionResult> {
    if n <= input.m {
        return Err(Error::Domain("expansion needs n > m".into()));
    }
    let mut trace = 0.0;
    for i in 0..ms.k {
        for j in 0..ms.k {
            trace += input.hessian[i][j] * ms.d[j][i];
        }
    }
    let r = -0.5 * trace - psi11.eval(&input.gradient);
    Ok(ExpansionResult {
        a: input.value + r / n as f64,
        r,
    })
}

/// Rao-Blackwell estimate of the Gamma shape parameter to O(1/n):
/// theta_tilde = theta_hat_1 - psi_{1,1}(1, 0)/n, with the coefficients
/// built at the fitted parameter from the general formula.
pub fn gamma_shape_rb_estimate(theta_hat: &NaturalParam, n: usize) -> Result<f64> {
    let NaturalParam::Gamma { shape, .. } = *theta_hat else {
        return Err(Error::Domain(
            "shape estimate is specific to the Gamma family".into(),
        ));
    };
    if n < 2 {
        return Err(Error::Domain("need n >= 2".into()));
    }
    let ms = expfam::moment_structure(theta_hat)?;
    let psi11 = psi11_coefficients(&ms);
    Ok(shape - psi11.eval(&[1.0, 0.0]) / n as f64)
}

/// One-term Edgeworth density of (T_n - n mu)/sqrt(n) for a scalar (k = 1)
/// family: phi(u; V) { 1 + psi_1(u)/sqrt(n) } with
/// psi_1(u) = kappa_3 (u^3/V^3 - 3 u/V^2) / 6.
pub fn edgeworth_density_1d(ms: &MomentStructure, n: usize, u: f64) -> Result<f64> {
    if ms.k != 1 {
        return Err(Error::Domain(
            "edgeworth_density_1d needs a one-parameter family".into(),
        ));
    }
    if n < 2 {
        return Err(Error::Domain("need n >= 2".into()));
    }
    let v = ms.v[0][0];
    let k3 = ms.kappa3[0][0][0];
    let correction = k3 * (u.powi(3) / v.powi(3) - 3.0 * u / (v * v)) / 6.0;
    Ok(special::normal_pdf(u, v) * (1.0 + correction / (n as f64).sqrt()))
}

/// Expansion input for the indicator J = 1(X_1 <= x), with the gradient
/// and Hessian evaluated through the covariance identities by quadrature:
/// grad_j = E[(T_j - mu_j) 1(X <= x)],
/// hess_jk = E[{(T_j - mu_j)(T_k - mu_k) - V_jk} 1(X <= x)].
pub fn indicator_expansion_input(theta: &NaturalParam, x: f64) -> Result<ExpansionInput> {
    let ms = expfam::moment_structure(theta)?;
    let value = expfam::cdf(theta, x)?;
    let family = theta.family();
    let k = family.dim();
    let integrate = |g: &dyn Fn(f64) -> f64| -> f64 {
        crate::numerics::adaptive_simpson_panels(
            |t| {
                let tt = t.max(1e-300); // keeps ln(t) finite; the density kills the endpoint
                g(tt) * expfam::density(theta, tt)
            },
            0.0,
            x,
            64,
            1e-11,
        )
    };
    let mut gradient = [0.0; 2];
    let mut hessian = [[0.0; 2]; 2];
    for j in 0..k {
        gradient[j] = integrate(&|t| family.t_of(t)[j] - ms.mu[j]);
        for l in 0..k {
            hessian[j][l] = integrate(&|t| {
                (family.t_of(t)[j] - ms.mu[j]) * (family.t_of(t)[l] - ms.mu[l]) - ms.v[j][l]
            });
        }
    }
    Ok(ExpansionInput {
        m: 1,
        value,
        gradient,
        hessian,
    })
}

/// Finite-difference expansion input for an arbitrary functional given as
/// a map theta -> E_theta(J). Central differences with step 1e-4 * scale.
pub fn expansion_input_from_fn(
    theta: &NaturalParam,
    m: usize,
    expectation: impl Fn(&NaturalParam) -> f64,
) -> Result<ExpansionInput> {
    theta.validate()?;
    let family = theta.family();
    let k = family.dim();
    let c0 = theta.components();
    let at = |offsets: &[(usize, f64)]| -> Result<f64> {
        let mut c = c0;
        for &(i, d) in offsets {
            c[i] += d;
        }
        Ok(expectation(&NaturalParam::from_components(family, c)?))
    };
    let mut gradient = [0.0; 2];
    let mut hessian = [[0.0; 2]; 2];
    let step = |i: usize| 1e-4 * c0[i].abs().max(1.0);
    for i in 0..k {
        let h = step(i);
        gradient[i] = (at(&[(i, h)])? - at(&[(i, -h)])?) / (2.0 * h);
    }
    for i in 0..k {
        for j in 0..k {
            let (hi, hj) = (step(i), step(j));
            hessian[i][j] = if i == j {
                (at(&[(i, hi)])? - 2.0 * at(&[])? + at(&[(i, -hi)])?) / (hi * hi)
            } else {
                (at(&[(i, hi), (j, hj)])? - at(&[(i, hi), (j, -hj)])? - at(&[(i, -hi), (j, hj)])?
                    + at(&[(i, -hi), (j, -hj)])?)
                    / (4.0 * hi * hj)
            };
        }
    }
    Ok(ExpansionInput {
        m,
        value: at(&[])?,
        gradient,
        hessian,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditional::{conditional_draws_at, ChainConfig};
    use crate::expfam::{moment_structure, sample, FamilyKind, SufficientStat};
    use crate::numerics::adaptive_simpson_panels;
    use crate::rng::{stream_rng, Stream};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn psi11_reduces_to_scalar_closed_form() {
        // k = 1: a = kappa_111 D^2 / 2; exponential gives a = -theta.
        for rate in [0.5, 1.0, 2.0, 3.7] {
            let ms = moment_structure(&NaturalParam::Exponential { rate }).unwrap();
            let psi = psi11_coefficients(&ms);
            let hand = ms.kappa3[0][0][0] * ms.d[0][0] * ms.d[0][0] / 2.0;
            assert_relative_eq!(psi.a[0], hand, max_relative = 1e-13);
            assert_relative_eq!(psi.a[0], -rate, max_relative = 1e-12);
        }
    }

    #[test]
    fn psi11_gamma_closed_form_and_table_discrepancy() {
        // Hand reduction of the triple sum for the Gamma family:
        //   a_1 = (t1^2 psi'' - t1 psi' + 2) / (2 delta^2)
        //   a_2 = t2 (t1 psi'' + 3 psi' - 2 t1 psi'^2) / (2 delta^2)
        // Both are independent of t2 up to the overall t2 factor in a_2, as
        // scaling the data units demands. The published closed forms for
        // this family carry t2-dependent terms instead and fail that
        // scaling requirement; the triple sum is the ground truth and the
        // mismatch is pinned here.
        for (shape, rate) in [(1.0, 1.0), (2.0, 1.0), (2.5, 0.7), (1.0, 7.0)] {
            let ms = moment_structure(&NaturalParam::Gamma { shape, rate }).unwrap();
            let psi = psi11_coefficients(&ms);
            let tri = special::trigamma(shape);
            let tet = special::tetragamma(shape);
            let delta = shape * tri - 1.0;
            let a1 = (shape * shape * tet - shape * tri + 2.0) / (2.0 * delta * delta);
            let a2 =
                rate * (shape * tet + 3.0 * tri - 2.0 * shape * tri * tri) / (2.0 * delta * delta);
            assert_relative_eq!(psi.a[0], a1, max_relative = 1e-11);
            assert_relative_eq!(psi.a[1], a2, max_relative = 1e-11);

            // published form (theta2-dependent): kept only to document that
            // it disagrees with the derivative-based computation
            let published_a1 =
                (shape * shape * tet + 2.0 * rate * tri + 2.0) / (2.0 * delta * delta);
            assert!((psi.a[0] - published_a1).abs() > 1e-3);
        }
        // a_1 does not depend on the rate at all
        let a_low = psi11_coefficients(
            &moment_structure(&NaturalParam::Gamma {
                shape: 1.0,
                rate: 1.0,
            })
            .unwrap(),
        )
        .a[0];
        let a_high = psi11_coefficients(
            &moment_structure(&NaturalParam::Gamma {
                shape: 1.0,
                rate: 7.0,
            })
            .unwrap(),
        )
        .a[0];
        assert_relative_eq!(a_low, a_high, max_relative = 1e-12);
    }

    #[test]
    fn psi11_scaling_in_the_exponential_rate() {
        // rescaling data by 1/c maps theta -> c theta and a -> -c theta
        let a1 = psi11_coefficients(
            &moment_structure(&NaturalParam::Exponential { rate: 1.0 }).unwrap(),
        )
        .a[0];
        let a3 = psi11_coefficients(
            &moment_structure(&NaturalParam::Exponential { rate: 3.0 }).unwrap(),
        )
        .a[0];
        assert_relative_eq!(a3, 3.0 * a1, max_relative = 1e-12);
    }

    #[test]
    fn remainder_vanishes_for_linear_functionals() {
        // J = c'T(X1) + b has E(J | T_n = n mu) exact for every n, so R = 0.
        let cases = [
            NaturalParam::Exponential { rate: 1.3 },
            NaturalParam::Gamma {
                shape: 2.2,
                rate: 0.8,
            },
            NaturalParam::VonMises {
                theta1: 1.0,
                theta2: -0.6,
            },
        ];
        for theta in cases {
            let ms = moment_structure(&theta).unwrap();
            let psi = psi11_coefficients(&ms);
            for c in [[1.0, 0.0], [0.0, 1.0], [0.7, -2.0]] {
                let k = theta.family().dim();
                // E(c'T + b) = c' mu + b; gradient = V c; hessian = d(Vc)
                let mut gradient = [0.0; 2];
                for i in 0..k {
                    gradient[i] = (0..k).map(|j| ms.v[i][j] * c[j]).sum();
                }
                let mut hessian = [[0.0; 2]; 2];
                for i in 0..k {
                    for j in 0..k {
                        hessian[i][j] = (0..k).map(|l| ms.kappa3[i][j][l] * c[l]).sum();
                    }
                }
                let input = ExpansionInput {
                    m: 1,
                    value: (0..k).map(|i| c[i] * ms.mu[i]).sum::<f64>() + 0.4,
                    gradient,
                    hessian,
                };
                let out = rao_blackwell_expansion(&input, &ms, &psi, 50).unwrap();
                assert_abs_diff_eq!(out.r, 0.0, epsilon = 1e-10);
                assert_relative_eq!(out.a, input.value, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn exponential_indicator_expansion_closed_form() {
        // J = 1(X1 <= x), theta = 1, x = 1: gradient = x e^{-x}, hessian =
        // -x^2 e^{-x}, R = e^{-1}(1/2 - 1) = -e^{-1}/2.
        let theta = NaturalParam::Exponential { rate: 1.0 };
        let input = indicator_expansion_input(&theta, 1.0).unwrap();
        assert_abs_diff_eq!(input.gradient[0], (-1.0f64).exp(), epsilon = 1e-9);
        assert_abs_diff_eq!(input.hessian[0][0], -(-1.0f64).exp(), epsilon = 1e-9);
        let ms = moment_structure(&theta).unwrap();
        let psi = psi11_coefficients(&ms);
        let out = rao_blackwell_expansion(&input, &ms, &psi, 20).unwrap();
        assert_abs_diff_eq!(out.r, -0.5 * (-1.0f64).exp(), epsilon = 1e-8);
        assert_abs_diff_eq!(out.r, -0.183_940, epsilon = 1e-5);
    }

    #[test]
    fn constant_functional_has_zero_remainder() {
        let theta = NaturalParam::Gamma {
            shape: 2.0,
            rate: 1.0,
        };
        let ms = moment_structure(&theta).unwrap();
        let psi = psi11_coefficients(&ms);
        let input = ExpansionInput {
            m: 1,
            value: 0.3,
            gradient: [0.0; 2],
            hessian: [[0.0; 2]; 2],
        };
        for n in [5, 50, 500] {
            let out = rao_blackwell_expansion(&input, &ms, &psi, n).unwrap();
            assert_eq!(out.r, 0.0);
            assert_eq!(out.a, 0.3);
        }
    }

    #[test]
    fn gamma_estimator_reproduced_by_generic_expansion() {
        // E = theta1, gradient (1,0), hessian 0 recovers
        // theta_tilde = theta_hat_1 - psi_{1,1}(1,0)/n exactly.
        let mut rng = stream_rng(44, Stream::Oracle, 0);
        for _ in 0..5 {
            let theta = NaturalParam::Gamma {
                shape: 0.5 + 3.0 * rand::Rng::gen::<f64>(&mut rng),
                rate: 0.3 + 2.0 * rand::Rng::gen::<f64>(&mut rng),
            };
            let n = 7 + (rand::Rng::gen::<u32>(&mut rng) % 200) as usize;
            let ms = moment_structure(&theta).unwrap();
            let psi = psi11_coefficients(&ms);
            let NaturalParam::Gamma { shape, .. } = theta else {
                unreachable!()
            };
            let input = ExpansionInput {
                m: 1,
                value: shape,
                gradient: [1.0, 0.0],
                hessian: [[0.0; 2]; 2],
            };
            let out = rao_blackwell_expansion(&input, &ms, &psi, n).unwrap();
            let direct = gamma_shape_rb_estimate(&theta, n).unwrap();
            assert_abs_diff_eq!(out.a, direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn gamma_shape_estimate_tends_to_mle() {
        let theta = NaturalParam::Gamma {
            shape: 1.0,
            rate: 1.0,
        };
        let near = gamma_shape_rb_estimate(&theta, 1_000_000_000).unwrap();
        assert_abs_diff_eq!(near, 1.0, epsilon = 1e-6);
        let at20 = gamma_shape_rb_estimate(&theta, 20).unwrap();
        let ms = moment_structure(&theta).unwrap();
        let a1 = psi11_coefficients(&ms).a[0];
        assert_relative_eq!(at20, 1.0 + a1 / 20.0, max_relative = 1e-13);
    }

    #[test]
    fn gradient_and_hessian_identities_by_monte_carlo() {
        // grad E(J) = Cov(J, T_m); hess E(J) = Cov(J, B_m B_m'), checked by
        // simulation for three functionals within 4 standard errors.
        let theta = NaturalParam::Gamma {
            shape: 2.0,
            rate: 1.0,
        };
        let ms = moment_structure(&theta).unwrap();
        let n_mc = 400_000;
        let mut rng = stream_rng(51, Stream::Oracle, 0);
        let xs = sample(&theta, n_mc, &mut rng);

        type JFn = Box<dyn Fn(f64) -> f64>;
        let functionals: [(f64, JFn); 3] = [
            (0.9, Box::new(|x: f64| f64::from(x <= 0.9))),
            (2.0, Box::new(|x: f64| f64::from(x <= 2.0))),
            (0.0, Box::new(|x: f64| (-x).exp())),
        ];
        for (x_or_zero, j_fn) in functionals {
            let input = if x_or_zero > 0.0 {
                indicator_expansion_input(&theta, x_or_zero).unwrap()
            } else {
                // E[e^{-X}] = (rate/(rate+1))^shape via the cumulant shift
                expansion_input_from_fn(&theta, 1, |t| {
                    let NaturalParam::Gamma { shape, rate } = *t else {
                        unreachable!()
                    };
                    (rate / (rate + 1.0)).powf(shape)
                })
                .unwrap()
            };
            for comp in 0..2 {
                let mut cov_sum = 0.0;
                let mut sq_sum = 0.0;
                for &x in &xs {
                    let j = j_fn(x);
                    let b = FamilyKind::Gamma.t_of(x)[comp] - ms.mu[comp];
                    cov_sum += j * b;
                    sq_sum += (j * b) * (j * b);
                }
                let est = cov_sum / n_mc as f64;
                let se = ((sq_sum / n_mc as f64 - est * est) / n_mc as f64).sqrt();
                assert!(
                    (est - input.gradient[comp]).abs() < 4.0 * se,
                    "gradient[{comp}]: {est} vs {} (se {se})",
                    input.gradient[comp]
                );
            }
            // one Hessian entry is enough to pin the identity's shape
            let mut cov_sum = 0.0;
            let mut sq_sum = 0.0;
            for &x in &xs {
                let j = j_fn(x);
                let b0 = FamilyKind::Gamma.t_of(x)[0] - ms.mu[0];
                let term = j * (b0 * b0 - ms.v[0][0]);
                cov_sum += term;
                sq_sum += term * term;
            }
            let est = cov_sum / n_mc as f64;
            let se = ((sq_sum / n_mc as f64 - est * est) / n_mc as f64).sqrt();
            assert!(
                (est - input.hessian[0][0]).abs() < 4.0 * se,
                "hessian[0][0]: {est} vs {} (se {se})",
                input.hessian[0][0]
            );
        }
    }

    #[test]
    fn gamma_indicator_expansion_matches_conditional_chain() {
        // E(1(X1 <= x) | T_n = n mu) estimated from the triple-move chain
        // agrees with A(n, J, theta) within 3 MC standard errors.
        let theta = NaturalParam::Gamma {
            shape: 2.0,
            rate: 1.0,
        };
        let n = 25;
        let ms = moment_structure(&theta).unwrap();
        let psi = psi11_coefficients(&ms);
        let target = SufficientStat {
            family: FamilyKind::Gamma,
            t: [ms.mu[0] * n as f64, ms.mu[1] * n as f64],
            n,
        };
        let cfg = ChainConfig {
            burn_in_sweeps: 300,
            thin_sweeps: 3,
            shards: 4,
            seed: 77,
        };
        let (draws, _) = conditional_draws_at(&target, 6000, &cfg).unwrap();
        for x in [1.0, 2.5] {
            let input = indicator_expansion_input(&theta, x).unwrap();
            let predicted = rao_blackwell_expansion(&input, &ms, &psi, n).unwrap().a;
            // fraction of all coordinates below x (indices exchangeable)
            let mut mean_per_draw: Vec<f64> = Vec::with_capacity(draws.len());
            for d in &draws {
                mean_per_draw.push(d.iter().filter(|&&v| v <= x).count() as f64 / n as f64);
            }
            let m = mean_per_draw.len() as f64;
            let est = mean_per_draw.iter().sum::<f64>() / m;
            // batch means SE to absorb chain autocorrelation
            let batches = 30;
            let per = mean_per_draw.len() / batches;
            let batch_means: Vec<f64> = (0..batches)
                .map(|b| mean_per_draw[b * per..(b + 1) * per].iter().sum::<f64>() / per as f64)
                .collect();
            let bm = batch_means.iter().sum::<f64>() / batches as f64;
            let bvar = batch_means.iter().map(|v| (v - bm) * (v - bm)).sum::<f64>()
                / (batches as f64 - 1.0);
            let se = (bvar / batches as f64).sqrt();
            assert!(
                (est - predicted).abs() < 3.0 * se.max(1e-4),
                "x={x}: chain {est} vs expansion {predicted} (se {se})"
            );
        }
    }

    #[test]
    fn edgeworth_density_basic_properties() {
        let theta = NaturalParam::Exponential { rate: 1.0 };
        let ms = moment_structure(&theta).unwrap();
        // at u = 0 the odd correction vanishes
        let d0 = edgeworth_density_1d(&ms, 10, 0.0).unwrap();
        assert_relative_eq!(
            d0,
            special::normal_pdf(0.0, ms.v[0][0]),
            max_relative = 1e-14
        );
        // integrates to one: the correction term is odd in the Hermite sense
        let total = adaptive_simpson_panels(
            |u| edgeworth_density_1d(&ms, 10, u).unwrap(),
            -12.0,
            12.0,
            512,
            1e-9,
        );
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);
    }

    /// Exact density of (T_n - n mu)/sqrt(n) for the exponential family:
    /// the total S = sum X is Gamma(n, rate) and T = -S.
    fn exact_standardized_density(rate: f64, n: usize, u: f64) -> f64 {
        let nf = n as f64;
        let s = nf / rate - nf.sqrt() * u;
        if s <= 0.0 {
            return 0.0;
        }
        let log_f = nf * rate.ln() + (nf - 1.0) * s.ln() - rate * s - special::ln_gamma(nf);
        log_f.exp() * nf.sqrt()
    }

    #[test]
    fn edgeworth_error_shrinks_like_one_over_n() {
        let theta = NaturalParam::Exponential { rate: 1.0 };
        let ms = moment_structure(&theta).unwrap();
        let sup_err = |n: usize| -> f64 {
            let mut worst: f64 = 0.0;
            for i in 0..=400 {
                let u = -5.0 + 10.0 * i as f64 / 400.0;
                let approx = edgeworth_density_1d(&ms, n, u).unwrap();
                let exact = exact_standardized_density(1.0, n, u);
                worst = worst.max((approx - exact).abs());
            }
            worst
        };
        let e10 = sup_err(10);
        let e20 = sup_err(20);
        assert!(e20 <= 0.6 * e10, "sup errors {e10} -> {e20}");
        // implied constant C with error ~ C/n stays bounded
        assert!(e10 * 10.0 < 1.0);
    }

    #[test]
    fn theorem3_exponential_oracle_n_squared_bounded() {
        // n^2 |exact - A(n, J, theta)| stays within a factor 2 of its n=10
        // value for J = 1(X1 <= x), the quantitative content of the O(n^-2)
        // remainder bound.
        let theta = NaturalParam::Exponential { rate: 1.0 };
        let ms = moment_structure(&theta).unwrap();
        let psi = psi11_coefficients(&ms);
        for x in [0.5, 1.0, 2.0] {
            let input = indicator_expansion_input(&theta, x).unwrap();
            let mut scaled = Vec::new();
            for n in [10usize, 20, 40, 80] {
                let a = rao_blackwell_expansion(&input, &ms, &psi, n).unwrap().a;
                let exact = 1.0 - (1.0 - x / n as f64).powi(n as i32 - 1);
                scaled.push((n * n) as f64 * (exact - a).abs());
            }
            let base = scaled[0];
            for (i, s) in scaled.iter().enumerate() {
                assert!(
                    *s <= 2.0 * base && *s >= base / 2.0,
                    "x={x}: n^2 errors {scaled:?} not within factor 2 of {base} (idx {i})"
                );
            }
        }
    }

    #[test]
    fn fd_fallback_matches_quadrature_inputs() {
        let theta = NaturalParam::Gamma {
            shape: 2.0,
            rate: 1.0,
        };
        let x = 1.7;
        let quad = indicator_expansion_input(&theta, x).unwrap();
        let fd = expansion_input_from_fn(&theta, 1, |t| expfam::cdf(t, x).unwrap()).unwrap();
        assert_abs_diff_eq!(quad.value, fd.value, epsilon = 1e-10);
        for i in 0..2 {
            assert_abs_diff_eq!(quad.gradient[i], fd.gradient[i], epsilon = 1e-6);
            for j in 0..2 {
                assert_abs_diff_eq!(quad.hessian[i][j], fd.hessian[i][j], epsilon = 1e-5);
            }
        }
    }
}
