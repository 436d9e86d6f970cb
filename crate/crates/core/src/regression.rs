//! Least-squares polynomial fits and the nested-model F-test.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::special::f_distribution_sf;

/// Threshold below which the higher-degree model is called significant.
pub const SIGNIFICANCE_LEVEL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    pub degree: usize,
    /// Highest power first, constant last: `[a_d, ..., a_1, a_0]`.
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
    pub adjusted_r_squared: f64,
    pub residual_sum_squares: f64,
    pub total_sum_squares: f64,
    pub n_points: usize,
}

impl PolyFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients.iter().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn residual_dof(&self) -> usize {
        self.n_points - self.degree - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FTest {
    pub f_statistic: f64,
    pub p_value: f64,
    /// The larger model fits exactly, so `F` is unbounded.
    pub degenerate: bool,
}

impl FTest {
    pub fn significant(&self) -> bool {
        self.p_value < SIGNIFICANCE_LEVEL
    }
}

/// Fits `y ~ p(x)` of the given degree. The design is built on centered
/// and scaled `x` and solved by QR, then mapped back to monomials in `x`.
pub fn fit_polynomial(points: &[(f64, f64)], degree: usize) -> Result<PolyFit> {
    let n = points.len();
    if n < degree + 2 {
        return Err(Error::Domain(format!(
            "{n} points cannot support an adjusted R^2 for degree {degree}"
        )));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Domain("non-finite data point".into()));
    }
    let (min, max) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, _)| (lo.min(x), hi.max(x)));
    if min == max {
        return Err(Error::SingularFit("all x values are identical".into()));
    }
    let center = 0.5 * (min + max);
    let scale = 0.5 * (max - min);

    let cols = degree + 1;
    let design = DMatrix::from_fn(n, cols, |i, j| ((points[i].0 - center) / scale).powi(j as i32));
    let y = DVector::from_iterator(n, points.iter().map(|p| p.1));

    let qr = design.clone().qr();
    let r = qr.r();
    let largest = (0..cols).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    let cutoff = largest * (n.max(cols) as f64) * f64::EPSILON * 1e3;
    if (0..cols).any(|j| r[(j, j)].abs() <= cutoff) {
        return Err(Error::SingularFit(format!(
            "design for degree {degree} is rank deficient"
        )));
    }
    let qty = qr.q().transpose() * &y;
    let scaled = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::SingularFit("triangular solve failed".into()))?;

    // Residuals from the scaled basis, before any change of variables.
    let fitted = &design * &scaled;
    let rss: f64 = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    let mean = y.mean();
    let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();

    let monomial = unscale(scaled.as_slice(), center, scale);
    let r_squared = if tss == 0.0 {
        1.0
    } else {
        (1.0 - rss / tss).clamp(0.0, 1.0)
    };
    let adjusted = 1.0 - (1.0 - r_squared) * (n - 1) as f64 / (n - degree - 1) as f64;

    Ok(PolyFit {
        degree,
        coefficients: monomial.into_iter().rev().collect(),
        r_squared,
        adjusted_r_squared: adjusted,
        residual_sum_squares: rss,
        total_sum_squares: tss,
        n_points: n,
    })
}

/// Expands `sum_j b_j ((x - m) / s)^j` into ascending monomial coefficients.
fn unscale(scaled: &[f64], center: f64, scale: f64) -> Vec<f64> {
    let mut out = vec![0.0; scaled.len()];
    for (j, &b) in scaled.iter().enumerate() {
        let factor = b / scale.powi(j as i32);
        let mut binom = 1.0;
        for (k, slot) in out.iter_mut().enumerate().take(j + 1) {
            // (x - m)^j = sum_k C(j, k) x^k (-m)^{j-k}
            *slot += factor * binom * (-center).powi((j - k) as i32);
            binom = binom * (j - k) as f64 / (k + 1) as f64;
        }
    }
    out
}

/// Relative residual size treated as an exact fit.
const EXACT_FIT: f64 = 1e-20;

/// Tests whether `high` significantly improves on `low` over the same points.
pub fn nested_f_test(low: &PolyFit, high: &PolyFit) -> Result<FTest> {
    if low.degree >= high.degree {
        return Err(Error::Domain("low-degree fit must have the smaller degree".into()));
    }
    if low.n_points != high.n_points || low.total_sum_squares != high.total_sum_squares {
        return Err(Error::Domain("fits were made on different points".into()));
    }
    let scale = high.total_sum_squares.max(f64::MIN_POSITIVE);
    let rss_high = high.residual_sum_squares;
    let rss_low = low.residual_sum_squares.max(rss_high);
    let df_high = high.residual_dof() as f64;
    let df_extra = (high.degree - low.degree) as f64;

    if rss_high <= EXACT_FIT * scale {
        return Ok(if rss_low <= EXACT_FIT * scale {
            FTest {
                f_statistic: 0.0,
                p_value: 1.0,
                degenerate: false,
            }
        } else {
            FTest {
                f_statistic: f64::INFINITY,
                p_value: 0.0,
                degenerate: true,
            }
        });
    }
    let f = ((rss_low - rss_high) / df_extra) / (rss_high / df_high);
    Ok(FTest {
        f_statistic: f,
        p_value: f_distribution_sf(f, df_extra, df_high),
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        (0..51).map(|i| 0.05 + i as f64 * 0.001).map(|x| (x, f(x))).collect()
    }

    #[test]
    fn exact_line() {
        let pts: Vec<_> = (0..6).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let fit = fit_polynomial(&pts, 1).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_quadratic() {
        let pts = sample(|g| -5.50 * g * g + 2.46 * g - 0.0953);
        let fit = fit_polynomial(&pts, 2).unwrap();
        let want = [-5.50, 2.46, -0.0953];
        for (got, want) in fit.coefficients.iter().zip(want) {
            assert!((got - want).abs() < 1e-8, "{:?}", fit.coefficients);
        }
    }

    #[test]
    fn constant_data() {
        let pts = sample(|_| 3.0);
        let fit = fit_polynomial(&pts, 2).unwrap();
        assert!(fit.coefficients[0].abs() < 1e-8);
        assert!(fit.coefficients[1].abs() < 1e-8);
        assert!((fit.coefficients[2] - 3.0).abs() < 1e-10);
        assert_eq!(fit.r_squared, 1.0);
        assert_eq!(fit.adjusted_r_squared, 1.0);
    }

    #[test]
    fn too_few_or_degenerate_points() {
        assert!(fit_polynomial(&[(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)], 2).is_err());
        let same_x = vec![(1.0, 1.0); 5];
        assert!(matches!(fit_polynomial(&same_x, 1), Err(Error::SingularFit(_))));
        let two_x = vec![(1.0, 1.0), (2.0, 2.0), (1.0, 1.5), (2.0, 2.5), (1.0, 0.5)];
        assert!(matches!(fit_polynomial(&two_x, 2), Err(Error::SingularFit(_))));
    }

    #[test]
    fn f_test_linear_data() {
        let pts = sample(|x| 4.0 * x - 1.0);
        let l = fit_polynomial(&pts, 1).unwrap();
        let q = fit_polynomial(&pts, 2).unwrap();
        let t = nested_f_test(&l, &q).unwrap();
        assert!(t.f_statistic.abs() < 1e-6);
        assert!((t.p_value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn f_test_exact_quadratic_is_degenerate() {
        let pts = sample(|g| -5.50 * g * g + 2.46 * g - 0.0953);
        let l = fit_polynomial(&pts, 1).unwrap();
        let q = fit_polynomial(&pts, 2).unwrap();
        let t = nested_f_test(&l, &q).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.p_value, 0.0);
        assert!(t.significant());
    }

    #[test]
    fn f_test_argument_checks() {
        let pts = sample(|x| x * x);
        let l = fit_polynomial(&pts, 1).unwrap();
        let q = fit_polynomial(&pts, 2).unwrap();
        assert!(nested_f_test(&q, &l).is_err());
        let other = fit_polynomial(&sample(|x| x), 2).unwrap();
        assert!(nested_f_test(&l, &other).is_err());
    }

    proptest! {
        #[test]
        fn residuals_orthogonal(seed in 0u64..1000, deg in 1usize..4) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<_> = (0..30).map(|i| {
                let x = i as f64 * 0.1 + rng.random::<f64>() * 0.05;
                (x, x.sin() + rng.random::<f64>())
            }).collect();
            let fit = fit_polynomial(&pts, deg).unwrap();
            for k in 0..=deg {
                let dot: f64 = pts.iter().map(|&(x, y)| (y - fit.eval(x)) * x.powi(k as i32)).sum();
                let norm: f64 = pts.iter().map(|&(x, y)| (y * x.powi(k as i32)).abs()).sum();
                prop_assert!(dot.abs() <= 1e-8 * norm, "k={} dot={} norm={}", k, dot, norm);
            }
        }

        #[test]
        fn scale_equivariance(lambda in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0], seed in 0u64..100) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<_> = (0..25).map(|i| {
                let x = 0.05 + i as f64 * 0.002;
                (x, -5.0 * x * x + 2.5 * x - 0.09 + 1e-3 * (rng.random::<f64>() - 0.5))
            }).collect();
            let scaled: Vec<_> = pts.iter().map(|&(x, y)| (x, lambda * y)).collect();
            let (l1, q1) = (fit_polynomial(&pts, 1).unwrap(), fit_polynomial(&pts, 2).unwrap());
            let (l2, q2) = (fit_polynomial(&scaled, 1).unwrap(), fit_polynomial(&scaled, 2).unwrap());
            for (a, b) in q1.coefficients.iter().zip(&q2.coefficients) {
                prop_assert!((lambda * a - b).abs() <= 1e-8 * (lambda * a).abs().max(1e-6));
            }
            prop_assert!((q1.r_squared - q2.r_squared).abs() < 1e-10);
            prop_assert!((q1.adjusted_r_squared - q2.adjusted_r_squared).abs() < 1e-10);
            let p1 = nested_f_test(&l1, &q1).unwrap().p_value;
            let p2 = nested_f_test(&l2, &q2).unwrap().p_value;
            prop_assert!((p1 - p2).abs() < 1e-10);
            prop_assert!(q1.residual_sum_squares <= l1.residual_sum_squares * (1.0 + 1e-12));
            prop_assert!(q1.adjusted_r_squared <= q1.r_squared);
        }
    }
}
