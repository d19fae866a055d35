//! Reference solutions by direct adaptive integration of the untransformed
//! systems, and log-log rate fitting.

use serde::Serialize;

use crate::coefficients::RegularizedEval;
use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegrationStats, RefineWindow};
use crate::linalg::{c, re, Mat2};
use crate::scalar::Real;

pub use crate::integrator::IntegratorConfig;

/// Least-squares fit of `log(error) = slope · log(ε) + intercept`.
#[derive(Clone, Debug, Serialize)]
pub struct RateFit<T> {
    /// `(ε, error)` sorted by decreasing ε.
    pub pairs: Vec<(T, T)>,
    pub slope: T,
    pub intercept: T,
    pub r_squared: T,
}

pub fn fit_rate<T: Real>(pairs: &[(T, T)]) -> Result<RateFit<T>> {
    if pairs.len() < 4 {
        return Err(Error::Domain(format!("rate fit needs at least 4 pairs, got {}", pairs.len())));
    }
    if let Some(p) = pairs.iter().find(|p| !(p.0 > T::zero()) || !(p.1 > T::zero())) {
        return Err(Error::Domain(format!("rate fit needs positive (ε, error), got ({}, {})", p.0, p.1)));
    }
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite"));
    let n = T::from_usize_lossy(sorted.len());
    let xs: Vec<T> = sorted.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<T> = sorted.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().fold(T::zero(), |a, &b| a + b) / n;
    let my = ys.iter().fold(T::zero(), |a, &b| a + b) / n;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for (x, y) in xs.iter().zip(&ys) {
        sxx = sxx + (*x - mx) * (*x - mx);
        sxy = sxy + (*x - mx) * (*y - my);
        syy = syy + (*y - my) * (*y - my);
    }
    if !(sxx > T::zero()) {
        return Err(Error::Domain("rate fit needs at least two distinct ε".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy > T::zero() { sxy * sxy / (sxx * syy) } else { T::one() };
    Ok(RateFit {
        pairs: sorted,
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Step cap used across the mollifier window, as a fraction of its width scale.
const WINDOW_STEP_FRACTION: f64 = 0.1;

/// Propagator of `∂_t U = [[0, i|ξ|], [i|ξ|, -𝔡_ε]] U` for the micro-energy
/// `U = (|ξ|û, D_t û)`, from `t1` to `t2`.
pub fn direct_propagator<T: Real>(
    ev: &RegularizedEval<T>,
    t1: T,
    t2: T,
    xi_abs: T,
    eps: T,
    cfg: &IntegratorConfig<T>,
) -> Result<(Mat2<T>, IntegrationStats<T>)> {
    check(eps, cfg)?;
    let k = ev.k();
    let window = RefineWindow {
        lo: T::one() - eps * k,
        hi: T::one() + eps * k,
        max_step: eps * T::lit(WINDOW_STEP_FRACTION),
    };
    let ixi = c(T::zero(), xi_abs);
    let f = |t: T, y: &Mat2<T>| {
        let mut d = [T::zero(); 1];
        ev.dissipation_derivatives(t, eps, &mut d);
        Mat2::new(re(T::zero()), ixi, ixi, re(-d[0])) * *y
    };
    integrate(f, t1, t2, Mat2::identity(), &[window], cfg)
}

/// Propagator of `∂_τ U = [[0, Λ], [-Λ, -β_ε]] U` for `U = (Λû, ∂_τ û)`.
pub fn direct_singular_propagator<T: Real>(
    ev: &RegularizedEval<T>,
    tau1: T,
    tau2: T,
    lambda: T,
    eps: T,
    cfg: &IntegratorConfig<T>,
) -> Result<(Mat2<T>, IntegrationStats<T>)> {
    check(eps, cfg)?;
    let k = ev.k();
    let window = RefineWindow {
        lo: -k,
        hi: k,
        max_step: T::lit(WINDOW_STEP_FRACTION),
    };
    let f = |tau: T, y: &Mat2<T>| {
        let beta = ev.beta_eps(tau, eps);
        Mat2::from_real(T::zero(), lambda, -lambda, -beta) * *y
    };
    integrate(f, tau1, tau2, Mat2::identity(), &[window], cfg)
}

fn check<T: Real>(eps: T, cfg: &IntegratorConfig<T>) -> Result<()> {
    cfg.validate()?;
    if !(eps > T::zero()) {
        return Err(Error::Domain(format!("ε must be positive, got {eps}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::JumpCoefficient;
    use crate::linalg::imag_unit;

    fn rotation(dt: f64, xi: f64) -> Mat2<f64> {
        let (s, co) = (dt * xi).sin_cos();
        Mat2::new(re(co), c(0.0, s), c(0.0, s), re(co))
    }

    #[test]
    fn rate_fits() {
        let eps: Vec<f64> = (2..8).map(|j| 2f64.powi(-j)).collect();
        for (p, expect) in [(1.0, 1.0), (2.0, 2.0), (0.5, 0.5)] {
            let pairs: Vec<_> = eps.iter().map(|&e| (e, 3.0 * e.powf(p))).collect();
            let fit = fit_rate(&pairs).unwrap();
            assert!((fit.slope - expect).abs() < 1e-10);
            assert!((fit.r_squared - 1.0).abs() < 1e-10);
            assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
            assert!(fit.pairs[0].0 > fit.pairs[1].0);
        }
        assert!(fit_rate(&[(0.1, 1.0), (0.05, 0.0), (0.02, 1.0), (0.01, 1.0)]).is_err());
        assert!(fit_rate(&[(0.1, 1.0), (0.05, 1.0)]).is_err());
    }

    #[test]
    fn constant_coefficient_gives_rotation() {
        let ev = RegularizedEval::with_coeff(JumpCoefficient::<f64>::constant(2.0).unwrap());
        let cfg = IntegratorConfig::with_tol(1e-11);
        let (m, _) = direct_propagator(&ev, 0.3, 1.7, 12.0, 0.05, &cfg).unwrap();
        assert!((m - rotation(1.4, 12.0)).max_abs() < 1e-8);
    }

    #[test]
    fn zero_frequency_closed_form() {
        // ∂_t(D_t û) = -𝔡_ε D_t û, so E22 = b_ε(t1)/b_ε(t2)
        let ev = RegularizedEval::<f64>::standard();
        let cfg = IntegratorConfig::with_tol(1e-11);
        let (m, _) = direct_propagator(&ev, 0.5, 1.05, 0.0, 0.1, &cfg).unwrap();
        let expect = ev.b_eps(0.5, 0.1) / ev.b_eps(1.05, 0.1);
        assert!((m.a22 - re(expect)).norm() < 1e-8);
        assert!((m.a11 - re(1.0)).norm() < 1e-12);
    }

    #[test]
    fn cocycle() {
        let ev = RegularizedEval::<f64>::standard();
        let cfg = IntegratorConfig::with_tol(1e-10);
        let (a, _) = direct_propagator(&ev, 0.4, 1.02, 7.0, 0.05, &cfg).unwrap();
        let (b, _) = direct_propagator(&ev, 1.02, 1.6, 7.0, 0.05, &cfg).unwrap();
        let (full, _) = direct_propagator(&ev, 0.4, 1.6, 7.0, 0.05, &cfg).unwrap();
        assert!((b * a - full).max_abs() < 1e-8);
    }

    #[test]
    fn singular_chart_decoupled_limit() {
        let ev = RegularizedEval::<f64>::standard();
        let cfg = IntegratorConfig::with_tol(1e-11);
        let (m, _) = direct_singular_propagator(&ev, -1.0, 1.0, 0.0, 0.01, &cfg).unwrap();
        assert!((m - Mat2::diag(re(1.0), re(1.0 / 3.0))).max_abs() < 1e-8);

        let flat = RegularizedEval::with_coeff(JumpCoefficient::<f64>::constant(1.0).unwrap());
        let (m, _) = direct_singular_propagator(&flat, -0.5, 1.5, 0.7, 0.01, &cfg).unwrap();
        let (s, co) = (0.7f64 * 2.0).sin_cos();
        assert!((m - Mat2::from_real(co, s, -s, co)).max_abs() < 1e-8);
    }

    #[test]
    fn charts_are_consistent() {
        let ev = RegularizedEval::<f64>::standard();
        let cfg = IntegratorConfig::with_tol(1e-11);
        let (eps, xi) = (0.02, 30.0);
        let (t1, t2) = (0.98, 1.03);
        let (h, _) = direct_propagator(&ev, t1, t2, xi, eps, &cfg).unwrap();
        let (s, _) =
            direct_singular_propagator(&ev, (t1 - 1.0) / eps, (t2 - 1.0) / eps, eps * xi, eps, &cfg).unwrap();
        let conv = Mat2::diag(re(1.0), imag_unit());
        let back = conv.inv().unwrap() * s * conv;
        assert!((back - h).max_abs() < 1e-8);
    }

    #[test]
    fn tolerance_halving_is_self_consistent() {
        let ev = RegularizedEval::<f64>::standard();
        let coarse = IntegratorConfig::with_tol(1e-8);
        let fine = IntegratorConfig::with_tol(5e-9);
        let (a, _) = direct_propagator(&ev, 0.5, 1.5, 20.0, 0.01, &coarse).unwrap();
        let (b, _) = direct_propagator(&ev, 0.5, 1.5, 20.0, 0.01, &fine).unwrap();
        assert!((a - b).max_abs() < 10.0 * 1e-8 * 20.0);
    }
}
