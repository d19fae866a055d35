//! Diagonalisation in the hyperbolic zone and the propagator
//! `E_hyp = √(b_ε(s)/b_ε(t)) M N₁(t) E₀(t,s) Q(t,s) N₁⁻¹(s) M⁻¹`.

use num_complex::Complex;
use serde::Serialize;

use crate::coefficients::{JumpCoefficient, RegularizedEval, Side};
use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegrationStats, IntegratorConfig, RefineWindow};
use crate::linalg::{c, imag_unit, re, Mat2};
use crate::quadrature::PanelGrid;
use crate::scalar::Real;

/// Nodes per panel of the Peano–Baker cross-check grid.
const SERIES_ORDER: usize = 16;
/// Iteration cap of the Peano–Baker cross-check.
const SERIES_MAX_TERMS: usize = 80;

/// A dissipation profile `𝔡 = b'/b` along the time axis, either regularised
/// or taken from one smooth branch of `b`.
pub trait DissipationProfile<T: Real> {
    /// `(𝔡(t), 𝔡'(t))`.
    fn dissipation(&self, t: T) -> (T, T);
    fn b(&self, t: T) -> T;
    /// Intervals on which the profile varies quickly.
    fn refine_windows(&self) -> Vec<RefineWindow<T>>;
}

/// `𝔡_ε` of a regularised coefficient at fixed `ε`.
#[derive(Clone, Copy, Debug)]
pub struct Regularized<'a, T> {
    pub ev: &'a RegularizedEval<T>,
    pub eps: T,
}

impl<T: Real> DissipationProfile<T> for Regularized<'_, T> {
    fn dissipation(&self, t: T) -> (T, T) {
        let mut d = [T::zero(); 2];
        self.ev.dissipation_derivatives(t, self.eps, &mut d);
        (d[0], d[1])
    }

    fn b(&self, t: T) -> T {
        self.ev.b_eps(t, self.eps)
    }

    fn refine_windows(&self) -> Vec<RefineWindow<T>> {
        let k = self.ev.k();
        vec![RefineWindow {
            lo: T::one() - self.eps * k,
            hi: T::one() + self.eps * k,
            max_step: self.eps * T::lit(0.1),
        }]
    }
}

/// `𝔡 = b'/b` computed from one smooth branch.
#[derive(Clone, Copy, Debug)]
pub struct BranchLimit<'a, T> {
    pub coeff: &'a JumpCoefficient<T>,
    pub side: Side,
}

impl<T: Real> DissipationProfile<T> for BranchLimit<'_, T> {
    fn dissipation(&self, t: T) -> (T, T) {
        let br = self.coeff.branch(self.side);
        let (b, b1, b2) = (br.eval(t, 0), br.eval(t, 1), br.eval(t, 2));
        let d = b1 / b;
        (d, b2 / b - d * d)
    }

    fn b(&self, t: T) -> T {
        self.coeff.branch(self.side).eval(t, 0)
    }

    fn refine_windows(&self) -> Vec<RefineWindow<T>> {
        Vec::new()
    }
}

/// `E₀(t, s) = diag(e^{i(t-s)|ξ|}, e^{-i(t-s)|ξ|})`.
pub fn e0<T: Real>(t: T, s: T, xi_abs: T) -> Mat2<T> {
    let (sn, cs) = ((t - s) * xi_abs).sin_cos();
    Mat2::diag(c(cs, sn), c(cs, -sn))
}

/// `D(ξ) = diag(|ξ|, -|ξ|)`, the diagonalised principal part.
pub fn principal_diag<T: Real>(xi_abs: T) -> Mat2<T> {
    Mat2::diag(re(xi_abs), re(-xi_abs))
}

/// `R = (i/2) 𝔡 [[1, 1], [1, 1]]`, the dissipation in the diagonal frame.
pub fn r_matrix<T: Real>(d: T) -> Mat2<T> {
    let z = c(T::zero(), d * T::half());
    Mat2::new(z, z, z, z)
}

/// `F⁽⁰⁾ = (i/2) 𝔡 I`.
pub fn f0_from<T: Real>(d: T) -> Mat2<T> {
    Mat2::scalar(c(T::zero(), d * T::half()))
}

/// `N⁽¹⁾ = (i𝔡/(4|ξ|)) [[0, -1], [1, 0]]`.
pub fn n_first<T: Real>(d: T, xi_abs: T) -> Mat2<T> {
    let a = c(T::zero(), d / (T::lit(4.0) * xi_abs));
    Mat2::new(re(T::zero()), -a, a, re(T::zero()))
}

/// `N₁ = I + N⁽¹⁾` and its exact inverse.
pub fn n1_from<T: Real>(d: T, xi_abs: T) -> Result<(Mat2<T>, Mat2<T>)> {
    let n1 = Mat2::identity() + n_first(d, xi_abs);
    // det N₁ = 1 - 𝔡²/(16|ξ|²) is real
    let det = n1.det();
    if det.re < T::half() {
        return Err(Error::ZoneConstant {
            det: det.re.to_f64_lossy(),
        });
    }
    let inv = n1.inv().ok_or(Error::ZoneConstant { det: 0.0 })?;
    Ok((n1, inv))
}

/// `R₁ = N₁⁻¹ (R N⁽¹⁾ - D_t N⁽¹⁾ - N⁽¹⁾ F⁽⁰⁾)` from `𝔡` and `𝔡'`.
pub fn r1_from<T: Real>(d: T, dd: T, xi_abs: T) -> Result<Mat2<T>> {
    let (_, n1_inv) = n1_from(d, xi_abs)?;
    let nf = n_first(d, xi_abs);
    // D_t N⁽¹⁾ = -i ∂_t N⁽¹⁾
    let q = dd / (T::lit(4.0) * xi_abs);
    let dt_n = Mat2::from_real(T::zero(), -q, q, T::zero());
    Ok(n1_inv * (r_matrix(d) * nf - dt_n - nf * f0_from(d)))
}

pub fn n1_matrix<T: Real>(ev: &RegularizedEval<T>, t: T, xi_abs: T, eps: T) -> Result<(Mat2<T>, Mat2<T>)> {
    let (d, _) = ev.dissipation_coeff(t, eps)?;
    n1_from(d, xi_abs)
}

pub fn f0_diag<T: Real>(ev: &RegularizedEval<T>, t: T, eps: T) -> Result<Mat2<T>> {
    let (d, _) = ev.dissipation_coeff(t, eps)?;
    Ok(f0_from(d))
}

pub fn r1_matrix<T: Real>(ev: &RegularizedEval<T>, t: T, xi_abs: T, eps: T) -> Result<Mat2<T>> {
    let (d, dd) = ev.dissipation_coeff(t, eps)?;
    r1_from(d, dd, xi_abs)
}

/// `𝓡(t) = E₀(s, t) R₁(t) E₀(t, s)`, written out entrywise.
fn conjugated_r1<T: Real>(r1: &Mat2<T>, t: T, s: T, xi_abs: T) -> Mat2<T> {
    let (sn, cs) = (T::two() * (t - s) * xi_abs).sin_cos();
    Mat2::new(r1.a11, r1.a12 * c(cs, -sn), r1.a21 * c(cs, sn), r1.a22)
}

fn r1_at<T: Real, P: DissipationProfile<T>>(p: &P, t: T, xi_abs: T) -> Result<Mat2<T>> {
    let (d, dd) = p.dissipation(t);
    r1_from(d, dd, xi_abs)
}

/// Solves `D_t Q = 𝓡 Q`, `Q(s) = I`, by adaptive Runge–Kutta.
pub fn q_profile<T: Real, P: DissipationProfile<T>>(
    p: &P,
    t: T,
    s: T,
    xi_abs: T,
    cfg: &IntegratorConfig<T>,
) -> Result<(Mat2<T>, IntegrationStats<T>)> {
    let mut failure = None;
    let iu = imag_unit::<T>();
    let f = |r: T, y: &Mat2<T>| match r1_at(p, r, xi_abs) {
        Ok(r1) => (conjugated_r1(&r1, r, s, xi_abs) * *y).scale(iu),
        Err(e) => {
            failure.get_or_insert(e);
            Mat2::zero()
        }
    };
    let out = integrate(f, s, t, Mat2::identity(), &p.refine_windows(), cfg)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

pub fn q_matrix<T: Real>(
    ev: &RegularizedEval<T>,
    t: T,
    s: T,
    xi_abs: T,
    eps: T,
    cfg: &IntegratorConfig<T>,
) -> Result<(Mat2<T>, IntegrationStats<T>)> {
    q_profile(&Regularized { ev, eps }, t, s, xi_abs, cfg)
}

/// Composite grid resolving both the `2|ξ|` oscillation of `𝓡` and the
/// `O(ε)` structure inside the refinement windows.
fn series_grid<T: Real, P: DissipationProfile<T>>(p: &P, t: T, s: T, xi_abs: T) -> PanelGrid<T> {
    let mut breaks = Vec::new();
    for w in p.refine_windows() {
        let width = w.max_step;
        let n = ((w.hi - w.lo) / width).ceil().to_usize().unwrap_or(1).max(1);
        for i in 0..=n {
            breaks.push(w.lo + (w.hi - w.lo) * T::from_usize_lossy(i) / T::from_usize_lossy(n));
        }
    }
    PanelGrid::new(s, t, &breaks, T::two() / xi_abs.max(T::one()), SERIES_ORDER)
}

/// `Q(t, s)` by the Peano–Baker series, summed as Picard iterations on a
/// composite Gauss grid. Returns the matrix and the number of terms used.
pub fn q_series_profile<T: Real, P: DissipationProfile<T>>(
    p: &P,
    t: T,
    s: T,
    xi_abs: T,
    tol: T,
) -> Result<(Mat2<T>, usize)> {
    if t == s {
        return Ok((Mat2::identity(), 0));
    }
    let grid = series_grid(p, t, s, xi_abs);
    let iu = imag_unit::<T>();
    let a: Vec<Mat2<T>> = grid
        .nodes
        .iter()
        .map(|&r| r1_at(p, r, xi_abs).map(|r1| conjugated_r1(&r1, r, s, xi_abs).scale(iu)))
        .collect::<Result<_>>()?;
    let mut q: Vec<Mat2<T>> = vec![Mat2::identity(); a.len()];
    let mut total = Mat2::identity();
    for n in 1..=SERIES_MAX_TERMS {
        let prod: Vec<Mat2<T>> = a.iter().zip(&q).map(|(x, y)| *x * *y).collect();
        let (run, end) = grid.cumulative(&prod);
        let next: Vec<Mat2<T>> = run.into_iter().map(|v| Mat2::identity() + v).collect();
        let new_total = Mat2::identity() + end;
        let change = (new_total - total).norm();
        q = next;
        total = new_total;
        if change < tol {
            return Ok((total, n));
        }
    }
    Err(Error::Truncation(format!(
        "Peano–Baker series did not reach {tol} within {SERIES_MAX_TERMS} terms"
    )))
}

pub fn q_series<T: Real>(
    ev: &RegularizedEval<T>,
    t: T,
    s: T,
    xi_abs: T,
    eps: T,
    tol: T,
) -> Result<(Mat2<T>, usize)> {
    q_series_profile(&Regularized { ev, eps }, t, s, xi_abs, tol)
}

/// `∫_s^t trace R₁`, so that `det Q(t, s) = exp(i ∫ trace R₁)`.
pub fn r1_trace_integral<T: Real>(ev: &RegularizedEval<T>, t: T, s: T, xi_abs: T, eps: T) -> Result<Complex<T>> {
    let p = Regularized { ev, eps };
    let grid = series_grid(&p, t, s, xi_abs);
    let vals: Vec<Complex<T>> = grid
        .nodes
        .iter()
        .map(|&r| r1_at(&p, r, xi_abs).map(|m| m.trace()))
        .collect::<Result<_>>()?;
    Ok(grid.integrate(&vals))
}

/// `∫_s^t ‖R₁‖`, the exponent in `‖Q‖ ≤ exp(∫‖R₁‖)`.
pub fn r1_norm_integral<T: Real>(ev: &RegularizedEval<T>, t: T, s: T, xi_abs: T, eps: T) -> Result<T> {
    let p = Regularized { ev, eps };
    let grid = series_grid(&p, t, s, xi_abs);
    let vals: Vec<T> = grid
        .nodes
        .iter()
        .map(|&r| r1_at(&p, r, xi_abs).map(|m| m.norm()))
        .collect::<Result<_>>()?;
    Ok(grid.integrate(&vals).abs())
}

/// Hyperbolic-zone propagator with integrator diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct HypPropagator<T> {
    #[serde(skip)]
    pub matrix: Mat2<T>,
    pub t_from: T,
    pub t_to: T,
    pub xi_abs: T,
    pub eps: T,
    pub steps: usize,
    pub est_error: T,
}

/// `E_hyp(t, s)` for any dissipation profile.
pub fn e_hyp_profile<T: Real, P: DissipationProfile<T>>(
    p: &P,
    t: T,
    s: T,
    xi_abs: T,
    cfg: &IntegratorConfig<T>,
) -> Result<(Mat2<T>, IntegrationStats<T>)> {
    if t == s {
        return Ok((Mat2::identity(), IntegrationStats::default()));
    }
    let (dt, _) = p.dissipation(t);
    let (ds, _) = p.dissipation(s);
    let (n1_t, _) = n1_from(dt, xi_abs)?;
    let (_, n1_s_inv) = n1_from(ds, xi_abs)?;
    let (q, stats) = q_profile(p, t, s, xi_abs, cfg)?;
    let pref = (p.b(s) / p.b(t)).sqrt();
    let m = Mat2::diagonaliser() * n1_t * e0(t, s, xi_abs) * q * n1_s_inv * Mat2::diagonaliser_inv();
    Ok((m.scale_re(pref), stats))
}

pub fn e_hyp<T: Real>(
    ev: &RegularizedEval<T>,
    t: T,
    s: T,
    xi_abs: T,
    eps: T,
    cfg: &IntegratorConfig<T>,
) -> Result<HypPropagator<T>> {
    if !(eps > T::zero()) {
        return Err(Error::Domain(format!("ε must be positive, got {eps}")));
    }
    if !(xi_abs > T::zero()) {
        return Err(Error::Domain(format!("hyperbolic propagator needs |ξ| > 0, got {xi_abs}")));
    }
    let (matrix, stats) = e_hyp_profile(&Regularized { ev, eps }, t, s, xi_abs, cfg)?;
    Ok(HypPropagator {
        matrix,
        t_from: s,
        t_to: t,
        xi_abs,
        eps,
        steps: stats.steps,
        est_error: stats.est_error,
    })
}

/// Branch on which `[s, t]` lies, with `t = 1` allowed as a one-sided endpoint.
pub fn branch_side<T: Real>(t: T, s: T) -> Result<Side> {
    if t.max(s) <= T::one() {
        Ok(Side::Left)
    } else if t.min(s) >= T::one() {
        Ok(Side::Right)
    } else {
        Err(Error::Domain(format!(
            "interval [{}, {}] straddles the jump at t = 1; use the limit sandwich",
            s.min(t),
            s.max(t)
        )))
    }
}

/// The `ε → 0` propagator on one side of the jump, built from the smooth
/// branch of `b`.
pub fn e_hyp_limit<T: Real>(
    coeff: &JumpCoefficient<T>,
    t: T,
    s: T,
    xi_abs: T,
    cfg: &IntegratorConfig<T>,
) -> Result<Mat2<T>> {
    let side = branch_side(t, s)?;
    e_hyp_profile(&BranchLimit { coeff, side }, t, s, xi_abs, cfg).map(|r| r.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::Branch;
    use crate::oracle::direct_propagator;
    use proptest::prelude::*;

    fn rotation(dt: f64, xi: f64) -> Mat2<f64> {
        let (s, co) = (dt * xi).sin_cos();
        Mat2::new(re(co), c(0.0, s), c(0.0, s), re(co))
    }

    fn quadratic() -> RegularizedEval<f64> {
        RegularizedEval::with_coeff(
            JumpCoefficient::new(Branch::constant(0.5), Branch::polynomial(vec![1.0, 0.0, 0.25])).unwrap(),
        )
    }

    #[test]
    fn e0_basics() {
        assert_eq!(e0(0.4, 0.4, 3.0), Mat2::identity());
        let half = e0(std::f64::consts::PI / 5.0, 0.0, 5.0);
        assert!((half - Mat2::scalar(re(-1.0))).max_abs() < 1e-15);
    }

    #[test]
    fn n1_values() {
        let ev = RegularizedEval::<f64>::standard();
        let (n, ni) = n1_matrix(&ev, 0.3, 10.0, 0.1).unwrap();
        assert_eq!(n, Mat2::identity());
        assert_eq!(ni, Mat2::identity());
        let (n, ni) = n1_matrix(&ev, 1.0, 50.0, 0.1).unwrap();
        assert!((n.a21.norm() - 8.2856880 / 200.0).abs() < 1e-8);
        assert!((n * ni - Mat2::identity()).max_abs() < 1e-15);
        let (d, _) = ev.dissipation_coeff(1.0, 0.1).unwrap();
        assert!((n.det() - re(1.0 - d * d / (16.0 * 2500.0))).norm() < 1e-15);
    }

    #[test]
    fn n1_rejects_points_outside_the_zone() {
        assert!(matches!(n1_from(40.0, 5.0), Err(Error::ZoneConstant { .. })));
    }

    #[test]
    fn r1_vanishes_where_dissipation_does() {
        let ev = RegularizedEval::<f64>::standard();
        assert_eq!(r1_matrix(&ev, 1.2, 30.0, 0.1).unwrap(), Mat2::zero());
        assert_eq!(f0_diag(&ev, 0.2, 0.1).unwrap(), Mat2::zero());
    }

    #[test]
    fn r1_matches_first_order_transformation() {
        // N₁⁻¹((D+R)N₁ - D_tN₁) = D + F⁽⁰⁾ + R₁, with D_tN₁ from finite differences
        let ev = quadratic();
        let (t, xi, eps) = (1.01, 40.0, 0.05);
        let (d, _) = ev.dissipation_coeff(t, eps).unwrap();
        let h = 1e-6;
        let np = Mat2::identity() + n_first(ev.dissipation_coeff(t + h, eps).unwrap().0, xi);
        let nm = Mat2::identity() + n_first(ev.dissipation_coeff(t - h, eps).unwrap().0, xi);
        let dt_n1 = (np - nm).scale(c(0.0, -1.0 / (2.0 * h)));
        let (n1, n1i) = n1_from(d, xi).unwrap();
        let lhs = n1i * ((principal_diag(xi) + r_matrix(d)) * n1 - dt_n1);
        let rhs = principal_diag(xi) + f0_from(d) + r1_matrix(&ev, t, xi, eps).unwrap();
        assert!((lhs - rhs).max_abs() < 1e-6, "{}", (lhs - rhs).max_abs());
    }

    #[test]
    fn dissipation_free_segment_is_a_rotation() {
        let ev = RegularizedEval::<f64>::standard();
        let cfg = IntegratorConfig::with_tol(1e-10);
        let p = e_hyp(&ev, 0.8, 0.2, 10.0, 0.05, &cfg).unwrap();
        assert!((p.matrix - rotation(0.6, 10.0)).max_abs() < 1e-13);
        let id = e_hyp(&ev, 0.5, 0.5, 10.0, 0.05, &cfg).unwrap();
        assert_eq!(id.matrix, Mat2::identity());
    }

    #[test]
    fn hyperbolic_propagator_matches_direct_integration() {
        let cfg = IntegratorConfig::with_tol(1e-11);
        for ev in [RegularizedEval::<f64>::standard(), quadratic()] {
            // |ξ| large enough that the whole path stays hyperbolic
            for &(s, t, xi, eps) in &[(0.6, 1.4, 60.0, 0.02), (0.9, 1.05, 200.0, 0.01), (1.1, 1.9, 9.0, 0.05)] {
                let a = e_hyp(&ev, t, s, xi, eps, &cfg).unwrap().matrix;
                let (b, _) = direct_propagator(&ev, s, t, xi, eps, &cfg).unwrap();
                assert!((a - b).max_abs() < 1e-7, "{s} {t} {xi}: {}", (a - b).max_abs());
            }
        }
    }

    #[test]
    fn series_agrees_with_integrator() {
        let ev = quadratic();
        let cfg = IntegratorConfig::with_tol(1e-11);
        let (t, s, xi, eps) = (1.3, 0.8, 50.0, 0.02);
        let (a, _) = q_matrix(&ev, t, s, xi, eps, &cfg).unwrap();
        let (b, n) = q_series(&ev, t, s, xi, eps, 1e-12).unwrap();
        assert!(n > 1);
        assert!((a - b).max_abs() < 1e-9, "{}", (a - b).max_abs());
    }

    #[test]
    fn liouville_and_norm_bounds() {
        let ev = RegularizedEval::<f64>::standard();
        let cfg = IntegratorConfig::with_tol(1e-12);
        let (t, s, xi, eps) = (1.2, 0.9, 40.0, 0.05);
        let (q, _) = q_matrix(&ev, t, s, xi, eps, &cfg).unwrap();
        let tr = r1_trace_integral(&ev, t, s, xi, eps).unwrap();
        let expect = (imag_unit::<f64>() * tr).exp();
        assert!((q.det() - expect).norm() < 1e-8);
        let l = r1_norm_integral(&ev, t, s, xi, eps).unwrap();
        assert!(q.norm() <= l.exp() + 1e-10);
        assert!(q.det().norm() >= (-l).exp() - 1e-10);
    }

    #[test]
    fn limit_on_constant_branches_is_a_rotation() {
        let coeff = JumpCoefficient::<f64>::standard();
        let cfg = IntegratorConfig::default();
        let m = e_hyp_limit(&coeff, 1.7, 1.0, 12.0, &cfg).unwrap();
        assert!((m - rotation(0.7, 12.0)).max_abs() < 1e-14);
        assert!(e_hyp_limit(&coeff, 1.2, 0.8, 12.0, &cfg).is_err());
    }

    #[test]
    fn limit_flow_property() {
        let ev = quadratic();
        let cfg = IntegratorConfig::with_tol(1e-12);
        let a = e_hyp_limit(&ev.coeff, 1.4, 1.1, 20.0, &cfg).unwrap();
        let b = e_hyp_limit(&ev.coeff, 1.9, 1.4, 20.0, &cfg).unwrap();
        let ab = e_hyp_limit(&ev.coeff, 1.9, 1.1, 20.0, &cfg).unwrap();
        assert!((b * a - ab).max_abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn commutator_identity(d in -50.0f64..50.0, xi in 1.0f64..500.0) {
            let nf = n_first(d, xi);
            let dm = principal_diag(xi);
            let lhs = dm * nf - nf * dm;
            let rhs = f0_from(d) - r_matrix(d);
            prop_assert!((lhs - rhs).max_abs() <= 1e-13 * (1.0 + d.abs()));
        }

        #[test]
        fn e0_is_unitary_with_group_property(t in -3.0f64..3.0, r in -3.0f64..3.0, s in -3.0f64..3.0, xi in 0.0f64..200.0) {
            let a = e0(t, s, xi);
            prop_assert!((a.norm() - 1.0).abs() < 1e-14);
            prop_assert!((a.adjoint() * a - Mat2::identity()).max_abs() < 1e-14);
            prop_assert!((e0(t, r, xi) * e0(r, s, xi) - a).max_abs() < 1e-11);
        }
    }
}
