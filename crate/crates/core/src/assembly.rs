//! Gluing of the zone propagators into the full fundamental solution, the
//! `ε → 0` limit and the transfer matrices derived from it.

use serde::Serialize;

use crate::coefficients::{JumpCoefficient, MollifierPair, RegularizedEval};
use crate::error::{Error, Result};
use crate::hyperbolic::{e_hyp, e_hyp_limit};
use crate::integrator::{integrate, IntegrationStats, IntegratorConfig, RefineWindow};
use crate::linalg::{c, imag_unit, re, Mat2};
use crate::oracle::direct_propagator;
use crate::scalar::Real;
use crate::singular::e_sing;
use crate::zones::{hyp_boundary_times, ZoneConstant, ZoneLabel};

/// Smallest tolerance handed to the singular series, together with a
/// multiple of the working precision.
const SING_TOL_FLOOR: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Conversion {
    HypToSing,
    SingToHyp,
}

/// `ε·diag(1, i)` maps `(|ξ|û, D_t û)` to `(Λû, ∂_τ û)`; the second slot picks
/// up `i` because `∂_τ = ε∂_t = iεD_t`.
pub fn micro_energy_convert<T: Real>(direction: Conversion, eps: T) -> Mat2<T> {
    match direction {
        Conversion::HypToSing => Mat2::diag(re(eps), c(T::zero(), eps)),
        Conversion::SingToHyp => Mat2::diag(re(eps.recip()), c(T::zero(), -eps.recip())),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PathSegment<T> {
    pub zone: ZoneLabel,
    pub from: T,
    pub to: T,
}

#[derive(Clone, Debug, Serialize)]
pub struct FullPropagator<T> {
    #[serde(skip)]
    pub matrix: Mat2<T>,
    pub t1: T,
    pub t2: T,
    pub xi_abs: T,
    pub eps: T,
    pub path: Vec<PathSegment<T>>,
    /// Integrator steps summed over the segments.
    pub steps: usize,
}

/// Zone path of `[t1, t2]` at a fixed frequency.
pub fn zone_path<T: Real>(t1: T, t2: T, xi_abs: T, eps: T, zc: &ZoneConstant<T>) -> Result<Vec<PathSegment<T>>> {
    if xi_abs <= zc.n {
        return Ok(vec![PathSegment { zone: ZoneLabel::Bd, from: t1, to: t2 }]);
    }
    let hyp = |from, to| PathSegment { zone: ZoneLabel::Hyp, from, to };
    let Some((a, b)) = hyp_boundary_times(xi_abs, eps, zc)? else {
        return Ok(vec![hyp(t1, t2)]);
    };
    if b <= t1 || a >= t2 {
        return Ok(vec![hyp(t1, t2)]);
    }
    let (sa, sb) = (a.max(t1), b.min(t2));
    let mut path = Vec::with_capacity(3);
    if t1 < sa {
        path.push(hyp(t1, sa));
    }
    path.push(PathSegment { zone: ZoneLabel::Sing, from: sa, to: sb });
    if sb < t2 {
        path.push(hyp(sb, t2));
    }
    Ok(path)
}

fn check_path<T: Real>(path: &[PathSegment<T>], t1: T, t2: T) -> Result<()> {
    let tiles = path.first().map(|s| s.from) == Some(t1)
        && path.last().map(|s| s.to) == Some(t2)
        && path.windows(2).all(|w| w[0].to == w[1].from && w[0].zone != w[1].zone)
        && path.iter().all(|s| s.from <= s.to);
    if tiles {
        Ok(())
    } else {
        Err(Error::Internal(format!("zone path does not tile [{t1}, {t2}]")))
    }
}

/// Fundamental solution `E(t2, t1, ξ, ε)` composed zone by zone:
/// `E_hyp · T⁻¹ · E_sing · T · E_hyp`, or the direct solution for bounded
/// frequencies.
pub fn full_propagator<T: Real>(
    ev: &RegularizedEval<T>,
    t1: T,
    t2: T,
    xi_abs: T,
    eps: T,
    zc: &ZoneConstant<T>,
    cfg: &IntegratorConfig<T>,
) -> Result<FullPropagator<T>> {
    if !(t1 >= T::zero() && t1 < t2 && t2 <= T::two()) {
        return Err(Error::Domain(format!("need 0 ≤ t1 < t2 ≤ 2, got t1 = {t1}, t2 = {t2}")));
    }
    if !(eps > T::zero()) || !(xi_abs >= T::zero()) {
        return Err(Error::Domain(format!("need ε > 0 and |ξ| ≥ 0, got ε = {eps}, |ξ| = {xi_abs}")));
    }
    let path = zone_path(t1, t2, xi_abs, eps, zc)?;
    check_path(&path, t1, t2)?;
    let sing_tol = cfg.rel_tol.max(T::lit(SING_TOL_FLOOR)).max(T::lit(1000.0) * T::epsilon());
    let mut matrix = Mat2::identity();
    let mut stats = IntegrationStats::<T>::default();
    for seg in &path {
        let m = match seg.zone {
            ZoneLabel::Bd => {
                let (m, s) = direct_propagator(ev, seg.from, seg.to, xi_abs, eps, cfg)?;
                stats.merge(&s);
                m
            }
            ZoneLabel::Hyp => {
                let p = e_hyp(ev, seg.to, seg.from, xi_abs, eps, cfg)?;
                stats.steps += p.steps;
                p.matrix
            }
            ZoneLabel::Sing => {
                let tau = |t: T| (t - T::one()) / eps;
                let s = e_sing(ev, tau(seg.to), tau(seg.from), eps * xi_abs, eps, sing_tol)?;
                micro_energy_convert(Conversion::SingToHyp, eps)
                    * s.matrix
                    * micro_energy_convert(Conversion::HypToSing, eps)
            }
        };
        matrix = m * matrix;
    }
    Ok(FullPropagator {
        matrix,
        t1,
        t2,
        xi_abs,
        eps,
        path,
        steps: stats.steps,
    })
}

/// The limit `E_hyp(t2, 1₊₀, ξ, 0) · diag(1, H) · E_hyp(1₋₀, t1, ξ, 0)`.
pub fn limit_propagator<T: Real>(
    coeff: &JumpCoefficient<T>,
    t1: T,
    t2: T,
    xi_abs: T,
    cfg: &IntegratorConfig<T>,
) -> Result<Mat2<T>> {
    if !(t1 < T::one() && T::one() < t2) {
        return Err(Error::Domain(format!(
            "limit sandwich needs t1 < 1 < t2, got [{t1}, {t2}]; use the one-sided limit instead"
        )));
    }
    let before = e_hyp_limit(coeff, T::one(), t1, xi_abs, cfg)?;
    let after = e_hyp_limit(coeff, t2, T::one(), xi_abs, cfg)?;
    Ok(after * Mat2::diag(re(T::one()), re(coeff.big_h)) * before)
}

/// `½[[H+1, H-1], [H-1, H+1]] = M⁻¹ diag(1, H) M`.
pub fn reflection_matrix<T: Real>(big_h: T) -> Result<Mat2<T>> {
    if !(big_h > T::zero()) {
        return Err(Error::Domain(format!("H must be positive, got {big_h}")));
    }
    let (p, m) = ((big_h + T::one()) * T::half(), (big_h - T::one()) * T::half());
    Ok(Mat2::from_real(p, m, m, p))
}

/// Transfer across `[1 - εK, 1 + εK]` for `û'' + |ξ|²û + ψ_ε(t-1)û' = 0`,
/// in diagonalised variables.
pub fn delta_model_transfer<T: Real>(
    moll: &MollifierPair<T>,
    eps: T,
    xi_abs: T,
    cfg: &IntegratorConfig<T>,
) -> Result<Mat2<T>> {
    if !(eps > T::zero()) {
        return Err(Error::Domain(format!("ε must be positive, got {eps}")));
    }
    let (lo, hi) = (T::one() - eps * moll.k, T::one() + eps * moll.k);
    let window = RefineWindow { lo, hi, max_step: eps * T::lit(0.1) };
    let ixi = imag_unit::<T>().scale(xi_abs);
    let f = |t: T, y: &Mat2<T>| Mat2::new(re(T::zero()), ixi, ixi, re(-moll.psi_eps(t - T::one(), eps))) * *y;
    let (m, _) = integrate(f, lo, hi, Mat2::identity(), &[window], cfg)?;
    Ok(m.to_diagonal_frame())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::Branch;
    use crate::hyperbolic::e0;
    use crate::zones::choose_zone_constant;

    fn rotation(t2: f64, t1: f64, xi: f64) -> Mat2<f64> {
        e0(t2, t1, xi).from_diagonal_frame()
    }

    #[test]
    fn conversions_are_inverse() {
        for &eps in &[0.3, 0.01, 1e-4] {
            let a = micro_energy_convert(Conversion::HypToSing, eps);
            let b = micro_energy_convert(Conversion::SingToHyp, eps);
            assert!((a * b - Mat2::identity()).max_abs() < 1e-15);
            assert!((b * a - Mat2::identity()).max_abs() < 1e-15);
            let x = Mat2::from_real(1.0, 2.0, -3.0, 0.5);
            let conj = Mat2::diag(re(1.0), imag_unit());
            assert!((b * x * a - conj.inv().unwrap() * x * conj).max_abs() < 1e-14);
        }
        let h = Mat2::diag(re(1.0), re(1.0 / 3.0));
        let conj = Mat2::diag(re(1.0), imag_unit());
        assert!((conj.inv().unwrap() * h * conj - h).max_abs() < 1e-16);
    }

    #[test]
    fn paths_tile_the_interval() {
        let zc = ZoneConstant::fixed(2.0, 2.0);
        let p = zone_path(0.5, 1.5, 40.0, 0.01, &zc).unwrap();
        assert_eq!(p.iter().map(|s| s.zone).collect::<Vec<_>>(), [ZoneLabel::Hyp, ZoneLabel::Sing, ZoneLabel::Hyp]);
        let (a, b) = hyp_boundary_times(40.0, 0.01, &zc).unwrap().unwrap();
        assert_eq!((p[0].to, p[2].from), (a, b));
        assert_eq!(zone_path(0.5, 1.5, 1.0, 0.01, &zc).unwrap()[0].zone, ZoneLabel::Bd);
        assert_eq!(zone_path(0.5, 1.5, 500.0, 0.01, &zc).unwrap().len(), 1);
        assert_eq!(zone_path(0.5, 0.9, 40.0, 0.01, &zc).unwrap().len(), 1);
        // starting inside the singular zone drops the first hyperbolic piece
        let p = zone_path(1.0, 1.5, 40.0, 0.01, &zc).unwrap();
        assert_eq!(p[0], PathSegment { zone: ZoneLabel::Sing, from: 1.0, to: b });
        for q in [p, zone_path(0.99, 1.005, 30.0, 0.01, &zc).unwrap()] {
            let (t1, t2) = (q[0].from, q.last().unwrap().to);
            check_path(&q, t1, t2).unwrap();
        }
    }

    #[test]
    fn full_matches_direct_on_every_path_shape() {
        let ev = RegularizedEval::<f64>::standard();
        let zc = ZoneConstant::fixed(2.0, 2.0);
        let cfg = IntegratorConfig::with_tol(1e-10);
        for &(t1, t2, xi, eps) in &[
            (0.5, 1.5, 40.0, 0.01),
            (0.2, 1.9, 600.0, 0.01),
            (0.5, 1.5, 1.5, 0.05),
            (0.995, 1.3, 40.0, 0.01),
            (0.7, 1.005, 25.0, 0.02),
        ] {
            let full = full_propagator(&ev, t1, t2, xi, eps, &zc, &cfg).unwrap();
            let (d, _) = direct_propagator(&ev, t1, t2, xi, eps, &cfg).unwrap();
            assert!((full.matrix - d).max_abs() < 1e-6, "{t1} {t2} {xi}: {}", (full.matrix - d).max_abs());
        }
    }

    #[test]
    fn certified_zone_constant_on_a_sloped_scenario() {
        let ev = RegularizedEval::with_coeff(
            JumpCoefficient::new(Branch::constant(0.5), Branch::polynomial(vec![1.0, 0.0, 0.25])).unwrap(),
        );
        let zc = choose_zone_constant(&ev);
        let cfg = IntegratorConfig::with_tol(1e-10);
        let full = full_propagator(&ev, 0.3, 1.8, 30.0, 0.02, &zc, &cfg).unwrap();
        let (d, _) = direct_propagator(&ev, 0.3, 1.8, 30.0, 0.02, &cfg).unwrap();
        assert!((full.matrix - d).max_abs() < 1e-6);
        assert_eq!(full.path.len(), 3);
    }

    #[test]
    fn no_jump_gives_free_rotation() {
        let ev = RegularizedEval::with_coeff(JumpCoefficient::<f64>::constant(1.0).unwrap());
        let cfg = IntegratorConfig::with_tol(1e-11);
        for &(xi, eps) in &[(40.0, 0.01), (0.5, 0.1), (1e3, 0.01)] {
            let zc = ZoneConstant::fixed(2.0, 2.0);
            let full = full_propagator(&ev, 0.5, 1.5, xi, eps, &zc, &cfg).unwrap();
            assert!((full.matrix - rotation(1.5, 0.5, xi)).max_abs() < 1e-8);
        }
    }

    #[test]
    fn splitting_hyperbolic_segments_changes_little() {
        let ev = RegularizedEval::<f64>::standard();
        let zc = ZoneConstant::fixed(2.0, 2.0);
        let cfg = IntegratorConfig::with_tol(1e-10);
        let whole = full_propagator(&ev, 0.5, 1.5, 40.0, 0.01, &zc, &cfg).unwrap().matrix;
        let a = full_propagator(&ev, 0.5, 0.8, 40.0, 0.01, &zc, &cfg).unwrap().matrix;
        let b = full_propagator(&ev, 0.8, 1.5, 40.0, 0.01, &zc, &cfg).unwrap().matrix;
        assert!((b * a - whole).max_abs() < 1e-8);
    }

    #[test]
    fn limit_sandwich_closed_form() {
        let coeff = JumpCoefficient::<f64>::standard();
        let cfg = IntegratorConfig::with_tol(1e-12);
        let l = limit_propagator(&coeff, 0.5, 1.5, 20.0, &cfg).unwrap();
        let expect = rotation(1.5, 1.0, 20.0) * Mat2::diag(re(1.0), re(1.0 / 3.0)) * rotation(1.0, 0.5, 20.0);
        assert!((l - expect).max_abs() < 1e-9);
        let flat = JumpCoefficient::<f64>::constant(2.0).unwrap();
        let l = limit_propagator(&flat, 0.5, 1.5, 20.0, &cfg).unwrap();
        assert!((l - rotation(1.5, 0.5, 20.0)).max_abs() < 1e-9);
        assert!(limit_propagator(&coeff, 1.2, 1.5, 20.0, &cfg).is_err());
    }

    #[test]
    fn full_approaches_limit() {
        let ev = RegularizedEval::<f64>::standard();
        let zc = choose_zone_constant(&ev);
        let cfg = IntegratorConfig::with_tol(1e-10);
        let l = limit_propagator(&ev.coeff, 0.5, 1.5, 16.0, &cfg).unwrap();
        let err: Vec<f64> = [0.02, 0.01, 0.005]
            .iter()
            .map(|&eps| (full_propagator(&ev, 0.5, 1.5, 16.0, eps, &zc, &cfg).unwrap().matrix - l).norm())
            .collect();
        assert!(err[1] < 0.7 * err[0] && err[2] < 0.7 * err[1], "{err:?}");
    }

    #[test]
    fn reflection_matrices() {
        assert_eq!(reflection_matrix(1.0).unwrap(), Mat2::identity());
        let r = reflection_matrix(1.0 / 3.0).unwrap();
        assert!((r - Mat2::from_real(2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0)).max_abs() < 1e-15);
        assert!((r.a11 + r.a12 - re(1.0 / 3.0)).norm() < 1e-15);
        let h: f64 = 0.37;
        let via = Mat2::diag(re(1.0), re(h)).to_diagonal_frame();
        assert!((reflection_matrix(h).unwrap() - via).max_abs() < 1e-15);
        assert!(reflection_matrix(0.0).is_err());
    }

    #[test]
    fn delta_model() {
        let moll = MollifierPair::<f64>::standard();
        let cfg = IntegratorConfig::with_tol(1e-11);
        let e = std::f64::consts::E;
        let target = Mat2::from_real(1.0 + e, 1.0 - e, 1.0 - e, 1.0 + e).scale_re(1.0 / (2.0 * e));
        assert!((target - reflection_matrix(e.recip()).unwrap()).max_abs() < 1e-15);
        let m = delta_model_transfer(&moll, 1e-3, 1.0, &cfg).unwrap();
        assert!((m - target).max_abs() < 1e-2);
        let m0 = delta_model_transfer(&moll, 1e-3, 0.0, &cfg).unwrap();
        assert!((m0 - target).max_abs() < 1e-9);
    }
}
