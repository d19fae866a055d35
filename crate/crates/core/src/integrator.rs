//! Dormand–Prince 5(4) integration of 2x2 complex matrix ODEs with
//! proportional-integral step-size control.
//!
//! The coefficient matrices in this crate are smooth for every fixed
//! regularisation parameter but vary on an `O(ε)` scale inside a known
//! window. Callers therefore pass "refinement windows": the interval is
//! split at the window edges and the step size is capped inside them, so
//! the controller can never step over the window blindly.

use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug)]
pub struct IntegratorConfig<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_steps: usize,
    pub min_step: T,
}

impl<T: Real> IntegratorConfig<T> {
    pub fn new(rel_tol: T, abs_tol: T) -> Self {
        Self {
            rel_tol,
            abs_tol,
            max_steps: 2_000_000,
            min_step: T::lit(1e-14),
        }
    }

    /// Same relative and absolute tolerance.
    pub fn with_tol(tol: T) -> Self {
        Self::new(tol, tol)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: T| x >= T::lit(1e-13) && x <= T::lit(1e-3);
        if !ok(self.rel_tol) || !ok(self.abs_tol) {
            return Err(Error::Domain(format!(
                "tolerances must lie in [1e-13, 1e-3], got rel={} abs={}",
                self.rel_tol, self.abs_tol
            )));
        }
        Ok(())
    }

    /// Halved tolerances, for self-convergence checks.
    pub fn refined(&self) -> Self {
        Self {
            rel_tol: self.rel_tol * T::half(),
            abs_tol: self.abs_tol * T::half(),
            ..*self
        }
    }
}

impl<T: Real> Default for IntegratorConfig<T> {
    fn default() -> Self {
        Self::with_tol(T::lit(1e-10))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IntegrationStats<T> {
    pub steps: usize,
    pub rejected: usize,
    pub evals: usize,
    /// Sum of the accepted local error estimates (in the scaled norm, times tolerance).
    pub est_error: T,
}

impl<T: Real> IntegrationStats<T> {
    pub fn merge(&mut self, o: &Self) {
        self.steps += o.steps;
        self.rejected += o.rejected;
        self.evals += o.evals;
        self.est_error = self.est_error + o.est_error;
    }
}

/// Interval `[lo, hi]` inside which the step size may not exceed `max_step`.
#[derive(Clone, Copy, Debug)]
pub struct RefineWindow<T> {
    pub lo: T,
    pub hi: T,
    pub max_step: T,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

fn lincomb<T: Real>(y: &Mat2<T>, h: T, terms: &[(f64, &Mat2<T>)]) -> Mat2<T> {
    let mut acc = *y;
    for (c, k) in terms {
        acc += k.scale_re(h * T::lit(*c));
    }
    acc
}

fn error_norm<T: Real>(err: &Mat2<T>, y0: &Mat2<T>, y1: &Mat2<T>, cfg: &IntegratorConfig<T>) -> T {
    let e = err.entries();
    let a = y0.entries();
    let b = y1.entries();
    let mut s = T::zero();
    for i in 0..4 {
        for (ei, ai, bi) in [(e[i].re, a[i].re, b[i].re), (e[i].im, a[i].im, b[i].im)] {
            let sc = cfg.abs_tol + cfg.rel_tol * ai.abs().max(bi.abs());
            let r = ei / sc;
            s = s + r * r;
        }
    }
    (s / T::lit(8.0)).sqrt()
}

/// Integrates `dY/dt = f(t, Y)` from `t0` to `t1` (either direction).
pub fn integrate<T, F>(
    mut f: F,
    t0: T,
    t1: T,
    y0: Mat2<T>,
    windows: &[RefineWindow<T>],
    cfg: &IntegratorConfig<T>,
) -> Result<(Mat2<T>, IntegrationStats<T>)>
where
    T: Real,
    F: FnMut(T, &Mat2<T>) -> Mat2<T>,
{
    let mut stats = IntegrationStats::default();
    if t0 == t1 {
        return Ok((y0, stats));
    }
    let forward = t1 > t0;
    let (lo, hi) = if forward { (t0, t1) } else { (t1, t0) };
    let mut cuts = vec![lo, hi];
    for w in windows {
        for e in [w.lo, w.hi] {
            if e > lo && e < hi {
                cuts.push(e);
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    cuts.dedup();
    if !forward {
        cuts.reverse();
    }
    let mut y = y0;
    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let mid = (a + b) * T::half();
        let hmax = windows
            .iter()
            .filter(|w| mid >= w.lo && mid <= w.hi)
            .fold(T::infinity(), |m, w| m.min(w.max_step));
        y = integrate_segment(&mut f, a, b, y, hmax, cfg, &mut stats)?;
    }
    Ok((y, stats))
}

fn integrate_segment<T, F>(
    f: &mut F,
    a: T,
    b: T,
    y0: Mat2<T>,
    hmax: T,
    cfg: &IntegratorConfig<T>,
    stats: &mut IntegrationStats<T>,
) -> Result<Mat2<T>>
where
    T: Real,
    F: FnMut(T, &Mat2<T>) -> Mat2<T>,
{
    let dir = if b > a { T::one() } else { -T::one() };
    let len = (b - a).abs();
    let hmax = hmax.min(len);
    let mut h = (len * T::lit(0.01)).min(hmax).max(cfg.min_step);
    let mut t = a;
    let mut y = y0;
    let mut k1 = f(t, &y);
    stats.evals += 1;
    let mut err_prev = T::lit(1e-4);
    let safety = T::lit(0.9);
    let beta = T::lit(0.04);
    let alpha = T::lit(0.2) - beta * T::lit(0.75);
    let mut last_rejected = false;
    loop {
        let remaining = (b - t).abs();
        if remaining <= len * T::epsilon() * T::lit(4.0) {
            break;
        }
        if stats.steps + stats.rejected >= cfg.max_steps {
            return Err(Error::Integration {
                at: t.to_f64_lossy(),
                reason: format!("max_steps ({}) exceeded", cfg.max_steps),
            });
        }
        let last = h >= remaining;
        let hs = if last { remaining } else { h };
        let hd = hs * dir;
        let k2 = f(t + hd * T::lit(C2), &lincomb(&y, hd, &[(A21, &k1)]));
        let k3 = f(t + hd * T::lit(C3), &lincomb(&y, hd, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(
            t + hd * T::lit(C4),
            &lincomb(&y, hd, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = f(
            t + hd * T::lit(C5),
            &lincomb(&y, hd, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let t_new = if last { b } else { t + hd };
        let k6 = f(
            t_new,
            &lincomb(&y, hd, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y_new = lincomb(&y, hd, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = f(t_new, &y_new);
        stats.evals += 6;
        let err_vec = lincomb(
            &Mat2::zero(),
            hd,
            &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
        );
        let err = error_norm(&err_vec, &y, &y_new, cfg);
        if !err.is_finite() {
            return Err(Error::Integration {
                at: t.to_f64_lossy(),
                reason: "non-finite error estimate".into(),
            });
        }
        if err <= T::one() {
            stats.steps += 1;
            stats.est_error = stats.est_error + err * cfg.rel_tol;
            t = t_new;
            y = y_new;
            k1 = k7;
            let e = err.max(T::lit(1e-10));
            let mut fac = safety * e.powf(-alpha) * err_prev.powf(beta);
            fac = fac.max(T::lit(0.2)).min(T::lit(10.0));
            if last_rejected {
                fac = fac.min(T::one());
            }
            err_prev = e.max(T::lit(1e-4));
            h = (hs * fac).min(hmax);
            last_rejected = false;
            if last {
                break;
            }
        } else {
            stats.rejected += 1;
            let fac = (safety * err.powf(-alpha)).max(T::lit(0.2));
            h = hs * fac;
            last_rejected = true;
            if h < cfg.min_step {
                return Err(Error::Integration {
                    at: t.to_f64_lossy(),
                    reason: format!("step size underflow (h = {})", h),
                });
            }
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, re};

    #[test]
    fn rotation_is_reproduced() {
        let w = 7.0;
        let gen = Mat2::from_real(0.0, w, -w, 0.0);
        let cfg = IntegratorConfig::with_tol(1e-11);
        let (y, st) = integrate(|_, y| gen * *y, 0.0, 1.3, Mat2::identity(), &[], &cfg).unwrap();
        let (s, co) = (w * 1.3f64).sin_cos();
        let exact = Mat2::from_real(co, s, -s, co);
        assert!((y - exact).max_abs() < 1e-9, "{:?}", y - exact);
        assert!(st.steps > 10);
    }

    #[test]
    fn backward_integration_inverts_forward() {
        let f = |t: f64, y: &Mat2<f64>| Mat2::new(re(0.0), c(0.0, t), re(1.0), re(-t)) * *y;
        let cfg = IntegratorConfig::with_tol(1e-12);
        let (fw, _) = integrate(f, 0.2, 1.5, Mat2::identity(), &[], &cfg).unwrap();
        let (bw, _) = integrate(f, 1.5, 0.2, Mat2::identity(), &[], &cfg).unwrap();
        assert!((fw * bw - Mat2::identity()).max_abs() < 1e-9);
    }

    #[test]
    fn window_forces_small_steps() {
        let cfg = IntegratorConfig::with_tol(1e-8);
        let win = [RefineWindow { lo: 0.4, hi: 0.6, max_step: 0.01 }];
        let (_, st) = integrate(|_, _| Mat2::zero(), 0.0, 1.0, Mat2::identity(), &win, &cfg).unwrap();
        assert!(st.steps >= 20);
    }

    #[test]
    fn step_budget_is_enforced() {
        let cfg = IntegratorConfig { max_steps: 3, ..IntegratorConfig::with_tol(1e-10) };
        let gen = Mat2::from_real(0.0, 100.0, -100.0, 0.0);
        let r = integrate(|_, y| gen * *y, 0.0, 1.0, Mat2::identity(), &[], &cfg);
        assert!(matches!(r, Err(Error::Integration { .. })));
    }

    #[test]
    fn tolerance_validation() {
        assert!(IntegratorConfig::<f64>::with_tol(1e-10).validate().is_ok());
        assert!(IntegratorConfig::<f64>::with_tol(1e-2).validate().is_err());
        assert!(IntegratorConfig::<f64>::with_tol(1e-15).validate().is_err());
    }
}
