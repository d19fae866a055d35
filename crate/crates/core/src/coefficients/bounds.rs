use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::oracle::fit_rate;
use crate::scalar::Real;

use super::regularized::{RegularizedEval, REG_MAX_ORDER};

/// Minimum number of grid points required inside `[1 - εK, 1 + εK]`.
pub const MIN_WINDOW_POINTS: usize = 16;

/// Sup ratios for one `(k, ε)` pair.
#[derive(Clone, Debug)]
pub struct LemmaRow<T> {
    pub k: usize,
    pub eps: T,
    /// `sup |b_ε^{(k)}| / (Φ_ε(t-1) + 1)^k`.
    pub coeff_ratio: T,
    /// `sup |∂^k 𝔡_ε| / (Φ_ε(t-1) + 1)^{k+1}`.
    pub diss_ratio: T,
    /// `sup_{|t-1| > εK} |b_ε^{(k)} - b^{(k)}| / ε`.
    pub approx_ratio: T,
    /// `sup_{|t-1| > εK} |b_ε^{(k)} - b^{(k)}|`.
    pub approx_sup: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LemmaQuantity {
    Coeff,
    Diss,
    Approx,
}

#[derive(Clone, Debug)]
pub struct LemmaReport<T> {
    pub rows: Vec<LemmaRow<T>>,
    pub k_max: usize,
    /// Per `k`: fitted log-log slope of each sup against ε, `None` when the
    /// sups vanish identically.
    pub coeff_slopes: Vec<Option<T>>,
    pub diss_slopes: Vec<Option<T>>,
    pub approx_slopes: Vec<Option<T>>,
}

impl<T: Real> LemmaReport<T> {
    fn value(row: &LemmaRow<T>, q: LemmaQuantity) -> T {
        match q {
            LemmaQuantity::Coeff => row.coeff_ratio,
            LemmaQuantity::Diss => row.diss_ratio,
            LemmaQuantity::Approx => row.approx_ratio,
        }
    }

    pub fn slope(&self, k: usize, q: LemmaQuantity) -> Option<T> {
        match q {
            LemmaQuantity::Coeff => self.coeff_slopes[k],
            LemmaQuantity::Diss => self.diss_slopes[k],
            LemmaQuantity::Approx => self.approx_slopes[k],
        }
    }

    /// Largest value of a quantity over all ε for a given `k`.
    pub fn sup(&self, k: usize, q: LemmaQuantity) -> T {
        self.rows
            .iter()
            .filter(|r| r.k == k)
            .fold(T::zero(), |m, r| m.max(Self::value(r, q)))
    }

    /// Value at the smallest ε divided by the value at the largest ε.
    pub fn growth(&self, k: usize, q: LemmaQuantity) -> T {
        let rows: Vec<_> = self.rows.iter().filter(|r| r.k == k).collect();
        let small = rows.iter().min_by(|a, b| a.eps.partial_cmp(&b.eps).unwrap());
        let large = rows.iter().max_by(|a, b| a.eps.partial_cmp(&b.eps).unwrap());
        match (small, large) {
            (Some(s), Some(l)) if Self::value(l, q) > T::zero() => Self::value(s, q) / Self::value(l, q),
            _ => T::zero(),
        }
    }

    /// CSV with header `k,eps,sup_ratio,slope`.
    pub fn to_csv(&self, q: LemmaQuantity) -> String {
        let mut s = String::from("k,eps,sup_ratio,slope\n");
        for r in &self.rows {
            let slope = self
                .slope(r.k, q)
                .map(|v| format!("{:.12e}", v.to_f64_lossy()))
                .unwrap_or_else(|| "nan".into());
            let _ = writeln!(
                s,
                "{},{:.12e},{:.12e},{}",
                r.k,
                r.eps.to_f64_lossy(),
                Self::value(r, q).to_f64_lossy(),
                slope
            );
        }
        s
    }
}

/// Grid on `[0, 2]` refined around `t = 1` at the scale of every `ε`.
pub fn lemma_grid<T: Real>(ev: &RegularizedEval<T>, eps_list: &[T]) -> Vec<T> {
    let coarse = 800;
    let mut g: Vec<T> = (0..=coarse)
        .map(|i| T::two() * T::from_usize_lossy(i) / T::from_usize_lossy(coarse))
        .collect();
    let kp = ev.moll.k_prime;
    let fine = 128;
    for &eps in eps_list {
        for i in 0..=fine {
            let x = -T::one() + T::two() * T::from_usize_lossy(i) / T::from_usize_lossy(fine);
            let t = T::one() + eps * kp * x;
            if t >= T::zero() && t <= T::two() {
                g.push(t);
            }
        }
    }
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    g.dedup();
    g
}

/// Sup ratios behind the coefficient bounds `|b_ε^{(k)}| ≲ (Φ_ε + 1)^k`,
/// `|∂^k 𝔡_ε| ≲ (Φ_ε + 1)^{k+1}` and the approximation `|b_ε^{(k)} - b^{(k)}| ≲ ε`
/// off the window, with fitted slopes.
pub fn lemma_bound_report<T: Real>(
    ev: &RegularizedEval<T>,
    k_max: usize,
    eps_list: &[T],
    t_grid: &[T],
) -> Result<LemmaReport<T>> {
    if k_max + 1 > REG_MAX_ORDER {
        return Err(Error::UnsupportedOrder {
            order: k_max,
            max: REG_MAX_ORDER - 1,
        });
    }
    if eps_list.iter().any(|e| !(*e > T::zero())) {
        return Err(Error::Domain("ε values must be positive".into()));
    }
    let (lo, hi) = t_grid.iter().fold((T::infinity(), T::neg_infinity()), |(a, b), &t| (a.min(t), b.max(t)));
    if lo > T::zero() || hi < T::two() {
        return Err(Error::Resolution(format!("t grid must cover [0, 2], got [{lo}, {hi}]")));
    }
    let k = ev.moll.k;
    for &eps in eps_list {
        let inside = t_grid.iter().filter(|&&t| (t - T::one()).abs() <= eps * k).count();
        if inside < MIN_WINDOW_POINTS {
            return Err(Error::Resolution(format!(
                "only {inside} grid points inside the mollifier window at ε = {eps}; need {MIN_WINDOW_POINTS}"
            )));
        }
    }

    let mut rows = Vec::new();
    let mut b = [T::zero(); REG_MAX_ORDER + 1];
    let mut d = [T::zero(); REG_MAX_ORDER];
    for &eps in eps_list {
        let mut acc: Vec<[T; 4]> = vec![[T::zero(); 4]; k_max + 1];
        for &t in t_grid {
            ev.derivatives(t, eps, &mut b[..=k_max + 1]);
            super::regularized::leibniz_quotient(&b[..=k_max + 1], &mut d[..=k_max]);
            let w = ev.moll.phi_eps(t - T::one(), eps) + T::one();
            let off_window = (t - T::one()).abs() > eps * k;
            for kk in 0..=k_max {
                let a = &mut acc[kk];
                a[0] = a[0].max(b[kk].abs() / w.powi(kk as i32));
                a[1] = a[1].max(d[kk].abs() / w.powi(kk as i32 + 1));
                if off_window {
                    let exact = ev.coeff.eval(t, kk)?;
                    let diff = (b[kk] - exact).abs();
                    a[2] = a[2].max(diff / eps);
                    a[3] = a[3].max(diff);
                }
            }
        }
        for (kk, a) in acc.into_iter().enumerate() {
            rows.push(LemmaRow {
                k: kk,
                eps,
                coeff_ratio: a[0],
                diss_ratio: a[1],
                approx_ratio: a[2],
                approx_sup: a[3],
            });
        }
    }

    let slopes = |f: &dyn Fn(&LemmaRow<T>) -> T| -> Vec<Option<T>> {
        (0..=k_max)
            .map(|kk| {
                let pairs: Vec<(T, T)> = rows.iter().filter(|r| r.k == kk).map(|r| (r.eps, f(r))).collect();
                if pairs.iter().any(|p| !(p.1 > T::zero())) {
                    None
                } else {
                    fit_rate(&pairs).ok().map(|r| r.slope)
                }
            })
            .collect()
    };
    let coeff_slopes = slopes(&|r| r.coeff_ratio);
    let diss_slopes = slopes(&|r| r.diss_ratio);
    let approx_slopes = slopes(&|r| r.approx_sup);
    Ok(LemmaReport {
        rows,
        k_max,
        coeff_slopes,
        diss_slopes,
        approx_slopes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{Branch, JumpCoefficient};

    fn dyadic(a: i32, b: i32) -> Vec<f64> {
        (a..=b).map(|j| 2f64.powi(-j)).collect()
    }

    #[test]
    fn constant_branches_have_exact_approximation() {
        let ev = RegularizedEval::<f64>::standard();
        let eps = dyadic(3, 8);
        let grid = lemma_grid(&ev, &eps);
        let rep = lemma_bound_report(&ev, 1, &eps, &grid).unwrap();
        for r in rep.rows.iter().filter(|r| r.k == 0) {
            assert_eq!(r.approx_sup, 0.0);
        }
        assert!(rep.slope(0, LemmaQuantity::Approx).is_none());
        // b_ε' = hψ_ε and ψ ≤ c Φ give the k = 1 bound
        let c = ev.moll.c_psi_phi();
        for r in rep.rows.iter().filter(|r| r.k == 1) {
            assert!(r.coeff_ratio <= ev.coeff.h.abs() * c, "{} > {}", r.coeff_ratio, c);
        }
    }

    #[test]
    fn smooth_branch_rate() {
        let ev = RegularizedEval::with_coeff(
            JumpCoefficient::new(Branch::constant(0.5), Branch::polynomial(vec![1.0, 0.0, 0.25])).unwrap(),
        );
        let eps = dyadic(3, 8);
        let grid = lemma_grid(&ev, &eps);
        let rep = lemma_bound_report(&ev, 0, &eps, &grid).unwrap();
        let s = rep.slope(0, LemmaQuantity::Approx).unwrap();
        // b_ε - b = b'' ε² μ₂ / 2 exactly for a quadratic branch
        assert!(s >= 0.9, "{s}");
        let csv = rep.to_csv(LemmaQuantity::Approx);
        assert!(csv.starts_with("k,eps,sup_ratio,slope\n"));
        assert_eq!(csv.lines().count(), 1 + eps.len());
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let ev = RegularizedEval::<f64>::standard();
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        let err = lemma_bound_report(&ev, 1, &[1e-3], &grid).unwrap_err();
        assert!(matches!(err, Error::Resolution(_)));
    }
}
