//! Convergence studies in `ε`, each returning the `(ε, error)` pairs and the
//! fitted log-log slope.

use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{full_propagator, limit_propagator};
use crate::coefficients::RegularizedEval;
use crate::error::{Error, Result};
use crate::integrator::IntegratorConfig;
use crate::oracle::{fit_rate, RateFit};
use crate::scalar::Real;
use crate::singular::{e_sing, transfer_limit};
use crate::zones::{sing_boundary_taus, ZoneConstant};

/// Points of the `τ` grid used for `sup_τ |β_ε - β₀|`.
const BETA_GRID: usize = 4001;
/// Points of the `t` grid used for `sup |b_ε - b|`.
const COEFF_GRID: usize = 4001;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    LimitSandwich,
    Transfer,
    Beta,
    Coeff,
}

impl std::str::FromStr for Quantity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "limit-sandwich" => Ok(Quantity::LimitSandwich),
            "transfer" => Ok(Quantity::Transfer),
            "beta" => Ok(Quantity::Beta),
            "coeff" => Ok(Quantity::Coeff),
            _ => Err(Error::Config(format!("unknown quantity {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Study<T> {
    pub quantity: Quantity,
    pub fit: RateFit<T>,
}

impl<T: Real> Study<T> {
    /// `eps,error,fitted_slope` rows in `ε`-descending order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,error,fitted_slope\n");
        for (e, err) in &self.fit.pairs {
            out.push_str(&format!("{:.12e},{:.12e},{:.12e}\n", e.to_f64_lossy(), err.to_f64_lossy(), self.fit.slope.to_f64_lossy()));
        }
        out
    }
}

/// `2^{-a}, ..., 2^{-b}`.
pub fn dyadic<T: Real>(a: i32, b: i32) -> Vec<T> {
    (a..=b).map(|j| T::two().powi(-j)).collect()
}

fn study<T: Real>(quantity: Quantity, pairs: Vec<(T, T)>) -> Result<Study<T>> {
    Ok(Study { quantity, fit: fit_rate(&pairs)? })
}

/// `‖E(t2, t1, ξ, ε) - E_lim(t2, t1, ξ)‖`.
pub fn limit_sandwich_study<T: Real>(
    ev: &RegularizedEval<T>,
    zc: &ZoneConstant<T>,
    (t1, t2): (T, T),
    xi_abs: T,
    eps_list: &[T],
    cfg: &IntegratorConfig<T>,
) -> Result<Study<T>> {
    let lim = limit_propagator(&ev.coeff, t1, t2, xi_abs, cfg)?;
    let pairs = eps_list
        .par_iter()
        .map(|&eps| Ok((eps, (full_propagator(ev, t1, t2, xi_abs, eps, zc, cfg)?.matrix - lim).norm())))
        .collect::<Result<Vec<_>>>()?;
    study(Quantity::LimitSandwich, pairs)
}

/// Singular-zone endpoints for `Λ`, widened to cover `[-K, K]` when the zone
/// is narrower than the support of `β_ε`. Bounded frequencies use `[-K, K]`.
pub fn transfer_taus<T: Real>(ev: &RegularizedEval<T>, zc: &ZoneConstant<T>, lambda: T, eps: T) -> (T, T) {
    let k = ev.k();
    let tb = if lambda > zc.n * eps {
        match sing_boundary_taus(lambda, eps, zc) {
            Ok(Some((_, b))) => b.max(k),
            _ => k,
        }
    } else {
        k
    };
    (-tb, tb)
}

/// `‖E_sing(τ_Λ2, τ_Λ1, Λ, ε) - diag(1, H)‖` along `Λ = cε`.
pub fn transfer_study<T: Real>(
    ev: &RegularizedEval<T>,
    zc: &ZoneConstant<T>,
    lambda_factor: T,
    eps_list: &[T],
    tol: T,
) -> Result<Study<T>> {
    let target = transfer_limit(&ev.coeff);
    let pairs = eps_list
        .par_iter()
        .map(|&eps| {
            let lambda = lambda_factor * eps;
            let (a, b) = transfer_taus(ev, zc, lambda, eps);
            let p = e_sing(ev, b, a, lambda, eps, tol)?;
            Ok((eps, (p.matrix - target).norm()))
        })
        .collect::<Result<Vec<_>>>()?;
    study(Quantity::Transfer, pairs)
}

/// `sup_τ |β_ε(τ) - β₀(τ)|` on `|τ| ≤ 2K'`.
pub fn beta_study<T: Real>(ev: &RegularizedEval<T>, eps_list: &[T]) -> Result<Study<T>> {
    let r = T::two() * ev.moll.k_prime;
    let grid: Vec<T> = (0..BETA_GRID)
        .map(|i| -r + T::two() * r * T::from_usize_lossy(i) / T::from_usize_lossy(BETA_GRID - 1))
        .collect();
    let pairs = eps_list
        .par_iter()
        .map(|&eps| {
            let sup = grid.iter().fold(T::zero(), |m, &tau| m.max((ev.beta_eps(tau, eps) - ev.beta_zero(tau)).abs()));
            (eps, sup)
        })
        .collect();
    study(Quantity::Beta, pairs)
}

/// `sup |b_ε - b|` over `t ∈ [0, 2]` with `|t - 1| > εK`.
pub fn coeff_study<T: Real>(ev: &RegularizedEval<T>, eps_list: &[T]) -> Result<Study<T>> {
    let grid: Vec<T> = (0..COEFF_GRID)
        .map(|i| T::two() * T::from_usize_lossy(i) / T::from_usize_lossy(COEFF_GRID - 1))
        .collect();
    let pairs = eps_list
        .par_iter()
        .map(|&eps| {
            let mut sup = T::zero();
            for &t in grid.iter().filter(|&&t| (t - T::one()).abs() > eps * ev.k()) {
                sup = sup.max((ev.b_eps(t, eps) - ev.coeff.eval(t, 0)?).abs());
            }
            Ok((eps, sup))
        })
        .collect::<Result<Vec<_>>>()?;
    study(Quantity::Coeff, pairs)
}
