//! Zone decomposition of the extended phase space `(t, ξ, ε)`.

use serde::Serialize;

use crate::coefficients::RegularizedEval;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// The zone constant `N` with the bound constants it was derived from.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ZoneConstant<T> {
    pub n: T,
    /// `|h| c_ψΦ / b0`.
    pub c1: T,
    /// `sup |b'| / b0`.
    pub c2: T,
    /// Support half-width of the triangular shape function.
    pub k_prime: T,
}

impl<T: Real> ZoneConstant<T> {
    /// A hand-picked `N`; the bound constants are left at zero.
    pub fn fixed(n: T, k_prime: T) -> Self {
        Self {
            n,
            c1: T::zero(),
            c2: T::zero(),
            k_prime,
        }
    }

    /// Shape function `Φ_ε(t - 1)`.
    pub fn phi_eps(&self, t: T, eps: T) -> T {
        (self.k_prime - ((t - T::one()) / eps).abs()).max(T::zero()) / eps
    }

    /// Hyperbolic threshold `N(Φ_ε(t - 1) + 1)`.
    pub fn threshold(&self, t: T, eps: T) -> T {
        self.n * (self.phi_eps(t, eps) + T::one())
    }
}

/// Certified `N = max(1, 2c₁, 2c₂)`, which keeps `|𝔡_ε|/(4|ξ|) ≤ 1/8` on the
/// hyperbolic zone because `|𝔡_ε| ≤ c₁Φ_ε(t-1) + c₂`.
pub fn choose_zone_constant<T: Real>(ev: &RegularizedEval<T>) -> ZoneConstant<T> {
    let b0 = ev.coeff.b0;
    let c1 = ev.coeff.h.abs() * ev.moll.c_psi_phi() / b0;
    let c2 = ev.coeff.sup_derivative() / b0;
    let n = T::one().max(T::two() * c1).max(T::two() * c2);
    ZoneConstant {
        n,
        c1,
        c2,
        k_prime: ev.moll.k_prime,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneLabel {
    Hyp,
    Sing,
    Bd,
}

/// Point in hyperbolic coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZonePoint<T> {
    pub t: T,
    pub xi_abs: T,
    pub eps: T,
}

/// Point in singular coordinates `τ = (t - 1)/ε`, `Λ = ε|ξ|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingularPoint<T> {
    pub tau: T,
    pub lambda: T,
    pub eps: T,
}

impl<T: Real> ZonePoint<T> {
    pub fn to_singular(&self) -> SingularPoint<T> {
        SingularPoint {
            tau: (self.t - T::one()) / self.eps,
            lambda: self.eps * self.xi_abs,
            eps: self.eps,
        }
    }
}

impl<T: Real> SingularPoint<T> {
    pub fn to_zone(&self) -> ZonePoint<T> {
        ZonePoint {
            t: T::one() + self.eps * self.tau,
            xi_abs: self.lambda / self.eps,
            eps: self.eps,
        }
    }
}

/// Zone label; points on the hyperbolic boundary count as hyperbolic.
pub fn classify<T: Real>(p: &ZonePoint<T>, zc: &ZoneConstant<T>) -> ZoneLabel {
    if p.xi_abs <= zc.n {
        ZoneLabel::Bd
    } else if p.xi_abs >= zc.threshold(p.t, p.eps) {
        ZoneLabel::Hyp
    } else {
        ZoneLabel::Sing
    }
}

/// Entry and exit times `(t_ξ1, t_ξ2)` of the singular zone along a fixed
/// frequency, or `None` when the frequency never leaves the hyperbolic zone.
pub fn hyp_boundary_times<T: Real>(xi_abs: T, eps: T, zc: &ZoneConstant<T>) -> Result<Option<(T, T)>> {
    if !(xi_abs > zc.n) {
        return Err(Error::Domain(format!(
            "|ξ| = {xi_abs} ≤ N = {}: bounded frequencies have no hyperbolic boundary",
            zc.n
        )));
    }
    let tau = zc.k_prime - eps * (xi_abs / zc.n - T::one());
    if tau < T::zero() || tau > zc.k_prime {
        return Ok(None);
    }
    Ok(Some((T::one() - eps * tau, T::one() + eps * tau)))
}

/// The same boundary in singular variables, `Λ = N(Φ(τ) + ε)`.
pub fn sing_boundary_taus<T: Real>(lambda: T, eps: T, zc: &ZoneConstant<T>) -> Result<Option<(T, T)>> {
    if !(lambda > zc.n * eps) {
        return Err(Error::Domain(format!(
            "Λ = {lambda} ≤ Nε = {}: bounded frequencies have no hyperbolic boundary",
            zc.n * eps
        )));
    }
    let r = lambda / zc.n - eps;
    if r < T::zero() || r > zc.k_prime {
        return Ok(None);
    }
    let tau = zc.k_prime - r;
    Ok(Some((-tau, tau)))
}

/// Boundary polyline `(t, |ξ|)` of the singular zone, sampled uniformly in
/// `t` over `[1 - εK', 1 + εK']`.
pub fn boundary_polyline<T: Real>(eps: T, zc: &ZoneConstant<T>, samples: usize) -> Vec<(T, T)> {
    let samples = samples.max(2);
    (0..samples)
        .map(|i| {
            let x = -T::one() + T::two() * T::from_usize_lossy(i) / T::from_usize_lossy(samples - 1);
            let t = T::one() + eps * zc.k_prime * x;
            (t, zc.threshold(t, eps))
        })
        .collect()
}
