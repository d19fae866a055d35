//! The singular zone in the variables `τ = (t - 1)/ε`, `Λ = ε|ξ|`:
//! `∂_τ U = [diag(0, -β_ε) + ΛJ] U` solved as `E_sing = F G` with the
//! diagonal part `F` in closed form and `G = I + Σ Λ^k G_k`.

use serde::Serialize;

use crate::coefficients::{JumpCoefficient, RegularizedEval};
use crate::error::{Error, Result};
use crate::linalg::{re, Mat2};
use crate::quadrature::PanelGrid;
use crate::scalar::Real;

/// Hard cap on the order of the `Λ`-series.
pub const G_MAX_ORDER: usize = 30;
/// Gauss nodes per panel of the shared `r`-grid.
const GRID_ORDER: usize = 16;
/// Panels of the shared `r`-grid.
const GRID_PANELS: usize = 32;
/// Margin applied to the sampled sup of `‖F̃‖`.
const TAIL_MARGIN: f64 = 1.1;

/// `β` profile in singular time: regularised at fixed `ε`, or the limit `β₀`.
#[derive(Clone, Copy, Debug)]
pub enum BetaProfile<'a, T> {
    Eps(&'a RegularizedEval<T>, T),
    Limit(&'a RegularizedEval<T>),
}

impl<T: Real> BetaProfile<'_, T> {
    /// A primitive of `β`: `log b_ε(1 + ετ)`, or `log(hΘ(τ) + b(1-0))` in the limit.
    pub fn log_b(&self, tau: T) -> T {
        match *self {
            BetaProfile::Eps(ev, eps) => {
                let mut b = [T::zero(); 1];
                ev.derivatives_at(T::one() + eps * tau, tau, eps, &mut b);
                b[0].ln()
            }
            BetaProfile::Limit(ev) => {
                (ev.coeff.h * ev.moll.smoothed_heaviside(tau) + ev.coeff.left_limit()).ln()
            }
        }
    }

    pub fn beta(&self, tau: T) -> T {
        match *self {
            BetaProfile::Eps(ev, eps) => ev.beta_eps(tau, eps),
            BetaProfile::Limit(ev) => ev.beta_zero(tau),
        }
    }

    /// `∫_θ^τ β`.
    pub fn integral(&self, tau: T, theta: T) -> T {
        self.log_b(tau) - self.log_b(theta)
    }

    fn k(&self) -> T {
        match *self {
            BetaProfile::Eps(ev, _) | BetaProfile::Limit(ev) => ev.k(),
        }
    }
}

/// `diag(1, e^{-I})` and `[[0, e^{-I}], [-e^{I}, 0]]` from `I = ∫_θ^τ β`.
fn diag_from<T: Real>(i: T) -> Mat2<T> {
    Mat2::diag(re(T::one()), re((-i).exp()))
}

fn tilde_from<T: Real>(i: T) -> Mat2<T> {
    Mat2::from_real(T::zero(), (-i).exp(), -i.exp(), T::zero())
}

/// `F(τ, θ) = diag(1, exp(-∫_θ^τ β_ε))`.
pub fn f_diag<T: Real>(ev: &RegularizedEval<T>, tau: T, theta: T, eps: T) -> Mat2<T> {
    diag_from(BetaProfile::Eps(ev, eps).integral(tau, theta))
}

/// The `ε → 0` limit `diag(1, (hΘ(θ) + b(1-0)) / (hΘ(τ) + b(1-0)))`.
pub fn f_diag_limit<T: Real>(ev: &RegularizedEval<T>, tau: T, theta: T) -> Mat2<T> {
    diag_from(BetaProfile::Limit(ev).integral(tau, theta))
}

/// `F̃(τ, θ) = [[0, e^{-∫_θ^τ β_ε}], [-e^{∫_θ^τ β_ε}, 0]]`, i.e. `J` conjugated
/// by the diagonal propagator; `det F̃ = 1`.
pub fn f_tilde<T: Real>(ev: &RegularizedEval<T>, tau: T, theta: T, eps: T) -> Mat2<T> {
    tilde_from(BetaProfile::Eps(ev, eps).integral(tau, theta))
}

/// The coefficients `G_k(τ_j, θ)` on a shared grid over `[θ, τ]`.
pub struct SeriesGrid<T> {
    pub grid: PanelGrid<T>,
    /// `F̃(r_j, θ)` at the grid nodes.
    pub tilde: Vec<Mat2<T>>,
    /// Certified bound `C ≥ sup ‖F̃‖` (with margin).
    pub c_bound: T,
}

impl<T: Real> SeriesGrid<T> {
    pub fn new(profile: &BetaProfile<'_, T>, tau: T, theta: T) -> Self {
        let k = profile.k();
        let len = (tau - theta).abs();
        let grid = PanelGrid::new(
            theta,
            tau,
            &[-k, T::zero(), k],
            len / T::from_usize_lossy(GRID_PANELS),
            GRID_ORDER,
        );
        let l0 = profile.log_b(theta);
        let tilde: Vec<Mat2<T>> = grid.nodes.iter().map(|&r| tilde_from(profile.log_b(r) - l0)).collect();
        let end = tilde_from(profile.log_b(tau) - l0);
        let sup = tilde.iter().chain(std::iter::once(&end)).fold(T::one(), |m, x| m.max(x.norm()));
        Self {
            grid,
            tilde,
            c_bound: sup * T::lit(TAIL_MARGIN),
        }
    }

    /// `G_1(τ), ..., G_n(τ)` at the right end of the grid.
    pub fn coefficients(&self, n: usize) -> Vec<Mat2<T>> {
        let mut out = Vec::with_capacity(n);
        let mut g: Vec<Mat2<T>> = vec![Mat2::identity(); self.tilde.len()];
        for _ in 0..n {
            let prod: Vec<Mat2<T>> = self.tilde.iter().zip(&g).map(|(a, b)| *a * *b).collect();
            let (run, end) = self.grid.cumulative(&prod);
            g = run;
            out.push(end);
        }
        out
    }
}

/// Tail `Σ_{k>n} x^k / k!` of the exponential series.
pub fn exp_tail<T: Real>(x: T, n: usize) -> T {
    let mut term = T::one();
    for k in 1..=n {
        term = term * x / T::from_usize_lossy(k);
    }
    let mut tail = T::zero();
    let mut k = n;
    loop {
        k += 1;
        term = term * x / T::from_usize_lossy(k);
        tail = tail + term;
        if term <= tail * T::epsilon() || k > n + 400 {
            return tail;
        }
    }
}

/// Smallest `k*` whose tail `Σ_{k>k*} x^k/k!` is below `tol`, if within the cap.
fn truncation_order<T: Real>(x: T, tol: T) -> Option<usize> {
    (0..=G_MAX_ORDER).find(|&n| exp_tail(x, n) < tol)
}

/// `G(τ, θ, Λ) = I + Σ_{k ≤ k*} Λ^k G_k` with the certified truncation order.
pub fn g_series<T: Real>(
    ev: &RegularizedEval<T>,
    tau: T,
    theta: T,
    lambda: T,
    eps: T,
    tol: T,
) -> Result<(Mat2<T>, usize)> {
    g_series_profile(&BetaProfile::Eps(ev, eps), tau, theta, lambda, tol).map(|(g, k, _)| (g, k))
}

/// As [`g_series`] for any profile; also returns the tail bound.
pub fn g_series_profile<T: Real>(
    profile: &BetaProfile<'_, T>,
    tau: T,
    theta: T,
    lambda: T,
    tol: T,
) -> Result<(Mat2<T>, usize, T)> {
    if tol < T::lit(100.0) * T::epsilon() {
        return Err(Error::Resolution(format!(
            "series tolerance {tol} is below what the quadrature grid resolves"
        )));
    }
    if lambda == T::zero() || tau == theta {
        return Ok((Mat2::identity(), 0, T::zero()));
    }
    let sg = SeriesGrid::new(profile, tau, theta);
    let x = sg.c_bound * lambda.abs() * (tau - theta).abs();
    let order = truncation_order(x, tol).ok_or_else(|| {
        Error::Truncation(format!(
            "CΛ|τ-θ| = {x} needs more than {G_MAX_ORDER} terms for tolerance {tol}"
        ))
    })?;
    let mut g = Mat2::identity();
    let mut pow = T::one();
    for gk in sg.coefficients(order) {
        pow = pow * lambda;
        g += gk.scale_re(pow);
    }
    Ok((g, order, exp_tail(x, order)))
}

#[derive(Clone, Debug, Serialize)]
pub struct SingPropagator<T> {
    #[serde(skip)]
    pub matrix: Mat2<T>,
    pub tau_from: T,
    pub tau_to: T,
    pub lambda: T,
    pub eps: T,
    /// Largest truncation order over the pieces.
    pub truncation_order: usize,
    /// Sum of the certified tails of all pieces.
    pub tail_bound: T,
    /// Number of sub-intervals composed by the flow property.
    pub pieces: usize,
}

/// `E_sing(τ, θ) = F(τ, θ) G(τ, θ)` for any profile. Long intervals are cut
/// into pieces whose series converge within [`G_MAX_ORDER`] terms.
pub fn e_sing_profile<T: Real>(
    profile: &BetaProfile<'_, T>,
    tau: T,
    theta: T,
    lambda: T,
    tol: T,
) -> Result<(Mat2<T>, usize, T, usize)> {
    if tau == theta {
        return Ok((Mat2::identity(), 0, T::zero(), 1));
    }
    let full = SeriesGrid::new(profile, tau, theta);
    let x = full.c_bound * lambda.abs() * (tau - theta).abs();
    let mut pieces = 1usize;
    // per-piece tails must add up to tol
    while truncation_order(x / T::from_usize_lossy(pieces), tol / T::from_usize_lossy(pieces)).is_none() {
        pieces *= 2;
        if pieces > 1 << 16 {
            return Err(Error::Truncation(format!("cannot split CΛ|τ-θ| = {x} into convergent pieces")));
        }
    }
    let piece_tol = tol / T::from_usize_lossy(pieces);
    let mut m = Mat2::identity();
    let (mut order, mut tail) = (0usize, T::zero());
    for i in 0..pieces {
        let a = theta + (tau - theta) * T::from_usize_lossy(i) / T::from_usize_lossy(pieces);
        let b = if i + 1 == pieces {
            tau
        } else {
            theta + (tau - theta) * T::from_usize_lossy(i + 1) / T::from_usize_lossy(pieces)
        };
        let (g, k, tl) = g_series_profile(profile, b, a, lambda, piece_tol)?;
        m = diag_from(profile.integral(b, a)) * g * m;
        order = order.max(k);
        tail = tail + tl;
    }
    Ok((m, order, tail, pieces))
}

pub fn e_sing<T: Real>(
    ev: &RegularizedEval<T>,
    tau: T,
    theta: T,
    lambda: T,
    eps: T,
    tol: T,
) -> Result<SingPropagator<T>> {
    if !(eps > T::zero()) {
        return Err(Error::Domain(format!("ε must be positive, got {eps}")));
    }
    let (matrix, truncation_order, tail_bound, pieces) =
        e_sing_profile(&BetaProfile::Eps(ev, eps), tau, theta, lambda, tol)?;
    Ok(SingPropagator {
        matrix,
        tau_from: theta,
        tau_to: tau,
        lambda,
        eps,
        truncation_order,
        tail_bound,
        pieces,
    })
}

/// The limiting transfer matrix `diag(1, H)`.
pub fn transfer_limit<T: Real>(coeff: &JumpCoefficient<T>) -> Mat2<T> {
    Mat2::diag(re(T::one()), re(coeff.big_h))
}
