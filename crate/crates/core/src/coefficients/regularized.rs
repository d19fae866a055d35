use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::scalar::Real;

use super::jump::{Branch, JumpCoefficient, Side};
use super::mollifier::{MollifierPair, MAX_MOMENT, PSI_MAX_DERIVATIVE};

/// Highest derivative order of `b_ε` served by [`RegularizedEval`].
pub const REG_MAX_ORDER: usize = PSI_MAX_DERIVATIVE;

/// Default Gauss nodes per smooth panel of the convolution.
pub const DEFAULT_QUAD_ORDER: usize = 40;

/// Evaluator for the regularised coefficient `b_ε = b * ψ_ε` and everything
/// derived from it. Immutable after construction.
#[derive(Clone, Debug)]
pub struct RegularizedEval<T> {
    pub coeff: JumpCoefficient<T>,
    pub moll: MollifierPair<T>,
    pub quad_order: usize,
    rule: GaussLegendre<T>,
}

impl<T: Real> RegularizedEval<T> {
    pub fn new(coeff: JumpCoefficient<T>, moll: MollifierPair<T>, quad_order: usize) -> Result<Self> {
        if !(4..=200).contains(&quad_order) {
            return Err(Error::Config(format!("quad_order must lie in [4, 200], got {quad_order}")));
        }
        Ok(Self {
            coeff,
            moll,
            quad_order,
            rule: GaussLegendre::new(quad_order),
        })
    }

    /// Default coefficient with the default mollifier pair.
    pub fn standard() -> Self {
        Self::with_coeff(JumpCoefficient::standard())
    }

    pub fn with_coeff(coeff: JumpCoefficient<T>) -> Self {
        Self::new(coeff, MollifierPair::standard(), DEFAULT_QUAD_ORDER).expect("default order is valid")
    }

    /// `ψ` support half-width.
    pub fn k(&self) -> T {
        self.moll.k
    }

    /// Fills `out[j] = b_ε^{(j)}(t)`.
    pub fn derivatives(&self, t: T, eps: T, out: &mut [T]) {
        self.derivatives_at(t, (t - T::one()) / eps, eps, out)
    }

    /// Same as [`RegularizedEval::derivatives`] with the singular variable
    /// `τ = (t - 1)/ε` supplied by the caller to avoid cancellation.
    pub fn derivatives_at(&self, t: T, tau: T, eps: T, out: &mut [T]) {
        assert!(out.len() <= REG_MAX_ORDER + 1, "derivative order above {REG_MAX_ORDER}");
        let k = self.moll.k;
        if tau >= k {
            moment_expansion(&self.coeff.right, &self.moll, t, eps, out);
        } else if tau <= -k {
            moment_expansion(&self.coeff.left, &self.moll, t, eps, out);
        } else if self.coeff.is_piecewise_constant() {
            self.constant_jump(tau, eps, out);
        } else {
            self.split_quadrature(t, tau, eps, out);
        }
    }

    /// Closed form for piecewise constant `b`: `b_ε = b(1-0) + hΘ(τ)` and
    /// `b_ε^{(j)} = h ε^{-j} ψ^{(j-1)}(τ)`.
    fn constant_jump(&self, tau: T, eps: T, out: &mut [T]) {
        let h = self.coeff.h;
        let n = out.len();
        out[0] = self.coeff.left_limit() + h * self.moll.smoothed_heaviside(tau);
        if n > 1 {
            let mut psi = [T::zero(); PSI_MAX_DERIVATIVE + 1];
            self.moll.psi_derivatives(tau, &mut psi[..n - 1]);
            let inv = T::one() / eps;
            let mut scale = h * inv;
            for j in 1..n {
                out[j] = scale * psi[j - 1];
                scale = scale * inv;
            }
        }
    }

    /// `ε^{-j} ∫ b(t - εs) ψ^{(j)}(s) ds` split at the jump preimage `s = τ`.
    fn split_quadrature(&self, t: T, tau: T, eps: T, out: &mut [T]) {
        let n = out.len();
        out.iter_mut().for_each(|v| *v = T::zero());
        let k = self.moll.k;
        let mut psi = [T::zero(); PSI_MAX_DERIVATIVE + 1];
        let marks = [-k * T::half(), T::zero(), k * T::half()];
        // s < τ maps to t - εs > 1
        for (lo, hi, side) in [(-k, tau, Side::Right), (tau, k, Side::Left)] {
            let branch = self.coeff.branch(side);
            let mut cuts = vec![lo];
            cuts.extend(marks.iter().copied().filter(|&m| m > lo && m < hi));
            cuts.push(hi);
            for w in cuts.windows(2) {
                let half = (w[1] - w[0]) * T::half();
                let mid = (w[0] + w[1]) * T::half();
                for (x, wt) in self.rule.nodes.iter().zip(&self.rule.weights) {
                    let s = mid + half * *x;
                    self.moll.psi_derivatives(s, &mut psi[..n]);
                    let f = branch.eval(t - eps * s, 0) * *wt * half;
                    for j in 0..n {
                        out[j] = out[j] + f * psi[j];
                    }
                }
            }
        }
        let inv = T::one() / eps;
        let mut scale = T::one();
        for v in out.iter_mut() {
            *v = *v * scale;
            scale = scale * inv;
        }
    }

    /// `b_ε^{(k)}(t)`.
    pub fn mollified_coeff(&self, t: T, eps: T, k: usize) -> Result<T> {
        check_eps(eps)?;
        if k > REG_MAX_ORDER {
            return Err(Error::UnsupportedOrder {
                order: k,
                max: REG_MAX_ORDER,
            });
        }
        let mut out = [T::zero(); REG_MAX_ORDER + 1];
        self.derivatives(t, eps, &mut out[..=k]);
        Ok(out[k])
    }

    /// `b_ε(t)`.
    pub fn b_eps(&self, t: T, eps: T) -> T {
        let mut out = [T::zero(); 1];
        self.derivatives(t, eps, &mut out);
        out[0]
    }

    /// `𝔡_ε = b_ε'/b_ε` and its `t`-derivative.
    pub fn dissipation_coeff(&self, t: T, eps: T) -> Result<(T, T)> {
        check_eps(eps)?;
        let mut d = [T::zero(); 2];
        self.dissipation_derivatives(t, eps, &mut d);
        Ok((d[0], d[1]))
    }

    /// Fills `out[k] = ∂_t^k 𝔡_ε(t)` through the Leibniz recursion on
    /// `b_ε' = 𝔡_ε b_ε`.
    pub fn dissipation_derivatives(&self, t: T, eps: T, out: &mut [T]) {
        let mut b = [T::zero(); REG_MAX_ORDER + 1];
        let n = out.len();
        assert!(n <= REG_MAX_ORDER, "dissipation order above {}", REG_MAX_ORDER - 1);
        self.derivatives(t, eps, &mut b[..=n]);
        leibniz_quotient(&b[..=n], out);
    }

    /// `β_ε(τ) = ε 𝔡_ε(1 + ετ)`.
    pub fn beta_eps(&self, tau: T, eps: T) -> T {
        let mut b = [T::zero(); 2];
        self.derivatives_at(T::one() + eps * tau, tau, eps, &mut b);
        eps * b[1] / b[0]
    }

    /// `∫_θ^τ β_ε`. Since `β_ε(τ) = ∂_τ log b_ε(1 + ετ)` this is a log ratio.
    pub fn beta_integral(&self, tau: T, theta: T, eps: T) -> T {
        let mut a = [T::zero(); 1];
        let mut b = [T::zero(); 1];
        self.derivatives_at(T::one() + eps * tau, tau, eps, &mut a);
        self.derivatives_at(T::one() + eps * theta, theta, eps, &mut b);
        (a[0] / b[0]).ln()
    }

    /// Limit profile `β₀(τ) = hψ(τ) / (hΘ(τ) + b(1-0))`.
    pub fn beta_zero(&self, tau: T) -> T {
        beta_zero(&self.coeff, &self.moll, tau)
    }

    /// `Θ(τ)`.
    pub fn smoothed_heaviside(&self, tau: T) -> T {
        self.moll.smoothed_heaviside(tau)
    }
}

/// `β₀(τ) = hψ(τ) / (hΘ(τ) + b(1-0))`; zero outside `[-K, K]`.
pub fn beta_zero<T: Real>(coeff: &JumpCoefficient<T>, moll: &MollifierPair<T>, tau: T) -> T {
    if tau.abs() >= moll.k {
        return T::zero();
    }
    coeff.h * moll.psi(tau) / (coeff.h * moll.smoothed_heaviside(tau) + coeff.left_limit())
}

/// `out[k]` for `k < out.len()` from `b[0..=out.len()]`:
/// `d^{(k)} = (b^{(k+1)} - Σ_{j<k} C(k,j) d^{(j)} b^{(k-j)}) / b`.
pub(crate) fn leibniz_quotient<T: Real>(b: &[T], out: &mut [T]) {
    for k in 0..out.len() {
        let mut acc = b[k + 1];
        let mut binom = T::one();
        for j in 0..k {
            acc = acc - binom * out[j] * b[k - j];
            binom = binom * T::from_usize_lossy(k - j) / T::from_usize_lossy(j + 1);
        }
        out[k] = acc / b[0];
    }
}

/// Exact for polynomial branches of degree at most [`MAX_MOMENT`]:
/// `b_ε^{(j)}(t) = Σ_{m even} b^{(j+m)}(t) ε^m μ_m / m!`.
fn moment_expansion<T: Real>(branch: &Branch<T>, moll: &MollifierPair<T>, t: T, eps: T, out: &mut [T]) {
    let deg = branch.degree();
    for (j, v) in out.iter_mut().enumerate() {
        let mut acc = branch.eval(t, j);
        let mut m = 2;
        let mut fact = T::two();
        while j + m <= deg && m <= MAX_MOMENT {
            acc = acc + branch.eval(t, j + m) * eps.powi(m as i32) * moll.moment(m) / fact;
            fact = fact * T::from_usize_lossy((m + 1) * (m + 2));
            m += 2;
        }
        *v = acc;
    }
}

fn check_eps<T: Real>(eps: T) -> Result<()> {
    if eps > T::zero() && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("ε must be positive, got {eps}")))
    }
}
