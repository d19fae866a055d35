//! The mollifier `ψ` and the triangular shape function `Φ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive, GaussLegendre};
use crate::scalar::Real;

/// Highest derivative of `ψ` available in closed form.
pub const PSI_MAX_DERIVATIVE: usize = 7;

/// Highest moment `∫ s^j ψ(s) ds` precomputed.
pub const MAX_MOMENT: usize = 16;

/// Exponent of the polynomial bump `(1 - s²)^m`.
const POLY_BUMP_EXPONENT: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiKind {
    /// `C exp(-1/(1 - s²))` on `(-1, 1)`.
    SmoothBump,
    /// `C (1 - s²)^8` on `(-1, 1)`.
    PolynomialBump,
}

/// Polynomial with ascending `f64` coefficients.
#[derive(Clone, Debug, PartialEq)]
struct Poly(Vec<f64>);

impl Poly {
    fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    fn derivative(&self) -> Poly {
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * i as f64)
                .collect(),
        )
    }

    fn mul(&self, o: &Poly) -> Poly {
        if self.0.is_empty() || o.0.is_empty() {
            return Poly(vec![]);
        }
        let mut r = vec![0.0; self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                r[i + j] += a * b;
            }
        }
        Poly(r)
    }

    fn add(&self, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        Poly(
            (0..n)
                .map(|i| self.0.get(i).copied().unwrap_or(0.0) + o.0.get(i).copied().unwrap_or(0.0))
                .collect(),
        )
    }

    fn scale(&self, s: f64) -> Poly {
        Poly(self.0.iter().map(|c| c * s).collect())
    }
}

/// Numerator polynomials `p_k` with `d^k/dx^k exp(-1/(1-x²)) = p_k(x) (1-x²)^{-2k} exp(-1/(1-x²))`.
fn bump_derivative_polys(kmax: usize) -> Vec<Poly> {
    let u = Poly(vec![1.0, 0.0, -1.0]);
    let u2 = u.mul(&u);
    let t = Poly(vec![0.0, 1.0]);
    let mut out = vec![Poly(vec![1.0])];
    for k in 0..kmax {
        let p = &out[k];
        let next = t
            .mul(p)
            .scale(-2.0)
            .add(&u2.mul(&p.derivative()))
            .add(&t.mul(&u).mul(p).scale(4.0 * k as f64));
        out.push(next);
    }
    out
}

/// Derivatives of `(1 - x²)^m`.
fn poly_bump_derivatives(m: usize, kmax: usize) -> Vec<Poly> {
    let u = Poly(vec![1.0, 0.0, -1.0]);
    let mut base = Poly(vec![1.0]);
    for _ in 0..m {
        base = base.mul(&u);
    }
    let mut out = vec![base];
    for k in 0..kmax {
        let d = out[k].derivative();
        out.push(d);
    }
    out
}

/// The mollifier `ψ` (support `[-K, K]`) paired with the shape function
/// `Φ(t) = max(K' - |t|, 0)`.
#[derive(Clone, Debug)]
pub struct MollifierPair<T> {
    pub kind: PsiKind,
    pub k: T,
    pub k_prime: T,
    /// Normalisation constant of the reference bump on `[-1, 1]`.
    pub psi_norm: T,
    derivs: Vec<Poly>,
    moments: Vec<T>,
    c_psi_phi: T,
    rule: GaussLegendre<T>,
}

impl<T: Real> MollifierPair<T> {
    pub fn new(kind: PsiKind, k: T, k_prime: T) -> Result<Self> {
        if !(k > T::zero()) || !k.is_finite() {
            return Err(Error::InvalidMollifier(format!("K must be positive, got {k}")));
        }
        if !(k < k_prime) || !k_prime.is_finite() {
            return Err(Error::InvalidMollifier(format!(
                "need K < K' so that Φ stays positive on supp ψ (K={k}, K'={k_prime})"
            )));
        }
        let derivs = match kind {
            PsiKind::SmoothBump => bump_derivative_polys(PSI_MAX_DERIVATIVE),
            PsiKind::PolynomialBump => poly_bump_derivatives(POLY_BUMP_EXPONENT, PSI_MAX_DERIVATIVE),
        };
        let rule20 = GaussLegendre::<f64>::new(20);
        let raw = |x: f64| reference_unnormalised(kind, &derivs, 0, x);
        let half_mass = adaptive(&rule20, -1.0, 0.0, 1e-17, raw);
        let norm = 1.0 / (2.0 * half_mass);
        let kf = k.to_f64_lossy();
        let moments = (0..=MAX_MOMENT)
            .map(|j| {
                if j % 2 == 1 {
                    T::zero()
                } else {
                    let m = 2.0 * adaptive(&rule20, 0.0, 1.0, 1e-17, |x| x.powi(j as i32) * norm * raw(x));
                    T::lit(m * kf.powi(j as i32))
                }
            })
            .collect();
        let mut pair = Self {
            kind,
            k,
            k_prime,
            psi_norm: T::lit(norm),
            derivs,
            moments,
            c_psi_phi: T::zero(),
            rule: GaussLegendre::new(40),
        };
        pair.c_psi_phi = pair.certified_ratio_bound(0);
        Ok(pair)
    }

    /// Default pair: smooth bump with `K = 1`, triangle with `K' = 2`.
    pub fn standard() -> Self {
        Self::new(PsiKind::SmoothBump, T::one(), T::two()).expect("standard mollifier is admissible")
    }

    /// `ψ(s)`.
    pub fn psi(&self, s: T) -> T {
        self.psi_derivative(s, 0)
    }

    /// `ψ^{(k)}(s)` in closed form.
    pub fn psi_derivative(&self, s: T, order: usize) -> T {
        assert!(order <= PSI_MAX_DERIVATIVE, "ψ derivative order {order} unsupported");
        let x = (s / self.k).to_f64_lossy();
        let v = self.psi_norm.to_f64_lossy() * reference_unnormalised(self.kind, &self.derivs, order, x);
        T::lit(v) / self.k.powi(order as i32 + 1)
    }

    /// Fills `out[j] = ψ^{(j)}(s)` for `j < out.len()`, sharing the exponential.
    pub fn psi_derivatives(&self, s: T, out: &mut [T]) {
        let n = out.len();
        assert!(n <= PSI_MAX_DERIVATIVE + 1);
        let x = (s / self.k).to_f64_lossy();
        if x.abs() >= 1.0 {
            out.iter_mut().for_each(|v| *v = T::zero());
            return;
        }
        let norm = self.psi_norm.to_f64_lossy();
        let kf = self.k.to_f64_lossy();
        match self.kind {
            PsiKind::SmoothBump => {
                let u = 1.0 - x * x;
                let base = norm * (-1.0 / u).exp();
                let inv_u2 = 1.0 / (u * u);
                let mut scale = base / kf;
                for (j, v) in out.iter_mut().enumerate() {
                    *v = T::lit(self.derivs[j].eval(x) * scale);
                    scale *= inv_u2 / kf;
                }
            }
            PsiKind::PolynomialBump => {
                let mut scale = norm / kf;
                for (j, v) in out.iter_mut().enumerate() {
                    *v = T::lit(self.derivs[j].eval(x) * scale);
                    scale /= kf;
                }
            }
        }
    }

    /// `ψ_ε(t) = ε^{-1} ψ(t/ε)`.
    pub fn psi_eps(&self, t: T, eps: T) -> T {
        self.psi(t / eps) / eps
    }

    /// Smoothed Heaviside function `Θ(τ) = ∫_{-∞}^τ ψ`.
    pub fn smoothed_heaviside(&self, tau: T) -> T {
        if tau <= -self.k {
            return T::zero();
        }
        if tau >= self.k {
            return T::one();
        }
        if tau == T::zero() {
            return T::half();
        }
        if tau > T::zero() {
            return T::one() - self.smoothed_heaviside(-tau);
        }
        self.rule.composite(-self.k, tau, 4, |s| self.psi(s))
    }

    /// Shape function `Φ(t) = max(K' - |t|, 0)`.
    pub fn phi(&self, t: T) -> T {
        (self.k_prime - t.abs()).max(T::zero())
    }

    /// `Φ'(t)` away from the origin and the support edges.
    pub fn phi_derivative(&self, t: T) -> T {
        if t.abs() >= self.k_prime || t == T::zero() {
            T::zero()
        } else {
            -t.signum()
        }
    }

    /// `Φ_ε(t) = ε^{-1} Φ(t/ε)`.
    pub fn phi_eps(&self, t: T, eps: T) -> T {
        self.phi(t / eps) / eps
    }

    /// Even moments `∫ s^j ψ(s) ds`; odd moments vanish by symmetry.
    pub fn moment(&self, j: usize) -> T {
        self.moments[j]
    }

    /// Certified `c_ψΦ` with `ψ ≤ c_ψΦ Φ` on `supp ψ`.
    pub fn c_psi_phi(&self) -> T {
        self.c_psi_phi
    }

    /// Certified constant `c` with `|ψ^{(k)}| ≤ c Φ^{k+1}` on `supp ψ`:
    /// grid maximum of the ratio plus a Lipschitz correction for the gaps.
    pub fn certified_ratio_bound(&self, order: usize) -> T {
        let n = 4000usize;
        let kf = self.k.to_f64_lossy();
        let step = 2.0 * kf / n as f64;
        let mut best = 0.0f64;
        let mut lip = 0.0f64;
        let mut prev: Option<f64> = None;
        for i in 0..=n {
            let s = -kf + step * i as f64;
            let st = T::lit(s);
            let phi = self.phi(st).to_f64_lossy();
            let r = self.psi_derivative(st, order).to_f64_lossy().abs() / phi.powi(order as i32 + 1);
            best = best.max(r);
            if let Some(p) = prev {
                lip = lip.max((r - p).abs() / step);
            }
            prev = Some(r);
        }
        // twice the half-gap Lipschitz excess
        T::lit(best + lip * step)
    }
}

fn reference_unnormalised(kind: PsiKind, derivs: &[Poly], order: usize, x: f64) -> f64 {
    if x.abs() >= 1.0 {
        return 0.0;
    }
    let u = 1.0 - x * x;
    match kind {
        PsiKind::SmoothBump => {
            let p = derivs[order].eval(x);
            if p == 0.0 {
                return 0.0;
            }
            let log_mag = -1.0 / u - 2.0 * order as f64 * u.ln();
            p * log_mag.exp()
        }
        PsiKind::PolynomialBump => derivs[order].eval(x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson, independent of the Gauss machinery.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + h * i as f64);
        }
        s * h / 3.0
    }

    fn raw_bump(x: f64) -> f64 {
        if x.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - x * x)).exp()
        }
    }

    #[test]
    fn normalisation_constant_matches_simpson_oracle() {
        let m = MollifierPair::<f64>::standard();
        let mass = simpson(raw_bump, -1.0, 1.0, 200_000);
        assert!((m.psi_norm - 1.0 / mass).abs() < 1e-10);
        assert!((m.psi_norm - 2.25228).abs() < 1e-5);
        assert!((m.psi(0.0) - 0.82857).abs() < 1e-5);
    }

    #[test]
    fn psi_is_a_symmetric_probability_density() {
        for kind in [PsiKind::SmoothBump, PsiKind::PolynomialBump] {
            let m = MollifierPair::<f64>::new(kind, 0.8, 2.0).unwrap();
            let mass = simpson(|s| m.psi(s), -0.8, 0.8, 100_000);
            assert!((mass - 1.0).abs() < 1e-12, "{kind:?} {mass}");
            for i in 0..50 {
                let s = -1.0 + 0.04 * i as f64;
                assert_eq!(m.psi(s), m.psi(-s));
                assert!(m.psi(s) >= 0.0);
            }
            assert_eq!(m.psi(0.8), 0.0);
            assert_eq!(m.psi(-0.9), 0.0);
        }
    }

    #[test]
    fn derivatives_agree_with_finite_differences() {
        let m = MollifierPair::<f64>::standard();
        let h = 1e-5;
        for k in 0..5 {
            for &s in &[-0.7, -0.2, 0.1, 0.55, 0.8] {
                let fd = (m.psi_derivative(s + h, k) - m.psi_derivative(s - h, k)) / (2.0 * h);
                let exact = m.psi_derivative(s, k + 1);
                assert!((fd - exact).abs() < 1e-5 * (1.0 + exact.abs()), "k={k} s={s}: {fd} vs {exact}");
            }
        }
    }

    #[test]
    fn batched_derivatives_match_single_evaluations() {
        for kind in [PsiKind::SmoothBump, PsiKind::PolynomialBump] {
            let m = MollifierPair::<f64>::new(kind, 1.3, 2.0).unwrap();
            let mut out = [0.0; 6];
            for &s in &[-1.2, -0.4, 0.0, 0.9, 1.29] {
                m.psi_derivatives(s, &mut out);
                for (j, v) in out.iter().enumerate() {
                    let single = m.psi_derivative(s, j);
                    assert!((v - single).abs() <= 1e-12 * (1.0 + single.abs()), "{kind:?} j={j} s={s}");
                }
            }
        }
    }

    #[test]
    fn heaviside_properties() {
        let m = MollifierPair::<f64>::standard();
        assert_eq!(m.smoothed_heaviside(0.0), 0.5);
        assert_eq!(m.smoothed_heaviside(-1.0), 0.0);
        assert_eq!(m.smoothed_heaviside(1.0), 1.0);
        let mut prev = 0.0;
        for i in 0..=200 {
            let t = -1.2 + 0.012 * i as f64;
            let th = m.smoothed_heaviside(t);
            assert!((th + m.smoothed_heaviside(-t) - 1.0).abs() < 1e-12);
            assert!(th >= prev - 1e-15);
            prev = th;
            let oracle = simpson(|s| m.psi(s), -1.0, t.clamp(-1.0, 1.0), 20_000);
            assert!((th - oracle).abs() < 1e-10, "{t}");
        }
    }

    #[test]
    fn shape_function_admissibility() {
        let m = MollifierPair::<f64>::standard();
        let kp = m.k_prime;
        assert!((m.c_psi_phi() - 0.44293).abs() < 2e-3);
        for i in 1..400 {
            let t = i as f64 * kp / 400.0;
            assert_eq!(m.phi(t), m.phi(-t));
            // Φ² ≤ K'² (-Φ') on (0, K')
            assert!(m.phi(t).powi(2) <= kp * kp * (-m.phi_derivative(t)) + 1e-12);
            if t < m.k {
                assert!(m.psi(t) <= m.c_psi_phi() * m.phi(t));
            }
        }
        assert_eq!(m.phi(2.5), 0.0);
    }

    #[test]
    fn moments_of_the_bump() {
        let m = MollifierPair::<f64>::standard();
        assert!((m.moment(0) - 1.0).abs() < 1e-13);
        assert_eq!(m.moment(3), 0.0);
        let m2 = simpson(|s| s * s * m.psi(s), -1.0, 1.0, 100_000);
        assert!((m.moment(2) - m2).abs() < 1e-12);
    }

    #[test]
    fn rejects_inadmissible_supports() {
        assert!(MollifierPair::<f64>::new(PsiKind::SmoothBump, 2.0, 2.0).is_err());
        assert!(MollifierPair::<f64>::new(PsiKind::SmoothBump, -1.0, 2.0).is_err());
    }

    #[test]
    fn single_precision_instance() {
        let m = MollifierPair::<f32>::standard();
        assert!((m.psi(0.0) - 0.82857).abs() < 1e-5);
        assert!((m.smoothed_heaviside(0.3) + m.smoothed_heaviside(-0.3) - 1.0).abs() < 1e-6);
    }
}
