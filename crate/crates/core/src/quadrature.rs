//! Gauss–Legendre rules, composite and adaptive integration, and a
//! panel grid that supports cumulative (running) integrals at every node.

use std::ops::Add;

use num_complex::Complex;

use crate::linalg::Mat2;
use crate::scalar::Real;

/// Nodes and weights of an n-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

impl<T: Real> GaussLegendre<T> {
    /// Builds the rule by Newton iteration on `P_n` from Chebyshev guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0f64; n];
        let mut weights = vec![0.0f64; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self {
            nodes: nodes.into_iter().map(T::lit).collect(),
            weights: weights.into_iter().map(T::lit).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over `[a, b]` with this rule.
    pub fn integrate<F: FnMut(T) -> T>(&self, a: T, b: T, mut f: F) -> T {
        let half = (b - a) * T::half();
        let mid = (a + b) * T::half();
        let mut s = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s = s + *w * f(mid + half * *x);
        }
        s * half
    }

    /// Integrates over `[a, b]` split into `panels` equal pieces.
    pub fn composite<F: FnMut(T) -> T>(&self, a: T, b: T, panels: usize, mut f: F) -> T {
        let p = panels.max(1);
        let h = (b - a) / T::from_usize_lossy(p);
        (0..p)
            .map(|i| {
                let lo = a + h * T::from_usize_lossy(i);
                self.integrate(lo, lo + h, &mut f)
            })
            .fold(T::zero(), |s, v| s + v)
    }
}

/// Adaptive bisection on top of a Gauss–Legendre rule: a panel is accepted
/// once the coarse and the two-halves estimates agree to `tol` (or to a few
/// ulps of the total, whichever is larger).
pub fn adaptive<T: Real, F: FnMut(T) -> T>(rule: &GaussLegendre<T>, a: T, b: T, tol: T, mut f: F) -> T {
    #[allow(clippy::too_many_arguments)]
    fn rec<T: Real, F: FnMut(T) -> T>(
        rule: &GaussLegendre<T>,
        a: T,
        b: T,
        whole: T,
        tol: T,
        floor: T,
        depth: usize,
        f: &mut F,
    ) -> T {
        let m = (a + b) * T::half();
        let left = rule.integrate(a, m, &mut *f);
        let right = rule.integrate(m, b, &mut *f);
        let both = left + right;
        if depth == 0 || (both - whole).abs() <= tol.max(floor) {
            return both;
        }
        rec(rule, a, m, left, tol * T::half(), floor, depth - 1, f)
            + rec(rule, m, b, right, tol * T::half(), floor, depth - 1, f)
    }
    if a == b {
        return T::zero();
    }
    let whole = rule.integrate(a, b, &mut f);
    // never ask for more than the working precision can resolve
    let floor = T::lit(16.0) * T::epsilon() * whole.abs();
    rec(rule, a, b, whole, tol, floor, 40, &mut f)
}

/// Values that can be integrated node-wise: scalars, complex numbers and matrices.
pub trait Integrand<T: Real>: Copy + Add<Output = Self> {
    fn zero() -> Self;
    fn scaled(&self, s: T) -> Self;
}

impl<T: Real> Integrand<T> for T {
    fn zero() -> Self {
        T::zero()
    }
    fn scaled(&self, s: T) -> Self {
        *self * s
    }
}

impl<T: Real> Integrand<T> for Complex<T> {
    fn zero() -> Self {
        Complex::new(T::zero(), T::zero())
    }
    fn scaled(&self, s: T) -> Self {
        self.scale(s)
    }
}

impl<T: Real> Integrand<T> for Mat2<T> {
    fn zero() -> Self {
        Mat2::zero()
    }
    fn scaled(&self, s: T) -> Self {
        self.scale_re(s)
    }
}

/// Composite Gauss grid over `[a, b]` (either orientation) whose panels
/// respect a set of breakpoints. Besides plain integrals it produces running
/// integrals `∫_a^{x_j} f` at every node through the spectral integration
/// matrix of the reference rule, which is what Picard/Peano–Baker
/// iterations need.
#[derive(Clone, Debug)]
pub struct PanelGrid<T> {
    pub a: T,
    pub b: T,
    /// Signed panel edges from `a` to `b`.
    pub edges: Vec<T>,
    pub nodes: Vec<T>,
    rule: GaussLegendre<T>,
    /// `ref_int[j][m] = ∫_{-1}^{x_j} l_m(x) dx` for the Lagrange basis `l_m`.
    ref_int: Vec<Vec<T>>,
}

fn lagrange_basis(nodes: &[f64], m: usize, x: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != m)
        .fold(1.0, |p, (_, xk)| p * (x - xk) / (nodes[m] - xk))
}

impl<T: Real> PanelGrid<T> {
    /// Builds the grid. `breakpoints` strictly inside `(a, b)` become panel
    /// edges; every resulting segment is subdivided so that no panel is wider
    /// than `max_width`.
    pub fn new(a: T, b: T, breakpoints: &[T], max_width: T, order: usize) -> Self {
        let forward = b >= a;
        let (lo, hi) = if forward { (a, b) } else { (b, a) };
        let mut cuts: Vec<T> = breakpoints
            .iter()
            .copied()
            .filter(|&x| x > lo && x < hi)
            .collect();
        cuts.push(lo);
        cuts.push(hi);
        cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
        cuts.dedup();
        let mut edges = vec![cuts[0]];
        for w in cuts.windows(2) {
            let len = w[1] - w[0];
            let pieces = if max_width > T::zero() {
                (len / max_width).ceil().to_usize().unwrap_or(1).max(1)
            } else {
                1
            };
            for i in 1..=pieces {
                let x = if i == pieces {
                    w[1]
                } else {
                    w[0] + len * T::from_usize_lossy(i) / T::from_usize_lossy(pieces)
                };
                edges.push(x);
            }
        }
        if !forward {
            edges.reverse();
        }
        let rule = GaussLegendre::<T>::new(order);
        let ref_nodes: Vec<f64> = GaussLegendre::<f64>::new(order).nodes;
        let sub = GaussLegendre::<f64>::new(order);
        let ref_int = ref_nodes
            .iter()
            .map(|&xj| {
                (0..order)
                    .map(|m| T::lit(sub.integrate(-1.0, xj, |y| lagrange_basis(&ref_nodes, m, y))))
                    .collect()
            })
            .collect();
        let mut nodes = Vec::with_capacity((edges.len() - 1) * order);
        for w in edges.windows(2) {
            let half = (w[1] - w[0]) * T::half();
            let mid = (w[0] + w[1]) * T::half();
            nodes.extend(rule.nodes.iter().map(|&x| mid + half * x));
        }
        Self {
            a,
            b,
            edges,
            nodes,
            rule,
            ref_int,
        }
    }

    pub fn order(&self) -> usize {
        self.rule.len()
    }

    pub fn panels(&self) -> usize {
        self.edges.len() - 1
    }

    /// `∫_a^b f` from values at the nodes.
    pub fn integrate<V: Integrand<T>>(&self, values: &[V]) -> V {
        let n = self.order();
        let mut total = V::zero();
        for (p, w) in self.edges.windows(2).enumerate() {
            let half = (w[1] - w[0]) * T::half();
            let mut s = V::zero();
            for m in 0..n {
                s = s + values[p * n + m].scaled(self.rule.weights[m]);
            }
            total = total + s.scaled(half);
        }
        total
    }

    /// Running integrals `∫_a^{x_j} f` at every node plus the total `∫_a^b f`.
    pub fn cumulative<V: Integrand<T>>(&self, values: &[V]) -> (Vec<V>, V) {
        let n = self.order();
        let mut out = Vec::with_capacity(values.len());
        let mut offset = V::zero();
        for (p, w) in self.edges.windows(2).enumerate() {
            let half = (w[1] - w[0]) * T::half();
            let vals = &values[p * n..(p + 1) * n];
            for j in 0..n {
                let mut s = V::zero();
                for (m, v) in vals.iter().enumerate() {
                    s = s + v.scaled(self.ref_int[j][m]);
                }
                out.push(offset + s.scaled(half));
            }
            let mut full = V::zero();
            for (m, v) in vals.iter().enumerate() {
                full = full + v.scaled(self.rule.weights[m]);
            }
            offset = offset + full.scaled(half);
        }
        (out, offset)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let r = GaussLegendre::<f64>::new(5);
        // degree 9 is the highest exact degree
        let v = r.integrate(0.0, 2.0, |x| x.powi(9));
        assert!((v - 2f64.powi(10) / 10.0).abs() < 1e-11);
        let s: f64 = r.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn forty_point_rule_weights_sum_to_two() {
        let r = GaussLegendre::<f64>::new(40);
        let s: f64 = r.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-13);
        assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn adaptive_handles_kinks() {
        let r = GaussLegendre::<f64>::new(8);
        let v = adaptive(&r, -1.0, 2.0, 1e-13, |x: f64| x.abs());
        assert!((v - 2.5).abs() < 1e-11);
    }

    #[test]
    fn cumulative_matches_antiderivative() {
        let g = PanelGrid::<f64>::new(0.0, 3.0, &[1.0], 0.5, 12);
        let vals: Vec<f64> = g.nodes.iter().map(|x| x.cos()).collect();
        let (cum, total) = g.cumulative(&vals);
        for (x, c) in g.nodes.iter().zip(&cum) {
            assert!((c - x.sin()).abs() < 1e-13, "{x}");
        }
        assert!((total - 3f64.sin()).abs() < 1e-13);
        assert!((g.integrate(&vals) - total).abs() < 1e-15);
    }

    #[test]
    fn reversed_grid_gives_signed_integrals() {
        let g = PanelGrid::<f64>::new(2.0, 0.0, &[], 0.4, 10);
        let vals: Vec<f64> = g.nodes.iter().map(|x| x * x).collect();
        let (cum, total) = g.cumulative(&vals);
        assert!((total + 8.0 / 3.0).abs() < 1e-13);
        for (x, c) in g.nodes.iter().zip(&cum) {
            assert!((c - (x.powi(3) - 8.0) / 3.0).abs() < 1e-13);
        }
    }
}
