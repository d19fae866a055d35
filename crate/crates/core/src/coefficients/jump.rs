use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::mollifier::MAX_MOMENT;

/// Highest derivative order served by [`JumpCoefficient::eval`].
pub const BRANCH_MAX_ORDER: usize = 6;

/// Interval on which positivity and derivative bounds are certified. It
/// covers every argument `1 + ε(τ - s)` reached by the regularisation for
/// `ε ≤ 1` and supports up to `K' + 1 ≤ 4`.
pub const WORKING_INTERVAL: (f64, f64) = (-4.0, 6.0);

/// A smooth branch of the coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Branch<T> {
    Constant { value: T },
    /// Ascending coefficients `c0 + c1 t + c2 t² + ...`.
    Polynomial { coefficients: Vec<T> },
}

impl<T: Real> Branch<T> {
    pub fn constant(value: T) -> Self {
        Branch::Constant { value }
    }

    pub fn polynomial(coefficients: Vec<T>) -> Self {
        Branch::Polynomial { coefficients }
    }

    pub fn degree(&self) -> usize {
        match self {
            Branch::Constant { .. } => 0,
            Branch::Polynomial { coefficients } => coefficients.len().saturating_sub(1),
        }
    }

    /// `k`-th derivative at `t`.
    pub fn eval(&self, t: T, k: usize) -> T {
        match self {
            Branch::Constant { value } => {
                if k == 0 {
                    *value
                } else {
                    T::zero()
                }
            }
            Branch::Polynomial { coefficients } => {
                let mut acc = T::zero();
                for (i, c) in coefficients.iter().enumerate().skip(k).rev() {
                    // falling factorial i (i-1) ... (i-k+1)
                    let ff = (0..k).fold(T::one(), |p, j| p * T::from_usize_lossy(i - j));
                    acc = acc * t + *c * ff;
                }
                acc
            }
        }
    }

    /// Crude but rigorous bound of `|b^{(k)}|` on `[lo, hi]`.
    fn derivative_majorant(&self, k: usize, lo: T, hi: T) -> T {
        let r = lo.abs().max(hi.abs()).max(T::one());
        match self {
            Branch::Constant { value } => {
                if k == 0 {
                    value.abs()
                } else {
                    T::zero()
                }
            }
            Branch::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .skip(k)
                .map(|(i, c)| {
                    let ff = (0..k).fold(T::one(), |p, j| p * T::from_usize_lossy(i - j));
                    c.abs() * ff * r.powi((i - k) as i32)
                })
                .fold(T::zero(), |a, b| a + b),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Branch::Constant { value } if !value.is_finite() => {
                Err(Error::InvalidCoefficient("non-finite constant branch".into()))
            }
            Branch::Polynomial { coefficients } if coefficients.is_empty() => {
                Err(Error::InvalidCoefficient("polynomial branch without coefficients".into()))
            }
            Branch::Polynomial { coefficients } if coefficients.len() > MAX_MOMENT + 1 => Err(
                Error::InvalidCoefficient(format!("polynomial degree above {MAX_MOMENT} unsupported")),
            ),
            Branch::Polynomial { coefficients } if coefficients.iter().any(|c| !c.is_finite()) => {
                Err(Error::InvalidCoefficient("non-finite polynomial coefficient".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Piecewise smooth coefficient `b` with a single jump at `t = 1`.
#[derive(Clone, Debug)]
pub struct JumpCoefficient<T> {
    pub left: Branch<T>,
    pub right: Branch<T>,
    /// Certified positive lower bound on the working interval.
    pub b0: T,
    /// Jump height `b(1+0) - b(1-0)`.
    pub h: T,
    /// Ratio `b(1-0) / b(1+0)`.
    pub big_h: T,
}

impl<T: Real> JumpCoefficient<T> {
    pub fn new(left: Branch<T>, right: Branch<T>) -> Result<Self> {
        left.validate()?;
        right.validate()?;
        let (lo, hi) = (T::lit(WORKING_INTERVAL.0), T::lit(WORKING_INTERVAL.1));
        let b0 = certified_min(&left, lo, T::one()).min(certified_min(&right, T::one(), hi));
        if !(b0 > T::zero()) {
            return Err(Error::InvalidCoefficient(format!(
                "coefficient must stay positive on [{lo}, {hi}] (certified lower bound {b0})"
            )));
        }
        let bl = left.eval(T::one(), 0);
        let br = right.eval(T::one(), 0);
        Ok(Self {
            left,
            right,
            b0,
            h: br - bl,
            big_h: bl / br,
        })
    }

    /// `b = 1/2` before the jump and `3/2` after it, giving `H = 1/3`.
    pub fn standard() -> Self {
        Self::new(Branch::constant(T::half()), Branch::constant(T::lit(1.5))).expect("positive")
    }

    /// Constant coefficient: no jump, `H = 1`.
    pub fn constant(value: T) -> Result<Self> {
        Self::new(Branch::constant(value), Branch::constant(value))
    }

    pub fn left_limit(&self) -> T {
        self.left.eval(T::one(), 0)
    }

    pub fn right_limit(&self) -> T {
        self.right.eval(T::one(), 0)
    }

    pub fn branch(&self, side: Side) -> &Branch<T> {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    /// `b^{(k)}(t)`; at `t = 1` exactly the right branch is used.
    pub fn eval(&self, t: T, k: usize) -> Result<T> {
        let side = if t < T::one() { Side::Left } else { Side::Right };
        self.eval_side(t, k, side)
    }

    /// `b^{(k)}(t)` taken from an explicit branch.
    pub fn eval_side(&self, t: T, k: usize, side: Side) -> Result<T> {
        if k > BRANCH_MAX_ORDER {
            return Err(Error::UnsupportedOrder {
                order: k,
                max: BRANCH_MAX_ORDER,
            });
        }
        Ok(self.branch(side).eval(t, k))
    }

    /// Certified bound on `sup |b'|` over both branches of the working interval.
    pub fn sup_derivative(&self) -> T {
        let (lo, hi) = (T::lit(WORKING_INTERVAL.0), T::lit(WORKING_INTERVAL.1));
        certified_max_abs(&self.left, 1, lo, T::one()).max(certified_max_abs(&self.right, 1, T::one(), hi))
    }

    /// True when both branches are constant.
    pub fn is_piecewise_constant(&self) -> bool {
        matches!(self.left, Branch::Constant { .. }) && matches!(self.right, Branch::Constant { .. })
    }
}

const CERT_SAMPLES: usize = 4000;

fn certified_min<T: Real>(b: &Branch<T>, lo: T, hi: T) -> T {
    if let Branch::Constant { value } = b {
        return *value;
    }
    let step = (hi - lo) / T::from_usize_lossy(CERT_SAMPLES);
    let min = (0..=CERT_SAMPLES)
        .map(|i| b.eval(lo + step * T::from_usize_lossy(i), 0))
        .fold(T::infinity(), T::min);
    min - b.derivative_majorant(1, lo, hi) * step * T::half()
}

fn certified_max_abs<T: Real>(b: &Branch<T>, k: usize, lo: T, hi: T) -> T {
    if let Branch::Constant { .. } = b {
        return if k == 0 { b.eval(lo, 0).abs() } else { T::zero() };
    }
    let step = (hi - lo) / T::from_usize_lossy(CERT_SAMPLES);
    let max = (0..=CERT_SAMPLES)
        .map(|i| b.eval(lo + step * T::from_usize_lossy(i), k).abs())
        .fold(T::zero(), T::max);
    max + b.derivative_majorant(k + 1, lo, hi) * step * T::half()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_coefficient_constants() {
        let b = JumpCoefficient::<f64>::standard();
        assert_eq!(b.h, 1.0);
        assert!((b.big_h - 1.0 / 3.0).abs() < 1e-16);
        assert_eq!(b.b0, 0.5);
        assert_eq!(b.eval(0.3, 0).unwrap(), 0.5);
        assert_eq!(b.eval(1.7, 1).unwrap(), 0.0);
        assert_eq!(b.eval(1.0, 0).unwrap(), 1.5);
        assert_eq!(b.eval_side(1.0, 0, Side::Left).unwrap(), 0.5);
    }

    #[test]
    fn polynomial_branch_derivatives() {
        let b = JumpCoefficient::new(
            Branch::constant(0.5f64),
            Branch::polynomial(vec![1.0, 0.0, 0.25]),
        )
        .unwrap();
        assert!((b.eval(1.5, 1).unwrap() - 0.75).abs() < 1e-15);
        assert!((b.eval(1.5, 2).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(b.eval(1.5, 3).unwrap(), 0.0);
        assert!((b.h - 0.75).abs() < 1e-15);
        // sup |b'| on [1, 6] is 3
        let s = b.sup_derivative();
        assert!((3.0..3.01).contains(&s), "{s}");
    }

    #[test]
    fn order_limit_is_enforced() {
        let b = JumpCoefficient::<f64>::standard();
        assert!(matches!(
            b.eval(0.2, BRANCH_MAX_ORDER + 1),
            Err(Error::UnsupportedOrder { .. })
        ));
    }

    #[test]
    fn nonpositive_coefficients_are_rejected() {
        assert!(JumpCoefficient::new(Branch::constant(0.5), Branch::constant(-1.0)).is_err());
        // 1 - t/2 turns negative before t = 6
        assert!(JumpCoefficient::new(Branch::constant(1.0), Branch::polynomial(vec![1.0, -0.5])).is_err());
    }

    #[test]
    fn certified_lower_bound_is_below_the_true_minimum() {
        let b = JumpCoefficient::new(
            Branch::polynomial(vec![1.0, 0.0, 0.1]),
            Branch::constant(2.0),
        )
        .unwrap();
        assert!(b.b0 <= 1.0 && b.b0 > 0.99);
    }
}
