//! Coefficient scenarios as TOML (`key = value`) files and built-in presets.

use serde::{Deserialize, Serialize};

use crate::coefficients::{Branch, JumpCoefficient, MollifierPair, PsiKind, RegularizedEval, DEFAULT_QUAD_ORDER};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Names accepted by [`Scenario::preset`].
pub const PRESETS: [&str; 4] = ["default", "no-jump", "quadratic", "sloped"];

/// ```toml
/// name = "default"
/// k = 1.0
/// k_prime = 2.0
/// psi = "smooth_bump"
///
/// [left]
/// kind = "constant"
/// value = 0.5
///
/// [right]
/// kind = "polynomial"
/// coefficients = [1.0, 0.0, 0.25]
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    pub left: Branch<f64>,
    pub right: Branch<f64>,
    #[serde(default = "default_k")]
    pub k: f64,
    #[serde(default = "default_k_prime")]
    pub k_prime: f64,
    #[serde(default = "default_psi")]
    pub psi: PsiKind,
    #[serde(default = "default_quad")]
    pub quad_order: usize,
}

fn default_name() -> String {
    "custom".into()
}
fn default_k() -> f64 {
    1.0
}
fn default_k_prime() -> f64 {
    2.0
}
fn default_psi() -> PsiKind {
    PsiKind::SmoothBump
}
fn default_quad() -> usize {
    DEFAULT_QUAD_ORDER
}

impl Scenario {
    fn with_branches(name: &str, left: Branch<f64>, right: Branch<f64>) -> Self {
        Self {
            name: name.into(),
            left,
            right,
            k: default_k(),
            k_prime: default_k_prime(),
            psi: default_psi(),
            quad_order: default_quad(),
        }
    }

    /// `default`: ½ | 3/2. `no-jump`: b ≡ 1. `quadratic`: ½ | 1 + t²/4.
    /// `sloped`: 1 | 1 + t.
    pub fn preset(name: &str) -> Result<Self> {
        let c = Branch::constant;
        match name {
            "default" => Ok(Self::with_branches(name, c(0.5), c(1.5))),
            "no-jump" => Ok(Self::with_branches(name, c(1.0), c(1.0))),
            "quadratic" => Ok(Self::with_branches(name, c(0.5), Branch::polynomial(vec![1.0, 0.0, 0.25]))),
            "sloped" => Ok(Self::with_branches(name, c(1.0), Branch::polynomial(vec![1.0, 1.0]))),
            _ => Err(Error::Config(format!("unknown scenario {name:?}; presets are {PRESETS:?}"))),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    /// A preset name or a path to a TOML file.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if PRESETS.contains(&name_or_path) {
            return Self::preset(name_or_path);
        }
        let text = std::fs::read_to_string(name_or_path)
            .map_err(|e| Error::Config(format!("cannot read scenario {name_or_path:?}: {e}")))?;
        Self::from_toml(&text)
    }

    fn branch<T: Real>(b: &Branch<f64>) -> Branch<T> {
        match b {
            Branch::Constant { value } => Branch::constant(T::lit(*value)),
            Branch::Polynomial { coefficients } => Branch::polynomial(coefficients.iter().map(|&x| T::lit(x)).collect()),
        }
    }

    pub fn evaluator<T: Real>(&self) -> Result<RegularizedEval<T>> {
        let coeff = JumpCoefficient::new(Self::branch(&self.left), Self::branch(&self.right))?;
        let moll = MollifierPair::new(self.psi, T::lit(self.k), T::lit(self.k_prime))?;
        RegularizedEval::new(coeff, moll, self.quad_order)
    }
}
