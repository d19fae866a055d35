//! Wave-packet experiment on a periodic grid: every active Fourier mode is
//! carried by its own 2×2 propagator and the field is resynthesised by FFT.

use std::str::FromStr;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::{FftNum, FftPlanner};
use serde::Serialize;

use crate::assembly::{full_propagator, limit_propagator};
use crate::coefficients::RegularizedEval;
use crate::error::{Error, Result};
use crate::hyperbolic::e_hyp_limit;
use crate::integrator::IntegratorConfig;
use crate::linalg::{c, Mat2};
use crate::oracle::direct_propagator;
use crate::scalar::Real;
use crate::zones::{choose_zone_constant, ZoneConstant};

/// Scalars usable by the packet code.
pub trait FieldScalar: Real + FftNum {}
impl<T: Real + FftNum> FieldScalar for T {}

/// Largest measurement window half-width.
const MAX_WINDOW: f64 = 1.0;
/// Smallest admissible window half-width.
const MIN_WINDOW: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PacketSpec<T> {
    /// Carrier `ξ0`; modes sit around `ξ0/δ`.
    pub xi0: T,
    pub delta: T,
    /// Half-width of the smooth bump `χ̂`, in frequency.
    pub chi_half_width: T,
    pub x_center: T,
    pub domain_length: T,
    pub grid_size: usize,
}

impl<T: Real> Default for PacketSpec<T> {
    fn default() -> Self {
        Self {
            xi0: T::one(),
            delta: T::lit(1.0 / 16.0),
            chi_half_width: T::lit(8.0),
            x_center: T::lit(-1.5),
            domain_length: T::lit(8.0),
            grid_size: 4096,
        }
    }
}

impl<T: Real> PacketSpec<T> {
    pub fn carrier(&self) -> T {
        self.xi0 / self.delta
    }

    /// Spec with `χ̂` kept at half the carrier, the widest window that stays
    /// clear of the origin with margin.
    pub fn with_delta(delta: T) -> Self {
        let mut s = Self { delta, ..Self::default() };
        s.chi_half_width = s.carrier() * T::half();
        s
    }

    pub fn validate(&self) -> Result<()> {
        if !self.grid_size.is_power_of_two() || self.grid_size < 16 {
            return Err(Error::Packet(format!("grid size {} is not a power of two ≥ 16", self.grid_size)));
        }
        if !(self.xi0 > T::zero() && self.delta > T::zero() && self.domain_length > T::zero()) {
            return Err(Error::Packet("ξ0, δ and the domain length must be positive".into()));
        }
        if !(self.chi_half_width > T::zero()) || self.chi_half_width > self.carrier() * T::half() {
            return Err(Error::Packet(format!(
                "window half-width {} must lie in (0, ξ0/(2δ) = {}]",
                self.chi_half_width,
                self.carrier() * T::half()
            )));
        }
        let dxi = self.dxi();
        if self.chi_half_width < T::two() * dxi {
            return Err(Error::Packet(format!(
                "window half-width {} resolves fewer than two modes (Δξ = {dxi})",
                self.chi_half_width
            )));
        }
        let nyquist = dxi * T::from_usize_lossy(self.grid_size / 2);
        if self.carrier() + self.chi_half_width >= nyquist {
            return Err(Error::Packet(format!("packet exceeds the Nyquist frequency {nyquist}")));
        }
        let half = self.domain_length * T::half();
        if self.x_center.abs() >= half {
            return Err(Error::Packet(format!("centre {} outside the domain", self.x_center)));
        }
        Ok(())
    }

    pub fn dxi(&self) -> T {
        T::two() * T::PI() / self.domain_length
    }

    pub fn dx(&self) -> T {
        self.domain_length / T::from_usize_lossy(self.grid_size)
    }

    /// Grid `x_j = -L/2 + jL/n`.
    pub fn x_grid(&self) -> Vec<T> {
        let (h, dx) = (self.domain_length * T::half(), self.dx());
        (0..self.grid_size).map(|j| -h + dx * T::from_usize_lossy(j)).collect()
    }

    /// Signed wavenumbers in FFT order.
    pub fn frequencies(&self) -> Vec<T> {
        let n = self.grid_size;
        (0..n)
            .map(|k| {
                let s = if k <= n / 2 { T::from_usize_lossy(k) } else { -T::from_usize_lossy(n - k) };
                s * self.dxi()
            })
            .collect()
    }

    /// The bump `χ̂(η) = exp(-1/(1 - (η/w)²))` for `|η| < w`.
    pub fn chi_hat(&self, eta: T) -> T {
        let s = eta / self.chi_half_width;
        if s.abs() >= T::one() {
            T::zero()
        } else {
            (-(T::one() - s * s).recip()).exp()
        }
    }
}

/// Initial spectra and the active modes.
#[derive(Clone, Debug)]
pub struct Packet<T> {
    pub spec: PacketSpec<T>,
    pub xi: Vec<T>,
    pub active: Vec<usize>,
    pub u0_hat: Vec<Complex<T>>,
    pub u1_hat: Vec<Complex<T>>,
}

/// `û₀(ξ) = χ̂(ξ - ξ0/δ) e^{-iξ x_c}` and `û₁ = -iξ û₀`, so that the packet
/// moves to the right: its micro-energy has no `e^{+iξt}` component.
pub fn build_packet<T: Real>(spec: &PacketSpec<T>) -> Result<Packet<T>> {
    spec.validate()?;
    let xi = spec.frequencies();
    let n = spec.grid_size;
    let mut u0_hat = vec![Complex::new(T::zero(), T::zero()); n];
    let mut u1_hat = u0_hat.clone();
    let mut active = Vec::new();
    let norm = spec.dxi() / (T::two() * T::PI());
    for (k, &x) in xi.iter().enumerate() {
        let a = spec.chi_hat(x - spec.carrier());
        if a > T::zero() {
            if !(x > T::zero()) {
                return Err(Error::Packet(format!("active mode at ξ = {x} is not positive")));
            }
            let phase = Complex::from_polar(T::one(), -x * spec.x_center);
            u0_hat[k] = phase * (a * norm);
            u1_hat[k] = u0_hat[k] * c(T::zero(), -x);
            active.push(k);
        }
    }
    Ok(Packet {
        spec: spec.clone(),
        xi,
        active,
        u0_hat,
        u1_hat,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Direct,
    Assembled,
    Limit,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Method::Direct),
            "assembled" => Ok(Method::Assembled),
            "limit" => Ok(Method::Limit),
            _ => Err(Error::Config(format!("unknown method {s:?}"))),
        }
    }
}

/// Field at one time with its rightward/leftward split.
#[derive(Clone, Debug)]
pub struct Field<T> {
    pub t: T,
    pub x: Vec<T>,
    pub u: Vec<Complex<T>>,
    pub u_t: Vec<Complex<T>>,
    pub right: Vec<Complex<T>>,
    pub left: Vec<Complex<T>>,
    pub u_hat: Vec<Complex<T>>,
}

/// Periodic synthesis `u(x_j) = Σ_k û_k e^{iξ_k x_j}`.
pub fn synthesize<T: FieldScalar>(spec: &PacketSpec<T>, hat: &[Complex<T>]) -> Vec<Complex<T>> {
    let n = spec.grid_size;
    // x_0 = -L/2 contributes (-1)^k
    let mut buf: Vec<Complex<T>> = hat
        .iter()
        .enumerate()
        .map(|(k, &z)| {
            let odd = if k <= n / 2 { k % 2 == 1 } else { (n - k) % 2 == 1 };
            if odd {
                -z
            } else {
                z
            }
        })
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf
}

fn mode_propagator<T: Real>(
    ev: &RegularizedEval<T>,
    zc: &ZoneConstant<T>,
    t: T,
    xi: T,
    eps: T,
    method: Method,
    cfg: &IntegratorConfig<T>,
) -> Result<Mat2<T>> {
    if t == T::zero() {
        return Ok(Mat2::identity());
    }
    match method {
        Method::Direct => direct_propagator(ev, T::zero(), t, xi, eps, cfg).map(|r| r.0),
        Method::Assembled => {
            if xi <= zc.n {
                log::warn!("mode ξ = {xi} is a bounded frequency; using direct integration");
                return direct_propagator(ev, T::zero(), t, xi, eps, cfg).map(|r| r.0);
            }
            full_propagator(ev, T::zero(), t, xi, eps, zc, cfg).map(|r| r.matrix)
        }
        Method::Limit => {
            if t <= T::one() {
                e_hyp_limit(&ev.coeff, t, T::zero(), xi, cfg)
            } else {
                limit_propagator(&ev.coeff, T::zero(), t, xi, cfg)
            }
        }
    }
}

/// Field at time `t ∈ [0, 2]` from the chosen per-mode propagator.
pub fn evolve_packet<T: FieldScalar>(
    packet: &Packet<T>,
    ev: &RegularizedEval<T>,
    t: T,
    eps: T,
    method: Method,
    cfg: &IntegratorConfig<T>,
) -> Result<Field<T>> {
    if !(t >= T::zero() && t <= T::two()) {
        return Err(Error::Domain(format!("packet time {t} outside [0, 2]")));
    }
    let zc = choose_zone_constant(ev);
    let n = packet.spec.grid_size;
    let zero = Complex::new(T::zero(), T::zero());
    let per_mode: Vec<[Complex<T>; 4]> = packet
        .active
        .par_iter()
        .map(|&k| {
            let xi = packet.xi[k];
            let e = mode_propagator(ev, &zc, t, xi, eps, method, cfg)?;
            // micro-energy (|ξ|û, D_t û) with D_t û = -i û₁
            let u0 = [packet.u0_hat[k] * xi, packet.u1_hat[k] * c(T::zero(), -T::one())];
            let u = e.apply(u0);
            let v = Mat2::diagonaliser_inv().apply(u);
            let s = T::SQRT_2() * xi;
            Ok([u[0] / xi, u[1] * c(T::zero(), T::one()), v[1] / (-s), v[0] / s])
        })
        .collect::<Result<_>>()?;
    let mut spectra = vec![vec![zero; n]; 4];
    for (&k, m) in packet.active.iter().zip(&per_mode) {
        for (s, v) in spectra.iter_mut().zip(m) {
            s[k] = *v;
        }
    }
    let spec = &packet.spec;
    Ok(Field {
        t,
        x: spec.x_grid(),
        u: synthesize(spec, &spectra[0]),
        u_t: synthesize(spec, &spectra[1]),
        right: synthesize(spec, &spectra[2]),
        left: synthesize(spec, &spectra[3]),
        u_hat: spectra.swap_remove(0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Window<T> {
    pub center: T,
    pub half_width: T,
}

impl<T: Real> Window<T> {
    fn contains(&self, x: T) -> bool {
        (x - self.center).abs() <= self.half_width
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    Total,
    Right,
    Left,
}

/// Peak modulus of a field component inside a window.
pub fn window_peak<T: Real>(field: &Field<T>, w: &Window<T>, component: Component) -> T {
    let data = match component {
        Component::Total => &field.u,
        Component::Right => &field.right,
        Component::Left => &field.left,
    };
    field
        .x
        .iter()
        .zip(data)
        .filter(|(x, _)| w.contains(**x))
        .fold(T::zero(), |m, (_, z)| m.max(z.norm()))
}

/// Discrete `L²` mass of `u` inside a window.
pub fn window_mass<T: Real>(field: &Field<T>, w: &Window<T>) -> T {
    let dx = if field.x.len() > 1 { field.x[1] - field.x[0] } else { T::zero() };
    field
        .x
        .iter()
        .zip(&field.u)
        .filter(|(x, _)| w.contains(**x))
        .fold(T::zero(), |m, (_, z)| m + z.norm_sqr() * dx)
        .sqrt()
}

/// Amplitudes are peaks of the rightward component in the transmitted window
/// and of the leftward component in the reflected window; plain `|u|` peaks
/// and `L²` masses are kept as diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct ReflectionReport<T> {
    pub t2: T,
    pub incident_amp: T,
    pub transmitted_amp: T,
    pub reflected_amp: T,
    pub transmitted_ratio: T,
    pub reflected_ratio: T,
    pub reflected_over_transmitted: T,
    pub transmitted_window: Window<T>,
    pub reflected_window: Window<T>,
    pub total_transmitted_peak: T,
    pub total_reflected_peak: T,
    pub incident_mass: T,
    pub transmitted_mass: T,
    pub reflected_mass: T,
}

/// Windows around `x_c + t2` and `x_c + 2 - t2`.
pub fn measurement_windows<T: Real>(spec: &PacketSpec<T>, t2: T) -> Result<(Window<T>, Window<T>)> {
    let tc = spec.x_center + t2;
    let rc = spec.x_center + T::two() - t2;
    let w = ((tc - rc).abs() * T::half()).min(T::lit(MAX_WINDOW));
    if w < T::lit(MIN_WINDOW) {
        return Err(Error::Measurement(format!(
            "windows around {tc} and {rc} overlap; choose t2 further from 1"
        )));
    }
    let half = spec.domain_length * T::half();
    for c in [tc, rc] {
        if c - w < -half || c + w > half {
            return Err(Error::Measurement(format!("window around {c} wraps around the periodic domain")));
        }
    }
    Ok((Window { center: tc, half_width: w }, Window { center: rc, half_width: w }))
}

/// Peak amplitudes in the transmitted and reflected windows against the
/// incident peak at `t = 0`.
pub fn measure_reflection<T: Real>(
    initial: &Field<T>,
    last: &Field<T>,
    spec: &PacketSpec<T>,
) -> Result<ReflectionReport<T>> {
    if !(last.t > T::one()) {
        return Err(Error::Measurement(format!("measurement time {} must exceed 1", last.t)));
    }
    let (tw, rw) = measurement_windows(spec, last.t)?;
    let iw = Window { center: spec.x_center, half_width: tw.half_width };
    let incident_amp = window_peak(initial, &iw, Component::Right);
    if !(incident_amp > T::zero()) {
        return Err(Error::Measurement("incident packet has zero amplitude".into()));
    }
    let transmitted_amp = window_peak(last, &tw, Component::Right);
    let reflected_amp = window_peak(last, &rw, Component::Left);
    Ok(ReflectionReport {
        t2: last.t,
        incident_amp,
        transmitted_amp,
        reflected_amp,
        transmitted_ratio: transmitted_amp / incident_amp,
        reflected_ratio: reflected_amp / incident_amp,
        reflected_over_transmitted: reflected_amp / transmitted_amp,
        transmitted_window: tw,
        reflected_window: rw,
        total_transmitted_peak: window_peak(last, &tw, Component::Total),
        total_reflected_peak: window_peak(last, &rw, Component::Total),
        incident_mass: window_mass(initial, &iw),
        transmitted_mass: window_mass(last, &tw),
        reflected_mass: window_mass(last, &rw),
    })
}

/// Builds the packet, evolves it to `t2` and measures.
pub fn run_experiment<T: FieldScalar>(
    spec: &PacketSpec<T>,
    ev: &RegularizedEval<T>,
    eps: T,
    t2: T,
    method: Method,
    cfg: &IntegratorConfig<T>,
) -> Result<(Field<T>, Field<T>, ReflectionReport<T>)> {
    let packet = build_packet(spec)?;
    let initial = evolve_packet(&packet, ev, T::zero(), eps, method, cfg)?;
    let last = evolve_packet(&packet, ev, t2, eps, method, cfg)?;
    let report = measure_reflection(&initial, &last, spec)?;
    Ok((initial, last, report))
}

/// Transmitted and reflected peak ratios of the limit, `(H+1)/2` and `|H-1|/2`.
pub fn predicted_ratios<T: Real>(big_h: T) -> (T, T) {
    ((big_h + T::one()) * T::half(), (big_h - T::one()).abs() * T::half())
}
