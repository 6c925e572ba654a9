//! Analytic steady-state first moment of the cavity field from the effective
//! Fokker–Planck model, built on a double-double ₀F₂ evaluator.

use std::ops::{Add, Mul, Neg, Sub};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::C64;
use crate::master::SweepResult;
use crate::meanfield::check_monotone;
use crate::models::SystemParams;

const I: C64 = C64::new(0.0, 1.0);
const MAX_TERMS: usize = 100_000;
const TAIL_TOL: f64 = 1e-13;

/// Effective constants of the adiabatically reduced model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    /// `κ + 2iΔω_c`
    pub gamma_c_tilde: C64,
    /// `γ + 2iΔω_q + 2g²/γ̃_c`
    pub gamma_q_tilde: C64,
    /// `−2igε_d/γ̃_c`
    pub eps_tilde: C64,
    /// `γ̃_q/(2iχ)`
    pub c: C64,
}

pub fn effective_params(params: &SystemParams) -> Result<EffectiveParams> {
    if params.chi == 0.0 {
        return Err(Error::InvalidParameter { name: "chi", reason: "anharmonicity must be nonzero".into() });
    }
    let gamma_c_tilde = C64::new(params.kappa, 2.0 * params.delta_c());
    if gamma_c_tilde.norm() == 0.0 {
        return Err(Error::InvalidParameter {
            name: "kappa",
            reason: "effective cavity decay vanishes (kappa = 0 on resonance)".into(),
        });
    }
    let g = params.g;
    let gamma_q_tilde = C64::new(params.gamma, 2.0 * params.delta_q()) + 2.0 * g * g / gamma_c_tilde;
    let eps_tilde = -2.0 * I * g * params.eps_d / gamma_c_tilde;
    let c = gamma_q_tilde / (2.0 * I * params.chi);
    Ok(EffectiveParams { gamma_c_tilde, gamma_q_tilde, eps_tilde, c })
}

/// Steady-state `⟨a⟩ = (2/γ̃_c)[ε_d − (ε̃g/(χc)) ₀F₂(c+1, c*; z)/₀F₂(c, c*; z)]`
/// with `z = 2|ε̃/χ|²`.
pub fn fpe_first_moment(params: &SystemParams) -> Result<C64> {
    let e = effective_params(params)?;
    let z = C64::new(2.0 * (e.eps_tilde / params.chi).norm_sqr(), 0.0);
    let ratio = hyp0f2_ratio(e.c + 1.0, e.c.conj(), e.c, e.c.conj(), z)?;
    let coupling = e.eps_tilde * params.g / (params.chi * e.c);
    Ok(2.0 * (params.eps_d - coupling * ratio) / e.gamma_c_tilde)
}

/// Parameters rewritten into the rate convention of [`fpe_first_moment`] so its
/// output lines up with the master equation: `κ → 2κ`, `g → √2·g`.
pub fn master_convention(params: &SystemParams) -> SystemParams {
    SystemParams { kappa: 2.0 * params.kappa, g: std::f64::consts::SQRT_2 * params.g, ..*params }
}

/// `|⟨a⟩|` across a drive-frequency grid (rad/s). Failing points are recorded
/// in `errors` with `NaN` amplitudes and do not stop the sweep.
pub fn fpe_sweep(params: &SystemParams, frequencies: &[f64]) -> Result<SweepResult> {
    check_monotone(frequencies)?;
    let points: Vec<Result<C64>> =
        frequencies.par_iter().map(|&w| fpe_first_moment(&params.with_drive_frequency(w))).collect();
    let nan = C64::new(f64::NAN, f64::NAN);
    let alpha: Vec<C64> = points.iter().map(|p| *p.as_ref().unwrap_or(&nan)).collect();
    Ok(SweepResult {
        frequencies: frequencies.to_vec(),
        amp_a: alpha.iter().map(|a| a.norm()).collect(),
        alpha,
        n_photon: None,
        sigma_z: None,
        amp_sm: None,
        transmon_populations: Vec::new(),
        cutoffs: None,
        errors: points.into_iter().map(|p| p.err().map(|e| e.to_string())).collect(),
    })
}

/// `₀F₂(a, b; z) = Σ_k z^k / (k! (a)_k (b)_k)` to about 1e−13 relative.
pub fn hyp0f2(a: C64, b: C64, z: C64) -> Result<C64> {
    let s = series(a, b, z)?;
    Ok(s.value())
}

/// `₀F₂(a₁, b₁; z) / ₀F₂(a₂, b₂; z)` without overflow for large `z`.
pub fn hyp0f2_ratio(a1: C64, b1: C64, a2: C64, b2: C64, z: C64) -> Result<C64> {
    let num = series(a1, b1, z)?;
    let den = series(a2, b2, z)?;
    let d = den.sum.to_c64();
    if d.norm() == 0.0 {
        return Err(Error::PochhammerPole("denominator series vanishes".into()));
    }
    let exp = (num.exp2 - den.exp2) as i32;
    Ok(num.sum.to_c64() / d * 2f64.powi(exp))
}

fn is_pole(a: C64) -> bool {
    a.im == 0.0 && a.re <= 0.0 && a.re.fract() == 0.0
}

/// Partial sum `sum · 2^exp2`.
struct Scaled {
    sum: Cdd,
    exp2: i64,
}

impl Scaled {
    fn value(&self) -> C64 {
        let v = self.sum.to_c64();
        v * 2f64.powi(self.exp2.clamp(-2000, 2000) as i32)
    }
}

fn series(a: C64, b: C64, z: C64) -> Result<Scaled> {
    for p in [a, b] {
        if is_pole(p) {
            return Err(Error::PochhammerPole(format!("{p}")));
        }
    }
    if !(a.is_finite() && b.is_finite() && z.is_finite()) {
        return Err(Error::InvalidParameter { name: "hyp0f2", reason: "non-finite argument".into() });
    }
    let (ad, bd, zd) = (Cdd::from(a), Cdd::from(b), Cdd::from(z));
    let zn = z.norm();
    // Beyond k0 every |a+k|, |b+k| grows with k, so the term-ratio bound is
    // monotone and the geometric tail estimate is rigorous.
    let k0 = (-a.re).max(-b.re).max(0.0).ceil() as usize + 1;

    let mut term = Cdd::one();
    let mut sum = Cdd::one();
    let mut exp2: i64 = 0;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        let den = (ad + Cdd::from_f64(kf)) * (bd + Cdd::from_f64(kf)) * Dd::from(kf + 1.0);
        term = (term * zd).div(&den);
        sum = sum + term;

        let mag = sum.norm_hi().max(term.norm_hi());
        if mag > 1e250 {
            let shift = mag.log2().floor() as i32;
            let f = 2f64.powi(-shift);
            sum = sum.scale(f);
            term = term.scale(f);
            exp2 += shift as i64;
        }

        if k + 1 >= k0 {
            let k1 = kf + 1.0;
            let rho = zn / ((k1 + 1.0) * (a + k1).norm() * (b + k1).norm());
            if rho < 1.0 {
                let next = term.norm_hi() * rho;
                let tail = next / (1.0 - rho);
                if tail <= TAIL_TOL * sum.norm_hi() || sum.norm_hi() == 0.0 && tail == 0.0 {
                    return Ok(Scaled { sum, exp2 });
                }
            }
        }
    }
    Err(Error::SeriesNonConvergence(MAX_TERMS))
}

/// Double-double real number `hi + lo`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    fn norm(hi: f64, lo: f64) -> Self {
        let (h, l) = quick_two_sum(hi, lo);
        Dd { hi: h, lo: l }
    }

    fn div_dd(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * Dd::from(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Dd::from(q2);
        let q3 = r.hi / b.hi;
        let (h, l) = quick_two_sum(q1, q2);
        Dd { hi: h, lo: l } + Dd::from(q3)
    }

    fn scale(self, f: f64) -> Dd {
        Dd { hi: self.hi * f, lo: self.lo * f }
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Dd::norm(s, e + f)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let p = self.hi * b.hi;
        let e = self.hi.mul_add(b.hi, -p);
        Dd::norm(p, e + (self.hi * b.lo + self.lo * b.hi))
    }
}

/// Complex double-double.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Cdd {
    re: Dd,
    im: Dd,
}

impl Cdd {
    fn one() -> Self {
        Cdd { re: Dd::from(1.0), im: Dd::ZERO }
    }

    fn from_f64(x: f64) -> Self {
        Cdd { re: Dd::from(x), im: Dd::ZERO }
    }

    fn to_c64(self) -> C64 {
        C64::new(self.re.hi + self.re.lo, self.im.hi + self.im.lo)
    }

    fn norm_hi(&self) -> f64 {
        self.re.hi.hypot(self.im.hi)
    }

    fn scale(self, f: f64) -> Self {
        Cdd { re: self.re.scale(f), im: self.im.scale(f) }
    }

    fn div(&self, d: &Cdd) -> Cdd {
        let den = d.re * d.re + d.im * d.im;
        let re = self.re * d.re + self.im * d.im;
        let im = self.im * d.re - self.re * d.im;
        Cdd { re: re.div_dd(den), im: im.div_dd(den) }
    }
}

impl From<C64> for Cdd {
    fn from(z: C64) -> Self {
        Cdd { re: Dd::from(z.re), im: Dd::from(z.im) }
    }
}

impl Add for Cdd {
    type Output = Cdd;
    fn add(self, b: Cdd) -> Cdd {
        Cdd { re: self.re + b.re, im: self.im + b.im }
    }
}

impl Mul for Cdd {
    type Output = Cdd;
    fn mul(self, b: Cdd) -> Cdd {
        Cdd { re: self.re * b.re - self.im * b.im, im: self.re * b.im + self.im * b.re }
    }
}

impl Mul<Dd> for Cdd {
    type Output = Cdd;
    fn mul(self, b: Dd) -> Cdd {
        Cdd { re: self.re * b, im: self.im * b }
    }
}
