//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use bistab::hilbert::C64;
use num_bigint::BigInt;

const FRAC_BITS: u64 = 600;

/// Complex fixed-point number with `FRAC_BITS` fractional bits.
#[derive(Clone)]
struct Fx {
    re: BigInt,
    im: BigInt,
}

fn fx_real(v: f64) -> BigInt {
    // An f64 is m · 2^e exactly.
    if v == 0.0 {
        return BigInt::from(0);
    }
    let bits = v.to_bits();
    let sign = if bits >> 63 == 1 { -1 } else { 1 };
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
    let m = BigInt::from(mant) * sign;
    let shift = e + FRAC_BITS as i64;
    if shift >= 0 {
        m << shift as u64
    } else {
        m >> (-shift) as u64
    }
}

fn to_f64(x: &BigInt) -> f64 {
    // Keep the top 64 significant bits, then scale.
    let bits = x.bits();
    let (m, sh) = if bits > 64 { (x >> (bits - 64), bits as i64 - 64) } else { (x.clone(), 0) };
    let m: i128 = m.try_into().expect("fits after shifting");
    m as f64 * 2f64.powi((sh - FRAC_BITS as i64) as i32)
}

impl Fx {
    fn new(z: C64) -> Self {
        Self { re: fx_real(z.re), im: fx_real(z.im) }
    }

    fn mul(&self, o: &Self) -> Self {
        Self {
            re: (&self.re * &o.re - &self.im * &o.im) >> FRAC_BITS,
            im: (&self.re * &o.im + &self.im * &o.re) >> FRAC_BITS,
        }
    }

    fn div(&self, o: &Self) -> Self {
        let den = (&o.re * &o.re + &o.im * &o.im) >> FRAC_BITS;
        let num = self.mul(&Self { re: o.re.clone(), im: -o.im.clone() });
        Self { re: (num.re << FRAC_BITS) / &den, im: (num.im << FRAC_BITS) / &den }
    }

    fn add(&self, o: &Self) -> Self {
        Self { re: &self.re + &o.re, im: &self.im + &o.im }
    }

    fn to_c64(&self) -> C64 {
        C64::new(to_f64(&self.re), to_f64(&self.im))
    }
}

/// First `terms` terms of `Σ z^k / ((a)_k (b)_k k!)`, accumulated in
/// 600-bit fixed point from the exact binary values of the inputs.
pub fn hyp0f2_fixed_point(a: C64, b: C64, z: C64, terms: usize) -> C64 {
    let (a, b, z) = (Fx::new(a), Fx::new(b), Fx::new(z));
    let one = Fx::new(C64::new(1.0, 0.0));
    let mut term = one.clone();
    let mut sum = one;
    for k in 0..terms.saturating_sub(1) {
        let kk = Fx::new(C64::new(k as f64, 0.0));
        let k1 = Fx::new(C64::new(k as f64 + 1.0, 0.0));
        let den = a.add(&kk).mul(&b.add(&kk)).mul(&k1);
        term = term.mul(&z).div(&den);
        sum = sum.add(&term);
    }
    sum.to_c64()
}

/// Relative error `|x − y| / |y|`.
pub fn rel_err(x: C64, y: C64) -> f64 {
    (x - y).norm() / y.norm()
}
