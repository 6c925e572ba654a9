//! Truncated Fock/qudit spaces and sparse complex operators on them.
//!
//! Composite states are always ordered `cavity ⊗ transmon`: the basis state
//! with `n` photons and transmon level `q` sits at index `n * levels + q`.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Entries below this magnitude are dropped from sparse storage.
pub const DROP_TOL: f64 = 1e-15;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// A truncated `cavity ⊗ transmon` Hilbert space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HilbertSpec {
    cavity_cutoff: usize,
    transmon_levels: usize,
}

/// Tag naming one factor of the composite space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    Cavity,
    Transmon,
}

impl HilbertSpec {
    pub fn new(cavity_cutoff: usize, transmon_levels: usize) -> Result<Self> {
        if cavity_cutoff < 2 {
            return Err(Error::InvalidDimension(format!(
                "cavity cutoff must be >= 2, got {cavity_cutoff}"
            )));
        }
        if transmon_levels < 2 {
            return Err(Error::InvalidDimension(format!(
                "transmon levels must be >= 2, got {transmon_levels}"
            )));
        }
        Ok(Self { cavity_cutoff, transmon_levels })
    }

    /// Cavity alone, for models with the transmon eliminated.
    pub fn cavity_only(cavity_cutoff: usize) -> Result<Self> {
        if cavity_cutoff < 2 {
            return Err(Error::InvalidDimension(format!(
                "cavity cutoff must be >= 2, got {cavity_cutoff}"
            )));
        }
        Ok(Self { cavity_cutoff, transmon_levels: 1 })
    }

    pub fn cavity_cutoff(&self) -> usize {
        self.cavity_cutoff
    }

    pub fn transmon_levels(&self) -> usize {
        self.transmon_levels
    }

    pub fn dim(&self) -> usize {
        self.cavity_cutoff * self.transmon_levels
    }

    /// Composite index of `|n⟩ ⊗ |q⟩`.
    pub fn index(&self, photons: usize, level: usize) -> usize {
        photons * self.transmon_levels + level
    }

    /// Lifts a cavity operator to `op ⊗ I`.
    pub fn on_cavity(&self, op: &Operator) -> Result<Operator> {
        check_dim(self.cavity_cutoff, op.dim())?;
        Ok(tensor(op, &Operator::identity(self.transmon_levels)))
    }

    /// Lifts a transmon operator to `I ⊗ op`.
    pub fn on_transmon(&self, op: &Operator) -> Result<Operator> {
        check_dim(self.transmon_levels, op.dim())?;
        Ok(tensor(&Operator::identity(self.cavity_cutoff), op))
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Square sparse complex matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl Operator {
    /// Builds an operator from `(row, col, value)` entries. Duplicates are
    /// summed and entries below [`DROP_TOL`] are dropped.
    pub fn from_triplets<I>(dim: usize, entries: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut entries: Vec<(usize, usize, C64)> = entries.into_iter().collect();
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals = Vec::with_capacity(entries.len());
        let mut i = 0;
        while i < entries.len() {
            let (r, c, mut v) = entries[i];
            assert!(r < dim && c < dim, "entry ({r}, {c}) outside {dim}x{dim}");
            i += 1;
            while i < entries.len() && entries[i].0 == r && entries[i].1 == c {
                v += entries[i].2;
                i += 1;
            }
            if v.norm() >= DROP_TOL {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, row_ptr: vec![0; dim + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![ONE; dim])
    }

    pub fn diagonal(values: &[C64]) -> Self {
        Self::from_triplets(values.len(), values.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        let span = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.cols[span.clone()].binary_search(&col) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => ZERO,
        }
    }

    /// Iterates over stored `(row, col, value)` entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    /// Stored entries of one row as `(col, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (c, r, v)))
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v = v.conj());
        out
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (r, c, v * factor)))
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(C64::new(factor, 0.0))
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        Ok(Self::from_triplets(self.dim, self.triplets().chain(other.triplets())))
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        let mut entries = Vec::new();
        let mut acc = vec![ZERO; self.dim];
        let mut touched = Vec::new();
        let mut seen = vec![false; self.dim];
        for r in 0..self.dim {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !seen[c] {
                        seen[c] = true;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            for &c in &touched {
                entries.push((r, c, acc[c]));
                acc[c] = ZERO;
                seen[c] = false;
            }
            touched.clear();
        }
        Ok(Self::from_triplets(self.dim, entries))
    }

    /// `[self, other]`
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        Ok(&self.try_mul(other)? - &other.try_mul(self)?)
    }

    /// `y = self · x`
    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for (r, out) in y.iter_mut().enumerate() {
            let mut s = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *out = s;
        }
    }

    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        check_dim(self.dim, x.len())?;
        let mut y = vec![ZERO; self.dim];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim * self.dim];
        for (r, c, v) in self.triplets() {
            out[r * self.dim + c] = v;
        }
        out
    }

    /// Largest entrywise deviation `|A_ij - conj(A_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let adj = self.adjoint();
        (&adj - self).triplets().map(|(_, _, v)| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// Largest entrywise deviation from `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self - other).triplets().map(|(_, _, v)| v.norm()).fold(0.0, f64::max)
    }

    /// Gershgorin bound on the spectral radius of `self - shift·I`.
    pub fn gershgorin_radius(&self, shift: C64) -> f64 {
        (0..self.dim)
            .map(|r| {
                self.row(r)
                    .map(|(c, v)| if c == r { (v - shift).norm() } else { v.norm() })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: Self) -> Operator {
        self.try_add(rhs).expect("operator dimensions differ")
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: Self) -> Operator {
        self.try_add(&rhs.scale_real(-1.0)).expect("operator dimensions differ")
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: Self) -> Operator {
        self.try_mul(rhs).expect("operator dimensions differ")
    }
}

/// Photon annihilation operator on `n_max` Fock states.
pub fn annihilation(n_max: usize) -> Result<Operator> {
    if n_max < 2 {
        return Err(Error::InvalidDimension(format!("Fock cutoff must be >= 2, got {n_max}")));
    }
    Ok(Operator::from_triplets(
        n_max,
        (1..n_max).map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0))),
    ))
}

/// `a†a` on `n_max` Fock states.
pub fn number(n_max: usize) -> Result<Operator> {
    if n_max < 2 {
        return Err(Error::InvalidDimension(format!("Fock cutoff must be >= 2, got {n_max}")));
    }
    Ok(Operator::diagonal(&(0..n_max).map(|n| C64::new(n as f64, 0.0)).collect::<Vec<_>>()))
}

/// `|m⟩⟨n|` on a `levels`-dimensional space.
pub fn ketbra(levels: usize, m: usize, n: usize) -> Result<Operator> {
    for idx in [m, n] {
        if idx >= levels {
            return Err(Error::IndexOutOfRange { index: idx, bound: levels });
        }
    }
    Ok(Operator::from_triplets(levels, [(m, n, ONE)]))
}

/// Kronecker product `a ⊗ b`; `a` indexes the slow (outer) factor.
pub fn tensor(a: &Operator, b: &Operator) -> Operator {
    let db = b.dim();
    let mut entries = Vec::with_capacity(a.nnz() * b.nnz());
    for (ra, ca, va) in a.triplets() {
        for (rb, cb, vb) in b.triplets() {
            entries.push((ra * db + rb, ca * db + cb, va * vb));
        }
    }
    Operator::from_triplets(a.dim() * db, entries)
}

/// Anything an operator expectation value can be taken in.
pub trait QuantumState {
    fn dim(&self) -> usize;
    fn expectation(&self, op: &Operator) -> Result<C64>;
}

/// Free-function form of [`QuantumState::expectation`].
pub fn expectation<S: QuantumState + ?Sized>(state: &S, op: &Operator) -> Result<C64> {
    state.expectation(op)
}

/// Pure state amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(amps: Vec<C64>) -> Self {
        Self { amps }
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, bound: dim });
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(Self { amps })
    }

    /// Truncated coherent state `e^{-|α|²/2} Σ αⁿ/√n! |n⟩`, renormalized on
    /// the kept Fock states.
    pub fn coherent(cutoff: usize, alpha: C64) -> Self {
        let mut amps = Vec::with_capacity(cutoff);
        let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
        for n in 0..cutoff {
            amps.push(c);
            c = c * alpha / ((n + 1) as f64).sqrt();
        }
        let mut s = Self { amps };
        s.normalize();
        s
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= n);
        }
    }

    /// Product state `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Self { amps }
    }
}

impl QuantumState for StateVector {
    fn dim(&self) -> usize {
        self.amps.len()
    }

    fn expectation(&self, op: &Operator) -> Result<C64> {
        check_dim(op.dim(), self.amps.len())?;
        let mut s = ZERO;
        for r in 0..op.dim() {
            let mut row = ZERO;
            for (c, v) in op.row(r) {
                row += v * self.amps[c];
            }
            s += self.amps[r].conj() * row;
        }
        Ok(s)
    }
}

/// Dense density matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl DensityMatrix {
    pub fn from_row_major(dim: usize, data: Vec<C64>) -> Result<Self> {
        check_dim(dim * dim, data.len())?;
        Ok(Self { dim, data })
    }

    pub fn from_pure(state: &StateVector) -> Self {
        let amps = state.amplitudes();
        let dim = amps.len();
        let mut data = vec![ZERO; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = amps[i] * amps[j].conj();
            }
        }
        Self { dim, data }
    }

    /// `|index⟩⟨index|`
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        Ok(Self::from_pure(&StateVector::basis(dim, index)?))
    }

    /// Diagonal state with the given populations.
    pub fn diagonal(populations: &[f64]) -> Self {
        let dim = populations.len();
        let mut data = vec![ZERO; dim * dim];
        for (i, &p) in populations.iter().enumerate() {
            data[i * dim + i] = C64::new(p, 0.0);
        }
        Self { dim, data }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::diagonal(&vec![1.0 / dim as f64; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.data[i * self.dim + i].re).collect()
    }

    /// Largest entrywise deviation `|ρ_ij - conj(ρ_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.data[i * d + j] - self.data[j * d + i].conj()).norm());
            }
        }
        worst
    }

    /// Replaces ρ by (ρ + ρ†)/2.
    pub fn hermitize(&mut self) {
        hermitize_in_place(&mut self.data, self.dim);
    }

    /// Divides by the real part of the trace.
    pub fn normalize_trace(&mut self) {
        let t = self.trace().re;
        if t != 0.0 {
            self.data.iter_mut().for_each(|v| *v /= t);
        }
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let d = self.dim;
        let m = faer::Mat::<C64>::from_fn(d, d, |i, j| {
            (self.data[i * d + j] + self.data[j * d + i].conj()) * 0.5
        });
        let mut ev = m
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .expect("Hermitian eigensolver failed");
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Trace distance ½‖ρ − σ‖₁.
    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        check_dim(self.dim, other.dim)?;
        let diff = Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        };
        Ok(0.5 * diff.eigenvalues().iter().map(|e| e.abs()).sum::<f64>())
    }

    /// Product state `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (da, db) = (self.dim, other.dim);
        let d = da * db;
        let mut data = vec![ZERO; d * d];
        for i in 0..da {
            for j in 0..da {
                let a = self.data[i * da + j];
                if a == ZERO {
                    continue;
                }
                for k in 0..db {
                    for l in 0..db {
                        data[(i * db + k) * d + j * db + l] = a * other.data[k * db + l];
                    }
                }
            }
        }
        Self { dim: d, data }
    }
}

impl QuantumState for DensityMatrix {
    fn dim(&self) -> usize {
        self.dim
    }

    fn expectation(&self, op: &Operator) -> Result<C64> {
        check_dim(op.dim(), self.dim)?;
        // tr(ρ A) = Σ_{r,c} A_rc ρ_cr
        Ok(op.triplets().map(|(r, c, v)| v * self.data[c * self.dim + r]).sum())
    }
}

pub(crate) fn hermitize_in_place(data: &mut [C64], d: usize) {
    for i in 0..d {
        data[i * d + i].im = 0.0;
        for j in (i + 1)..d {
            let avg = (data[i * d + j] + data[j * d + i].conj()) * 0.5;
            data[i * d + j] = avg;
            data[j * d + i] = avg.conj();
        }
    }
}

/// Reduced density matrix of one factor of `spec`.
pub fn partial_trace(rho: &DensityMatrix, spec: &HilbertSpec, keep: Subsystem) -> Result<DensityMatrix> {
    check_dim(spec.dim(), rho.dim())?;
    let (nc, nq) = (spec.cavity_cutoff(), spec.transmon_levels());
    let d = spec.dim();
    let out = match keep {
        Subsystem::Cavity => {
            let mut data = vec![ZERO; nc * nc];
            for n in 0..nc {
                for m in 0..nc {
                    data[n * nc + m] = (0..nq).map(|q| rho.data[(n * nq + q) * d + m * nq + q]).sum();
                }
            }
            DensityMatrix { dim: nc, data }
        }
        Subsystem::Transmon => {
            let mut data = vec![ZERO; nq * nq];
            for p in 0..nq {
                for q in 0..nq {
                    data[p * nq + q] = (0..nc).map(|n| rho.data[(n * nq + p) * d + n * nq + q]).sum();
                }
            }
            DensityMatrix { dim: nq, data }
        }
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(a: &[C64], b: &[C64], d: usize) -> Vec<C64> {
        let mut out = vec![ZERO; d * d];
        for i in 0..d {
            for k in 0..d {
                for j in 0..d {
                    out[i * d + j] += a[i * d + k] * b[k * d + j];
                }
            }
        }
        out
    }

    #[test]
    fn annihilation_entries() {
        let a = annihilation(4).unwrap();
        assert_eq!(a.get(0, 1), ONE);
        let a5 = annihilation(5).unwrap();
        assert!((a5.get(3, 4) - C64::new(2.0, 0.0)).norm() < 1e-15);
        assert!(matches!(annihilation(1), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn canonical_commutator_truncated() {
        // dense oracle: [a, a†] = I except the top Fock state
        let n = 6;
        let a = annihilation(n).unwrap().to_dense();
        let mut ad = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                ad[i * n + j] = a[j * n + i].conj();
            }
        }
        let aad = dense_mul(&a, &ad, n);
        let ada = dense_mul(&ad, &a, n);
        for i in 0..n {
            for j in 0..n {
                let c = aad[i * n + j] - ada[i * n + j];
                let expect = if i == j {
                    if i == n - 1 { -(n as f64) + 1.0 } else { 1.0 }
                } else {
                    0.0
                };
                assert!((c - C64::new(expect, 0.0)).norm() < 1e-12, "({i},{j}) = {c}");
            }
        }
        // the sparse route agrees
        let a_s = annihilation(n).unwrap();
        let comm = a_s.commutator(&a_s.adjoint()).unwrap();
        assert!((comm.get(n - 1, n - 1) - C64::new(1.0 - n as f64, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn ketbra_properties() {
        let sm = ketbra(2, 0, 1).unwrap();
        assert_eq!(sm.get(0, 1), ONE);
        assert_eq!(sm.nnz(), 1);
        assert_eq!(ketbra(4, 1, 3).unwrap().adjoint(), ketbra(4, 3, 1).unwrap());
        let mut sum = Operator::zeros(5);
        for m in 0..5 {
            sum = &sum + &ketbra(5, m, m).unwrap();
        }
        assert_eq!(sum, Operator::identity(5));
        assert!(matches!(ketbra(3, 3, 0), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn tensor_identities() {
        assert_eq!(tensor(&Operator::identity(2), &Operator::identity(3)), Operator::identity(6));
    }

    #[test]
    fn expectation_basics() {
        let vac = StateVector::basis(5, 0).unwrap();
        assert_eq!(vac.expectation(&number(5).unwrap()).unwrap(), ZERO);
        let n = number(40).unwrap();
        let rho = DensityMatrix::from_pure(&StateVector::coherent(40, C64::new(1.5, 0.0)));
        let e = rho.expectation(&n).unwrap();
        // Poisson mean |α₀|² = 2.25
        assert!((e.re - 2.25).abs() < 1e-6);
        assert!(e.im.abs() < 1e-12);
        assert!(matches!(
            rho.expectation(&number(5).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn partial_trace_product_and_entangled() {
        let spec = HilbertSpec::new(3, 2).unwrap();
        let rc = DensityMatrix::from_pure(&StateVector::coherent(3, C64::new(0.4, 0.2)));
        let rq = DensityMatrix::diagonal(&[0.3, 0.7]);
        let rho = rc.kron(&rq);
        let back_c = partial_trace(&rho, &spec, Subsystem::Cavity).unwrap();
        let back_q = partial_trace(&rho, &spec, Subsystem::Transmon).unwrap();
        for (x, y) in back_c.as_slice().iter().zip(rc.as_slice()) {
            assert!((x - y).norm() < 1e-12);
        }
        for (x, y) in back_q.as_slice().iter().zip(rq.as_slice()) {
            assert!((x - y).norm() < 1e-12);
        }

        let spec = HilbertSpec::new(2, 2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector::new(vec![C64::new(h, 0.0), ZERO, ZERO, C64::new(h, 0.0)]);
        let rho = DensityMatrix::from_pure(&bell);
        for keep in [Subsystem::Cavity, Subsystem::Transmon] {
            let red = partial_trace(&rho, &spec, keep).unwrap();
            assert!((red.trace() - rho.trace()).norm() < 1e-12);
            for (x, y) in red.as_slice().iter().zip(DensityMatrix::maximally_mixed(2).as_slice()) {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn spec_validation() {
        assert!(HilbertSpec::new(1, 2).is_err());
        assert!(HilbertSpec::new(2, 1).is_err());
        let s = HilbertSpec::new(7, 3).unwrap();
        assert_eq!(s.dim(), 21);
        assert_eq!(s.index(2, 1), 7);
    }
}
