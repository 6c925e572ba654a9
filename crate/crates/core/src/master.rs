//! Lindblad master equation: superoperator assembly, adaptive time evolution,
//! steady states and steady-state frequency sweeps.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{hermitize_in_place, DensityMatrix, HilbertSpec, Operator, QuantumState, C64};
use crate::meanfield::check_monotone;
use crate::models::{collapse_channels, LindbladChannel, Model, SystemOperators, SystemParams};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const MINUS_I: C64 = C64::new(0.0, -1.0);

/// Generator `ρ ↦ −i[H, ρ] + Σ_k (C_k ρ C_k† − ½{C_k†C_k, ρ})` acting on the
/// row-major vectorization of `ρ`.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    hilbert_dim: usize,
    matrix: Operator,
}

impl Liouvillian {
    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    /// Dimension of the superoperator, `d²`.
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &Operator {
        &self.matrix
    }

    /// `L(ρ)` for a density matrix.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let out = self.matrix.apply(rho.as_slice())?;
        DensityMatrix::from_row_major(self.hilbert_dim, out)
    }

    /// Assembles the superoperator for a model at the given cutoff.
    pub fn for_model(params: &SystemParams, model: Model, spec: &HilbertSpec) -> Result<Self> {
        let h = model.hamiltonian(params, spec)?;
        let channels = collapse_channels(params, spec)?;
        build_liouvillian(&h, &channels)
    }
}

/// Builds the Liouvillian from a Hamiltonian and Lindblad channels.
pub fn build_liouvillian(h: &Operator, channels: &[LindbladChannel]) -> Result<Liouvillian> {
    let d = h.dim();
    let mut entries: Vec<(usize, usize, C64)> = Vec::new();
    push_left(&mut entries, h, MINUS_I);
    push_right(&mut entries, h, -MINUS_I);

    for ch in channels {
        if ch.operator.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: ch.operator.dim() });
        }
        if ch.rate < 0.0 {
            return Err(Error::InvalidParameter { name: "rate", reason: format!("negative channel rate {}", ch.rate) });
        }
        if ch.rate == 0.0 {
            continue;
        }
        let c = ch.jump_operator();
        let ctc = &c.adjoint() * &c;
        for (r1, c1, v1) in c.triplets() {
            for (r2, c2, v2) in c.triplets() {
                entries.push((r1 * d + r2, c1 * d + c2, v1 * v2.conj()));
            }
        }
        push_left(&mut entries, &ctc, C64::new(-0.5, 0.0));
        push_right(&mut entries, &ctc, C64::new(-0.5, 0.0));
    }
    Ok(Liouvillian { hilbert_dim: d, matrix: Operator::from_triplets(d * d, entries) })
}

// vec(AρB) = (A ⊗ Bᵀ) vec(ρ) for the row-major vectorization.

/// Entries of `coeff · (op ⊗ I)`, i.e. `ρ ↦ coeff · op ρ`.
fn push_left(entries: &mut Vec<(usize, usize, C64)>, op: &Operator, coeff: C64) {
    let d = op.dim();
    for (r, c, v) in op.triplets() {
        for k in 0..d {
            entries.push((r * d + k, c * d + k, coeff * v));
        }
    }
}

/// Entries of `coeff · (I ⊗ opᵀ)`, i.e. `ρ ↦ coeff · ρ op`.
fn push_right(entries: &mut Vec<(usize, usize, C64)>, op: &Operator, coeff: C64) {
    let d = op.dim();
    for (r, c, v) in op.triplets() {
        for k in 0..d {
            entries.push((k * d + c, k * d + r, coeff * v));
        }
    }
}

/// Settings for [`evolve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub rtol: f64,
    pub atol: f64,
    /// First trial step; defaults to a fraction of the inverse generator norm.
    pub initial_step: Option<f64>,
    /// Steps shorter than this (relative to the span) abort the integration.
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-11, initial_step: None, min_step: 1e-14, max_steps: 50_000_000 }
    }
}

// Dormand–Prince 5(4) tableau; the generator is autonomous so the nodes are
// not needed.
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Integrates `dρ/dt = L(ρ)` with adaptive Dormand–Prince steps, returning
/// the state at each requested time. The state is re-hermitized after every
/// accepted step.
pub fn evolve(
    rho0: &DensityMatrix,
    l: &Liouvillian,
    times: &[f64],
    options: &EvolveOptions,
) -> Result<Vec<(f64, DensityMatrix)>> {
    let d = l.hilbert_dim();
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: rho0.dim() });
    }
    let tr = rho0.trace();
    if (tr - ONE).norm() > 1e-9 {
        return Err(Error::InvalidParameter { name: "rho0", reason: format!("trace {tr} differs from 1") });
    }
    if times.is_empty() {
        return Ok(Vec::new());
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter { name: "times", reason: "output times must be nondecreasing".into() });
    }

    let n = l.dim();
    let m = l.matrix();
    let span = (times[times.len() - 1] - times[0]).abs().max(f64::MIN_POSITIVE);
    let gen_norm = m.gershgorin_radius(ZERO).max(f64::MIN_POSITIVE);
    let mut h = options.initial_step.unwrap_or(0.01 / gen_norm).min(span);
    let h_min = options.min_step * span;

    let mut y = rho0.as_slice().to_vec();
    let mut t = times[0];
    let mut k: Vec<Vec<C64>> = vec![vec![ZERO; n]; 7];
    let mut stage = vec![ZERO; n];
    let mut y_new = vec![ZERO; n];
    m.apply_into(&y, &mut k[0]);

    let mut out = Vec::with_capacity(times.len());
    let mut steps = 0usize;
    for &target in times {
        while t < target {
            if steps >= options.max_steps {
                return Err(Error::StepUnderflow { time: t, step: h });
            }
            let h_try = h.min(target - t);
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(s) {
                        let a = DP_A[s][j];
                        if a != 0.0 {
                            acc += kj[i] * (a * h_try);
                        }
                    }
                    stage[i] = acc;
                }
                let (_, rest) = k.split_at_mut(s);
                m.apply_into(&stage, &mut rest[0]);
                if s == 6 {
                    y_new.copy_from_slice(&stage);
                }
            }
            let mut err2 = 0.0;
            for i in 0..n {
                let mut e = ZERO;
                for (j, kj) in k.iter().enumerate() {
                    if DP_E[j] != 0.0 {
                        e += kj[i] * DP_E[j];
                    }
                }
                let scale = options.atol + options.rtol * y[i].norm().max(y_new[i].norm());
                err2 += (e.norm() * h_try / scale).powi(2);
            }
            let err = (err2 / n as f64).sqrt();
            steps += 1;
            if err <= 1.0 {
                t += h_try;
                if target - t < 1e-15 * target.abs().max(1.0) {
                    t = target;
                }
                hermitize_in_place(&mut y_new, d);
                std::mem::swap(&mut y, &mut y_new);
                m.apply_into(&y, &mut k[0]);
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if h_try == h {
                    h *= grow;
                } else {
                    h = h.max(h_try * grow);
                }
            } else {
                h = h_try * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                if h < h_min {
                    return Err(Error::StepUnderflow { time: t, step: h });
                }
            }
        }
        out.push((target, DensityMatrix::from_row_major(d, y.clone())?));
    }
    Ok(out)
}

/// Bordered operator `[[L, u], [wᵀ, 0]]` with `u = vec(I)` and `w` the trace
/// functional; nonsingular exactly when the null space of `L` is
/// one-dimensional.
fn bordered(l: &Liouvillian) -> Result<SparseColMat<usize, C64>> {
    let d = l.hilbert_dim();
    let n = l.dim();
    let mut trips: Vec<Triplet<usize, usize, C64>> =
        l.matrix().triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
    for i in 0..d {
        trips.push(Triplet::new(i * d + i, n, ONE));
        trips.push(Triplet::new(n, i * d + i, ONE));
    }
    SparseColMat::try_new_from_triplets(n + 1, n + 1, &trips)
        .map_err(|e| Error::InvalidDimension(format!("sparse assembly failed: {e:?}")))
}

fn bordered_residual(l: &Liouvillian, x: &[C64]) -> Vec<C64> {
    let d = l.hilbert_dim();
    let n = l.dim();
    let mut r = vec![ZERO; n + 1];
    l.matrix().apply_into(&x[..n], &mut r[..n]);
    let lambda = x[n];
    let mut tr = ZERO;
    for i in 0..d {
        r[i * d + i] += lambda;
        tr += x[i * d + i];
    }
    r[n] = tr - ONE;
    r.iter_mut().for_each(|v| *v = -*v);
    r
}

/// Unique steady state `L(ρ) = 0`, `tr ρ = 1`, by sparse LU on the bordered
/// system with two rounds of iterative refinement.
pub fn steady_state(l: &Liouvillian) -> Result<DensityMatrix> {
    let d = l.hilbert_dim();
    let n = l.dim();
    let m = l.matrix();
    let mut col_used = vec![false; n];
    let mut empty_rows = 0usize;
    for r in 0..n {
        let mut any = false;
        for (c, _) in m.row(r) {
            col_used[c] = true;
            any = true;
        }
        if !any {
            empty_rows += 1;
        }
    }
    let empty_cols = col_used.iter().filter(|&&u| !u).count();
    // Each empty row (column) beyond the one the border can absorb leaves a
    // structurally singular system.
    if empty_rows.max(empty_cols) > 1 {
        return Err(Error::DegenerateNullSpace(format!(
            "{empty_rows} empty rows and {empty_cols} empty columns in the generator"
        )));
    }
    let a = bordered(l)?;
    let lu = std::panic::catch_unwind(|| a.sp_lu())
        .map_err(|_| Error::DegenerateNullSpace("sparse LU broke down".into()))?
        .map_err(|e| Error::DegenerateNullSpace(format!("sparse LU failed: {e:?}")))?;

    let mut rhs = Mat::<C64>::zeros(n + 1, 1);
    rhs[(n, 0)] = ONE;
    lu.solve_in_place(rhs.as_mut());
    let mut x: Vec<C64> = (0..=n).map(|i| rhs[(i, 0)]).collect();
    for _ in 0..2 {
        let r = bordered_residual(l, &x);
        let mut corr = Mat::<C64>::from_fn(n + 1, 1, |i, _| r[i]);
        lu.solve_in_place(corr.as_mut());
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += corr[(i, 0)];
        }
    }
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::DegenerateNullSpace("bordered system is singular".into()));
    }
    let scale = l.matrix().gershgorin_radius(ZERO).max(f64::MIN_POSITIVE);
    let x_norm = x[..n].iter().map(|v| v.norm()).fold(0.0, f64::max);
    if x[n].norm() > 1e-6 * scale * x_norm {
        return Err(Error::DegenerateNullSpace(format!("border multiplier {:e} is not zero", x[n].norm())));
    }

    x.truncate(n);
    let mut rho = DensityMatrix::from_row_major(d, x)?;
    rho.hermitize();
    rho.normalize_trace();
    let res = l.apply(&rho)?;
    let residual = res.as_slice().iter().map(|v| v.norm()).fold(0.0, f64::max) / (scale * x_norm.max(1e-300));
    if !(residual < 1e-9) {
        return Err(Error::NonConvergence { residual });
    }
    Ok(rho)
}

/// Initial state `|0⟩ ⊗ |g⟩`.
pub fn ground_state(spec: &HilbertSpec) -> DensityMatrix {
    DensityMatrix::basis(spec.dim(), spec.index(0, 0)).expect("index 0 is always valid")
}

/// Steady-state observables at one drive frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub alpha: C64,
    pub n_photon: f64,
    pub sigma_z: Option<f64>,
    pub sigma_minus: Option<C64>,
    pub transmon_populations: Vec<f64>,
}

pub fn observables(rho: &DensityMatrix, spec: &HilbertSpec) -> Result<Observables> {
    let ops = SystemOperators::new(spec)?;
    observables_with(rho, &ops)
}

pub(crate) fn observables_with(rho: &DensityMatrix, ops: &SystemOperators) -> Result<Observables> {
    Ok(Observables {
        alpha: rho.expectation(&ops.a)?,
        n_photon: rho.expectation(&ops.n)?.re,
        sigma_z: ops.sigma_z.as_ref().map(|op| rho.expectation(op).map(|v| v.re)).transpose()?,
        sigma_minus: ops.sigma_minus.as_ref().map(|op| rho.expectation(op)).transpose()?,
        transmon_populations: ops
            .projectors
            .iter()
            .map(|p| rho.expectation(p).map(|v| v.re))
            .collect::<Result<_>>()?,
    })
}

/// Steady state of a model at a fixed cutoff.
pub fn model_steady_state(params: &SystemParams, model: Model, cutoff: usize) -> Result<(HilbertSpec, DensityMatrix)> {
    let spec = model.space(cutoff)?;
    let l = Liouvillian::for_model(params, model, &spec)?;
    Ok((spec, steady_state(&l)?))
}

/// Fock cutoff selection for sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CutoffPolicy {
    Fixed(usize),
    /// Raise the cutoff by `step` from `start` until `⟨n⟩` changes by less
    /// than 0.5% between successive cutoffs, up to `max`.
    Auto { start: usize, step: usize, max: usize },
}

impl CutoffPolicy {
    pub fn auto() -> Self {
        CutoffPolicy::Auto { start: 20, step: 10, max: 120 }
    }
}

/// Steady state with its cutoff chosen by `policy`.
pub fn converged_steady_state(
    params: &SystemParams,
    model: Model,
    policy: CutoffPolicy,
) -> Result<(HilbertSpec, DensityMatrix)> {
    match policy {
        CutoffPolicy::Fixed(n) => model_steady_state(params, model, n),
        CutoffPolicy::Auto { start, step, max } => {
            let step = step.max(1);
            let mut prev = model_steady_state(params, model, start)?;
            let mut n_prev = observables(&prev.1, &prev.0)?.n_photon;
            let mut cutoff = start;
            while cutoff + step <= max {
                cutoff += step;
                let next = model_steady_state(params, model, cutoff)?;
                let n_next = observables(&next.1, &next.0)?.n_photon;
                let converged = (n_next - n_prev).abs() <= 0.005 * n_next.abs().max(1e-12);
                prev = next;
                n_prev = n_next;
                if converged {
                    break;
                }
            }
            Ok(prev)
        }
    }
}

/// Steady-state observables across a drive-frequency grid. Columns that a
/// model does not define are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Drive frequencies (rad/s).
    pub frequencies: Vec<f64>,
    pub alpha: Vec<C64>,
    pub amp_a: Vec<f64>,
    pub n_photon: Option<Vec<f64>>,
    pub sigma_z: Option<Vec<f64>>,
    pub amp_sm: Option<Vec<f64>>,
    /// One array per transmon level.
    pub transmon_populations: Vec<Vec<f64>>,
    /// Fock cutoff used at each point, for master-equation sweeps.
    pub cutoffs: Option<Vec<usize>>,
    /// Per-point failure messages for sweeps that isolate errors.
    pub errors: Vec<Option<String>>,
}

impl SweepResult {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }
}

/// Steady-state observables of `model` at every grid frequency (rad/s).
pub fn transmission_sweep(
    params: &SystemParams,
    model: Model,
    frequencies: &[f64],
    policy: CutoffPolicy,
) -> Result<SweepResult> {
    check_monotone(frequencies)?;
    params.validate()?;
    let points: Vec<(usize, Observables)> = frequencies
        .par_iter()
        .map(|&w| {
            let p = params.with_drive_frequency(w);
            let (spec, rho) = converged_steady_state(&p, model, policy)?;
            Ok((spec.cavity_cutoff(), observables(&rho, &spec)?))
        })
        .collect::<Result<_>>()?;

    let levels = points.first().map(|p| p.1.transmon_populations.len()).unwrap_or(0);
    let has_qubit = points.first().is_some_and(|p| p.1.sigma_z.is_some());
    Ok(SweepResult {
        frequencies: frequencies.to_vec(),
        alpha: points.iter().map(|p| p.1.alpha).collect(),
        amp_a: points.iter().map(|p| p.1.alpha.norm()).collect(),
        n_photon: Some(points.iter().map(|p| p.1.n_photon).collect()),
        sigma_z: has_qubit.then(|| points.iter().map(|p| p.1.sigma_z.unwrap_or(f64::NAN)).collect()),
        amp_sm: has_qubit
            .then(|| points.iter().map(|p| p.1.sigma_minus.map_or(f64::NAN, |s| s.norm())).collect()),
        transmon_populations: (0..levels)
            .map(|j| points.iter().map(|p| p.1.transmon_populations[j]).collect())
            .collect(),
        cutoffs: Some(points.iter().map(|p| p.0).collect()),
        errors: vec![None; frequencies.len()],
    })
}
