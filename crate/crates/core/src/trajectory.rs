//! Diffusive stochastic Schrödinger trajectories, bright/dim/dark labeling,
//! switching statistics and ensembles.
//!
//! Time is dimensionless `τ = 2κt` throughout. The excitation-conserving part
//! of the Hamiltonian (detunings and the transmon coupling) is applied exactly
//! on its small blocks in a symmetric split; the drive and the Lindblad
//! channels are integrated by the stochastic scheme.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{expectation, HilbertSpec, Operator, QuantumState, StateVector, C64};
use crate::models::{collapse_channels, Model, SystemOperators, SystemParams};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Predictor-corrector with trapezoidal drift.
    Weak2,
    /// Euler–Maruyama.
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unraveling {
    /// Complex noise `dξ = (dW₁ + i dW₂)/√2` per channel.
    Heterodyne,
    /// Real noise per channel, measuring the quadrature `C e^{−iθ} + h.c.`.
    Homodyne { phase: f64 },
}

#[derive(Debug, Clone)]
pub struct SseOptions {
    /// Duration in units of `1/(2κ)`.
    pub t_max: f64,
    /// Step in units of `1/(2κ)`.
    pub dt: f64,
    pub scheme: Scheme,
    pub unraveling: Unraveling,
    /// Record observables every this many steps.
    pub record_every: usize,
    pub snapshot_every: Option<usize>,
    /// Largest tolerated `|‖ψ‖ − 1|` of a raw step before renormalization.
    pub max_norm_drift: f64,
    /// Defaults to the ground state `|0, g⟩`.
    pub initial: Option<StateVector>,
}

impl SseOptions {
    pub fn new(t_max: f64, dt: f64) -> Self {
        Self {
            t_max,
            dt,
            scheme: Scheme::Weak2,
            unraveling: Unraveling::Heterodyne,
            record_every: 1,
            snapshot_every: None,
            max_norm_drift: 0.25,
            initial: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter { name: "dt", reason: format!("must be positive, got {}", self.dt) });
        }
        if !(self.t_max.is_finite() && self.t_max >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "t_max",
                reason: format!("must be nonnegative, got {}", self.t_max),
            });
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter { name: "record_every", reason: "must be at least 1".into() });
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::InvalidParameter { name: "snapshot_every", reason: "must be at least 1".into() });
        }
        if !(self.max_norm_drift > 0.0) {
            return Err(Error::InvalidParameter { name: "max_norm_drift", reason: "must be positive".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub stream: u64,
    /// `2κt`.
    pub times: Vec<f64>,
    pub n_photon: Vec<f64>,
    pub sigma_z: Option<Vec<f64>>,
    pub sigma_minus: Option<Vec<C64>>,
    pub alpha: Vec<C64>,
    pub snapshots: Vec<(f64, StateVector)>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

struct Block {
    indices: Vec<usize>,
    /// Row-major `exp(−i H₀ dt/2)` restricted to the block.
    propagator: Vec<C64>,
}

/// A model prepared for trajectory integration at a fixed step.
pub struct SseSystem {
    spec: HilbertSpec,
    ops: SystemOperators,
    blocks: Vec<Block>,
    /// `−i H_rest − ½ Σ C†C`.
    generator: Operator,
    jumps: Vec<Operator>,
    homodyne: bool,
    dt: f64,
    max_rate: f64,
}

impl SseSystem {
    pub fn new(params: &SystemParams, model: Model, cutoff: usize, dt: f64, unraveling: Unraveling) -> Result<Self> {
        params.validate()?;
        if !(params.kappa > 0.0) {
            return Err(Error::InvalidParameter { name: "kappa", reason: "trajectories are timed in 2κt".into() });
        }
        let spec = model.space(cutoff)?;
        let scale = 1.0 / (2.0 * params.kappa);
        let h = model.hamiltonian(params, &spec)?.scale_real(scale);
        let levels = spec.transmon_levels();
        let excitation = |i: usize| i / levels + i % levels;

        let (mut conserving, mut rest) = (Vec::new(), Vec::new());
        for (r, c, v) in h.triplets() {
            if excitation(r) == excitation(c) {
                conserving.push((r, c, v));
            } else {
                rest.push((r, c, v));
            }
        }
        let blocks = exact_blocks(spec.dim(), &conserving, excitation, dt)?;
        let h_rest = Operator::from_triplets(spec.dim(), rest);

        let rotation = match unraveling {
            Unraveling::Heterodyne => C64::new(1.0, 0.0),
            Unraveling::Homodyne { phase } => C64::from_polar(1.0, -phase),
        };
        let jumps: Vec<Operator> = collapse_channels(params, &spec)?
            .into_iter()
            .filter(|ch| ch.rate > 0.0)
            .map(|ch| ch.jump_operator().scale(rotation * scale.sqrt()))
            .collect();
        let mut loss = Operator::zeros(spec.dim());
        for c in &jumps {
            loss = &loss + &(&c.adjoint() * c);
        }
        let generator = &h_rest.scale(-I) - &loss.scale_real(0.5);
        let max_rate = h_rest.gershgorin_radius(C64::new(0.0, 0.0)) + 0.5 * loss.gershgorin_radius(C64::new(0.0, 0.0));
        if dt * max_rate >= 0.1 {
            return Err(Error::StepTooLarge(dt * max_rate));
        }
        let ops = SystemOperators::new(&spec)?;
        Ok(Self {
            spec,
            ops,
            blocks,
            generator,
            jumps,
            homodyne: matches!(unraveling, Unraveling::Homodyne { .. }),
            dt,
            max_rate,
        })
    }

    pub fn spec(&self) -> &HilbertSpec {
        &self.spec
    }

    /// Gershgorin bound on the explicitly integrated generator, in units of 2κ.
    pub fn max_rate(&self) -> f64 {
        self.max_rate
    }

    pub fn run(&self, seed: u64, stream: u64, opts: &SseOptions) -> Result<TrajectoryRecord> {
        opts.validate()?;
        if (opts.dt - self.dt).abs() > 1e-15 * self.dt {
            return Err(Error::InvalidParameter { name: "dt", reason: "differs from the prepared step".into() });
        }
        let d = self.spec.dim();
        let mut psi = match &opts.initial {
            Some(s) if s.dim() != d => return Err(Error::DimensionMismatch { expected: d, got: s.dim() }),
            Some(s) => {
                let mut s = s.clone();
                s.normalize();
                s
            }
            None => StateVector::basis(d, 0)?,
        };
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);

        let steps = (opts.t_max / opts.dt).round() as usize;
        let mut rec = TrajectoryRecord {
            seed,
            stream,
            times: Vec::new(),
            n_photon: Vec::new(),
            sigma_z: self.ops.sigma_z.as_ref().map(|_| Vec::new()),
            sigma_minus: self.ops.sigma_minus.as_ref().map(|_| Vec::new()),
            alpha: Vec::new(),
            snapshots: Vec::new(),
        };
        self.record(&psi, 0.0, &mut rec)?;
        if opts.snapshot_every.is_some() {
            rec.snapshots.push((0.0, psi.clone()));
        }

        let mut work = Workspace::new(d, self.jumps.len());
        let mut noise = vec![C64::new(0.0, 0.0); self.jumps.len()];
        for step in 1..=steps {
            self.apply_blocks(psi.amplitudes_mut(), &mut work.tmp);
            self.draw_noise(&mut rng, &mut noise);
            let drift = self.stochastic_step(psi.amplitudes_mut(), &noise, opts.scheme, &mut work);
            if !(drift <= opts.max_norm_drift) {
                return Err(Error::NormDrift { drift, step, limit: opts.max_norm_drift });
            }
            psi.normalize();
            self.apply_blocks(psi.amplitudes_mut(), &mut work.tmp);
            let t = step as f64 * opts.dt;
            if step % opts.record_every == 0 {
                self.record(&psi, t, &mut rec)?;
            }
            if let Some(every) = opts.snapshot_every {
                if step % every == 0 {
                    rec.snapshots.push((t, psi.clone()));
                }
            }
        }
        Ok(rec)
    }

    fn record(&self, psi: &StateVector, t: f64, rec: &mut TrajectoryRecord) -> Result<()> {
        rec.times.push(t);
        rec.n_photon.push(expectation(psi, &self.ops.n)?.re.max(0.0));
        rec.alpha.push(expectation(psi, &self.ops.a)?);
        if let (Some(op), Some(v)) = (&self.ops.sigma_z, rec.sigma_z.as_mut()) {
            v.push(expectation(psi, op)?.re);
        }
        if let (Some(op), Some(v)) = (&self.ops.sigma_minus, rec.sigma_minus.as_mut()) {
            v.push(expectation(psi, op)?);
        }
        Ok(())
    }

    fn apply_blocks(&self, psi: &mut [C64], tmp: &mut [C64]) {
        for b in &self.blocks {
            let k = b.indices.len();
            if k == 1 {
                psi[b.indices[0]] *= b.propagator[0];
                continue;
            }
            for (r, t) in tmp.iter_mut().take(k).enumerate() {
                *t = b.indices.iter().enumerate().map(|(c, &j)| b.propagator[r * k + c] * psi[j]).sum();
            }
            for (r, &i) in b.indices.iter().enumerate() {
                psi[i] = tmp[r];
            }
        }
    }

    fn draw_noise(&self, rng: &mut ChaCha20Rng, noise: &mut [C64]) {
        let sd = self.dt.sqrt();
        for z in noise.iter_mut() {
            let x: f64 = StandardNormal.sample(rng);
            *z = if self.homodyne {
                C64::new(x * sd, 0.0)
            } else {
                let y: f64 = StandardNormal.sample(rng);
                C64::new(x, y) * (sd * std::f64::consts::FRAC_1_SQRT_2)
            };
        }
    }

    /// Fills `work.cpsi`, the channel means and the drift at `psi`.
    fn evaluate(&self, psi: &[C64], work: &mut Workspace, drift: &mut [C64]) {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        self.generator.apply_into(psi, drift);
        for (k, c) in self.jumps.iter().enumerate() {
            let cpsi = &mut work.cpsi[k];
            c.apply_into(psi, cpsi);
            let e: C64 = psi.iter().zip(cpsi.iter()).map(|(p, q)| p.conj() * q).sum::<C64>() / norm2;
            // Heterodyne: ⟨C†⟩Cψ − ½|⟨C⟩|²ψ; homodyne: ½⟨x⟩Cψ − ⅛⟨x⟩²ψ.
            let (coef, shift, mean) = if self.homodyne {
                let x = 2.0 * e.re;
                (C64::new(0.5 * x, 0.0), 0.125 * x * x, C64::new(0.5 * x, 0.0))
            } else {
                (e.conj(), 0.5 * e.norm_sqr(), e)
            };
            work.means[k] = mean;
            for ((dv, &cv), &pv) in drift.iter_mut().zip(cpsi.iter()).zip(psi) {
                *dv += coef * cv - pv * shift;
            }
        }
    }

    /// Adds `Σ (C_k − m_k)ψ dW_k` for the state last passed to `evaluate`.
    fn add_noise(&self, psi_eval: &[C64], work: &Workspace, noise: &[C64], out: &mut [C64]) {
        for (k, &dw) in noise.iter().enumerate() {
            let m = work.means[k];
            for ((o, &cv), &pv) in out.iter_mut().zip(&work.cpsi[k]).zip(psi_eval) {
                *o += (cv - m * pv) * dw;
            }
        }
    }

    /// One step of the dissipative and drive part; returns the raw norm drift.
    fn stochastic_step(&self, psi: &mut [C64], noise: &[C64], scheme: Scheme, work: &mut Workspace) -> f64 {
        let dt = self.dt;
        let mut a0 = std::mem::take(&mut work.a0);
        self.evaluate(psi, work, &mut a0);
        let mut kick = std::mem::take(&mut work.kick);
        kick.iter_mut().for_each(|k| *k = C64::new(0.0, 0.0));
        self.add_noise(psi, work, noise, &mut kick);
        let mut next = std::mem::take(&mut work.next);
        for (i, n) in next.iter_mut().enumerate() {
            *n = psi[i] + a0[i] * dt + kick[i];
        }
        if scheme == Scheme::Weak2 {
            // Noise from the start point, drift averaged with the predictor.
            let mut a1 = std::mem::take(&mut work.a1);
            self.evaluate(&next, work, &mut a1);
            for (i, n) in next.iter_mut().enumerate() {
                *n = psi[i] + (a0[i] + a1[i]) * (0.5 * dt) + kick[i];
            }
            work.a1 = a1;
        }
        work.kick = kick;
        psi.copy_from_slice(&next);
        work.a0 = a0;
        work.next = next;
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        (norm - 1.0).abs()
    }
}

struct Workspace {
    cpsi: Vec<Vec<C64>>,
    means: Vec<C64>,
    a0: Vec<C64>,
    a1: Vec<C64>,
    next: Vec<C64>,
    kick: Vec<C64>,
    tmp: Vec<C64>,
}

impl Workspace {
    fn new(d: usize, channels: usize) -> Self {
        let z = C64::new(0.0, 0.0);
        Self {
            cpsi: vec![vec![z; d]; channels],
            means: vec![z; channels],
            a0: vec![z; d],
            a1: vec![z; d],
            next: vec![z; d],
            kick: vec![z; d],
            tmp: vec![z; d],
        }
    }
}

fn exact_blocks(
    dim: usize,
    entries: &[(usize, usize, C64)],
    excitation: impl Fn(usize) -> usize,
    dt: f64,
) -> Result<Vec<Block>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..dim {
        let e = excitation(i);
        if groups.len() <= e {
            groups.resize(e + 1, Vec::new());
        }
        groups[e].push(i);
    }
    let mut local = vec![(usize::MAX, 0usize); dim];
    for (g, idx) in groups.iter().enumerate() {
        for (p, &i) in idx.iter().enumerate() {
            local[i] = (g, p);
        }
    }
    let mut dense: Vec<Vec<C64>> = groups.iter().map(|g| vec![C64::new(0.0, 0.0); g.len() * g.len()]).collect();
    for &(r, c, v) in entries {
        let (g, pr) = local[r];
        let (_, pc) = local[c];
        let k = groups[g].len();
        dense[g][pr * k + pc] += v;
    }
    let mut blocks = Vec::with_capacity(groups.len());
    for (indices, h) in groups.into_iter().zip(dense) {
        let k = indices.len();
        if k == 0 {
            continue;
        }
        let propagator = if k == 1 {
            vec![(-I * h[0].re * (0.5 * dt)).exp()]
        } else {
            let m = faer::Mat::<C64>::from_fn(k, k, |i, j| (h[i * k + j] + h[j * k + i].conj()) * 0.5);
            let eig = m
                .self_adjoint_eigen(faer::Side::Lower)
                .map_err(|e| Error::InvalidParameter { name: "hamiltonian", reason: format!("{e:?}") })?;
            let u = eig.U();
            let s = eig.S().column_vector();
            let phases: Vec<C64> = (0..k).map(|j| (-I * s[j].re * (0.5 * dt)).exp()).collect();
            let mut out = vec![C64::new(0.0, 0.0); k * k];
            for r in 0..k {
                for c in 0..k {
                    out[r * k + c] = (0..k).map(|j| u[(r, j)] * phases[j] * u[(c, j)].conj()).sum();
                }
            }
            out
        };
        blocks.push(Block { indices, propagator });
    }
    Ok(blocks)
}

/// Single trajectory on generator stream 0 of `seed`.
pub fn sse_simulate(
    params: &SystemParams,
    model: Model,
    cutoff: usize,
    seed: u64,
    opts: &SseOptions,
) -> Result<TrajectoryRecord> {
    opts.validate()?;
    SseSystem::new(params, model, cutoff, opts.dt, opts.unraveling)?.run(seed, 0, opts)
}

// ---------------------------------------------------------------------------
// Labeling and switching statistics

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateLabel {
    Bright,
    Dim,
    Dark,
    Transit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Below this smoothed `⟨n⟩`, with `⟨σz⟩ > 0`, the low branch is dark.
    pub dark: f64,
    /// Dim/bright boundary in `⟨n⟩`.
    pub dim_bright: f64,
    /// Relative half-width of the hysteresis band around `dim_bright`.
    pub hysteresis: f64,
    /// Moving-average window in units of `1/(2κ)`.
    pub smoothing: f64,
}

impl Thresholds {
    pub fn new(dark: f64, dim_bright: f64) -> Self {
        Self { dark, dim_bright, hysteresis: 0.2, smoothing: 1.0 }
    }

    /// Boundary at the geometric mean of the two peak photon numbers.
    pub fn from_peaks(n_dim: f64, n_bright: f64) -> Self {
        Self::new(0.15, (n_dim * n_bright).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.dark, self.dim_bright, self.hysteresis, self.smoothing].iter().all(|v| v.is_finite())
            && self.dark >= 0.0
            && (0.0..1.0).contains(&self.hysteresis)
            && self.smoothing >= 0.0
            && self.dark < self.dim_bright * (1.0 - self.hysteresis);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidThresholds(format!(
                "need 0 <= dark < dim_bright*(1-hysteresis), hysteresis in [0,1), smoothing >= 0; got {self:?}"
            )))
        }
    }

    fn window(&self, times: &[f64]) -> usize {
        let spacing = if times.len() > 1 { times[1] - times[0] } else { 1.0 };
        ((self.smoothing / spacing).round() as usize).max(1)
    }
}

/// Centered moving average over `w` samples (shrinking at the edges).
pub fn moving_average(x: &[f64], w: usize) -> Vec<f64> {
    let n = x.len();
    let mut prefix = vec![0.0; n + 1];
    for (i, v) in x.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    let lo_half = (w - 1) / 2;
    let hi_half = w / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(lo_half);
            let hi = (i + hi_half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Hysteresis labels on the smoothed photon number. Samples inside the band
/// that lead up to a completed crossing are tagged as transit.
pub fn label_states(record: &TrajectoryRecord, thresholds: &Thresholds) -> Result<Vec<StateLabel>> {
    thresholds.validate()?;
    let n = record.n_photon.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let w = thresholds.window(&record.times);
    let ns = moving_average(&record.n_photon, w);
    let sz = record.sigma_z.as_ref().map(|s| moving_average(s, w));
    let up = thresholds.dim_bright * (1.0 + thresholds.hysteresis);
    let down = thresholds.dim_bright * (1.0 - thresholds.hysteresis);

    let mut high = vec![false; n];
    let mut state = ns[0] >= thresholds.dim_bright;
    for i in 0..n {
        if state && ns[i] < down {
            state = false;
        } else if !state && ns[i] > up {
            state = true;
        }
        high[i] = state;
    }
    let mut labels: Vec<StateLabel> = (0..n)
        .map(|i| {
            if high[i] {
                StateLabel::Bright
            } else if ns[i] < thresholds.dark && sz.as_ref().is_some_and(|s| s[i] > 0.0) {
                StateLabel::Dark
            } else {
                StateLabel::Dim
            }
        })
        .collect();
    let mut last_switch = 0;
    for s in 1..n {
        if high[s] != high[s - 1] {
            let mut j = s;
            while j > last_switch && ns[j - 1] > down && ns[j - 1] < up {
                labels[j - 1] = StateLabel::Transit;
                j -= 1;
            }
            last_switch = s;
        }
    }
    Ok(labels)
}

#[derive(Debug, Clone, Serialize)]
pub struct SwitchingStats {
    pub labels: Vec<StateLabel>,
    /// Dwell times in units of `1/(2κ)`; runs cut by the record ends are included.
    pub dwell_bright: Vec<f64>,
    pub dwell_dim: Vec<f64>,
    pub dwell_dark: Vec<f64>,
    pub n_switches: usize,
    /// Pearson correlation of bright-side indicators of the smoothed `⟨n⟩`
    /// and `⟨σz⟩` series, over the non-dark samples.
    pub simultaneity: Option<f64>,
    pub insufficient_statistics: bool,
}

/// Branch per sample (true for bright); transit samples keep the branch
/// they are leaving.
fn branches(labels: &[StateLabel]) -> Vec<bool> {
    let first = labels.iter().find(|l| **l != StateLabel::Transit).copied();
    let mut cur = first == Some(StateLabel::Bright);
    labels
        .iter()
        .map(|l| {
            match l {
                StateLabel::Bright => cur = true,
                StateLabel::Dim | StateLabel::Dark => cur = false,
                StateLabel::Transit => {}
            }
            cur
        })
        .collect()
}

fn runs<T: PartialEq + Copy>(xs: &[T]) -> Vec<(T, usize)> {
    let mut out: Vec<(T, usize)> = Vec::new();
    for &x in xs {
        match out.last_mut() {
            Some((v, c)) if *v == x => *c += 1,
            _ => out.push((x, 1)),
        }
    }
    out
}

pub fn switching_stats(
    record: &TrajectoryRecord,
    labels: &[StateLabel],
    thresholds: &Thresholds,
) -> Result<SwitchingStats> {
    thresholds.validate()?;
    if labels.len() != record.len() {
        return Err(Error::DimensionMismatch { expected: record.len(), got: labels.len() });
    }
    let spacing = if record.len() > 1 { record.times[1] - record.times[0] } else { 0.0 };
    let branch = branches(labels);
    let branch_runs = runs(&branch);
    let mut dwell_bright = Vec::new();
    let mut dwell_dim = Vec::new();
    for &(b, c) in &branch_runs {
        if b { &mut dwell_bright } else { &mut dwell_dim }.push(c as f64 * spacing);
    }
    let dark_flags: Vec<bool> = labels.iter().map(|l| *l == StateLabel::Dark).collect();
    let dwell_dark = runs(&dark_flags).into_iter().filter(|r| r.0).map(|r| r.1 as f64 * spacing).collect();

    let w = thresholds.window(&record.times);
    // Each series is cut halfway between its bright and dim medians; dark
    // excursions (qubit up, cavity empty) would otherwise dominate σz.
    let simultaneity = record.sigma_z.as_ref().and_then(|s| {
        let cavity = branch_indicator(&moving_average(&record.n_photon, w), labels)?;
        let qubit = branch_indicator(&moving_average(s, w), labels)?;
        pearson(&cavity, &qubit)
    });
    Ok(SwitchingStats {
        labels: labels.to_vec(),
        dwell_bright,
        dwell_dim,
        dwell_dark,
        n_switches: branch_runs.len().saturating_sub(1),
        simultaneity,
        insufficient_statistics: branch_runs.len() < 2,
    })
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 0 { 0.5 * (v[m - 1] + v[m]) } else { v[m] })
}

/// Indicator of the bright side of the midpoint between the bright and dim
/// medians of `x`, over bright, dim and transit samples.
fn branch_indicator(x: &[f64], labels: &[StateLabel]) -> Option<Vec<f64>> {
    let pick = |want: StateLabel| median(x.iter().zip(labels).filter(|(_, l)| **l == want).map(|(v, _)| *v).collect());
    let (bright, dim) = (pick(StateLabel::Bright)?, pick(StateLabel::Dim)?);
    let mid = 0.5 * (bright + dim);
    let up = bright > dim;
    Some(
        x.iter()
            .zip(labels)
            .filter(|(_, l)| **l != StateLabel::Dark)
            .map(|(&v, _)| if (v > mid) == up { 1.0 } else { 0.0 })
            .collect(),
    )
}

/// Pearson correlation; `None` when either series is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (dx, dy) = (x[i] - mx, y[i] - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

// ---------------------------------------------------------------------------
// Ensembles

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleSummary {
    pub base_seed: u64,
    pub trajectories: usize,
    pub times: Vec<f64>,
    pub mean_n: Vec<f64>,
    pub se_n: Vec<f64>,
    pub mean_sigma_z: Option<Vec<f64>>,
    pub se_sigma_z: Option<Vec<f64>>,
    pub mean_alpha: Vec<C64>,
    /// `|E⟨a⟩|`.
    pub abs_mean_alpha: Vec<f64>,
    /// `E|⟨a⟩|`.
    pub mean_abs_alpha: Vec<f64>,
}

pub struct Ensemble {
    pub records: Vec<TrajectoryRecord>,
    pub summary: EnsembleSummary,
}

fn mean_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, f64::NAN);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl EnsembleSummary {
    pub fn from_records(base_seed: u64, records: &[TrajectoryRecord]) -> Result<Self> {
        let first = records.first().ok_or(Error::InvalidParameter {
            name: "trajectories",
            reason: "need at least one trajectory".into(),
        })?;
        let len = first.len();
        if let Some(r) = records.iter().find(|r| r.len() != len) {
            return Err(Error::DimensionMismatch { expected: len, got: r.len() });
        }
        let m = records.len() as f64;
        let (mean_n, se_n) = (0..len).map(|t| mean_se(records.iter().map(move |r| r.n_photon[t]))).unzip();
        let (mean_sigma_z, se_sigma_z) = if records.iter().all(|r| r.sigma_z.is_some()) {
            let (a, b): (Vec<f64>, Vec<f64>) = (0..len)
                .map(|t| mean_se(records.iter().map(move |r| r.sigma_z.as_ref().map_or(0.0, |s| s[t]))))
                .unzip();
            (Some(a), Some(b))
        } else {
            (None, None)
        };
        let mean_alpha: Vec<C64> = (0..len).map(|t| records.iter().map(|r| r.alpha[t]).sum::<C64>() / m).collect();
        Ok(Self {
            base_seed,
            trajectories: records.len(),
            times: first.times.clone(),
            mean_n,
            se_n,
            mean_sigma_z,
            se_sigma_z,
            abs_mean_alpha: mean_alpha.iter().map(|a| a.norm()).collect(),
            mean_abs_alpha: (0..len).map(|t| records.iter().map(|r| r.alpha[t].norm()).sum::<f64>() / m).collect(),
            mean_alpha,
        })
    }
}

/// `m` trajectories on streams `0..m` of `base_seed`, run in parallel.
pub fn ensemble_run(
    params: &SystemParams,
    model: Model,
    cutoff: usize,
    m: usize,
    base_seed: u64,
    opts: &SseOptions,
) -> Result<Ensemble> {
    if m == 0 {
        return Err(Error::InvalidParameter { name: "trajectories", reason: "need at least one trajectory".into() });
    }
    opts.validate()?;
    let system = SseSystem::new(params, model, cutoff, opts.dt, opts.unraveling)?;
    let records = (0..m as u64)
        .into_par_iter()
        .map(|i| system.run(base_seed, i, opts))
        .collect::<Result<Vec<_>>>()?;
    let summary = EnsembleSummary::from_records(base_seed, &records)?;
    Ok(Ensemble { records, summary })
}

/// Mean of per-trajectory time averages of `⟨n⟩` over `τ ≥ t_from`, with the
/// standard error across trajectories.
pub fn window_mean_n(records: &[TrajectoryRecord], t_from: f64) -> Result<(f64, f64)> {
    let averages: Vec<f64> = records
        .iter()
        .map(|r| {
            let vals: Vec<f64> =
                r.times.iter().zip(&r.n_photon).filter(|(t, _)| **t >= t_from).map(|(_, n)| *n).collect();
            if vals.is_empty() {
                f64::NAN
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        })
        .collect();
    if averages.is_empty() || averages.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter { name: "t_from", reason: "window holds no samples".into() });
    }
    Ok(mean_se(averages.iter().copied()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::DensityMatrix;
    use crate::master::{evolve, steady_state, EvolveOptions, Liouvillian};

    fn small_params() -> SystemParams {
        SystemParams {
            omega_c: 0.0,
            omega_q: -8.0,
            g: 1.5,
            chi: 0.0,
            eps_d: 1.2,
            omega_d: 0.3,
            kappa: 0.5,
            gamma: 0.2,
            gamma_phi: 0.05,
            temperature: 0.0,
        }
    }

    fn square_record(levels: &[(f64, usize)], spacing: f64) -> TrajectoryRecord {
        let n_photon: Vec<f64> = levels.iter().flat_map(|&(v, c)| std::iter::repeat_n(v, c)).collect();
        let sigma_z = n_photon.iter().map(|&n| if n > 5.0 { -0.1 } else { -0.9 }).collect();
        TrajectoryRecord {
            seed: 0,
            stream: 0,
            times: (0..n_photon.len()).map(|i| i as f64 * spacing).collect(),
            alpha: vec![C64::new(0.0, 0.0); n_photon.len()],
            sigma_minus: None,
            sigma_z: Some(sigma_z),
            n_photon,
            snapshots: Vec::new(),
        }
    }

    #[test]
    fn undriven_lossless_run_conserves_energy() {
        let mut p = small_params();
        p.eps_d = 0.0;
        p.gamma = 0.0;
        p.gamma_phi = 0.0;
        // κ only fixes the time unit; remove the cavity channel by hand.
        let spec = Model::Jc.space(8).unwrap();
        let sys = SseSystem::new(&p, Model::Jc, 8, 1e-3, Unraveling::Heterodyne).unwrap();
        let sys = SseSystem { jumps: Vec::new(), generator: Operator::zeros(spec.dim()), ..sys };
        let h = Model::Jc.hamiltonian(&p, &spec).unwrap();
        let mut psi0 = StateVector::coherent(8, C64::new(0.8, 0.3)).kron(&StateVector::new(vec![
            C64::new(0.6, 0.0),
            C64::new(0.0, 0.8),
        ]));
        psi0.normalize();
        let mut opts = SseOptions::new(2.0, 1e-3);
        opts.initial = Some(psi0.clone());
        opts.snapshot_every = Some(500);
        let rec = sys.run(1, 0, &opts).unwrap();
        let e0 = expectation(&psi0, &h).unwrap().re;
        for (_, s) in &rec.snapshots {
            assert!((expectation(s, &h).unwrap().re - e0).abs() < 1e-10 * e0.abs().max(1.0));
            assert!((s.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn driven_unitary_matches_master_evolution() {
        // No channels: the split step against the adaptive master integrator.
        let p = small_params();
        let spec = Model::Jc.space(10).unwrap();
        let sys = SseSystem::new(&p, Model::Jc, 10, 2e-3, Unraveling::Heterodyne).unwrap();
        let h = Model::Jc.hamiltonian(&p, &spec).unwrap();
        let sys = SseSystem {
            jumps: Vec::new(),
            generator: {
                let h_rest = {
                    let levels = spec.transmon_levels();
                    let ex = |i: usize| i / levels + i % levels;
                    Operator::from_triplets(
                        spec.dim(),
                        h.triplets().filter(|(r, c, _)| ex(*r) != ex(*c)).map(|(r, c, v)| (r, c, v / (2.0 * p.kappa))),
                    )
                };
                h_rest.scale(-I)
            },
            ..sys
        };
        let mut opts = SseOptions::new(1.0, 2e-3);
        opts.snapshot_every = Some(500);
        let rec = sys.run(1, 0, &opts).unwrap();
        let (_, psi) = rec.snapshots.last().unwrap();

        let l = Liouvillian::for_model(&SystemParams { kappa: 0.0, gamma: 0.0, gamma_phi: 0.0, ..p }, Model::Jc, &spec)
            .unwrap();
        let t_phys = 1.0 / (2.0 * p.kappa);
        let rho = evolve(&DensityMatrix::basis(spec.dim(), 0).unwrap(), &l, &[0.0, t_phys], &EvolveOptions::default())
            .unwrap()
            .pop()
            .unwrap()
            .1;
        let dist = DensityMatrix::from_pure(psi).trace_distance(&rho).unwrap();
        assert!(dist < 1e-5, "trace distance {dist}");
    }

    #[test]
    fn identical_seeds_give_identical_records() {
        let p = small_params();
        let opts = SseOptions::new(2.0, 2e-3);
        let a = sse_simulate(&p, Model::Jc, 8, 42, &opts).unwrap();
        let b = sse_simulate(&p, Model::Jc, 8, 42, &opts).unwrap();
        let c = sse_simulate(&p, Model::Jc, 8, 43, &opts).unwrap();
        assert_eq!(a.n_photon, b.n_photon);
        assert_eq!(a.alpha, b.alpha);
        assert_ne!(a.n_photon, c.n_photon);
    }

    #[test]
    fn state_stays_normalized_and_observables_bounded() {
        let p = small_params();
        let mut opts = SseOptions::new(3.0, 2e-3);
        opts.snapshot_every = Some(1);
        opts.scheme = Scheme::Euler;
        let rec = sse_simulate(&p, Model::Jc, 8, 7, &opts).unwrap();
        assert!(rec.snapshots.iter().all(|(_, s)| (s.norm() - 1.0).abs() < 1e-9));
        assert!(rec.n_photon.iter().all(|&n| n >= 0.0));
        assert!(rec.sigma_z.unwrap().iter().all(|&s| s.abs() <= 1.0 + 1e-9));
    }

    #[test]
    fn oversized_step_is_rejected() {
        let p = small_params();
        let err = sse_simulate(&p, Model::Jc, 8, 1, &SseOptions::new(1.0, 0.5)).unwrap_err();
        assert!(matches!(err, Error::StepTooLarge(_)));
    }

    #[test]
    fn small_ensemble_tracks_master_equation() {
        let p = small_params();
        let spec = Model::Jc.space(8).unwrap();
        let rho = steady_state(&Liouvillian::for_model(&p, Model::Jc, &spec).unwrap()).unwrap();
        let n_ss = crate::master::observables(&rho, &spec).unwrap().n_photon;
        let mut opts = SseOptions::new(30.0, 2e-3);
        opts.record_every = 50;
        let ens = ensemble_run(&p, Model::Jc, 8, 40, 5, &opts).unwrap();
        let (mean, se) = window_mean_n(&ens.records, 10.0).unwrap();
        assert!((mean - n_ss).abs() < 4.0 * se, "mean {mean} se {se} master {n_ss}");
    }

    #[test]
    fn single_member_ensemble_is_the_single_trajectory() {
        let p = small_params();
        let opts = SseOptions::new(1.0, 2e-3);
        let ens = ensemble_run(&p, Model::Jc, 8, 1, 9, &opts).unwrap();
        let single = sse_simulate(&p, Model::Jc, 8, 9, &opts).unwrap();
        assert_eq!(ens.summary.mean_n, single.n_photon);
        for t in 0..single.len() {
            assert!(ens.summary.abs_mean_alpha[t] <= ens.summary.mean_abs_alpha[t] + 1e-15);
        }
    }

    #[test]
    fn square_wave_labels_follow_edges() {
        let rec = square_record(&[(1.0, 500), (13.0, 500), (1.0, 500), (13.0, 500)], 0.1);
        let th = Thresholds::from_peaks(1.0, 13.0);
        let labels = label_states(&rec, &th).unwrap();
        let stats = switching_stats(&rec, &labels, &th).unwrap();
        assert_eq!(stats.n_switches, 3);
        for (i, l) in labels.iter().enumerate() {
            let edge_distance = [500usize, 1000, 1500].iter().map(|&e| i.abs_diff(e)).min().unwrap();
            if edge_distance > 10 {
                let expect = if (i / 500) % 2 == 0 { StateLabel::Dim } else { StateLabel::Bright };
                assert_eq!(*l, expect, "sample {i}");
            }
        }
        assert!(stats.dwell_bright.iter().all(|&d| (d - 50.0).abs() < 1.5));
        assert_eq!(stats.simultaneity, Some(1.0));
    }

    #[test]
    fn constant_bright_trace_is_one_dwell() {
        let rec = square_record(&[(13.0, 300)], 0.1);
        let th = Thresholds::from_peaks(1.0, 13.0);
        let labels = label_states(&rec, &th).unwrap();
        let stats = switching_stats(&rec, &labels, &th).unwrap();
        assert_eq!(stats.dwell_bright, vec![300.0 * 0.1]);
        assert_eq!(stats.n_switches, 0);
        assert!(stats.insufficient_statistics);
        assert!(stats.simultaneity.is_none());
    }

    #[test]
    fn dark_needs_excited_qubit() {
        let mut rec = square_record(&[(0.05, 200)], 0.1);
        rec.sigma_z = Some(vec![0.5; 200]);
        let th = Thresholds::from_peaks(1.0, 13.0);
        assert!(label_states(&rec, &th).unwrap().iter().all(|l| *l == StateLabel::Dark));
        rec.sigma_z = Some(vec![-0.5; 200]);
        assert!(label_states(&rec, &th).unwrap().iter().all(|l| *l == StateLabel::Dim));
    }

    #[test]
    fn unordered_thresholds_are_rejected() {
        let rec = square_record(&[(1.0, 10)], 0.1);
        let th = Thresholds::new(5.0, 3.0);
        assert!(matches!(label_states(&rec, &th), Err(Error::InvalidThresholds(_))));
    }

    #[test]
    fn independent_indicators_decorrelate() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..10_000).map(|_| if rand::Rng::random::<bool>(&mut rng) { 1.0 } else { 0.0 }).collect();
        let y: Vec<f64> = (0..10_000).map(|_| if rand::Rng::random::<bool>(&mut rng) { 1.0 } else { 0.0 }).collect();
        assert!(pearson(&x, &y).unwrap().abs() < 0.1);
    }

    #[test]
    fn dark_excursions_do_not_break_simultaneity() {
        let mut rec = square_record(&[(1.0, 400), (13.0, 400), (0.05, 100), (1.0, 300), (13.0, 400)], 0.1);
        let sz = rec.sigma_z.as_mut().unwrap();
        sz[800..900].iter_mut().for_each(|v| *v = 0.9);
        let th = Thresholds::from_peaks(1.0, 13.0);
        let labels = label_states(&rec, &th).unwrap();
        assert!(labels[820..880].iter().all(|l| *l == StateLabel::Dark));
        let stats = switching_stats(&rec, &labels, &th).unwrap();
        assert_eq!(stats.n_switches, 3);
        assert!(stats.simultaneity.unwrap() > 0.95);
        assert!(!stats.dwell_dark.is_empty());
    }
}
