//! Desk-scale figure recipes. Each writes its tables and a list of checked
//! properties into the manifest and `summary.txt`.

use crate::error::{Error, Result};
use crate::fpe::{fpe_sweep, master_convention};
use crate::hilbert::{partial_trace, Subsystem};
use crate::master::{model_steady_state, observables, transmission_sweep, CutoffPolicy, SweepResult};
use crate::meanfield::{mb_sweep, SweepPoint};
use crate::models::{device_preset, fig2_params, ghz, mhz, to_ghz, Model, SystemParams};
use crate::phasespace::{find_modes, photon_distribution, q_function, ModeSet};
use crate::trajectory::{
    label_states, sse_simulate, switching_stats, SseOptions, StateLabel, SwitchingStats, Thresholds, TrajectoryRecord,
};

use super::commands::{
    auto_step, default_grid, distribution_table, meanfield_table, q_table, sweep_table, thresholds_for,
    trajectory_table,
};
use super::output::{Check, Table, Writer};

pub const TAGS: [&str; 7] = ["fig1", "fig2", "fig3b", "si2", "si4", "si5", "si6"];

/// Evenly spaced grid from `lo` to `hi` GHz inclusive, in rad/s.
pub fn grid_ghz(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points).map(|k| ghz(lo + (hi - lo) * k as f64 / (points - 1) as f64)).collect()
}

/// Indices of strict interior local minima.
pub fn interior_minima(y: &[f64]) -> Vec<usize> {
    (1..y.len().saturating_sub(1)).filter(|&i| y[i] < y[i - 1] && y[i] < y[i + 1]).collect()
}

/// Indices of strict interior local maxima.
pub fn interior_maxima(y: &[f64]) -> Vec<usize> {
    (1..y.len().saturating_sub(1)).filter(|&i| y[i] > y[i - 1] && y[i] > y[i + 1]).collect()
}

/// The dip of a lineshape: its lowest interior local minimum.
pub fn dip_index(y: &[f64]) -> Option<usize> {
    interior_minima(y).into_iter().min_by(|&a, &b| y[a].total_cmp(&y[b]))
}

/// Distance between the two highest interior maxima, in the units of `x`;
/// zero when there is only one.
pub fn feature_separation(x: &[f64], y: &[f64]) -> Option<f64> {
    let mut m = interior_maxima(y);
    m.sort_by(|&a, &b| y[b].total_cmp(&y[a]));
    match m.as_slice() {
        [] => None,
        [_] => Some(0.0),
        [a, b, ..] => Some((x[*a] - x[*b]).abs()),
    }
}

/// Frequency span (rad/s) of the contiguous run of 3-root points that
/// contains the grid point nearest `target`, if the middle root there is
/// unstable.
pub fn three_branch_window(points: &[SweepPoint], target: f64) -> Option<(f64, f64)> {
    let k = points
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1.frequency - target).abs().total_cmp(&(b.1.frequency - target).abs()))?
        .0;
    let three = |p: &SweepPoint| p.branches.len() == 3;
    if !three(&points[k]) || points[k].branches[1].stable {
        return None;
    }
    let mut lo = k;
    while lo > 0 && three(&points[lo - 1]) {
        lo -= 1;
    }
    let mut hi = k;
    while hi + 1 < points.len() && three(&points[hi + 1]) {
        hi += 1;
    }
    Some((points[lo].frequency, points[hi].frequency))
}

fn cavity_state(params: &SystemParams, model: Model, cutoff: usize) -> Result<crate::hilbert::DensityMatrix> {
    let (spec, rho) = model_steady_state(params, model, cutoff)?;
    if spec.transmon_levels() > 1 {
        partial_trace(&rho, &spec, Subsystem::Cavity)
    } else {
        Ok(rho)
    }
}

fn fmt_ghz(w: f64) -> String {
    format!("{:.5}", to_ghz(w))
}

fn columns(freqs: &[f64], names: &[String], cols: &[Vec<f64>]) -> Table {
    let mut header = vec!["freq_GHz".to_string()];
    header.extend(names.iter().cloned());
    let mut t = Table::new(&header);
    for (i, &f) in freqs.iter().enumerate() {
        let mut row = vec![to_ghz(f).into()];
        row.extend(cols.iter().map(|c| c[i].into()));
        t.push(row);
    }
    t
}

fn note_errors(w: &mut Writer, label: &str, s: &SweepResult) {
    for (f, e) in s.frequencies.iter().zip(&s.errors) {
        if let Some(e) = e {
            w.manifest.point_errors.push(format!("{label} {:.9} GHz: {e}", to_ghz(*f)));
        }
    }
}

pub fn run(tag: &str, w: &mut Writer) -> Result<()> {
    match tag {
        "fig1" => fig1(w),
        "fig2" => fig2(w),
        "fig3b" => fig3b(w),
        "si2" => si2(w),
        "si4" => si4(w),
        "si5" => si5(w),
        "si6" => si6(w),
        _ => Err(Error::Config(format!("unknown figure tag `{tag}`; expected one of {}", TAGS.join(", ")))),
    }?;
    let summary: String = w.manifest.checks.iter().map(|c| c.line() + "\n").collect();
    w.text("summary.txt", &summary)?;
    Ok(())
}

/// Mean-field branches across the bistable window.
fn fig1(w: &mut Writer) -> Result<()> {
    let p = fig2_params();
    let freqs = grid_ghz(10.570, 10.612, 421);
    w.table("meanfield.csv", &meanfield_table(&p, &freqs)?)?;
    let points = mb_sweep(&p, &freqs)?;
    let target = ghz(10.6005);
    let check = match three_branch_window(&points, target) {
        Some((lo, hi)) => Check::new(
            "three-branch window contains 10.6005 GHz",
            lo <= target && target <= hi,
            format!("window {} to {} GHz, middle branch unstable", fmt_ghz(lo), fmt_ghz(hi)),
        ),
        None => Check::new("three-branch window contains 10.6005 GHz", false, "no unstable middle branch there"),
    };
    w.manifest.checks.push(check);
    Ok(())
}

/// Bimodal Q function plus one switching trajectory.
pub fn fig2_modes(p: &SystemParams) -> Result<(ModeSet, crate::hilbert::DensityMatrix, crate::phasespace::QGrid)> {
    let cav = cavity_state(p, Model::Jc, 60)?;
    let q = q_function(&cav, &default_grid(p, 101, None)?)?;
    Ok((find_modes(&q)?, cav, q))
}

pub const FIG2_TRAJ_SEED: u64 = 0;
pub const FIG2_TRAJ_CUTOFF: usize = 50;
pub const FIG2_TRAJ_LENGTH: f64 = 400.0;

pub struct SwitchingRun {
    pub record: TrajectoryRecord,
    pub labels: Vec<StateLabel>,
    pub stats: SwitchingStats,
    pub thresholds: Thresholds,
    pub dt: f64,
}

/// One labeled trajectory of length 400 at the auto step.
pub fn fig2_switching(p: &SystemParams, seed: u64) -> Result<SwitchingRun> {
    let dt = auto_step(p, Model::Jc, FIG2_TRAJ_CUTOFF)?;
    let mut opts = SseOptions::new(FIG2_TRAJ_LENGTH, dt);
    opts.record_every = ((0.05 / dt).round() as usize).max(1);
    let record = sse_simulate(p, Model::Jc, FIG2_TRAJ_CUTOFF, seed, &opts)?;
    let thresholds = thresholds_for(p, Model::Jc, FIG2_TRAJ_CUTOFF)?;
    let labels = label_states(&record, &thresholds)?;
    let stats = switching_stats(&record, &labels, &thresholds)?;
    Ok(SwitchingRun { record, labels, stats, thresholds, dt })
}

fn fig2(w: &mut Writer) -> Result<()> {
    let p = fig2_params();
    let (modes, cav, q) = fig2_modes(&p)?;
    w.manifest.cutoffs.push(60);
    w.table("qfunc.csv", &q_table(&q))?;
    w.json("modes.json", &modes)?;
    w.table("photon_distribution.csv", &distribution_table(&photon_distribution(&cav)))?;
    let n: Vec<f64> = modes.peaks.iter().map(|k| k.photon_number).collect();
    let ok = n.len() == 2 && {
        let (dim, bright) = (n[0].min(n[1]), n[0].max(n[1]));
        (0.2..=3.0).contains(&dim) && (6.0..=26.0).contains(&bright)
    };
    w.manifest.checks.push(Check::new(
        "Q function has a dim and a bright peak",
        ok,
        format!("peaks at |alpha|^2 = {:?}, equal height {}", round2(&n), modes.equal_height),
    ));

    let run = fig2_switching(&p, FIG2_TRAJ_SEED)?;
    let (rec, labels, stats, th, dt) = (&run.record, &run.labels, &run.stats, &run.thresholds, run.dt);
    w.manifest.seeds.push(FIG2_TRAJ_SEED);
    w.manifest.cutoffs.push(FIG2_TRAJ_CUTOFF);
    w.table("trajectory.csv", &trajectory_table(rec, labels))?;
    w.json(
        "trajectory_stats.json",
        &serde_json::json!({
            "seed": FIG2_TRAJ_SEED, "dt": dt, "thresholds": th, "n_switches": stats.n_switches,
            "simultaneity": stats.simultaneity, "dwell_bright": stats.dwell_bright,
            "dwell_dim": stats.dwell_dim, "dwell_dark": stats.dwell_dark,
        }),
    )?;
    let sim = stats.simultaneity.unwrap_or(f64::NAN);
    w.manifest.checks.push(Check::new(
        "simultaneous switching",
        stats.n_switches >= 5 && sim >= 0.8,
        format!("{} switches in 400/(2 kappa), simultaneity {sim:.3}", stats.n_switches),
    ));
    Ok(())
}

fn round2(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 100.0).round() / 100.0).collect()
}

/// Drive scales and window for the four-level dip trend.
pub const GJC_TREND_SCALES: [f64; 3] = [2.0, 4.0, 8.0];
pub const GJC_TREND_WINDOW: (f64, f64, usize) = (10.508, 10.519, 111);
pub const GJC_TREND_CUTOFF: usize = 15;

/// Dip frequency (rad/s) of the four-level lineshape at each drive scale.
pub fn gjc_dip_trend(scales: &[f64]) -> Result<(Vec<f64>, Vec<SweepResult>, Vec<Option<f64>>)> {
    let base = device_preset("D1")?;
    let (lo, hi, n) = GJC_TREND_WINDOW;
    let freqs = grid_ghz(lo, hi, n);
    let mut sweeps = Vec::new();
    let mut dips = Vec::new();
    for &s in scales {
        let sw = transmission_sweep(&base.with_drive_scale(s), Model::Gjc(4), &freqs, CutoffPolicy::Fixed(GJC_TREND_CUTOFF))?;
        dips.push(dip_index(&sw.amp_a).map(|i| freqs[i]));
        sweeps.push(sw);
    }
    Ok((freqs, sweeps, dips))
}

pub fn strictly_decreasing(v: &[Option<f64>]) -> bool {
    v.iter().all(Option::is_some) && v.windows(2).all(|w| w[1] < w[0])
}

/// All models on one D1 grid, then the four-level dip trend.
fn fig3b(w: &mut Writer) -> Result<()> {
    let p = device_preset("D1")?.with_drive_scale(4.0);
    let freqs = grid_ghz(10.505, 10.530, 251);
    let gjc = transmission_sweep(&p, Model::Gjc(4), &freqs, CutoffPolicy::Fixed(15))?;
    let jc = transmission_sweep(&p, Model::Jc, &freqs, CutoffPolicy::Fixed(30))?;
    let duff = transmission_sweep(&p, Model::Duffing, &freqs, CutoffPolicy::Fixed(30))?;
    let fpe = fpe_sweep(&p, &freqs)?;
    let mapped = fpe_sweep(&master_convention(&p), &freqs)?;
    for (l, s) in [("gjc4", &gjc), ("jc", &jc), ("duffing", &duff), ("fpe", &fpe), ("fpe_mapped", &mapped)] {
        note_errors(w, l, s);
    }
    w.manifest.cutoffs.extend([15, 30]);
    let names: Vec<String> = ["gjc4", "jc", "duffing", "fpe", "fpe_mapped"].iter().map(|s| s.to_string()).collect();
    let cols = [gjc.amp_a, jc.amp_a, duff.amp_a, fpe.amp_a, mapped.amp_a];
    w.table("fig3b.csv", &columns(&freqs, &names, &cols))?;

    let (tfreqs, sweeps, dips) = gjc_dip_trend(&GJC_TREND_SCALES)?;
    let names: Vec<String> = GJC_TREND_SCALES.iter().map(|s| format!("scale_{s}")).collect();
    let cols: Vec<Vec<f64>> = sweeps.iter().map(|s| s.amp_a.clone()).collect();
    w.table("gjc4_trend.csv", &columns(&tfreqs, &names, &cols))?;
    w.manifest.checks.push(Check::new(
        "four-level dip moves lower with drive",
        strictly_decreasing(&dips),
        format!(
            "dips at {:?} GHz for scales {:?}",
            dips.iter().map(|d| d.map(fmt_ghz)).collect::<Vec<_>>(),
            GJC_TREND_SCALES
        ),
    ));
    Ok(())
}

/// Analytic D2 reflection features at increasing drive.
fn si2(w: &mut Writer) -> Result<()> {
    let base = device_preset("D2")?;
    let scales = [1.0, 2.0, 3.0, 4.0];
    let freqs = grid_ghz(10.578, 10.600, 441);
    let mut cols = Vec::new();
    let mut seps = Vec::new();
    for &s in &scales {
        let sw = fpe_sweep(&base.with_drive_scale(s), &freqs)?;
        note_errors(w, &format!("scale {s}"), &sw);
        seps.push(feature_separation(&freqs, &sw.amp_a).map(|d| d / (2.0 * std::f64::consts::PI) / 1e6));
        cols.push(sw.amp_a);
    }
    let names: Vec<String> = scales.iter().map(|s| format!("scale_{s}")).collect();
    w.table("si2_fpe.csv", &columns(&freqs, &names, &cols))?;
    let ok = seps.iter().all(Option::is_some)
        && seps.windows(2).all(|p| p[1] >= p[0])
        && seps.last().copied().flatten() > seps.first().copied().flatten();
    w.manifest.checks.push(Check::new(
        "feature separation grows with drive",
        ok,
        format!("separations {:?} MHz for scales {scales:?}", seps.iter().map(|s| s.map(|x| (x * 100.0).round() / 100.0)).collect::<Vec<_>>()),
    ));
    Ok(())
}

/// Window and cutoff of the cancellation-dip sweep.
pub const SI4_WINDOW: (f64, f64, usize) = (10.592, 10.612, 41);
pub const SI4_CUTOFF: usize = 40;

pub fn si4_sweep() -> Result<SweepResult> {
    let (lo, hi, n) = SI4_WINDOW;
    transmission_sweep(&fig2_params(), Model::Jc, &grid_ghz(lo, hi, n), CutoffPolicy::Fixed(SI4_CUTOFF))
}

/// Which of the four lineshapes have an interior minimum:
/// `|<a>|`, `|<sigma->|`, `<n>`, and the excited population `(1 + <sigma_z>)/2`.
pub fn cancellation_profile(s: &SweepResult) -> [bool; 4] {
    let has = |v: &[f64]| !interior_minima(v).is_empty();
    let sz: Vec<f64> = s.sigma_z.as_deref().unwrap_or(&[]).iter().map(|z| (1.0 + z) / 2.0).collect();
    [
        has(&s.amp_a),
        has(s.amp_sm.as_deref().unwrap_or(&[])),
        has(s.n_photon.as_deref().unwrap_or(&[])),
        has(&sz),
    ]
}

fn si4(w: &mut Writer) -> Result<()> {
    let s = si4_sweep()?;
    note_errors(w, "jc", &s);
    w.manifest.cutoffs.push(SI4_CUTOFF);
    w.table("si4.csv", &sweep_table(&s))?;
    let [a, sm, n, sz] = cancellation_profile(&s);
    w.manifest.checks.push(Check::new(
        "cancellation dip in amplitudes only",
        a && sm && !n && !sz,
        format!("interior minimum: |a| {a}, |sigma-| {sm}, n {n}, excited population {sz}"),
    ));
    Ok(())
}

/// Four-level steady states at the two histogram frequencies.
fn si5(w: &mut Writer) -> Result<()> {
    let base = device_preset("D2")?.with_drive_scale(25.0 / 3.0);
    let cutoff = 40;
    w.manifest.cutoffs.push(cutoff);
    for f in [10.6082, 10.6091] {
        let p = base.with_drive_frequency(ghz(f));
        let (spec, rho) = model_steady_state(&p, Model::Gjc(4), cutoff)?;
        let obs = observables(&rho, &spec)?;
        let cav = partial_trace(&rho, &spec, Subsystem::Cavity)?;
        let pn = photon_distribution(&cav);
        let q = q_function(&cav, &default_grid(&p, 101, None)?)?;
        let modes = find_modes(&q)?;
        let tag = format!("{f:.4}").replace('.', "p");
        w.table(&format!("pn_{tag}.csv"), &distribution_table(&pn))?;
        let mut pops = Table::new(&["level", "population"]);
        for (j, v) in obs.transmon_populations.iter().enumerate() {
            pops.push(vec![j.into(), (*v).into()]);
        }
        w.table(&format!("transmon_{tag}.csv"), &pops)?;
        w.json(&format!("modes_{tag}.json"), &modes)?;
        let total: f64 = pn.iter().sum();
        w.manifest.checks.push(Check::new(
            format!("photon distribution at {f} GHz"),
            (total - 1.0).abs() < 1e-9,
            format!(
                "<n> = {:.3}, {} Q peaks at |alpha|^2 = {:?}, P_0 = {:.4}",
                obs.n_photon,
                modes.peaks.len(),
                round2(&modes.peaks.iter().map(|k| k.photon_number).collect::<Vec<_>>()),
                pn[0]
            ),
        ));
    }
    Ok(())
}

/// Drive scale of the anharmonicity comparison.
pub const SI6_SCALE: f64 = 16.0;

/// RMS departure of a lineshape from its own linear response, relative to
/// the linear peak. `linear` is evaluated at a tiny drive and rescaled.
pub fn distortion(curve: &[f64], linear: &[f64]) -> f64 {
    let peak = linear.iter().copied().fold(0.0, f64::max);
    rms_distance(curve, linear) / peak
}

/// Distortion of the analytic lineshape at the given anharmonicity (MHz),
/// in the master-equation rate convention.
pub fn fpe_distortion(base: &SystemParams, chi_mhz: f64, scale: f64, freqs: &[f64]) -> Result<(Vec<f64>, f64)> {
    let p = SystemParams { chi: mhz(chi_mhz), ..*base };
    let tiny = 1e-3;
    let curve = fpe_sweep(&master_convention(&p.with_drive_scale(scale)), freqs)?.amp_a;
    let linear: Vec<f64> = fpe_sweep(&master_convention(&p.with_drive_scale(tiny)), freqs)?
        .amp_a
        .iter()
        .map(|a| a * scale / tiny)
        .collect();
    let d = distortion(&curve, &linear);
    Ok((curve, d))
}

/// Analytic curves at two anharmonicities with the four-level reference.
fn si6(w: &mut Writer) -> Result<()> {
    let base = device_preset("D1")?;
    let p = base.with_drive_scale(SI6_SCALE);
    let freqs = grid_ghz(10.505, 10.530, 251);
    let gjc = transmission_sweep(&p, Model::Gjc(4), &freqs, CutoffPolicy::Fixed(15))?;
    note_errors(w, "gjc4", &gjc);
    let (strong, d_strong) = fpe_distortion(&base, -150.0, SI6_SCALE, &freqs)?;
    let (weak, d_weak) = fpe_distortion(&base, -20.0, SI6_SCALE, &freqs)?;
    w.manifest.cutoffs.push(15);
    let names: Vec<String> = ["gjc4", "fpe_chi_m150", "fpe_chi_m20"].iter().map(|s| s.to_string()).collect();
    w.table("si6.csv", &columns(&freqs, &names, &[gjc.amp_a, strong, weak]))?;
    w.manifest.checks.push(Check::new(
        "strong anharmonicity distorts the analytic curve more",
        d_strong > d_weak,
        format!("departure from linear response at scale {SI6_SCALE}: chi -150 MHz {d_strong:.4}, chi -20 MHz {d_weak:.4}"),
    ));
    Ok(())
}

/// Root-mean-square difference over points finite in both series.
pub fn rms_distance(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).filter(|(x, y)| x.is_finite() && y.is_finite()).map(|(x, y)| (x - y).powi(2)).collect();
    if d.is_empty() {
        f64::NAN
    } else {
        (d.iter().sum::<f64>() / d.len() as f64).sqrt()
    }
}
