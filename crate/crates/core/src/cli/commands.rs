//! Subcommand bodies: each reads a validated config and writes tables.

use crate::error::{Error, Result};
use crate::fpe::fpe_sweep;
use crate::hilbert::{partial_trace, Subsystem, C64};
use crate::master::{converged_steady_state, model_steady_state, observables, transmission_sweep, SweepResult};
use crate::meanfield::{mb_steady_states, mb_sweep, BranchPoint};
use crate::models::{critical_photon_number, to_ghz, Model, SystemParams};
use crate::phasespace::{find_modes, photon_distribution, q_function, GridSpec, ModeSet, QGrid};
use crate::trajectory::{
    ensemble_run, label_states, switching_stats, EnsembleSummary, SseSystem, StateLabel, Thresholds, TrajectoryRecord,
};

use super::config::{ModelKind, RunConfig};
use super::output::{Cell, Check, Table, Writer};

pub const SWEEP_COLUMNS: [&str; 6] = ["freq_GHz", "abs_a", "n_photon", "sigma_z", "abs_sm", "cutoff"];

fn need_model(cfg: &RunConfig) -> Result<Model> {
    cfg.model().ok_or_else(|| Error::Config("model: this command needs jc, gjc or duffing".into()))
}

fn need_grid(cfg: &RunConfig) -> Result<Vec<f64>> {
    cfg.frequencies().ok_or_else(|| Error::Config("a [sweep] section is required".into()))
}

/// Sweep result as the shared CSV schema; absent observables are blank.
pub fn sweep_table(s: &SweepResult) -> Table {
    let mut t = Table::new(&SWEEP_COLUMNS);
    for i in 0..s.len() {
        t.push(vec![
            to_ghz(s.frequencies[i]).into(),
            s.amp_a[i].into(),
            s.n_photon.as_ref().map(|v| v[i]).into(),
            s.sigma_z.as_ref().map(|v| v[i]).into(),
            s.amp_sm.as_ref().map(|v| v[i]).into(),
            s.cutoffs.as_ref().map_or(Cell::Empty, |c| c[i].into()),
        ]);
    }
    t
}

fn record_point_errors(w: &mut Writer, s: &SweepResult) {
    for (f, e) in s.frequencies.iter().zip(&s.errors) {
        if let Some(e) = e {
            w.manifest.point_errors.push(format!("{:.9} GHz: {e}", to_ghz(*f)));
        }
    }
}

pub const BRANCH_COLUMNS: [&str; 10] =
    ["freq_GHz", "branch", "re_a", "im_a", "abs_a", "n_photon", "sigma_z", "abs_sm", "stable", "growth_rate"];

fn branch_row(freq: f64, label: usize, b: &BranchPoint) -> Vec<Cell> {
    vec![
        to_ghz(freq).into(),
        label.into(),
        b.state.alpha.re.into(),
        b.state.alpha.im.into(),
        b.state.alpha.norm().into(),
        b.photon_number().into(),
        b.state.zeta.into(),
        b.state.beta.norm().into(),
        usize::from(b.stable).into(),
        b.max_growth_rate.into(),
    ]
}

/// Mean-field branch table: one row per root per frequency. Labels are
/// 0 lower, 1 middle, 2 upper.
pub fn meanfield_table(params: &SystemParams, freqs: &[f64]) -> Result<Table> {
    let mut t = Table::new(&BRANCH_COLUMNS);
    for p in mb_sweep(params, freqs)? {
        for (b, &l) in p.branches.iter().zip(&p.labels) {
            t.push(branch_row(p.frequency, l, b));
        }
    }
    Ok(t)
}

pub fn meanfield(cfg: &RunConfig, w: &mut Writer) -> Result<()> {
    let params = cfg.system_params()?;
    let table = match cfg.frequencies() {
        Some(freqs) => meanfield_table(&params, &freqs)?,
        None => {
            let mut t = Table::new(&BRANCH_COLUMNS);
            let roots = mb_steady_states(&params)?;
            for (i, b) in roots.iter().enumerate() {
                let label = if roots.len() == 1 { 0 } else { i };
                t.push(branch_row(params.omega_d, label, b));
            }
            t
        }
    };
    w.table("meanfield.csv", &table)?;
    Ok(())
}

pub fn steady(cfg: &RunConfig, w: &mut Writer) -> Result<()> {
    let params = cfg.system_params()?;
    let model = need_model(cfg)?;
    let (spec, rho) = converged_steady_state(&params, model, cfg.cutoff_policy())?;
    let obs = observables(&rho, &spec)?;
    w.manifest.cutoffs.push(spec.cavity_cutoff());
    let mut t = Table::new(&["freq_GHz", "re_a", "im_a", "abs_a", "n_photon", "sigma_z", "abs_sm", "cutoff"]);
    t.push(vec![
        to_ghz(params.omega_d).into(),
        obs.alpha.re.into(),
        obs.alpha.im.into(),
        obs.alpha.norm().into(),
        obs.n_photon.into(),
        obs.sigma_z.into(),
        obs.sigma_minus.map(|s| s.norm()).into(),
        spec.cavity_cutoff().into(),
    ]);
    w.table("steady.csv", &t)?;
    if !obs.transmon_populations.is_empty() {
        let mut pops = Table::new(&["level", "population"]);
        for (j, p) in obs.transmon_populations.iter().enumerate() {
            pops.push(vec![j.into(), (*p).into()]);
        }
        w.table("transmon_populations.csv", &pops)?;
    }
    let cav = if spec.transmon_levels() > 1 { partial_trace(&rho, &spec, Subsystem::Cavity)? } else { rho };
    w.table("photon_distribution.csv", &distribution_table(&photon_distribution(&cav)))?;
    Ok(())
}

pub fn distribution_table(p: &[f64]) -> Table {
    let mut t = Table::new(&["n", "p_n"]);
    for (n, v) in p.iter().enumerate() {
        t.push(vec![n.into(), (*v).into()]);
    }
    t
}

pub fn sweep(cfg: &RunConfig, w: &mut Writer) -> Result<()> {
    match cfg.model {
        ModelKind::Meanfield => return meanfield(cfg, w),
        ModelKind::Fpe => return fpe(cfg, w),
        _ => {}
    }
    let params = cfg.system_params()?;
    let model = need_model(cfg)?;
    let freqs = need_grid(cfg)?;
    let s = transmission_sweep(&params, model, &freqs, cfg.cutoff_policy())?;
    record_point_errors(w, &s);
    if let Some(c) = &s.cutoffs {
        w.manifest.cutoffs = c.clone();
    }
    w.table("sweep.csv", &sweep_table(&s))?;
    Ok(())
}

pub fn fpe(cfg: &RunConfig, w: &mut Writer) -> Result<()> {
    let params = cfg.system_params()?;
    let freqs = cfg.frequencies().unwrap_or_else(|| vec![params.omega_d]);
    let s = fpe_sweep(&params, &freqs)?;
    record_point_errors(w, &s);
    w.table("fpe.csv", &sweep_table(&s))?;
    Ok(())
}

pub fn q_table(q: &QGrid) -> Table {
    let (xs, ys) = (q.spec.xs(), q.spec.ys());
    let mut t = Table::new(&["x", "y", "q"]);
    for (iy, &y) in ys.iter().enumerate() {
        for (ix, &x) in xs.iter().enumerate() {
            t.push(vec![x.into(), y.into(), q.value(ix, iy).into()]);
        }
    }
    t
}

/// Default Q grid: `±1.5√N_crit` at the requested resolution.
pub fn default_grid(params: &SystemParams, resolution: usize, radius: Option<f64>) -> Result<GridSpec> {
    let r = match radius {
        Some(r) => r,
        None => 1.5 * critical_photon_number(params.g, params.delta())?.sqrt(),
    };
    Ok(GridSpec::symmetric(r, resolution))
}

pub fn qfunc(cfg: &RunConfig, w: &mut Writer) -> Result<ModeSet> {
    let params = cfg.system_params()?;
    let model = need_model(cfg)?;
    let (spec, rho) = converged_steady_state(&params, model, cfg.cutoff_policy())?;
    w.manifest.cutoffs.push(spec.cavity_cutoff());
    let cav = if spec.transmon_levels() > 1 { partial_trace(&rho, &spec, Subsystem::Cavity)? } else { rho };
    let (res, radius) = cfg.qfunc.as_ref().map_or((101, None), |q| (q.resolution, q.radius));
    let q = q_function(&cav, &default_grid(&params, res, radius)?)?;
    if q.truncated {
        w.manifest.point_errors.push("Q grid extends past 0.8 x cutoff; outer values are unreliable".into());
    }
    let modes = find_modes(&q)?;
    w.table("qfunc.csv", &q_table(&q))?;
    w.json("modes.json", &modes)?;
    w.table("photon_distribution.csv", &distribution_table(&photon_distribution(&cav)))?;
    w.manifest.checks.push(Check::new(
        "q-function peaks",
        modes.peaks.len() == 2,
        format!(
            "{} peaks at |alpha|^2 = {:?}",
            modes.peaks.len(),
            modes.peaks.iter().map(|p| (p.photon_number * 100.0).round() / 100.0).collect::<Vec<_>>()
        ),
    ));
    Ok(modes)
}

/// Dim/bright thresholds from the steady-state Q peaks, falling back to
/// `(1, N_crit)` when the steady state is not bimodal.
pub fn thresholds_for(params: &SystemParams, model: Model, cutoff: usize) -> Result<Thresholds> {
    let (spec, rho) = model_steady_state(params, model, cutoff)?;
    let cav = if spec.transmon_levels() > 1 { partial_trace(&rho, &spec, Subsystem::Cavity)? } else { rho };
    let q = q_function(&cav, &default_grid(params, 101, None)?)?;
    let modes = find_modes(&q)?;
    if modes.peaks.len() >= 2 {
        let (a, b) = (modes.peaks[0].photon_number, modes.peaks[1].photon_number);
        Ok(Thresholds::from_peaks(a.min(b).max(0.3), a.max(b)))
    } else {
        Ok(Thresholds::from_peaks(1.0, critical_photon_number(params.g, params.delta())?.max(2.0)))
    }
}

fn label_name(l: StateLabel) -> &'static str {
    match l {
        StateLabel::Bright => "bright",
        StateLabel::Dim => "dim",
        StateLabel::Dark => "dark",
        StateLabel::Transit => "transit",
    }
}

pub fn trajectory_table(rec: &TrajectoryRecord, labels: &[StateLabel]) -> Table {
    let mut t = Table::new(&["t", "n_photon", "sigma_z", "re_sm", "im_sm", "re_a", "im_a", "label"]);
    for i in 0..rec.len() {
        let sm: Option<C64> = rec.sigma_minus.as_ref().map(|v| v[i]);
        t.push(vec![
            rec.times[i].into(),
            rec.n_photon[i].into(),
            rec.sigma_z.as_ref().map(|v| v[i]).into(),
            sm.map(|s| s.re).into(),
            sm.map(|s| s.im).into(),
            rec.alpha[i].re.into(),
            rec.alpha[i].im.into(),
            labels.get(i).map_or(Cell::Empty, |l| label_name(*l).into()),
        ]);
    }
    t
}

pub fn ensemble_table(s: &EnsembleSummary) -> Table {
    let mut t =
        Table::new(&["t", "mean_n", "se_n", "mean_sigma_z", "se_sigma_z", "abs_mean_a", "mean_abs_a"]);
    for i in 0..s.times.len() {
        t.push(vec![
            s.times[i].into(),
            s.mean_n[i].into(),
            s.se_n[i].into(),
            s.mean_sigma_z.as_ref().map(|v| v[i]).into(),
            s.se_sigma_z.as_ref().map(|v| v[i]).into(),
            s.abs_mean_alpha[i].into(),
            s.mean_abs_alpha[i].into(),
        ]);
    }
    t
}

/// Step of `0.09 / max_rate`, inside the `dt · max_rate < 0.1` guard.
pub fn auto_step(params: &SystemParams, model: Model, cutoff: usize) -> Result<f64> {
    let probe = SseSystem::new(params, model, cutoff, f64::MIN_POSITIVE, crate::trajectory::Unraveling::Heterodyne)?;
    Ok(0.09 / probe.max_rate().max(1e-12))
}

pub fn traj(cfg: &RunConfig, w: &mut Writer, seed_override: Option<u64>) -> Result<()> {
    let params = cfg.system_params()?;
    let model = need_model(cfg)?;
    let tc = cfg.trajectory.as_ref().ok_or_else(|| Error::Config("a [trajectory] section is required".into()))?;
    let cutoff = match cfg.cavity_cutoff {
        super::config::CutoffSetting::Fixed(n) => n,
        super::config::CutoffSetting::Auto => {
            return Err(Error::Config("cavity_cutoff: trajectories need a fixed cutoff".into()))
        }
    };
    let seed = seed_override.unwrap_or(tc.seed);
    let dt = match tc.dt {
        Some(dt) => dt,
        None => auto_step(&params, model, cutoff)?,
    };
    let opts = cfg.sse_options(dt).expect("trajectory section present");
    w.manifest.seeds.push(seed);
    w.manifest.cutoffs.push(cutoff);
    let ens = ensemble_run(&params, model, cutoff, tc.trajectories, seed, &opts)?;
    if tc.trajectories == 1 {
        let rec = &ens.records[0];
        let th = thresholds_for(&params, model, cutoff)?;
        let labels = label_states(rec, &th)?;
        let stats = switching_stats(rec, &labels, &th)?;
        w.table("trajectory.csv", &trajectory_table(rec, &labels))?;
        let sidecar = serde_json::json!({
            "seed": seed,
            "dt": dt,
            "thresholds": th,
            "n_switches": stats.n_switches,
            "simultaneity": stats.simultaneity,
            "dwell_bright": stats.dwell_bright,
            "dwell_dim": stats.dwell_dim,
            "dwell_dark": stats.dwell_dark,
            "insufficient_statistics": stats.insufficient_statistics,
        });
        w.json("trajectory_stats.json", &sidecar)?;
    } else {
        w.table("ensemble.csv", &ensemble_table(&ens.summary))?;
    }
    Ok(())
}
