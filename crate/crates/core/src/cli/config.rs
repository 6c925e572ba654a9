//! TOML run configuration: presets plus overrides, frequencies in GHz.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::master::CutoffPolicy;
use crate::models::{device_preset, ghz, Model, SystemParams};
use crate::trajectory::{Scheme, SseOptions, Unraveling};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Jc,
    Gjc,
    Duffing,
    Meanfield,
    Fpe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CutoffRepr", into = "CutoffRepr")]
pub enum CutoffSetting {
    Fixed(usize),
    Auto,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CutoffRepr {
    Fixed(usize),
    Word(String),
}

impl TryFrom<CutoffRepr> for CutoffSetting {
    type Error = String;

    fn try_from(r: CutoffRepr) -> std::result::Result<Self, String> {
        match r {
            CutoffRepr::Fixed(n) => Ok(Self::Fixed(n)),
            CutoffRepr::Word(w) if w == "auto" => Ok(Self::Auto),
            CutoffRepr::Word(w) => Err(format!("expected an integer or \"auto\", got \"{w}\"")),
        }
    }
}

impl From<CutoffSetting> for CutoffRepr {
    fn from(c: CutoffSetting) -> Self {
        match c {
            CutoffSetting::Fixed(n) => Self::Fixed(n),
            CutoffSetting::Auto => Self::Word("auto".into()),
        }
    }
}

/// Preset name and/or explicit values. Frequencies and rates are ordinary
/// frequencies in GHz (`ω/2π`), temperature in kelvin.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

/// Drive-frequency grid in GHz, endpoints included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnravelingKind {
    #[default]
    Heterodyne,
    Homodyne,
}

/// Times in units of `1/(2κ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub trajectories: usize,
    pub t_max: f64,
    /// Defaults to `0.09 / max_rate` of the prepared system.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "weak2")]
    pub scheme: Scheme,
    #[serde(default)]
    pub unraveling: UnravelingKind,
    #[serde(default)]
    pub homodyne_phase: f64,
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QfuncConfig {
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Half-width of the square grid; defaults to `1.5 √N_crit`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    #[serde(default = "csv")]
    pub format: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    #[serde(default = "two")]
    pub transmon_levels: usize,
    #[serde(default = "default_cutoff")]
    pub cavity_cutoff: CutoffSetting,
    /// `ε_d / (2κ)`; replaces `params.eps_d` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive_scale: Option<f64>,
    pub params: ParamsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectoryConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qfunc: Option<QfuncConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

fn one() -> usize {
    1
}
fn two() -> usize {
    2
}
fn weak2() -> Scheme {
    Scheme::Weak2
}
fn default_sample_interval() -> f64 {
    0.05
}
fn default_resolution() -> usize {
    101
}
fn default_cutoff() -> CutoffSetting {
    CutoffSetting::Fixed(30)
}
fn csv() -> String {
    "csv".into()
}

const REQUIRED: [&str; 2] = ["model", "params"];

/// 1-based line of `key = ...` inside `[section]` (top level for `None`).
fn locate(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = Some(name.trim().to_string());
            continue;
        }
        let Some((k, _)) = t.split_once('=') else { continue };
        if k.trim() == key && current.as_deref() == section {
            return Some(i + 1);
        }
    }
    None
}

struct Validator<'a> {
    text: &'a str,
    problems: Vec<String>,
}

impl Validator<'_> {
    fn fail(&mut self, section: Option<&str>, key: &str, msg: String) {
        let path = section.map_or(key.to_string(), |s| format!("{s}.{key}"));
        let at = locate(self.text, section, key).map_or(String::new(), |l| format!("line {l}: "));
        self.problems.push(format!("{at}{path}: {msg}"));
    }

    fn check(&mut self, ok: bool, section: Option<&str>, key: &str, msg: impl FnOnce() -> String) {
        if !ok {
            self.fail(section, key, msg());
        }
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let missing: Vec<&str> = REQUIRED.iter().copied().filter(|k| !table.contains_key(*k)).collect();
    if !missing.is_empty() {
        return Err(Error::Config(format!("missing required keys: {}", missing.join(", "))));
    }
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate_with(text)?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.validate_with("")
    }

    fn validate_with(&self, text: &str) -> Result<()> {
        let mut v = Validator { text, problems: Vec::new() };
        match self.model {
            ModelKind::Jc => {
                v.check(self.transmon_levels == 2, None, "transmon_levels", || "jc needs exactly 2 levels".into())
            }
            ModelKind::Gjc => {
                v.check(self.transmon_levels >= 2, None, "transmon_levels", || "gjc needs at least 2 levels".into())
            }
            _ => {}
        }
        if let CutoffSetting::Fixed(n) = self.cavity_cutoff {
            v.check(n >= 2, None, "cavity_cutoff", || format!("must be >= 2, got {n}"));
        }
        if let Some(s) = self.drive_scale {
            v.check(s.is_finite() && s >= 0.0, None, "drive_scale", || format!("must be >= 0, got {s}"));
            v.check(self.params.eps_d.is_none(), Some("params"), "eps_d", || {
                "give either drive_scale or params.eps_d, not both".into()
            });
        }

        let p = &self.params;
        for (key, val) in [
            ("kappa", p.kappa),
            ("gamma", p.gamma),
            ("gamma_phi", p.gamma_phi),
            ("temperature", p.temperature),
            ("eps_d", p.eps_d),
        ] {
            if let Some(x) = val {
                v.check(x.is_finite() && x >= 0.0, Some("params"), key, || format!("must be >= 0, got {x}"));
            }
        }
        for (key, val) in [("omega_c", p.omega_c), ("omega_q", p.omega_q), ("g", p.g), ("chi", p.chi), ("omega_d", p.omega_d)]
        {
            if let Some(x) = val {
                v.check(x.is_finite(), Some("params"), key, || format!("must be finite, got {x}"));
            }
        }
        match &p.preset {
            Some(name) => {
                if device_preset(name).is_err() {
                    v.fail(Some("params"), "preset", format!("unknown preset \"{name}\" (known: D1, D2, FIG2)"));
                }
            }
            None => {
                for (key, val) in
                    [("omega_c", p.omega_c), ("omega_q", p.omega_q), ("g", p.g), ("kappa", p.kappa), ("gamma", p.gamma)]
                {
                    if val.is_none() {
                        v.problems.push(format!("params.{key}: required when no preset is given"));
                    }
                }
            }
        }

        if let Some(s) = &self.sweep {
            let sec = Some("sweep");
            v.check(s.points >= 2, sec, "points", || format!("must be >= 2, got {}", s.points));
            v.check(s.start.is_finite() && s.start > 0.0, sec, "start", || format!("must be positive, got {}", s.start));
            v.check(s.stop.is_finite() && s.stop > s.start, sec, "stop", || {
                format!("must exceed start ({}), got {}", s.start, s.stop)
            });
        }
        if let Some(t) = &self.trajectory {
            let sec = Some("trajectory");
            v.check(t.trajectories >= 1, sec, "trajectories", || "must be >= 1".into());
            v.check(t.t_max.is_finite() && t.t_max > 0.0, sec, "t_max", || format!("must be positive, got {}", t.t_max));
            if let Some(dt) = t.dt {
                v.check(dt.is_finite() && dt > 0.0, sec, "dt", || format!("must be positive, got {dt}"));
            }
            v.check(t.sample_interval.is_finite() && t.sample_interval > 0.0, sec, "sample_interval", || {
                format!("must be positive, got {}", t.sample_interval)
            });
        }
        if let Some(q) = &self.qfunc {
            v.check(q.resolution >= 32, Some("qfunc"), "resolution", || format!("must be >= 32, got {}", q.resolution));
            if let Some(r) = q.radius {
                v.check(r.is_finite() && r > 0.0, Some("qfunc"), "radius", || format!("must be positive, got {r}"));
            }
        }
        if let Some(o) = &self.output {
            v.check(o.format == "csv", Some("output"), "format", || format!("only \"csv\" is supported, got \"{}\"", o.format));
        }

        if v.problems.is_empty() {
            // Catches combinations the per-key checks cannot see.
            self.system_params()?;
            Ok(())
        } else {
            Err(Error::Config(v.problems.join("; ")))
        }
    }

    /// Preset (or explicit values) with overrides applied, in rad/s.
    pub fn system_params(&self) -> Result<SystemParams> {
        let p = &self.params;
        let mut out = match &p.preset {
            Some(name) => device_preset(name).map_err(|e| Error::Config(e.to_string()))?,
            None => {
                let need = |v: Option<f64>, key: &str| {
                    v.ok_or_else(|| Error::Config(format!("params.{key}: required when no preset is given")))
                };
                let omega_c = ghz(need(p.omega_c, "omega_c")?);
                SystemParams {
                    omega_c,
                    omega_q: ghz(need(p.omega_q, "omega_q")?),
                    g: ghz(need(p.g, "g")?),
                    chi: 0.0,
                    eps_d: 0.0,
                    omega_d: omega_c,
                    kappa: ghz(need(p.kappa, "kappa")?),
                    gamma: ghz(need(p.gamma, "gamma")?),
                    gamma_phi: 0.0,
                    temperature: 0.0,
                }
            }
        };
        let set = |field: &mut f64, v: Option<f64>| {
            if let Some(x) = v {
                *field = ghz(x);
            }
        };
        set(&mut out.omega_c, p.omega_c);
        set(&mut out.omega_q, p.omega_q);
        set(&mut out.g, p.g);
        set(&mut out.chi, p.chi);
        set(&mut out.eps_d, p.eps_d);
        set(&mut out.omega_d, p.omega_d);
        set(&mut out.kappa, p.kappa);
        set(&mut out.gamma, p.gamma);
        set(&mut out.gamma_phi, p.gamma_phi);
        if let Some(t) = p.temperature {
            out.temperature = t;
        }
        if let Some(s) = self.drive_scale {
            out = out.with_drive_scale(s);
        }
        out.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(out)
    }

    /// The Hamiltonian model, for the master-equation and trajectory kinds.
    pub fn model(&self) -> Option<Model> {
        match self.model {
            ModelKind::Jc => Some(Model::Jc),
            ModelKind::Gjc => Some(Model::Gjc(self.transmon_levels)),
            ModelKind::Duffing => Some(Model::Duffing),
            ModelKind::Meanfield | ModelKind::Fpe => None,
        }
    }

    pub fn cutoff_policy(&self) -> CutoffPolicy {
        match self.cavity_cutoff {
            CutoffSetting::Fixed(n) => CutoffPolicy::Fixed(n),
            CutoffSetting::Auto => CutoffPolicy::auto(),
        }
    }

    /// Fixed cutoff, or the largest cutoff the automatic policy may reach.
    pub fn cutoff_ceiling(&self) -> usize {
        match self.cutoff_policy() {
            CutoffPolicy::Fixed(n) => n,
            CutoffPolicy::Auto { max, .. } => max,
        }
    }

    /// Sweep grid in rad/s.
    pub fn frequencies(&self) -> Option<Vec<f64>> {
        self.sweep.as_ref().map(|s| {
            (0..s.points)
                .map(|k| ghz(s.start + (s.stop - s.start) * k as f64 / (s.points - 1) as f64))
                .collect()
        })
    }

    /// Trajectory options at step `dt`.
    pub fn sse_options(&self, dt: f64) -> Option<SseOptions> {
        let t = self.trajectory.as_ref()?;
        let mut o = SseOptions::new(t.t_max, dt);
        o.scheme = t.scheme;
        o.unraveling = match t.unraveling {
            UnravelingKind::Heterodyne => Unraveling::Heterodyne,
            UnravelingKind::Homodyne => Unraveling::Homodyne { phase: t.homodyne_phase },
        };
        o.record_every = ((t.sample_interval / dt).round() as usize).max(1);
        Some(o)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
