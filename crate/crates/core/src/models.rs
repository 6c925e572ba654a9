//! Drive-frame Hamiltonians (JC, multilevel JC, Duffing), Lindblad channels,
//! dispersive quantities and device presets.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{annihilation, ketbra, HilbertSpec, Operator, C64};

const PLANCK: f64 = 6.626_070_15e-34;
const HBAR: f64 = PLANCK / (2.0 * PI);
const K_B: f64 = 1.380_649e-23;

/// Converts a frequency in GHz to an angular frequency in rad/s.
pub fn ghz(f: f64) -> f64 {
    2.0 * PI * f * 1e9
}

/// Converts a frequency in MHz to an angular frequency in rad/s.
pub fn mhz(f: f64) -> f64 {
    2.0 * PI * f * 1e6
}

/// Converts an angular frequency in rad/s to GHz.
pub fn to_ghz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e9)
}

/// Physical parameters. All rates and frequencies are angular (rad/s).
///
/// `kappa` is the cavity amplitude decay rate (energy decays at `2κ`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub omega_c: f64,
    pub omega_q: f64,
    pub g: f64,
    pub chi: f64,
    pub eps_d: f64,
    pub omega_d: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub gamma_phi: f64,
    pub temperature: f64,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("omega_c", self.omega_c),
            ("omega_q", self.omega_q),
            ("g", self.g),
            ("chi", self.chi),
            ("eps_d", self.eps_d),
            ("omega_d", self.omega_d),
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("gamma_phi", self.gamma_phi),
            ("temperature", self.temperature),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::InvalidParameter { name, reason: format!("{v} is not finite") });
            }
        }
        for (name, v) in [
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("gamma_phi", self.gamma_phi),
            ("temperature", self.temperature),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidParameter { name, reason: format!("must be >= 0, got {v}") });
            }
        }
        Ok(())
    }

    /// Signed qubit-cavity detuning `ω_c − ω_q`.
    pub fn detuning(&self) -> f64 {
        self.omega_c - self.omega_q
    }

    /// `|ω_c − ω_q|`
    pub fn delta(&self) -> f64 {
        self.detuning().abs()
    }

    /// `Δω_c = ω_c − ω_d`
    pub fn delta_c(&self) -> f64 {
        self.omega_c - self.omega_d
    }

    /// `Δω_q = ω_q − ω_d`
    pub fn delta_q(&self) -> f64 {
        self.omega_q - self.omega_d
    }

    /// Transverse decay of the qubit coherence, `γ/2 + γ_φ`.
    pub fn gamma_perp(&self) -> f64 {
        0.5 * self.gamma + self.gamma_phi
    }

    pub fn with_drive_frequency(mut self, omega_d: f64) -> Self {
        self.omega_d = omega_d;
        self
    }

    /// Sets `ε_d = 2κ · scale`.
    pub fn with_drive_scale(mut self, scale: f64) -> Self {
        self.eps_d = 2.0 * self.kappa * scale;
        self
    }

    /// Thermal occupation of the cavity mode.
    pub fn thermal_occupation(&self) -> f64 {
        thermal_occupation(self.omega_c, self.temperature)
    }
}

/// Bose–Einstein occupation `1/(exp(ħω/k_B T) − 1)`; zero at `T = 0`.
pub fn thermal_occupation(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    1.0 / (HBAR * omega / (K_B * temperature)).exp_m1()
}

/// `δ²/(4g²)`
pub fn critical_photon_number(g: f64, delta: f64) -> Result<f64> {
    if g == 0.0 {
        return Err(Error::InvalidParameter { name: "g", reason: "coupling must be nonzero".into() });
    }
    Ok(delta * delta / (4.0 * g * g))
}

/// `ω_n = ω_q n − χ n(1−n)/2`
pub fn transmon_frequency(n: usize, omega_q: f64, chi: f64) -> f64 {
    let n = n as f64;
    omega_q * n - chi * n * (1.0 - n) / 2.0
}

/// Tabulated device. Frequencies in GHz, times in μs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub name: String,
    pub f_c: f64,
    pub delta_over_2pi: f64,
    pub g_over_2pi: f64,
    pub ej_over_ec: f64,
    pub t1: f64,
    pub t2: f64,
    pub chi_over_2pi: f64,
    /// Default `κ/γ` used when the preset is turned into [`SystemParams`].
    pub kappa_over_gamma: f64,
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        if self.t1 <= 0.0 || self.t2 <= 0.0 {
            return Err(Error::InvalidParameter { name: "T1/T2", reason: "must be positive".into() });
        }
        if self.t2 > 2.0 * self.t1 {
            return Err(Error::InvalidParameter {
                name: "T2",
                reason: format!("T2 = {} exceeds 2 T1 = {}", self.t2, 2.0 * self.t1),
            });
        }
        Ok(())
    }

    /// `γ = 1/T1` in 1/s.
    pub fn gamma(&self) -> f64 {
        1.0 / (self.t1 * 1e-6)
    }

    /// `γ_φ = 1/T2 − 1/(2 T1)`
    pub fn gamma_phi(&self) -> f64 {
        1.0 / (self.t2 * 1e-6) - 1.0 / (2.0 * self.t1 * 1e-6)
    }

    /// Undriven parameters with the drive parked on the bare cavity.
    pub fn to_system_params(&self) -> Result<SystemParams> {
        self.validate()?;
        let omega_c = ghz(self.f_c);
        let gamma = self.gamma();
        let p = SystemParams {
            omega_c,
            omega_q: omega_c - ghz(self.delta_over_2pi),
            g: ghz(self.g_over_2pi),
            chi: mhz(self.chi_over_2pi),
            eps_d: 0.0,
            omega_d: omega_c,
            kappa: self.kappa_over_gamma * gamma,
            gamma,
            gamma_phi: self.gamma_phi(),
            temperature: 0.0,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Tabulated devices `D1` and `D2` (qubit below the cavity in both).
pub fn device(name: &str) -> Result<DeviceParams> {
    match name.to_ascii_uppercase().as_str() {
        "D1" => Ok(DeviceParams {
            name: "D1".into(),
            f_c: 10.426,
            delta_over_2pi: 0.984,
            g_over_2pi: 0.313,
            ej_over_ec: 314.0,
            t1: 2.64,
            t2: 4.00,
            chi_over_2pi: -150.0,
            kappa_over_gamma: 1.0,
        }),
        "D2" => Ok(DeviceParams {
            name: "D2".into(),
            f_c: 10.567,
            delta_over_2pi: 2.383,
            g_over_2pi: 0.335,
            ej_over_ec: 165.0,
            t1: 2.20,
            t2: 2.10,
            chi_over_2pi: -242.0,
            kappa_over_gamma: 6.0,
        }),
        _ => Err(Error::UnknownPreset(name.to_string())),
    }
}

/// [`SystemParams`] for a named preset: `D1`, `D2` or `FIG2`.
pub fn device_preset(name: &str) -> Result<SystemParams> {
    if name.eq_ignore_ascii_case("FIG2") {
        return Ok(fig2_params());
    }
    device(name)?.to_system_params()
}

/// Cavity linewidth used for the bistability figures, `κ/2π` in MHz.
///
/// Chosen so the JC steady state at the 10.6005 GHz drive has two Q-function
/// peaks of equal height.
pub const FIG2_KAPPA_MHZ: f64 = 0.632;

/// Bistability parameter set: `g/δ = 0.14`, `ε_d/(2κ) = 25/3`, `2κ/γ = 12`,
/// `γ_φ = 0`, with the D2 cavity and detuning, driven at 10.6005 GHz.
pub fn fig2_params() -> SystemParams {
    let delta = ghz(2.383);
    let omega_c = ghz(10.567);
    let kappa = mhz(FIG2_KAPPA_MHZ);
    SystemParams {
        omega_c,
        omega_q: omega_c - delta,
        g: 0.14 * delta,
        chi: mhz(-242.0),
        eps_d: 2.0 * kappa * 25.0 / 3.0,
        omega_d: ghz(10.6005),
        kappa,
        gamma: 2.0 * kappa / 12.0,
        gamma_phi: 0.0,
        temperature: 0.0,
    }
}

/// Which Hamiltonian to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    Jc,
    Gjc(usize),
    Duffing,
}

impl Model {
    /// Hilbert space of this model at the given Fock cutoff.
    pub fn space(&self, cavity_cutoff: usize) -> Result<HilbertSpec> {
        match *self {
            Model::Jc => HilbertSpec::new(cavity_cutoff, 2),
            Model::Gjc(levels) => HilbertSpec::new(cavity_cutoff, levels),
            Model::Duffing => HilbertSpec::cavity_only(cavity_cutoff),
        }
    }

    pub fn hamiltonian(&self, params: &SystemParams, spec: &HilbertSpec) -> Result<Operator> {
        match self {
            Model::Jc => build_jc(params, spec),
            Model::Gjc(_) => build_gjc(params, spec),
            Model::Duffing => build_duffing(params, spec),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Model::Jc => "jc".into(),
            Model::Gjc(l) => format!("gjc{l}"),
            Model::Duffing => "duffing".into(),
        }
    }
}

/// Operators lifted to the composite space.
#[derive(Debug, Clone)]
pub struct SystemOperators {
    pub a: Operator,
    pub a_dag: Operator,
    pub n: Operator,
    /// `|0⟩⟨1|` on the transmon; absent for cavity-only spaces.
    pub sigma_minus: Option<Operator>,
    /// `1 − 2|0⟩⟨0|` on the transmon; absent for cavity-only spaces.
    pub sigma_z: Option<Operator>,
    /// Transmon level projectors `|j⟩⟨j|`.
    pub projectors: Vec<Operator>,
}

impl SystemOperators {
    pub fn new(spec: &HilbertSpec) -> Result<Self> {
        let a = spec.on_cavity(&annihilation(spec.cavity_cutoff())?)?;
        let a_dag = a.adjoint();
        let n = &a_dag * &a;
        let levels = spec.transmon_levels();
        if levels < 2 {
            return Ok(Self { a, a_dag, n, sigma_minus: None, sigma_z: None, projectors: Vec::new() });
        }
        let sigma_minus = spec.on_transmon(&ketbra(levels, 0, 1)?)?;
        let ground = ketbra(levels, 0, 0)?;
        let sz_q = &Operator::identity(levels) - &ground.scale_real(2.0);
        let sigma_z = spec.on_transmon(&sz_q)?;
        let projectors = (0..levels)
            .map(|j| spec.on_transmon(&ketbra(levels, j, j)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { a, a_dag, n, sigma_minus: Some(sigma_minus), sigma_z: Some(sigma_z), projectors })
    }
}

fn drive_term(params: &SystemParams, a: &Operator) -> Operator {
    // iε(a† − a)
    (&a.adjoint() - a).scale(C64::new(0.0, params.eps_d))
}

/// `Δω_c a†a + (Δω_q/2)σ_z + g(a†σ− + aσ+) + iε_d(a† − a)`
pub fn build_jc(params: &SystemParams, spec: &HilbertSpec) -> Result<Operator> {
    if spec.transmon_levels() != 2 {
        return Err(Error::InvalidDimension(format!(
            "JC model needs 2 transmon levels, got {}",
            spec.transmon_levels()
        )));
    }
    let ops = SystemOperators::new(spec)?;
    let sm = ops.sigma_minus.as_ref().expect("two-level space");
    let sz = ops.sigma_z.as_ref().expect("two-level space");
    let coupling = &(&ops.a_dag * sm) + &(&ops.a * &sm.adjoint());
    let h = &ops.n.scale_real(params.delta_c()) + &sz.scale_real(0.5 * params.delta_q());
    let h = &h + &coupling.scale_real(params.g);
    Ok(&h + &drive_term(params, &ops.a))
}

/// Multilevel JC with transmon ladder `ω_n` and RWA couplings `g√(m+1)`.
///
/// The energy origin is shifted by `−Δω_q/2` so that the two-level case
/// coincides entrywise with [`build_jc`].
pub fn build_gjc(params: &SystemParams, spec: &HilbertSpec) -> Result<Operator> {
    let levels = spec.transmon_levels();
    if levels < 2 {
        return Err(Error::InvalidDimension(format!("multilevel JC needs >= 2 levels, got {levels}")));
    }
    let ops = SystemOperators::new(spec)?;
    let offset = -0.5 * params.delta_q();
    let diag: Vec<C64> = (0..levels)
        .map(|n| {
            C64::new(
                transmon_frequency(n, params.omega_q, params.chi) - n as f64 * params.omega_d + offset,
                0.0,
            )
        })
        .collect();
    let hq = spec.on_transmon(&Operator::diagonal(&diag))?;
    let lower = spec.on_transmon(&ladder(levels, &default_alpha(levels)))?;
    let coupling = &(&ops.a_dag * &lower) + &(&ops.a * &lower.adjoint());
    let h = &ops.n.scale_real(params.delta_c()) + &hq;
    let h = &h + &coupling.scale_real(params.g);
    Ok(&h + &drive_term(params, &ops.a))
}

/// Dressed-cavity Duffing oscillator with the qubit frozen in its ground state:
/// `(Δω_c + g²/δ − g⁴/δ³) a†a − (g⁴/δ³) a†²a² + iε_d(a† − a)`.
///
/// `δ = ω_c − ω_q` is taken with its sign so the dispersive shift points the
/// right way when the qubit sits above the cavity. Needs a cavity-only space.
pub fn build_duffing(params: &SystemParams, spec: &HilbertSpec) -> Result<Operator> {
    if spec.transmon_levels() != 1 {
        return Err(Error::InvalidDimension(format!(
            "Duffing model acts on the cavity alone, got {} transmon levels",
            spec.transmon_levels()
        )));
    }
    let delta = params.detuning();
    if delta == 0.0 {
        return Err(Error::SingularDetuning);
    }
    let (g2, kerr) = duffing_coefficients(params)?;
    let a = annihilation(spec.cavity_cutoff())?;
    let ad = a.adjoint();
    let n = &ad * &a;
    let ad2a2 = &(&ad * &ad) * &(&a * &a);
    let h = &n.scale_real(params.delta_c() + g2 - kerr) - &ad2a2.scale_real(kerr);
    Ok(&h + &drive_term(params, &a))
}

/// Dispersive shift `g²/δ` and Kerr magnitude `g⁴/δ³` (signed `δ`).
pub fn duffing_coefficients(params: &SystemParams) -> Result<(f64, f64)> {
    let delta = params.detuning();
    if delta == 0.0 {
        return Err(Error::SingularDetuning);
    }
    let g2 = params.g * params.g / delta;
    Ok((g2, g2 * g2 / delta))
}

/// `Σ_j c_j |j⟩⟨j+1|` on `levels` states.
fn ladder(levels: usize, coeffs: &[f64]) -> Operator {
    Operator::from_triplets(levels, (0..levels - 1).map(|j| (j, j + 1, C64::new(coeffs[j], 0.0))))
}

/// Bare-ladder relaxation coefficients `α_j = √(j+1)`.
pub fn default_alpha(levels: usize) -> Vec<f64> {
    (0..levels.saturating_sub(1)).map(|j| ((j + 1) as f64).sqrt()).collect()
}

/// Bare-ladder dephasing coefficients `β_j = j`.
pub fn default_beta(levels: usize) -> Vec<f64> {
    (0..levels).map(|j| j as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelKind {
    CavityLoss,
    CavityThermal,
    TransmonRelax,
    TransmonDephase,
}

/// Dissipator `C ρ C† − ½{C†C, ρ}` with `C = √rate · operator`.
#[derive(Debug, Clone)]
pub struct LindbladChannel {
    pub operator: Operator,
    pub rate: f64,
    pub kind: ChannelKind,
}

impl LindbladChannel {
    pub fn jump_operator(&self) -> Operator {
        self.operator.scale_real(self.rate.sqrt())
    }
}

/// Channels with the bare-ladder `α_j`, `β_j`.
pub fn collapse_channels(params: &SystemParams, spec: &HilbertSpec) -> Result<Vec<LindbladChannel>> {
    let levels = spec.transmon_levels();
    collapse_channels_with(params, spec, &default_alpha(levels), &default_beta(levels))
}

/// Cavity loss and thermal channels, plus transmon relaxation and dephasing
/// with explicit coefficients when the space has a transmon factor.
pub fn collapse_channels_with(
    params: &SystemParams,
    spec: &HilbertSpec,
    alpha: &[f64],
    beta: &[f64],
) -> Result<Vec<LindbladChannel>> {
    params.validate()?;
    let a = spec.on_cavity(&annihilation(spec.cavity_cutoff())?)?;
    let nbar = params.thermal_occupation();
    let mut out = vec![LindbladChannel {
        operator: a.clone(),
        rate: 2.0 * params.kappa * (nbar + 1.0),
        kind: ChannelKind::CavityLoss,
    }];
    if nbar > 0.0 {
        out.push(LindbladChannel {
            operator: a.adjoint(),
            rate: 2.0 * params.kappa * nbar,
            kind: ChannelKind::CavityThermal,
        });
    }
    let levels = spec.transmon_levels();
    if levels >= 2 {
        if alpha.len() != levels - 1 {
            return Err(Error::DimensionMismatch { expected: levels - 1, got: alpha.len() });
        }
        if beta.len() != levels {
            return Err(Error::DimensionMismatch { expected: levels, got: beta.len() });
        }
        out.push(LindbladChannel {
            operator: spec.on_transmon(&ladder(levels, alpha))?,
            rate: params.gamma,
            kind: ChannelKind::TransmonRelax,
        });
        let b: Vec<C64> = beta.iter().map(|&b| C64::new(b, 0.0)).collect();
        out.push(LindbladChannel {
            operator: spec.on_transmon(&Operator::diagonal(&b))?,
            rate: params.gamma_phi,
            kind: ChannelKind::TransmonDephase,
        });
    }
    Ok(out)
}
