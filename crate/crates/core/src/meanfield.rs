//! Maxwell–Bloch mean-field equations for the driven two-level JC system:
//! steady-state branches, linear stability and frequency sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::C64;
use crate::models::{critical_photon_number, SystemParams};

const I: C64 = C64::new(0.0, 1.0);
const SCAN_POINTS: usize = 1000;

/// Semiclassical state `(⟨a⟩, ⟨σ−⟩, ⟨σ_z⟩)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MbState {
    pub alpha: C64,
    pub beta: C64,
    pub zeta: f64,
}

impl MbState {
    pub fn vacuum() -> Self {
        Self { alpha: C64::new(0.0, 0.0), beta: C64::new(0.0, 0.0), zeta: -1.0 }
    }

    fn to_real(self) -> [f64; 5] {
        [self.alpha.re, self.alpha.im, self.beta.re, self.beta.im, self.zeta]
    }

    fn from_real(v: [f64; 5]) -> Self {
        Self { alpha: C64::new(v[0], v[1]), beta: C64::new(v[2], v[3]), zeta: v[4] }
    }

    /// Euclidean norm over the five real components.
    pub fn norm(&self) -> f64 {
        self.to_real().iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// One steady state at a given drive frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub state: MbState,
    pub stable: bool,
    pub drive_frequency: f64,
    /// Largest real part of the Jacobian spectrum.
    pub max_growth_rate: f64,
}

impl BranchPoint {
    pub fn photon_number(&self) -> f64 {
        self.state.alpha.norm_sqr()
    }
}

/// Time derivative of the Maxwell–Bloch state.
///
/// `dα/dt = −(κ + iΔω_c)α − igβ + ε_d`,
/// `dβ/dt = −(Γ + iΔω_q)β + igαζ` with `Γ = γ/2 + γ_φ`,
/// `dζ/dt = −γ(ζ + 1) + 2ig(α*β − αβ*)`.
pub fn mb_rhs(state: &MbState, params: &SystemParams) -> MbState {
    let MbState { alpha, beta, zeta } = *state;
    let g = params.g;
    let d_alpha = -(params.kappa + I * params.delta_c()) * alpha - I * g * beta + params.eps_d;
    let d_beta = -(params.gamma_perp() + I * params.delta_q()) * beta + I * g * alpha * zeta;
    let cross = alpha.conj() * beta - alpha * beta.conj();
    let d_zeta = -params.gamma * (zeta + 1.0) + (2.0 * I * g * cross).re;
    MbState { alpha: d_alpha, beta: d_beta, zeta: d_zeta }
}

/// Jacobian of [`mb_rhs`] in `(Re α, Im α, Re β, Im β, ζ)`.
pub fn mb_jacobian(state: &MbState, params: &SystemParams) -> [[f64; 5]; 5] {
    let [a1, a2, b1, b2, z] = state.to_real();
    let (k, dc, dq, g) = (params.kappa, params.delta_c(), params.delta_q(), params.g);
    let gp = params.gamma_perp();
    [
        [-k, dc, 0.0, g, 0.0],
        [-dc, -k, -g, 0.0, 0.0],
        [0.0, -g * z, -gp, dq, -g * a2],
        [g * z, 0.0, -dq, -gp, g * a1],
        [-4.0 * g * b2, 4.0 * g * b1, 4.0 * g * a2, -4.0 * g * a1, -params.gamma],
    ]
}

/// Largest real part of the Jacobian spectrum at `state`.
pub fn max_growth_rate(state: &MbState, params: &SystemParams) -> f64 {
    let j = mb_jacobian(state, params);
    let m = faer::Mat::<f64>::from_fn(5, 5, |r, c| j[r][c]);
    m.eigenvalues()
        .expect("5x5 eigensolver failed")
        .iter()
        .map(|e| e.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Saturation parameter `s` in `ζ(x) = −1/(1 + s x)`.
pub fn saturation_parameter(params: &SystemParams) -> f64 {
    let gp = params.gamma_perp();
    4.0 * params.g * params.g * gp / (params.gamma * (gp * gp + params.delta_q().powi(2)))
}

/// `(1 + s x)² (x |Z(x)|² − ε²)`, a cubic in `x = |α|²` sharing the roots of
/// the scalar self-consistency condition.
fn self_consistency(x: f64, s: f64, w: C64, params: &SystemParams) -> f64 {
    let u = 1.0 + s * x;
    let z = u * C64::new(params.kappa, params.delta_c()) + w;
    x * z.norm_sqr() - params.eps_d.powi(2) * u * u
}

/// Steady state on the root `x = |α|²` of the self-consistency condition.
fn state_from_photons(x: f64, s: f64, w: C64, params: &SystemParams) -> MbState {
    let zeta = -1.0 / (1.0 + s * x);
    let z = C64::new(params.kappa, params.delta_c()) - zeta * w;
    let alpha = params.eps_d / z;
    let beta = I * params.g * zeta * alpha / C64::new(params.gamma_perp(), params.delta_q());
    MbState { alpha, beta, zeta }
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    while hi - lo > 1e-12 * hi.abs() {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All steady states at the current drive frequency, ordered by `|α|²`.
pub fn mb_steady_states(params: &SystemParams) -> Result<Vec<BranchPoint>> {
    params.validate()?;
    if params.gamma <= 0.0 {
        return Err(Error::InvalidParameter { name: "gamma", reason: "mean-field roots need gamma > 0".into() });
    }
    let classify = |state: MbState| {
        let rate = max_growth_rate(&state, params);
        BranchPoint { state, stable: rate < 0.0, drive_frequency: params.omega_d, max_growth_rate: rate }
    };
    if params.eps_d == 0.0 {
        return Ok(vec![classify(MbState::vacuum())]);
    }

    let s = saturation_parameter(params);
    let w = params.g * params.g / C64::new(params.gamma_perp(), params.delta_q());
    let f = |x: f64| self_consistency(x, s, w, params);

    // |Z| is bounded by κ + |Δω_c| + |w| and Re Z ≥ κ, which brackets every root.
    let z_max = params.kappa + params.delta_c().abs() + w.norm();
    let lo = 0.5 * params.eps_d.powi(2) / z_max.powi(2);
    let hi = if params.kappa > 0.0 {
        2.0 * params.eps_d.powi(2) / params.kappa.powi(2)
    } else if params.g > 0.0 {
        10.0 * critical_photon_number(params.g, params.delta())?.max(lo)
    } else {
        return Err(Error::RootScan("no finite bracket with kappa = 0 and g = 0".into()));
    };
    let ratio = (hi / lo).max(1.0 + 1e-9);

    let mut roots = Vec::new();
    let mut x_prev = lo;
    let mut f_prev = f(lo);
    if f_prev >= 0.0 {
        return Err(Error::RootScan(format!("f({lo:e}) = {f_prev:e} is not negative at the lower bracket")));
    }
    for k in 1..SCAN_POINTS {
        let x = lo * ratio.powf(k as f64 / (SCAN_POINTS - 1) as f64);
        let fx = f(x);
        if fx == 0.0 {
            roots.push(x);
        } else if (fx < 0.0) != (f_prev < 0.0) && f_prev != 0.0 {
            roots.push(bisect(f, x_prev, x));
        }
        x_prev = x;
        f_prev = fx;
    }
    if f_prev <= 0.0 {
        return Err(Error::RootScan(format!(
            "no sign change above x = {x_prev:e} (f = {f_prev:e}), {} roots so far",
            roots.len()
        )));
    }
    Ok(roots.into_iter().map(|x| classify(state_from_photons(x, s, w, params))).collect())
}

/// Steady states at one grid frequency with continuity labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub frequency: f64,
    pub branches: Vec<BranchPoint>,
    /// Branch id per entry of `branches`: 0 lower, 1 middle, 2 upper.
    pub labels: Vec<usize>,
}

/// Branch sets over a monotone grid of drive frequencies (rad/s).
pub fn mb_sweep(params: &SystemParams, frequencies: &[f64]) -> Result<Vec<SweepPoint>> {
    check_monotone(frequencies)?;
    let branches: Vec<Vec<BranchPoint>> = frequencies
        .par_iter()
        .map(|&w| mb_steady_states(&params.with_drive_frequency(w)))
        .collect::<Result<_>>()?;

    let mut labels: Vec<Vec<usize>> = branches
        .iter()
        .map(|b| if b.len() >= 3 { (0..b.len()).map(|i| i.min(2)).collect() } else { vec![0; b.len()] })
        .collect();
    if let Some(first) = branches.iter().position(|b| b.len() >= 3) {
        let last = branches.iter().rposition(|b| b.len() >= 3).unwrap_or(first);
        for i in (0..first).rev() {
            labels[i] = nearest_labels(&branches[i], &branches[i + 1], &labels[i + 1]);
        }
        for i in first + 1..branches.len() {
            if branches[i].len() < 3 || i > last {
                labels[i] = nearest_labels(&branches[i], &branches[i - 1], &labels[i - 1]);
            }
        }
    }
    Ok(frequencies
        .iter()
        .zip(branches)
        .zip(labels)
        .map(|((&frequency, branches), labels)| SweepPoint { frequency, branches, labels })
        .collect())
}

fn nearest_labels(here: &[BranchPoint], there: &[BranchPoint], there_labels: &[usize]) -> Vec<usize> {
    here.iter()
        .map(|b| {
            let x = b.photon_number().max(1e-300).ln();
            there
                .iter()
                .zip(there_labels)
                .min_by(|(p, _), (q, _)| {
                    let dp = (p.photon_number().max(1e-300).ln() - x).abs();
                    let dq = (q.photon_number().max(1e-300).ln() - x).abs();
                    dp.total_cmp(&dq)
                })
                .map(|(_, &l)| l)
                .unwrap_or(0)
        })
        .collect()
}

pub(crate) fn check_monotone(frequencies: &[f64]) -> Result<()> {
    if frequencies.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let up = frequencies.windows(2).all(|w| w[1] > w[0]);
    let down = frequencies.windows(2).all(|w| w[1] < w[0]);
    if up || down {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "frequencies", reason: "grid must be strictly monotone".into() })
    }
}

/// Fixed-step RK4 integration of the mean-field equations.
pub fn mb_integrate(state: &MbState, params: &SystemParams, t: f64, steps: usize) -> MbState {
    let h = t / steps as f64;
    let f = |y: [f64; 5]| mb_rhs(&MbState::from_real(y), params).to_real();
    let axpy = |y: [f64; 5], k: [f64; 5], c: f64| std::array::from_fn(|i| y[i] + c * k[i]);
    let mut y = state.to_real();
    for _ in 0..steps {
        let k1 = f(y);
        let k2 = f(axpy(y, k1, h / 2.0));
        let k3 = f(axpy(y, k2, h / 2.0));
        let k4 = f(axpy(y, k3, h));
        y = std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    MbState::from_real(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bistable point in units of κ: g/δ = 0.14, ε_d = 50κ/3, 2κ/γ = 12.
    fn unit_params() -> SystemParams {
        SystemParams {
            omega_c: 0.0,
            omega_q: -3782.539_682_539_683,
            g: 0.14 * 3782.539_682_539_683,
            chi: 0.0,
            eps_d: 50.0 / 3.0,
            omega_d: 53.2,
            kappa: 1.0,
            gamma: 1.0 / 6.0,
            gamma_phi: 0.0,
            temperature: 0.0,
        }
    }

    #[test]
    fn decoupled_fixed_point() {
        let p = SystemParams { g: 0.0, ..unit_params() };
        let alpha = p.eps_d / C64::new(p.kappa, p.delta_c());
        let d = mb_rhs(&MbState { alpha, beta: C64::new(0.0, 0.0), zeta: -1.0 }, &p);
        assert!(d.norm() < 1e-14);
    }

    #[test]
    fn vacuum_fixed_point() {
        let p = SystemParams { eps_d: 0.0, ..unit_params() };
        assert_eq!(mb_rhs(&MbState::vacuum(), &p).norm(), 0.0);
    }

    #[test]
    fn inversion_derivative_matches_component_form() {
        let p = unit_params();
        let st = MbState { alpha: C64::new(0.7, 0.0), beta: C64::new(0.0, -0.2), zeta: -0.5 };
        let d = mb_rhs(&st, &p);
        // −γ(ζ+1) − 4g(Re α Im β − Im α Re β)
        let oracle = -p.gamma * 0.5 - 4.0 * p.g * (0.7 * -0.2);
        assert!((d.zeta - oracle).abs() < 1e-12);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = unit_params();
        let st = MbState { alpha: C64::new(0.3, -1.1), beta: C64::new(0.05, 0.2), zeta: -0.7 };
        let j = mb_jacobian(&st, &p);
        let h = 1e-6;
        for c in 0..5 {
            let mut up = st.to_real();
            let mut dn = st.to_real();
            up[c] += h;
            dn[c] -= h;
            let fu = mb_rhs(&MbState::from_real(up), &p).to_real();
            let fd = mb_rhs(&MbState::from_real(dn), &p).to_real();
            for r in 0..5 {
                let fdiff = (fu[r] - fd[r]) / (2.0 * h);
                assert!((fdiff - j[r][c]).abs() < 1e-6 * (1.0 + j[r][c].abs()), "J[{r}][{c}]");
            }
        }
    }

    #[test]
    fn linear_regime_single_stable_branch() {
        let p = SystemParams { eps_d: 0.05, omega_d: 0.0, ..unit_params() };
        let b = mb_steady_states(&p).unwrap();
        assert_eq!(b.len(), 1);
        assert!(b[0].stable);
    }

    #[test]
    fn saturation_limit() {
        let p = unit_params();
        let s = saturation_parameter(&p);
        let zeta = |x: f64| -1.0 / (1.0 + s * x);
        assert!(zeta(1e12) > -1e-6 && zeta(1e12) < 0.0);
    }

    #[test]
    fn roots_agree_with_dense_scan_oracle() {
        // dense sign-change count on a uniform grid, independent of the log scan
        let mut p = unit_params();
        for (eps, wd) in [(50.0 / 3.0, 53.2), (50.0 / 3.0, 60.0), (8.0, 45.0), (0.5, 70.0), (30.0, 20.0)] {
            p.eps_d = eps;
            p.omega_d = wd;
            let roots = mb_steady_states(&p).unwrap();
            let s = saturation_parameter(&p);
            let zeta = |x: f64| -1.0 / (1.0 + s * x);
            let f = |x: f64| {
                let z = C64::new(p.kappa, p.delta_c()) - p.g * p.g * zeta(x) / C64::new(p.gamma_perp(), p.delta_q());
                x * z.norm_sqr() - eps * eps
            };
            let top = 2.0 * eps * eps / p.kappa.powi(2);
            let n = 400_000;
            let count = (1..=n)
                .filter(|&k| {
                    let (a, b) = (top * (k - 1) as f64 / n as f64, top * k as f64 / n as f64);
                    (f(a) < 0.0) != (f(b) < 0.0)
                })
                .count();
            assert_eq!(roots.len(), count, "eps {eps} wd {wd}");
            assert_eq!(roots.len() % 2, 1);
            for r in &roots {
                let res = mb_rhs(&r.state, &p).norm();
                assert!(res < 1e-10 * p.kappa.max(p.gamma).max(eps), "residual {res}");
                assert!(r.state.zeta >= -1.0 && r.state.zeta < 0.0);
                let bound = (1.0 - r.state.zeta.powi(2)) / 4.0;
                assert!(r.state.beta.norm_sqr() <= bound + 1e-9);
            }
        }
    }

    #[test]
    fn stability_matches_integration() {
        let mut p = unit_params();
        let mut checked = 0;
        for (eps, wd) in [(50.0 / 3.0, 45.0), (50.0 / 3.0, 53.2), (50.0 / 3.0, 55.0), (50.0 / 3.0, 60.0), (0.5, 70.0)] {
            p.eps_d = eps;
            p.omega_d = wd;
            for b in mb_steady_states(&p).unwrap() {
                let mut start = b.state;
                start.alpha += C64::new(1e-4, -1e-4) * (1.0 + b.state.alpha.norm());
                let end = mb_integrate(&start, &p, 60.0, 240_000);
                let drift = (end.alpha - b.state.alpha).norm();
                if b.stable {
                    assert!(drift < 1e-3 * (1.0 + b.state.alpha.norm()), "stable branch drifted {drift}");
                } else {
                    assert!(drift > 1e-2, "unstable branch stayed within {drift}");
                }
                checked += 1;
            }
        }
        assert!(checked >= 10);
    }

    #[test]
    fn monotone_grid_required() {
        assert!(mb_sweep(&unit_params(), &[1.0, 0.5, 2.0]).is_err());
        assert_eq!(mb_sweep(&unit_params(), &[]), Err(Error::EmptyGrid));
    }
}
