mod common;

use bistab::fpe::{effective_params, fpe_first_moment, hyp0f2};
use bistab::hilbert::{partial_trace, tensor, DensityMatrix, HilbertSpec, Operator, StateVector, Subsystem, C64};
use bistab::master::{model_steady_state, observables};
use bistab::meanfield::{mb_rhs, mb_steady_states};
use bistab::models::{
    build_gjc, build_jc, collapse_channels, fig2_params, ghz, mhz, ChannelKind, Model, SystemParams,
};
use bistab::phasespace::{find_modes, photon_distribution, q_function, GridSpec};
use proptest::prelude::*;

fn c64() -> impl Strategy<Value = C64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(r, i)| C64::new(r, i))
}

fn operator(dim: usize) -> impl Strategy<Value = Operator> {
    proptest::collection::vec(proptest::option::weighted(0.6, c64()), dim * dim).prop_map(move |v| {
        Operator::from_triplets(
            dim,
            v.into_iter().enumerate().filter_map(|(k, x)| x.map(|x| (k / dim, k % dim, x))),
        )
    })
}

fn density(dim: usize) -> impl Strategy<Value = DensityMatrix> {
    // Mixture of two random pure states.
    (proptest::collection::vec(c64(), dim), proptest::collection::vec(c64(), dim), 0.0..1.0f64).prop_map(
        move |(u, v, w)| {
            let mut a = StateVector::new(u);
            let mut b = StateVector::new(v);
            a.normalize();
            b.normalize();
            let (ra, rb) = (DensityMatrix::from_pure(&a), DensityMatrix::from_pure(&b));
            let data = ra.as_slice().iter().zip(rb.as_slice()).map(|(x, y)| x * w + y * (1.0 - w)).collect();
            DensityMatrix::from_row_major(dim, data).unwrap()
        },
    )
}

/// Dispersive parameter sets around the bistability point.
fn params() -> impl Strategy<Value = SystemParams> {
    (0.05..0.2f64, -30.0..30.0f64, 1.0..20.0f64, 0.3..3.0f64, 0.0..0.5f64).prop_map(|(g_over_delta, det, scale, kg, gp)| {
        let base = fig2_params();
        let delta = base.delta();
        SystemParams {
            g: g_over_delta * delta,
            omega_d: base.omega_d + mhz(det),
            gamma: base.kappa * kg,
            gamma_phi: base.kappa * gp,
            ..base
        }
        .with_drive_scale(scale)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjoint_is_an_involution(a in operator(5)) {
        prop_assert_eq!(a.adjoint().adjoint(), a);
    }

    #[test]
    fn tensor_is_associative(a in operator(2), b in operator(3), c in operator(2)) {
        // Products of three floats associate only up to rounding.
        let left = tensor(&tensor(&a, &b), &c).to_dense();
        let right = tensor(&a, &tensor(&b, &c)).to_dense();
        for (x, y) in left.iter().zip(&right) {
            prop_assert!((x - y).norm() <= 4.0 * f64::EPSILON * x.norm());
        }
    }

    #[test]
    fn tensor_mixed_product(a in operator(2), b in operator(3), c in operator(2), d in operator(3)) {
        let lhs = tensor(&a, &b).try_mul(&tensor(&c, &d)).unwrap();
        let rhs = tensor(&a.try_mul(&c).unwrap(), &b.try_mul(&d).unwrap());
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn operator_constructors_are_deterministic(a in operator(4)) {
        let t: Vec<_> = a.triplets().collect();
        prop_assert_eq!(Operator::from_triplets(4, t.clone()), Operator::from_triplets(4, t));
    }

    #[test]
    fn partial_trace_recovers_product_factors(rc in density(4), rq in density(3)) {
        let spec = HilbertSpec::new(4, 3).unwrap();
        let rho = rc.kron(&rq);
        let c = partial_trace(&rho, &spec, Subsystem::Cavity).unwrap();
        let q = partial_trace(&rho, &spec, Subsystem::Transmon).unwrap();
        for (x, y) in c.as_slice().iter().zip(rc.as_slice()) {
            prop_assert!((x - y).norm() < 1e-12);
        }
        for (x, y) in q.as_slice().iter().zip(rq.as_slice()) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn hamiltonians_are_hermitian(p in params(), levels in 2usize..5) {
        for model in [Model::Jc, Model::Gjc(levels), Model::Duffing] {
            let spec = model.space(6).unwrap();
            let h = model.hamiltonian(&p, &spec).unwrap();
            prop_assert!(h.hermiticity_error() <= 1e-12 * (1.0 + h.gershgorin_radius(C64::new(0.0, 0.0))));
        }
    }

    #[test]
    fn two_level_gjc_equals_jc(p in params()) {
        let spec = HilbertSpec::new(7, 2).unwrap();
        prop_assert_eq!(build_gjc(&p, &spec).unwrap(), build_jc(&p, &spec).unwrap());
    }

    #[test]
    fn undriven_jc_conserves_excitations(p in params(), cutoff in 2usize..9) {
        let p = SystemParams { eps_d: 0.0, ..p };
        let spec = HilbertSpec::new(cutoff, 2).unwrap();
        let h = build_jc(&p, &spec).unwrap();
        let n = spec.on_cavity(&bistab::hilbert::number(cutoff).unwrap()).unwrap();
        let e = spec.on_transmon(&bistab::hilbert::ketbra(2, 1, 1).unwrap()).unwrap();
        let comm = h.commutator(&(&n + &e)).unwrap();
        let scale = h.gershgorin_radius(C64::new(0.0, 0.0));
        prop_assert!(comm.to_dense().iter().all(|z| z.norm() <= 1e-12 * scale));
    }

    #[test]
    fn channel_rates_are_nonnegative(p in params(), t in prop_oneof![Just(0.0), 0.01..0.3f64]) {
        let p = SystemParams { temperature: t, ..p };
        let spec = HilbertSpec::new(5, 3).unwrap();
        let ch = collapse_channels(&p, &spec).unwrap();
        prop_assert!(ch.iter().all(|c| c.rate >= 0.0));
        let thermal = ch.iter().any(|c| c.kind == ChannelKind::CavityThermal);
        prop_assert_eq!(thermal, t > 0.0);
    }

    #[test]
    fn meanfield_roots_are_odd_and_converged(p in params()) {
        let roots = mb_steady_states(&p).unwrap();
        prop_assert!(roots.len() == 1 || roots.len() == 3);
        let scale = p.kappa.max(p.gamma).max(p.eps_d.abs());
        for r in &roots {
            prop_assert!(mb_rhs(&r.state, &p).norm() < 1e-10 * scale);
            prop_assert!((-1.0..0.0).contains(&r.state.zeta));
        }
    }

    #[test]
    fn fpe_conjugation_symmetry(p in params(), chi in -300.0..-20.0f64) {
        let p = SystemParams { chi: mhz(chi), ..p };
        // Δc → −Δc and Δq → −Δq together, with χ → −χ.
        let omega_d = 2.0 * p.omega_c - p.omega_d;
        let q = SystemParams { omega_d, omega_q: omega_d + p.omega_d - p.omega_q, chi: -p.chi, ..p };
        prop_assert!((q.delta_c() + p.delta_c()).abs() < 1e-6 * p.delta_c().abs().max(1.0));
        let (ep, eq) = (effective_params(&p).unwrap(), effective_params(&q).unwrap());
        prop_assert!((ep.gamma_c_tilde.conj() - eq.gamma_c_tilde).norm() < 1e-9 * ep.gamma_c_tilde.norm());
        prop_assert!((ep.c.conj() - eq.c).norm() < 1e-9 * ep.c.norm());
        let (a, b) = (fpe_first_moment(&p).unwrap().norm(), fpe_first_moment(&q).unwrap().norm());
        prop_assert!((a - b).abs() < 1e-8 * a.max(1e-12));
    }

    #[test]
    fn fpe_is_continuous_in_drive_frequency(p in params()) {
        let h = 1e-6 * p.kappa;
        let a = fpe_first_moment(&p).unwrap();
        let b = fpe_first_moment(&p.with_drive_frequency(p.omega_d + h)).unwrap();
        prop_assert!((a - b).norm() < 1e-3 * a.norm().max(1e-6));
    }

    #[test]
    fn hyp0f2_matches_fixed_point_series(
        ar in 0.5..20.0f64, ai in -5.0..5.0f64, br in 0.5..20.0f64, bi in -5.0..5.0f64,
        r in 0.0..100.0f64, th in 0.0..std::f64::consts::TAU,
    ) {
        let (a, b, z) = (C64::new(ar, ai), C64::new(br, bi), C64::from_polar(r, th));
        let got = hyp0f2(a, b, z).unwrap();
        let want = common::hyp0f2_fixed_point(a, b, z, 200);
        prop_assert!(common::rel_err(got, want) < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn coherent_state_has_one_mode(r in 0.0..3.0f64, th in 0.0..std::f64::consts::TAU) {
        let alpha = C64::from_polar(r, th);
        let rho = DensityMatrix::from_pure(&StateVector::coherent(40, alpha));
        let q = q_function(&rho, &GridSpec::symmetric(4.5, 61)).unwrap();
        let modes = find_modes(&q).unwrap();
        prop_assert_eq!(modes.peaks.len(), 1);
        let cell = 9.0 / 60.0;
        prop_assert!((modes.peaks[0].x - alpha.re).abs() <= cell && (modes.peaks[0].y - alpha.im).abs() <= cell);
    }

    #[test]
    fn photon_distribution_mean_is_number_expectation(rho in density(12)) {
        let pn = photon_distribution(&rho);
        let mean: f64 = pn.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        let n = bistab::hilbert::expectation(&rho, &bistab::hilbert::number(12).unwrap()).unwrap();
        prop_assert!((mean - n.re).abs() < 1e-9);
        prop_assert!((pn.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn steady_states_are_physical(p in params(), levels in 2usize..4) {
        for model in [Model::Jc, Model::Gjc(levels), Model::Duffing] {
            let (spec, rho) = model_steady_state(&p, model, 10).unwrap();
            let o = observables(&rho, &spec).unwrap();
            prop_assert!((rho.trace().re - 1.0).abs() < 1e-9);
            if let Some(sz) = o.sigma_z {
                prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&sz));
            }
            if !o.transmon_populations.is_empty() {
                prop_assert!((o.transmon_populations.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn two_level_gjc_steady_state_equals_jc(p in params()) {
        let f = |m| {
            let (spec, rho) = model_steady_state(&p, m, 10).unwrap();
            observables(&rho, &spec).unwrap()
        };
        let (a, b) = (f(Model::Jc), f(Model::Gjc(2)));
        prop_assert!((a.alpha - b.alpha).norm() < 1e-9);
        prop_assert!((a.n_photon - b.n_photon).abs() < 1e-9);
    }
}

#[test]
fn dressed_cavity_frequency_of_d2() {
    let p = bistab::models::device_preset("D2").unwrap();
    let f = (p.omega_c + p.g * p.g / p.delta()) / ghz(1.0);
    assert!((f - 10.612).abs() < 0.003, "{f}");
}
