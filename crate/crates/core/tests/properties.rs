use proptest::prelude::*;

use ustrong_core::correlations::{g2_tau, StationarySource};
use ustrong_core::dressed::{dress, diagonalize, transition_table};
use ustrong_core::dynamics::{
    all_rates, build_liouvillian, steady_state, thermal_occupation, BathSpec,
};
use ustrong_core::model::{
    EmitterParams, ModeParams, ModelSpec, MultiTlsParams, RabiParams, TwoModeParams,
};
use ustrong_core::operator::{embed, fock_annihilation, CMatrix, HilbertSpace, C64};
use ustrong_core::thermal::{g2_zero, thermal_state, Region};

fn rabi(g: f64, omega_x: f64, n: usize) -> ModelSpec {
    ModelSpec::Rabi(RabiParams { omega0: 1.0, omega_x, g, n_fock: n })
}

fn any_model() -> impl Strategy<Value = ModelSpec> {
    prop_oneof![
        (0.0..1.2f64, 0.5..1.5f64, 4usize..14).prop_map(|(g, w, n)| rabi(g, w, n)),
        (1usize..4, 0.0..1.0f64, 4usize..8).prop_map(|(j, g, n)| {
            ModelSpec::MultiTls(MultiTlsParams {
                omega0: 1.0,
                emitters: (0..j)
                    .map(|k| EmitterParams { omega_x: 1.0 + 0.1 * k as f64, g: g * (1.0 - 0.2 * k as f64) })
                    .collect(),
                n_fock: n,
            })
        }),
        (0.0..0.8f64, 3usize..6).prop_map(|(g, n)| {
            ModelSpec::TwoMode(TwoModeParams {
                modes: [
                    ModeParams { omega0: 1.0, g, n_fock: n },
                    ModeParams { omega0: 2.0, g: 2.0 * g, n_fock: 3 },
                ],
                omega_x: 1.0,
            })
        }),
    ]
}

fn random_hermitian(d: usize, seed: &[f64]) -> CMatrix {
    let mut m = CMatrix::from_fn(d, d, |i, j| {
        let k = (i * d + j) % seed.len();
        C64::new(seed[k], seed[(k + 1) % seed.len()])
    });
    m = &m + m.adjoint();
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn embedded_number_operator_keeps_its_spectrum(
        dims in prop::collection::vec(2usize..5, 1..4),
        pick in 0usize..8,
    ) {
        let slot = pick % dims.len();
        let space = HilbertSpace::new(dims.clone()).unwrap();
        let a = fock_annihilation(dims[slot]).unwrap();
        let n = a.adjoint().mul(&a).unwrap();
        let big = embed(&n, &space, slot).unwrap();
        let mut eig: Vec<f64> = big.matrix().clone().symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        let rest = space.total_dim() / dims[slot];
        let mut expect: Vec<f64> =
            (0..dims[slot]).flat_map(|m| std::iter::repeat(m as f64).take(rest)).collect();
        expect.sort_by(f64::total_cmp);
        for (x, y) in eig.iter().zip(&expect) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn hamiltonians_are_hermitian_and_conserve_parity(spec in any_model()) {
        let sys = spec.build().unwrap();
        prop_assert!(sys.hamiltonian.is_hermitian(1e-12));
        let comm = sys.hamiltonian.commutator(&sys.parity).unwrap();
        prop_assert!(comm.max_norm() < 1e-12);
    }

    #[test]
    fn field_only_connects_opposite_parities(spec in any_model()) {
        let (basis, table) = dress(&spec.build().unwrap()).unwrap();
        let p = basis.parities();
        for j in 0..basis.dim() {
            for k in 0..basis.dim() {
                if p[j] == p[k] {
                    prop_assert_eq!(table.field()[(j, k)], C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn dressing_is_deterministic(spec in any_model()) {
        let sys = spec.build().unwrap();
        let a = diagonalize(&sys.hamiltonian, &sys.parity).unwrap();
        let b = diagonalize(&sys.hamiltonian, &sys.parity).unwrap();
        prop_assert_eq!(a.energies(), b.energies());
        prop_assert_eq!(a.vectors(), b.vectors());
        let ta = transition_table(&a, &sys.field, &sys.channels).unwrap();
        let tb = transition_table(&b, &sys.field, &sys.channels).unwrap();
        prop_assert_eq!(ta.field(), tb.field());
    }

    #[test]
    fn liouvillian_preserves_trace_and_hermiticity(
        g in 0.0..1.0f64,
        t in 0.05..0.5f64,
        ga in 0.001..0.05f64,
        gx in 0.001..0.05f64,
        seed in prop::collection::vec(-1.0..1.0f64, 7),
    ) {
        let (basis, table) = dress(&rabi(g, 1.0, 12).build().unwrap()).unwrap();
        let bath = BathSpec::new(ga, gx, t).unwrap();
        let cut = 8;
        let rates = all_rates(&basis, &table, &bath, cut, 1.0).unwrap();
        let l = build_liouvillian(&basis, cut, &rates).unwrap();
        let rho = random_hermitian(cut, &seed);
        let out = l.apply(&rho).unwrap();
        prop_assert!(out.trace().norm() < 1e-12);
        prop_assert!((&out - out.adjoint()).iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn rates_obey_detailed_balance(g in 0.0..1.2f64, t in 0.03..1.0f64) {
        let (basis, table) = dress(&rabi(g, 1.0, 12).build().unwrap()).unwrap();
        let bath = BathSpec::new(0.01, 0.02, t).unwrap();
        for ch in all_rates(&basis, &table, &bath, 10, 1.0).unwrap() {
            for r in ch.rates {
                prop_assert!(r.rate >= 0.0);
                if r.rate > 0.0 {
                    let ratio = r.upward() / r.downward();
                    prop_assert!((ratio - (-r.gap / t).exp()).abs() < 1e-12 * ratio.max(1.0));
                    prop_assert!((r.occupation - thermal_occupation(r.gap, t)).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn thermal_populations_are_boltzmann(g in 0.0..1.2f64, t in 0.02..1.0f64) {
        let (basis, _) = dress(&rabi(g, 1.0, 12).build().unwrap()).unwrap();
        let s = thermal_state(&basis, t).unwrap();
        let sum: f64 = s.populations().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(s.populations().windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn region_labels_follow_thresholds(v in 0.0..5.0f64) {
        let r = Region::classify(v);
        let expect = if v < 1.0 {
            Region::Blue
        } else if v <= 1.999 {
            Region::Gray
        } else if v <= 2.0 + 1e-9 {
            Region::Green
        } else {
            Region::Red
        };
        prop_assert_eq!(r, expect);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn steady_state_is_the_thermal_state(
        g in 0.05..1.0f64,
        t in 0.05..0.3f64,
        ga in 0.002..0.05f64,
        gx in 0.002..0.05f64,
    ) {
        let src = StationarySource::new(
            &rabi(g, 1.0, 16).build().unwrap(),
            BathSpec::new(ga, gx, t).unwrap(),
            Some(8),
        )
        .unwrap();
        let rho = steady_state(&src.liouvillian).unwrap();
        let p = src.state.populations();
        let norm: f64 = p[..8].iter().sum();
        for j in 0..8 {
            for k in 0..8 {
                let expect = if j == k { p[j] / norm } else { 0.0 };
                prop_assert!((rho.get(j, k).re - expect).abs() < 1e-6);
                prop_assert!(rho.get(j, k).im.abs() < 1e-6);
            }
        }
    }

    #[test]
    fn regression_at_zero_delay_matches_direct_value(g in 0.05..1.0f64, t in 0.05..0.3f64) {
        let src = StationarySource::new(
            &rabi(g, 1.0, 16).build().unwrap(),
            BathSpec::new(0.01, 0.01, t).unwrap(),
            None,
        )
        .unwrap();
        let direct = g2_zero(&src.basis, &src.table, &src.state, src.level_cut()).unwrap();
        let regressed = g2_tau(&src, &[0.0]).unwrap().values[0];
        prop_assert!((direct - regressed).abs() < 1e-6 * direct.max(1.0));
    }
}
