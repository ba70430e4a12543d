use std::f64::consts::PI;

use atomgate::cavity::{reflection_coefficient, CavityParams, GateBranch};
use atomgate::config::RunConfig;
use atomgate::protocols::{run_bell, run_eraser, run_truth_table};
use atomgate::pulse::{
    analyzer_error_channel, extra_photon_channel, photon_number_dist, prep_error_channel,
    CoherentPulse,
};
use atomgate::qlin::{
    fidelity_pure, optimal_phase_fidelity, partial_trace, phased_superposition, CMatrix,
    DensityMatrix, KrausChannel, PureState, Tensor, C64,
};
use atomgate::tomography::{
    born_probabilities, linear_inversion_data, mle_reconstruct, CountsRecord, FrequencyData,
    MeasurementSetting, MleOptions,
};
use proptest::prelude::*;

fn complex() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| C64::new(a, b))
}

fn pure(qubits: usize) -> impl Strategy<Value = PureState> {
    prop::collection::vec(complex(), 1 << qubits)
        .prop_filter("nonzero", |v| {
            v.iter().map(|z| z.norm_sqr()).sum::<f64>() > 1e-3
        })
        .prop_map(|v| PureState::new(v).unwrap())
}

fn mixed(qubits: usize) -> impl Strategy<Value = DensityMatrix> {
    let d = 1usize << qubits;
    prop::collection::vec(complex(), d * d)
        .prop_filter("nonzero", |v| {
            v.iter().map(|z| z.norm_sqr()).sum::<f64>() > 1e-3
        })
        .prop_map(move |v| {
            let g = CMatrix::from_vec(d, d, v);
            let m = &g * g.adjoint();
            let tr = m.trace();
            DensityMatrix::from_matrix(m / tr).unwrap()
        })
}

fn kraus_sum(ch: &KrausChannel, rho: &DensityMatrix) -> CMatrix {
    ch.ops()
        .iter()
        .map(|k| k * rho.matrix() * k.adjoint())
        .fold(CMatrix::zeros(rho.dim(), rho.dim()), |a, b| a + b)
}

fn u_v(qubits: usize) -> (PureState, PureState) {
    let n = 1 << qubits;
    (
        PureState::basis(qubits, 0).unwrap(),
        PureState::basis(qubits, n - 1).unwrap(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn tensor_is_associative(a in pure(1), b in pure(1), c in pure(1)) {
        let left = a.tensor(&b).unwrap().tensor(&c).unwrap();
        let right = a.tensor(&b.tensor(&c).unwrap()).unwrap();
        prop_assert!((left.amplitudes() - right.amplitudes()).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_recovers_factors(a in mixed(1), b in mixed(2)) {
        let joint = a.tensor(&b).unwrap();
        prop_assert!(partial_trace(&joint, &[0]).unwrap().max_abs_diff(&a) < 1e-12);
        prop_assert!(partial_trace(&joint, &[1, 2]).unwrap().max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn fidelity_ignores_global_phase(rho in mixed(2), psi in pure(2), theta in 0.0..(2.0 * PI)) {
        let f0 = fidelity_pure(&rho, &psi).unwrap();
        let f1 = fidelity_pure(&rho, &psi.scale_phase(theta)).unwrap();
        prop_assert!((f0 - f1).abs() < 1e-12);
    }

    #[test]
    fn optimal_phase_beats_a_fine_grid(rho in mixed(2)) {
        let (u, v) = u_v(2);
        let opt = optimal_phase_fidelity(&rho, &u, &v).unwrap();
        let mut best = 0.0f64;
        for k in 0..10_000 {
            let phi = -PI + 2.0 * PI * k as f64 / 10_000.0;
            let f = fidelity_pure(&rho, &phased_superposition(&u, &v, phi).unwrap()).unwrap();
            prop_assert!(f <= opt.fidelity + 1e-12);
            best = best.max(f);
        }
        prop_assert!(opt.fidelity - best < 1e-6);
        let at = fidelity_pure(&rho, &phased_superposition(&u, &v, opt.phi).unwrap()).unwrap();
        prop_assert!((at - opt.fidelity).abs() < 1e-12);
    }

    #[test]
    fn trace_preserving_channels_keep_trace(
        rho1 in mixed(1),
        f in 0.0..=1.0f64,
        e in 0.0..=(2.0 / 3.0f64),
        overlap in 0.0..=1.0f64,
        lc in 0.0..=1.0f64,
        lu in 0.0..=1.0f64,
    ) {
        let branch = GateBranch::conditional(
            C64::new((1.0 - lc).sqrt(), 0.0),
            C64::new(-(1.0 - lu).sqrt(), 0.0),
        ).unwrap();
        let channels = [
            prep_error_channel(f).unwrap(),
            analyzer_error_channel(e).unwrap(),
            extra_photon_channel(&branch, overlap, &PureState::down_x()).unwrap(),
            KrausChannel::full_dephasing(),
        ];
        for ch in &channels {
            let out = kraus_sum(ch, &rho1);
            prop_assert!((out.trace().re - 1.0).abs() < 1e-12);
            prop_assert!(DensityMatrix::from_matrix(out).is_ok());
        }
    }

    #[test]
    fn reflection_never_amplifies(
        g in 0.0..100.0f64,
        kappa in 0.1..100.0f64,
        share in 0.0..=1.0f64,
        gamma in 0.1..100.0f64,
        dc in -200.0..200.0f64,
        da in -200.0..200.0f64,
    ) {
        let p = CavityParams { g, kappa, kappa_in: share * kappa, gamma, delta_c: dc, delta_a: da };
        for coupled in [false, true] {
            prop_assert!(reflection_coefficient(&p, coupled).norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn photon_distribution_is_normalized(nbar in 0.0..=1.0f64, n_max in 2usize..30) {
        let dist = photon_number_dist(&CoherentPulse::new(nbar, 0.7), n_max).unwrap();
        prop_assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(dist.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn born_probabilities_are_distributions(rho in mixed(3)) {
        for s in MeasurementSetting::all(3) {
            let p = born_probabilities(&rho, &s).unwrap();
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn linear_inversion_is_exact(r1 in mixed(1), r2 in mixed(2), r3 in mixed(3)) {
        for rho in [r1, r2, r3] {
            let settings = MeasurementSetting::all(rho.qubits());
            let probs: Vec<_> = settings.iter().map(|s| born_probabilities(&rho, s).unwrap()).collect();
            let li = linear_inversion_data(&FrequencyData::exact(&settings, &probs)).unwrap();
            prop_assert!((li - rho.matrix()).iter().all(|z| z.norm() < 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mle_is_physical_and_monotone(counts in prop::collection::vec(0u64..40, 36)) {
        let settings = MeasurementSetting::all(2);
        let records: Vec<CountsRecord> = settings
            .iter()
            .zip(counts.chunks(4))
            .map(|(s, c)| {
                let mut c = c.to_vec();
                c[0] += 1;
                CountsRecord::new(s.clone(), c).unwrap()
            })
            .collect();
        let opts = MleOptions { max_iter: 300, ..MleOptions::default() };
        let rep = mle_reconstruct(&records, &opts).unwrap();
        prop_assert!(rep.monotone);
        prop_assert!(DensityMatrix::from_matrix(rep.rho.matrix().clone()).is_ok());
        prop_assert!(rep.rho.eigenvalues().iter().all(|&x| x > -1e-10));
    }

    #[test]
    fn protocol_outputs_stay_physical(
        overlap in 0.5..=1.0f64,
        prep in 0.8..=1.0f64,
        jitter in 0.0..600.0f64,
        e in 0.0..0.1f64,
        offset in -900.0..900.0f64,
    ) {
        let mut cfg = RunConfig::paper();
        cfg.imperfections.mode_overlap = overlap;
        cfg.imperfections.prep_fidelity = prep;
        cfg.imperfections.freq_jitter_khz = jitter;
        cfg.imperfections.photonic_meas_error = e;
        cfg.pulses.bell.carrier_offset_khz = offset;
        cfg.pulses.eraser.carrier_offset_khz = offset;
        for row in &run_truth_table(&cfg).unwrap().tables["truth_table"].rows {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&p| p >= 0.0));
        }
        let bell = run_bell(&cfg).unwrap();
        let eraser = run_eraser(&cfg).unwrap();
        for rho in bell.density_matrices.values().chain(eraser.density_matrices.values()) {
            prop_assert!(DensityMatrix::from_matrix(rho.matrix().clone()).is_ok());
        }
        for s in bell.settings.iter().chain(&eraser.settings) {
            prop_assert!((s.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
