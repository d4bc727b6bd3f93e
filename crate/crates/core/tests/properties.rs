use proptest::prelude::*;
use qndsim_core::analysis::{fit_purity, sweep_tau};
use qndsim_core::sme::{
    derive_seed, run_generator, run_generator_with, Backend, OscillatorState, RunOptions,
    SimulationConfig,
};
use qndsim_core::Qubit;

fn short(n_max: usize, k: f64, n_bar: f64, seed: u64) -> SimulationConfig {
    let mut cfg = SimulationConfig {
        k,
        t_final: 1.0,
        sample_every: 100,
        seed,
        ..Default::default()
    };
    cfg.model.n_max = n_max;
    cfg.initial.oscillator = OscillatorState::Thermal { n_bar };
    // A ground-state qubit keeps the orphan level empty.
    cfg.initial.qubit = Qubit::Ground;
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn records_are_well_formed(n_max in 3usize..8, k in 0.05f64..2.0, n_bar in 0.0f64..0.4, seed in any::<u64>()) {
        let cfg = short(n_max, k, n_bar, seed);
        let a = run_generator(&cfg).unwrap().record;
        a.validate().unwrap();
        let floor = 1.0 / (2 * n_max + 2) as f64;
        for &p in &a.purity {
            prop_assert!(p >= floor - 1e-9 && p <= 1.0 + 1e-9);
        }
        for &s in &a.sigma_ee {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&s));
        }
        let b = run_generator(&cfg).unwrap().record;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn backends_agree(n_max in 3usize..6, k in 0.05f64..1.5, seed in any::<u64>()) {
        let cfg = short(n_max, k, 0.2, seed);
        let blocks = run_generator(&cfg).unwrap().record;
        let dense = run_generator_with(&cfg, &RunOptions { backend: Backend::Dense, ..Default::default() })
            .unwrap()
            .record;
        for (x, y) in blocks.sigma_ee.iter().zip(&dense.sigma_ee) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        for (x, y) in blocks.purity.iter().zip(&dense.purity) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn derived_seeds_differ_across_indices(base in any::<u64>(), k in 0.01f64..10.0, i in 0u64..1000) {
        prop_assert_ne!(derive_seed(base, k, i), derive_seed(base, k, i + 1));
    }

    #[test]
    fn fit_recovers_exact_saturation(tau in 0.5f64..50.0, p0 in 0.05f64..0.8) {
        let times: Vec<f64> = (0..400).map(|i| i as f64 * tau / 40.0).collect();
        let purity: Vec<f64> = times.iter().map(|t| 1.0 - (1.0 - p0) * (-t / tau).exp()).collect();
        let fit = fit_purity(&times, &purity).unwrap();
        prop_assert!((fit.tau - tau).abs() < 1e-6 * tau);
        prop_assert!((fit.p0 - p0).abs() < 1e-12);
    }

    #[test]
    fn config_json_roundtrips(n_max in 2usize..40, k in 0.0f64..10.0, seed in any::<u64>()) {
        let cfg = short(n_max, k, 1.0, seed);
        let back: SimulationConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        prop_assert_eq!(cfg.config_hash(), back.config_hash());
        prop_assert_eq!(cfg, back);
    }
}

#[test]
fn sweep_results_do_not_depend_on_order() {
    let mut base = short(12, 0.5, 0.5, 3);
    base.t_final = 5.0;
    let forward = sweep_tau(&[0.5, 2.0], &base, 8);
    let backward = sweep_tau(&[2.0, 0.5], &base, 8);
    for p in &forward {
        let q = backward.iter().find(|q| q.k == p.k).unwrap();
        assert_eq!(p.seeds, q.seeds);
        let (a, sa) = p.outcome.as_ref().unwrap();
        let (b, sb) = q.outcome.as_ref().unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
    }
}
