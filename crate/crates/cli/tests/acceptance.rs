//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if a criterion outside `KNOWN_RED` fails.

use std::fs;
use std::path::Path;
use std::time::Instant;

use qndsim_cli::commands::JumpReport;
use qndsim_cli::{preset, run, Command, RunPlan, RunSettings};
use qndsim_core::algebra::{ComplexOperator, DensityMatrix, C64};
use qndsim_core::analysis::{
    ensemble_seeds, first_crossing_below, for_each_trajectory, jump_detection,
    reduced_dynamics_oracle, summarize_ensemble, sweep_tau, SubspaceSystem,
};
use qndsim_core::sme::{
    run_filter, run_generator, run_generator_with, run_unconditional, InitialState,
    OscillatorState, RunOptions, SimulationConfig,
};
use qndsim_core::{ModelConfig, Qubit};
use rayon::prelude::*;

/// Criteria expected to fail; see the decisions ledger.
const KNOWN_RED: [&str; 2] = ["C6", "C9"];

/// Truncation for Monte Carlo ensembles at thermal n̄ = 3.
const ENSEMBLE_N_MAX: usize = 60;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

/// Bose-Einstein weight of level `n`, untruncated.
fn thermal_weight(n_bar: f64, n: usize) -> f64 {
    (n_bar / (n_bar + 1.0)).powi(n as i32) / (n_bar + 1.0)
}

fn fock(n: usize) -> InitialState {
    InitialState {
        oscillator: OscillatorState::Fock { n },
        qubit: Qubit::Excited,
    }
}

fn thermal_config(k: f64, t_final: f64, sample_interval: f64) -> SimulationConfig {
    let dt = if k > 1.0 { 1e-4 } else { 1e-3 };
    let mut c = SimulationConfig {
        k,
        dt,
        t_final,
        sample_every: (sample_interval / dt).round() as usize,
        ..Default::default()
    };
    c.model.n_max = ENSEMBLE_N_MAX;
    c
}

fn c1_rabi() -> Verdict {
    let mut worst: f64 = 0.0;
    for n in [0usize, 1, 4] {
        let cfg = SimulationConfig {
            k: 0.0,
            t_final: 20.0,
            sample_every: 10,
            initial: fock(n),
            ..Default::default()
        };
        let r = run_unconditional(&cfg).expect("unconditional run").record;
        let w = ((n + 1) as f64).sqrt();
        for (t, s) in r.times.iter().zip(&r.sigma_ee) {
            worst = worst.max((s - (w * t).cos().powi(2)).abs());
        }
    }
    verdict(worst <= 1e-5, format!("sup error {worst:.2e} (limit 1e-5)"))
}

fn c2_collapse_revival() -> Verdict {
    let n_bar = 3.0;
    let mut cfg = thermal_config(0.0, 50.0, 0.01);
    cfg.initial.oscillator = OscillatorState::Thermal { n_bar };
    let r = run_unconditional(&cfg).expect("unconditional run").record;
    let mut worst: f64 = 0.0;
    for (t, s) in r.times.iter().zip(&r.sigma_ee) {
        let oracle: f64 = (0..400)
            .map(|n| thermal_weight(n_bar, n) * (((n + 1) as f64).sqrt() * t).cos().powi(2))
            .sum();
        worst = worst.max((s - oracle).abs());
    }
    verdict(
        worst <= 1e-5,
        format!("sup error {worst:.2e} over gt in [0, 50] (limit 1e-5)"),
    )
}

fn c3_purity_preservation() -> Verdict {
    let cfg = SimulationConfig {
        k: 1.0,
        t_final: 50.0,
        sample_every: 10,
        initial: fock(2),
        ..Default::default()
    };
    let r = run_generator(&cfg).expect("generator run").record;
    let worst = r.purity.iter().map(|p| (p - 1.0).abs()).fold(0.0, f64::max);
    verdict(
        worst < 1e-3,
        format!("max |P - 1| = {worst:.2e} (limit 1e-3)"),
    )
}

fn c4_subspace_collapse() -> Verdict {
    let n_bar = 3.0;
    let n = 200;
    let cfg = thermal_config(0.1, 200.0, 0.05);
    let mut winners: Vec<Option<usize>> = Vec::with_capacity(n);
    for_each_trajectory(&cfg, n, |_, r| {
        let w = (0..r.len())
            .map(|i| r.dominant_subspace(i))
            .find(|&(_, p)| p > 0.95)
            .map(|(m, _)| m);
        winners.push(w);
        Ok(())
    })
    .expect("ensemble");
    let collapsed: Vec<usize> = winners.iter().flatten().copied().collect();
    let n_c = collapsed.len();
    let fraction = n_c as f64 / n as f64;
    // Subspace m holds |m-1, e>, so its initial weight is the thermal weight of m - 1.
    let q = |m: usize| {
        if m == 0 {
            0.0
        } else {
            thermal_weight(n_bar, m - 1)
        }
    };
    let mut bins: Vec<(String, f64, usize)> = Vec::new();
    let mut m = 1;
    while n_c as f64 * q(m) >= 5.0 {
        bins.push((
            format!("m={m}"),
            q(m),
            collapsed.iter().filter(|&&x| x == m).count(),
        ));
        m += 1;
    }
    let tail_q = 1.0 - (0..m).map(q).sum::<f64>();
    bins.push((
        format!("m>={m}"),
        tail_q,
        collapsed.iter().filter(|&&x| x >= m).count(),
    ));
    let zero = collapsed.iter().filter(|&&x| x == 0).count();
    let mut multinomial_ok = zero == 0;
    let mut parts = Vec::new();
    for (label, p, obs) in &bins {
        let e = n_c as f64 * p;
        let sigma = (n_c as f64 * p * (1.0 - p)).sqrt();
        let ok = (*obs as f64 - e).abs() <= 3.0 * sigma;
        multinomial_ok &= ok;
        parts.push(format!("{label}: {obs} vs {e:.1}±{sigma:.1}"));
    }
    verdict(
        fraction >= 0.9 && multinomial_ok,
        format!("{n_c}/{n} collapsed by gt=200; {}", parts.join(", ")),
    )
}

fn c5_c6_martingale_and_purity() -> (Verdict, Verdict) {
    let n = 300;
    let cfg = thermal_config(1.0, 20.0, 0.1);
    let s = summarize_ensemble(&cfg, n).expect("ensemble");
    let p0 = s.mean_p_m[0].clone();
    let sqrt_n = (n as f64).sqrt();
    let mut worst_ratio: f64 = 0.0;
    let mut martingale_ok = true;
    for (mean, std) in s.mean_p_m.iter().zip(&s.std_p_m) {
        for m in (0..p0.len()).filter(|&m| p0[m] > 0.01) {
            let se = std[m] / sqrt_n;
            let dev = (mean[m] - p0[m]).abs();
            if dev > 4.0 * se + 1e-12 {
                martingale_ok = false;
            }
            if se > 0.0 {
                worst_ratio = worst_ratio.max(dev / se);
            }
        }
    }
    let c5 = verdict(
        martingale_ok,
        format!("largest |mean p_m - p_m(0)| = {worst_ratio:.2} standard errors over {} samples (limit 4)", s.times.len()),
    );

    let mut worst_drop: f64 = f64::NEG_INFINITY;
    let mut monotone = true;
    for i in 1..s.times.len() {
        let se = s.stderr_purity(i).max(s.stderr_purity(i - 1));
        let drop = s.mean_purity[i - 1] - s.mean_purity[i];
        if drop > 2.0 * se + 1e-12 {
            monotone = false;
        }
        if se > 0.0 {
            worst_drop = worst_drop.max(drop / se);
        }
    }
    let (ito_ok, ito_detail) = ito_consistency();
    let c6 = verdict(
        monotone && ito_ok,
        format!(
            "largest step-to-step drop {worst_drop:.2} standard errors (limit 2); {ito_detail}"
        ),
    );
    (c5, c6)
}

/// Block-diagonal state `Σ p_m |ψ_m⟩⟨ψ_m|` at `n_max = 3` with
/// `|ψ_m⟩ = cos θ_m |m, g⟩ + e^{iφ_m} sin θ_m |m-1, e⟩`.
fn ansatz_state(weights: &[f64; 4], angles: &[(f64, f64); 4]) -> (DensityMatrix, Vec<f64>) {
    let dim = 8;
    let mut psi_all = vec![C64::new(0.0, 0.0); dim * dim];
    let mut b = Vec::new();
    for m in 0..4 {
        let (theta, phi) = angles[m];
        let mut v = vec![C64::new(0.0, 0.0); dim];
        if m == 0 {
            v[0] = C64::new(1.0, 0.0);
            b.push(0.0);
        } else {
            v[2 * m] = C64::new(theta.cos(), 0.0);
            v[2 * (m - 1) + 1] = C64::from_polar(theta.sin(), phi);
            b.push(theta.sin().powi(2));
        }
        for i in 0..dim {
            for j in 0..dim {
                psi_all[i * dim + j] += v[i] * v[j].conj() * weights[m];
            }
        }
    }
    let op = ComplexOperator::from_rows(dim, &psi_all).expect("operator");
    (DensityMatrix::new(op).expect("state"), b)
}

/// Mean one-step purity change against `8k Σ p_m² (⟨B⟩_m − ⟨B⟩_ρ)² dt`,
/// using antithetic noise pairs.
fn ito_consistency() -> (bool, String) {
    let weights = [0.1, 0.3, 0.35, 0.25];
    let angles = [(0.0, 0.0), (0.3, 0.4), (1.2, -1.0), (0.7, 2.0)];
    let (rho, b) = ansatz_state(&weights, &angles);
    let k = 1.0;
    let dt = 1e-3;
    let b_rho: f64 = weights.iter().zip(&b).map(|(p, x)| p * x).sum();
    let predicted: f64 = 8.0
        * k
        * weights
            .iter()
            .zip(&b)
            .map(|(p, x)| p * p * (x - b_rho).powi(2))
            .sum::<f64>()
        * dt;
    let p_before: f64 = weights.iter().map(|p| p * p).sum();
    let mut cfg = SimulationConfig {
        k,
        dt,
        t_final: dt,
        sample_every: 1,
        model: ModelConfig {
            n_max: 3,
            ..Default::default()
        },
        ..Default::default()
    };
    cfg.initial.oscillator = OscillatorState::Fock { n: 0 };
    let pairs = 4000usize;
    let total: f64 = (0..pairs as u64)
        .into_par_iter()
        .map(|i| {
            let dw = qndsim_core::sme::WienerIncrements::path(i, dt, 1)[0];
            [dw, -dw]
                .iter()
                .map(|&w| {
                    let opts = RunOptions {
                        initial: Some(rho.clone()),
                        noise: Some(vec![w]),
                        ..Default::default()
                    };
                    run_generator_with(&cfg, &opts)
                        .expect("one step")
                        .record
                        .purity[1]
                        - p_before
                })
                .sum::<f64>()
        })
        .sum();
    let measured = total / (2 * pairs) as f64;
    let rel = (measured - predicted).abs() / predicted;
    (
        rel <= 0.2,
        format!("one-step E[dP] {measured:.4e} vs Ito prediction {predicted:.4e}, relative error {rel:.3} (limit 0.2)"),
    )
}

fn c7_optimal_probing() -> Verdict {
    let base = thermal_config(0.1, 60.0, 0.1);
    let ks = [0.1, 0.3, 1.0, 3.0, 10.0];
    let points = sweep_tau(&ks, &base, 200);
    let tau = |k: f64| {
        points
            .iter()
            .find(|p| p.k == k)
            .and_then(|p| p.outcome.as_ref().ok())
            .map(|(f, _)| f.tau)
    };
    let listing: Vec<String> = points
        .iter()
        .map(|p| match &p.outcome {
            Ok((f, _)) => format!("tau({}) = {:.2}", p.k, f.tau),
            Err(e) => format!("tau({}) failed: {e}", p.k),
        })
        .collect();
    let pass = match (tau(0.1), tau(1.0), tau(10.0)) {
        (Some(a), Some(b), Some(c)) => b < a && b < c,
        _ => false,
    };
    verdict(pass, listing.join(", "))
}

fn mean_first_crossing(k: f64) -> (f64, usize) {
    let mut cfg = thermal_config(k, 20.0, 0.01);
    cfg.initial.qubit = Qubit::Excited;
    let mut crossings = Vec::new();
    for_each_trajectory(&cfg, 100, |_, r| {
        if let Some(t) = first_crossing_below(&r, 0.5) {
            crossings.push(t);
        }
        Ok(())
    })
    .expect("ensemble");
    (
        crossings.iter().sum::<f64>() / crossings.len() as f64,
        100 - crossings.len(),
    )
}

fn c8_zeno() -> Verdict {
    let (weak, weak_missing) = mean_first_crossing(0.1);
    let (strong, strong_missing) = mean_first_crossing(10.0);
    let ratio = strong / weak;
    verdict(
        ratio >= 2.0 && weak_missing == 0 && strong_missing == 0,
        format!(
            "mean first crossing {weak:.3} (k=0.1g) vs {strong:.3} (k=10g), ratio {ratio:.2} (limit 2); \
             trajectories without crossing: {weak_missing}, {strong_missing}"
        ),
    )
}

fn c9_jump_inference() -> Verdict {
    let p = preset("fig4").expect("preset");
    let cfg = p.settings.config.clone();
    let jump_time = cfg.jump_schedule[0].time;

    // Step of the informed estimate at the jump, on the preset seed.
    let dir = tempfile::tempdir().expect("tempdir");
    let plan = RunPlan {
        command: p.command,
        preset: Some(p.name.to_string()),
        settings: p.settings.clone(),
        inputs: None,
    };
    run(&plan, dir.path(), None).expect("fig4 preset");
    let report: JumpReport =
        qndsim_core::io::read_json(&dir.path().join("jumps.json")).expect("report");
    let informed = read_mean_n(&dir.path().join("informed.csv"));
    let (step_index, step) = informed
        .windows(2)
        .enumerate()
        .map(|(i, w)| (i + 1, w[1].1 - w[0].1))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let step_time = informed[step_index].0;
    let steps_at_jump = (step_time - jump_time).abs() < 1e-9 && step >= 1.0;

    let seeds = ensemble_seeds(&cfg, 100);
    let lags: Vec<Option<f64>> = seeds
        .par_iter()
        .map(|&seed| {
            let c = SimulationConfig {
                seed,
                ..cfg.clone()
            };
            let truth = run_generator_with(
                &c,
                &RunOptions {
                    keep_increments: true,
                    ..Default::default()
                },
            )
            .expect("informed run");
            let filtered = run_filter(&truth.record, &c).expect("filter run");
            jump_detection(
                &truth.record.times,
                &filtered.record.mean_n,
                &truth.record.mean_n,
                jump_time,
                2.0,
                0.5,
            )
        })
        .collect();
    let detected = lags.iter().flatten().count();
    let agree = report.final_quarter_max_difference <= 0.5;
    verdict(
        steps_at_jump && detected >= 80 && agree,
        format!(
            "informed step {step:.2} at gt={step_time}; detected with finite lag in {detected}/100 seeds (limit 80); \
             preset run final-quarter max |difference| {:.3} (limit 0.5), preset lag {:?}",
            report.final_quarter_max_difference, report.lag
        ),
    )
}

fn read_mean_n(path: &Path) -> Vec<(f64, f64)> {
    let text = fs::read_to_string(path).expect("record csv");
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().expect("header").split(',').collect();
    let col = header
        .iter()
        .position(|h| *h == "mean_n")
        .expect("mean_n column");
    lines
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            (cells[0].parse().unwrap(), cells[col].parse().unwrap())
        })
        .collect()
}

fn c10_unconditional_consistency() -> Verdict {
    let n = 500;
    let cfg = thermal_config(0.1, 20.0, 0.1);
    let s = summarize_ensemble(&cfg, n).expect("ensemble");
    let u = run_unconditional(&cfg).expect("unconditional").record;
    let sqrt_n = (n as f64).sqrt();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for i in 0..s.times.len() {
        let se = s.std_sigma_ee[i] / sqrt_n;
        let dev = (s.mean_sigma_ee[i] - u.sigma_ee[i]).abs();
        if dev > 3.0 * se + 1e-12 {
            ok = false;
        }
        if se > 0.0 {
            worst = worst.max(dev / se);
        }
    }
    verdict(
        ok,
        format!(
            "largest deviation {worst:.2} standard errors over {} samples (limit 3)",
            s.times.len()
        ),
    )
}

fn oracle_error(rho: &DensityMatrix, k: f64) -> f64 {
    let model = ModelConfig {
        n_max: 3,
        ..Default::default()
    };
    let system = SubspaceSystem::jaynes_cummings(&model).expect("subspaces");
    let cfg = SimulationConfig {
        k,
        dt: 1e-4,
        t_final: 20.0,
        sample_every: 100,
        model,
        ..Default::default()
    };
    reduced_dynamics_oracle(&system, rho, &cfg)
        .expect("oracle")
        .sup_error()
}

/// Thermal `n̄ = 3` weights on `|0,e⟩, |1,e⟩, |2,e⟩`, renormalized.
fn thermal_like_start() -> DensityMatrix {
    let dim = 8;
    let q: f64 = 0.75;
    let w: Vec<f64> = (0..3).map(|n| q.powi(n)).collect();
    let total: f64 = w.iter().sum();
    let mut entries = vec![C64::new(0.0, 0.0); dim * dim];
    for (n, wn) in w.iter().enumerate() {
        let i = 2 * n + 1;
        entries[i * dim + i] = C64::new(wn / total, 0.0);
    }
    DensityMatrix::new(ComplexOperator::from_rows(dim, &entries).expect("operator")).expect("state")
}

fn c11_reduced_oracle() -> Verdict {
    let err = oracle_error(&thermal_like_start(), 0.1);
    // Stronger probing on a state with coherent doublets; reported, not judged.
    let (rho, _) = ansatz_state(
        &[0.1, 0.3, 0.35, 0.25],
        &[(0.0, 0.0), (0.3, 0.4), (1.2, -1.0), (0.7, 2.0)],
    );
    let stress = oracle_error(&rho, 1.0);
    verdict(
        err <= 1e-2,
        format!(
            "sup |p_m full - p_m reduced| = {err:.2e} over gt <= 20 at k=0.1g, thermal-like start (limit 1e-2); \
             k=g four-subspace stress case {stress:.2e}"
        ),
    )
}

fn csv_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .expect("output dir")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).expect("read"),
            )
        })
        .collect();
    files.sort();
    files
}

fn c12_reproducibility() -> Verdict {
    let mut settings = RunSettings::default();
    settings.config.model.n_max = 30;
    settings.config.t_final = 10.0;
    settings.config.sample_every = 100;
    settings.config.seed = 1234;
    settings.n_trajectories = 40;
    settings.k_values = vec![0.5, 2.0];
    let mut jumps = settings.clone();
    jumps.config.gamma = 1e-3;
    jumps.config.n_t = 3.0;
    jumps.config.jump_schedule = vec!["5:up".parse().expect("jump")];
    let plans = [
        (Command::Trajectory, settings.clone()),
        (Command::Ensemble, settings.clone()),
        (Command::Sweep, settings),
        (Command::Jumps, jumps),
    ];
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for (command, settings) in plans {
        let plan = RunPlan {
            command,
            preset: None,
            settings,
            inputs: None,
        };
        let a = tempfile::tempdir().expect("tempdir");
        let b = tempfile::tempdir().expect("tempdir");
        let c = tempfile::tempdir().expect("tempdir");
        run(&plan, a.path(), Some(1)).expect("run");
        run(&plan, b.path(), Some(3)).expect("run");
        qndsim_cli::replay(&a.path().join("manifest.json"), c.path(), Some(3)).expect("replay");
        let reference = csv_outputs(a.path());
        compared += reference.len();
        if reference != csv_outputs(b.path())
            || reference != csv_outputs(c.path())
            || reference.is_empty()
        {
            mismatches.push(command.to_string());
        }
    }
    verdict(
        mismatches.is_empty(),
        format!("{compared} CSV files compared across 1 and 3 workers and a replay; mismatches: {mismatches:?}"),
    )
}

type Row = (&'static str, Verdict);

fn report(results: &mut Vec<Row>, id: &'static str, name: &str, v: Verdict, secs: f64) {
    println!(
        "{id} {name}: {} ({secs:.1} s) {}",
        if v.pass { "PASS" } else { "FAIL" },
        v.detail
    );
    results.push((id, v));
}

fn timed(results: &mut Vec<Row>, id: &'static str, name: &str, f: fn() -> Verdict) {
    let start = Instant::now();
    let v = f();
    report(results, id, name, v, start.elapsed().as_secs_f64());
}

fn main() {
    // Nothing to list for the test harness.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut results: Vec<Row> = Vec::new();
    timed(&mut results, "C1", "Rabi oracle", c1_rabi);
    timed(
        &mut results,
        "C2",
        "collapse and revival",
        c2_collapse_revival,
    );
    timed(
        &mut results,
        "C3",
        "purity preservation",
        c3_purity_preservation,
    );
    timed(
        &mut results,
        "C4",
        "subspace collapse",
        c4_subspace_collapse,
    );
    let start = Instant::now();
    let (c5, c6) = c5_c6_martingale_and_purity();
    let secs = start.elapsed().as_secs_f64();
    report(&mut results, "C5", "martingale", c5, secs);
    report(&mut results, "C6", "mean purity growth", c6, secs);
    timed(&mut results, "C7", "optimal probing", c7_optimal_probing);
    timed(&mut results, "C8", "Zeno regime", c8_zeno);
    timed(&mut results, "C9", "jump inference", c9_jump_inference);
    timed(
        &mut results,
        "C10",
        "unconditional vs ensemble",
        c10_unconditional_consistency,
    );
    timed(
        &mut results,
        "C11",
        "reduced-dynamics oracle",
        c11_reduced_oracle,
    );
    timed(&mut results, "C12", "reproducibility", c12_reproducibility);

    let passed = results.iter().filter(|r| r.1.pass).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    for id in KNOWN_RED {
        if results.iter().any(|r| r.0 == id && !r.1.pass) {
            println!("{id} is a known failure, recorded in the decisions ledger");
        }
    }
    let unexpected: Vec<&str> = results
        .iter()
        .filter(|r| !r.1.pass && !KNOWN_RED.contains(&r.0))
        .map(|r| r.0)
        .collect();
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
