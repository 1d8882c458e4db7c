//! Acceptance checks. Each test prints one `criterion N: PASS|FAIL` line
//! with the measured numbers, then asserts.

use std::io::Write;
use std::time::Instant;

use jamnull_core::agent::{AgentConfig, NetworkShape, QNetwork};
use jamnull_core::beamform::{
    blind_sinr_db, estimate_nullspace, estimate_sinr_db, qam16, sample_covariance, spectral_bounds,
    LinkBudget,
};
use jamnull_core::channel::{FadingParams, FadingState, Ula};
use jamnull_core::env::{Beamformer, Environment, FrameRequest};
use jamnull_core::harness::{
    evaluate, link_bounds, run_sweep, run_switch, train, write_summary_csv, Config, PolicySpec,
};
use jamnull_core::jamming::{
    build_sigma_j, virtual_change_factor, CorrelationSchedule, JammerModel, ScheduleShape,
};
use jamnull_core::numerics::{frobenius_sq, ComplexMatrix, Rng};
use jamnull_core::policies::highest_duty_cycle;
use ndarray::Array2;
use num_complex::Complex64;

fn report(n: u32, pass: bool, started: Instant, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    // Straight to stderr so the verdict shows even when libtest captures output.
    let line = format!(
        "criterion {n}: {verdict} ({:.1} s) {detail}\n",
        started.elapsed().as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn random_psd(rng: &mut Rng, n: usize) -> ComplexMatrix {
    let a = ComplexMatrix::from_fn(n, n, |_, _| rng.complex_normal());
    &a * a.adjoint() + ComplexMatrix::identity(n, n) * Complex64::new(0.1, 0.0)
}

#[test]
fn criterion_01_virtual_change_identity() {
    let t = Instant::now();
    let mut rng = Rng::new(101);
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let nj = 2 + trial % 2;
        let sigma = random_psd(&mut rng, nj);
        let d = virtual_change_factor(&sigma, &sigma).unwrap().d;
        let err = frobenius_sq(&(d - ComplexMatrix::identity(nj, nj))).sqrt();
        worst = worst.max(err);
    }
    let pass = worst < 1e-9;
    report(1, pass, t, format!("worst ||D - I||_F = {worst:e}"));
    assert!(pass);
}

#[test]
fn criterion_02_blow_up_near_full_correlation() {
    let t = Instant::now();
    let sigma_d = build_sigma_j(&[1.0, 1.0], 0.8).unwrap();
    let rhos = [0.8, 0.9, 0.99, 0.999, 0.9999];
    let max_d: Vec<f64> = rhos
        .iter()
        .map(|&r| {
            let sigma_e = build_sigma_j(&[1.0, 1.0], r).unwrap();
            virtual_change_factor(&sigma_e, &sigma_d)
                .unwrap()
                .max_abs_entry
        })
        .collect();
    let increasing = max_d.windows(2).all(|w| w[1] > w[0]);
    let ratio = max_d[4] / max_d[1];
    let pass = increasing && ratio >= 5.0;
    report(
        2,
        pass,
        t,
        format!("max|D| = {max_d:?}, ratio 0.9999/0.9 = {ratio:.2}"),
    );
    assert!(pass);
}

#[test]
fn criterion_03_inverse_wishart_means() {
    let t = Instant::now();
    let (n, m, nj) = (8usize, 3usize, 2usize);
    let eta = 10f64.powf(7.78);
    let draws = 10_000;
    let mut rng = Rng::new(303);
    let amp = 1.0 / eta.sqrt();
    let mut plain = vec![0.0; m];
    let mut nulled = vec![0.0; m];
    for _ in 0..draws {
        let h = ComplexMatrix::from_fn(n, m, |_, _| rng.complex_normal() * amp);
        let inv = (h.adjoint() * &h).try_inverse().unwrap();
        let z = ComplexMatrix::from_fn(n, nj, |_, _| rng.complex_normal());
        let g = estimate_nullspace(&(&z * z.adjoint()), nj).unwrap().g;
        let ht = &g * &h;
        let inv_t = (ht.adjoint() * &ht).try_inverse().unwrap();
        for i in 0..m {
            plain[i] += inv[(i, i)].re / draws as f64;
            nulled[i] += inv_t[(i, i)].re / draws as f64;
        }
    }
    let want_plain = eta / (n - m) as f64;
    let want_nulled = eta / (n - nj - m) as f64;
    let err_plain = plain
        .iter()
        .map(|x| (x / want_plain - 1.0).abs())
        .fold(0.0, f64::max);
    let err_nulled = nulled
        .iter()
        .map(|x| (x / want_nulled - 1.0).abs())
        .fold(0.0, f64::max);
    let pass = err_plain < 0.05 && err_nulled < 0.05;
    report(
        3,
        pass,
        t,
        format!("max relative error {err_plain:.4} (N_k - M_k), {err_nulled:.4} (N_k - N_J - M_k)"),
    );
    assert!(pass);
}

/// Mean per-stream `log2(1 + SINR)` over `frames` independent channel
/// draws, one frame each, with the highest-duty-cycle action.
fn mean_spectral_efficiency(cfg: &Config, beamformer: Beamformer, frames: u64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0.0;
    for seed in 0..frames {
        let mut env = Environment::new(cfg.env_params().unwrap(), 4000 + seed).unwrap();
        let a = highest_duty_cycle(&env);
        let req = FrameRequest {
            beamformer,
            ..FrameRequest::for_action(env.actions(), a)
        };
        let frame = env.step(&req).unwrap();
        for s in frame.sinr_db.iter().flatten() {
            sum += (1.0 + 10f64.powf(s / 10.0)).log2();
            count += 1.0;
        }
    }
    sum / count
}

#[test]
fn criterion_04_bound_attainment() {
    let t = Instant::now();
    let cfg = Config::default();
    let bounds = link_bounds(&cfg).unwrap().bounds;
    let oracle = mean_spectral_efficiency(&cfg, Beamformer::Oracle, 1000);
    let random = mean_spectral_efficiency(&cfg, Beamformer::Random, 1000);
    let err_ub = (oracle - bounds.upper).abs() / bounds.upper;
    let err_lb = (random - bounds.lower).abs() / bounds.lower;
    let pass = err_ub <= 0.05 && err_lb <= 0.10;
    report(
        4,
        pass,
        t,
        format!(
            "oracle {oracle:.3} vs C_ub {:.3} ({:.1}%), random F {random:.3} vs C_lb {:.3} ({:.1}%)",
            bounds.upper,
            100.0 * err_ub,
            bounds.lower,
            100.0 * err_lb
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_trivial_bound_identities() {
    let t = Instant::now();
    let base = LinkBudget {
        p_t: 25.118_864_315_095_8,
        noise_var: 4.073_802_778_041_1e-15,
        eta: 10f64.powf(7.779_771_628_784_536),
        jammer_vars: vec![0.0, 0.0],
        jammer_etas: vec![10f64.powf(8.796_074_015_089_107); 2],
        n_rx: 8,
        n_streams: 3,
    };
    let silent = spectral_bounds(&base).unwrap();
    let no_jammers = spectral_bounds(&LinkBudget {
        jammer_vars: vec![],
        jammer_etas: vec![],
        ..base.clone()
    })
    .unwrap();
    let pass = silent.lower == silent.upper && no_jammers.lower == no_jammers.without_beamforming;
    report(
        5,
        pass,
        t,
        format!(
            "silent jammers C_lb {} C_ub {}; N_J = 0 C_lb {} C_wbf {}",
            silent.lower, silent.upper, no_jammers.lower, no_jammers.without_beamforming
        ),
    );
    assert!(pass);
}

/// Residual ratio `||G Z||^2 / ||Z||^2` after estimating the nullspace from
/// `n_est` samples starting at sample 0 of `schedule`.
fn nullspace_residuals(schedule: CorrelationSchedule, trials: usize, seed: u64) -> Vec<f64> {
    let n_est = 40;
    let noise_var: f64 = 1e-3;
    let jammers = JammerModel::new(vec![1.0, 1.0], schedule).unwrap();
    let rx = Ula::half_wavelength(8);
    let fading = FadingParams {
        n_paths: 8,
        n_sinusoids: 16,
        doppler_hz: 0.0,
        sample_rate_hz: 400e3,
        eta: 1.0,
    };
    let mut rng = Rng::new(seed);
    (0..trials)
        .map(|_| {
            let mut z = ComplexMatrix::zeros(8, 2);
            for j in 0..2 {
                z.set_column(
                    j,
                    &FadingState::draw(&mut rng, fading)
                        .unwrap()
                        .channel_vector(&rx),
                );
            }
            let x = jammers.sample_block(&mut rng, 0, n_est, 1).unwrap();
            let noise =
                ComplexMatrix::from_fn(8, n_est, |_, _| rng.complex_normal() * noise_var.sqrt());
            let r = sample_covariance(&(&z * x + noise)).unwrap();
            let g = estimate_nullspace(&r, 2).unwrap().g;
            frobenius_sq(&(g * &z)) / frobenius_sq(&z)
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn criterion_06_nullspace_quality() {
    let t = Instant::now();
    let fixed = nullspace_residuals(CorrelationSchedule::constant(0.8).unwrap(), 100, 606);
    let good = fixed.iter().filter(|&&r| r < 1e-2).count();
    let sawtooth = CorrelationSchedule::new(ScheduleShape::SawtoothDown, 5000, 1.0, 0.8).unwrap();
    let adversarial = nullspace_residuals(sawtooth, 100, 607);
    let gap_db = 10.0 * (median(adversarial) / median(fixed.clone())).log10();
    let pass = good >= 95 && gap_db >= 10.0;
    report(
        6,
        pass,
        t,
        format!(
            "{good}/100 fixed-correlation trials below 1e-2, median {:e}; adversarial median {gap_db:.1} dB worse",
            median(fixed)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_sinr_estimator() {
    let t = Instant::now();
    let mut rng = Rng::new(707);
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    for snr_db in [5.0, 10.0, 15.0, 20.0] {
        let sd = 10f64.powf(-snr_db / 20.0);
        let sent: Vec<Complex64> = (0..10_000).map(|_| qam16::point(rng.index(16))).collect();
        let rx: Vec<Complex64> = sent.iter().map(|s| s + rng.complex_normal() * sd).collect();
        let est = estimate_sinr_db(&sent, &rx).unwrap();
        worst = worst.max((est - snr_db).abs());
        details.push(format!(
            "{snr_db} dB -> {est:.3} (decision-directed {:.3})",
            blind_sinr_db(&rx).unwrap()
        ));
    }
    let pass = worst <= 0.5;
    report(
        7,
        pass,
        t,
        format!("worst error {worst:.3} dB; {}", details.join(", ")),
    );
    assert!(pass);
}

#[test]
fn criterion_08_gradient_check() {
    let t = Instant::now();
    let shape = NetworkShape {
        inputs: 5,
        cells: 4,
        seq_len: 4,
        projection: 8,
        value_hidden: 6,
        advantage_hidden: 6,
        actions: 4,
    };
    let mut rng = Rng::new(808);
    let net = QNetwork::new(shape, &mut rng);
    let batch = 3;
    let states =
        Array2::from_shape_fn((batch, shape.state_len()), |_| rng.uniform_range(-1.0, 1.0));
    let weights = Array2::from_shape_fn((batch, shape.actions), |_| rng.uniform_range(-1.0, 1.0));
    let loss = |n: &QNetwork| (n.forward(states.view()) * &weights).sum();
    let (_, cache) = net.forward_cached(states.view());
    let analytic = net.backward(&cache, &weights).to_flat();
    let eps = 1e-5;
    let mut worst = 0.0f64;
    let mut worst_at = 0;
    for i in 0..analytic.len() {
        let mut plus = net.clone();
        *plus.params.get_mut(i).unwrap() += eps;
        let mut minus = net.clone();
        *minus.params.get_mut(i).unwrap() -= eps;
        let numeric = (loss(&plus) - loss(&minus)) / (2.0 * eps);
        let scale = analytic[i].abs().max(numeric.abs());
        let rel = if scale == 0.0 {
            0.0
        } else {
            (analytic[i] - numeric).abs() / scale
        };
        if rel > worst {
            worst = rel;
            worst_at = i;
        }
    }
    let pass = worst < 1e-4 && analytic.len() >= 200;
    report(
        8,
        pass,
        t,
        format!(
            "{} parameters checked, worst relative error {worst:e} at flat index {worst_at}",
            analytic.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_parameter_count() {
    let t = Instant::now();
    let shape = NetworkShape {
        inputs: 7,
        cells: 6,
        seq_len: 6,
        projection: 128,
        value_hidden: 16,
        advantage_hidden: 16,
        actions: 16,
    };
    let count = shape.weight_count();
    let pass = count == 5466;
    report(
        9,
        pass,
        t,
        format!("weights {count}, with biases {}", shape.parameter_count()),
    );
    assert_eq!(count, 5466);
}

fn desk_config(seed: u64, history: usize) -> Config {
    let mut cfg = Config::default();
    cfg.seed = seed;
    cfg.iterations = 20_000;
    cfg.frames = 2000;
    cfg.agent = AgentConfig {
        history,
        ..AgentConfig::default()
    };
    cfg
}

#[test]
fn criterion_10_learning_efficacy() {
    let t = Instant::now();
    let mut ordered = 0;
    let mut first = None;
    let mut lines = Vec::new();
    for seed in 1..=3 {
        let cfg = desk_config(seed, 6);
        let net = train(&cfg, None, None, |_| {}).unwrap().network;
        let c = |spec| evaluate(&cfg, spec, Some(&net)).unwrap().summary;
        let (ub, learned, heuristic, fixed) = (
            c(PolicySpec::UpperBound),
            c(PolicySpec::Learned),
            c(PolicySpec::Heuristic),
            c(PolicySpec::FixedAverage),
        );
        let order = ub.c_av_eff >= learned.c_av_eff
            && learned.c_av_eff >= heuristic.c_av_eff
            && heuristic.c_av_eff >= fixed.c_av_eff;
        ordered += usize::from(order);
        lines.push(format!(
            "seed {seed}: C upper {:.3} learned {:.3} heuristic {:.3} fixed {:.3}; p_ot learned {:.4} fixed {:.4}",
            ub.c_av_eff, learned.c_av_eff, heuristic.c_av_eff, fixed.c_av_eff, learned.p_av_ot, fixed.p_av_ot
        ));
        first.get_or_insert((ub, learned, heuristic, fixed));
    }
    let (ub, learned, heuristic, fixed) = first.unwrap();
    let gain = learned.c_av_eff / fixed.c_av_eff;
    let dominates = [&learned, &heuristic, &fixed]
        .iter()
        .all(|s| ub.c_av_eff >= s.c_av_eff && ub.p_av_ot <= s.p_av_ot);
    let pass = gain >= 1.15 && learned.p_av_ot <= fixed.p_av_ot && dominates && ordered >= 2;
    report(
        10,
        pass,
        t,
        format!(
            "learned/fixed = {gain:.4}, upper bound dominates: {dominates}, ordering on {ordered}/3 seeds; {}",
            lines.join("; ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_11_history_length_trend() {
    let t = Instant::now();
    let converged: Vec<f64> = [4, 6, 8]
        .iter()
        .map(|&h| {
            let run = train(&desk_config(1, h), None, None, |_| {}).unwrap();
            run.rows.last().unwrap().rolling_se
        })
        .collect();
    let (c4, c6, c8) = (converged[0], converged[1], converged[2]);
    let pass = c6 >= c4 && (c8 - c6).abs() <= 0.05 * c6;
    report(
        11,
        pass,
        t,
        format!("converged rolling C_av_eff H=4 {c4:.4}, H=6 {c6:.4}, H=8 {c8:.4}"),
    );
    assert!(pass);
}

#[test]
fn criterion_12_strategy_switch() {
    let t = Instant::now();
    let mut ok = 0;
    let mut lines = Vec::new();
    for seed in 1..=3 {
        let mut cfg = desk_config(seed, 6);
        cfg.iterations = 40_000;
        cfg.switch.at_iteration = 20_000;
        let report = run_switch(&cfg, None, |_| {}).unwrap();
        let (a, b) = (report.initial_convergence, report.reconvergence);
        let good = matches!((a, b), (Some(a), Some(b)) if b as f64 <= 1.25 * a as f64);
        ok += usize::from(good);
        lines.push(format!("seed {seed}: initial {a:?}, after switch {b:?}"));
    }
    let pass = ok >= 2;
    report(
        12,
        pass,
        t,
        format!("{ok}/3 seeds reconverge within 1.25x; {}", lines.join("; ")),
    );
    assert!(pass);
}

#[test]
fn criterion_13_sweep_determinism() {
    let t = Instant::now();
    let mut cfg = Config::default();
    cfg.iterations = 2000;
    cfg.frames = 200;
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str| {
        let path = dir.path().join(name);
        write_summary_csv(&path, &run_sweep(&cfg).unwrap()).unwrap();
        std::fs::read(path).unwrap()
    };
    let first = write("a.csv");
    let second = write("b.csv");
    let rows = first.iter().filter(|&&b| b == b'\n').count() - 1;
    let pass = first == second && rows == cfg.sweep.jamming_powers.len() * cfg.sweep.policies.len();
    report(
        13,
        pass,
        t,
        format!(
            "{rows} summary rows, {} bytes, identical: {}",
            first.len(),
            first == second
        ),
    );
    assert!(pass);
}
