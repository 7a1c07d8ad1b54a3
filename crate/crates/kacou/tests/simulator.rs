use kacou::fpt::{laplace_fpt, FptQuery};
use kacou::par::par_map;
use kacou::rng::rng_stream;
use kacou::sim::{
    evaluate_x, mc_laplace_fpt, mc_laplace_fpt_with_caps, path_segments, sample_fpt, sample_m_path,
    sample_switch_sequence, stationary_state, FptCaps, FptOutcome, SwitchSequence,
};
use kacou::stats::Moments;
use kacou::{pattern_phi, KacOuModel, State, SwitchRates};
use proptest::prelude::*;

fn attracting() -> KacOuModel {
    KacOuModel::from_params(0.8, 1.3, 0.0, 2.0, 0.4, 0.7, 1.0, 2.0).unwrap()
}

#[test]
fn holding_times_have_the_right_mean() {
    let rates = SwitchRates::new(1.0, 1.0).unwrap();
    let gaps: Vec<Vec<f64>> = par_map(1000, |i| {
        let mut rng = rng_stream(1, "holding", i);
        let seq = sample_switch_sequence(&rates, State::Zero, 1e4, &mut rng).unwrap();
        let mut prev = 0.0;
        seq.switch_times
            .iter()
            .map(|&t| {
                let g = t - prev;
                prev = t;
                g
            })
            .collect()
    });
    let all: Vec<f64> = gaps.into_iter().flatten().collect();
    assert!(all.iter().all(|&g| g > 0.0));
    let m = Moments::from_samples(&all);
    assert!((m.mean - 1.0).abs() < 3.0 * m.mean_stderr, "{} ± {}", m.mean, m.mean_stderr);
}

#[test]
fn occupation_fraction_matches_stationary_law() {
    let rates = SwitchRates::new(0.5, 2.0).unwrap();
    let fr: Vec<f64> = par_map(200, |i| {
        let mut rng = rng_stream(2, "occupation", i);
        let seq = sample_switch_sequence(&rates, State::One, 2e3, &mut rng).unwrap();
        seq.segments().filter(|s| s.2 == State::Zero).map(|s| s.1 - s.0).sum::<f64>() / seq.horizon
    });
    let m = Moments::from_samples(&fr);
    let target = 2.0 / 2.5;
    assert!((m.mean - target).abs() < 4.0 * m.mean_stderr, "{} vs {target}", m.mean);
}

#[test]
fn attracting_paths_stay_trapped() {
    let model = attracting();
    let outside = par_map(1000, |i| {
        let mut rng = rng_stream(3, "trap", i);
        let s0 = stationary_state(&model.rates, &mut rng);
        let x0 = -1.0 + 4.0 * (i as f64 / 1000.0);
        let seq = sample_switch_sequence(&model.rates, s0, 30.0, &mut rng).unwrap();
        let mut caught = false;
        let mut bad = 0;
        for k in 0..=600 {
            let x = evaluate_x(&seq, x0, k as f64 * 0.05, &model).unwrap();
            let inside = (0.0..=1.0).contains(&x);
            if caught && !inside {
                bad += 1;
            }
            caught |= inside;
        }
        bad
    });
    assert_eq!(outside.iter().sum::<u32>(), 0);
}

#[test]
fn conditional_law_of_m_is_gaussian_with_exact_moments() {
    let model = attracting();
    let mut rng = rng_stream(4, "seq", 0);
    let seq = sample_switch_sequence(&model.rates, State::Zero, 10.0, &mut rng).unwrap();
    assert!(seq.switch_times.len() >= 4);
    // at a switch instant the next segment carries the exact conditional law
    let k = 3;
    let t = seq.switch_times[k];
    let seg = path_segments(&seq, 0.3, &model)[k + 1];
    assert_eq!(evaluate_x(&seq, 0.3, t, &model).unwrap(), seg.x_start);
    let draws = par_map(100_000, |i| {
        let mut rng = rng_stream(4, "m", i);
        sample_m_path(&seq, 0.3, &[t], &model, &mut rng).unwrap()[0]
    });
    let m = Moments::from_samples(&draws);
    assert!((m.mean - seg.m_mean).abs() < 3.0 * m.mean_stderr);
    assert!((m.var - seg.m_var).abs() < 3.0 * m.var_stderr, "{} vs {}", m.var, seg.m_var);
    let se_skew = (6.0 / draws.len() as f64).sqrt();
    let se_kurt = (24.0 / draws.len() as f64).sqrt();
    assert!(m.skewness.abs() < 5.0 * se_skew, "skew {}", m.skewness);
    assert!(m.excess_kurtosis.abs() < 5.0 * se_kurt, "kurt {}", m.excess_kurtosis);
}

#[test]
fn frozen_state_recovers_ou_variance() {
    let (a, b, g) = (0.5, 0.8, 1.7);
    let model = KacOuModel::from_params(1.0, 1.0, a, a, b, b, g, g).unwrap();
    for &t in &[0.1, 1.0, 3.0] {
        let seq = SwitchSequence { initial_state: State::Zero, switch_times: vec![t], horizon: 2.0 * t };
        let v = path_segments(&seq, 0.0, &model)[1].m_var;
        let exact = b * b * (1.0 - (-2.0 * g * t).exp()) / (2.0 * g);
        assert!((v - exact).abs() < 1e-14, "t={t}: {v} vs {exact}");
    }
    let seq = SwitchSequence { initial_state: State::Zero, switch_times: vec![], horizon: 2.0 };
    let draws = par_map(50_000, |i| {
        let mut rng = rng_stream(5, "frozen", i);
        sample_m_path(&seq, 0.0, &[2.0], &model, &mut rng).unwrap()[0]
    });
    let m = Moments::from_samples(&draws);
    let exact = b * b * (1.0 - (-4.0 * g).exp()) / (2.0 * g);
    assert!((m.var - exact).abs() < 3.0 * m.var_stderr);
    assert!((m.mean - pattern_phi(State::Zero, 2.0, 0.0, &model)).abs() < 3.0 * m.mean_stderr);
}

#[test]
fn censoring_vanishes_for_attracting_targets() {
    let model = attracting();
    let q = FptQuery::new(0.0, 0.1, 0.8, State::Zero).unwrap();
    let (est, c) = mc_laplace_fpt_with_caps(&q, &model, 20_000, 6, FptCaps::default());
    assert!(c.total() as f64 / 20_000.0 <= 1e-3);
    assert!((est.mean - (1.0 - c.total() as f64 / 20_000.0)).abs() < 1e-15);
}

#[test]
fn short_horizon_censoring_is_reported() {
    let model = attracting();
    let q = FptQuery::new(0.0, 0.1, 0.95, State::Zero).unwrap();
    let caps = FptCaps { horizon: 0.5, max_switches: 10_000_000 };
    let (est, c) = mc_laplace_fpt_with_caps(&q, &model, 5_000, 6, caps);
    assert!(c.horizon > 0);
    assert_eq!(c.switch_cap, 0);
    assert!((est.mean - (1.0 - c.total() as f64 / 5_000.0)).abs() < 1e-12);
}

#[test]
fn laplace_transform_matches_closed_form() {
    let model = attracting();
    let q = FptQuery::new(1.0, 0.2, 0.7, State::One).unwrap();
    let est = mc_laplace_fpt(&q, &model, 200_000, 7).unwrap();
    let exact = laplace_fpt(&q, &model).unwrap();
    assert!((est.mean - exact).abs() < 3.0 * est.stderr, "{} ± {} vs {exact}", est.mean, est.stderr);
}

#[test]
fn stderr_scales_like_inverse_root_n() {
    let model = attracting();
    let q = FptQuery::new(1.0, 0.2, 0.7, State::Zero).unwrap();
    let a = mc_laplace_fpt(&q, &model, 20_000, 8).unwrap();
    let b = mc_laplace_fpt(&q, &model, 40_000, 9).unwrap();
    let ratio = b.stderr / a.stderr;
    assert!((ratio / std::f64::consts::FRAC_1_SQRT_2 - 1.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn parallel_replications_match_sequential_order() {
    let model = attracting();
    let caps = FptCaps::default();
    let run = |i: u64| {
        let mut rng = rng_stream(10, "fpt", i);
        sample_fpt(0.1, 0.8, State::Zero, &model, &mut rng, caps)
    };
    let par = par_map(500, run);
    let seq: Vec<FptOutcome> = (0..500).map(run).collect();
    assert_eq!(par, seq);
    assert!(par.iter().all(|o| matches!(o, FptOutcome::Hit(t) if *t > 0.0)));
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(64) })]

    #[test]
    fn segments_are_continuous_and_variances_nonnegative(seed in any::<u64>(), x0 in -3.0f64..3.0) {
        let model = attracting();
        let mut rng = rng_stream(seed, "segments", 0);
        let seq = sample_switch_sequence(&model.rates, State::Zero, 5.0, &mut rng).unwrap();
        prop_assert!(seq.switch_times.windows(2).all(|w| w[0] < w[1]));
        let segs = path_segments(&seq, x0, &model);
        for w in segs.windows(2) {
            let x = pattern_phi(w[0].state, w[1].t_start - w[0].t_start, w[0].x_start, &model);
            prop_assert_eq!(x, w[1].x_start);
            prop_assert!(w[1].m_var >= 0.0);
        }
    }

    #[test]
    fn fpt_hit_times_are_positive(seed in any::<u64>(), y in 0.05f64..0.95) {
        let model = KacOuModel::from_params(0.8, 1.3, 0.0, 2.0, 0.0, 0.0, 1.0, 2.0).unwrap();
        let mut rng = rng_stream(seed, "hit", 0);
        if let FptOutcome::Hit(t) = sample_fpt(0.0, y, State::One, &model, &mut rng, FptCaps::default()) {
            prop_assert!(t > 0.0);
        }
    }
}
