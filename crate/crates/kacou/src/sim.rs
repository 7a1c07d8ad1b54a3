//! Exact event-driven simulation of ε(t), X(t) and M(t). Between switches the
//! dynamics have constant coefficients, so every update below is an exact
//! transition — there is no time step.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::Serialize;

use crate::error::{invalid, KacError, Result};
use crate::fpt::FptQuery;
use crate::model::{hitting_time_coeffs, phi_coeffs, HittingTime, KacOuModel, State, StateCoeffs, SwitchRates};
use crate::par::par_map;
use crate::rng::rng_stream;
use crate::stats::McEstimate;

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchSequence {
    pub initial_state: State,
    pub switch_times: Vec<f64>,
    pub horizon: f64,
}

impl SwitchSequence {
    /// Constant-state pieces `(t_start, t_end, state)` covering [0, horizon].
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, State)> + '_ {
        let n = self.switch_times.len();
        (0..=n).map(move |k| {
            let t0 = if k == 0 { 0.0 } else { self.switch_times[k - 1] };
            let t1 = if k == n { self.horizon } else { self.switch_times[k] };
            let s = if k % 2 == 0 { self.initial_state } else { self.initial_state.other() };
            (t0, t1, s)
        })
    }

    pub fn state_at(&self, t: f64) -> State {
        let k = self.switch_times.partition_point(|&s| s <= t);
        if k % 2 == 0 {
            self.initial_state
        } else {
            self.initial_state.other()
        }
    }
}

/// One constant-state piece of a trajectory: X at its start and the
/// conditional law N(m_mean, m_var) of M there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathSegment {
    pub t_start: f64,
    pub state: State,
    pub x_start: f64,
    pub m_mean: f64,
    pub m_var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CensorReason {
    Horizon,
    SwitchCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FptOutcome {
    Hit(f64),
    Censored { time: f64, reason: CensorReason },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FptCaps {
    pub horizon: f64,
    pub max_switches: u64,
}

impl Default for FptCaps {
    fn default() -> Self {
        Self { horizon: 1e3, max_switches: 10_000_000 }
    }
}

fn holding<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let e: f64 = rng.sample(Exp1);
    e / rate
}

/// Draws the initial state from the stationary law of the chain.
pub fn stationary_state<R: Rng + ?Sized>(rates: &SwitchRates, rng: &mut R) -> State {
    let p0 = rates.lambda1 / rates.total();
    if rng.random::<f64>() < p0 {
        State::Zero
    } else {
        State::One
    }
}

pub fn sample_switch_sequence<R: Rng + ?Sized>(
    rates: &SwitchRates,
    initial_state: State,
    horizon: f64,
    rng: &mut R,
) -> Result<SwitchSequence> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon", "must be finite and > 0"));
    }
    let mut t = 0.0;
    let mut s = initial_state;
    let mut switch_times = Vec::new();
    loop {
        t += holding(rng, rates.rate(s));
        if t >= horizon {
            break;
        }
        switch_times.push(t);
        s = s.other();
    }
    Ok(SwitchSequence { initial_state, switch_times, horizon })
}

/// X(t) by composing the patterns over the segments of `seq`.
pub fn evaluate_x(seq: &SwitchSequence, x0: f64, t: f64, model: &KacOuModel) -> Result<f64> {
    if !(t >= 0.0) || t > seq.horizon {
        return Err(KacError::BeyondHorizon { t, horizon: seq.horizon });
    }
    let mut x = x0;
    for (t0, t1, s) in seq.segments() {
        if t <= t1 {
            return Ok(phi_coeffs(model.coeff(s), t - t0, x));
        }
        x = phi_coeffs(model.coeff(s), t1 - t0, x);
    }
    Ok(x)
}

/// Conditional variance increment over Δ: b²(1 − e^{−2γΔ})/(2γ), or b²Δ.
fn var_step(c: &StateCoeffs, v: f64, d: f64) -> f64 {
    if c.gamma == 0.0 {
        return v + c.b * c.b * d;
    }
    let em1 = (-c.gamma * d).exp_m1();
    let decay = 1.0 + em1;
    v * decay * decay - c.b * c.b * em1 * (2.0 + em1) / (2.0 * c.gamma)
}

/// Segment table with X and the conditional Gaussian law of M at every switch.
pub fn path_segments(seq: &SwitchSequence, x0: f64, model: &KacOuModel) -> Vec<PathSegment> {
    let mut out = Vec::with_capacity(seq.switch_times.len() + 1);
    let (mut x, mut v) = (x0, 0.0);
    for (t0, t1, s) in seq.segments() {
        out.push(PathSegment { t_start: t0, state: s, x_start: x, m_mean: x, m_var: v });
        let c = model.coeff(s);
        x = phi_coeffs(c, t1 - t0, x);
        v = var_step(c, v, t1 - t0);
    }
    out
}

/// M at the requested times, sampled with the exact Gaussian transition on
/// every constant-state interval of the merged (switch ∪ evaluation) grid.
pub fn sample_m_path<R: Rng + ?Sized>(
    seq: &SwitchSequence,
    x0: f64,
    eval_times: &[f64],
    model: &KacOuModel,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if eval_times.windows(2).any(|w| !(w[0] <= w[1])) || eval_times.first().is_some_and(|&t| !(t >= 0.0)) {
        return Err(KacError::UnsortedTimes);
    }
    if let Some(&t) = eval_times.last() {
        if t > seq.horizon {
            return Err(KacError::BeyondHorizon { t, horizon: seq.horizon });
        }
    }
    let mut out = Vec::with_capacity(eval_times.len());
    let mut m = x0;
    let mut now = 0.0;
    let advance = |m: &mut f64, c: &StateCoeffs, d: f64, rng: &mut R| {
        if d > 0.0 {
            let v = var_step(c, 0.0, d);
            let z: f64 = rng.sample(StandardNormal);
            *m = phi_coeffs(c, d, *m) + v.sqrt() * z;
        }
    };
    let mut ev = eval_times.iter().peekable();
    for (_, t1, s) in seq.segments() {
        let c = model.coeff(s);
        // evaluation points strictly inside the segment; a point equal to a
        // switch time is reached from the left (switch-first ordering)
        while let Some(&&te) = ev.peek() {
            if te > t1 {
                break;
            }
            advance(&mut m, c, te - now, rng);
            now = te;
            out.push(m);
            ev.next();
        }
        if ev.peek().is_none() {
            break;
        }
        advance(&mut m, c, t1 - now, rng);
        now = t1;
    }
    Ok(out)
}

/// Simulates to time t without storing the path and returns (ε(t), X(t), M(t)),
/// with M(t) drawn once from its conditional law N(X(t), V(t)).
pub fn sample_terminal<R: Rng + ?Sized>(
    model: &KacOuModel,
    x0: f64,
    initial_state: State,
    t: f64,
    rng: &mut R,
) -> (State, f64, f64) {
    let (mut x, mut v) = (x0, 0.0);
    let mut s = initial_state;
    let mut left = t;
    loop {
        let hold = holding(rng, model.lambda(s));
        let d = hold.min(left);
        let c = model.coeff(s);
        x = phi_coeffs(c, d, x);
        v = var_step(c, v, d);
        left -= hold;
        if left <= 0.0 {
            break;
        }
        s = s.other();
    }
    let z: f64 = rng.sample(StandardNormal);
    (s, x, x + v.sqrt() * z)
}

/// Samples T(x, y) for X started at x in `initial_state`.
pub fn sample_fpt<R: Rng + ?Sized>(
    x: f64,
    y: f64,
    initial_state: State,
    model: &KacOuModel,
    rng: &mut R,
    caps: FptCaps,
) -> FptOutcome {
    let (mut pos, mut s, mut t) = (x, initial_state, 0.0);
    let mut switches = 0u64;
    loop {
        let c = model.coeff(s);
        let hold = holding(rng, model.lambda(s));
        if let HittingTime::Finite(th) = hitting_time_coeffs(c, pos, y) {
            if th <= hold {
                let hit = t + th;
                return if hit <= caps.horizon {
                    FptOutcome::Hit(hit)
                } else {
                    FptOutcome::Censored { time: caps.horizon, reason: CensorReason::Horizon }
                };
            }
        }
        t += hold;
        if t > caps.horizon {
            return FptOutcome::Censored { time: caps.horizon, reason: CensorReason::Horizon };
        }
        pos = phi_coeffs(c, hold, pos);
        s = s.other();
        switches += 1;
        if switches >= caps.max_switches {
            return FptOutcome::Censored { time: t, reason: CensorReason::SwitchCap };
        }
    }
}

/// Censored-sample tally by reason.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CensorCounts {
    pub horizon: u64,
    pub switch_cap: u64,
}

impl CensorCounts {
    pub fn total(&self) -> u64 {
        self.horizon + self.switch_cap
    }

    pub fn add(&mut self, o: CensorCounts) {
        self.horizon += o.horizon;
        self.switch_cap += o.switch_cap;
    }
}

/// Monte Carlo E[e^{−qT}] together with the censored-sample counts.
/// Censored samples are treated as T = ∞ and contribute 0, so the bias is at
/// most e^{−q·horizon} per censored path.
pub fn mc_laplace_fpt_with_caps(
    query: &FptQuery,
    model: &KacOuModel,
    n: u64,
    seed: u64,
    caps: FptCaps,
) -> (McEstimate, CensorCounts) {
    let samples = par_map(n, |i| {
        let mut rng = rng_stream(seed, "fpt", i);
        match sample_fpt(query.x, query.y, query.initial_state, model, &mut rng, caps) {
            FptOutcome::Hit(t) => ((-query.q * t).exp(), None),
            FptOutcome::Censored { reason, .. } => (0.0, Some(reason)),
        }
    });
    let mut censored = CensorCounts::default();
    for (_, r) in &samples {
        match r {
            Some(CensorReason::Horizon) => censored.horizon += 1,
            Some(CensorReason::SwitchCap) => censored.switch_cap += 1,
            None => {}
        }
    }
    let values: Vec<f64> = samples.into_iter().map(|s| s.0).collect();
    (McEstimate::from_samples(&values), censored)
}

pub fn mc_laplace_fpt(query: &FptQuery, model: &KacOuModel, n: u64, seed: u64) -> Result<McEstimate> {
    if n < 1000 {
        return Err(invalid("n", "mc_laplace_fpt needs at least 1000 samples"));
    }
    Ok(mc_laplace_fpt_with_caps(query, model, n, seed, FptCaps::default()).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::pattern_phi;
    use crate::rng::rng_stream;

    fn example() -> KacOuModel {
        KacOuModel::from_params(1., 1., 0., 1., 0.5, 1.0, 1., 1.).unwrap()
    }

    #[test]
    fn sequence_is_deterministic_and_alternates() {
        let r = SwitchRates::new(1.0, 2.0).unwrap();
        let a = sample_switch_sequence(&r, State::One, 50.0, &mut rng_stream(1, "t", 0)).unwrap();
        let b = sample_switch_sequence(&r, State::One, 50.0, &mut rng_stream(1, "t", 0)).unwrap();
        assert_eq!(a, b);
        assert!(a.switch_times.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a.state_at(0.0), State::One);
        assert_eq!(a.state_at(a.switch_times[0]), State::Zero);
    }

    #[test]
    fn evaluate_without_switches_is_a_pattern() {
        let seq = SwitchSequence { initial_state: State::Zero, switch_times: vec![], horizon: 5.0 };
        let m = example();
        assert_eq!(evaluate_x(&seq, 0.8, 2.0, &m).unwrap(), pattern_phi(State::Zero, 2.0, 0.8, &m));
        assert!(evaluate_x(&seq, 0.8, 6.0, &m).is_err());
    }

    #[test]
    fn splice_at_switch_times_is_bit_exact() {
        let m = example();
        let seq = sample_switch_sequence(&m.rates, State::Zero, 20.0, &mut rng_stream(3, "t", 0)).unwrap();
        let segs = path_segments(&seq, 0.3, &m);
        for (k, &ts) in seq.switch_times.iter().enumerate() {
            assert_eq!(evaluate_x(&seq, 0.3, ts, &m).unwrap(), segs[k + 1].x_start);
        }
    }

    #[test]
    fn degenerate_model_matches_closed_form() {
        let m = KacOuModel::from_params(1., 2., 1., 3., 0., 0., 1., 3.).unwrap();
        let seq = sample_switch_sequence(&m.rates, State::Zero, 4.0, &mut rng_stream(5, "t", 0)).unwrap();
        let mut big_gamma = 0.0;
        for (t0, t1, s) in seq.segments() {
            big_gamma += m.gamma(s) * (t1.min(3.0) - t0.min(3.0));
        }
        let x = evaluate_x(&seq, -2.0, 3.0, &m).unwrap();
        assert!((x - (1.0 + (-3.0) * (-big_gamma).exp())).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_m_equals_x() {
        let m = KacOuModel::from_params(1., 1., 0., 1., 0., 0., 1., 2.).unwrap();
        let seq = sample_switch_sequence(&m.rates, State::Zero, 10.0, &mut rng_stream(2, "t", 0)).unwrap();
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5).collect();
        let path = sample_m_path(&seq, 0.4, &times, &m, &mut rng_stream(2, "m", 0)).unwrap();
        for (t, v) in times.iter().zip(&path) {
            assert!((v - evaluate_x(&seq, 0.4, *t, &m).unwrap()).abs() < 1e-13);
        }
        assert!(sample_m_path(&seq, 0.4, &[1.0, 0.5], &m, &mut rng_stream(2, "m", 0)).is_err());
    }

    #[test]
    fn single_segment_hit_is_exact() {
        // pattern of state 1 runs straight to y; pick a stream whose first
        // holding time exceeds the hitting time
        let m = KacOuModel::from_params(1., 1., 0., 1., 0., 0., 1., 0.).unwrap();
        for i in 0..100 {
            let mut probe = rng_stream(11, "hit", i);
            let hold: f64 = probe.sample::<f64, _>(Exp1);
            if hold > 0.5 {
                let out = sample_fpt(0.0, 0.5, State::One, &m, &mut rng_stream(11, "hit", i), FptCaps::default());
                assert_eq!(out, FptOutcome::Hit(0.5));
                return;
            }
        }
        panic!("no suitable stream");
    }
}
