//! Invariant densities of (X, ε).
//!
//! Every regime with a density is written in one product form
//!
//! πₛ(x) = kₛ · |x − r₀|^{eₛ₀} · |x − r₁|^{eₛ₁} · exp(−κ|x − r₀|),
//!
//! which covers the beta-like (attracting), Pareto-like (attraction–
//! repulsion) and gamma-like (non-strict) cases. Densities vanish outside
//! the support.

use serde::Serialize;

use crate::error::{invalid, KacError, Result};
use crate::model::{KacOuModel, Regime, State};
use crate::par::par_map;
use crate::quad::tanh_sinh;
use crate::rng::rng_stream;
use crate::sim::{sample_terminal, stationary_state};
use crate::special::{beta_fn, log_gamma};

const QUAD_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Support {
    Empty,
    Bounded {
        lo: f64,
        hi: f64,
    },
    /// (−∞, end]
    Below(f64),
    /// [start, ∞)
    Above(f64),
}

impl Support {
    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Support::Empty => false,
            Support::Bounded { lo, hi } => lo <= x && x <= hi,
            Support::Below(e) => x <= e,
            Support::Above(s) => x >= s,
        }
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            Support::Empty => None,
            Support::Bounded { lo, hi } => Some((lo, hi)),
            Support::Below(e) => Some((f64::NEG_INFINITY, e)),
            Support::Above(s) => Some((s, f64::INFINITY)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DensityKind {
    BetaLike,
    ParetoLike,
    GammaLike,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantDensity {
    pub kind: DensityKind,
    pub support: Support,
    /// Reference points r₀, r₁ of the power factors.
    pub centers: [f64; 2],
    /// exponents[s][i]: power of |x − rᵢ| in πₛ.
    pub exponents: [[f64; 2]; 2],
    pub constants: [f64; 2],
    /// Exponential decay rate κ (zero for the strict regimes).
    pub decay: f64,
    /// The regime normalizer: c for the strict regimes, C for the non-strict one.
    pub normalizer: f64,
}

/// Whether an invariant probability density exists, with its support.
pub fn invariant_exists(model: &KacOuModel) -> (bool, Support) {
    match InvariantDensity::new(model) {
        Ok(d) => (true, d.support),
        Err(_) => (false, Support::Empty),
    }
}

fn strict_exponents(alpha: [f64; 2]) -> [[f64; 2]; 2] {
    [[alpha[0] - 1.0, alpha[1]], [alpha[0], alpha[1] - 1.0]]
}

impl InvariantDensity {
    pub fn new(model: &KacOuModel) -> Result<Self> {
        let g = [model.gamma(State::Zero), model.gamma(State::One)];
        let lam = [model.lambda(State::Zero), model.lambda(State::One)];
        match model.regime() {
            Regime::AttractingStrict => {
                let rho = [model.a(State::Zero) / g[0], model.a(State::One) / g[1]];
                let alpha = [lam[0] / g[0], lam[1] / g[1]];
                let d = (rho[1] - rho[0]).abs();
                let inv = d.powf(alpha[0] + alpha[1])
                    * (beta_fn(alpha[0], alpha[1] + 1.0)? / g[0] + beta_fn(alpha[0] + 1.0, alpha[1])? / g[1]);
                let c = 1.0 / inv;
                Ok(Self {
                    kind: DensityKind::BetaLike,
                    support: Support::Bounded { lo: rho[0].min(rho[1]), hi: rho[0].max(rho[1]) },
                    centers: rho,
                    exponents: strict_exponents(alpha),
                    constants: [c / g[0], c / g[1]],
                    decay: 0.0,
                    normalizer: c,
                })
            }
            Regime::AttractionRepulsion01 | Regime::AttractionRepulsion10 => {
                let rho = [model.a(State::Zero) / g[0], model.a(State::One) / g[1]];
                let alpha = [lam[0] / g[0], lam[1] / g[1]];
                let sum = alpha[0] + alpha[1];
                if !(sum < 0.0) {
                    return Err(KacError::NoInvariantMeasure);
                }
                let (att, rep) = if g[0] > 0.0 { (0, 1) } else { (1, 0) };
                let d = (rho[att] - rho[rep]).abs();
                let inv = d.powf(sum)
                    * (beta_fn(alpha[att], -sum)? / g[att].abs() + beta_fn(alpha[att] + 1.0, -sum)? / g[rep].abs());
                let c = 1.0 / inv;
                let support = if rho[att] < rho[rep] { Support::Below(rho[att]) } else { Support::Above(rho[att]) };
                Ok(Self {
                    kind: DensityKind::ParetoLike,
                    support,
                    centers: rho,
                    exponents: strict_exponents(alpha),
                    constants: [c / g[0].abs(), c / g[1].abs()],
                    decay: 0.0,
                    normalizer: c,
                })
            }
            Regime::NonStrictAttracting { zero_state, .. } => {
                let z = zero_state;
                let p = z.other();
                let az = model.a(z);
                let rho = model.a(p) / model.gamma(p);
                let alpha = model.lambda(p) / model.gamma(p);
                let kappa = model.lambda(z) / az.abs();
                let big_c = (alpha * kappa.ln() - log_gamma(alpha)?).exp() * model.lambda(z)
                    / (model.lambda(p) + model.lambda(z));
                let mut exponents = [[0.0; 2]; 2];
                let mut constants = [0.0; 2];
                exponents[p.index()][0] = alpha - 1.0;
                exponents[z.index()][0] = alpha;
                constants[p.index()] = big_c;
                constants[z.index()] = model.gamma(p) / az.abs() * big_c;
                let support = if az > 0.0 { Support::Above(rho) } else { Support::Below(rho) };
                Ok(Self {
                    kind: DensityKind::GammaLike,
                    support,
                    centers: [rho, rho],
                    exponents,
                    constants,
                    decay: kappa,
                    normalizer: big_c,
                })
            }
            _ => Err(KacError::NoInvariantMeasure),
        }
    }

    /// πₛ given the distances to the two centers.
    fn at_distances(&self, s: State, d0: f64, d1: f64) -> f64 {
        let e = self.exponents[s.index()];
        let pw = |d: f64, e: f64| if e == 0.0 { 1.0 } else { d.powf(e) };
        self.constants[s.index()] * pw(d0, e[0]) * pw(d1, e[1]) * (-self.decay * d0).exp()
    }

    pub fn density(&self, x: f64, s: State) -> f64 {
        if !self.support.contains(x) {
            return 0.0;
        }
        let v = self.at_distances(s, (x - self.centers[0]).abs(), (x - self.centers[1]).abs());
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }

    /// d/dx log πₛ(x) for x in the interior of the support.
    fn log_derivative(&self, x: f64, s: State) -> f64 {
        let e = self.exponents[s.index()];
        let mut v = 0.0;
        for (ei, c) in e.iter().zip(self.centers) {
            if *ei != 0.0 {
                v += ei / (x - c);
            }
        }
        v - self.decay * (x - self.centers[0]).signum()
    }

    fn distances_from(&self, base: f64, u: f64) -> [f64; 2] {
        // distance to each center when x lies u beyond `base`, moving away
        // from both centers (or base is itself a center)
        let d = |r: f64| if r == base { u } else { (base - r).abs() + u };
        [d(self.centers[0]), d(self.centers[1])]
    }

    /// ∫ₐᵇ πₛ over a finite sub-interval of the support.
    pub fn integrate(&self, a: f64, b: f64, s: State) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        let w = b - a;
        let dist = |r: f64, t: f64, rt: f64| {
            if r == a {
                t * w
            } else if r == b {
                rt * w
            } else {
                (a + t * w - r).abs()
            }
        };
        w * tanh_sinh(
            |t, rt| {
                let d0 = dist(self.centers[0], t, rt);
                let d1 = dist(self.centers[1], t, rt);
                self.at_distances(s, d0, d1)
            },
            QUAD_TOL,
        )
    }

    /// Mass of πₛ beyond `from` on a half-line support, via u = L·t/(1−t).
    fn tail(&self, from: f64, s: State) -> f64 {
        let scale = self.length_scale();
        tanh_sinh(
            |t, rt| {
                let u = scale * t / rt;
                let [d0, d1] = self.distances_from(from, u);
                self.at_distances(s, d0, d1) * scale / (rt * rt)
            },
            QUAD_TOL,
        )
    }

    /// Mass of πₛ over the whole support.
    pub fn state_mass(&self, s: State) -> f64 {
        match self.support {
            Support::Empty => 0.0,
            Support::Bounded { lo, hi } => self.integrate(lo, hi, s),
            Support::Below(e) => self.tail(e, s),
            Support::Above(st) => self.tail(st, s),
        }
    }

    /// Σₛ ∫ πₛ, which equals 1 up to quadrature error.
    pub fn total_mass(&self) -> f64 {
        self.state_mass(State::Zero) + self.state_mass(State::One)
    }

    /// Natural length of a half-line support: 1/κ, or the distance between
    /// the two centers.
    pub fn length_scale(&self) -> f64 {
        if self.decay > 0.0 {
            1.0 / self.decay
        } else {
            (self.centers[0] - self.centers[1]).abs()
        }
    }

    /// Distance from the finite end of a half-line support beyond which the
    /// pooled mass is `tail`; zero for other supports.
    pub fn truncation(&self, tail: f64) -> f64 {
        if !matches!(self.support, Support::Below(_) | Support::Above(_)) {
            return 0.0;
        }
        let scale = self.length_scale();
        let (mut lo, mut hi) = (0.0, scale);
        while self.pooled_tail_beyond(hi) > tail && hi < 1e12 * scale {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.pooled_tail_beyond(mid) > tail {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Finite interval covering the support up to a pooled tail mass `tail`.
    pub fn display_range(&self, tail: f64) -> Option<(f64, f64)> {
        match self.support {
            Support::Empty => None,
            Support::Bounded { lo, hi } => Some((lo, hi)),
            Support::Below(e) => Some((e - self.truncation(tail), e)),
            Support::Above(s) => Some((s, s + self.truncation(tail))),
        }
    }

    /// Pooled mass beyond distance `u` from the finite end of a half-line.
    fn pooled_tail_beyond(&self, u: f64) -> f64 {
        let (end, dir) = match self.support {
            Support::Below(e) => (e, -1.0),
            Support::Above(s) => (s, 1.0),
            _ => return 0.0,
        };
        let x = end + dir * u;
        self.tail(x, State::Zero) + self.tail(x, State::One)
    }
}

/// πₛ(x); zero outside the support.
pub fn invariant_density(x: f64, state: State, model: &KacOuModel) -> Result<f64> {
    Ok(InvariantDensity::new(model)?.density(x, state))
}

/// Relative residuals of (γₛx − aₛ)πₛ' = (λₛ − γₛ)πₛ − λₒπₒ for both states.
pub fn stationarity_residual(x: f64, model: &KacOuModel) -> Result<[f64; 2]> {
    let dens = InvariantDensity::new(model)?;
    stationarity_residual_of(&dens, x, model)
}

pub(crate) fn stationarity_residual_of(dens: &InvariantDensity, x: f64, model: &KacOuModel) -> Result<[f64; 2]> {
    let interior = match dens.support {
        Support::Bounded { lo, hi } => lo < x && x < hi,
        Support::Below(e) => x < e,
        Support::Above(s) => x > s,
        Support::Empty => false,
    };
    if !interior {
        return Err(KacError::OutOfDomain(format!("x = {x} is not interior to {:?}", dens.support)));
    }
    let pi = [dens.density(x, State::Zero), dens.density(x, State::One)];
    let mut out = [0.0; 2];
    for s in State::BOTH {
        let (i, o) = (s.index(), s.other().index());
        let (g, a, l, lo) = (model.gamma(s), model.a(s), model.lambda(s), model.lambda(s.other()));
        let lhs = (g * x - a) * pi[i] * dens.log_derivative(x, s);
        let t1 = (l - g) * pi[i];
        let t2 = lo * pi[o];
        let scale = lhs.abs() + t1.abs() + t2.abs();
        out[i] = if scale > 0.0 { (lhs - t1 + t2) / scale } else { 0.0 };
    }
    Ok(out)
}

/// Histogram comparison of simulated terminal positions with the density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramDistance {
    /// L1 distance between pooled bin frequencies and bin masses.
    pub l1: f64,
    /// Per-state L1 distances, emitted when n_paths ≥ 10⁵.
    pub per_state_l1: Option<[f64; 2]>,
    pub edges: Vec<f64>,
    /// Whether the last cell is an overflow cell for a half-line support.
    pub overflow: bool,
}

/// Simulates `n_paths` trajectories to `t_horizon` from a fixed interior start
/// with a stationary initial state and compares the histogram of X(t_horizon)
/// with the closed-form density.
pub fn empirical_invariant_distance(
    model: &KacOuModel,
    n_paths: u64,
    t_horizon: f64,
    bins: usize,
    seed: u64,
) -> Result<HistogramDistance> {
    let dens = InvariantDensity::new(model)?;
    if n_paths == 0 {
        return Err(invalid("n_paths", "must be ≥ 1"));
    }
    if bins == 0 {
        return Err(invalid("bins", "must be ≥ 1"));
    }
    if !(t_horizon > 0.0 && t_horizon.is_finite()) {
        return Err(invalid("t_horizon", "must be finite and > 0"));
    }
    let (start, edges, overflow) = match dens.support {
        Support::Bounded { lo, hi } => {
            let e: Vec<f64> = (0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect();
            (0.5 * (lo + hi), e, false)
        }
        Support::Below(end) | Support::Above(end) => {
            let dir = if matches!(dens.support, Support::Above(_)) { 1.0 } else { -1.0 };
            let cut = dens.truncation(1e-3);
            let mut e: Vec<f64> = (0..=bins).map(|k| end + dir * cut * k as f64 / bins as f64).collect();
            if dir < 0.0 {
                e.reverse();
            }
            (end + dir * dens.length_scale(), e, true)
        }
        Support::Empty => return Err(KacError::NoInvariantMeasure),
    };

    let finals = par_map(n_paths, |i| {
        let mut rng = rng_stream(seed, "invariant", i);
        let s0 = stationary_state(&model.rates, &mut rng);
        let (s, x, _) = sample_terminal(model, start, s0, t_horizon, &mut rng);
        (s, x)
    });

    let cells = bins + usize::from(overflow);
    let mut counts = [vec![0u64; cells], vec![0u64; cells]];
    let (lo, hi) = (edges[0], edges[bins]);
    let below_is_overflow = matches!(dens.support, Support::Below(_));
    for (s, x) in &finals {
        let k = if x < &lo {
            if below_is_overflow {
                bins
            } else {
                0
            }
        } else if x >= &hi {
            if overflow && !below_is_overflow {
                bins
            } else {
                bins - 1
            }
        } else {
            (((x - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1)
        };
        counts[s.index()][k] += 1;
    }

    let mut model_mass = [vec![0.0; cells], vec![0.0; cells]];
    for s in State::BOTH {
        for k in 0..bins {
            model_mass[s.index()][k] = dens.integrate(edges[k], edges[k + 1], s);
        }
        if overflow {
            let from = if below_is_overflow { lo } else { hi };
            model_mass[s.index()][bins] = dens.tail(from, s);
        }
    }
    let n = n_paths as f64;
    let mut pooled = 0.0;
    let mut per = [0.0; 2];
    for k in 0..cells {
        let c0 = counts[0][k] as f64 / n;
        let c1 = counts[1][k] as f64 / n;
        pooled += (c0 + c1 - model_mass[0][k] - model_mass[1][k]).abs();
        per[0] += (c0 - model_mass[0][k]).abs();
        per[1] += (c1 - model_mass[1][k]).abs();
    }
    Ok(HistogramDistance { l1: pooled, per_state_l1: (n_paths >= 100_000).then_some(per), edges, overflow })
}
