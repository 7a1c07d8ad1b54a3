//! Model parameters, regime classification, deterministic patterns and the
//! two-state Markov chain algebra.

use std::fmt;

use serde::Serialize;

use crate::error::{invalid, KacError, Result};

/// State of the modulating chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum State {
    Zero,
    One,
}

impl State {
    pub const BOTH: [State; 2] = [State::Zero, State::One];

    pub fn index(self) -> usize {
        match self {
            State::Zero => 0,
            State::One => 1,
        }
    }

    pub fn other(self) -> State {
        match self {
            State::Zero => State::One,
            State::One => State::Zero,
        }
    }

    pub fn from_index(i: usize) -> Option<State> {
        match i {
            0 => Some(State::Zero),
            1 => Some(State::One),
            _ => None,
        }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchRates {
    pub lambda0: f64,
    pub lambda1: f64,
}

impl SwitchRates {
    pub fn new(lambda0: f64, lambda1: f64) -> Result<Self> {
        if !(lambda0.is_finite() && lambda0 > 0.0) {
            return Err(invalid("lambda0", format!("must be finite and > 0, got {lambda0}")));
        }
        if !(lambda1.is_finite() && lambda1 > 0.0) {
            return Err(invalid("lambda1", format!("must be finite and > 0, got {lambda1}")));
        }
        Ok(Self { lambda0, lambda1 })
    }

    /// Rate of leaving `s`.
    pub fn rate(&self, s: State) -> f64 {
        match s {
            State::Zero => self.lambda0,
            State::One => self.lambda1,
        }
    }

    pub fn total(&self) -> f64 {
        self.lambda0 + self.lambda1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateCoeffs {
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
}

impl StateCoeffs {
    pub fn new(a: f64, b: f64, gamma: f64) -> Result<Self> {
        if !a.is_finite() {
            return Err(invalid("a", "must be finite"));
        }
        if !(b.is_finite() && b >= 0.0) {
            return Err(invalid("b", format!("must be finite and >= 0, got {b}")));
        }
        if !gamma.is_finite() {
            return Err(invalid("gamma", "must be finite"));
        }
        Ok(Self { a, b, gamma })
    }

    /// Attractor/repeller level a/γ, if γ ≠ 0.
    pub fn rho(&self) -> Option<f64> {
        (self.gamma != 0.0).then(|| self.a / self.gamma)
    }

    /// Velocity of the pattern at x.
    pub fn velocity(&self, x: f64) -> f64 {
        self.a - self.gamma * x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KacOuModel {
    pub rates: SwitchRates,
    pub coeffs: [StateCoeffs; 2],
}

impl KacOuModel {
    pub fn new(rates: SwitchRates, coeffs: [StateCoeffs; 2]) -> Result<Self> {
        SwitchRates::new(rates.lambda0, rates.lambda1)?;
        for (i, c) in coeffs.iter().enumerate() {
            StateCoeffs::new(c.a, c.b, c.gamma).map_err(|e| match e {
                KacError::InvalidParameter { name, reason } => invalid(
                    match (name, i) {
                        ("a", 0) => "a0",
                        ("a", _) => "a1",
                        ("b", 0) => "b0",
                        ("b", _) => "b1",
                        (_, 0) => "gamma0",
                        _ => "gamma1",
                    },
                    reason,
                ),
                other => other,
            })?;
        }
        Ok(Self { rates, coeffs })
    }

    /// Builds a model from the eight scalar parameters.
    #[allow(clippy::too_many_arguments)]
    pub fn from_params(
        lambda0: f64,
        lambda1: f64,
        a0: f64,
        a1: f64,
        b0: f64,
        b1: f64,
        gamma0: f64,
        gamma1: f64,
    ) -> Result<Self> {
        Self::new(
            SwitchRates { lambda0, lambda1 },
            [StateCoeffs { a: a0, b: b0, gamma: gamma0 }, StateCoeffs { a: a1, b: b1, gamma: gamma1 }],
        )
    }

    pub fn coeff(&self, s: State) -> &StateCoeffs {
        &self.coeffs[s.index()]
    }

    pub fn lambda(&self, s: State) -> f64 {
        self.rates.rate(s)
    }

    pub fn gamma(&self, s: State) -> f64 {
        self.coeffs[s.index()].gamma
    }

    pub fn a(&self, s: State) -> f64 {
        self.coeffs[s.index()].a
    }

    pub fn rho(&self, s: State) -> Option<f64> {
        self.coeffs[s.index()].rho()
    }

    pub fn derived(&self) -> DerivedParams {
        let alpha = |s: State| {
            let g = self.gamma(s);
            (g != 0.0).then(|| self.lambda(s) / g)
        };
        DerivedParams {
            rho0: self.rho(State::Zero),
            rho1: self.rho(State::One),
            alpha0: alpha(State::Zero),
            alpha1: alpha(State::One),
        }
    }

    pub fn regime(&self) -> Regime {
        classify_regime(self)
    }

    /// Relabels the states 0 ↔ 1.
    pub fn swapped(&self) -> Self {
        Self {
            rates: SwitchRates { lambda0: self.rates.lambda1, lambda1: self.rates.lambda0 },
            coeffs: [self.coeffs[1], self.coeffs[0]],
        }
    }

    /// Image of the model under x ↦ −x.
    pub fn reflected(&self) -> Self {
        let r = |c: StateCoeffs| StateCoeffs { a: -c.a, ..c };
        Self { rates: self.rates, coeffs: [r(self.coeffs[0]), r(self.coeffs[1])] }
    }
}

/// Regime of the model, driving formula dispatch.
///
/// `NonStrictRepelling` and `PureTelegraph` complete the classification for
/// sign patterns that have no closed forms (one γ zero with the other
/// negative; both γ zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    AttractingStrict,
    AttractionRepulsion01,
    AttractionRepulsion10,
    NonStrictAttracting { zero_state: State, drift_sign: i8 },
    NonStrictRepelling { zero_state: State, drift_sign: i8 },
    RepulsionOnly,
    DegenerateEqualRho,
    NullNonStrict,
    PureTelegraph,
}

impl Regime {
    pub fn tag(&self) -> &'static str {
        match self {
            Regime::AttractingStrict => "AttractingStrict",
            Regime::AttractionRepulsion01 => "AttractionRepulsion01",
            Regime::AttractionRepulsion10 => "AttractionRepulsion10",
            Regime::NonStrictAttracting { .. } => "NonStrictAttracting",
            Regime::NonStrictRepelling { .. } => "NonStrictRepelling",
            Regime::RepulsionOnly => "RepulsionOnly",
            Regime::DegenerateEqualRho => "DegenerateEqualRho",
            Regime::NullNonStrict => "NullNonStrict",
            Regime::PureTelegraph => "PureTelegraph",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParams {
    pub rho0: Option<f64>,
    pub rho1: Option<f64>,
    pub alpha0: Option<f64>,
    pub alpha1: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionMatrix {
    pub p: [[f64; 2]; 2],
}

impl TransitionMatrix {
    pub fn mul(&self, o: &TransitionMatrix) -> TransitionMatrix {
        let mut p = [[0.0; 2]; 2];
        for (i, row) in p.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.p[i][0] * o.p[0][j] + self.p[i][1] * o.p[1][j];
            }
        }
        TransitionMatrix { p }
    }
}

/// Hitting time of a single pattern; `Infinite` when the level is never reached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HittingTime {
    Finite(f64),
    Infinite,
}

impl HittingTime {
    pub fn finite(self) -> Option<f64> {
        match self {
            HittingTime::Finite(t) => Some(t),
            HittingTime::Infinite => None,
        }
    }
}

fn same_rho(c0: &StateCoeffs, c1: &StateCoeffs) -> bool {
    let lhs = c0.a * c1.gamma;
    let rhs = c1.a * c0.gamma;
    let scale = lhs.abs().max(rhs.abs());
    (lhs - rhs).abs() <= 1e-12 * scale
}

pub fn classify_regime(model: &KacOuModel) -> Regime {
    let [c0, c1] = &model.coeffs;
    let (g0, g1) = (c0.gamma, c1.gamma);
    if g0 != 0.0 && g1 != 0.0 {
        if same_rho(c0, c1) {
            return Regime::DegenerateEqualRho;
        }
        return match (g0 > 0.0, g1 > 0.0) {
            (true, true) => Regime::AttractingStrict,
            (true, false) => Regime::AttractionRepulsion01,
            (false, true) => Regime::AttractionRepulsion10,
            (false, false) => Regime::RepulsionOnly,
        };
    }
    if g0 == 0.0 && g1 == 0.0 {
        return Regime::PureTelegraph;
    }
    let (zero_state, other) = if g1 == 0.0 { (State::One, c0) } else { (State::Zero, c1) };
    let a = model.a(zero_state);
    if a == 0.0 {
        return Regime::NullNonStrict;
    }
    let drift_sign = if a > 0.0 { 1 } else { -1 };
    if other.gamma > 0.0 {
        Regime::NonStrictAttracting { zero_state, drift_sign }
    } else {
        Regime::NonStrictRepelling { zero_state, drift_sign }
    }
}

/// Deterministic flow φ_s(t, x) of state `s`.
pub fn pattern_phi(state: State, t: f64, x: f64, model: &KacOuModel) -> f64 {
    phi_coeffs(model.coeff(state), t, x)
}

/// φ(t, x) = x e^{−γt} + a (1 − e^{−γt})/γ, written to stay accurate as γ → 0.
pub(crate) fn phi_coeffs(c: &StateCoeffs, t: f64, x: f64) -> f64 {
    if c.gamma == 0.0 {
        return x + c.a * t;
    }
    let em1 = (-c.gamma * t).exp_m1();
    x * (1.0 + em1) - c.a * em1 / c.gamma
}

pub fn hitting_time(state: State, x: f64, y: f64, model: &KacOuModel) -> Result<HittingTime> {
    if x == y {
        return Err(KacError::CoincidentPoints(x));
    }
    Ok(hitting_time_coeffs(model.coeff(state), x, y))
}

pub(crate) fn hitting_time_coeffs(c: &StateCoeffs, x: f64, y: f64) -> HittingTime {
    if c.gamma == 0.0 {
        if c.a == 0.0 {
            return HittingTime::Infinite;
        }
        let t = (y - x) / c.a;
        return if t > 0.0 { HittingTime::Finite(t) } else { HittingTime::Infinite };
    }
    let rho = c.a / c.gamma;
    let (dx, dy) = (x - rho, y - rho);
    if dx == 0.0 || dy == 0.0 {
        return HittingTime::Infinite;
    }
    let r = dx / dy;
    let reachable = r > 0.0 && if c.gamma > 0.0 { r > 1.0 } else { r < 1.0 };
    if reachable {
        HittingTime::Finite(r.ln() / c.gamma)
    } else {
        HittingTime::Infinite
    }
}

/// Π(t) = exp(tΛ) for the two-state generator.
pub fn transition_matrix(t: f64, rates: &SwitchRates) -> TransitionMatrix {
    let (l0, l1) = (rates.lambda0, rates.lambda1);
    let s = l0 + l1;
    let e = (-s * t).exp();
    let one_minus = -(-s * t).exp_m1();
    TransitionMatrix { p: [[(l1 + l0 * e) / s, l0 * one_minus / s], [l1 * one_minus / s, (l0 + l1 * e) / s]] }
}

pub fn stationary_state_dist(rates: &SwitchRates) -> [f64; 2] {
    let s = rates.total();
    [rates.lambda1 / s, rates.lambda0 / s]
}

/// Upper parameters b₀, b₁: either two real roots or a conjugate pair kept in
/// (sum, product) form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Roots {
    Real { b0: f64, b1: f64 },
    ConjugatePair { sum: f64, product: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperArgs {
    pub beta0: f64,
    pub beta1: f64,
    pub roots: Roots,
}

impl HyperArgs {
    pub fn real_roots(&self) -> Option<(f64, f64)> {
        match self.roots {
            Roots::Real { b0, b1 } => Some((b0, b1)),
            Roots::ConjugatePair { .. } => None,
        }
    }

    pub fn upper(&self) -> crate::special::UpperParams {
        match self.roots {
            Roots::Real { b0, b1 } => crate::special::UpperParams::Real(b0, b1),
            Roots::ConjugatePair { sum, product } => crate::special::UpperParams::ConjugatePair { sum, product },
        }
    }
}

/// β_i(q) and the roots b₀ ≥ b₁ of b² − (β₀+β₁)b + q(q+λ₀+λ₁)/(γ₀γ₁).
pub fn hyper_args(q: f64, model: &KacOuModel) -> Result<HyperArgs> {
    let (g0, g1) = (model.coeffs[0].gamma, model.coeffs[1].gamma);
    if g0 == 0.0 || g1 == 0.0 {
        return Err(invalid("gamma", "hyper_args needs gamma0 != 0 and gamma1 != 0"));
    }
    if !(q >= 0.0 && q.is_finite()) {
        return Err(invalid("q", format!("must be finite and >= 0, got {q}")));
    }
    let (l0, l1) = (model.rates.lambda0, model.rates.lambda1);
    let beta0 = (q + l0) / g0;
    let beta1 = (q + l1) / g1;
    let sum = beta0 + beta1;
    let product = q * (q + l0 + l1) / (g0 * g1);
    // (β₀−β₁)² + 4λ₀λ₁/(γ₀γ₁) avoids cancellation in s² − 4p.
    let disc = (beta0 - beta1).powi(2) + 4.0 * l0 * l1 / (g0 * g1);
    let roots = if disc < 0.0 {
        Roots::ConjugatePair { sum, product }
    } else {
        let big = 0.5 * (sum + sum.signum() * disc.sqrt());
        let small = if big == 0.0 { 0.0 } else { product / big };
        Roots::Real { b0: big.max(small), b1: big.min(small) }
    };
    Ok(HyperArgs { beta0, beta1, roots })
}

pub fn xi0(x: f64, rho0: f64, rho1: f64) -> f64 {
    (x - rho0) / (rho1 - rho0)
}

pub fn xi1(x: f64, rho0: f64, rho1: f64) -> f64 {
    (x - rho1) / (rho0 - rho1)
}
