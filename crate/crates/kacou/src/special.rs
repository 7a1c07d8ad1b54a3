//! Pochhammer symbols, Gauss ₂F₁, Kummer ₁F₁, log-Gamma and Beta.

use crate::error::{invalid, KacError, Result};

const REL_TOL: f64 = 1e-14;
const ABS_FLOOR: f64 = 1e-300;
const MAX_TERMS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesResult {
    pub value: f64,
    pub terms_used: usize,
    pub converged: bool,
}

/// Upper parameters of ₂F₁. A complex-conjugate pair is carried as
/// (sum, product) so that (b₀+n)(b₁+n) = n² + n·sum + product stays real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpperParams {
    Real(f64, f64),
    ConjugatePair { sum: f64, product: f64 },
}

impl UpperParams {
    fn coef(&self, n: f64) -> f64 {
        match *self {
            UpperParams::Real(a, b) => (a + n) * (b + n),
            UpperParams::ConjugatePair { sum, product } => n * n + n * sum + product,
        }
    }

    fn sum(&self) -> f64 {
        match *self {
            UpperParams::Real(a, b) => a + b,
            UpperParams::ConjugatePair { sum, .. } => sum,
        }
    }

    /// Degree of the polynomial when a real parameter is 0 or a negative integer.
    fn terminating_degree(&self) -> Option<usize> {
        match *self {
            UpperParams::Real(a, b) => {
                let deg = |p: f64| (p <= 0.0 && p.fract() == 0.0).then(|| (-p) as usize);
                match (deg(a), deg(b)) {
                    (Some(m), Some(k)) => Some(m.min(k)),
                    (m, k) => m.or(k),
                }
            }
            UpperParams::ConjugatePair { .. } => None,
        }
    }
}

pub fn pochhammer(b: f64, n: usize) -> f64 {
    (0..n).fold(1.0, |acc, k| acc * (b + k as f64))
}

fn is_pole(c: f64) -> bool {
    c <= 0.0 && c.fract() == 0.0
}

/// Sums Σ tₙ with t₀ = 1 and tₙ₊₁ = tₙ·ratio(n). Stops once both the current
/// term and a geometric bound on the tail fall below REL_TOL·|sum|.
fn sum_series(ratio: impl Fn(f64) -> f64, z_abs: f64, max_terms: usize) -> Result<SeriesResult> {
    let mut sum = 1.0f64;
    let mut term = 1.0f64;
    let mut quiet = 0;
    for n in 0..max_terms {
        let next = term * ratio(n as f64);
        sum += next;
        if next == 0.0 || !next.is_finite() {
            if !next.is_finite() {
                break;
            }
            return Ok(SeriesResult { value: sum, terms_used: n + 1, converged: true });
        }
        let r = if term != 0.0 { (next / term).abs().max(z_abs) } else { z_abs };
        let tail = if r < 1.0 { next.abs() * r / (1.0 - r) } else { f64::INFINITY };
        let bound = REL_TOL * sum.abs();
        if (next.abs() <= bound && tail <= bound) || next.abs() < ABS_FLOOR {
            quiet += 1;
            if quiet >= 2 {
                return Ok(SeriesResult { value: sum, terms_used: n + 1, converged: true });
            }
        } else {
            quiet = 0;
        }
        term = next;
    }
    Err(KacError::NotConverged { terms_used: max_terms })
}

/// Direct defining series of ₂F₁ for |z| ≤ 1 (no transformation).
pub fn gauss_2f1_series(upper: UpperParams, c: f64, z: f64) -> Result<SeriesResult> {
    if is_pole(c) {
        return Err(KacError::Pole { name: "b2", value: c });
    }
    if !(z.abs() <= 1.0) {
        return Err(KacError::OutOfDomain(format!("direct 2F1 series needs |z| <= 1, got {z}")));
    }
    sum_series(|n| upper.coef(n) / ((c + n) * (n + 1.0)) * z, z.abs(), MAX_TERMS)
}

/// A value represented as `value · exp(log_scale)`, so that prefactors such as
/// (1−z)^{−b} or e^z cannot overflow before a ratio is taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub value: f64,
    pub log_scale: f64,
    pub terms_used: usize,
}

impl Scaled {
    fn plain(r: SeriesResult) -> Self {
        Self { value: r.value, log_scale: 0.0, terms_used: r.terms_used }
    }

    pub fn get(&self) -> f64 {
        self.value * self.log_scale.exp()
    }

    /// self / other, combining the scales before exponentiating.
    pub fn ratio(&self, other: &Scaled) -> f64 {
        self.value / other.value * (self.log_scale - other.log_scale).exp()
    }

    fn into_result(self) -> SeriesResult {
        SeriesResult { value: self.get(), terms_used: self.terms_used, converged: true }
    }
}

/// Gauss hypergeometric function F(b₀, b₁; c; z) for real z ≤ 1.
///
/// z ∈ [0, 1): defining series, or its Euler transform
/// (1−z)^{c−b₀−b₁} F(c−b₀, c−b₁; c; z) when that has smaller coefficients;
/// near z = 1 the z → 1−z connection formula. z = 1: Gauss summation
/// (requires c − b₀ − b₁ > 0). z < 0: Pfaff transformation
/// F = (1−z)^{−b₀} F(b₀, c−b₁; c; z/(z−1)).
pub fn gauss_2f1(upper: UpperParams, c: f64, z: f64) -> Result<SeriesResult> {
    gauss_2f1_scaled(upper, c, z).map(Scaled::into_result)
}

/// [`gauss_2f1`] with the transformation prefactor kept in log form.
pub fn gauss_2f1_scaled(upper: UpperParams, c: f64, z: f64) -> Result<Scaled> {
    if is_pole(c) {
        return Err(KacError::Pole { name: "b2", value: c });
    }
    if !z.is_finite() {
        return Err(invalid("z", "must be finite"));
    }
    if z == 0.0 {
        return Ok(Scaled { value: 1.0, log_scale: 0.0, terms_used: 0 });
    }
    if let Some(m) = upper.terminating_degree() {
        // finite polynomial, exact for every z
        let r = sum_series(|n| upper.coef(n) / ((c + n) * (n + 1.0)) * z, 0.0, m + 2)?;
        return Ok(Scaled::plain(r));
    }
    if z > 1.0 {
        return Err(KacError::OutOfDomain(format!("2F1 is not continued to z > 1 (z = {z})")));
    }
    if z == 1.0 {
        return gauss_sum_at_one(upper, c).map(Scaled::plain);
    }
    if z >= 0.0 {
        if let UpperParams::Real(a, b) = upper {
            let small = a.abs().max(b.abs()).max(c.abs()) < 50.0;
            if z > 0.75 && small {
                if let Some(r) = connection_near_one(upper, c, z)? {
                    return Ok(Scaled::plain(r));
                }
            }
            if ((c - a) * (c - b)).abs() < (a * b).abs() {
                let inner = gauss_2f1_series(UpperParams::Real(c - a, c - b), c, z)?;
                return Ok(Scaled {
                    value: inner.value,
                    log_scale: (c - a - b) * (-z).ln_1p(),
                    terms_used: inner.terms_used,
                });
            }
        }
        return gauss_2f1_series(upper, c, z).map(Scaled::plain);
    }
    match upper {
        UpperParams::Real(a, b) => {
            let (p, o) = if a <= b { (a, b) } else { (b, a) };
            let w = z / (z - 1.0);
            let inner = gauss_2f1_scaled(UpperParams::Real(p, c - o), c, w)?;
            Ok(Scaled { log_scale: inner.log_scale - p * (-z).ln_1p(), ..inner })
        }
        UpperParams::ConjugatePair { .. } if z > -1.0 => gauss_2f1_series(upper, c, z).map(Scaled::plain),
        UpperParams::ConjugatePair { .. } => {
            Err(KacError::OutOfDomain(format!("complex upper parameters are only supported for |z| < 1 (z = {z})")))
        }
    }
}

/// Convenience wrapper returning the value of F(a, b; c; z).
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    gauss_2f1(UpperParams::Real(a, b), c, z).map(|r| r.value)
}

/// Π Γ(num) / Π Γ(den); reciprocal Gamma vanishes at poles of the denominator.
fn gamma_ratio(num: &[f64], den: &[f64]) -> Option<f64> {
    if den.iter().any(|&d| is_pole(d)) {
        return Some(0.0);
    }
    if num.iter().any(|&n| is_pole(n)) {
        return None;
    }
    let mut log = 0.0;
    let mut sign = 1;
    for &v in num {
        let (l, s) = libm::lgamma_r(v);
        log += l;
        sign *= s;
    }
    for &v in den {
        let (l, s) = libm::lgamma_r(v);
        log -= l;
        sign *= s;
    }
    Some(f64::from(sign) * log.exp())
}

/// z → 1 − z connection formula, used close to z = 1 where the direct series
/// converges only algebraically. Returns `None` when c − a − b is (nearly) an
/// integer and the two terms would cancel catastrophically.
fn connection_near_one(upper: UpperParams, c: f64, z: f64) -> Result<Option<SeriesResult>> {
    let UpperParams::Real(a, b) = upper else {
        return Ok(None);
    };
    let s = c - a - b;
    if (s - s.round()).abs() < 1e-3 {
        return Ok(None);
    }
    let w = 1.0 - z;
    let (Some(ca), Some(cb)) = (gamma_ratio(&[c, s], &[c - a, c - b]), gamma_ratio(&[c, -s], &[a, b])) else {
        return Ok(None);
    };
    let mut value = 0.0;
    let mut terms = 0;
    if ca != 0.0 {
        let f = gauss_2f1_series(UpperParams::Real(a, b), 1.0 - s, w)?;
        value += ca * f.value;
        terms += f.terms_used;
    }
    if cb != 0.0 {
        let f = gauss_2f1_series(UpperParams::Real(c - a, c - b), 1.0 + s, w)?;
        value += cb * w.powf(s) * f.value;
        terms += f.terms_used;
    }
    Ok(Some(SeriesResult { value, terms_used: terms, converged: true }))
}

fn gauss_sum_at_one(upper: UpperParams, c: f64) -> Result<SeriesResult> {
    let excess = c - upper.sum();
    if !(excess > 0.0) {
        return Err(KacError::OutOfDomain(format!("2F1 at z = 1 needs b2 - b0 - b1 > 0 (got {excess})")));
    }
    let UpperParams::Real(a, b) = upper else {
        return Err(KacError::OutOfDomain("2F1 at z = 1 with complex upper parameters".into()));
    };
    let value = gamma_ratio(&[c, excess], &[c - a, c - b])
        .ok_or_else(|| KacError::OutOfDomain("Gauss summation at a Gamma pole".into()))?;
    Ok(SeriesResult { value, terms_used: 0, converged: true })
}

/// Direct series of Kummer's Φ(a; b; z), no transformation.
pub fn kummer_1f1_series(a: f64, b: f64, z: f64) -> Result<SeriesResult> {
    if is_pole(b) {
        return Err(KacError::Pole { name: "b", value: b });
    }
    if !z.is_finite() {
        return Err(invalid("z", "must be finite"));
    }
    sum_series(|n| (a + n) / ((b + n) * (n + 1.0)) * z, 0.0, MAX_TERMS)
}

/// Kummer's confluent hypergeometric function Φ(a; b; z). Kummer's
/// transformation Φ(a;b;z) = e^z Φ(b−a; b; −z) is applied for z < 0 (all
/// terms positive) and whenever it shrinks the numerator parameter.
pub fn kummer_1f1(a: f64, b: f64, z: f64) -> Result<SeriesResult> {
    kummer_1f1_scaled(a, b, z).map(Scaled::into_result)
}

/// [`kummer_1f1`] with the e^z prefactor kept in log form.
pub fn kummer_1f1_scaled(a: f64, b: f64, z: f64) -> Result<Scaled> {
    let terminates = a <= 0.0 && a.fract() == 0.0;
    let transform = !terminates && (z < 0.0 || (b - a).abs() < a.abs());
    if !transform {
        return kummer_1f1_series(a, b, z).map(Scaled::plain);
    }
    let inner = kummer_1f1_series(b - a, b, -z)?;
    Ok(Scaled { value: inner.value, log_scale: z, terms_used: inner.terms_used })
}

pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(invalid("x", format!("log_gamma needs x > 0, got {x}")));
    }
    Ok(libm::lgamma_r(x).0)
}

pub fn gamma_fn(x: f64) -> Result<f64> {
    log_gamma(x).map(f64::exp)
}

pub fn beta_fn(p: f64, r: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(invalid("p", format!("beta needs p > 0, got {p}")));
    }
    if !(r > 0.0) {
        return Err(invalid("r", format!("beta needs r > 0, got {r}")));
    }
    Ok((log_gamma(p)? + log_gamma(r)? - log_gamma(p + r)?).exp())
}
