//! Laplace transforms ℓᵢ(q, x, y) = E[exp(−q T(x, y)) | ε(0) = i] of the
//! first-passage time of X through the level y.
//!
//! Closed forms are stated for a normalized orientation (ρ₀ < ρ₁, the
//! attracting state labelled 0, the zero-γ state labelled 1, positive drift);
//! other orientations are mapped onto it by relabelling and x ↦ −x.

mod oracle;

pub use oracle::fpt_integral_oracle;

use crate::error::{invalid, KacError, Result};
use crate::model::{hyper_args, xi0, xi1, KacOuModel, Regime, State};
use crate::special::{gauss_2f1_scaled, kummer_1f1_scaled, Scaled, UpperParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FptQuery {
    pub q: f64,
    pub x: f64,
    pub y: f64,
    pub initial_state: State,
}

impl FptQuery {
    pub fn new(q: f64, x: f64, y: f64, initial_state: State) -> Result<Self> {
        if !(q >= 0.0 && q.is_finite()) {
            return Err(invalid("q", format!("must be finite and >= 0, got {q}")));
        }
        if !(x.is_finite() && y.is_finite()) {
            return Err(invalid("x", "x and y must be finite"));
        }
        if x == y {
            return Err(KacError::CoincidentPoints(x));
        }
        Ok(Self { q, x, y, initial_state })
    }
}

/// A model/query pair mapped to the orientation the formulas are written in.
struct Normalized {
    model: KacOuModel,
    x: f64,
    y: f64,
    swapped: bool,
}

impl Normalized {
    fn new(model: &KacOuModel, x: f64, y: f64, swap: bool) -> Self {
        let model = if swap { model.swapped() } else { *model };
        Self { model, x, y, swapped: swap }
    }

    fn reflect(self) -> Self {
        Self { model: self.model.reflected(), x: -self.x, y: -self.y, ..self }
    }

    fn reflect_if(self, cond: impl Fn(&KacOuModel) -> bool) -> Self {
        if cond(&self.model) {
            self.reflect()
        } else {
            self
        }
    }

    fn unmap(&self, l: [f64; 2]) -> [f64; 2] {
        if self.swapped {
            [l[1], l[0]]
        } else {
            l
        }
    }
}

fn rhos(m: &KacOuModel) -> (f64, f64) {
    (m.coeffs[0].a / m.coeffs[0].gamma, m.coeffs[1].a / m.coeffs[1].gamma)
}

fn f2(upper: UpperParams, c: f64, z: f64) -> Result<Scaled> {
    gauss_2f1_scaled(upper, c, z)
}

fn out_of_domain(what: &str, x: f64, y: f64) -> KacError {
    KacError::OutOfDomain(format!("{what} (x = {x}, y = {y})"))
}

/// Attracting regime, ρ₀ < ρ₁.
fn attracting(q: f64, n: &Normalized) -> Result<[f64; 2]> {
    let m = &n.model;
    let (r0, r1) = rhos(m);
    let (x, y) = (n.x, n.y);
    let h = hyper_args(q, m)?;
    let up = h.upper();
    let (l0, l1) = (m.rates.lambda0, m.rates.lambda1);
    if x < y {
        if !(r0 <= y && y < r1 && 2.0 * r0 - r1 < x) {
            return Err(out_of_domain("attracting x<y needs rho0 <= y < rho1, x > 2 rho0 - rho1", x, y));
        }
        let den = f2(up, h.beta0, xi0(y, r0, r1))?;
        let zx = xi0(x, r0, r1);
        Ok([l0 / (q + l0) * f2(up, 1.0 + h.beta0, zx)?.ratio(&den), f2(up, h.beta0, zx)?.ratio(&den)])
    } else {
        if !(r0 < y && y <= r1 && x < 2.0 * r1 - r0) {
            return Err(out_of_domain("attracting x>y needs rho0 < y <= rho1, x < 2 rho1 - rho0", x, y));
        }
        let den = f2(up, h.beta1, xi1(y, r0, r1))?;
        let zx = xi1(x, r0, r1);
        Ok([f2(up, h.beta1, zx)?.ratio(&den), l1 / (q + l1) * f2(up, 1.0 + h.beta1, zx)?.ratio(&den)])
    }
}

/// Attraction–repulsion, γ₀ > 0 > γ₁, ρ₀ < ρ₁: state 0 is pulled to ρ₀,
/// state 1 is pushed downwards below ρ₁.
fn attraction_repulsion(q: f64, n: &Normalized) -> Result<[f64; 2]> {
    let m = &n.model;
    let (r0, r1) = rhos(m);
    let (x, y) = (n.x, n.y);
    let lower = 2.0 * r0 - r1;
    let h = hyper_args(q, m)?;
    let (l0, _) = (m.rates.lambda0, m.rates.lambda1);
    let Some((b0, b1)) = h.real_roots() else {
        return Err(KacError::OutOfDomain("complex hypergeometric parameters".into()));
    };
    let beta0 = h.beta0;
    if x < y {
        if !(lower < x && y < r0) {
            return Err(out_of_domain("attraction-repulsion x<y needs 2 rho0 - rho1 < x < y < rho0", x, y));
        }
        // Solution of the ODE system that stays bounded as x → −∞, expanded
        // in w = 1/(1 − ξ₀); hits y from below only in state 0.
        let alpha0 = m.rates.lambda0 / m.coeffs[0].gamma;
        let c = b0 - b1 + 1.0;
        let scaled = |lower: f64, z: f64| -> Result<Scaled> {
            let w = 1.0 / (1.0 - z);
            let f = f2(UpperParams::Real(b0, lower - b1), c, w)?;
            Ok(Scaled { log_scale: f.log_scale + b0 * w.ln(), ..f })
        };
        let (zx, zy) = (xi0(x, r0, r1), xi0(y, r0, r1));
        let den = scaled(1.0 + beta0, zy)?;
        Ok([scaled(1.0 + beta0, zx)?.ratio(&den), (beta0 - b0) / alpha0 * scaled(beta0, zx)?.ratio(&den)])
    } else {
        if !(lower < y && y < r0 && x < r1) {
            return Err(out_of_domain("attraction-repulsion x>y needs 2 rho0 - rho1 < y < rho0, x < rho1", x, y));
        }
        // Solution regular at the attractor ρ₀; hits y from above only in state 1.
        let up = UpperParams::Real(b0, b1);
        let (zx, zy) = (xi0(x, r0, r1), xi0(y, r0, r1));
        let den = f2(up, beta0, zy)?;
        Ok([l0 / (q + l0) * f2(up, 1.0 + beta0, zx)?.ratio(&den), f2(up, beta0, zx)?.ratio(&den)])
    }
}

/// Non-strict attraction: γ₁ = 0 with a₁ > 0, γ₀ > 0.
fn non_strict(q: f64, n: &Normalized) -> Result<[f64; 2]> {
    let m = &n.model;
    let (x, y) = (n.x, n.y);
    let g0 = m.coeffs[0].gamma;
    let r0 = m.coeffs[0].a / g0;
    let a1 = m.coeffs[1].a;
    if !(x < y && y > r0) {
        return Err(out_of_domain("non-strict closed form covers passage upwards (x < y) through y beyond rho", x, y));
    }
    let (l0, l1) = (m.rates.lambda0, m.rates.lambda1);
    let beta0 = (q + l0) / g0;
    let delta = q * (q + l0 + l1) / (g0 * (q + l1));
    let k = (q + l1) / a1;
    let phi = |b: f64, x: f64| kummer_1f1_scaled(delta, b, (x - r0) * k);
    let den = phi(beta0, y)?;
    Ok([l0 / (q + l0) * phi(1.0 + beta0, x)?.ratio(&den), phi(beta0, x)?.ratio(&den)])
}

type BranchFn = fn(f64, &Normalized) -> Result<[f64; 2]>;

/// Both Laplace transforms (ℓ₀, ℓ₁) at (q, x, y).
pub fn laplace_fpt_pair(q: f64, x: f64, y: f64, model: &KacOuModel) -> Result<[f64; 2]> {
    FptQuery::new(q, x, y, State::Zero)?;
    let rho_gt = |m: &KacOuModel| {
        let (r0, r1) = rhos(m);
        r0 > r1
    };
    let (n, f): (Normalized, BranchFn) = match model.regime() {
        Regime::AttractingStrict => (Normalized::new(model, x, y, false).reflect_if(rho_gt), attracting),
        Regime::AttractionRepulsion01 => (Normalized::new(model, x, y, false).reflect_if(rho_gt), attraction_repulsion),
        Regime::AttractionRepulsion10 => (Normalized::new(model, x, y, true).reflect_if(rho_gt), attraction_repulsion),
        Regime::NonStrictAttracting { zero_state, .. } => {
            (Normalized::new(model, x, y, zero_state == State::Zero).reflect_if(|m| m.coeffs[1].a < 0.0), non_strict)
        }
        Regime::DegenerateEqualRho => return Err(KacError::DegenerateEqualRho),
        Regime::RepulsionOnly => return Err(KacError::RepulsionOnly),
        r => return Err(KacError::UnsupportedRegime(r.tag().to_string())),
    };
    let l = f(q, &n)?;
    if !(l[0].is_finite() && l[1].is_finite()) {
        return Err(KacError::OutOfDomain(format!("non-finite closed form at x = {x}, y = {y}")));
    }
    Ok(n.unmap(l))
}

/// ℓᵢ(q, x, y) for the initial state of the query.
pub fn laplace_fpt(query: &FptQuery, model: &KacOuModel) -> Result<f64> {
    let l = laplace_fpt_pair(query.q, query.x, query.y, model)?;
    Ok(l[query.initial_state.index()])
}

/// P{T(x, y) < e_q | ε(0) = i} for an independent e_q ~ Exp(q): the CDF of
/// the running minimum at e_q when x > y, the tail of the running maximum
/// when x < y. Identical to [`laplace_fpt`].
pub fn running_extremum_prob(q: f64, x: f64, y: f64, initial_state: State, model: &KacOuModel) -> Result<f64> {
    if !(q > 0.0) {
        return Err(invalid("q", "running_extremum_prob needs q > 0"));
    }
    laplace_fpt(&FptQuery::new(q, x, y, initial_state)?, model)
}

/// Residuals of the backward equations
/// (x − ρᵢ)ℓᵢ' = −βᵢ(q)ℓᵢ + αᵢℓⱼ   (γᵢ ≠ 0),
/// aᵢℓᵢ' = (q + λᵢ)ℓᵢ − λᵢℓⱼ       (γᵢ = 0),
/// with ℓ' from a central difference of step h.
pub fn fpt_ode_residual(q: f64, x: f64, y: f64, model: &KacOuModel, h: f64) -> Result<[f64; 2]> {
    if !(h > 0.0) {
        return Err(invalid("h", "step must be positive"));
    }
    if (x - y).abs() <= 2.0 * h {
        return Err(KacError::DomainMargin(format!("|x - y| <= 2h at x = {x}")));
    }
    let margin =
        |d: f64| laplace_fpt_pair(q, x + d, y, model).map_err(|e| KacError::DomainMargin(format!("x{d:+e}: {e}")));
    margin(-2.0 * h)?;
    margin(2.0 * h)?;
    let lp = margin(h)?;
    let lm = margin(-h)?;
    let l = laplace_fpt_pair(q, x, y, model)?;
    let mut res = [0.0; 2];
    for s in State::BOTH {
        let (i, j) = (s.index(), s.other().index());
        let d = (lp[i] - lm[i]) / (2.0 * h);
        let c = model.coeff(s);
        let lam = model.lambda(s);
        res[i] = if c.gamma != 0.0 {
            let rho = c.a / c.gamma;
            (x - rho) * d + (q + lam) / c.gamma * l[i] - lam / c.gamma * l[j]
        } else {
            c.a * d - (q + lam) * l[i] + lam * l[j]
        };
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::hyp2f1;

    fn example() -> KacOuModel {
        KacOuModel::from_params(1., 1., 0., 1., 0., 0., 1., 1.).unwrap()
    }

    #[test]
    fn q_zero_is_one() {
        let m = KacOuModel::from_params(0.7, 1.3, 0.2, 2.0, 0., 0., 1.1, 0.8).unwrap();
        for (x, y) in [(0.0, 1.2), (1.0, 2.0), (2.4, 1.0), (0.5, 0.3)] {
            let l = laplace_fpt_pair(0.0, x, y, &m).unwrap();
            assert!((l[0] - 1.0).abs() < 1e-12 && (l[1] - 1.0).abs() < 1e-12, "{x} {y} {l:?}");
        }
    }

    #[test]
    fn worked_example_value() {
        let q = FptQuery::new(1.0, 0.25, 0.75, State::One).unwrap();
        let v = laplace_fpt(&q, &example()).unwrap();
        let expect = hyp2f1(3.0, 1.0, 2.0, 0.25).unwrap() / hyp2f1(3.0, 1.0, 2.0, 0.75).unwrap();
        assert!((v - expect).abs() < 1e-14);
        assert!((v - 0.155_555_555_555_555_6).abs() < 1e-12, "{v}");
    }

    #[test]
    fn boundary_attainment() {
        let m = example();
        let l = laplace_fpt_pair(1.0, 0.75 - 1e-8, 0.75, &m).unwrap();
        assert!((l[1] - 1.0).abs() < 1e-6);
        let l = laplace_fpt_pair(1.0, 0.25 + 1e-8, 0.25, &m).unwrap();
        assert!((l[0] - 1.0).abs() < 1e-6);
        let ar = KacOuModel::from_params(0.3, 1.0, 0., -1., 0., 0., 1., -1.).unwrap();
        let l = laplace_fpt_pair(1.0, -0.5 - 1e-8, -0.5, &ar).unwrap();
        assert!((l[0] - 1.0).abs() < 1e-6, "{l:?}");
        let l = laplace_fpt_pair(1.0, -0.5 + 1e-8, -0.5, &ar).unwrap();
        assert!((l[1] - 1.0).abs() < 1e-6, "{l:?}");
    }

    #[test]
    fn large_q_vanishes() {
        let v = running_extremum_prob(1e6, 0.25, 0.75, State::One, &example()).unwrap();
        assert!((0.0..1e-12).contains(&v));
    }

    #[test]
    fn domain_errors() {
        let m = example();
        assert!(matches!(laplace_fpt_pair(1.0, -1.5, 0.5, &m), Err(KacError::OutOfDomain(_))));
        assert!(matches!(laplace_fpt_pair(1.0, 0.5, 1.5, &m), Err(KacError::OutOfDomain(_))));
        let deg = KacOuModel::from_params(1., 1., 2., 4., 0., 0., 1., 2.).unwrap();
        assert_eq!(laplace_fpt_pair(1.0, 0.0, 1.0, &deg), Err(KacError::DegenerateEqualRho));
        let rep = KacOuModel::from_params(1., 1., 0., 1., 0., 0., -1., -1.).unwrap();
        assert_eq!(laplace_fpt_pair(1.0, 0.0, 0.5, &rep), Err(KacError::RepulsionOnly));
    }

    #[test]
    fn mirrored_models_agree() {
        // reflection: model with rho0 > rho1 equals the reflected query
        let m = KacOuModel::from_params(0.8, 1.4, 2.0, 0.5, 0., 0., 1.0, 2.0).unwrap();
        let a = laplace_fpt_pair(0.6, 0.4, 0.8, &m).unwrap();
        let b = laplace_fpt_pair(0.6, -0.4, -0.8, &m.reflected()).unwrap();
        assert_eq!(a, b);
        // relabelling: swapped model returns swapped pair
        let c = laplace_fpt_pair(0.6, 0.4, 0.8, &m.swapped()).unwrap();
        assert!((a[0] - c[1]).abs() < 1e-13 && (a[1] - c[0]).abs() < 1e-13);
    }

    #[test]
    fn ode_residuals_small() {
        let r = fpt_ode_residual(1.0, 0.5, 0.75, &example(), 1e-4).unwrap();
        assert!(r[0].abs() < 1e-6 && r[1].abs() < 1e-6, "{r:?}");
        let ns = KacOuModel::from_params(1., 1., 0., 1., 0., 0., 1., 0.).unwrap();
        let r = fpt_ode_residual(1.0, 0.5, 1.5, &ns, 1e-4).unwrap();
        assert!(r[0].abs() < 1e-6 && r[1].abs() < 1e-6, "{r:?}");
        let ar = KacOuModel::from_params(0.3, 1.0, 0., -1., 0., 0., 1., -1.).unwrap();
        for (x, y) in [(-0.8, -0.3), (0.5, -0.3)] {
            let r = fpt_ode_residual(1.0, x, y, &ar, 1e-4).unwrap();
            assert!(r[0].abs() < 1e-6 && r[1].abs() < 1e-6, "{r:?}");
        }
        assert!(matches!(fpt_ode_residual(1.0, 0.74995, 0.75, &example(), 1e-4), Err(KacError::DomainMargin(_))));
    }
}
