//! Scaled parameter families and their diffusion limits.
//!
//! Every family uses λ₀ = νn, λ₁ = n and scales one pair of coefficients as
//! u₀ = s·σ₀√(νn) + δ, u₁ = −s·σ₁√n + δ with σ₁ = σ₀/√ν, so that
//! u₀/√λ₀ = sσ₀ and the stationary average of u equals δ at every n.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::model::{KacOuModel, StateCoeffs, SwitchRates};
use crate::par::par_map;
use crate::rng::rng_stream;
use crate::sim::{sample_terminal, stationary_state};
use crate::stats::Moments;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TelegraphParams {
    pub c0: f64,
    pub c1: f64,
    pub rates: SwitchRates,
}

impl TelegraphParams {
    /// 𝕋 as the γ ≡ 0 Kac–OU process with aᵢ = cᵢ and no noise.
    pub fn as_model(&self) -> KacOuModel {
        KacOuModel {
            rates: self.rates,
            coeffs: [StateCoeffs { a: self.c0, b: 0.0, gamma: 0.0 }, StateCoeffs { a: self.c1, b: 0.0, gamma: 0.0 }],
        }
    }

    /// Exact Var 𝕋(t) under a stationary initial state.
    pub fn variance(&self, t: f64) -> f64 {
        let lam = self.rates.total();
        let p0 = self.rates.lambda1 / lam;
        let dc = self.c0 - self.c1;
        2.0 * p0 * (1.0 - p0) * dc * dc * (t / lam + (-lam * t).exp_m1() / (lam * lam))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScalingKind {
    /// Rates scaled, coefficients fixed: M → OU(a∞, γ∞, b∞).
    FastSwitching,
    /// Symmetric telegraph, ν = 1 and δ = 0.
    KacClassic,
    /// Telegraph with general ν and δ.
    KacAsymmetric,
    /// a's scaled.
    CaseA,
    /// γ's scaled.
    CaseB,
    /// a's and γ's scaled.
    CaseC,
}

impl ScalingKind {
    pub fn is_telegraph(self) -> bool {
        matches!(self, ScalingKind::KacClassic | ScalingKind::KacAsymmetric)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingSpec {
    pub kind: ScalingKind,
    pub nu: f64,
    /// Amplitude and limit drift of the scaled velocities (telegraph) or a's.
    pub sigma0: f64,
    pub delta: f64,
    /// Amplitude and limit drift of the scaled γ's (cases b and c).
    pub sigma0_gamma: f64,
    pub delta_gamma: f64,
    /// Coefficients that are not scaled; ignored by the telegraph kinds.
    pub base: [StateCoeffs; 2],
    /// Initial position of M.
    pub x0: f64,
}

impl ScalingSpec {
    pub fn telegraph(nu: f64, sigma0: f64, delta: f64) -> Self {
        let zero = StateCoeffs { a: 0.0, b: 0.0, gamma: 0.0 };
        Self {
            kind: ScalingKind::KacAsymmetric,
            nu,
            sigma0,
            delta,
            sigma0_gamma: 0.0,
            delta_gamma: 0.0,
            base: [zero, zero],
            x0: 0.0,
        }
    }

    pub fn fast_switching(nu: f64, base: [StateCoeffs; 2], x0: f64) -> Self {
        Self { kind: ScalingKind::FastSwitching, base, x0, ..Self::telegraph(nu, 0.0, 0.0) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(invalid("nu", "must be finite and > 0"));
        }
        let k = self.kind;
        let scales_first = k.is_telegraph() || matches!(k, ScalingKind::CaseA | ScalingKind::CaseC);
        if scales_first && !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(invalid("sigma0", "must be finite and > 0"));
        }
        if matches!(k, ScalingKind::CaseB | ScalingKind::CaseC)
            && !(self.sigma0_gamma > 0.0 && self.sigma0_gamma.is_finite())
        {
            return Err(invalid("sigma0_gamma", "must be finite and > 0"));
        }
        if !self.delta.is_finite() || !self.delta_gamma.is_finite() || !self.x0.is_finite() {
            return Err(invalid("delta", "drifts and x0 must be finite"));
        }
        if k == ScalingKind::KacClassic && (self.nu != 1.0 || self.delta != 0.0) {
            return Err(invalid("kind", "KacClassic requires nu = 1 and delta = 0"));
        }
        if !k.is_telegraph() {
            for c in &self.base {
                StateCoeffs::new(c.a, c.b, c.gamma)?;
            }
        }
        Ok(())
    }

    fn pi_star(&self) -> [f64; 2] {
        [1.0 / (1.0 + self.nu), self.nu / (1.0 + self.nu)]
    }
}

/// σ₀σ₁/√((σ₀² + σ₁²)/2).
pub fn sigma_combine(sigma0: f64, sigma1: f64) -> Result<f64> {
    if !(sigma0 > 0.0) || !sigma0.is_finite() {
        return Err(invalid("sigma0", "must be finite and > 0"));
    }
    if !(sigma1 > 0.0) || !sigma1.is_finite() {
        return Err(invalid("sigma1", "must be finite and > 0"));
    }
    // scaled to avoid overflow of the squares
    let m = sigma0.max(sigma1);
    let (u, v) = (sigma0 / m, sigma1 / m);
    Ok(m * u * v / ((u * u + v * v) / 2.0).sqrt())
}

/// Limit dM = (drift_const − drift_lin·M)dt + (affine_offset − multiplicative_noise·M)∘dW̃
/// + additive_noise·dW, with W̃ ⊥ W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitSde {
    pub drift_const: f64,
    pub drift_lin: f64,
    pub additive_noise: f64,
    pub multiplicative_noise: f64,
    /// σ_a in the shared W̃ term of case (c); zero otherwise.
    pub affine_offset: f64,
    /// The W̃ term is a Stratonovich integral (it arises as a Wong–Zakai limit).
    pub stratonovich: bool,
}

impl LimitSde {
    /// Drift coefficients of the equivalent Itô equation.
    pub fn ito_drift(&self) -> (f64, f64) {
        if !self.stratonovich {
            return (self.drift_const, self.drift_lin);
        }
        let s = self.multiplicative_noise;
        (self.drift_const - 0.5 * self.affine_offset * s, self.drift_lin - 0.5 * s * s)
    }
}

pub fn limiting_sde(spec: &ScalingSpec) -> Result<LimitSde> {
    spec.validate()?;
    let p = spec.pi_star();
    let avg = |f: fn(&StateCoeffs) -> f64| p[0] * f(&spec.base[0]) + p[1] * f(&spec.base[1]);
    let a_inf = avg(|c| c.a);
    let g_inf = avg(|c| c.gamma);
    let b_inf = avg(|c| c.b * c.b).sqrt();
    let sigma = |s0: f64| sigma_combine(s0, s0 / spec.nu.sqrt());
    let plain = |c, l, add| LimitSde {
        drift_const: c,
        drift_lin: l,
        additive_noise: add,
        multiplicative_noise: 0.0,
        affine_offset: 0.0,
        stratonovich: false,
    };
    Ok(match spec.kind {
        ScalingKind::KacClassic | ScalingKind::KacAsymmetric => plain(spec.delta, 0.0, sigma(spec.sigma0)?),
        ScalingKind::FastSwitching => plain(a_inf, g_inf, b_inf),
        ScalingKind::CaseA => {
            let sa = sigma(spec.sigma0)?;
            plain(spec.delta, g_inf, (sa * sa + b_inf * b_inf).sqrt())
        }
        ScalingKind::CaseB => LimitSde {
            multiplicative_noise: sigma(spec.sigma0_gamma)?,
            stratonovich: true,
            ..plain(a_inf, spec.delta_gamma, b_inf)
        },
        ScalingKind::CaseC => LimitSde {
            multiplicative_noise: sigma(spec.sigma0_gamma)?,
            affine_offset: sigma(spec.sigma0)?,
            stratonovich: true,
            ..plain(spec.delta, spec.delta_gamma, b_inf)
        },
    })
}

/// The scaled process at scale index n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ScaledProcess {
    Telegraph(TelegraphParams),
    Model(KacOuModel),
}

impl ScaledProcess {
    pub fn model(&self) -> KacOuModel {
        match self {
            ScaledProcess::Telegraph(t) => t.as_model(),
            ScaledProcess::Model(m) => *m,
        }
    }
}

/// (u₀, u₁) = (s·σ₀√(νn) + δ, −s·σ₀√n/√ν + δ).
fn scaled_pair(nu: f64, sigma0: f64, delta: f64, n: f64, sign: f64) -> [f64; 2] {
    [sign * sigma0 * (nu * n).sqrt() + delta, -sign * sigma0 / nu.sqrt() * n.sqrt() + delta]
}

pub fn scaled_model(spec: &ScalingSpec, n: f64) -> Result<ScaledProcess> {
    spec.validate()?;
    if !(n >= 1.0 && n.is_finite()) {
        return Err(invalid("n", "scale index must be finite and ≥ 1"));
    }
    let rates = SwitchRates::new(spec.nu * n, n)?;
    if spec.kind.is_telegraph() {
        let [c0, c1] = scaled_pair(spec.nu, spec.sigma0, spec.delta, n, 1.0);
        return Ok(ScaledProcess::Telegraph(TelegraphParams { c0, c1, rates }));
    }
    let mut coeffs = spec.base;
    if matches!(spec.kind, ScalingKind::CaseA | ScalingKind::CaseC) {
        let a = scaled_pair(spec.nu, spec.sigma0, spec.delta, n, -1.0);
        coeffs[0].a = a[0];
        coeffs[1].a = a[1];
    }
    if matches!(spec.kind, ScalingKind::CaseB | ScalingKind::CaseC) {
        let g = scaled_pair(spec.nu, spec.sigma0_gamma, spec.delta_gamma, n, -1.0);
        coeffs[0].gamma = g[0];
        coeffs[1].gamma = g[1];
    }
    Ok(ScaledProcess::Model(KacOuModel::new(rates, coeffs)?))
}

/// Mean and variance of the OU process dM = (a − γM)dt + b dW at time t.
pub fn ou_moments(t: f64, x0: f64, a: f64, gamma: f64, b: f64) -> (f64, f64) {
    if gamma == 0.0 {
        return (x0 + a * t, b * b * t);
    }
    let em1 = (-gamma * t).exp_m1();
    let rho = a / gamma;
    let mean = x0 + (x0 - rho) * em1;
    let var = -b * b * em1 * (2.0 + em1) / (2.0 * gamma);
    (mean, var)
}

fn moment_rhs(c: f64, l: f64, lim: &LimitSde, y: [f64; 2]) -> [f64; 2] {
    let [m, s] = y;
    let sg = lim.multiplicative_noise;
    let sa = lim.affine_offset;
    let noise = sa * sa - 2.0 * sa * sg * m + sg * sg * s + lim.additive_noise * lim.additive_noise;
    [c - l * m, 2.0 * (c * m - l * s) + noise]
}

/// (E M(t), E M(t)²) with a fixed number of RK4 steps.
pub fn limit_moment_odes_with_steps(limit: &LimitSde, t: f64, x0: f64, steps: usize) -> (f64, f64) {
    let (c, l) = limit.ito_drift();
    let h = t / steps as f64;
    let mut y = [x0, x0 * x0];
    let f = |y: [f64; 2]| moment_rhs(c, l, limit, y);
    let axpy = |y: [f64; 2], k: [f64; 2], s: f64| [y[0] + s * k[0], y[1] + s * k[1]];
    for _ in 0..steps {
        let k1 = f(y);
        let k2 = f(axpy(y, k1, h / 2.0));
        let k3 = f(axpy(y, k2, h / 2.0));
        let k4 = f(axpy(y, k3, h));
        for i in 0..2 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    (y[0], y[1])
}

/// RK4 with the step chosen so that (L·h)⁵/120 < 1e-10 for the stiffest
/// rate L of the linear system.
pub fn limit_moment_odes(limit: &LimitSde, t: f64, x0: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (x0, x0 * x0);
    }
    let (_, l) = limit.ito_drift();
    let rate = l.abs().max((2.0 * l - limit.multiplicative_noise.powi(2)).abs()).max(1.0);
    let steps = ((t * rate / 0.02).ceil() as usize).max(1);
    limit_moment_odes_with_steps(limit, t, x0, steps)
}

/// Limit mean and variance at time t.
pub fn limit_moments(spec: &ScalingSpec, t: f64) -> Result<(f64, f64)> {
    let lim = limiting_sde(spec)?;
    if lim.multiplicative_noise == 0.0 {
        return Ok(ou_moments(t, spec.x0, lim.drift_const, lim.drift_lin, lim.additive_noise));
    }
    let (m, s) = limit_moment_odes(&lim, t, spec.x0);
    Ok((m, s - m * m))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: f64,
    pub mean: f64,
    pub var: f64,
    pub limit_mean: f64,
    pub limit_var: f64,
    pub mean_gap: f64,
    pub var_gap: f64,
    pub mean_stderr: f64,
    pub var_stderr: f64,
    /// Kolmogorov distance to the Gaussian limit law, when the limit is Gaussian.
    pub cdf_dist: Option<f64>,
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn ks_gaussian(samples: &mut [f64], mean: f64, var: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let sd = var.sqrt();
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf((x - mean) / sd);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Samples of the scaled process at time t (𝕋(t) for telegraph kinds, M(t)
/// otherwise), with ε(0) drawn from the stationary law of the scaled chain.
pub fn sample_scaled(spec: &ScalingSpec, n: f64, t: f64, n_paths: u64, seed: u64) -> Result<Vec<f64>> {
    let proc = scaled_model(spec, n)?;
    let model = proc.model();
    let x0 = if spec.kind.is_telegraph() { 0.0 } else { spec.x0 };
    let purpose = format!("scaling/{n}");
    Ok(par_map(n_paths, |i| {
        let mut rng = rng_stream(seed, &purpose, i);
        let s0 = stationary_state(&model.rates, &mut rng);
        sample_terminal(&model, x0, s0, t, &mut rng).2
    }))
}

pub fn convergence_check(
    spec: &ScalingSpec,
    t: f64,
    n_list: &[f64],
    n_paths: u64,
    seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    if n_list.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("n_list", "must be strictly increasing"));
    }
    if n_paths < 2 {
        return Err(invalid("n_paths", "must be ≥ 2"));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("t", "must be finite and > 0"));
    }
    let (lm, lv) = limit_moments(spec, t)?;
    let gaussian = limiting_sde(spec)?.multiplicative_noise == 0.0;
    n_list
        .iter()
        .map(|&n| {
            let mut xs = sample_scaled(spec, n, t, n_paths, seed)?;
            let mo = Moments::from_samples(&xs);
            let cdf_dist = (gaussian && lv > 0.0).then(|| ks_gaussian(&mut xs, lm, lv));
            Ok(ConvergenceRow {
                n,
                mean: mo.mean,
                var: mo.var,
                limit_mean: lm,
                limit_var: lv,
                mean_gap: (mo.mean - lm).abs(),
                var_gap: (mo.var - lv).abs(),
                mean_stderr: mo.mean_stderr,
                var_stderr: mo.var_stderr,
                cdf_dist,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coeffs(a: [f64; 2], b: [f64; 2], g: [f64; 2]) -> [StateCoeffs; 2] {
        [StateCoeffs { a: a[0], b: b[0], gamma: g[0] }, StateCoeffs { a: a[1], b: b[1], gamma: g[1] }]
    }

    #[test]
    fn sigma_combine_values() {
        assert_eq!(sigma_combine(2.5, 2.5).unwrap(), 2.5);
        assert!((sigma_combine(3.0, 4.0).unwrap() - 12.0 / 12.5f64.sqrt()).abs() < 1e-15);
        assert!((sigma_combine(3.0, 4.0).unwrap() - 3.394112).abs() < 1e-6);
        assert!(sigma_combine(0.0, 1.0).is_err());
        assert!(sigma_combine(1.0, -1.0).is_err());
        assert!(sigma_combine(1e200, 1e200).unwrap().is_finite());
    }

    #[test]
    fn fast_switching_coefficients() {
        let spec = ScalingSpec::fast_switching(1.0, coeffs([0.0, 2.0], [1.0, 1.0], [1.0, 3.0]), 0.0);
        let l = limiting_sde(&spec).unwrap();
        assert_eq!((l.drift_const, l.drift_lin, l.additive_noise), (1.0, 2.0, 1.0));
        let spec = ScalingSpec { nu: 1e6, ..spec };
        let l = limiting_sde(&spec).unwrap();
        assert!((l.drift_const - 2.0).abs() < 1e-5);
    }

    #[test]
    fn case_a_noise_in_quadrature() {
        let spec = ScalingSpec {
            kind: ScalingKind::CaseA,
            sigma0: 0.8,
            ..ScalingSpec::fast_switching(1.0, coeffs([0.0, 0.0], [0.6, 0.6], [1.0, 1.0]), 0.0)
        };
        let l = limiting_sde(&spec).unwrap();
        assert!((l.additive_noise - (0.64f64 + 0.36).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn constructor_identities() {
        let spec = ScalingSpec::telegraph(1.0, 1.0, 0.0);
        match scaled_model(&spec, 1.0).unwrap() {
            ScaledProcess::Telegraph(t) => {
                assert_eq!((t.c0, t.c1), (1.0, -1.0));
                assert_eq!((t.rates.lambda0, t.rates.lambda1), (1.0, 1.0));
            }
            _ => panic!(),
        }
        for &(nu, s0, d) in &[(1.0, 1.0, 0.0), (2.5, 0.7, 0.3), (0.3, 2.0, -1.1)] {
            let spec = ScalingSpec::telegraph(nu, s0, d);
            for &n in &[1.0, 7.0, 1e3, 1e6] {
                let ScaledProcess::Telegraph(t) = scaled_model(&spec, n).unwrap() else { panic!() };
                let (l0, l1) = (t.rates.lambda0, t.rates.lambda1);
                assert!((l0 / l1 - nu).abs() <= 1e-15 * nu);
                if d == 0.0 {
                    assert!((t.c0 / l0.sqrt() - s0).abs() <= 1e-14 * s0);
                }
                let drift = (l1 * t.c0 + l0 * t.c1) / (l0 + l1);
                assert!((drift - d).abs() <= 1e-12 * (1.0 + t.c0.abs()), "{drift} vs {d}");
            }
        }
        let bad = ScalingSpec { kind: ScalingKind::KacClassic, ..ScalingSpec::telegraph(2.0, 1.0, 0.0) };
        assert!(scaled_model(&bad, 1.0).is_err());
        assert!(scaled_model(&ScalingSpec::telegraph(1.0, 1.0, 0.0), 0.5).is_err());
    }

    #[test]
    fn ou_moment_limits() {
        assert_eq!(ou_moments(0.0, 0.3, 1.0, 2.0, 1.0), (0.3, 0.0));
        let (m, v) = ou_moments(50.0 / 0.7, 3.0, 1.4, 0.7, 0.5);
        assert!((m - 2.0).abs() < 1e-10 && (v - 0.25 / 1.4).abs() < 1e-10);
        assert_eq!(ou_moments(2.0, 1.0, 0.5, 0.0, 2.0), (2.0, 8.0));
    }

    #[test]
    fn moment_odes_degenerate_cases() {
        let lim = LimitSde {
            drift_const: 0.7,
            drift_lin: 1.3,
            additive_noise: 0.9,
            multiplicative_noise: 0.0,
            affine_offset: 0.0,
            stratonovich: false,
        };
        let (m, s) = limit_moment_odes(&lim, 1.5, 0.4);
        let (om, ov) = ou_moments(1.5, 0.4, 0.7, 1.3, 0.9);
        assert!((m - om).abs() < 1e-10 && (s - m * m - ov).abs() < 1e-10);
        let pure = LimitSde { drift_const: 0.0, drift_lin: 0.0, affine_offset: 0.5, ..lim };
        let (_, s) = limit_moment_odes(&pure, 2.0, 1.0);
        assert!((s - (1.0 + (0.25 + 0.81) * 2.0)).abs() < 1e-12);
        let mult = LimitSde { multiplicative_noise: 0.8, affine_offset: 0.3, stratonovich: true, ..lim };
        let coarse = limit_moment_odes(&mult, 1.0, 0.5);
        let steps = ((1.0f64 * 1.3f64.max((2.6f64 - 0.64).abs()).max(1.0) / 0.02).ceil()) as usize;
        let fine = limit_moment_odes_with_steps(&mult, 1.0, 0.5, 2 * steps);
        assert!((coarse.0 - fine.0).abs() < 1e-9 && (coarse.1 - fine.1).abs() < 1e-9);
    }

    #[test]
    fn telegraph_exact_variance_approaches_limit() {
        let spec = ScalingSpec::telegraph(1.0, 1.0, 0.3);
        let ScaledProcess::Telegraph(t) = scaled_model(&spec, 1e6).unwrap() else { panic!() };
        assert!((t.variance(1.0) - 1.0).abs() < 1e-5);
    }
}
