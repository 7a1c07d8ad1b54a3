//! Cross-check suite: closed forms against the integral-equation oracle,
//! Monte Carlo, ODE and stationarity residuals, scaling limits and special
//! function identities. Each check reports its measured worst case, the
//! tolerance it is held to and its runtime budget.

use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::fpt::{fpt_integral_oracle, fpt_ode_residual, laplace_fpt, laplace_fpt_pair, FptQuery};
use crate::invariant::{
    empirical_invariant_distance, invariant_density, invariant_exists, stationarity_residual, InvariantDensity, Support,
};
use crate::model::{transition_matrix, KacOuModel, State, StateCoeffs, SwitchRates};
use crate::rng::rng_stream;
use crate::scaling::{convergence_check, limiting_sde, ou_moments, sigma_combine, ScalingSpec};
use crate::sim::mc_laplace_fpt;
use crate::special::{gauss_2f1, gauss_2f1_series, kummer_1f1, UpperParams};

pub const SUITE_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Level {
    /// The ten acceptance checks at their stated sizes.
    Quick,
    /// Quick plus extra regimes and orientations.
    Full,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: String,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>3} {} — {} ({:.2}s / {:.0}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds,
            self.budget_seconds
        )
    }
}

fn timed(id: &str, name: &'static str, budget_seconds: f64, f: impl FnOnce() -> (bool, String)) -> CheckResult {
    let t0 = Instant::now();
    let (ok, detail) = f();
    let seconds = t0.elapsed().as_secs_f64();
    CheckResult { id: id.to_string(), name, passed: ok && seconds <= budget_seconds, detail, seconds, budget_seconds }
}

pub fn worked_example() -> KacOuModel {
    KacOuModel::from_params(1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0).expect("valid")
}

pub fn attracting_model() -> KacOuModel {
    KacOuModel::from_params(0.8, 1.3, 0.0, 2.0, 0.0, 0.0, 1.0, 2.0).expect("valid")
}

/// γ = (1, −1), λ = (0.3, 1): α₀ + α₁ = −0.7.
pub fn attraction_repulsion_model() -> KacOuModel {
    KacOuModel::from_params(0.3, 1.0, 0.0, -1.0, 0.0, 0.0, 1.0, -1.0).expect("valid")
}

pub fn non_strict_model() -> KacOuModel {
    KacOuModel::from_params(1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0).expect("valid")
}

fn fmt_err<E: std::fmt::Display>(e: E) -> (bool, String) {
    (false, format!("error: {e}"))
}

/// laplace_fpt(0, ·) = 1 on random attracting models.
pub fn q_zero_degeneracy() -> CheckResult {
    timed("1", "q=0 degeneracy", 5.0, || {
        let mut worst = 0.0f64;
        for i in 0..20 {
            let mut rng = rng_stream(SUITE_SEED, "validate/q0", i);
            let g0 = rng.random_range(0.2..3.0);
            let g1 = rng.random_range(0.2..3.0);
            let r0 = rng.random_range(-2.0..2.0);
            let r1 = r0 + rng.random_range(0.2..3.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
            let m = match KacOuModel::from_params(
                rng.random_range(0.2..5.0),
                rng.random_range(0.2..5.0),
                r0 * g0,
                r1 * g1,
                0.0,
                0.0,
                g0,
                g1,
            ) {
                Ok(m) => m,
                Err(e) => return fmt_err(e),
            };
            let (lo, hi) = (r0.min(r1), r0.max(r1));
            for _ in 0..5 {
                let y = lo + (hi - lo) * rng.random_range(0.05..0.95);
                // validity band of the closed forms: 2lo − hi < x < 2hi − lo
                let d = hi - lo;
                let mut x = lo - 0.99 * d + 2.98 * d * rng.random::<f64>();
                if (x - y).abs() < 1e-3 * d {
                    x = y + 0.01 * d;
                }
                let s = if rng.random::<bool>() { State::One } else { State::Zero };
                let q = FptQuery::new(0.0, x, y, s).expect("valid query");
                match laplace_fpt(&q, &m) {
                    Ok(v) => worst = worst.max((v - 1.0).abs()),
                    Err(e) => return fmt_err(format!("model {i}, x={x}, y={y}: {e}")),
                }
            }
        }
        (worst <= 1e-10, format!("max |ℓ(0)−1| = {worst:.2e} over 100 triples (tol 1e-10)"))
    })
}

pub struct OracleGrid {
    pub label: &'static str,
    pub model: KacOuModel,
    pub xs: [f64; 5],
    pub ys: [f64; 5],
}

pub fn oracle_grids() -> Vec<OracleGrid> {
    vec![
        OracleGrid {
            label: "attracting",
            model: attracting_model(),
            xs: [-0.5, 0.05, 0.45, 0.9, 1.6],
            ys: [0.2, 0.35, 0.5, 0.65, 0.8],
        },
        OracleGrid {
            label: "attraction-repulsion",
            model: attraction_repulsion_model(),
            xs: [-0.9, -0.7, -0.35, 0.2, 0.7],
            ys: [-0.8, -0.6, -0.45, -0.3, -0.15],
        },
        OracleGrid {
            label: "non-strict",
            model: non_strict_model(),
            xs: [-1.5, -1.0, -0.6, -0.3, 0.0],
            ys: [0.2, 0.5, 0.9, 1.4, 2.0],
        },
    ]
}

fn oracle_gap(g: &OracleGrid) -> crate::Result<f64> {
    let mut worst = 0.0f64;
    for &q in &[0.5, 1.0, 2.0] {
        for &x in &g.xs {
            for &y in &g.ys {
                let closed = laplace_fpt_pair(q, x, y, &g.model)?;
                for s in State::BOTH {
                    let o = fpt_integral_oracle(&FptQuery::new(q, x, y, s)?, &g.model, 1e-12)?;
                    worst = worst.max((o - closed[s.index()]).abs());
                }
            }
        }
    }
    Ok(worst)
}

fn check_oracle(id: &str, grids: Vec<OracleGrid>) -> CheckResult {
    timed(id, "oracle equivalence", 120.0, || {
        let mut ok = true;
        let mut parts = Vec::new();
        for g in &grids {
            match oracle_gap(g) {
                Ok(gap) => {
                    ok &= gap <= 1e-4;
                    parts.push(format!("{} {gap:.1e}", g.label));
                }
                Err(e) => return fmt_err(format!("{}: {e}", g.label)),
            }
        }
        (ok, format!("max |closed − oracle| on 5×5×3 grids: {} (tol 1e-4)", parts.join(", ")))
    })
}

pub fn oracle_equivalence() -> CheckResult {
    check_oracle("2", oracle_grids())
}

pub fn mc_points() -> Vec<(KacOuModel, f64, f64, f64, State)> {
    vec![
        (worked_example(), 1.0, 0.25, 0.75, State::One),
        (attracting_model(), 0.5, 0.9, 0.35, State::Zero),
        (attraction_repulsion_model(), 1.0, -0.8, -0.3, State::Zero),
        (attraction_repulsion_model(), 0.5, 0.5, -0.3, State::One),
        (non_strict_model(), 1.0, -0.5, 0.9, State::One),
        (non_strict_model(), 0.5, 0.2, 1.4, State::Zero),
    ]
}

pub fn monte_carlo_consistency() -> CheckResult {
    timed("3", "Monte Carlo consistency", 60.0, || {
        let mut ok = true;
        let mut worst_z = 0.0f64;
        for (k, (m, q, x, y, s)) in mc_points().into_iter().enumerate() {
            let query = FptQuery::new(q, x, y, s).expect("valid query");
            let closed = match laplace_fpt(&query, &m) {
                Ok(v) => v,
                Err(e) => return fmt_err(e),
            };
            let mc = match mc_laplace_fpt(&query, &m, 200_000, SUITE_SEED + k as u64) {
                Ok(v) => v,
                Err(e) => return fmt_err(e),
            };
            let gap = (closed - mc.mean).abs();
            ok &= gap <= (3.0 * mc.stderr).max(1e-3);
            worst_z = worst_z.max(gap / mc.stderr);
        }
        (ok, format!("6 points, n=2e5: worst |gap|/stderr = {worst_z:.2} (tol max(3σ, 1e-3))"))
    })
}

fn ode_points() -> Vec<(&'static str, KacOuModel, f64, Vec<f64>)> {
    let lin = |lo: f64, hi: f64| (0..10).map(|k| lo + (hi - lo) * k as f64 / 9.0).collect::<Vec<_>>();
    let ar10 = attraction_repulsion_model().swapped();
    vec![
        ("attracting", attracting_model(), 0.5, lin(0.05, 0.9)),
        ("attraction-repulsion 01", attraction_repulsion_model(), -0.3, lin(-0.95, -0.35)),
        ("attraction-repulsion 10", ar10, -0.3, lin(-0.95, -0.35)),
        ("non-strict", non_strict_model(), 0.9, lin(-1.5, 0.8)),
    ]
}

pub fn ode_residuals() -> CheckResult {
    timed("4", "ODE residual", 10.0, || {
        let (mut worst, mut rmin, mut rmax) = (0.0f64, f64::INFINITY, 0.0f64);
        for (label, m, y, xs) in ode_points() {
            for x in xs {
                let (r1, r2) = match (fpt_ode_residual(1.0, x, y, &m, 1e-4), fpt_ode_residual(1.0, x, y, &m, 5e-5)) {
                    (Ok(a), Ok(b)) => (a, b),
                    (Err(e), _) | (_, Err(e)) => return fmt_err(format!("{label} x={x}: {e}")),
                };
                for i in 0..2 {
                    worst = worst.max(r1[i].abs());
                    let ratio = r1[i].abs() / r2[i].abs();
                    rmin = rmin.min(ratio);
                    rmax = rmax.max(ratio);
                }
            }
        }
        let ok = worst < 1e-6 && rmin >= 3.5 && rmax <= 4.5;
        (
            ok,
            format!(
                "max |r| at h=1e-4: {worst:.1e} (tol 1e-6); halving ratio ∈ [{rmin:.2}, {rmax:.2}] (req [3.5, 4.5])"
            ),
        )
    })
}

fn invariant_models() -> Vec<(&'static str, KacOuModel)> {
    vec![
        ("attracting", attracting_model()),
        ("attraction-repulsion 01", attraction_repulsion_model()),
        ("attraction-repulsion 10", KacOuModel::from_params(2.0, 0.5, 1.0, 0.0, 0.0, 0.0, -0.5, 2.0).expect("valid")),
        ("non-strict", non_strict_model()),
    ]
}

fn interior_points(sup: Support, n: usize) -> Vec<f64> {
    (1..=n)
        .map(|k| {
            let u = 10f64.powf(-3.0 + 6.0 * k as f64 / n as f64);
            match sup {
                Support::Bounded { lo, hi } => lo + (hi - lo) * k as f64 / (n + 1) as f64,
                Support::Below(e) => e - u,
                Support::Above(s) => s + u,
                Support::Empty => f64::NAN,
            }
        })
        .collect()
}

fn check_invariant(id: &str, models: Vec<(&'static str, KacOuModel)>) -> CheckResult {
    timed(id, "invariant stationarity", 10.0, || {
        let (mut worst_r, mut worst_m) = (0.0f64, 0.0f64);
        for (label, m) in &models {
            let d = match InvariantDensity::new(m) {
                Ok(d) => d,
                Err(e) => return fmt_err(format!("{label}: {e}")),
            };
            worst_m = worst_m.max((d.total_mass() - 1.0).abs());
            for x in interior_points(d.support, 100) {
                match stationarity_residual(x, m) {
                    Ok(r) => worst_r = worst_r.max(r[0].abs()).max(r[1].abs()),
                    Err(e) => return fmt_err(format!("{label}: {e}")),
                }
            }
        }
        (
            worst_r < 1e-10 && worst_m <= 1e-8,
            format!(
                "{} regimes: max residual {worst_r:.1e} (tol 1e-10), max |mass−1| {worst_m:.1e} (tol 1e-8)",
                models.len()
            ),
        )
    })
}

pub fn invariant_stationarity() -> CheckResult {
    check_invariant("5", invariant_models())
}

pub fn worked_example_reproduction() -> CheckResult {
    timed("6", "worked example", 60.0, || {
        let m = worked_example();
        let mut worst = 0.0f64;
        for k in 1..1000 {
            let x = k as f64 / 1000.0;
            let p0 = invariant_density(x, State::Zero, &m).unwrap_or(f64::NAN);
            let p1 = invariant_density(x, State::One, &m).unwrap_or(f64::NAN);
            worst = worst.max((p0 - (1.0 - x)).abs()).max((p1 - x).abs());
        }
        let q = FptQuery::new(1.0, 0.25, 0.75, State::One).expect("valid query");
        let l = laplace_fpt(&q, &m).unwrap_or(f64::NAN);
        let lgap = (l - 0.155_555_555_555_555_6).abs();
        let h = match empirical_invariant_distance(&m, 100_000, 20.0, 50, SUITE_SEED) {
            Ok(h) => h,
            Err(e) => return fmt_err(e),
        };
        (
            worst <= 1e-12 && lgap <= 1e-12 && h.l1 < 0.02,
            format!(
                "max |π−linear| {worst:.1e} (tol 1e-12); ℓ₁ gap {lgap:.1e} (tol 1e-12); histogram L1 {:.4} (tol 0.02)",
                h.l1
            ),
        )
    })
}

pub fn existence_boundary() -> CheckResult {
    timed("7", "existence boundary", 1.0, || {
        let mut ok = true;
        for k in 0..11 {
            // α₀ + α₁ = λ₀/γ₀ − λ₁/|γ₁| crosses zero at the middle point
            let l0 = 0.5 + 0.1 * k as f64;
            let m = KacOuModel::from_params(l0, 1.0, 0.0, -1.0, 0.0, 0.0, 1.0, -1.0).expect("valid");
            let sum = l0 - 1.0;
            let exists = invariant_exists(&m).0;
            // the middle point sits on the boundary itself, where no probability measure exists
            ok &= exists == (sum < -1e-12);
        }
        (ok, "11-point sweep of α₀+α₁ through 0: exists ⇔ α₀+α₁ < 0".to_string())
    })
}

/// Gap sequences must not increase by more than 2σ of the difference.
fn non_increasing_within(gaps: &[(f64, f64)]) -> bool {
    gaps.windows(2).all(|w| w[1].0 <= w[0].0 + 2.0 * (w[0].1.powi(2) + w[1].1.powi(2)).sqrt())
}

pub fn telegraph_kac_limit() -> CheckResult {
    timed("8", "telegraph Kac limit", 120.0, || {
        let spec = ScalingSpec::telegraph(1.0, 1.0, 0.3);
        let rows = match convergence_check(&spec, 1.0, &[10.0, 100.0, 1000.0], 100_000, SUITE_SEED) {
            Ok(r) => r,
            Err(e) => return fmt_err(e),
        };
        let sigma2 = sigma_combine(1.0, 1.0).map(|s| s * s).unwrap_or(f64::NAN);
        let last = &rows[2];
        let mean_ok = (last.mean - 0.3).abs() <= 3.0 * last.mean_stderr;
        let var_ok = (last.var - sigma2).abs() <= 0.05;
        let mg: Vec<_> = rows.iter().map(|r| (r.mean_gap, r.mean_stderr)).collect();
        let vg: Vec<_> = rows.iter().map(|r| (r.var_gap, r.var_stderr)).collect();
        let trend = non_increasing_within(&mg) && non_increasing_within(&vg);
        (
            mean_ok && var_ok && trend,
            format!(
                "n=1e3: |mean−δ| {:.1e} (3σ {:.1e}), |var−σ²| {:.1e} (tol 0.05); var gaps {:.1e}, {:.1e}, {:.1e} trend {}",
                (last.mean - 0.3).abs(),
                3.0 * last.mean_stderr,
                (last.var - sigma2).abs(),
                rows[0].var_gap,
                rows[1].var_gap,
                rows[2].var_gap,
                if trend { "ok" } else { "violated" }
            ),
        )
    })
}

pub fn fast_switching_limit() -> CheckResult {
    timed("9", "fast-switching OU limit", 120.0, || {
        let base = [StateCoeffs { a: 0.0, b: 1.0, gamma: 1.0 }, StateCoeffs { a: 2.0, b: 1.0, gamma: 3.0 }];
        let spec = ScalingSpec::fast_switching(1.0, base, 0.0);
        let lim = match limiting_sde(&spec) {
            Ok(l) => l,
            Err(e) => return fmt_err(e),
        };
        let (m, v) = ou_moments(1.0, 0.0, lim.drift_const, lim.drift_lin, lim.additive_noise);
        let rows = match convergence_check(&spec, 1.0, &[1000.0], 100_000, SUITE_SEED) {
            Ok(r) => r,
            Err(e) => return fmt_err(e),
        };
        let r = &rows[0];
        let zm = (r.mean - m).abs() / r.mean_stderr;
        let zv = (r.var - v).abs() / r.var_stderr;
        (
            zm <= 3.0 && zv <= 3.0,
            format!(
                "(a∞,γ∞,b∞)=({},{},{}); M(1) mean gap {zm:.2}σ, variance gap {zv:.2}σ (tol 3σ)",
                lim.drift_const, lim.drift_lin, lim.additive_noise
            ),
        )
    })
}

pub fn special_functions() -> CheckResult {
    timed("10", "special functions", 5.0, || {
        let mut log_gap = 0.0f64;
        for k in -9..=9 {
            let z = k as f64 / 10.0;
            let f = gauss_2f1(UpperParams::Real(1.0, 1.0), 2.0, z).map(|r| r.value).unwrap_or(f64::NAN);
            let expect = if z == 0.0 { 1.0 } else { -(-z).ln_1p() / z };
            log_gap = log_gap.max((f - expect).abs());
        }
        let mut exp_gap = 0.0f64;
        for &a in &[-2.5, -1.0, 0.5, 1.0, 3.0, 10.0] {
            for k in -10..=10 {
                let z = k as f64 / 2.0;
                let f = kummer_1f1(a, a, z).map(|r| r.value).unwrap_or(f64::NAN);
                exp_gap = exp_gap.max((f - z.exp()).abs() / z.exp().max(1.0));
            }
        }
        let mut pfaff_gap = 0.0f64;
        for &(a, b, c) in &[(0.5, 1.5, 2.5), (1.2, -0.7, 3.1), (2.0, 3.0, 4.5), (-1.5, 0.3, 0.8)] {
            for k in 1..20 {
                let z = -(k as f64) / 20.0;
                let t = gauss_2f1(UpperParams::Real(a, b), c, z).map(|r| r.value);
                let d = gauss_2f1_series(UpperParams::Real(a, b), c, z).map(|r| r.value);
                match (t, d) {
                    (Ok(t), Ok(d)) => pfaff_gap = pfaff_gap.max((t - d).abs() / d.abs().max(1.0)),
                    _ => pfaff_gap = f64::NAN,
                }
            }
        }
        let mut ck_gap = 0.0f64;
        for &(l0, l1) in &[(1.0, 1.0), (0.3, 2.7), (5.0, 0.01)] {
            let rates = SwitchRates { lambda0: l0, lambda1: l1 };
            for &(s, t) in &[(0.1, 0.2), (1.0, 3.0), (0.0, 2.0), (7.5, 0.25)] {
                let lhs = transition_matrix(s + t, &rates);
                let rhs = transition_matrix(s, &rates).mul(&transition_matrix(t, &rates));
                for i in 0..2 {
                    for j in 0..2 {
                        ck_gap = ck_gap.max((lhs.p[i][j] - rhs.p[i][j]).abs());
                    }
                }
            }
        }
        let ok = log_gap <= 1e-12 && exp_gap <= 1e-12 && pfaff_gap <= 1e-11 && ck_gap <= 1e-12;
        (
            ok,
            format!(
                "F(1,1;2;z) {log_gap:.1e}, Φ(a;a;z) {exp_gap:.1e} (tol 1e-12); Pfaff {pfaff_gap:.1e} (tol 1e-11); Chapman–Kolmogorov {ck_gap:.1e} (tol 1e-12)"
            ),
        )
    })
}

fn extra_checks() -> Vec<CheckResult> {
    let mirrored = |m: KacOuModel| m.reflected();
    let grids = vec![
        OracleGrid {
            label: "attracting reflected",
            model: mirrored(attracting_model()),
            xs: [0.5, -0.05, -0.45, -0.9, -1.6],
            ys: [-0.2, -0.35, -0.5, -0.65, -0.8],
        },
        OracleGrid {
            label: "attraction-repulsion 10",
            model: attraction_repulsion_model().swapped(),
            xs: [-0.9, -0.7, -0.35, 0.2, 0.7],
            ys: [-0.8, -0.6, -0.45, -0.3, -0.15],
        },
    ];
    let inv = vec![
        (
            "attracting, singular endpoints",
            KacOuModel::from_params(0.3, 0.4, 1.0, -2.0, 0.0, 0.0, 2.0, 1.0).expect("valid"),
        ),
        (
            "non-strict, negative drift",
            KacOuModel::from_params(0.7, 1.6, -1.5, 1.0, 0.0, 0.0, 0.0, 2.0).expect("valid"),
        ),
    ];
    let hist = timed("x3", "histograms in every regime", 120.0, || {
        let mut worst = 0.0f64;
        for (label, m) in invariant_models() {
            match empirical_invariant_distance(&m, 50_000, 30.0, 25, SUITE_SEED) {
                Ok(h) => worst = worst.max(h.l1),
                Err(e) => return fmt_err(format!("{label}: {e}")),
            }
        }
        (worst < 0.04, format!("max pooled L1 over 4 regimes {worst:.4} (tol 0.04 at 25 bins, 5e4 paths)"))
    });
    vec![check_oracle("x1", grids), check_invariant("x2", inv), hist]
}

pub fn run_suite(level: Level) -> Vec<CheckResult> {
    let mut out = vec![
        q_zero_degeneracy(),
        oracle_equivalence(),
        monte_carlo_consistency(),
        ode_residuals(),
        invariant_stationarity(),
        worked_example_reproduction(),
        existence_boundary(),
        telegraph_kac_limit(),
        fast_switching_limit(),
        special_functions(),
    ];
    if level == Level::Full {
        out.extend(extra_checks());
    }
    out
}
