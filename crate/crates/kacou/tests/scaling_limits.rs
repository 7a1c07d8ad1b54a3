use kacou::scaling::{convergence_check, ScalingKind, ScalingSpec};
use kacou::StateCoeffs;

fn coeffs(a: [f64; 2], b: [f64; 2], g: [f64; 2]) -> [StateCoeffs; 2] {
    [StateCoeffs { a: a[0], b: b[0], gamma: g[0] }, StateCoeffs { a: a[1], b: b[1], gamma: g[1] }]
}

fn report(name: &str, rows: &[kacou::scaling::ConvergenceRow]) {
    for r in rows {
        println!(
            "{name} n={:>6}: mean {:.5} (limit {:.5}, gap {:.2e} ± {:.1e})  var {:.5} (limit {:.5}, gap {:.2e} ± {:.1e})  ks {:?}",
            r.n, r.mean, r.limit_mean, r.mean_gap, r.mean_stderr, r.var, r.limit_var, r.var_gap, r.var_stderr, r.cdf_dist
        );
    }
}

#[test]
fn telegraph_asymmetric_nu() {
    let spec = ScalingSpec::telegraph(2.5, 0.8, -0.4);
    let rows = convergence_check(&spec, 1.0, &[10.0, 1000.0], 50_000, 21).unwrap();
    report("telegraph ν=2.5", &rows);
    let last = rows.last().unwrap();
    assert!(last.mean_gap <= 3.0 * last.mean_stderr);
    assert!(last.var_gap <= 3.0 * last.var_stderr + 2.0 * last.limit_var / (3.5 * 1000.0));
}

#[test]
fn fast_switching_with_unequal_noise() {
    // b∞ is the root-mean-square amplitude √(π**·b²), here √2
    let spec = ScalingSpec::fast_switching(1.0, coeffs([0.0, 2.0], [0.0, 2.0], [1.0, 3.0]), 0.5);
    let rows = convergence_check(&spec, 1.0, &[1000.0], 50_000, 22).unwrap();
    report("fast b=(0,2)", &rows);
    let r = &rows[0];
    assert!(r.mean_gap <= 3.0 * r.mean_stderr && r.var_gap <= 3.0 * r.var_stderr);
}

#[test]
fn case_a_variance_law() {
    let spec = ScalingSpec {
        kind: ScalingKind::CaseA,
        sigma0: 0.8,
        delta: 0.5,
        ..ScalingSpec::fast_switching(1.0, coeffs([0.0, 0.0], [0.6, 0.6], [1.0, 1.0]), 0.0)
    };
    let rows = convergence_check(&spec, 1.0, &[1000.0], 50_000, 23).unwrap();
    report("case a", &rows);
    let r = &rows[0];
    assert!(r.mean_gap <= 3.0 * r.mean_stderr && r.var_gap <= 3.0 * r.var_stderr);
}

#[test]
fn multiplicative_cases_match_moment_odes() {
    let b = ScalingSpec {
        kind: ScalingKind::CaseB,
        sigma0_gamma: 1.0,
        delta_gamma: 1.0,
        ..ScalingSpec::fast_switching(1.0, coeffs([1.0, 1.0], [0.5, 0.5], [0.0, 0.0]), 0.0)
    };
    let c = ScalingSpec { kind: ScalingKind::CaseC, sigma0: 0.6, delta: 1.0, ..b };
    for (name, spec) in [("case b", b), ("case c", c)] {
        let rows = convergence_check(&spec, 1.0, &[1000.0], 50_000, 24).unwrap();
        report(name, &rows);
        let r = &rows[0];
        assert!(r.cdf_dist.is_none());
        assert!(r.mean_gap <= 3.0 * r.mean_stderr && r.var_gap <= 3.0 * r.var_stderr, "{name}");
    }
}
