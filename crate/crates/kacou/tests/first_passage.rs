use kacou::fpt::{fpt_integral_oracle, laplace_fpt, laplace_fpt_pair, FptQuery};
use kacou::{KacOuModel, State};

fn attracting() -> KacOuModel {
    KacOuModel::from_params(0.8, 1.3, 0.0, 2.0, 0.0, 0.0, 1.0, 2.0).unwrap()
}

fn attraction_repulsion() -> KacOuModel {
    KacOuModel::from_params(0.3, 1.0, 0.0, -1.0, 0.0, 0.0, 1.0, -1.0).unwrap()
}

fn non_strict() -> KacOuModel {
    KacOuModel::from_params(1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0).unwrap()
}

fn max_oracle_gap(model: &KacOuModel, xs: &[f64], ys: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for &q in &[0.5, 1.0, 2.0] {
        for &x in xs {
            for &y in ys {
                let closed = laplace_fpt_pair(q, x, y, model).unwrap();
                for s in State::BOTH {
                    let o = fpt_integral_oracle(&FptQuery::new(q, x, y, s).unwrap(), model, 1e-12).unwrap();
                    worst = worst.max((o - closed[s.index()]).abs());
                }
            }
        }
    }
    worst
}

#[test]
fn oracle_matches_closed_forms() {
    let a = max_oracle_gap(&attracting(), &[-0.5, 0.05, 0.45, 0.9, 1.6], &[0.2, 0.35, 0.5, 0.65, 0.8]);
    let b = max_oracle_gap(&attraction_repulsion(), &[-0.9, -0.7, -0.35, 0.2, 0.7], &[-0.8, -0.6, -0.45, -0.3, -0.15]);
    let c = max_oracle_gap(&non_strict(), &[-1.5, -1.0, -0.6, -0.3, 0.0], &[0.2, 0.5, 0.9, 1.4, 2.0]);
    println!("gaps {a:e} {b:e} {c:e}");
    assert!(a < 1e-4 && b < 1e-4 && c < 1e-4);
}

#[test]
fn monte_carlo_matches_closed_forms() {
    let example = KacOuModel::from_params(1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0).unwrap();
    let points = [
        (example, 1.0, 0.25, 0.75, State::One),
        (attracting(), 0.5, 0.9, 0.35, State::Zero),
        (attraction_repulsion(), 1.0, -0.8, -0.3, State::Zero),
        (attraction_repulsion(), 0.5, 0.5, -0.3, State::One),
        (non_strict(), 1.0, -0.5, 0.9, State::One),
        (non_strict(), 0.5, 0.2, 1.4, State::Zero),
    ];
    for (k, (m, q, x, y, s)) in points.into_iter().enumerate() {
        let query = FptQuery::new(q, x, y, s).unwrap();
        let closed = laplace_fpt(&query, &m).unwrap();
        let mc = kacou::sim::mc_laplace_fpt(&query, &m, 200_000, 1000 + k as u64).unwrap();
        println!("{k}: closed {closed:.6} mc {:.6} ± {:.6}", mc.mean, mc.stderr);
        assert!((closed - mc.mean).abs() <= (3.0 * mc.stderr).max(1e-3));
    }
}
