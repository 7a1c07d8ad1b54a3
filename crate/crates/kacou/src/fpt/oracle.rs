//! Independent evaluation of ℓᵢ(q, x, y) from the coupled integral equations
//!
//!   ℓᵢ(x) = e^{−(q+λᵢ)tᵢ(x,y)} + ∫₀^{tᵢ(x,y)} λᵢ e^{−(q+λᵢ)τ} ℓⱼ(φᵢ(τ, x)) dτ,
//!
//! discretized on a grid of the region the process can visit before T(x, y).
//! ℓ is taken piecewise linear between nodes; each cell integral is then
//! exact along the flow, and the resulting system is solved by Gauss–Seidel
//! sweeps that follow the flow direction.

use crate::error::{invalid, KacError, Result};
use crate::model::{hitting_time_coeffs, HittingTime, KacOuModel, State, StateCoeffs};

use super::FptQuery;

const BOUNDED_NODES: usize = 2001;
const TAIL_GROWTH: f64 = 1.02;
const MAX_SWEEPS: usize = 10_000;
/// Travel time after which e^{−q t} < 1e-16.
const KILL_LOG: f64 = 36.9;
const MAX_TAIL_FACTOR: f64 = 1e8;

/// ℓᵢ(k) = a·ℓᵢ(m) + bk·ℓⱼ(k) + bm·ℓⱼ(m) + c
#[derive(Debug, Clone, Copy)]
struct Cell {
    m: usize,
    a: f64,
    bk: f64,
    bm: f64,
    c: f64,
    /// +1 if m > k, −1 if m < k, 0 if no dependence on ℓᵢ(m)
    dir: i8,
}

/// ∫₀^Δ e^{−kτ} dτ
fn e_int(k: f64, d: f64) -> f64 {
    let u = k * d;
    if u.abs() < 1e-300 {
        d
    } else {
        -(-u).exp_m1() / k
    }
}

/// (1 − e^{−u}(1 + u)) without cancellation for small u.
fn one_minus_e1(u: f64) -> f64 {
    if u.abs() < 0.1 {
        let mut s = 0.0;
        let mut p = u;
        let mut fact = 1.0;
        for k in 2..20 {
            p *= u;
            fact *= k as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * (k as f64 - 1.0) * p / fact;
        }
        s
    } else {
        -(-u).exp_m1() - u * (-u).exp()
    }
}

fn move_cell(c: &StateCoeffs, lam: f64, q: f64, m: usize, d: f64, dir: i8) -> Cell {
    let cc = q + lam;
    let e = e_int(cc, d);
    let i_theta = if c.gamma != 0.0 {
        (e - e_int(cc + c.gamma, d)) / (-(-c.gamma * d).exp_m1())
    } else {
        one_minus_e1(cc * d) / (cc * cc * d)
    };
    Cell { m, a: (-cc * d).exp(), bk: lam * (e - i_theta), bm: lam * i_theta, c: 0.0, dir }
}

fn build_grid(x: f64, y: f64, model: &KacOuModel, q: f64) -> Vec<f64> {
    // lowest level reachable from x before crossing y
    let mut lo = x;
    let mut escape = false;
    'outer: loop {
        let mut next = lo;
        for c in &model.coeffs {
            if c.velocity(lo) < 0.0 {
                if c.gamma > 0.0 {
                    next = next.min(c.a / c.gamma);
                } else {
                    escape = true;
                    break 'outer;
                }
            }
        }
        if next == lo {
            break;
        }
        lo = next;
    }
    let mut fixed: Vec<f64> = model.coeffs.iter().filter_map(|c| c.rho()).filter(|&r| r < y).collect();
    let mut bottom = lo;
    if escape {
        bottom = fixed.iter().copied().fold(x, f64::min);
        let span = (y - bottom).max(1e-3);
        bottom -= 0.05 * span;
    }
    fixed.retain(|&r| r > bottom);
    fixed.push(bottom);
    fixed.push(y);
    fixed.sort_by(|a, b| a.partial_cmp(b).unwrap());
    fixed.dedup();
    let total = y - bottom;
    let mut nodes = Vec::with_capacity(BOUNDED_NODES + 1000);
    for w in fixed.windows(2) {
        let len = w[1] - w[0];
        let n = ((len / total * (BOUNDED_NODES - 1) as f64).round() as usize).max(2);
        for k in 0..n {
            nodes.push(w[0] + len * k as f64 / n as f64);
        }
    }
    nodes.push(y);
    if escape {
        // geometric tail long enough for every escaping flow to take
        // KILL_LOG/q time units before it reaches the last node
        let t_kill = KILL_LOG / q;
        let span = y - bottom;
        let mut far = bottom;
        for c in &model.coeffs {
            if c.velocity(bottom) >= 0.0 {
                continue;
            }
            let reach = if c.gamma == 0.0 {
                -c.a * t_kill
            } else {
                let rho = c.a / c.gamma;
                let gr = (-c.gamma * t_kill).min(MAX_TAIL_FACTOR.ln());
                (rho - bottom) * gr.exp_m1()
            };
            far = far.min(bottom - reach.min(MAX_TAIL_FACTOR * span));
        }
        let mut tail = Vec::new();
        let mut h = span / (BOUNDED_NODES - 1) as f64;
        let mut p = bottom;
        while p > far {
            p -= h;
            h *= TAIL_GROWTH;
            tail.push(p.max(far));
        }
        tail.reverse();
        tail.extend(nodes);
        nodes = tail;
    }
    nodes
}

fn build_cells(nodes: &[f64], model: &KacOuModel, q: f64) -> [Vec<Cell>; 2] {
    let n = nodes.len();
    let top = n - 1;
    let mut out = [Vec::with_capacity(n), Vec::with_capacity(n)];
    for s in State::BOTH {
        let c = model.coeff(s);
        let lam = model.lambda(s);
        let cc = q + lam;
        let rho = c.rho();
        for (k, &xk) in nodes.iter().enumerate() {
            let v = c.velocity(xk);
            let is_fixed = v == 0.0 || rho == Some(xk);
            let cell = if is_fixed {
                Cell { m: k, a: 0.0, bk: lam / cc, bm: 0.0, c: 0.0, dir: 0 }
            } else if v > 0.0 && k == top {
                Cell { m: k, a: 0.0, bk: 0.0, bm: 0.0, c: 1.0, dir: 0 }
            } else if v < 0.0 && k == 0 {
                Cell { m: k, a: 0.0, bk: 0.0, bm: 0.0, c: 0.0, dir: 0 }
            } else {
                let (m, dir) = if v > 0.0 { (k + 1, 1) } else { (k - 1, -1) };
                let attractor = c.gamma > 0.0 && rho == Some(nodes[m]);
                if attractor {
                    let g = c.gamma;
                    Cell { m, a: 0.0, bk: lam / (cc + g), bm: lam * (1.0 / cc - 1.0 / (cc + g)), c: 0.0, dir }
                } else {
                    match hitting_time_coeffs(c, xk, nodes[m]) {
                        HittingTime::Finite(d) => move_cell(c, lam, q, m, d, dir),
                        // cannot happen for a cell free of fixed points; treat as absorbing
                        HittingTime::Infinite => Cell { m: k, a: 0.0, bk: lam / cc, bm: 0.0, c: 0.0, dir: 0 },
                    }
                }
            };
            out[s.index()].push(cell);
        }
    }
    out
}

fn update(l: &mut [Vec<f64>; 2], cells: &[Vec<Cell>; 2], i: usize, k: usize) -> f64 {
    let j = 1 - i;
    let cell = cells[i][k];
    let v = cell.a * l[i][cell.m] + cell.bk * l[j][k] + cell.bm * l[j][cell.m] + cell.c;
    let d = (v - l[i][k]).abs();
    l[i][k] = v;
    d
}

/// Both ℓ₀, ℓ₁ from the integral-equation oracle.
pub(crate) fn oracle_pair(q: f64, x: f64, y: f64, model: &KacOuModel, tol: f64) -> Result<[f64; 2]> {
    if !(q > 0.0) {
        return Err(invalid("q", "the integral-equation oracle needs q > 0"));
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    if x == y {
        return Err(KacError::CoincidentPoints(x));
    }
    let (model, x, y) = if x > y { (model.reflected(), -x, -y) } else { (*model, x, y) };
    let nodes = build_grid(x, y, &model, q);
    let cells = build_cells(&nodes, &model, q);
    let n = nodes.len();
    let mut l = [vec![0.0; n], vec![0.0; n]];
    let mut change = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        change = 0.0f64;
        for k in (0..n).rev() {
            for i in 0..2 {
                if cells[i][k].dir >= 0 {
                    change = change.max(update(&mut l, &cells, i, k));
                }
            }
        }
        for k in 0..n {
            for i in 0..2 {
                if cells[i][k].dir < 0 {
                    change = change.max(update(&mut l, &cells, i, k));
                }
            }
        }
        if change < tol {
            let pos = nodes.partition_point(|&p| p <= x).clamp(1, n - 1);
            let (x0, x1) = (nodes[pos - 1], nodes[pos]);
            let t = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
            let interp = |v: &Vec<f64>| v[pos - 1] + t * (v[pos] - v[pos - 1]);
            return Ok([interp(&l[0]), interp(&l[1])]);
        }
    }
    Err(KacError::NonContraction { iterations: MAX_SWEEPS, change })
}

/// ℓᵢ(q, x, y) from the integral equations, for any regime (including
/// ρ₀ = ρ₁). Iterates until the sup-norm change drops below `tol`.
pub fn fpt_integral_oracle(query: &FptQuery, model: &KacOuModel, tol: f64) -> Result<f64> {
    let l = oracle_pair(query.q, query.x, query.y, model, tol)?;
    Ok(l[query.initial_state.index()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpt::laplace_fpt_pair;

    fn example() -> KacOuModel {
        KacOuModel::from_params(1., 1., 0., 1., 0., 0., 1., 1.).unwrap()
    }

    #[test]
    fn small_u_expansion_matches_closed_expression() {
        for &u in &[0.099f64, 0.05, 0.01] {
            let direct = -(-u).exp_m1() - u * (-u).exp();
            assert!((one_minus_e1(u) - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_closed_form_on_worked_example() {
        let o = oracle_pair(1.0, 0.25, 0.75, &example(), 1e-12).unwrap();
        let c = laplace_fpt_pair(1.0, 0.25, 0.75, &example()).unwrap();
        assert!((o[0] - c[0]).abs() < 1e-5 && (o[1] - c[1]).abs() < 1e-5, "{o:?} {c:?}");
    }

    #[test]
    fn boundary_value() {
        let o = oracle_pair(1.0, 0.75 - 1e-8, 0.75, &example(), 1e-12).unwrap();
        assert!((o[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn monotone_in_q() {
        let a = oracle_pair(1.0, 0.3, 0.6, &example(), 1e-12).unwrap();
        let b = oracle_pair(2.0, 0.3, 0.6, &example(), 1e-12).unwrap();
        assert!(b[0] < a[0] && b[1] < a[1]);
    }

    #[test]
    fn degenerate_regime_is_supported() {
        let deg = KacOuModel::from_params(1., 2., 1., 3., 0., 0., 1., 3.).unwrap();
        let o = oracle_pair(0.5, 0.2, 0.6, &deg, 1e-12).unwrap();
        assert!(o.iter().all(|v| (0.0..=1.0).contains(v)));
        // below rho = 1 both flows move up, so the level is hit deterministically:
        // ℓᵢ = E[e^{−qT}] with T determined by the occupation of each state
        assert!(o[0] > 0.0 && o[1] > 0.0);
    }

    #[test]
    fn requires_positive_q() {
        assert!(oracle_pair(0.0, 0.2, 0.6, &example(), 1e-10).is_err());
    }
}
