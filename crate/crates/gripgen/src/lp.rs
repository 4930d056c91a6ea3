//! Small dense linear programs.
//!
//! Two-phase primal simplex with Bland's rule, sized for the grasp
//! friction-cone programs (tens of variables and rows). Maximizes c·x
//! subject to equality and upper-bound rows with x ≥ 0.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Values of the original variables (no slacks).
    pub x: Vec<f64>,
    pub objective: f64,
}

const EPS: f64 = 1e-10;

/// Maximize `c·x` subject to `a_eq x = b_eq`, `a_ub x ≤ b_ub`, `x ≥ 0`.
///
/// Rows may have negative right-hand sides; they are normalized
/// internally. Returns the optimum, or a solution tagged `Infeasible` /
/// `Unbounded` with zeroed payload.
pub fn solve_lp(
    c: &[f64],
    a_eq: &[Vec<f64>],
    b_eq: &[f64],
    a_ub: &[Vec<f64>],
    b_ub: &[f64],
) -> Result<LpSolution> {
    let n = c.len();
    if a_eq.len() != b_eq.len() || a_ub.len() != b_ub.len() {
        return Err(Error::Lp("row/rhs count mismatch".into()));
    }
    for row in a_eq.iter().chain(a_ub) {
        if row.len() != n {
            return Err(Error::Lp("row width mismatch".into()));
        }
    }
    let n_slack = a_ub.len();
    let m = a_eq.len() + a_ub.len();
    let total = n + n_slack + m; // originals + slacks + artificials
    // Build rows: [originals | slacks | artificials | rhs], rhs ≥ 0.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rhs: Vec<f64> = Vec::with_capacity(m);
    for (i, row) in a_eq.iter().chain(a_ub.iter()).enumerate() {
        let mut r = vec![0.0; total];
        r[..n].copy_from_slice(row);
        if i >= a_eq.len() {
            r[n + (i - a_eq.len())] = 1.0;
        }
        let b = if i < a_eq.len() { b_eq[i] } else { b_ub[i - a_eq.len()] };
        if b < 0.0 {
            for v in r.iter_mut() {
                *v = -*v;
            }
            rhs.push(-b);
        } else {
            rhs.push(b);
        }
        rows.push(r);
    }
    let mut basis: Vec<usize> = Vec::with_capacity(m);
    for (i, r) in rows.iter_mut().enumerate() {
        r[n + n_slack + i] = 1.0;
        basis.push(n + n_slack + i);
    }

    // Phase 1: minimize the sum of artificials (maximize its negation).
    let mut phase1 = vec![0.0; total];
    for v in phase1.iter_mut().skip(n + n_slack) {
        *v = -1.0;
    }
    simplex(&mut rows, &mut rhs, &mut basis, &phase1, total)?;
    let art_sum: f64 = basis
        .iter()
        .zip(&rhs)
        .filter(|(&b, _)| b >= n + n_slack)
        .map(|(_, &v)| v)
        .sum();
    if art_sum > 1e-7 {
        return Ok(LpSolution { status: LpStatus::Infeasible, x: vec![0.0; n], objective: 0.0 });
    }
    // Drive any remaining (degenerate) artificials out of the basis.
    for i in 0..basis.len() {
        if basis[i] >= n + n_slack {
            if let Some(j) = (0..n + n_slack).find(|&j| rows[i][j].abs() > EPS) {
                pivot(&mut rows, &mut rhs, &mut basis, i, j);
            }
        }
    }

    // Phase 2: maximize the real objective with artificials disabled.
    let mut obj = vec![0.0; total];
    obj[..n].copy_from_slice(c);
    for r in rows.iter_mut() {
        for v in r.iter_mut().skip(n + n_slack) {
            *v = 0.0;
        }
    }
    if !simplex(&mut rows, &mut rhs, &mut basis, &obj, n + n_slack)? {
        return Ok(LpSolution { status: LpStatus::Unbounded, x: vec![0.0; n], objective: 0.0 });
    }
    let mut x = vec![0.0; n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            x[b] = rhs[i];
        }
    }
    let objective = x.iter().zip(c).map(|(a, b)| a * b).sum();
    Ok(LpSolution { status: LpStatus::Optimal, x, objective })
}

/// Runs primal simplex to optimality for `maximize obj` over columns
/// `0..ncols`. Returns false on unboundedness.
fn simplex(
    rows: &mut [Vec<f64>],
    rhs: &mut [f64],
    basis: &mut [usize],
    obj: &[f64],
    ncols: usize,
) -> Result<bool> {
    let m = rows.len();
    let max_iter = 200 * (ncols + m).max(50);
    for _ in 0..max_iter {
        // Reduced costs: r_j = obj_j − y·A_j where y solves the basis.
        let y: Vec<f64> = (0..m).map(|i| obj[basis[i]]).collect();
        // Bland's rule: first column with positive reduced cost.
        let mut entering = None;
        for j in 0..ncols {
            if basis.contains(&j) {
                continue;
            }
            let reduced = obj[j] - (0..m).map(|i| y[i] * rows[i][j]).sum::<f64>();
            if reduced > EPS {
                entering = Some(j);
                break;
            }
        }
        let Some(j) = entering else {
            return Ok(true);
        };
        // Min-ratio test, exact ties broken by the smallest basis index
        // (Bland). The comparisons must be exact: tolerance windows here
        // void the anti-cycling guarantee on degenerate instances.
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            if rows[i][j] > EPS {
                let ratio = rhs[i] / rows[i][j];
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr || (ratio == lr && basis[i] < basis[li]) {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((i, _)) = leave else {
            return Ok(false);
        };
        pivot(rows, rhs, basis, i, j);
    }
    Err(Error::Lp("simplex iteration cap exceeded".into()))
}

fn pivot(rows: &mut [Vec<f64>], rhs: &mut [f64], basis: &mut [usize], i: usize, j: usize) {
    let p = rows[i][j];
    for v in rows[i].iter_mut() {
        *v /= p;
    }
    rhs[i] /= p;
    for k in 0..rows.len() {
        if k == i {
            continue;
        }
        let f = rows[k][j];
        if f.abs() > 0.0 {
            for col in 0..rows[k].len() {
                rows[k][col] -= f * rows[i][col];
            }
            rhs[k] -= f * rhs[i];
            // Rounding may push a degenerate rhs a hair negative, which
            // would poison later ratio tests.
            if rhs[k] < 0.0 && rhs[k] > -EPS {
                rhs[k] = 0.0;
            }
        }
    }
    basis[i] = j;
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36.
        let sol = solve_lp(
            &[3.0, 5.0],
            &[],
            &[],
            &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            &[4.0, 12.0, 18.0],
        )
        .unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_relative_eq!(sol.objective, 36.0, epsilon = 1e-8);
        assert_relative_eq!(sol.x[0], 2.0, epsilon = 1e-8);
        assert_relative_eq!(sol.x[1], 6.0, epsilon = 1e-8);
    }

    #[test]
    fn equality_constraints() {
        // max x + y s.t. x + y = 1 → 1.
        let sol = solve_lp(&[1.0, 1.0], &[vec![1.0, 1.0]], &[1.0], &[], &[]).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_relative_eq!(sol.objective, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn negative_rhs_normalized() {
        // max −x s.t. −x ≤ −2 (i.e. x ≥ 2) → x = 2.
        let sol = solve_lp(&[-1.0], &[], &[], &[vec![-1.0]], &[-2.0]).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_relative_eq!(sol.x[0], 2.0, epsilon = 1e-9);
    }

    #[test]
    fn detects_infeasible() {
        // x = 1 and x = 2 simultaneously.
        let sol =
            solve_lp(&[1.0], &[vec![1.0], vec![1.0]], &[1.0, 2.0], &[], &[]).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let sol = solve_lp(&[1.0], &[], &[], &[], &[]).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn degenerate_pivoting_terminates() {
        // Classic degenerate instance (multiple ties); Bland's rule must
        // still terminate at the optimum.
        let sol = solve_lp(
            &[10.0, -57.0, -9.0, -24.0],
            &[],
            &[],
            &[
                vec![0.5, -5.5, -2.5, 9.0],
                vec![0.5, -1.5, -0.5, 1.0],
                vec![1.0, 0.0, 0.0, 0.0],
            ],
            &[0.0, 0.0, 1.0],
        )
        .unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_relative_eq!(sol.objective, 1.0, epsilon = 1e-8);
    }

    /// Random bounded LPs: the returned point must be feasible and no
    /// random feasible perturbation may improve the objective beyond
    /// first-order noise (local = global optimality for LPs).
    #[test]
    fn random_instances_are_feasible_and_unimprovable() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(2..5);
            let m = rng.gen_range(2..5);
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            // Rows with positive coefficients keep the region bounded.
            let a: Vec<Vec<f64>> =
                (0..m).map(|_| (0..n).map(|_| rng.gen_range(0.2..1.0)).collect()).collect();
            let b: Vec<f64> = (0..m).map(|_| rng.gen_range(1.0..5.0)).collect();
            let sol = solve_lp(&c, &[], &[], &a, &b).unwrap();
            assert_eq!(sol.status, LpStatus::Optimal);
            for (row, &bi) in a.iter().zip(&b) {
                let lhs: f64 = row.iter().zip(&sol.x).map(|(r, x)| r * x).sum();
                assert!(lhs <= bi + 1e-7);
            }
            for xi in &sol.x {
                assert!(*xi >= -1e-9);
            }
            // Monte-Carlo optimality probe.
            for _ in 0..200 {
                let probe: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
                let feasible = a
                    .iter()
                    .zip(&b)
                    .all(|(row, &bi)| row.iter().zip(&probe).map(|(r, x)| r * x).sum::<f64>() <= bi);
                if feasible {
                    let val: f64 = c.iter().zip(&probe).map(|(a, b)| a * b).sum();
                    assert!(val <= sol.objective + 1e-7);
                }
            }
        }
    }
}
