//! Brute-force reference implementations used by the test suite.
//!
//! Nothing in this module is called from production code paths. These
//! routines cross-check the fast implementations with algorithmically
//! independent (and exponentially slower) formulations:
//!
//! * [`oracle_alpha`] checks the simplex-based resistance LP by
//!   enumerating the vertices of the reachable wrench set and testing
//!   hull membership with Wolfe's min-norm-point algorithm plus
//!   bisection on the magnitude.
//! * [`shapley_brute_force`] checks the polynomial TreeSHAP algorithm by
//!   enumerating all 2^M feature subsets with the
//!   conditional-expectation-by-tree-traversal value function.

use nalgebra::{DMatrix, Vector6};

use crate::forest::{is_missing, RegressionForest, Tree};
use crate::grasp::{cone_edge_wrenches, ContactSet, WrenchTestSpec};

/// Squared distance from the origin to conv(points), computed with
/// Wolfe's min-norm-point algorithm (exact up to the termination
/// tolerance; the working set stays affinely independent, ≤ 7 points
/// in 6-D).
pub fn min_norm_to_hull(points: &[Vector6<f64>]) -> f64 {
    let start = (0..points.len())
        .min_by(|&a, &b| points[a].norm_squared().partial_cmp(&points[b].norm_squared()).unwrap())
        .unwrap();
    let mut support = vec![start];
    let mut lambda = vec![1.0f64];
    let combo = |support: &[usize], lambda: &[f64]| -> Vector6<f64> {
        support
            .iter()
            .zip(lambda)
            .fold(Vector6::zeros(), |acc, (&i, &l)| acc + points[i] * l)
    };
    for _ in 0..200 {
        let x = combo(&support, &lambda);
        let xn2 = x.norm_squared();
        // Linear minimization oracle over all vertices.
        let (best, dot) = points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, x.dot(p)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if xn2 - dot <= 1e-12 * (1.0 + xn2) || support.contains(&best) {
            return xn2;
        }
        support.push(best);
        lambda.push(0.0);
        // Minor cycle: pull the iterate to the affine minimizer,
        // dropping vertices whose coefficient hits zero.
        loop {
            let k = support.len();
            // Solve min ||Σ a_i p_i||² s.t. Σ a_i = 1 via the KKT
            // system on the Gram matrix.
            let mut sys = DMatrix::zeros(k + 1, k + 1);
            for r in 0..k {
                for c in 0..k {
                    sys[(r, c)] = points[support[r]].dot(&points[support[c]]);
                }
                sys[(r, k)] = 1.0;
                sys[(k, r)] = 1.0;
            }
            let mut rhs = DMatrix::zeros(k + 1, 1);
            rhs[(k, 0)] = 1.0;
            let a: Vec<f64> = match sys.clone().lu().solve(&rhs) {
                Some(sol) => (0..k).map(|i| sol[(i, 0)]).collect(),
                None => {
                    // Affinely dependent working set: least-squares
                    // fallback.
                    let sol = sys.svd(true, true).solve(&rhs, 1e-12).unwrap();
                    (0..k).map(|i| sol[(i, 0)]).collect()
                }
            };
            if a.iter().all(|&ai| ai > 1e-11) {
                lambda = a;
                break;
            }
            let mut theta = 1.0f64;
            for (l, an) in lambda.iter().zip(&a) {
                if *an <= 1e-11 && l - an > 1e-15 {
                    theta = theta.min(l / (l - an));
                }
            }
            for (l, an) in lambda.iter_mut().zip(&a) {
                *l = (1.0 - theta) * *l + theta * an;
            }
            let keep: Vec<usize> = (0..k).filter(|&i| lambda[i] > 1e-11).collect();
            if keep.len() == k {
                // Numerical stall; accept the current point.
                break;
            }
            support = keep.iter().map(|&i| support[i]).collect();
            lambda = keep.iter().map(|&i| lambda[i]).collect();
            let s: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= s);
        }
    }
    combo(&support, &lambda).norm_squared()
}

/// Independent resistance oracle: the reachable wrench set is the
/// convex hull of all per-contact cone-edge coefficient extremes
/// (each contact contributes either nothing or one edge at full
/// cap), enumerated exhaustively; bisection on α then brackets the
/// largest α with −α·ŵ inside that hull.
pub fn oracle_alpha(set: &ContactSet, w_hat: &Vector6<f64>, spec: &WrenchTestSpec) -> f64 {
    if set.contacts.is_empty() {
        return 0.0;
    }
    // Vertex candidates of the Minkowski sum: every combination of
    // "idle" (0) or "one edge at full cap" per contact.
    let per_contact: Vec<Vec<Vector6<f64>>> = set
        .contacts
        .iter()
        .map(|c| {
            let mut v = vec![Vector6::zeros()];
            v.extend(cone_edge_wrenches(c, spec).iter().map(|w| w * c.cap));
            v
        })
        .collect();
    let mut vertices = vec![Vector6::zeros()];
    for options in &per_contact {
        let mut next = Vec::with_capacity(vertices.len() * options.len());
        for v in &vertices {
            for o in options {
                next.push(v + o);
            }
        }
        vertices = next;
    }
    let feasible = |alpha: f64| -> bool {
        let q = *w_hat * (-alpha);
        let shifted: Vec<Vector6<f64>> = vertices.iter().map(|v| v - q).collect();
        min_norm_to_hull(&shifted).sqrt() <= 1e-7 * (1.0 + q.norm())
    };
    let mut lo = 0.0;
    let mut hi = vertices.iter().map(|v| v.norm()).fold(0.0, f64::max) + 1.0;
    if !feasible(0.0) {
        return 0.0;
    }
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Conditional expectation of `tree` given the features in `mask` take
/// the values in `x`; features outside the mask are marginalized by
/// node sample counts.
fn cond_exp(tree: &Tree, node: usize, x: &[f64], mask: u32) -> f64 {
    let n = &tree.nodes[node];
    match n.feature {
        None => n.value,
        Some(f) => {
            if mask & (1 << f) != 0 {
                let next = if is_missing(x[f]) || x[f] <= n.threshold { n.left } else { n.right };
                cond_exp(tree, next, x, mask)
            } else {
                let wl = tree.nodes[n.left].count as f64;
                let wr = tree.nodes[n.right].count as f64;
                (wl * cond_exp(tree, n.left, x, mask) + wr * cond_exp(tree, n.right, x, mask))
                    / (wl + wr)
            }
        }
    }
}

/// Exact Shapley values by enumerating all 2^M feature subsets.
/// Returns (base value, per-feature phi). Only usable for small M.
pub fn shapley_brute_force(forest: &RegressionForest, x: &[f64]) -> (f64, Vec<f64>) {
    let m = forest.n_features;
    assert!(m <= 20, "exponential oracle is limited to small feature counts");
    let n_subsets = 1usize << m;
    // v(S) = mean over trees of the conditional expectation under S.
    let mut v = vec![0.0f64; n_subsets];
    for (mask, slot) in v.iter_mut().enumerate() {
        let sum: f64 = forest.trees.iter().map(|t| cond_exp(t, 0, x, mask as u32)).sum();
        *slot = sum / forest.trees.len() as f64;
    }
    let mut factorial = vec![1.0f64; m + 1];
    for i in 1..=m {
        factorial[i] = factorial[i - 1] * i as f64;
    }
    let mut phi = vec![0.0f64; m];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        for mask in 0..n_subsets {
            if mask & bit != 0 {
                continue;
            }
            let s = (mask as u32).count_ones() as usize;
            let weight = factorial[s] * factorial[m - s - 1] / factorial[m];
            *p += weight * (v[mask | bit] - v[mask]);
        }
    }
    (v[0], phi)
}
