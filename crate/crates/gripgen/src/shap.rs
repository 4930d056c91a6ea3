//! Exact Shapley attributions for the Random-Forest surrogate.
//!
//! Implements the path-dependent tree formulation: the value function of
//! a feature subset S is the tree's conditional expectation where
//! features in S follow the query point and features outside S are
//! marginalized by node sample-count weights. Per-tree attributions are
//! exact Shapley values of that function, computed with the polynomial
//! path-extension algorithm and averaged over trees.

use crate::forest::{is_missing, Dataset, RegressionForest, Tree};
use crate::{Error, Result};

/// Additive attribution of one prediction.
#[derive(Debug, Clone)]
pub struct Explanation {
    /// Mean of tree root expectations (model output on "no information").
    pub base_value: f64,
    /// Per-feature contributions; base_value + Σ phi = prediction.
    pub phi: Vec<f64>,
    pub prediction: f64,
}

/// Sentinel feature index for the root path element.
const ROOT: usize = usize::MAX;

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: usize,
    /// Fraction of paths flowing through when the feature is unknown.
    zero: f64,
    /// Indicator (0/1) of the query point following this split.
    one: f64,
    /// Permutation weight polynomial coefficient.
    pweight: f64,
}

/// Grows the path by one split, updating permutation weights.
fn extend(path: &mut Vec<PathElement>, zero: f64, one: f64, feature: usize) {
    let l = path.len();
    path.push(PathElement {
        feature,
        zero,
        one,
        pweight: if l == 0 { 1.0 } else { 0.0 },
    });
    for i in (0..l).rev() {
        path[i + 1].pweight += one * path[i].pweight * (i + 1) as f64 / (l + 1) as f64;
        path[i].pweight = zero * path[i].pweight * (l - i) as f64 / (l + 1) as f64;
    }
}

/// Removes element `i`, inverting the corresponding `extend`.
fn unwind(path: &mut Vec<PathElement>, i: usize) {
    let l = path.len() - 1;
    let one = path[i].one;
    let zero = path[i].zero;
    let mut n = path[l].pweight;
    for j in (0..l).rev() {
        if one != 0.0 {
            let t = path[j].pweight;
            path[j].pweight = n * (l + 1) as f64 / ((j + 1) as f64 * one);
            n = t - path[j].pweight * zero * (l - j) as f64 / (l + 1) as f64;
        } else {
            path[j].pweight = path[j].pweight * (l + 1) as f64 / (zero * (l - j) as f64);
        }
    }
    // The rewritten weights occupy indices 0..l−1; only the split
    // metadata shifts down over the removed element.
    for j in i..l {
        path[j].feature = path[j + 1].feature;
        path[j].zero = path[j + 1].zero;
        path[j].one = path[j + 1].one;
    }
    path.pop();
}

/// Sum of permutation weights with element `i` unwound, times (l+1);
/// this is the total Shapley weight attached to element `i`.
fn unwound_sum(path: &[PathElement], i: usize) -> f64 {
    let l = path.len() - 1;
    let one = path[i].one;
    let zero = path[i].zero;
    let mut total = 0.0;
    if one != 0.0 {
        let mut n = path[l].pweight;
        for j in (0..l).rev() {
            let tmp = n / ((j + 1) as f64 * one);
            total += tmp;
            n = path[j].pweight - tmp * zero * (l - j) as f64;
        }
    } else {
        for j in (0..l).rev() {
            total += path[j].pweight / (zero * (l - j) as f64);
        }
    }
    total * (l + 1) as f64
}

fn tree_shap(tree: &Tree, x: &[f64], phi: &mut [f64]) {
    fn recurse(
        tree: &Tree,
        x: &[f64],
        phi: &mut [f64],
        node: usize,
        mut path: Vec<PathElement>,
        zero: f64,
        one: f64,
        feature: usize,
    ) {
        extend(&mut path, zero, one, feature);
        let n = &tree.nodes[node];
        match n.feature {
            None => {
                for i in 1..path.len() {
                    let w = unwound_sum(&path, i);
                    phi[path[i].feature] += w * (path[i].one - path[i].zero) * n.value;
                }
            }
            Some(f) => {
                let goes_left = is_missing(x[f]) || x[f] <= n.threshold;
                let (hot, cold) = if goes_left { (n.left, n.right) } else { (n.right, n.left) };
                let hot_frac = tree.nodes[hot].count as f64 / n.count as f64;
                let cold_frac = tree.nodes[cold].count as f64 / n.count as f64;
                // A repeated feature on the path is condensed: its previous
                // fractions multiply into the new element.
                let mut inherit_zero = 1.0;
                let mut inherit_one = 1.0;
                if let Some(k) = path.iter().position(|e| e.feature == f) {
                    inherit_zero = path[k].zero;
                    inherit_one = path[k].one;
                    unwind(&mut path, k);
                }
                recurse(
                    tree,
                    x,
                    phi,
                    hot,
                    path.clone(),
                    inherit_zero * hot_frac,
                    inherit_one,
                    f,
                );
                recurse(tree, x, phi, cold, path, inherit_zero * cold_frac, 0.0, f);
            }
        }
    }
    recurse(tree, x, phi, 0, Vec::new(), 1.0, 1.0, ROOT);
}

/// Exact path-dependent Shapley attribution of `forest.predict(x)`.
pub fn shap_values(forest: &RegressionForest, x: &[f64]) -> Result<Explanation> {
    let prediction = forest.predict(x)?;
    let mut phi = vec![0.0; forest.n_features];
    let mut tree_phi = vec![0.0; forest.n_features];
    for tree in &forest.trees {
        tree_phi.iter_mut().for_each(|v| *v = 0.0);
        tree_shap(tree, x, &mut tree_phi);
        for (acc, v) in phi.iter_mut().zip(&tree_phi) {
            *acc += v;
        }
    }
    let n = forest.trees.len() as f64;
    phi.iter_mut().for_each(|v| *v /= n);
    Ok(Explanation { base_value: forest.base_value(), phi, prediction })
}

/// One row of the per-group ranking.
#[derive(Debug, Clone)]
pub struct GroupImportance {
    pub group: String,
    /// Mean over samples of Σ_{j ∈ group} |phi_j|.
    pub importance: f64,
}

/// One row of the per-feature table.
#[derive(Debug, Clone)]
pub struct FeatureImportance {
    pub feature: String,
    pub group: String,
    pub mean_abs_phi: f64,
    /// Pearson correlation of phi_j with the feature value (missing rows
    /// excluded); sign shows the direction of the effect.
    pub phi_value_correlation: f64,
}

/// Aggregates explanations into ranked group and per-feature tables.
///
/// Group importance is the mean over samples of the summed |phi| of the
/// group's columns, sorted descending (ties by name for determinism).
pub fn group_importance(
    explanations: &[Explanation],
    data: &Dataset,
) -> Result<(Vec<GroupImportance>, Vec<FeatureImportance>)> {
    data.validate()?;
    let m = data.n_features();
    if explanations.is_empty() {
        return Err(Error::Model("no explanations to aggregate".into()));
    }
    if explanations.iter().any(|e| e.phi.len() != m) {
        return Err(Error::Model("explanation width does not match dataset".into()));
    }
    if explanations.len() != data.n_rows() {
        return Err(Error::Model("one explanation per dataset row required".into()));
    }
    let n = explanations.len() as f64;

    let mut features = Vec::with_capacity(m);
    for j in 0..m {
        let mean_abs = explanations.iter().map(|e| e.phi[j].abs()).sum::<f64>() / n;
        let pairs: Vec<(f64, f64)> = explanations
            .iter()
            .zip(&data.x)
            .filter(|(_, row)| !is_missing(row[j]))
            .map(|(e, row)| (e.phi[j], row[j]))
            .collect();
        features.push(FeatureImportance {
            feature: data.columns[j].clone(),
            group: data.groups[j].clone(),
            mean_abs_phi: mean_abs,
            phi_value_correlation: pearson(&pairs),
        });
    }
    features.sort_by(|a, b| {
        b.mean_abs_phi
            .partial_cmp(&a.mean_abs_phi)
            .unwrap()
            .then_with(|| a.feature.cmp(&b.feature))
    });

    let mut group_names: Vec<String> = data.groups.clone();
    group_names.sort();
    group_names.dedup();
    let mut groups = Vec::with_capacity(group_names.len());
    for g in group_names {
        let cols: Vec<usize> = (0..m).filter(|&j| data.groups[j] == g).collect();
        let importance = explanations
            .iter()
            .map(|e| cols.iter().map(|&j| e.phi[j].abs()).sum::<f64>())
            .sum::<f64>()
            / n;
        groups.push(GroupImportance { group: g, importance });
    }
    groups.sort_by(|a, b| {
        b.importance.partial_cmp(&a.importance).unwrap().then_with(|| a.group.cmp(&b.group))
    });
    Ok((groups, features))
}

fn pearson(pairs: &[(f64, f64)]) -> f64 {
    if pairs.len() < 2 {
        return 0.0;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in pairs {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 1e-24 || syy <= 1e-24 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{fit_forest, ForestConfig, TreeNode, MISSING};
    use crate::oracles::shapley_brute_force;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dataset(x: Vec<Vec<f64>>, y: Vec<f64>, groups: Option<Vec<&str>>) -> Dataset {
        let m = x.first().map(|r| r.len()).unwrap_or(0);
        Dataset {
            x,
            y,
            columns: (0..m).map(|i| format!("f{i}")).collect(),
            groups: groups
                .map(|g| g.into_iter().map(String::from).collect())
                .unwrap_or_else(|| vec!["g".into(); m]),
        }
    }

    fn leaf_forest(values: &[f64], n_features: usize) -> RegressionForest {
        RegressionForest {
            trees: values
                .iter()
                .map(|&v| Tree {
                    nodes: vec![TreeNode {
                        feature: None,
                        threshold: 0.0,
                        left: 0,
                        right: 0,
                        count: 4,
                        value: v,
                    }],
                })
                .collect(),
            n_features,
            config: ForestConfig::default(),
        }
    }

    #[test]
    fn single_leaf_tree_attributes_nothing() {
        let forest = leaf_forest(&[3.0], 4);
        let e = shap_values(&forest, &[0.0; 4]).unwrap();
        assert_eq!(e.phi, vec![0.0; 4]);
        assert_relative_eq!(e.base_value, 3.0);
        assert_relative_eq!(e.prediction, 3.0);
    }

    #[test]
    fn depth_one_tree_attributes_only_split_feature() {
        // Split on feature 1: left (count 3) → −1, right (count 1) → 3.
        let tree = Tree {
            nodes: vec![
                TreeNode { feature: Some(1), threshold: 0.5, left: 1, right: 2, count: 4, value: 0.0 },
                TreeNode { feature: None, threshold: 0.0, left: 0, right: 0, count: 3, value: -1.0 },
                TreeNode { feature: None, threshold: 0.0, left: 0, right: 0, count: 1, value: 3.0 },
            ],
        };
        let forest =
            RegressionForest { trees: vec![tree], n_features: 3, config: ForestConfig::default() };
        let e = shap_values(&forest, &[9.0, 1.0, 9.0]).unwrap();
        assert_eq!(e.phi[0], 0.0);
        assert_eq!(e.phi[2], 0.0);
        // base = (3·(−1) + 1·3)/4 = 0; prediction = 3 → phi[1] = 3.
        assert_relative_eq!(e.phi[1], 3.0, epsilon = 1e-12);
        assert_relative_eq!(e.base_value + e.phi.iter().sum::<f64>(), e.prediction, epsilon = 1e-12);
    }

    #[test]
    fn local_accuracy_on_fitted_forest() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x: Vec<Vec<f64>> =
            (0..120).map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|r| r[0] * r[1] + (3.0 * r[2]).sin() + r[3] + rng.gen_range(-0.05..0.05))
            .collect();
        let data = dataset(x, y, None);
        let forest = fit_forest(&data, &ForestConfig { n_trees: 40, ..Default::default() }, 4)
            .unwrap();
        for row in &data.x {
            let e = shap_values(&forest, row).unwrap();
            let gap = (e.base_value + e.phi.iter().sum::<f64>() - e.prediction).abs();
            assert!(gap <= 1e-9, "local accuracy violated: {gap}");
        }
    }

    /// Exponential-enumeration oracle: all 2^M subsets with the
    /// conditional-expectation-by-traversal value function.
    #[test]
    fn matches_brute_force_shapley() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let x: Vec<Vec<f64>> =
            (0..80).map(|_| (0..6).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let y: Vec<f64> =
            x.iter().map(|r| 2.0 * r[0] - r[1] * r[2] + if r[4] > 0.5 { 1.0 } else { 0.0 }).collect();
        let data = dataset(x, y, None);
        let forest = fit_forest(&data, &ForestConfig { n_trees: 15, ..Default::default() }, 9)
            .unwrap();
        for row in data.x.iter().take(12) {
            let fast = shap_values(&forest, row).unwrap();
            let (base, slow) = shapley_brute_force(&forest, row);
            assert_relative_eq!(fast.base_value, base, epsilon = 1e-9);
            for (a, b) in fast.phi.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-6, "phi mismatch: {a} vs {b}");
            }
        }
    }

    /// A query point with a missing feature still gets an exact, locally
    /// accurate attribution (missing routes left, like prediction).
    #[test]
    fn missing_query_values_stay_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x: Vec<Vec<f64>> =
            (0..60).map(|_| (0..4).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] + 2.0 * r[1]).collect();
        let data = dataset(x, y, None);
        let forest = fit_forest(&data, &ForestConfig { n_trees: 10, ..Default::default() }, 2)
            .unwrap();
        let query = [0.5, MISSING, 0.2, 0.9];
        let fast = shap_values(&forest, &query).unwrap();
        assert_relative_eq!(
            fast.base_value + fast.phi.iter().sum::<f64>(),
            fast.prediction,
            epsilon = 1e-9
        );
        let (_, slow) = shapley_brute_force(&forest, &query);
        for (a, b) in fast.phi.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    /// Symmetry, stated at oracle level: duplicate columns, refit with the
    /// column order swapped and the same seed, and the oracle attributions
    /// swap exactly with them.
    #[test]
    fn oracle_symmetry_under_feature_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut x: Vec<Vec<f64>> = Vec::new();
        let mut y = Vec::new();
        for _ in 0..50 {
            let a = rng.gen_range(0.0..1.0);
            let c = rng.gen_range(0.0..1.0);
            x.push(vec![a, a, c]);
            y.push(2.0 * a + c);
        }
        let swapped_x: Vec<Vec<f64>> = x.iter().map(|r| vec![r[1], r[0], r[2]]).collect();
        let data = dataset(x, y.clone(), None);
        let swapped = dataset(swapped_x, y, None);
        let config = ForestConfig { n_trees: 8, ..Default::default() };
        let fa = fit_forest(&data, &config, 5).unwrap();
        let fb = fit_forest(&swapped, &config, 5).unwrap();
        for row in data.x.iter().take(10) {
            let (_, pa) = shapley_brute_force(&fa, row);
            let (_, pb) = shapley_brute_force(&fb, &[row[1], row[0], row[2]]);
            // Column k of the swapped fit is original column swap(k), so
            // equal phi at matching positions means neither duplicate is
            // intrinsically favored — the attribution is label-invariant.
            assert!((pa[0] - pb[0]).abs() <= 1e-9);
            assert!((pa[1] - pb[1]).abs() <= 1e-9);
            assert!((pa[2] - pb[2]).abs() <= 1e-9);
        }
    }

    #[test]
    fn dummy_feature_gets_exactly_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Vec<f64>> = (0..60)
            .map(|_| vec![rng.gen_range(0.0..1.0), 0.7, rng.gen_range(0.0..1.0)])
            .collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] - r[2]).collect();
        let data = dataset(x, y, None);
        let forest = fit_forest(&data, &ForestConfig { n_trees: 20, ..Default::default() }, 1)
            .unwrap();
        // Constant column: no split can use it.
        assert!(forest
            .trees
            .iter()
            .all(|t| t.nodes.iter().all(|n| n.feature != Some(1))));
        for row in data.x.iter().take(10) {
            let e = shap_values(&forest, row).unwrap();
            assert_eq!(e.phi[1], 0.0);
        }
    }

    #[test]
    fn zero_phi_gives_zero_importances() {
        let forest = leaf_forest(&[1.0, 1.0], 2);
        let data = dataset(vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![1.0, 1.0], Some(vec!["a", "b"]));
        let explanations: Vec<Explanation> =
            data.x.iter().map(|r| shap_values(&forest, r).unwrap()).collect();
        let (groups, features) = group_importance(&explanations, &data).unwrap();
        assert!(groups.iter().all(|g| g.importance == 0.0));
        assert!(features.iter().all(|f| f.mean_abs_phi == 0.0));
    }

    #[test]
    fn dominant_group_ranks_first() {
        // All nonzero phi sit in group "active"; it must rank first.
        let data = dataset(
            vec![vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]],
            vec![0.0, 1.0],
            Some(vec!["active", "idle", "idle"]),
        );
        let explanations = vec![
            Explanation { base_value: 0.5, phi: vec![-0.5, 0.0, 0.0], prediction: 0.0 },
            Explanation { base_value: 0.5, phi: vec![0.5, 0.0, 0.0], prediction: 1.0 },
        ];
        let (groups, _) = group_importance(&explanations, &data).unwrap();
        assert_eq!(groups[0].group, "active");
        assert_relative_eq!(groups[0].importance, 0.5);
        assert_eq!(groups[1].importance, 0.0);
    }

    /// Analytic additive-model expectation: for y = 3·x_a + 1·x_b with
    /// i.i.d. features, mean |phi| scales with the coefficient, so the
    /// group ratio is ≈ 3.
    #[test]
    fn additive_model_importance_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x: Vec<Vec<f64>> =
            (0..400).map(|_| (0..2).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| 3.0 * r[0] + r[1]).collect();
        let data = dataset(x, y, Some(vec!["a", "b"]));
        let forest = fit_forest(&data, &ForestConfig::default(), 12).unwrap();
        let explanations: Vec<Explanation> =
            data.x.iter().map(|r| shap_values(&forest, r).unwrap()).collect();
        let (groups, _) = group_importance(&explanations, &data).unwrap();
        let a = groups.iter().find(|g| g.group == "a").unwrap().importance;
        let b = groups.iter().find(|g| g.group == "b").unwrap().importance;
        let ratio = a / b;
        assert!((ratio - 3.0).abs() <= 0.6, "importance ratio {ratio}");
    }

    #[test]
    fn correlation_sign_tracks_effect_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<Vec<f64>> =
            (0..200).map(|_| (0..2).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0] - 2.0 * r[1]).collect();
        let data = dataset(x, y, Some(vec!["a", "b"]));
        let forest = fit_forest(&data, &ForestConfig::default(), 4).unwrap();
        let explanations: Vec<Explanation> =
            data.x.iter().map(|r| shap_values(&forest, r).unwrap()).collect();
        let (_, features) = group_importance(&explanations, &data).unwrap();
        let f0 = features.iter().find(|f| f.feature == "f0").unwrap();
        let f1 = features.iter().find(|f| f.feature == "f1").unwrap();
        assert!(f0.phi_value_correlation > 0.8);
        assert!(f1.phi_value_correlation < -0.8);
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let forest = leaf_forest(&[1.0], 2);
        let data = dataset(vec![vec![0.0, 0.0]], vec![1.0], None);
        let e = shap_values(&forest, &[0.0, 0.0]).unwrap();
        assert!(group_importance(&[], &data).is_err());
        let bad = Explanation { phi: vec![0.0; 3], ..e.clone() };
        assert!(group_importance(&[bad], &data).is_err());
        assert!(group_importance(&[e.clone(), e], &data).is_err());
    }
}
