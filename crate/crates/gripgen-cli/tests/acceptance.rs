//! End-to-end acceptance gate. One test, one PASS/FAIL line per
//! criterion; the test fails if any criterion fails. Run with
//! `--nocapture` to watch the lines appear live.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gripgen::grasp::{
    grasp_score, hand_score, resist_magnitude, test_directions, Contact, ContactSet,
    StabilityScore, WrenchTestSpec,
};
use gripgen::hand::{assemble_hand, HandConfig};
use gripgen::mesh::convex_hull;
use gripgen::oracles::{oracle_alpha, shapley_brute_force};
use gripgen::shap::shap_values;
use gripgen::space::{build_power_grasp_space, DesignPoint, DesignSpace, Domain, ParamSpec};
use gripgen::stl::{read_stl, write_stl};
use gripgen::surface::{displacement, kernel_center, PadSpec, SurfaceKernel};
use gripgen::tpe::{optimize, TpeConfig};
use gripgen::{urdf, Error};

#[derive(Default)]
struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn check(&mut self, criterion: &str, result: Result<(), String>) {
        match result {
            Ok(()) => println!("PASS {criterion}"),
            Err(detail) => {
                println!("FAIL {criterion}: {detail}");
                self.failures.push(format!("{criterion}: {detail}"));
            }
        }
    }
}

fn fail(msg: impl Into<String>) -> Result<(), String> {
    Err(msg.into())
}

fn synthetic_set(contacts: Vec<Contact>) -> ContactSet {
    ContactSet { contacts, sources: Vec::new(), infeasible: false, final_q: Vec::new() }
}

fn random_contact(rng: &mut ChaCha8Rng) -> Contact {
    let n = loop {
        let v = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        if v.norm() > 1e-3 {
            break v.normalize();
        }
    };
    Contact::new(
        Point3::new(
            rng.gen_range(-50.0..50.0),
            rng.gen_range(-50.0..50.0),
            rng.gen_range(-50.0..50.0),
        ),
        n,
        rng.gen_range(0.0..1.0),
        rng.gen_range(1.0..20.0),
    )
}

// ---- criterion 1: scoring arithmetic and ranges -------------------------

fn score_arithmetic() -> Result<(), String> {
    let spec = WrenchTestSpec::default();

    // Hand-computed cases, checked with exact equality.
    let full: [f64; 12] = std::array::from_fn(|i| spec.alpha_max(i) * 2.0);
    if StabilityScore::from_alphas(&full, &spec).s_t != 1.0 {
        return fail("full resistance must score exactly 1.0");
    }
    let mixed: [f64; 12] =
        std::array::from_fn(|i| if i < 6 { spec.alpha_max(i) } else { 0.5 * spec.alpha_max(i) });
    if StabilityScore::from_alphas(&mixed, &spec).s_t != 0.75 {
        return fail("six full + six half directions must score exactly 0.75");
    }
    let empty = synthetic_set(Vec::new());
    let s = grasp_score(&empty, &spec).map_err(|e| e.to_string())?;
    if s.s_t != 0.0 {
        return fail("empty contact set must score exactly 0.0");
    }

    let one_tool = vec![("t".to_string(), vec![1.0, 0.5, 0.2])];
    if hand_score(&one_tool, 2).map_err(|e| e.to_string())? != 0.75 {
        return fail("K=2, T=1 on {1.0, 0.5, 0.2} must give exactly 0.75");
    }
    let three_tools = vec![
        ("a".to_string(), vec![0.9, 0.1]),
        ("b".to_string(), vec![0.6]),
        ("c".to_string(), vec![0.3, 0.2]),
    ];
    if hand_score(&three_tools, 1).map_err(|e| e.to_string())? != ((0.9 + 0.6) + 0.3) / 3.0 {
        return fail("K=1, T=3 on bests {0.9, 0.6, 0.3} must give their mean exactly");
    }
    let zeros = vec![("a".to_string(), vec![0.0, 0.0]), ("b".to_string(), vec![0.0, 0.0])];
    if hand_score(&zeros, 2).map_err(|e| e.to_string())? != 0.0 {
        return fail("all-zero scores must give exactly 0.0");
    }

    // Range invariants over randomized contact sets.
    let dirs = test_directions();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut s_t_values = Vec::with_capacity(1000);
    for case in 0..1000usize {
        let n = rng.gen_range(1..=4);
        let set = synthetic_set((0..n).map(|_| random_contact(&mut rng)).collect());
        let mut alphas = [0.0; 12];
        for (i, d) in dirs.iter().enumerate() {
            alphas[i] = resist_magnitude(&set, d, &spec).map_err(|e| e.to_string())?;
        }
        let score = StabilityScore::from_alphas(&alphas, &spec);
        if !(0.0..=1.0).contains(&score.s_t) {
            return fail(format!("case {case}: S_t = {} out of [0,1]", score.s_t));
        }
        let mean = score.per_direction.iter().sum::<f64>() / 12.0;
        if (score.s_t - mean).abs() > 1e-15 {
            return fail(format!("case {case}: S_t != mean of per-direction values"));
        }
        s_t_values.push(score.s_t);
    }
    // Hand scores assembled from those same randomized grasp scores.
    for (batch, chunk) in s_t_values.chunks(10).enumerate() {
        let per_tool = vec![
            ("first".to_string(), chunk[..5].to_vec()),
            ("second".to_string(), chunk[5..].to_vec()),
        ];
        let s_h = hand_score(&per_tool, 3).map_err(|e| e.to_string())?;
        if !(0.0..=1.0).contains(&s_h) {
            return fail(format!("batch {batch}: S_h = {s_h} out of [0,1]"));
        }
    }
    Ok(())
}

// ---- criterion 2: LP vs brute-force oracle ------------------------------

fn lp_vs_oracle() -> Result<(), String> {
    let dirs = test_directions();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for instance in 0..50usize {
        let n_contacts = rng.gen_range(1..=4);
        let m = rng.gen_range(4..=8);
        let spec = WrenchTestSpec { cone_edges: m, ..WrenchTestSpec::default() };
        let set = synthetic_set((0..n_contacts).map(|_| random_contact(&mut rng)).collect());
        let di = rng.gen_range(0..12);
        let start = Instant::now();
        let lp = resist_magnitude(&set, &dirs[di], &spec).map_err(|e| e.to_string())?;
        let oracle = oracle_alpha(&set, &dirs[di], &spec);
        let elapsed = start.elapsed().as_secs_f64();
        let tol = 1e-3 * spec.alpha_max(di);
        if (lp - oracle).abs() > tol {
            return fail(format!("instance {instance}: LP {lp} vs oracle {oracle}, tol {tol}"));
        }
        if elapsed >= 1.0 {
            return fail(format!("instance {instance} took {elapsed:.3} s"));
        }
    }
    Ok(())
}

// ---- criterion 3: geometry suite over sampled designs -------------------

fn geometry_suite() -> Result<(), String> {
    let space = build_power_grasp_space();
    let config = HandConfig::default();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut built = 0usize;
    for seed in 0..200u64 {
        let point = space.sample_uniform(seed);
        let hand = match assemble_hand(&point, &config) {
            Ok(h) => h,
            // Sampled parameter combinations may describe a hand that
            // cannot be assembled (e.g. digit footprints that do not fit
            // the palm); those score zero in optimization and carry no
            // geometry to check.
            Err(Error::Infeasible(_)) => continue,
            Err(e) => return fail(format!("seed {seed}: unexpected assembly error: {e}")),
        };
        built += 1;

        if !hand.palm_visual.watertight_check() {
            return fail(format!("seed {seed}: palm visual mesh not watertight"));
        }
        for piece in &hand.palm_collision {
            let defect = piece.mesh().convexity_defect();
            if defect > 1e-6 {
                return fail(format!("seed {seed}: palm collider defect {defect} mm"));
            }
        }
        for (digit, chain) in &hand.chains {
            for link in &chain.links {
                if !link.mesh.watertight_check() {
                    return fail(format!("seed {seed}: {digit} {} not watertight", link.name));
                }
                let defect = link.collider.mesh().convexity_defect();
                if defect > 1e-6 {
                    return fail(format!("seed {seed}: {} collider defect {defect} mm", link.name));
                }
            }
        }

        // URDF re-parse: link/joint element counts must match the model.
        let dir = tmp.path().join(format!("hand_{seed}"));
        let doc = urdf::export(&hand, &dir).map_err(|e| e.to_string())?;
        let xml = fs::read_to_string(dir.join("hand.urdf")).map_err(|e| e.to_string())?;
        if xml != doc.xml {
            return fail(format!("seed {seed}: on-disk URDF differs from returned document"));
        }
        let parsed = roxmltree::Document::parse(&xml).map_err(|e| e.to_string())?;
        let links = parsed.descendants().filter(|n| n.has_tag_name("link")).count();
        let joints = parsed.descendants().filter(|n| n.has_tag_name("joint")).count();
        let expect_links = 1 + hand.chains.iter().map(|(_, c)| c.links.len()).sum::<usize>();
        if links != expect_links || joints != hand.joint_count() {
            return fail(format!(
                "seed {seed}: re-parse found {links} links / {joints} joints, \
                 expected {expect_links} / {}",
                hand.joint_count()
            ));
        }

        // Kernel displacement peak on this hand's palm outline.
        let h = rng.gen_range(1.0..5.0);
        let r = rng.gen_range(0.0..1.0);
        let kernel = SurfaceKernel {
            center_angle: rng.gen_range(0.0..360.0),
            center_offset: rng.gen_range(0.0..0.9),
            spread: rng.gen_range(0.1..0.5),
            intensity: r,
        };
        let pad = PadSpec { max_height: h, kernels: vec![kernel.clone()], resolution: 16 };
        let peak = displacement(&pad, &hand.outline, kernel_center(&hand.outline, &kernel));
        if (peak - h * r).abs() > 1e-9 {
            return fail(format!("seed {seed}: kernel peak {peak} vs H*r = {}", h * r));
        }
        let flat = PadSpec { max_height: h, kernels: Vec::new(), resolution: 16 };
        for _ in 0..5 {
            let c = hand.outline.centroid();
            let p = Point3::new(
                c.x + rng.gen_range(-10.0..10.0),
                c.y + rng.gen_range(-10.0..10.0),
                0.0,
            );
            let z = displacement(&flat, &hand.outline, nalgebra::Point2::new(p.x, p.y));
            if z != 0.0 {
                return fail(format!("seed {seed}: zero-kernel displacement {z} != 0"));
            }
        }
    }
    if built < 150 {
        return fail(format!("only {built}/200 sampled designs assembled"));
    }
    Ok(())
}

// ---- criterion 4: STL bit-exactness -------------------------------------

fn stl_bit_exact() -> Result<(), String> {
    let corners: Vec<Point3<f64>> = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { 0.0 } else { 10.0 },
                if i & 2 == 0 { 0.0 } else { 10.0 },
                if i & 4 == 0 { 0.0 } else { 10.0 },
            )
        })
        .collect();
    let cube = convex_hull(&corners).map_err(|e| e.to_string())?;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = tmp.path().join("cube.stl");
    let second = tmp.path().join("cube2.stl");
    write_stl(&cube, &first).map_err(|e| e.to_string())?;
    let bytes = fs::read(&first).map_err(|e| e.to_string())?;
    if bytes.len() != 684 {
        return fail(format!("cube STL is {} bytes, expected 684", bytes.len()));
    }
    let reread = read_stl(&first).map_err(|e| e.to_string())?;
    write_stl(&reread, &second).map_err(|e| e.to_string())?;
    if fs::read(&second).map_err(|e| e.to_string())? != bytes {
        return fail("write->read->write is not byte-identical");
    }
    Ok(())
}

// ---- criterion 5: TPE beats random on the mixed benchmark ---------------

fn tpe_efficacy() -> Result<(), String> {
    let start = Instant::now();
    let params = vec![
        ParamSpec::new("x0", Domain::continuous(0.0, 1.0, ""), "g"),
        ParamSpec::new("x1", Domain::continuous(0.0, 1.0, ""), "g"),
        ParamSpec::new("x2", Domain::continuous(0.0, 1.0, ""), "g"),
        ParamSpec::new("x3", Domain::continuous(0.0, 1.0, ""), "g"),
        ParamSpec::new("x4", Domain::continuous(0.0, 1.0, ""), "g"),
        ParamSpec::new("c0", Domain::categorical(&["bad", "good"]), "g"),
        ParamSpec::new("c1", Domain::categorical(&["p", "q", "r"]), "g"),
    ];
    let space = DesignSpace::new("bench", params).map_err(|e| e.to_string())?;
    let objective = |p: &DesignPoint| -> f64 {
        let targets = [0.2, 0.8, 0.5, 0.35, 0.65];
        let mut s = 0.0;
        for (i, t) in targets.iter().enumerate() {
            let x = p.f64(&format!("x{i}")).unwrap();
            s -= (x - t) * (x - t);
        }
        if p.cat("c0") == Some("good") {
            s += 0.5;
        }
        s += match p.cat("c1") {
            Some("q") => 0.3,
            Some("r") => 0.1,
            _ => 0.0,
        };
        s
    };
    let budget = 150;
    let mut tpe_best = Vec::new();
    let mut rnd_best = Vec::new();
    for seed in 0..20u64 {
        let (best, _) = optimize(|p| Ok(objective(p)), &space, budget, TpeConfig::default(), seed)
            .map_err(|e| e.to_string())?;
        tpe_best.push(best.score);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rb = f64::NEG_INFINITY;
        for _ in 0..budget {
            rb = rb.max(objective(&space.sample_with_rng(&mut rng)));
        }
        rnd_best.push(rb);
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        0.5 * (v[9] + v[10])
    };
    let tm = median(&mut tpe_best);
    let rm = median(&mut rnd_best);
    let elapsed = start.elapsed().as_secs_f64();
    if tm <= rm {
        return fail(format!("TPE median {tm} does not beat random median {rm}"));
    }
    if elapsed >= 30.0 {
        return fail(format!("benchmark took {elapsed:.1} s, budget is 30 s"));
    }
    Ok(())
}

// ---- criterion 6: SHAP local accuracy and brute-force agreement ---------

fn shap_correctness() -> Result<(), String> {
    use gripgen::forest::{fit_forest, Dataset, ForestConfig};

    let mut rng = ChaCha8Rng::seed_from_u64(5150);
    let n = 300usize;
    let m = 8usize;
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let target = 3.0 * row[0] + row[1] * row[2] - 2.0 * (row[3] > 0.2) as i32 as f64
            + 0.5 * row[4].sin()
            + rng.gen_range(-0.05..0.05);
        x.push(row);
        y.push(target);
    }
    let data = Dataset {
        x,
        y,
        columns: (0..m).map(|i| format!("f{i}")).collect(),
        groups: vec!["g".to_string(); m],
    };
    let config = ForestConfig { n_trees: 50, ..ForestConfig::default() };
    let forest = fit_forest(&data, &config, 99).map_err(|e| e.to_string())?;

    for (i, row) in data.x.iter().enumerate() {
        let e = shap_values(&forest, row).map_err(|err| err.to_string())?;
        let gap = (e.base_value + e.phi.iter().sum::<f64>() - e.prediction).abs();
        if gap > 1e-9 {
            return fail(format!("row {i}: local accuracy gap {gap}"));
        }
        if i < 60 {
            let (base, phi) = shapley_brute_force(&forest, row);
            if (base - e.base_value).abs() > 1e-6 {
                return fail(format!("row {i}: base {} vs brute-force {base}", e.base_value));
            }
            for j in 0..m {
                let diff = (phi[j] - e.phi[j]).abs();
                if diff > 1e-6 {
                    return fail(format!("row {i} feature {j}: phi differs by {diff}"));
                }
            }
        }
    }
    Ok(())
}

// ---- criteria 7 and 8: full pipeline through the binary -----------------

fn run_cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_gripgen"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "gripgen {} failed ({}): {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn desk_scale_run() -> Result<(), String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path().join("desk");
    run_cli(&["optimize-hand", "--out", dir.to_str().unwrap(), "--seed", "0", "--budget", "200"])?;

    // (a) Non-decreasing best-score curve.
    let curve = fs::read_to_string(dir.join("curve.csv")).map_err(|e| e.to_string())?;
    let mut prev = f64::NEG_INFINITY;
    let mut rows = 0usize;
    for line in curve.lines().skip(1) {
        let best: f64 = line
            .split(',')
            .nth(2)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| format!("malformed curve row: {line}"))?;
        if best < prev {
            return fail(format!("best-so-far decreases: {prev} -> {best}"));
        }
        prev = best;
        rows += 1;
    }
    if rows != 50 {
        return fail(format!("curve has {rows} batch rows, expected 50"));
    }

    // (b) finger_number = 3 dominates the top decile.
    let journal =
        gripgen_cli::journal::read_journal(&dir.join("trials.jsonl")).map_err(|e| e.to_string())?;
    if journal.len() != 200 {
        return fail(format!("journal has {} trials, expected 200", journal.len()));
    }
    let mut by_score: Vec<_> = journal.iter().collect();
    by_score.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap().then(a.trial.cmp(&b.trial)));
    let decile = &by_score[..20];
    let three = decile.iter().filter(|l| l.point.cat("finger_number") == Some("3")).count();
    if three < 16 {
        return fail(format!("finger_number = 3 in only {three}/20 top-decile designs"));
    }
    Ok(())
}

fn reproducibility() -> Result<(), String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let args = |dir: &Path| -> Vec<String> {
        [
            "optimize-hand",
            "--out",
            dir.to_str().unwrap(),
            "--seed",
            "3",
            "--budget",
            "32",
            "--set",
            "inner_budget=6",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()
    };
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let argv = args(dir);
        let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
        run_cli(&argv)?;
        run_cli(&["analyze", "--run", dir.to_str().unwrap()])?;
    }
    for rel in
        ["trials.jsonl", "curve.csv", "report/shap.csv", "report/importance.csv", "report/shap_long.csv"]
    {
        let x = fs::read(a.join(rel)).map_err(|e| format!("{rel}: {e}"))?;
        let y = fs::read(b.join(rel)).map_err(|e| format!("{rel}: {e}"))?;
        if x != y {
            return fail(format!("{rel} differs between identical runs"));
        }
    }
    Ok(())
}

// ---- supporting artifact: shipped design-space document -----------------

fn space_artifact() -> Result<(), String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../space/power_grasp_v1.json");
    let text = fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let space = DesignSpace::from_json(&doc).map_err(|e| e.to_string())?;
    if space.to_json() != build_power_grasp_space().to_json() {
        return fail("shipped space document drifted from the builtin definition");
    }
    Ok(())
}

#[test]
fn acceptance() {
    let mut gate = Gate::default();
    gate.check("scoring-arithmetic-and-ranges", score_arithmetic());
    gate.check("lp-vs-oracle", lp_vs_oracle());
    gate.check("geometry-suite", geometry_suite());
    gate.check("stl-bit-exactness", stl_bit_exact());
    gate.check("tpe-efficacy", tpe_efficacy());
    gate.check("shap-correctness", shap_correctness());
    gate.check("desk-scale-run", desk_scale_run());
    gate.check("reproducibility", reproducibility());
    gate.check("space-artifact", space_artifact());
    assert!(gate.failures.is_empty(), "acceptance failures:\n{}", gate.failures.join("\n"));
}
