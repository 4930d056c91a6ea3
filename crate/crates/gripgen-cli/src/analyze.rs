//! `analyze`: fit the Random-Forest surrogate on a run's journal and
//! emit Shapley attribution reports, plus `report`: summarize a run.

use std::fs;
use std::path::Path;

use gripgen::forest::{fit_forest, is_missing, Dataset, ForestConfig};
use gripgen::shap::{group_importance, shap_values, Explanation};

use crate::config::RunConfig;
use crate::error::{config_err, invariant_err, CliError, CliResult};
use crate::journal::{read_journal, JournalLine};
use crate::run::curve_text;

pub const MIN_TRIALS: usize = 30;

/// Builds the surrogate dataset from a journal: rows in trial order,
/// columns in the space's encoding order, NaN for inactive parameters.
pub fn journal_dataset(
    lines: &[JournalLine],
    space: &gripgen::space::DesignSpace,
) -> CliResult<Dataset> {
    let mut x = Vec::with_capacity(lines.len());
    let mut y = Vec::with_capacity(lines.len());
    for l in lines {
        space
            .validate(&l.point)
            .map_err(|e| CliError::Invariant(format!("journal trial {}: {e}", l.trial)))?;
        x.push(space.encode(&l.point));
        y.push(l.score);
    }
    let dataset = Dataset {
        x,
        y,
        columns: space.column_names(),
        groups: space.params().iter().map(|p| p.group.clone()).collect(),
    };
    dataset.validate().map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(dataset)
}

pub fn cmd_analyze(run_dir: &Path) -> CliResult<()> {
    let config = RunConfig::load(&run_dir.join("config.json"))?;
    let journal_path = run_dir.join("trials.jsonl");
    if !journal_path.exists() {
        return config_err(format!("no journal at {}", journal_path.display()));
    }
    let lines = read_journal(&journal_path)?;
    if lines.len() < MIN_TRIALS {
        return config_err(format!(
            "journal too small: {} trials, analysis needs at least {MIN_TRIALS}",
            lines.len()
        ));
    }
    let space = config.resolve_space()?;
    let dataset = journal_dataset(&lines, &space)?;
    let forest = fit_forest(&dataset, &ForestConfig::default(), config.seed)
        .map_err(|e| CliError::Internal(e.to_string()))?;

    let mut explanations: Vec<Explanation> = Vec::with_capacity(dataset.n_rows());
    for (i, row) in dataset.x.iter().enumerate() {
        let e = shap_values(&forest, row).map_err(|err| CliError::Internal(err.to_string()))?;
        let gap = (e.base_value + e.phi.iter().sum::<f64>() - e.prediction).abs();
        if gap > 1e-9 {
            return invariant_err(format!("local accuracy violated on trial {i}: gap {gap}"));
        }
        explanations.push(e);
    }
    let (groups, features) =
        group_importance(&explanations, &dataset).map_err(|e| CliError::Internal(e.to_string()))?;

    let report_dir = run_dir.join("report");
    fs::create_dir_all(&report_dir)?;

    // shap.csv: rows = trials, cols = phi per parameter + base + prediction.
    let mut shap_csv = String::from("trial");
    for name in &dataset.columns {
        shap_csv.push_str(&format!(",phi_{name}"));
    }
    shap_csv.push_str(",base_value,prediction\n");
    for (i, e) in explanations.iter().enumerate() {
        shap_csv.push_str(&format!("{}", lines[i].trial));
        for phi in &e.phi {
            shap_csv.push_str(&format!(",{phi}"));
        }
        shap_csv.push_str(&format!(",{},{}\n", e.base_value, e.prediction));
    }
    fs::write(report_dir.join("shap.csv"), shap_csv)?;

    // importance.csv: ranked groups, then ranked features.
    let mut imp_csv = String::from("kind,name,group,importance,correlation\n");
    for g in &groups {
        imp_csv.push_str(&format!("group,{},{},{},\n", g.group, g.group, g.importance));
    }
    for f in &features {
        imp_csv.push_str(&format!(
            "feature,{},{},{},{}\n",
            f.feature, f.group, f.mean_abs_phi, f.phi_value_correlation
        ));
    }
    fs::write(report_dir.join("importance.csv"), imp_csv)?;

    // Plot-ready long format; inactive parameters flagged with active=0
    // and an empty value cell.
    let mut long_csv = String::from("trial,parameter,group,value,phi,active\n");
    for (i, e) in explanations.iter().enumerate() {
        for (j, name) in dataset.columns.iter().enumerate() {
            let v = dataset.x[i][j];
            let (value, active) =
                if is_missing(v) { (String::new(), 0) } else { (format!("{v}"), 1) };
            long_csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                lines[i].trial, name, dataset.groups[j], value, e.phi[j], active
            ));
        }
    }
    fs::write(report_dir.join("shap_long.csv"), long_csv)?;

    println!("analyzed {} trials; group ranking:", lines.len());
    for g in &groups {
        println!("  {} = {}", g.group, g.importance);
    }
    Ok(())
}

pub fn cmd_report(run_dir: &Path) -> CliResult<()> {
    let config = RunConfig::load(&run_dir.join("config.json"))?;
    let journal_path = run_dir.join("trials.jsonl");
    if !journal_path.exists() {
        return config_err(format!("no journal at {}", journal_path.display()));
    }
    let lines = read_journal(&journal_path)?;
    if lines.is_empty() {
        return config_err("journal is empty");
    }

    // Cross-check curve.csv against the journal; a mismatch means the
    // run directory was corrupted or hand-edited.
    let curve_path = run_dir.join("curve.csv");
    if curve_path.exists() {
        let on_disk = fs::read_to_string(&curve_path)?;
        if on_disk != curve_text(&lines, config.batch) {
            return invariant_err("curve.csv does not match the journal");
        }
        let mut prev = f64::NEG_INFINITY;
        for row in on_disk.lines().skip(1) {
            let best: f64 = row
                .split(',')
                .nth(2)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| CliError::Invariant("malformed curve.csv row".into()))?;
            if best < prev {
                return invariant_err("best-so-far column decreases");
            }
            prev = best;
        }
    }

    let best = lines
        .iter()
        .max_by(|a, b| a.score.partial_cmp(&b.score).unwrap().then(b.trial.cmp(&a.trial)))
        .expect("non-empty journal");
    println!("run {}", run_dir.display());
    println!("trials: {} / {} (batch {})", lines.len(), config.budget, config.batch);
    println!("tools: {}", config.tools.join(", "));
    println!("best S_h = {} at trial {}", best.score, best.trial);
    println!("best design:");
    for (name, value) in &best.point.values {
        println!("  {name} = {value}");
    }
    let importance = run_dir.join("report/importance.csv");
    if importance.exists() {
        println!("top groups:");
        for row in fs::read_to_string(&importance)?
            .lines()
            .skip(1)
            .filter(|r| r.starts_with("group,"))
            .take(3)
        {
            let mut cols = row.split(',');
            let name = cols.nth(1).unwrap_or("?");
            let imp = cols.nth(1).unwrap_or("?");
            println!("  {name} = {imp}");
        }
    } else {
        println!("no report yet; run `gripgen analyze --run {}`", run_dir.display());
    }
    Ok(())
}
