//! The outer design-optimization loop (`optimize-hand`) and the shared
//! per-design evaluation used by `evaluate`.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use gripgen::grasp::{default_bounds, hand_score, optimize_grasp_with};
use gripgen::hand::{assemble_hand, HandConfig};
use gripgen::space::DesignPoint;
use gripgen::tools::ToolModel;
use gripgen::tpe::{Optimizer, TpeConfig};
use gripgen::urdf;

use crate::config::RunConfig;
use crate::design::DesignFile;
use crate::error::{config_err, invariant_err, CliError, CliResult};
use crate::journal::{append_lines, read_journal, JournalLine};

const TRIAL_MIX: u64 = 0x9E37_79B9_7F4A_7C15;
const TOOL_MIX: u64 = 0xA076_1D64_78BD_642F;

/// Per-trial evaluation seed, a pure function of (master seed, index).
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    master ^ (trial as u64 + 1).wrapping_mul(TRIAL_MIX)
}

/// Per-tool inner-loop seed within one trial.
pub fn tool_seed(trial_seed: u64, tool_index: usize) -> u64 {
    trial_seed ^ (tool_index as u64 + 1).wrapping_mul(TOOL_MIX)
}

/// One design's full evaluation: inner grasp optimization per tool.
pub struct DesignEval {
    /// Eq.-2-style hand score over the K best grasps per tool.
    pub s_h: f64,
    /// (tool name, best grasp score, all trial scores).
    pub per_tool: Vec<(String, f64, Vec<f64>)>,
}

pub fn evaluate_design(
    point: &DesignPoint,
    config: &RunConfig,
    tools: &[ToolModel],
    seed: u64,
) -> gripgen::Result<DesignEval> {
    let hand_config = HandConfig { pad_resolution: config.resolution, ..Default::default() };
    let hand = assemble_hand(point, &hand_config)?;
    let bounds = default_bounds(&hand);
    let mut per_tool = Vec::with_capacity(tools.len());
    let mut score_lists = Vec::with_capacity(tools.len());
    for (ti, tool) in tools.iter().enumerate() {
        let outcome = optimize_grasp_with(
            &hand,
            tool,
            config.inner_budget,
            tool_seed(seed, ti),
            &bounds,
            &config.closing,
            &config.wrench,
        )?;
        let scores: Vec<f64> = outcome.history.iter().map(|t| t.score).collect();
        per_tool.push((tool.name.clone(), outcome.score, scores.clone()));
        score_lists.push((tool.name.clone(), scores));
    }
    let s_h = hand_score(&score_lists, config.k_best)?;
    Ok(DesignEval { s_h, per_tool })
}

/// The `curve.csv` text a journal implies: one row per batch with the
/// batch mean and the running best.
pub fn curve_text(lines: &[JournalLine], batch: usize) -> String {
    let mut text = String::from("iteration,batch_mean,best_so_far\n");
    let mut best = f64::NEG_INFINITY;
    for (bi, chunk) in lines.chunks(batch).enumerate() {
        let mean = chunk.iter().map(|l| l.score).sum::<f64>() / chunk.len() as f64;
        for l in chunk {
            best = best.max(l.score);
        }
        text.push_str(&format!("{},{},{}\n", bi + 1, mean, best));
    }
    text
}

/// Rewrites `curve.csv` from the journal.
pub fn write_curve(out_dir: &Path, lines: &[JournalLine], batch: usize) -> CliResult<()> {
    fs::write(out_dir.join("curve.csv"), curve_text(lines, batch))?;
    Ok(())
}

fn export_top_designs(out_dir: &Path, lines: &[JournalLine], config: &RunConfig) -> CliResult<()> {
    let mut order: Vec<usize> = (0..lines.len()).collect();
    order.sort_by(|&a, &b| {
        lines[b].score.partial_cmp(&lines[a].score).unwrap().then(lines[a].trial.cmp(&lines[b].trial))
    });
    for &i in order.iter().take(config.top_designs) {
        let line = &lines[i];
        let dir = out_dir.join("designs").join(format!("trial_{:04}", line.trial));
        let hand_config = HandConfig { pad_resolution: config.resolution, ..Default::default() };
        let hand = match assemble_hand(&line.point, &hand_config) {
            Ok(h) => h,
            // Infeasible designs carry score 0 and only reach the top of
            // a run where nothing scored; skip the export rather than fail.
            Err(_) => continue,
        };
        fs::create_dir_all(&dir)?;
        urdf::export(&hand, &dir).map_err(|e| CliError::Internal(e.to_string()))?;
        DesignFile {
            point: line.point.clone(),
            resolution: config.resolution,
            score: Some(line.score),
            trial: Some(line.trial),
        }
        .write(&dir)?;
    }
    Ok(())
}

/// Runs (or resumes) the outer TPE loop in `out_dir`.
pub fn cmd_optimize_hand(out_dir: &Path, config: &RunConfig, jobs: usize) -> CliResult<()> {
    config.validate()?;
    let space = config.resolve_space()?;
    let tools = config.resolve_tools()?;
    fs::create_dir_all(out_dir)?;

    // Snapshot the config, or verify it matches a previous snapshot.
    let config_path = out_dir.join("config.json");
    let mut rendered =
        serde_json::to_string_pretty(config).map_err(|e| CliError::Internal(e.to_string()))?;
    rendered.push('\n');
    if config_path.exists() {
        let prior = RunConfig::load(&config_path)?;
        if &prior != config {
            return config_err(
                "resume conflict: requested config differs from the run's config.json snapshot",
            );
        }
    } else {
        fs::write(&config_path, &rendered)?;
    }

    let journal_path = out_dir.join("trials.jsonl");
    let mut lines: Vec<JournalLine> =
        if journal_path.exists() { read_journal(&journal_path)? } else { Vec::new() };
    if lines.len() > config.budget {
        return config_err(format!(
            "journal already holds {} trials but the budget is {}",
            lines.len(),
            config.budget
        ));
    }
    // Batches are appended atomically, so a valid journal always ends on
    // a batch boundary (or at the budget).
    if lines.len() % config.batch != 0 && lines.len() != config.budget {
        return invariant_err(format!(
            "journal ends mid-batch ({} trials, batch size {})",
            lines.len(),
            config.batch
        ));
    }
    for l in &lines {
        space
            .validate(&l.point)
            .map_err(|e| CliError::Invariant(format!("journal trial {}: {e}", l.trial)))?;
    }

    let mut opt = Optimizer::new(space.clone(), TpeConfig::default(), config.seed)
        .map_err(|e| CliError::Config(e.to_string()))?
        .with_history(lines.iter().map(JournalLine::to_record).collect());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;

    while opt.history().len() < config.budget {
        let start = opt.history().len();
        let size = config.batch.min(config.budget - start);
        let points = opt.propose_batch(size);
        let results: Vec<(f64, String)> = pool.install(|| {
            points
                .par_iter()
                .enumerate()
                .map(|(k, point)| {
                    match evaluate_design(point, config, &tools, trial_seed(config.seed, start + k))
                    {
                        Ok(ev) => (ev.s_h, String::new()),
                        Err(_) => (0.0, "infeasible".to_string()),
                    }
                })
                .collect()
        });
        let mut batch_lines = Vec::with_capacity(size);
        for (k, (point, (score, tag))) in points.iter().zip(&results).enumerate() {
            if !(0.0..=1.0).contains(score) {
                return invariant_err(format!("trial {} scored {} outside [0,1]", start + k, score));
            }
            batch_lines.push(JournalLine {
                trial: start + k,
                point: point.clone(),
                score: *score,
                seed: trial_seed(config.seed, start + k),
                timestamp: 0.0,
                tag: tag.clone(),
            });
        }
        append_lines(&journal_path, &batch_lines)?;
        for l in &batch_lines {
            opt.record(l.to_record());
        }
        lines.extend(batch_lines);
        write_curve(out_dir, &lines, config.batch)?;
        let done = lines.len();
        let best = lines.iter().map(|l| l.score).fold(f64::NEG_INFINITY, f64::max);
        println!("trial {done}/{}: best S_h = {best}", config.budget);
    }

    write_curve(out_dir, &lines, config.batch)?;
    export_top_designs(out_dir, &lines, config)?;
    let best = lines
        .iter()
        .max_by(|a, b| a.score.partial_cmp(&b.score).unwrap().then(b.trial.cmp(&a.trial)))
        .expect("budget >= 1");
    println!(
        "done: {} trials, best S_h = {} at trial {}",
        lines.len(),
        best.score,
        best.trial
    );
    Ok(())
}
