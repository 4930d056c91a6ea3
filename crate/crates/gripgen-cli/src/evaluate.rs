//! `evaluate`: score one exported hand across a tool set, and
//! `optimize-grasp`: search grasps for a single hand/tool pair.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use gripgen::grasp::{default_bounds, hand_score, optimize_grasp_with};
use gripgen::space::DesignPoint;

use crate::config::{lookup_tool, RunConfig};
use crate::design::DesignFile;
use crate::error::{config_err, CliError, CliResult};
use crate::journal::{append_lines, JournalLine};
use crate::run::tool_seed;

/// One grasp trial in an evaluation journal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalLine {
    pub tool: String,
    pub trial: usize,
    pub point: DesignPoint,
    pub score: f64,
    pub seed: u64,
    /// Always 0.0 (reproducibility contract, same as `trials.jsonl`).
    pub timestamp: f64,
}

fn load_hand(hand_dir: &Path) -> CliResult<(DesignFile, gripgen::hand::HandModel)> {
    if !hand_dir.join("hand.urdf").exists() {
        return config_err(format!("missing URDF: {}", hand_dir.join("hand.urdf").display()));
    }
    let design = DesignFile::load(hand_dir)?;
    let hand = design.assemble()?;
    Ok((design, hand))
}

pub fn cmd_evaluate(
    hand_dir: &Path,
    tool_names: &[String],
    budget: usize,
    seed: u64,
    k_best: usize,
) -> CliResult<()> {
    if budget < 1 || k_best < 1 {
        return config_err("budget and k-best must be at least 1");
    }
    let (_, hand) = load_hand(hand_dir)?;
    let tools: Vec<_> = tool_names.iter().map(|n| lookup_tool(n)).collect::<CliResult<_>>()?;
    if tools.is_empty() {
        return config_err("at least one tool required");
    }
    let defaults = RunConfig::default();
    let bounds = default_bounds(&hand);
    // Eq. 2 needs K grasps per tool; a smaller budget caps K.
    let k = k_best.min(budget);

    let mut journal: Vec<EvalLine> = Vec::new();
    let mut score_lists = Vec::new();
    for (ti, tool) in tools.iter().enumerate() {
        let outcome = optimize_grasp_with(
            &hand,
            tool,
            budget,
            tool_seed(seed, ti),
            &bounds,
            &defaults.closing,
            &defaults.wrench,
        )?;
        println!("{}: best S_t = {}", tool.name, outcome.score);
        for (i, t) in outcome.history.iter().enumerate() {
            journal.push(EvalLine {
                tool: tool.name.clone(),
                trial: i,
                point: t.point.clone(),
                score: t.score,
                seed: tool_seed(seed, ti),
                timestamp: 0.0,
            });
        }
        score_lists
            .push((tool.name.clone(), outcome.history.iter().map(|t| t.score).collect::<Vec<_>>()));
    }
    let s_h = hand_score(&score_lists, k)?;

    // Rewritten (not appended) every run: reruns with the same seed must
    // leave byte-identical journals.
    let mut text = String::new();
    for line in &journal {
        text.push_str(&serde_json::to_string(line).map_err(|e| CliError::Internal(e.to_string()))?);
        text.push('\n');
    }
    fs::write(hand_dir.join("evaluations.jsonl"), text)?;
    println!("S_h (K = {k}, T = {}) = {s_h}", tools.len());
    Ok(())
}

pub fn cmd_optimize_grasp(
    hand_dir: &Path,
    tool_name: &str,
    budget: usize,
    seed: u64,
    out: Option<&Path>,
) -> CliResult<()> {
    if budget < 1 {
        return config_err("budget must be at least 1");
    }
    let (_, hand) = load_hand(hand_dir)?;
    let tool = lookup_tool(tool_name)?;
    let defaults = RunConfig::default();
    let outcome = optimize_grasp_with(
        &hand,
        &tool,
        budget,
        seed,
        &default_bounds(&hand),
        &defaults.closing,
        &defaults.wrench,
    )?;

    let out_dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| hand_dir.join(format!("grasp_{tool_name}")));
    fs::create_dir_all(&out_dir)?;
    let lines: Vec<JournalLine> = outcome
        .history
        .iter()
        .enumerate()
        .map(|(i, t)| JournalLine {
            trial: i,
            point: t.point.clone(),
            score: t.score,
            seed,
            timestamp: 0.0,
            tag: t.tag.clone(),
        })
        .collect();
    let journal_path = out_dir.join("trials.jsonl");
    if journal_path.exists() {
        fs::remove_file(&journal_path)?;
    }
    append_lines(&journal_path, &lines)?;

    let best = outcome
        .history
        .iter()
        .max_by(|a, b| a.score.partial_cmp(&b.score).unwrap())
        .expect("budget >= 1");
    let best_doc = serde_json::json!({ "score": best.score, "point": best.point });
    let mut text =
        serde_json::to_string_pretty(&best_doc).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    fs::write(out_dir.join("best.json"), text)?;
    println!("{tool_name}: best S_t = {} over {budget} grasps -> {}", outcome.score, out_dir.display());
    Ok(())
}

pub fn default_grasp_out(hand_dir: &Path, tool: &str) -> PathBuf {
    hand_dir.join(format!("grasp_{tool}"))
}
