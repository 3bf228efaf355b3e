//! Artifact tables written per run, plus the aggregate summary. All
//! tables are plain comma-separated text with a header row; identical
//! configuration and seed produce identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use onelane_core::filter::best_estimate;
use onelane_core::runner::{RunOutput, RunSummary};
use onelane_core::tree::export_tree;

/// Writes the five per-run tables into `dir` (created if needed).
pub fn write_run_artifacts(dir: &Path, run: &RunOutput, tree_generations: usize) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create run directory {}", dir.display()))?;
    write_file(dir, "measurements.csv", measurements_table(run))?;
    write_file(dir, "tracks.csv", tracks_table(run))?;
    write_file(dir, "overtakes.csv", overtakes_table(run))?;
    write_file(dir, "summary.csv", frame_summary_table(run))?;
    let final_frame = run.states.last().map_or(0, |s| s.frame);
    write_file(dir, "tree.dot", export_tree(&run.history, final_frame, tree_generations))?;
    Ok(())
}

fn write_file(dir: &Path, name: &str, contents: String) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
}

/// True target positions and received measurements, interleaved by frame.
/// `index` is the target index for truth rows and the measurement's
/// position in the frame for measurement rows.
fn measurements_table(run: &RunOutput) -> String {
    let mut out = String::from("frame,source,index,position\n");
    for frame in &run.frames {
        for (i, target) in run.scenario.targets.iter().enumerate() {
            if let Some(pos) = target.position_at(frame.frame) {
                let _ = writeln!(out, "{},truth,{},{}", frame.frame, i, pos);
            }
        }
        for (j, z) in frame.measurements.iter().enumerate() {
            let _ = writeln!(out, "{},measurement,{},{}", frame.frame, j, z);
        }
    }
    out
}

/// Best-estimate tracks: one row per (frame, label) in the highest-weighted
/// hypothesis, with that hypothesis' posterior weight.
fn tracks_table(run: &RunOutput) -> String {
    let mut out = String::from("frame,label,position_mean,position_std,best_weight\n");
    for state in &run.states {
        let best_weight =
            state.hypotheses.iter().map(|h| h.log_weight).fold(f64::NEG_INFINITY, f64::max).exp();
        for (label, gaussian) in best_estimate(state) {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                state.frame,
                label,
                gaussian.mean[0],
                gaussian.position_std(),
                best_weight
            );
        }
    }
    out
}

fn overtakes_table(run: &RunOutput) -> String {
    let mut out = String::from("frame,label_a,label_b\n");
    for (frame, a, b) in &run.overtakes {
        let _ = writeln!(out, "{frame},{a},{b}");
    }
    out
}

/// Per-frame filter statistics.
fn frame_summary_table(run: &RunOutput) -> String {
    let mut out = String::from(
        "frame,hypotheses,parents,proposals_consumed,children_selected,certified_selected,capped_streams\n",
    );
    for state in &run.states {
        let s = &state.stats;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            state.frame,
            state.hypotheses.len(),
            s.parents,
            s.proposals_consumed,
            s.children_selected,
            s.certified_selected,
            s.capped_streams
        );
    }
    out
}

/// One row per run plus a trailing totals row; the totals row carries the
/// summed proposal, capped-stream, and overtake counts.
pub fn aggregate_summary_table(rows: &[(usize, u64, RunSummary)]) -> String {
    let mut out = String::from(
        "run,seed,frames,final_hypotheses,mean_hypotheses,proposals_total,\
         mean_proposals_per_frame,certificate_rate,capped_streams,overtakes\n",
    );
    for (run, seed, s) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            run,
            seed,
            s.frames,
            s.final_hypotheses,
            s.mean_hypotheses,
            s.proposals_total,
            s.mean_proposals_per_frame,
            s.certificate_rate,
            s.capped_streams,
            s.overtakes
        );
    }
    let proposals: usize = rows.iter().map(|(_, _, s)| s.proposals_total).sum();
    let capped: usize = rows.iter().map(|(_, _, s)| s.capped_streams).sum();
    let overtakes: usize = rows.iter().map(|(_, _, s)| s.overtakes).sum();
    let _ = writeln!(out, "total,,,,,{proposals},,,{capped},{overtakes}");
    out
}
