//! Command-line front end: seeded Monte Carlo tracking runs with a chosen
//! dependence structure, per-run artifact tables (measurements, tracks,
//! overtakes, per-frame statistics, hypothesis tree), an aggregate summary,
//! and an optional brute-force oracle cross-check.

mod artifacts;
mod oracle;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use onelane_core::filter::FilterError;
use onelane_core::runner::{run_batch, RunOutput, RunSummary};

use crate::settings::{parse_structure, Settings, StructureKind};

/// One-lane multi-target tracker: simulate, track, and export artifacts.
///
/// Settings are resolved in order: built-in defaults, then `--config`
/// key=value file, then flags; `ONELANE_OUT_DIR` overrides the output
/// directory last.
#[derive(Debug, Parser)]
#[command(name = "onelane", version)]
struct Cli {
    /// Flat key=value settings file (`#` comments; keys match flag names,
    /// plus filter knobs such as pd, gate, clutter_intensity, duration).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dependence structure: independence, collision, or occlusion.
    #[arg(long)]
    structure: Option<String>,
    /// Base seed; run i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Monte Carlo runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Maximum hypotheses kept per frame.
    #[arg(long)]
    k: Option<usize>,
    /// Generations included in the exported hypothesis tree.
    #[arg(long)]
    tree_generations: Option<usize>,
    /// Artifact root; each run writes into `<out-dir>/run-NN`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Cross-check each frame against exhaustive child enumeration
    /// (clips the horizon and hypothesis count to keep that tractable).
    #[arg(long)]
    oracle: bool,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let collapsed = err
                .downcast_ref::<FilterError>()
                .is_some_and(|e| matches!(e, FilterError::EmptyPosterior { .. }));
            ExitCode::from(if collapsed { 2 } else { 1 })
        }
    }
}

fn resolve_settings(cli: &Cli) -> Result<Settings> {
    let mut settings = Settings::default();
    if let Some(path) = &cli.config {
        settings.apply_config_file(path)?;
    }
    if let Some(value) = &cli.structure {
        settings.structure = parse_structure(value)?;
    }
    if let Some(seed) = cli.seed {
        settings.seed = seed;
    }
    if let Some(runs) = cli.runs {
        settings.runs = runs;
    }
    if let Some(k) = cli.k {
        settings.k = k;
    }
    if let Some(generations) = cli.tree_generations {
        settings.tree_generations = generations;
    }
    if let Some(dir) = &cli.out_dir {
        settings.out_dir = dir.clone();
    }
    if let Ok(dir) = std::env::var("ONELANE_OUT_DIR") {
        settings.out_dir = PathBuf::from(dir);
    }
    settings.validate()?;
    Ok(settings)
}

fn run(cli: Cli) -> Result<()> {
    let settings = resolve_settings(&cli)?;
    let seeds: Vec<u64> = (0..settings.runs).map(|i| settings.seed + i as u64).collect();

    let results: Vec<Result<RunOutput, FilterError>> = if cli.oracle {
        let mut out = Vec::with_capacity(seeds.len());
        for &seed in &seeds {
            let (run, report) = oracle::run_with_oracle(&settings, seed)
                .with_context(|| format!("oracle check failed for seed {seed}"))?;
            println!(
                "oracle seed {seed}: {} frames, {} selected hypotheses match brute force",
                report.frames, report.hypotheses_checked
            );
            out.push(Ok(run));
        }
        out
    } else {
        let base = settings.scenario(settings.seed);
        run_batch(&seeds, &base, &settings.filter_config())
    };

    let mut rows: Vec<(usize, u64, RunSummary)> = Vec::new();
    let mut collapse: Option<FilterError> = None;
    for (i, (seed, result)) in seeds.iter().zip(results).enumerate() {
        let run_index = i + 1;
        match result {
            Ok(run) => {
                let dir = settings.out_dir.join(format!("run-{run_index:02}"));
                artifacts::write_run_artifacts(&dir, &run, settings.tree_generations)?;
                let summary = run.summary();
                println!(
                    "run {run_index:02} (seed {seed}, {}): frames {}, final hypotheses {}, \
                     proposals/frame {:.1}, certificate rate {:.3}, overtakes {}",
                    structure_name(settings.structure),
                    summary.frames,
                    summary.final_hypotheses,
                    summary.mean_proposals_per_frame,
                    summary.certificate_rate,
                    summary.overtakes
                );
                rows.push((run_index, *seed, summary));
            }
            Err(err) => {
                eprintln!("run {run_index:02} (seed {seed}) failed: {err}");
                collapse.get_or_insert(err);
            }
        }
    }

    if !rows.is_empty() {
        std::fs::create_dir_all(&settings.out_dir)
            .with_context(|| format!("cannot create {}", settings.out_dir.display()))?;
        let path = settings.out_dir.join("summary.csv");
        std::fs::write(&path, artifacts::aggregate_summary_table(&rows))
            .with_context(|| format!("cannot write {}", path.display()))?;
        let total: usize = rows.iter().map(|(_, _, s)| s.overtakes).sum();
        println!("total overtakes across {} runs: {total}", rows.len());
        println!("artifacts: {}", settings.out_dir.display());
    }

    if let Some(err) = collapse {
        return Err(err.into());
    }
    Ok(())
}

fn structure_name(kind: StructureKind) -> &'static str {
    match kind {
        StructureKind::Independence => "independence",
        StructureKind::Collision => "collision",
        StructureKind::Occlusion => "occlusion",
    }
}
