//! Oracle mode: replays the filter on a short horizon while re-deriving
//! every frame's selection by brute force — exhaustive child enumeration
//! for each parent, merged and truncated — and asserts the filter picked
//! exactly that set with the same weights.

use anyhow::{bail, Result};
use onelane_core::filter::{prediction_problem, step, FilterState};
use onelane_core::hypothesis::Hypothesis;
use onelane_core::oracle::enumerate_children;
use onelane_core::runner::RunOutput;
use onelane_core::simulator::{generate_frame, rng_for_seed};

use crate::settings::Settings;

/// Horizon and hypothesis-count ceilings that keep exhaustive enumeration
/// tractable (children grow combinatorially in frames and measurements).
const MAX_ORACLE_FRAMES: usize = 8;
const MAX_ORACLE_HYPOTHESES: usize = 8;

pub struct OracleReport {
    pub frames: usize,
    pub hypotheses_checked: usize,
}

/// Runs the oracle-instrumented tracker for one seed. Returns the regular
/// run output (so artifacts can be written as usual) plus a tally of the
/// per-frame equality checks that passed.
pub fn run_with_oracle(settings: &Settings, seed: u64) -> Result<(RunOutput, OracleReport)> {
    let mut clipped = settings.clone();
    clipped.duration = clipped.duration.min(MAX_ORACLE_FRAMES);
    clipped.k = clipped.k.min(MAX_ORACLE_HYPOTHESES);
    let scenario = clipped.scenario(seed);
    let config = clipped.filter_config();
    config.validate()?;
    let model = config.sensor_model();

    let mut rng = rng_for_seed(scenario.seed);
    let frames: Vec<_> =
        (0..scenario.duration).map(|f| generate_frame(&scenario, f, &mut rng)).collect();

    let mut state = FilterState::new();
    let mut states = Vec::with_capacity(frames.len());
    let mut checked = 0usize;
    for frame in &frames {
        // Expected top-K before stepping: every child of every parent,
        // highest true weight first; ties keep parent order, and within a
        // parent the enumeration order (which matches proposal order).
        let mut expected: Vec<Hypothesis> = Vec::new();
        for parent in &state.hypotheses {
            let (tracks, costs, legend) = prediction_problem(parent, frame, &config);
            expected.extend(enumerate_children(
                parent,
                &costs,
                &legend,
                &tracks,
                &config.structure,
                frame,
                &model,
            ));
        }
        expected.sort_by(|a, b| b.log_weight.total_cmp(&a.log_weight));
        expected.truncate(config.max_hypotheses);
        let norm = log_sum_exp(expected.iter().map(|h| h.log_weight));

        state = step(&state, frame, &config)?;

        if state.hypotheses.len() != expected.len() {
            bail!(
                "oracle mismatch at frame {}: filter kept {} hypotheses, oracle expects {}",
                frame.frame,
                state.hypotheses.len(),
                expected.len()
            );
        }
        for (got, want) in state.hypotheses.iter().zip(&expected) {
            let want_weight = want.log_weight - norm;
            if got.parent_id != want.parent_id
                || got.associations != want.associations
                || (got.log_weight - want_weight).abs() > 1e-9
            {
                bail!(
                    "oracle mismatch at frame {}: filter selected parent {:?} / weight {:.12e}, \
                     oracle expects parent {:?} / weight {:.12e}",
                    frame.frame,
                    got.parent_id,
                    got.log_weight,
                    want.parent_id,
                    want_weight
                );
            }
            checked += 1;
        }
        states.push(state.snapshot());
    }

    let overtakes = onelane_core::filter::detect_overtakes(&states);
    let history = std::mem::take(&mut state.history);
    let report = OracleReport { frames: frames.len(), hypotheses_checked: checked };
    Ok((RunOutput { scenario, frames, states, history, overtakes }, report))
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}
