//! The per-frame filter recursion: joint prediction-update of every parent
//! hypothesis, globally optimal top-K child selection, truncation, and
//! normalization.
//!
//! Child selection follows the round-robin buffer scheme: each parent's
//! verified-child stream contributes its current best to a buffer; the
//! globally best buffer entry is moved to the output and replaced by that
//! parent's next child, until K children are selected or every stream is
//! dry. Because each stream is sorted by true weight, this merge yields the
//! exact global top-K while proposing lazily.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dependence::{collide, DependentStructure};
use crate::exec::{map_ordered, ExecMode};
use crate::hypothesis::{
    build_cost_matrix, AssociationOutcome, ClutterModel, ColumnLegend, GaussianTrack, Hypothesis,
    Label, MeasurementFrame, SensorModel,
};
use crate::kinematics::{self, GaussianState, NcvModel};
use crate::propose_verify::VerifiedChildStream;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error(
        "no children survived at frame {frame}: every parent's stream was dry \
         (all candidates pruned or the proposal cap was exhausted); \
         the configuration is likely inconsistent with the scenario"
    )]
    EmptyPosterior { frame: i64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Filter parameters. Defaults follow the standard scenario: unit
/// measurement noise, pd 0.99, clutter density 5e-3 on [−50, 150], gate
/// 20 m, at most 100 hypotheses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub pd: f64,
    pub ps: f64,
    pub r_birth: f64,
    pub birth_mean: [f64; 2],
    pub birth_cov: [[f64; 2]; 2],
    pub clutter: ClutterModel,
    pub gate: f64,
    /// K: maximum number of hypotheses kept per frame.
    pub max_hypotheses: usize,
    pub structure: DependentStructure,
    pub ncv: NcvModel,
    /// Per-parent proposal budget = this factor × K.
    pub proposal_cap_factor: usize,
    pub exec: ExecMode,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            pd: 0.99,
            ps: 0.999,
            r_birth: 0.5,
            birth_mean: [0.0, 0.0],
            birth_cov: [[100.0, 0.0], [0.0, 25.0]],
            clutter: ClutterModel::new(5e-3, -50.0, 150.0),
            gate: 20.0,
            max_hypotheses: 100,
            structure: DependentStructure::Independence,
            ncv: NcvModel::default(),
            proposal_cap_factor: 50,
            exec: ExecMode::default(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        for (name, p) in [("pd", self.pd), ("ps", self.ps), ("r_birth", self.r_birth)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(FilterError::InvalidConfig(format!(
                    "{name} must lie strictly between 0 and 1, got {p}"
                )));
            }
        }
        if self.max_hypotheses < 1 {
            return Err(FilterError::InvalidConfig("max_hypotheses must be at least 1".into()));
        }
        if self.proposal_cap_factor < 1 {
            return Err(FilterError::InvalidConfig(
                "proposal_cap_factor must be at least 1".into(),
            ));
        }
        if self.gate <= 0.0 {
            return Err(FilterError::InvalidConfig("gate must be positive".into()));
        }
        if let DependentStructure::Occlusion { shadow_halfwidth, .. } = self.structure {
            if shadow_halfwidth <= 0.0 {
                return Err(FilterError::InvalidConfig("shadow_halfwidth must be positive".into()));
            }
        }
        Ok(())
    }

    /// The sensor model handed to cost-matrix construction; the missed
    /// detection convention follows the dependence structure.
    pub fn sensor_model(&self) -> SensorModel {
        SensorModel {
            ncv: self.ncv,
            clutter: self.clutter,
            pd: self.pd,
            ps: self.ps,
            r_birth: self.r_birth,
            gate: self.gate,
            optimistic_miss: self.structure.optimistic_miss(),
        }
    }
}

/// One history entry per hypothesis instantiated into the filter state,
/// carrying everything tree export needs.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRecord {
    pub id: u64,
    pub parent_id: Option<u64>,
    pub frame: i64,
    pub associations: BTreeMap<Label, AssociationOutcome>,
    /// True log-weight before this frame's renormalization (edge label).
    pub pre_normalization_log_weight: f64,
    pub normalized_log_weight: f64,
    /// Overtake flag relative to the parent, recorded under every
    /// structure (under Collision it is always false for kept children).
    pub would_collide: bool,
    /// Highest-weight hypothesis of its frame.
    pub is_best: bool,
    pub certificate: bool,
}

/// Diagnostics for one filter step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub parents: usize,
    pub proposals_consumed: usize,
    pub children_selected: usize,
    pub certified_selected: usize,
    /// Streams stopped by the proposal cap rather than exhaustion.
    pub capped_streams: usize,
}

/// Filter state after a frame: the K current hypotheses (weights
/// normalized), plus the append-only history log.
#[derive(Debug, Clone)]
pub struct FilterState {
    pub hypotheses: Vec<Hypothesis>,
    pub frame: i64,
    pub history: Vec<HistoryRecord>,
    pub stats: StepStats,
    next_id: u64,
}

impl FilterState {
    /// Initial state: the single empty root hypothesis at frame −1.
    pub fn new() -> Self {
        let root = Hypothesis::root();
        let record = HistoryRecord {
            id: root.id,
            parent_id: None,
            frame: root.frame,
            associations: BTreeMap::new(),
            pre_normalization_log_weight: 0.0,
            normalized_log_weight: 0.0,
            would_collide: false,
            is_best: true,
            certificate: true,
        };
        Self {
            hypotheses: vec![root],
            frame: -1,
            history: vec![record],
            stats: StepStats::default(),
            next_id: 1,
        }
    }

    /// Sum of hypothesis weights; 1.0 within 1e-9 after every step.
    pub fn total_weight(&self) -> f64 {
        self.hypotheses.iter().map(|h| h.log_weight.exp()).sum()
    }

    /// Copy without the cumulative history log — what per-frame archives
    /// should store, since the log grows over the whole run.
    pub fn snapshot(&self) -> Self {
        Self {
            hypotheses: self.hypotheses.clone(),
            frame: self.frame,
            history: Vec::new(),
            stats: self.stats,
            next_id: self.next_id,
        }
    }
}

impl Default for FilterState {
    fn default() -> Self {
        Self::new()
    }
}

/// Builds one parent's joint prediction-update problem: predicted tracks
/// plus the frame's birth candidate, and the likelihood-ratio matrix over
/// them. Exposed so oracle harnesses can replay the exact same problem.
pub fn prediction_problem(
    parent: &Hypothesis,
    frame: &MeasurementFrame,
    config: &FilterConfig,
) -> (Vec<GaussianTrack>, crate::assignment::CostMatrix, ColumnLegend) {
    let mut tracks: Vec<GaussianTrack> = parent
        .posterior_tracks
        .iter()
        .map(|t| GaussianTrack {
            label: t.label,
            state: kinematics::predict(&t.state, &config.ncv),
            is_birth_candidate: false,
        })
        .collect();
    tracks.push(GaussianTrack {
        label: Label::new(frame.frame, 0),
        state: GaussianState::new(config.birth_mean, config.birth_cov),
        is_birth_candidate: true,
    });
    let model = config.sensor_model();
    let (costs, legend) = build_cost_matrix(&tracks, frame, &model);
    (tracks, costs, legend)
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Advances the filter by one measurement frame.
pub fn step(
    state: &FilterState,
    frame: &MeasurementFrame,
    config: &FilterConfig,
) -> Result<FilterState, FilterError> {
    assert_eq!(frame.frame, state.frame + 1, "frames must be processed in order");
    config.validate()?;
    let model = config.sensor_model();
    let structure = config.structure;
    let k = config.max_hypotheses;
    let proposal_cap = config.proposal_cap_factor * k;

    // Parallel phase: each parent builds its problem and certifies its best
    // child independently.
    let parents: Vec<Hypothesis> = state.hypotheses.clone();
    let mut primed: Vec<(VerifiedChildStream, Option<Hypothesis>)> =
        map_ordered(config.exec, parents.clone(), |parent| {
            let (tracks, costs, legend) = prediction_problem(&parent, frame, config);
            let mut stream = VerifiedChildStream::new(
                &parent,
                &costs,
                &legend,
                &tracks,
                &structure,
                proposal_cap,
                frame,
                &model,
            );
            let first = stream.next_verified();
            (stream, first)
        });

    // Sequential round-robin merge: pop the globally best buffered child,
    // refill that slot from the same parent's stream.
    let mut selected: Vec<(usize, Hypothesis)> = Vec::with_capacity(k);
    while selected.len() < k {
        let mut best: Option<usize> = None;
        for (i, (_, slot)) in primed.iter().enumerate() {
            if let Some(h) = slot {
                let better = match best {
                    None => true,
                    Some(b) => h.log_weight > primed[b].1.as_ref().unwrap().log_weight,
                };
                if better {
                    best = Some(i);
                }
            }
        }
        let Some(i) = best else { break };
        let child = primed[i].1.take().expect("best slot is occupied");
        primed[i].1 = primed[i].0.next_verified();
        selected.push((i, child));
    }
    if selected.is_empty() {
        return Err(FilterError::EmptyPosterior { frame: frame.frame });
    }
    debug_assert!(
        selected.windows(2).all(|w| w[0].1.log_weight >= w[1].1.log_weight),
        "round-robin merge emits children in descending weight order"
    );

    // Re-id in selection order, flag overtakes, renormalize.
    let mut next_id = state.next_id;
    let mut hypotheses = Vec::with_capacity(selected.len());
    let mut would_collide_flags = Vec::with_capacity(selected.len());
    for (parent_index, mut child) in selected {
        child.id = next_id;
        next_id += 1;
        let parent = &parents[parent_index];
        debug_assert_eq!(child.parent_id, Some(parent.id));
        let flagged = collide(parent, &child);
        if matches!(structure, DependentStructure::Collision) {
            debug_assert!(!flagged, "collision structure never keeps an overtaking child");
        }
        would_collide_flags.push(flagged);
        hypotheses.push(child);
    }
    let total = log_sum_exp(hypotheses.iter().map(|h| h.log_weight));
    let mut history = state.history.clone();
    let mut stats = StepStats {
        parents: parents.len(),
        children_selected: hypotheses.len(),
        ..StepStats::default()
    };
    for (stream, _) in &primed {
        stats.proposals_consumed += stream.proposals_consumed();
        stats.capped_streams += usize::from(stream.capped());
    }
    for (i, h) in hypotheses.iter_mut().enumerate() {
        let pre = h.log_weight;
        h.log_weight = pre - total;
        h.optimistic_log_weight -= total;
        stats.certified_selected += usize::from(h.certificate);
        history.push(HistoryRecord {
            id: h.id,
            parent_id: h.parent_id,
            frame: h.frame,
            associations: h.associations.clone(),
            pre_normalization_log_weight: pre,
            normalized_log_weight: h.log_weight,
            would_collide: would_collide_flags[i],
            is_best: i == 0,
            certificate: h.certificate,
        });
    }
    debug_assert!((log_sum_exp(hypotheses.iter().map(|h| h.log_weight))).abs() < 1e-9);

    Ok(FilterState { hypotheses, frame: frame.frame, history, stats, next_id })
}

/// Tracks of the highest-weight hypothesis, ties broken by lowest id.
pub fn best_estimate(state: &FilterState) -> Vec<(Label, GaussianState)> {
    let best = state
        .hypotheses
        .iter()
        .max_by(|a, b| a.log_weight.total_cmp(&b.log_weight).then_with(|| b.id.cmp(&a.id)))
        .expect("filter state always holds at least one hypothesis");
    best.posterior_tracks.iter().map(|t| (t.label, t.state)).collect()
}

/// Per-label polylines of best-estimate positions across frames. Labels
/// absent from a frame's best hypothesis leave a gap.
pub fn track_history(states: &[FilterState]) -> BTreeMap<Label, Vec<(i64, f64, f64)>> {
    let mut out: BTreeMap<Label, Vec<(i64, f64, f64)>> = BTreeMap::new();
    for state in states {
        for (label, gauss) in best_estimate(state) {
            out.entry(label).or_default().push((
                state.frame,
                gauss.position(),
                gauss.position_std(),
            ));
        }
    }
    out
}

/// Frames where the best-estimate position order of a persistent label pair
/// flips relative to the previous frame. Pairs are reported with the
/// smaller label first.
pub fn detect_overtakes(states: &[FilterState]) -> Vec<(i64, Label, Label)> {
    let mut events = Vec::new();
    for pair in states.windows(2) {
        let prev: BTreeMap<Label, f64> =
            best_estimate(&pair[0]).into_iter().map(|(l, g)| (l, g.position())).collect();
        let cur: Vec<(Label, f64)> =
            best_estimate(&pair[1]).into_iter().map(|(l, g)| (l, g.position())).collect();
        let common: Vec<(Label, f64, f64)> =
            cur.iter().filter_map(|&(l, p)| prev.get(&l).map(|&q| (l, q, p))).collect();
        for (i, &(la, qa, pa)) in common.iter().enumerate() {
            for &(lb, qb, pb) in &common[i + 1..] {
                if (qa < qb && pa > pb) || (qa > qb && pa < pb) {
                    events.push((pair[1].frame, la.min(lb), la.max(lb)));
                }
            }
        }
    }
    events
}
