//! Labeled tracks, data-association hypotheses, and likelihood-ratio cost
//! matrices.
//!
//! Each hypothesis maps track labels to association outcomes (a measurement,
//! a missed detection, or death) and carries both an optimistic log-weight
//! (independence assumption) and a true log-weight (after dependence
//! verification). Cost matrices follow the three-block layout: one column
//! per measurement, then a diagonal missed-detection block, then a diagonal
//! death block; structurally forbidden entries make cross-diagonal picks
//! impossible.

use std::collections::BTreeMap;

use crate::assignment::{Assignment, CostMatrix};
use crate::kinematics::{self, GaussianState, NcvModel};

/// Unique track identity: frame of birth plus a per-frame index.
///
/// Ordering (birth frame first, then index) is the canonical label order
/// used for deterministic iteration everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label {
    pub birth_frame: i64,
    pub birth_index: u32,
}

impl Label {
    pub fn new(birth_frame: i64, birth_index: u32) -> Self {
        Self { birth_frame, birth_index }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}", self.birth_frame, self.birth_index)
    }
}

/// A labeled Gaussian track. Birth candidates are provisional rows appended
/// to the cost matrix; they become ordinary tracks once detected.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTrack {
    pub label: Label,
    pub state: GaussianState,
    pub is_birth_candidate: bool,
}

/// Association outcome of one track in one hypothesis. Measurement indices
/// are zero-based positions into the frame's measurement list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssociationOutcome {
    Detected(usize),
    Missed,
    Died,
}

/// One data-association hypothesis: an outcome per track plus the posterior
/// tracks that survive it.
///
/// `log_weight` starts equal to `optimistic_log_weight` and only ever moves
/// down when a dependence structure demotes the hypothesis; `certificate`
/// records that verification left the weight untouched (λ-product = 1).
/// `optimistic_miss` records which missed-detection convention the weights
/// were built with, so verification can reject mismatched configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub id: u64,
    pub parent_id: Option<u64>,
    pub frame: i64,
    pub associations: BTreeMap<Label, AssociationOutcome>,
    pub posterior_tracks: Vec<GaussianTrack>,
    pub log_weight: f64,
    pub optimistic_log_weight: f64,
    pub certificate: bool,
    pub optimistic_miss: bool,
}

impl Hypothesis {
    /// The initial empty hypothesis before any measurement frame.
    pub fn root() -> Self {
        Self {
            id: 0,
            parent_id: None,
            frame: -1,
            associations: BTreeMap::new(),
            posterior_tracks: Vec::new(),
            log_weight: 0.0,
            optimistic_log_weight: 0.0,
            certificate: true,
            optimistic_miss: false,
        }
    }

    pub fn track(&self, label: Label) -> Option<&GaussianTrack> {
        self.posterior_tracks.iter().find(|t| t.label == label)
    }

    /// Posterior mean position of a track, if it survives this hypothesis.
    pub fn position_of(&self, label: Label) -> Option<f64> {
        self.track(label).map(|t| t.state.position())
    }

    /// Checks the structural invariants: one-to-one measurement use and
    /// posterior tracks exactly matching the non-died associations.
    pub fn is_structurally_valid(&self) -> bool {
        let mut seen = Vec::new();
        for outcome in self.associations.values() {
            if let AssociationOutcome::Detected(j) = outcome {
                if seen.contains(j) {
                    return false;
                }
                seen.push(*j);
            }
        }
        let surviving: Vec<Label> = self
            .associations
            .iter()
            .filter(|(_, o)| !matches!(o, AssociationOutcome::Died))
            .map(|(l, _)| *l)
            .collect();
        let posterior: Vec<Label> = self.posterior_tracks.iter().map(|t| t.label).collect();
        surviving == posterior && self.log_weight <= self.optimistic_log_weight + 1e-12
    }
}

/// One frame of scalar position measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementFrame {
    pub frame: i64,
    pub measurements: Vec<f64>,
}

impl MeasurementFrame {
    pub fn new(frame: i64, measurements: Vec<f64>) -> Self {
        debug_assert!(frame >= 0, "measurement frames are numbered from 0");
        Self { frame, measurements }
    }
}

/// Bounded uniform Poisson clutter: density `intensity` per meter on
/// `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClutterModel {
    pub intensity: f64,
    pub low: f64,
    pub high: f64,
}

impl ClutterModel {
    pub fn new(intensity: f64, low: f64, high: f64) -> Self {
        assert!(intensity > 0.0, "clutter intensity must be positive");
        assert!(low < high, "clutter support must be a non-empty interval");
        Self { intensity, low, high }
    }

    /// log κ(z). The density is constant inside the support and, as a
    /// robustness choice, the same value is used for out-of-support
    /// measurements rather than failing.
    pub fn log_density(&self, _z: f64) -> f64 {
        self.intensity.ln()
    }

    /// Expected clutter count per frame: intensity × support length.
    pub fn expected_count(&self) -> f64 {
        self.intensity * (self.high - self.low)
    }
}

/// Sensor and track-management parameters shared by cost-matrix
/// construction and hypothesis scoring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    pub ncv: NcvModel,
    pub clutter: ClutterModel,
    /// Probability of detection.
    pub pd: f64,
    /// Survival probability of existing tracks.
    pub ps: f64,
    /// Existence (birth) probability of the per-frame birth candidate.
    pub r_birth: f64,
    /// Gate radius in meters; measurements farther from a predicted
    /// position are structurally excluded.
    pub gate: f64,
    /// When true, missed detections cost nothing at proposal time (the
    /// optimistic convention paired with the occlusion structure).
    pub optimistic_miss: bool,
}

impl SensorModel {
    fn existence_probability(&self, track: &GaussianTrack) -> f64 {
        if track.is_birth_candidate {
            self.r_birth
        } else {
            self.ps
        }
    }
}

/// Per-track association likelihood ratio in log domain.
///
/// Detected: log P_D + log g(z_j | x) − log κ(z_j). Missed: log(1 − P_D),
/// or 0 under the optimistic-miss convention. Death carries no ψ factor —
/// it is priced purely by the existence probability in the cost matrix.
pub fn psi_factor(
    track: &GaussianTrack,
    outcome: AssociationOutcome,
    frame: &MeasurementFrame,
    clutter: &ClutterModel,
    pd: f64,
    optimistic_miss: bool,
    ncv: &NcvModel,
) -> f64 {
    debug_assert!(pd > 0.0 && pd < 1.0);
    match outcome {
        AssociationOutcome::Detected(j) => {
            let z = frame.measurements[j];
            let log_g = kinematics::log_likelihood(&track.state, z, ncv)
                .expect("valid track state and positive measurement noise");
            pd.ln() + log_g - clutter.log_density(z)
        }
        AssociationOutcome::Missed => {
            if optimistic_miss {
                0.0
            } else {
                (1.0 - pd).ln()
            }
        }
        AssociationOutcome::Died => unreachable!("death has no psi factor"),
    }
}

/// Interprets cost-matrix columns back into association outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnLegend {
    pub num_tracks: usize,
    pub num_measurements: usize,
}

impl ColumnLegend {
    /// Outcome encoded by `col` for any row. Columns: measurements first,
    /// then the missed block, then the died block.
    pub fn outcome(&self, col: usize) -> AssociationOutcome {
        if col < self.num_measurements {
            AssociationOutcome::Detected(col)
        } else if col < self.num_measurements + self.num_tracks {
            AssociationOutcome::Missed
        } else {
            debug_assert!(col < self.num_measurements + 2 * self.num_tracks);
            AssociationOutcome::Died
        }
    }

    pub fn cols(&self) -> usize {
        self.num_measurements + 2 * self.num_tracks
    }
}

/// Builds the N×(M+2N) negative-log likelihood-ratio matrix.
///
/// Row i prices track i's options: each in-gate measurement j costs
/// −[log p_e + ψ(Detected j)], the diagonal missed entry costs
/// −[log p_e + ψ(Missed)], and the diagonal died entry costs −log(1−p_e),
/// with p_e the survival probability (or birth probability for birth
/// candidates). Off-diagonal missed/died entries are forbidden.
pub fn build_cost_matrix(
    tracks: &[GaussianTrack],
    frame: &MeasurementFrame,
    model: &SensorModel,
) -> (CostMatrix, ColumnLegend) {
    let n = tracks.len();
    let m = frame.measurements.len();
    let legend = ColumnLegend { num_tracks: n, num_measurements: m };
    let mut rows = Vec::with_capacity(n);
    for (i, track) in tracks.iter().enumerate() {
        let p_e = model.existence_probability(track);
        let mut row: Vec<Option<f64>> = Vec::with_capacity(legend.cols());
        for (j, &z) in frame.measurements.iter().enumerate() {
            if kinematics::gate(&track.state, z, model.gate) {
                let psi = psi_factor(
                    track,
                    AssociationOutcome::Detected(j),
                    frame,
                    &model.clutter,
                    model.pd,
                    model.optimistic_miss,
                    &model.ncv,
                );
                row.push(Some(-(p_e.ln() + psi)));
            } else {
                row.push(None);
            }
        }
        for k in 0..n {
            if k == i {
                let psi = psi_factor(
                    track,
                    AssociationOutcome::Missed,
                    frame,
                    &model.clutter,
                    model.pd,
                    model.optimistic_miss,
                    &model.ncv,
                );
                row.push(Some(-(p_e.ln() + psi)));
            } else {
                row.push(None);
            }
        }
        for k in 0..n {
            row.push(if k == i { Some(-(1.0 - p_e).ln()) } else { None });
        }
        rows.push(row);
    }
    let matrix = CostMatrix::from_rows(rows).expect("diagonal missed entries keep rows valid");
    (matrix, legend)
}

/// Materializes the child hypothesis selected by one assignment.
///
/// The child's optimistic log-weight is the parent's log-weight minus the
/// assignment cost. Detected tracks get their Kalman update; missed tracks
/// keep the predicted state; died tracks are dropped. A birth candidate
/// that was not detected is simply not instantiated (no phantom tracks),
/// so it appears in neither the associations nor the posterior.
///
/// The caller supplies `id`; rankings hand out construction-order ids and
/// the filter re-assigns globally unique ones at selection time.
pub fn assignment_to_hypothesis(
    parent: &Hypothesis,
    a: &Assignment,
    tracks: &[GaussianTrack],
    legend: &ColumnLegend,
    frame: &MeasurementFrame,
    model: &SensorModel,
    id: u64,
) -> Hypothesis {
    debug_assert_eq!(a.row_to_col.len(), tracks.len());
    let mut associations = BTreeMap::new();
    let mut posterior_tracks = Vec::new();
    for (row, track) in tracks.iter().enumerate() {
        let outcome = legend.outcome(a.row_to_col[row]);
        if track.is_birth_candidate && !matches!(outcome, AssociationOutcome::Detected(_)) {
            continue;
        }
        associations.insert(track.label, outcome);
        match outcome {
            AssociationOutcome::Detected(j) => {
                let (updated, _) =
                    kinematics::update(&track.state, frame.measurements[j], &model.ncv)
                        .expect("gated measurement with positive noise variance");
                posterior_tracks.push(GaussianTrack {
                    label: track.label,
                    state: updated,
                    is_birth_candidate: false,
                });
            }
            AssociationOutcome::Missed => {
                posterior_tracks.push(GaussianTrack {
                    label: track.label,
                    state: track.state,
                    is_birth_candidate: false,
                });
            }
            AssociationOutcome::Died => {}
        }
    }
    debug_assert!(posterior_tracks.windows(2).all(|w| w[0].label < w[1].label));
    let optimistic_log_weight = parent.log_weight - a.cost;
    let child = Hypothesis {
        id,
        parent_id: Some(parent.id),
        frame: frame.frame,
        associations,
        posterior_tracks,
        log_weight: optimistic_log_weight,
        optimistic_log_weight,
        certificate: false,
        optimistic_miss: model.optimistic_miss,
    };
    debug_assert!(child.is_structurally_valid());
    child
}
