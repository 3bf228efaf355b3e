//! Propose and verify: optimistic ranked proposals, dependence-aware
//! re-scoring, and certified top-K extraction.
//!
//! Children of a parent hypothesis are proposed in descending optimistic
//! (independence) weight by the lazy ranked-assignment iterator. Each
//! proposal is re-scored with the dependence structure's λ factor, which can
//! only demote it (λ ∈ [0,1]). A result-list prefix becomes final — no
//! future proposal can enter it — under either certificate rule:
//!
//! (a) a proposal with λ-product 1 freezes itself and everything ranked
//!     before it, because later proposals have optimistic weight at most
//!     this proposal's true weight;
//! (b) peeking the next optimistic cost without consuming it freezes every
//!     entry whose true weight already matches or beats that bound.
//!
//! Rule (b) keeps rankings decidable in structures where no hypothesis ever
//! reaches λ-product 1 (occlusion scenarios can starve rule (a)).

use crate::assignment::{ranked_iter, CostMatrix, RankedAssignmentIterator};
use crate::dependence::{verify, DependentStructure};
use crate::hypothesis::{
    assignment_to_hypothesis, ColumnLegend, GaussianTrack, Hypothesis, MeasurementFrame,
    SensorModel,
};

/// A verified ranking of the children of one parent.
///
/// `result` is sorted by true log-weight descending, ties by construction
/// (proposal) order. Only the first `verified_prefix_len` entries are
/// certified final; the remainder are correct in weight but could still be
/// displaced by unproposed candidates.
#[derive(Debug, Clone)]
pub struct VerifiedRanking {
    pub result: Vec<Hypothesis>,
    pub verified_prefix_len: usize,
    pub proposals_consumed: usize,
    /// True when the proposal iterator was fully drained.
    pub exhausted: bool,
}

/// Shared engine: owns the proposal iterator and the growing result list.
struct PvEngine {
    iter: RankedAssignmentIterator,
    parent: Hypothesis,
    tracks: Vec<GaussianTrack>,
    legend: ColumnLegend,
    frame: MeasurementFrame,
    model: SensorModel,
    structure: DependentStructure,
    result: Vec<Hypothesis>,
    certified: usize,
    proposals: usize,
}

impl PvEngine {
    fn new(
        parent: &Hypothesis,
        costs: &CostMatrix,
        legend: &ColumnLegend,
        tracks: &[GaussianTrack],
        structure: &DependentStructure,
        frame: &MeasurementFrame,
        model: &SensorModel,
    ) -> Self {
        assert_eq!(
            model.optimistic_miss,
            structure.optimistic_miss(),
            "sensor model miss convention must match the dependence structure"
        );
        let iter = ranked_iter(costs).expect("cost matrix within solver size limits");
        Self {
            iter,
            parent: parent.clone(),
            tracks: tracks.to_vec(),
            legend: *legend,
            frame: frame.clone(),
            model: *model,
            structure: *structure,
            result: Vec::new(),
            certified: 0,
            proposals: 0,
        }
    }

    /// Pulls one proposal, verifies it, and inserts it unless impossible.
    fn propose_one(&mut self) {
        let a = self.iter.get_next().expect("caller checks has_next");
        let id = self.proposals as u64;
        self.proposals += 1;
        let mut child = assignment_to_hypothesis(
            &self.parent,
            &a,
            &self.tracks,
            &self.legend,
            &self.frame,
            &self.model,
            id,
        );
        let verdict = verify(&self.structure, &self.parent, &child, self.model.pd)
            .expect("miss convention checked at construction");
        let Some(log_lambda) = verdict.log_lambda_product else {
            return; // impossible (λ = 0): dropped from further consideration
        };
        child.log_weight = child.optimistic_log_weight + log_lambda;
        child.certificate = verdict.certificate;
        debug_assert!(child.log_weight <= child.optimistic_log_weight + 1e-12);
        // Descending order, ties after existing equals (construction order).
        let q = self.result.partition_point(|h| h.log_weight >= child.log_weight);
        debug_assert!(q >= self.certified, "insertions never land in the certified prefix");
        let certificate = child.certificate;
        self.result.insert(q, child);
        if certificate {
            self.certified = self.certified.max(q + 1);
        }
    }

    /// Applies rule (b): entries whose true weight meets or beats the next
    /// unproposed optimistic weight are final. An exhausted iterator makes
    /// the whole list final.
    fn refresh_certified(&mut self) {
        match self.iter.peek_next_cost() {
            None => self.certified = self.result.len(),
            Some(next_cost) => {
                let next_optimistic = self.parent.log_weight - next_cost;
                let p = self.result.partition_point(|h| h.log_weight >= next_optimistic);
                self.certified = self.certified.max(p);
            }
        }
    }

    fn has_more_proposals(&self) -> bool {
        self.iter.has_next()
    }
}

/// Ranks the children of `parent`, stopping once `k` entries are certified
/// final, the proposal iterator is exhausted, or `proposal_cap` proposals
/// have been consumed (partial ranking, flagged via `verified_prefix_len`).
#[allow(clippy::too_many_arguments)]
pub fn rank_children(
    parent: &Hypothesis,
    costs: &CostMatrix,
    legend: &ColumnLegend,
    tracks: &[GaussianTrack],
    structure: &DependentStructure,
    k: usize,
    proposal_cap: usize,
    frame: &MeasurementFrame,
    model: &SensorModel,
) -> VerifiedRanking {
    assert!(k >= 1, "k must be at least 1");
    assert!(proposal_cap >= k, "proposal cap below k can never certify k entries");
    let mut engine = PvEngine::new(parent, costs, legend, tracks, structure, frame, model);
    while engine.certified < k && engine.proposals < proposal_cap && engine.has_more_proposals() {
        engine.propose_one();
        engine.refresh_certified();
    }
    let exhausted = !engine.has_more_proposals();
    if exhausted {
        engine.certified = engine.result.len();
    }
    let PvEngine { mut result, certified, proposals, .. } = engine;
    result.truncate(k);
    VerifiedRanking {
        verified_prefix_len: certified.min(result.len()),
        proposals_consumed: proposals,
        exhausted,
        result,
    }
}

/// Reference path: drains the proposal iterator completely, so every entry
/// is certified. Used to validate early stops and by the oracle mode.
#[allow(clippy::too_many_arguments)]
pub fn rank_children_exhaustive(
    parent: &Hypothesis,
    costs: &CostMatrix,
    legend: &ColumnLegend,
    tracks: &[GaussianTrack],
    structure: &DependentStructure,
    k: usize,
    frame: &MeasurementFrame,
    model: &SensorModel,
) -> VerifiedRanking {
    let mut engine = PvEngine::new(parent, costs, legend, tracks, structure, frame, model);
    while engine.has_more_proposals() {
        engine.propose_one();
    }
    engine.certified = engine.result.len();
    let PvEngine { mut result, proposals, .. } = engine;
    result.truncate(k);
    VerifiedRanking {
        verified_prefix_len: result.len(),
        proposals_consumed: proposals,
        exhausted: true,
        result,
    }
}

/// Lazy stream of certified children in descending true-weight order.
///
/// Proposals are consumed only as needed to certify the next entry; a
/// dried-up stream (iterator exhausted or cap reached) yields `None`.
pub struct VerifiedChildStream {
    engine: PvEngine,
    emitted: usize,
    proposal_cap: usize,
}

impl VerifiedChildStream {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        parent: &Hypothesis,
        costs: &CostMatrix,
        legend: &ColumnLegend,
        tracks: &[GaussianTrack],
        structure: &DependentStructure,
        proposal_cap: usize,
        frame: &MeasurementFrame,
        model: &SensorModel,
    ) -> Self {
        assert!(proposal_cap >= 1);
        Self {
            engine: PvEngine::new(parent, costs, legend, tracks, structure, frame, model),
            emitted: 0,
            proposal_cap,
        }
    }

    /// Next certified-final child, or `None` when the stream is dry.
    pub fn next_verified(&mut self) -> Option<Hypothesis> {
        while self.engine.certified <= self.emitted
            && self.engine.proposals < self.proposal_cap
            && self.engine.has_more_proposals()
        {
            self.engine.propose_one();
            self.engine.refresh_certified();
        }
        if !self.engine.has_more_proposals() {
            self.engine.certified = self.engine.result.len();
        }
        if self.emitted < self.engine.certified {
            let h = self.engine.result[self.emitted].clone();
            self.emitted += 1;
            Some(h)
        } else {
            None
        }
    }

    pub fn proposals_consumed(&self) -> usize {
        self.engine.proposals
    }

    /// True when the stream stopped because of the proposal cap rather than
    /// genuine exhaustion.
    pub fn capped(&self) -> bool {
        self.engine.proposals >= self.proposal_cap && self.engine.has_more_proposals()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::{build_cost_matrix, AssociationOutcome, ClutterModel, Label};
    use crate::kinematics::{GaussianState, NcvModel};
    use crate::oracle;
    use approx::assert_relative_eq;
    use std::collections::BTreeMap;

    fn model(optimistic_miss: bool) -> SensorModel {
        SensorModel {
            ncv: NcvModel::default(),
            clutter: ClutterModel::new(5e-3, -50.0, 150.0),
            pd: 0.99,
            ps: 0.999,
            r_birth: 0.5,
            gate: 20.0,
            optimistic_miss,
        }
    }

    fn track(label: Label, pos: f64, var: f64) -> GaussianTrack {
        GaussianTrack {
            label,
            state: GaussianState::new([pos, 0.0], [[var, 0.0], [0.0, 1.0]]),
            is_birth_candidate: false,
        }
    }

    /// Parent whose posterior holds the given tracks with weight 0.
    fn parent_with(tracks: &[GaussianTrack]) -> Hypothesis {
        let mut associations = BTreeMap::new();
        for t in tracks {
            associations.insert(t.label, AssociationOutcome::Missed);
        }
        Hypothesis {
            id: 0,
            parent_id: None,
            frame: 0,
            associations,
            posterior_tracks: tracks.to_vec(),
            log_weight: 0.0,
            optimistic_log_weight: 0.0,
            certificate: true,
            optimistic_miss: false,
        }
    }

    const A: Label = Label { birth_frame: 0, birth_index: 0 };
    const B: Label = Label { birth_frame: 0, birth_index: 1 };

    #[test]
    fn independence_consumes_exactly_k_proposals() {
        let m = model(false);
        let tracks = vec![track(A, 0.0, 1.0), track(B, 5.0, 1.0)];
        let frame = MeasurementFrame::new(1, vec![0.3, 4.8]);
        let (costs, legend) = build_cost_matrix(&tracks, &frame, &m);
        let parent = parent_with(&tracks);
        let k = 3;
        let ranking = rank_children(
            &parent,
            &costs,
            &legend,
            &tracks,
            &DependentStructure::Independence,
            k,
            50 * k,
            &frame,
            &m,
        );
        assert_eq!(ranking.proposals_consumed, k);
        assert_eq!(ranking.result.len(), k);
        assert_eq!(ranking.verified_prefix_len, k);
        assert!(ranking.result.iter().all(|h| h.certificate));
        // Result must be exactly the first k optimistic proposals.
        let oracle_children = oracle::enumerate_children(
            &parent,
            &costs,
            &legend,
            &tracks,
            &DependentStructure::Independence,
            &frame,
            &m,
        );
        for (got, want) in ranking.result.iter().zip(&oracle_children) {
            assert_eq!(got.id, want.id);
            assert_eq!(got.log_weight, want.log_weight);
        }
    }

    #[test]
    fn collision_excludes_optimistic_best_when_it_overtakes() {
        // Parent order: A left of B. Predictions have crossed (A overtook in
        // prediction), so the best optimistic pairing produces a swapped
        // posterior and must be dropped by collision verification.
        let m = model(false);
        let parent_tracks = vec![track(A, 0.0, 0.25), track(B, 2.0, 0.25)];
        let parent = parent_with(&parent_tracks);
        let predicted = vec![track(A, 2.1, 0.25), track(B, 1.9, 0.25)];
        let frame = MeasurementFrame::new(1, vec![2.4, 1.7]);
        let (costs, legend) = build_cost_matrix(&predicted, &frame, &m);
        let structure = DependentStructure::Collision;
        let ranking =
            rank_children(&parent, &costs, &legend, &predicted, &structure, 3, 150, &frame, &m);
        // The optimistic top proposal pairs A→2.4, B→1.7 (closest to the
        // crossed predictions) — a collision, so it cannot appear.
        let swap = ranking.result.iter().find(|h| {
            h.associations.get(&A) == Some(&AssociationOutcome::Detected(0))
                && h.associations.get(&B) == Some(&AssociationOutcome::Detected(1))
        });
        assert!(swap.is_none(), "overtaking child must be dropped");
        assert!(ranking.proposals_consumed > 3, "dropped proposals cost extra pulls");
        let oracle_children = oracle::enumerate_children(
            &parent, &costs, &legend, &predicted, &structure, &frame, &m,
        );
        assert!(oracle_children.len() >= ranking.result.len());
        for (got, want) in ranking.result.iter().zip(&oracle_children) {
            assert_eq!(got.id, want.id);
            assert_relative_eq!(got.log_weight, want.log_weight, max_relative = 1e-12);
        }
    }

    #[test]
    fn occlusion_rule_b_certifies_without_a_perfect_lambda() {
        // Single track, no measurements: the missed child is demoted by
        // 1−pd (never a λ-product-1 certificate), but its true weight still
        // dominates the next optimistic weight (the death child), so rule
        // (b) certifies it after a single proposal.
        let m = model(true);
        let tracks = vec![track(A, 0.0, 1.0)];
        let frame = MeasurementFrame::new(1, vec![]);
        let (costs, legend) = build_cost_matrix(&tracks, &frame, &m);
        let parent = parent_with(&tracks);
        let structure = DependentStructure::Occlusion { sensor_pos: -100.0, shadow_halfwidth: 1.0 };
        let ranking =
            rank_children(&parent, &costs, &legend, &tracks, &structure, 1, 50, &frame, &m);
        assert_eq!(ranking.proposals_consumed, 1);
        assert_eq!(ranking.verified_prefix_len, 1);
        let top = &ranking.result[0];
        assert_eq!(top.associations.get(&A), Some(&AssociationOutcome::Missed));
        assert!(!top.certificate);
        assert_relative_eq!(
            top.log_weight,
            top.optimistic_log_weight + (1.0 - 0.99f64).ln(),
            max_relative = 1e-12
        );
        assert!(!ranking.exhausted);
    }

    #[test]
    fn proposal_cap_flags_partial_ranking() {
        // Crossed predictions again: every child in which both tracks
        // survive collides, so early proposals are mostly dropped and a
        // tiny cap leaves the ranking partial.
        let m = model(false);
        let parent_tracks = vec![track(A, 0.0, 0.25), track(B, 2.0, 0.25)];
        let parent = parent_with(&parent_tracks);
        let predicted = vec![track(A, 2.1, 0.25), track(B, 1.9, 0.25)];
        let frame = MeasurementFrame::new(1, vec![2.4, 1.7]);
        let (costs, legend) = build_cost_matrix(&predicted, &frame, &m);
        let structure = DependentStructure::Collision;
        let k = 5;
        let capped =
            rank_children(&parent, &costs, &legend, &predicted, &structure, k, k, &frame, &m);
        assert_eq!(capped.proposals_consumed, k);
        assert!(!capped.exhausted);
        assert!(capped.verified_prefix_len < k);
        // Whatever prefix was certified must match the exhaustive ranking.
        let full = rank_children_exhaustive(
            &parent, &costs, &legend, &predicted, &structure, k, &frame, &m,
        );
        for i in 0..capped.verified_prefix_len {
            assert_eq!(capped.result[i].id, full.result[i].id);
            assert_eq!(capped.result[i].log_weight, full.result[i].log_weight);
        }
    }

    #[test]
    fn monotone_demotion_holds_for_every_proposal() {
        let structures = [
            DependentStructure::Independence,
            DependentStructure::Collision,
            DependentStructure::Occlusion { sensor_pos: -100.0, shadow_halfwidth: 1.0 },
        ];
        let mut rng = oracle::seeded_rng(99);
        for structure in &structures {
            let m = model(structure.optimistic_miss());
            for _ in 0..20 {
                let tracks: Vec<GaussianTrack> = (0..3)
                    .map(|i| {
                        track(
                            Label::new(0, i),
                            rand::Rng::gen_range(&mut rng, -10.0..10.0),
                            0.5 + rand::Rng::gen_range(&mut rng, 0.0..2.0),
                        )
                    })
                    .collect();
                let frame = MeasurementFrame::new(
                    1,
                    (0..2).map(|_| rand::Rng::gen_range(&mut rng, -12.0..12.0)).collect(),
                );
                let (costs, legend) = build_cost_matrix(&tracks, &frame, &m);
                let parent = parent_with(&tracks);
                let ranking = rank_children_exhaustive(
                    &parent, &costs, &legend, &tracks, structure, 100, &frame, &m,
                );
                for h in &ranking.result {
                    assert!(h.log_weight <= h.optimistic_log_weight + 1e-12);
                }
            }
        }
    }

    #[test]
    fn early_stop_matches_exhaustive_on_random_instances() {
        let structures = [
            DependentStructure::Independence,
            DependentStructure::Collision,
            DependentStructure::Occlusion { sensor_pos: -100.0, shadow_halfwidth: 1.0 },
        ];
        let mut rng = oracle::seeded_rng(2024);
        for structure in &structures {
            let m = model(structure.optimistic_miss());
            for trial in 0..40 {
                let n = 1 + (trial % 3);
                let tracks: Vec<GaussianTrack> = (0..n)
                    .map(|i| {
                        track(
                            Label::new(0, i as u32),
                            rand::Rng::gen_range(&mut rng, -8.0..8.0),
                            0.5 + rand::Rng::gen_range(&mut rng, 0.0..2.0),
                        )
                    })
                    .collect();
                let n_meas = trial % 4;
                let frame = MeasurementFrame::new(
                    1,
                    (0..n_meas).map(|_| rand::Rng::gen_range(&mut rng, -10.0..10.0)).collect(),
                );
                let (costs, legend) = build_cost_matrix(&tracks, &frame, &m);
                let parent = parent_with(&tracks);
                let k = 1 + (trial % 4);
                let fast = rank_children(
                    &parent,
                    &costs,
                    &legend,
                    &tracks,
                    structure,
                    k,
                    50 * k,
                    &frame,
                    &m,
                );
                let oracle_children = oracle::enumerate_children(
                    &parent, &costs, &legend, &tracks, structure, &frame, &m,
                );
                assert!(fast.verified_prefix_len <= fast.result.len());
                assert!(oracle_children.len() >= fast.verified_prefix_len);
                let prefix = fast.result.iter().take(fast.verified_prefix_len);
                for (got, want) in prefix.zip(&oracle_children) {
                    assert_eq!(got.id, want.id, "structure {structure:?} trial {trial}");
                    assert_relative_eq!(got.log_weight, want.log_weight, max_relative = 1e-9);
                    assert_eq!(got.associations, want.associations);
                }
            }
        }
    }

    #[test]
    fn stream_pops_match_ranked_prefix() {
        let m = model(false);
        let tracks = vec![track(A, 0.0, 1.0), track(B, 5.0, 1.0)];
        let frame = MeasurementFrame::new(1, vec![0.3, 4.8, 9.0]);
        let (costs, legend) = build_cost_matrix(&tracks, &frame, &m);
        let parent = parent_with(&tracks);
        let structure = DependentStructure::Collision;
        let reference = rank_children_exhaustive(
            &parent, &costs, &legend, &tracks, &structure, 1000, &frame, &m,
        );
        let mut stream = VerifiedChildStream::new(
            &parent, &costs, &legend, &tracks, &structure, 10_000, &frame, &m,
        );
        let mut popped = Vec::new();
        while let Some(h) = stream.next_verified() {
            popped.push(h);
        }
        assert_eq!(popped.len(), reference.result.len());
        for (got, want) in popped.iter().zip(&reference.result) {
            assert_eq!(got.id, want.id);
            assert_eq!(got.log_weight, want.log_weight);
        }
        assert!(!stream.capped());
        assert!(stream.next_verified().is_none());
    }

    #[test]
    fn stream_is_lazy() {
        let m = model(false);
        let tracks = vec![track(A, 0.0, 1.0), track(B, 5.0, 1.0)];
        let frame = MeasurementFrame::new(1, vec![0.3, 4.8, 9.0]);
        let (costs, legend) = build_cost_matrix(&tracks, &frame, &m);
        let parent = parent_with(&tracks);
        let mut stream = VerifiedChildStream::new(
            &parent,
            &costs,
            &legend,
            &tracks,
            &DependentStructure::Independence,
            10_000,
            &frame,
            &m,
        );
        stream.next_verified().unwrap();
        // Independence certifies each proposal immediately.
        assert_eq!(stream.proposals_consumed(), 1);
        stream.next_verified().unwrap();
        assert_eq!(stream.proposals_consumed(), 2);
    }
}
