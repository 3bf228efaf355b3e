//! Dependent likelihood structures: the λ factor that re-scores a
//! hypothesis after its optimistic (independence) weight is known.
//!
//! Collision forbids hypotheses whose persistent tracks swap position
//! order relative to the parent (λ = 0 on overtake); Occlusion charges
//! 1 − P_D for every missed detection that no other track can explain by
//! blocking the sensor's line of sight. Every λ lies in [0, 1], so
//! verification can only demote a hypothesis — the monotonicity that makes
//! optimistic ranking sound.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::hypothesis::{AssociationOutcome, Hypothesis, Label};

#[derive(Debug, Error, PartialEq)]
pub enum DependenceError {
    #[error("label {0} is not present in the hypothesis")]
    LabelNotInHypothesis(Label),
    #[error("hypothesis was built with optimistic_miss={found}, structure requires {expected}")]
    MismatchedOptimisticMiss { expected: bool, found: bool },
}

/// The dependence structure applied during verification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DependentStructure {
    /// λ ≡ 1: verification never changes a weight.
    Independence,
    /// λ = 0 when persistent tracks overtake each other, 1 otherwise.
    Collision,
    /// λ = 1 − P_D for missed tracks that are not occluded; misses are
    /// priced optimistically at proposal time and charged here instead.
    Occlusion { sensor_pos: f64, shadow_halfwidth: f64 },
}

impl DependentStructure {
    /// The missed-detection convention hypotheses must be built with:
    /// occlusion pairs with optimistic misses, everything else with the
    /// standard 1 − P_D penalty.
    pub fn optimistic_miss(&self) -> bool {
        matches!(self, DependentStructure::Occlusion { .. })
    }
}

/// Outcome of verifying one hypothesis against a structure.
///
/// `log_lambda_product = None` marks an impossible hypothesis (some λ = 0);
/// finite values are ≤ 0. The certificate is true exactly when the product
/// is 1, i.e. the true weight equals the optimistic weight.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationResult {
    pub log_lambda_product: Option<f64>,
    pub certificate: bool,
    pub per_label_lambda: BTreeMap<Label, f64>,
}

/// True when the persistent tracks of `child` appear in a different
/// position-sorted order than in `parent`.
///
/// Only labels present in both hypotheses count: deaths and births never
/// collide. The test is pairwise strict inversion of posterior mean
/// positions, so it is canonical (independent of enumeration order), and
/// exact position ties are order-preserving.
pub fn collide(parent: &Hypothesis, child: &Hypothesis) -> bool {
    debug_assert_eq!(child.parent_id, Some(parent.id));
    let common: Vec<(f64, f64)> = child
        .posterior_tracks
        .iter()
        .filter_map(|t| parent.position_of(t.label).map(|p| (p, t.state.position())))
        .collect();
    for (i, &(pa, ca)) in common.iter().enumerate() {
        for &(pb, cb) in &common[i + 1..] {
            if (pa < pb && ca > cb) || (pa > pb && ca < cb) {
                return true;
            }
        }
    }
    false
}

/// True when some other track in `hypothesis` lies strictly between the
/// sensor and the queried track.
///
/// In one dimension the shadow halfwidth plays no role (any blocker on the
/// segment shadows everything behind it); the parameter is kept for
/// forward-compatibility with planar geometry.
pub fn occluded(
    hypothesis: &Hypothesis,
    label: Label,
    sensor_pos: f64,
    _shadow_halfwidth: f64,
) -> Result<bool, DependenceError> {
    let target =
        hypothesis.position_of(label).ok_or(DependenceError::LabelNotInHypothesis(label))?;
    let range = target - sensor_pos;
    Ok(hypothesis.posterior_tracks.iter().any(|t| {
        if t.label == label {
            return false;
        }
        let other = t.state.position() - sensor_pos;
        other * range > 0.0 && other.abs() < range.abs()
    }))
}

/// Evaluates the λ factor of `child` under `structure`.
///
/// The child must have been proposed with the structure's missed-detection
/// convention; a mismatch means the optimistic weights are wrong for this
/// structure and verification refuses to proceed.
pub fn verify(
    structure: &DependentStructure,
    parent: &Hypothesis,
    child: &Hypothesis,
    pd: f64,
) -> Result<VerificationResult, DependenceError> {
    let expected = structure.optimistic_miss();
    if child.optimistic_miss != expected {
        return Err(DependenceError::MismatchedOptimisticMiss {
            expected,
            found: child.optimistic_miss,
        });
    }
    let labels: Vec<Label> = child.posterior_tracks.iter().map(|t| t.label).collect();
    let mut per_label_lambda = BTreeMap::new();
    match structure {
        DependentStructure::Independence => {
            for l in labels {
                per_label_lambda.insert(l, 1.0);
            }
            Ok(VerificationResult {
                log_lambda_product: Some(0.0),
                certificate: true,
                per_label_lambda,
            })
        }
        DependentStructure::Collision => {
            if collide(parent, child) {
                for l in labels {
                    per_label_lambda.insert(l, 0.0);
                }
                Ok(VerificationResult {
                    log_lambda_product: None,
                    certificate: false,
                    per_label_lambda,
                })
            } else {
                for l in labels {
                    per_label_lambda.insert(l, 1.0);
                }
                Ok(VerificationResult {
                    log_lambda_product: Some(0.0),
                    certificate: true,
                    per_label_lambda,
                })
            }
        }
        DependentStructure::Occlusion { sensor_pos, shadow_halfwidth } => {
            let mut log_product = 0.0;
            for l in labels {
                let missed = matches!(child.associations.get(&l), Some(AssociationOutcome::Missed));
                let lambda = if missed && !occluded(child, l, *sensor_pos, *shadow_halfwidth)? {
                    1.0 - pd
                } else {
                    1.0
                };
                if lambda < 1.0 {
                    log_product += lambda.ln();
                }
                per_label_lambda.insert(l, lambda);
            }
            Ok(VerificationResult {
                log_lambda_product: Some(log_product),
                certificate: log_product == 0.0,
                per_label_lambda,
            })
        }
    }
}
