//! Brute-force reference implementations used to verify the fast paths.
//!
//! These enumerate exhaustively and run in factorial time; they exist for
//! correctness checks (unit tests, acceptance harnesses, the CLI `--oracle`
//! mode), never for production filtering.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assignment::{Assignment, CostMatrix};
use crate::dependence::{verify, DependentStructure};
use crate::hypothesis::{
    assignment_to_hypothesis, ColumnLegend, GaussianTrack, Hypothesis, MeasurementFrame,
    SensorModel,
};

/// Deterministic RNG for fixture generation.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random cost matrix with roughly `forbidden_frac` forbidden entries;
/// every row keeps at least one allowed entry so the matrix is valid.
pub fn random_matrix(
    rng: &mut impl Rng,
    rows: usize,
    cols: usize,
    forbidden_frac: f64,
) -> CostMatrix {
    build_random(rng, rows, cols, forbidden_frac, |rng| rng.gen_range(-5.0..5.0))
}

/// Random matrix drawing costs from a tiny discrete set, which forces heavy
/// cost ties and stresses lexicographic tie-breaking.
pub fn random_discrete_matrix(
    rng: &mut impl Rng,
    rows: usize,
    cols: usize,
    forbidden_frac: f64,
) -> CostMatrix {
    build_random(rng, rows, cols, forbidden_frac, |rng| rng.gen_range(0..4) as f64)
}

fn build_random(
    rng: &mut impl Rng,
    rows: usize,
    cols: usize,
    forbidden_frac: f64,
    mut draw: impl FnMut(&mut dyn rand::RngCore) -> f64,
) -> CostMatrix {
    let mut data = Vec::with_capacity(rows);
    for _ in 0..rows {
        let mut row: Vec<Option<f64>> = (0..cols)
            .map(|_| if rng.gen_bool(forbidden_frac) { None } else { Some(draw(rng)) })
            .collect();
        if row.iter().all(Option::is_none) {
            let c = rng.gen_range(0..cols);
            row[c] = Some(draw(rng));
        }
        data.push(row);
    }
    CostMatrix::from_rows(data).expect("generated matrix is valid by construction")
}

/// Every valid assignment of `costs`, sorted by `(cost, lexicographic
/// row-to-column)` — the reference ordering for ranked enumeration.
pub fn enumerate_assignments(costs: &CostMatrix) -> Vec<Assignment> {
    let mut out = Vec::new();
    let mut used = vec![false; costs.cols()];
    let mut current = Vec::with_capacity(costs.rows());
    recurse(costs, 0, &mut used, &mut current, &mut out);
    out.sort_by(|a, b| a.cost.total_cmp(&b.cost).then_with(|| a.row_to_col.cmp(&b.row_to_col)));
    out
}

/// Every possible child of `parent` with its true (dependence-verified)
/// weight, impossible children excluded, sorted by true log-weight
/// descending with ties in proposal order.
///
/// Ids are the enumeration index of the underlying assignment, matching the
/// construction-order ids handed out by the ranking engine, so results are
/// directly comparable.
#[allow(clippy::too_many_arguments)]
pub fn enumerate_children(
    parent: &Hypothesis,
    costs: &CostMatrix,
    legend: &ColumnLegend,
    tracks: &[GaussianTrack],
    structure: &DependentStructure,
    frame: &MeasurementFrame,
    model: &SensorModel,
) -> Vec<Hypothesis> {
    let mut out = Vec::new();
    for (i, a) in enumerate_assignments(costs).iter().enumerate() {
        let mut child = assignment_to_hypothesis(parent, a, tracks, legend, frame, model, i as u64);
        let verdict = verify(structure, parent, &child, model.pd)
            .expect("oracle is called with a matching miss convention");
        if let Some(log_lambda) = verdict.log_lambda_product {
            child.log_weight = child.optimistic_log_weight + log_lambda;
            child.certificate = verdict.certificate;
            out.push(child);
        }
    }
    // Stable sort keeps proposal order on exact weight ties.
    out.sort_by(|a, b| b.log_weight.total_cmp(&a.log_weight));
    out
}

fn recurse(
    costs: &CostMatrix,
    row: usize,
    used: &mut Vec<bool>,
    current: &mut Vec<usize>,
    out: &mut Vec<Assignment>,
) {
    if row == costs.rows() {
        out.push(Assignment { row_to_col: current.clone(), cost: costs.selection_cost(current) });
        return;
    }
    for c in 0..costs.cols() {
        if used[c] || costs.entry(row, c).is_none() {
            continue;
        }
        used[c] = true;
        current.push(c);
        recurse(costs, row + 1, used, current, out);
        current.pop();
        used[c] = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerates_all_permutations_of_square_matrix() {
        let m = CostMatrix::from_rows(vec![
            vec![Some(1.0), Some(2.0), Some(3.0)],
            vec![Some(2.0), Some(4.0), Some(6.0)],
            vec![Some(3.0), Some(6.0), Some(9.0)],
        ])
        .unwrap();
        let all = enumerate_assignments(&m);
        assert_eq!(all.len(), 6);
        assert!(all.windows(2).all(|w| w[0].cost <= w[1].cost));
        assert_eq!(all[0].row_to_col, vec![2, 1, 0]);
        assert_eq!(all[0].cost, 3.0 + 4.0 + 3.0);
    }

    #[test]
    fn zero_row_matrix_has_one_empty_assignment() {
        let m = CostMatrix::from_rows(Vec::new()).unwrap();
        let all = enumerate_assignments(&m);
        assert_eq!(all.len(), 1);
        assert!(all[0].row_to_col.is_empty());
        assert_eq!(all[0].cost, 0.0);
    }
}
