//! Optimal assignment (Munkres) and lazy k-best ranked assignment (Murty)
//! over rectangular cost matrices with forbidden entries.
//!
//! Forbidden entries are structurally absent rather than large sentinel
//! costs; sentinel arithmetic corrupts cost sums and Murty partitioning.
//! Ties are broken everywhere by the lexicographically smallest
//! row-to-column vector, which keeps enumeration order deterministic and
//! directly comparable against brute-force oracles.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AssignmentError {
    #[error("invalid cost matrix: {0}")]
    InvalidMatrix(String),
    #[error("no feasible assignment exists")]
    Infeasible,
    #[error("ranked assignment iterator is exhausted")]
    Exhausted,
}

/// Rectangular cost matrix. `None` marks a forbidden entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Option<f64>>,
}

impl CostMatrix {
    /// Builds a matrix from row-major entries, validating that finite costs
    /// carry no NaN and that every row keeps at least one allowed entry.
    pub fn from_rows(rows: Vec<Vec<Option<f64>>>) -> Result<Self, AssignmentError> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(n * m);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(AssignmentError::InvalidMatrix(format!(
                    "row {i} has {} columns, expected {m}",
                    row.len()
                )));
            }
            if !row.iter().any(Option::is_some) {
                return Err(AssignmentError::InvalidMatrix(format!(
                    "row {i} has no allowed entry"
                )));
            }
            for (j, e) in row.iter().enumerate() {
                if let Some(c) = e {
                    if !c.is_finite() {
                        return Err(AssignmentError::InvalidMatrix(format!(
                            "entry ({i}, {j}) is not finite"
                        )));
                    }
                }
            }
            entries.extend_from_slice(row);
        }
        Ok(Self { rows: n, cols: m, entries })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, row: usize, col: usize) -> Option<f64> {
        self.entries[row * self.cols + col]
    }

    /// Cost of a row-to-column selection, summed in row order so that equal
    /// selections always produce bit-identical sums.
    pub fn selection_cost(&self, row_to_col: &[usize]) -> f64 {
        row_to_col
            .iter()
            .enumerate()
            .map(|(r, &c)| self.entry(r, c).expect("selected entry must be allowed"))
            .sum()
    }
}

/// One valid data association: each row gets exactly one column, no column
/// is used twice, and no selected entry is forbidden.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub row_to_col: Vec<usize>,
    pub cost: f64,
}

/// Cost element of the ordered group used inside the solver.
///
/// The `tie` component is an exact base-(cols+1) encoding of the selected
/// columns, most significant digit first, so minimizing `(c, tie)`
/// lexicographically yields the cheapest assignment with the smallest
/// row-to-column vector. Integer arithmetic keeps ties exact where float
/// epsilon tricks would not.
#[derive(Debug, Clone, Copy, PartialEq)]
struct GroupCost {
    c: f64,
    tie: i128,
}

impl GroupCost {
    const ZERO: GroupCost = GroupCost { c: 0.0, tie: 0 };

    fn add(self, o: GroupCost) -> GroupCost {
        GroupCost { c: self.c + o.c, tie: self.tie + o.tie }
    }

    fn sub(self, o: GroupCost) -> GroupCost {
        GroupCost { c: self.c - o.c, tie: self.tie - o.tie }
    }

    fn less(&self, o: &GroupCost) -> bool {
        match self.c.partial_cmp(&o.c).expect("costs are never NaN") {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => self.tie < o.tie,
        }
    }
}

/// Per-row digit weights for the tie encoding; errors out when the matrix is
/// too large for exact 128-bit tie-breaking (far beyond tracking scale).
fn tie_weights(rows: usize, cols: usize) -> Result<Vec<i128>, AssignmentError> {
    let base = cols as i128 + 2;
    let mut weights = vec![1i128; rows];
    for r in (0..rows.saturating_sub(1)).rev() {
        weights[r] = weights[r + 1].checked_mul(base).ok_or_else(|| {
            AssignmentError::InvalidMatrix(format!(
                "matrix {rows}x{cols} too large for exact tie-breaking"
            ))
        })?;
    }
    // Headroom so sums of row digits cannot overflow during the solve.
    if let Some(w) = weights.first() {
        w.checked_mul(base * base).ok_or_else(|| {
            AssignmentError::InvalidMatrix(format!(
                "matrix {rows}x{cols} too large for exact tie-breaking"
            ))
        })?;
    }
    Ok(weights)
}

/// Forced and banned entries describing one Murty subproblem.
#[derive(Debug, Clone)]
struct Constraints {
    forced: Vec<Option<usize>>,
    banned: Vec<bool>,
}

impl Constraints {
    fn unconstrained(matrix: &CostMatrix) -> Self {
        Self {
            forced: vec![None; matrix.rows()],
            banned: vec![false; matrix.rows() * matrix.cols()],
        }
    }
}

/// Shortest-augmenting-path Hungarian over the `(cost, tie)` group.
///
/// Returns the minimal assignment for `matrix` under `constraints`, or
/// `None` when no complete assignment exists.
fn solve_constrained(
    matrix: &CostMatrix,
    constraints: &Constraints,
    tie: &[i128],
) -> Option<Assignment> {
    let n = matrix.rows();
    let m = matrix.cols();
    if n == 0 {
        return Some(Assignment { row_to_col: Vec::new(), cost: 0.0 });
    }
    if n > m {
        return None;
    }

    // Columns claimed by a forced row are unavailable to everyone else.
    let mut col_owner = vec![None; m];
    for (r, f) in constraints.forced.iter().enumerate() {
        if let Some(c) = *f {
            if col_owner[c].is_some() {
                return None;
            }
            col_owner[c] = Some(r);
        }
    }
    let entry = |r: usize, c: usize| -> Option<GroupCost> {
        if constraints.banned[r * m + c] {
            return None;
        }
        match constraints.forced[r] {
            Some(fc) if fc != c => return None,
            _ => {}
        }
        if let Some(owner) = col_owner[c] {
            if owner != r {
                return None;
            }
        }
        matrix.entry(r, c).map(|cost| GroupCost { c: cost, tie: tie[r] * c as i128 })
    };

    const FREE: usize = usize::MAX;
    let virt = m; // virtual column holding the row being inserted
    let mut u = vec![GroupCost::ZERO; n];
    let mut v = vec![GroupCost::ZERO; m + 1];
    let mut matched = vec![FREE; m + 1];

    for row in 0..n {
        matched[virt] = row;
        let mut j0 = virt;
        let mut min_to: Vec<Option<GroupCost>> = vec![None; m];
        let mut way = vec![virt; m];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta: Option<GroupCost> = None;
            let mut next_col = None;
            for j in 0..m {
                if used[j] {
                    continue;
                }
                if let Some(c) = entry(i0, j) {
                    let cur = c.sub(u[i0]).sub(v[j]);
                    if min_to[j].is_none_or(|best| cur.less(&best)) {
                        min_to[j] = Some(cur);
                        way[j] = j0;
                    }
                }
                if let Some(cand) = min_to[j] {
                    if delta.is_none_or(|d| cand.less(&d)) {
                        delta = Some(cand);
                        next_col = Some(j);
                    }
                }
            }
            let (delta, j1) = match (delta, next_col) {
                (Some(d), Some(j)) => (d, j),
                _ => return None, // current row cannot reach any free column
            };
            for j in 0..=m {
                if used[j] {
                    u[matched[j]] = u[matched[j]].add(delta);
                    v[j] = v[j].sub(delta);
                } else if let Some(x) = min_to[j] {
                    min_to[j] = Some(x.sub(delta));
                }
            }
            j0 = j1;
            if matched[j0] == FREE {
                break;
            }
        }
        while j0 != virt {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
        }
    }

    let mut row_to_col = vec![0usize; n];
    for (j, &r) in matched.iter().enumerate().take(m) {
        if r != FREE {
            row_to_col[r] = j;
        }
    }
    let cost = matrix.selection_cost(&row_to_col);
    Some(Assignment { row_to_col, cost })
}

/// Minimal-cost valid assignment, ties broken by lexicographically smallest
/// row-to-column vector.
pub fn solve_optimal(costs: &CostMatrix) -> Result<Assignment, AssignmentError> {
    let tie = tie_weights(costs.rows(), costs.cols())?;
    solve_constrained(costs, &Constraints::unconstrained(costs), &tie)
        .ok_or(AssignmentError::Infeasible)
}

#[derive(Debug)]
struct Subproblem {
    constraints: Constraints,
    solution: Assignment,
}

impl Subproblem {
    fn key(&self) -> (f64, &[usize]) {
        (self.solution.cost, &self.solution.row_to_col)
    }
}

impl PartialEq for Subproblem {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl Eq for Subproblem {}

impl Ord for Subproblem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we pop the cheapest first.
        let (ca, ra) = self.key();
        let (cb, rb) = other.key();
        cb.total_cmp(&ca).then_with(|| rb.cmp(ra))
    }
}
impl PartialOrd for Subproblem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lazy Murty enumerator: emits every valid assignment in non-decreasing
/// `(cost, lexicographic)` order, solving subproblems on demand.
#[derive(Debug)]
pub struct RankedAssignmentIterator {
    matrix: CostMatrix,
    tie: Vec<i128>,
    queue: BinaryHeap<Subproblem>,
    emitted: usize,
    solves: usize,
}

/// Builds the iterator; an infeasible matrix yields an empty iterator.
pub fn ranked_iter(costs: &CostMatrix) -> Result<RankedAssignmentIterator, AssignmentError> {
    let tie = tie_weights(costs.rows(), costs.cols())?;
    let mut it = RankedAssignmentIterator {
        matrix: costs.clone(),
        tie,
        queue: BinaryHeap::new(),
        emitted: 0,
        solves: 0,
    };
    let root = Constraints::unconstrained(&it.matrix);
    it.solves += 1;
    if let Some(solution) = solve_constrained(&it.matrix, &root, &it.tie) {
        it.queue.push(Subproblem { constraints: root, solution });
    }
    Ok(it)
}

impl RankedAssignmentIterator {
    pub fn has_next(&self) -> bool {
        !self.queue.is_empty()
    }

    /// Cost of the next assignment without consuming it.
    pub fn peek_next_cost(&self) -> Option<f64> {
        self.queue.peek().map(|s| s.solution.cost)
    }

    pub fn get_next(&mut self) -> Result<Assignment, AssignmentError> {
        let node = self.queue.pop().ok_or(AssignmentError::Exhausted)?;
        self.partition(&node);
        self.emitted += 1;
        Ok(node.solution)
    }

    /// Murty partition: fix the first `t` free-row choices and exclude the
    /// `t+1`-th, yielding disjoint subproblems that cover everything except
    /// the emitted assignment.
    fn partition(&mut self, node: &Subproblem) {
        let cols = self.matrix.cols();
        let free_rows: Vec<usize> =
            (0..self.matrix.rows()).filter(|&r| node.constraints.forced[r].is_none()).collect();
        let mut constraints = node.constraints.clone();
        for &row in &free_rows {
            let chosen = node.solution.row_to_col[row];
            let mut child = constraints.clone();
            child.banned[row * cols + chosen] = true;
            self.solves += 1;
            if let Some(solution) = solve_constrained(&self.matrix, &child, &self.tie) {
                self.queue.push(Subproblem { constraints: child, solution });
            }
            constraints.forced[row] = Some(chosen);
        }
    }

    pub fn emitted(&self) -> usize {
        self.emitted
    }

    /// Number of subproblem solves performed so far, including the initial
    /// solve; backs the laziness contract tests.
    pub fn solve_count(&self) -> usize {
        self.solves
    }
}

impl Iterator for RankedAssignmentIterator {
    type Item = Assignment;

    fn next(&mut self) -> Option<Assignment> {
        self.get_next().ok()
    }
}
