//! Hypothesis-evolution tree export in DOT format.
//!
//! One node per hypothesis within the generation window plus the nominal
//! root "head". Current-frame hypotheses are diamonds, would-collide
//! children double-octagons, everything else ellipses; the best hypothesis
//! of each frame gets a blue border. Node labels list `trackID.measID`
//! pairs (measurement id absent for missed detections; track ids red,
//! measurement ids black) over a gray frame number — the current frame is
//! suffixed `:0`, the sequence number of the single factor. Edges from a
//! plotted parent carry the child's pre-normalization weight; lineages
//! whose parent falls outside the window hang off "head" with the birth
//! frame in orange.
//!
//! Output is deterministic: identical history windows re-export
//! byte-identically.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::filter::HistoryRecord;
use crate::hypothesis::AssociationOutcome;

/// Renders the generation window `[current_frame − generations + 1,
/// current_frame]` of `history` as a DOT digraph.
pub fn export_tree(history: &[HistoryRecord], current_frame: i64, generations: usize) -> String {
    assert!(generations >= 1, "at least one generation must be plotted");
    let lo = current_frame - generations as i64 + 1;
    let mut records: Vec<&HistoryRecord> =
        history.iter().filter(|r| r.id != 0 && r.frame >= lo && r.frame <= current_frame).collect();
    records.sort_by_key(|r| r.id);
    let plotted: BTreeSet<u64> = records.iter().map(|r| r.id).collect();

    let mut out = String::new();
    out.push_str("digraph hypotheses {\n");
    out.push_str("  rankdir=LR;\n");
    out.push_str("  head [shape=box, label=\"head\"];\n");
    for r in &records {
        let shape = if r.frame == current_frame {
            "diamond"
        } else if r.would_collide {
            "doubleoctagon"
        } else {
            "ellipse"
        };
        let mut pairs: Vec<String> = Vec::new();
        for (label, outcome) in &r.associations {
            match outcome {
                AssociationOutcome::Detected(j) => {
                    pairs.push(format!("<font color=\"red\">{label}</font>.{j}"));
                }
                AssociationOutcome::Missed => {
                    pairs.push(format!("<font color=\"red\">{label}</font>"));
                }
                AssociationOutcome::Died => {}
            }
        }
        let frame_text = if r.frame == current_frame {
            format!("{}:0", r.frame)
        } else {
            format!("{}", r.frame)
        };
        let label = if pairs.is_empty() {
            format!("<font color=\"gray\">{frame_text}</font>")
        } else {
            format!("{}<br/><font color=\"gray\">{frame_text}</font>", pairs.join(", "))
        };
        let border = if r.is_best { ", color=\"blue\", penwidth=3" } else { "" };
        writeln!(out, "  h{} [shape={shape}, label=<{label}>{border}];", r.id).unwrap();
    }
    for r in &records {
        match r.parent_id {
            Some(pid) if pid != 0 && plotted.contains(&pid) => {
                writeln!(
                    out,
                    "  h{pid} -> h{} [label=\"{:.6e}\"];",
                    r.id,
                    r.pre_normalization_log_weight.exp()
                )
                .unwrap();
            }
            _ => {
                writeln!(out, "  head -> h{} [label=\"{}\", fontcolor=\"orange\"];", r.id, r.frame)
                    .unwrap();
            }
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dependence::DependentStructure;
    use crate::exec::ExecMode;
    use crate::filter::{step, FilterConfig, FilterState};
    use crate::hypothesis::{Label, MeasurementFrame};
    use std::collections::BTreeMap;

    fn record(
        id: u64,
        parent_id: Option<u64>,
        frame: i64,
        pre_w: f64,
        best: bool,
        collide: bool,
    ) -> HistoryRecord {
        HistoryRecord {
            id,
            parent_id,
            frame,
            associations: BTreeMap::new(),
            pre_normalization_log_weight: pre_w,
            normalized_log_weight: pre_w,
            would_collide: collide,
            is_best: best,
            certificate: true,
        }
    }

    /// Minimal structural check: brace balance, node declarations before
    /// edge use, one statement per line.
    fn assert_well_formed(dot: &str) {
        let lines: Vec<&str> = dot.lines().collect();
        assert_eq!(lines.first(), Some(&"digraph hypotheses {"));
        assert_eq!(lines.last(), Some(&"}"));
        let mut declared: BTreeSet<String> = BTreeSet::new();
        for line in &lines[1..lines.len() - 1] {
            if *line == "  rankdir=LR;" {
                continue;
            }
            assert!(line.starts_with("  ") && line.ends_with("];"), "bad statement: {line}");
            let body = &line[2..];
            if let Some(arrow) = body.find(" -> ") {
                let from = &body[..arrow];
                let rest = &body[arrow + 4..];
                let to = rest.split(' ').next().unwrap();
                assert!(declared.contains(from), "edge from undeclared node {from}");
                assert!(declared.contains(to), "edge to undeclared node {to}");
            } else {
                let name = body.split(' ').next().unwrap();
                declared.insert(name.to_string());
            }
        }
    }

    fn node_count(dot: &str) -> usize {
        dot.lines().filter(|l| l.contains("[shape=")).count()
    }

    fn edge_count(dot: &str) -> usize {
        dot.lines().filter(|l| l.contains(" -> ")).count()
    }

    #[test]
    fn single_hypothesis_yields_two_nodes_one_edge() {
        let history = vec![record(0, None, -1, 0.0, true, false), {
            let mut r = record(1, Some(0), 0, 0.4, true, false);
            r.associations.insert(Label::new(0, 0), AssociationOutcome::Detected(2));
            r
        }];
        let dot = export_tree(&history, 0, 1);
        assert_eq!(node_count(&dot), 2);
        assert_eq!(edge_count(&dot), 1);
        assert_well_formed(&dot);
        // The lone hypothesis is the current frame: diamond with :0 suffix,
        // head edge annotated with its frame in orange.
        assert!(dot.contains("h1 [shape=diamond"));
        assert!(dot.contains("<font color=\"red\">0-0</font>.2"));
        assert!(dot.contains("0:0</font>"));
        assert!(dot.contains("head -> h1 [label=\"0\", fontcolor=\"orange\"];"));
    }

    #[test]
    fn generation_window_limits_nodes_and_edges() {
        let mut history = vec![record(0, None, -1, 0.0, true, false)];
        let mut id = 1u64;
        for frame in 0..6i64 {
            // Three hypotheses per frame, all children of the first
            // hypothesis of the previous frame.
            let parent = if frame == 0 { 0 } else { 1 + 3 * (frame as u64 - 1) };
            for c in 0..3u64 {
                history.push(record(id, Some(parent), frame, -0.5, c == 0, false));
                id += 1;
            }
        }
        let generations = 3;
        let current = 5;
        let dot = export_tree(&history, current, generations);
        let expected_nodes: usize =
            history.iter().filter(|r| r.id != 0 && r.frame > current - generations as i64).count();
        assert_eq!(node_count(&dot), expected_nodes + 1, "window nodes plus head");
        assert_eq!(edge_count(&dot), expected_nodes, "one incoming edge per node");
        assert_well_formed(&dot);
        // Parents at the window boundary are not plotted, so their children
        // hang off head with an orange frame annotation.
        assert!(dot.contains("fontcolor=\"orange\""));
    }

    #[test]
    fn reexport_is_byte_identical() {
        let config = FilterConfig {
            max_hypotheses: 5,
            structure: DependentStructure::Collision,
            exec: ExecMode::Sequential,
            ..FilterConfig::default()
        };
        let mut state = FilterState::new();
        for n in 0..4 {
            let zs = vec![0.5 * n as f64, 5.0 + 0.4 * n as f64];
            state = step(&state, &MeasurementFrame::new(n, zs), &config).unwrap();
        }
        let a = export_tree(&state.history, state.frame, 3);
        let b = export_tree(&state.history, state.frame, 3);
        assert_eq!(a, b);
        assert_well_formed(&a);
    }

    #[test]
    fn edge_weights_sum_to_parent_share() {
        let config = FilterConfig {
            max_hypotheses: 6,
            structure: DependentStructure::Independence,
            exec: ExecMode::Sequential,
            ..FilterConfig::default()
        };
        let mut state = FilterState::new();
        for n in 0..3 {
            let zs = vec![0.3 * n as f64, 4.0 + 0.5 * n as f64];
            state = step(&state, &MeasurementFrame::new(n, zs), &config).unwrap();
        }
        let dot = export_tree(&state.history, state.frame, 100);
        // Parse weight-labeled edges back and group by parent.
        let mut sums: BTreeMap<String, f64> = BTreeMap::new();
        for line in dot.lines() {
            if let Some(arrow) = line.find(" -> ") {
                if line.contains("fontcolor=\"orange\"") {
                    continue;
                }
                let from = line[2..arrow].to_string();
                let label_start = line.find("label=\"").unwrap() + 7;
                let label_end = line[label_start..].find('"').unwrap() + label_start;
                let w: f64 = line[label_start..label_end].parse().unwrap();
                *sums.entry(from).or_default() += w;
            }
        }
        assert!(!sums.is_empty());
        for (node, sum) in sums {
            let pid: u64 = node[1..].parse().unwrap();
            let expected: f64 = state
                .history
                .iter()
                .filter(|r| r.parent_id == Some(pid))
                .map(|r| r.pre_normalization_log_weight.exp())
                .sum();
            let rel = (sum - expected).abs() / expected.max(1e-300);
            assert!(rel < 1e-6, "parent {node}: exported {sum} vs recorded {expected}");
        }
    }

    #[test]
    fn best_flag_and_collide_flag_control_styling() {
        let history = vec![
            record(0, None, -1, 0.0, true, false),
            record(1, Some(0), 0, -0.1, true, false),
            record(2, Some(0), 0, -0.2, false, false),
            record(3, Some(1), 1, -0.3, true, true),
            record(4, Some(1), 1, -0.4, false, true),
        ];
        let dot = export_tree(&history, 2, 3);
        // Frame-1 nodes are not current; the would-collide ones render as
        // double-octagons.
        assert!(dot.contains("h3 [shape=doubleoctagon"));
        assert!(dot.contains("h4 [shape=doubleoctagon"));
        assert!(dot.contains("h1 [shape=ellipse"));
        let blue: Vec<&str> = dot.lines().filter(|l| l.contains("color=\"blue\"")).collect();
        assert_eq!(blue.len(), 2, "one best node per plotted frame: {blue:?}");
        assert_well_formed(&dot);
    }
}
