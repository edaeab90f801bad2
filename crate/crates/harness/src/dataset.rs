//! Graph plus ground-truth labels, with validation against reference sizes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use adadif::{load_graph, Graph};
use serde::Serialize;

use crate::error::{Error, Result};

/// Ground-truth labels for every node; an empty set marks an unlabeled node.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Original label ids, ascending; class `c` is `class_ids[c]`.
    pub class_ids: Vec<u64>,
    pub labels: Vec<Vec<usize>>,
    pub multilabel: bool,
}

impl GroundTruth {
    pub fn num_classes(&self) -> usize {
        self.class_ids.len()
    }

    /// Nodes with at least one label, ascending.
    pub fn labeled_nodes(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| !self.labels[i].is_empty()).collect()
    }

    /// Members of each class, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_classes()];
        for (i, set) in self.labels.iter().enumerate() {
            for &c in set {
                out[c].push(i);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LabelOptions {
    /// Skip labels of nodes missing from the graph instead of failing.
    pub drop_unknown_nodes: bool,
}

/// Reads `node_id label_id` pairs; a node listed with several labels is
/// multilabeled. Lines starting with `#` and blank lines are skipped.
pub fn load_labels<R: BufRead>(reader: R, graph: &Graph, options: LabelOptions) -> Result<GroundTruth> {
    let mut pairs: Vec<(usize, u64)> = Vec::new();
    let mut dropped = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Labels {
            line: line_no,
            message: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::Labels {
                line: line_no,
                message: format!("expected 2 fields, found {}", fields.len()),
            });
        }
        let parse = |s: &str, what: &str| {
            s.parse::<u64>().map_err(|_| Error::Labels {
                line: line_no,
                message: format!("invalid {what} {s:?}"),
            })
        };
        let node = parse(fields[0], "node id")?;
        let label = parse(fields[1], "label id")?;
        match graph.index_of(node) {
            Some(i) => pairs.push((i, label)),
            None if options.drop_unknown_nodes => dropped += 1,
            None => {
                return Err(Error::Labels {
                    line: line_no,
                    message: format!("node {node} does not appear in the graph"),
                })
            }
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} labels of nodes absent from the graph");
    }
    if pairs.is_empty() {
        return Err(Error::Labels {
            line: 0,
            message: "no labels".into(),
        });
    }
    let mut class_ids: Vec<u64> = pairs.iter().map(|p| p.1).collect();
    class_ids.sort_unstable();
    class_ids.dedup();
    let mut labels = vec![Vec::new(); graph.num_nodes()];
    for (i, l) in pairs {
        let c = class_ids.binary_search(&l).expect("collected above");
        if !labels[i].contains(&c) {
            labels[i].push(c);
        }
    }
    for set in &mut labels {
        set.sort_unstable();
    }
    let multilabel = labels.iter().any(|s| s.len() > 1);
    Ok(GroundTruth {
        class_ids,
        labels,
        multilabel,
    })
}

/// Reference sizes of a public benchmark graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KnownStats {
    pub name: &'static str,
    pub nodes: usize,
    pub edges: usize,
    pub classes: usize,
    pub multilabel: bool,
}

pub const KNOWN_DATASETS: [KnownStats; 6] = [
    KnownStats { name: "citeseer", nodes: 3233, edges: 9464, classes: 6, multilabel: false },
    KnownStats { name: "cora", nodes: 2708, edges: 10858, classes: 7, multilabel: false },
    KnownStats { name: "pubmed", nodes: 19717, edges: 88676, classes: 3, multilabel: false },
    KnownStats { name: "ppi", nodes: 3890, edges: 76584, classes: 50, multilabel: true },
    KnownStats { name: "wikipedia", nodes: 4733, edges: 184182, classes: 40, multilabel: true },
    KnownStats { name: "blogcatalog", nodes: 10312, edges: 333983, classes: 39, multilabel: true },
];

pub fn known_stats(name: &str) -> Option<KnownStats> {
    let key = name.to_ascii_lowercase();
    KNOWN_DATASETS.iter().copied().find(|k| k.name == key)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub nodes: usize,
    /// Undirected edges, each counted once.
    pub edges: usize,
    /// Nonzeros of the symmetric adjacency.
    pub stored_entries: usize,
    /// Data lines of the edge file.
    pub edge_records: usize,
    pub classes: usize,
    pub labeled_nodes: usize,
    pub multilabel: bool,
    pub components: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub name: String,
    pub observed: DatasetStats,
    pub expected: Option<KnownStats>,
    pub ok: bool,
    pub diffs: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub truth: GroundTruth,
}

impl Dataset {
    pub fn stats(&self) -> DatasetStats {
        DatasetStats {
            nodes: self.graph.num_nodes(),
            edges: self.graph.num_edges(),
            stored_entries: self.graph.num_entries(),
            edge_records: self.graph.edge_records(),
            classes: self.truth.num_classes(),
            labeled_nodes: self.truth.labeled_nodes().len(),
            multilabel: self.truth.multilabel,
            components: self.graph.num_components(),
        }
    }

    /// Restriction to the largest connected component. Classes keep their
    /// numbering even if some lose every member.
    pub fn largest_component(&self) -> Result<Dataset> {
        let (graph, parent) = self.graph.largest_component()?;
        let labels = parent.iter().map(|&i| self.truth.labels[i].clone()).collect();
        Ok(Dataset {
            name: self.name.clone(),
            graph,
            truth: GroundTruth {
                class_ids: self.truth.class_ids.clone(),
                labels,
                multilabel: self.truth.multilabel,
            },
        })
    }

    /// Compares with the reference sizes when the name is a known benchmark.
    /// Published edge counts mix conventions, so |E| matches if it equals
    /// the undirected count, the adjacency nonzeros, or twice the edge-file
    /// lines.
    pub fn validate(&self) -> StatsReport {
        let observed = self.stats();
        let expected = known_stats(&self.name);
        let mut diffs = Vec::new();
        if let Some(k) = expected {
            if observed.nodes != k.nodes {
                diffs.push(format!("N: expected {}, found {}", k.nodes, observed.nodes));
            }
            let edge_views = [
                observed.edges,
                observed.stored_entries,
                2 * observed.edge_records,
            ];
            if !edge_views.contains(&k.edges) {
                diffs.push(format!(
                    "|E|: expected {}, found {} undirected / {} stored / {} lines",
                    k.edges, observed.edges, observed.stored_entries, observed.edge_records
                ));
            }
            if observed.classes != k.classes {
                diffs.push(format!("|Y|: expected {}, found {}", k.classes, observed.classes));
            }
            if observed.multilabel != k.multilabel {
                diffs.push(format!(
                    "multilabel: expected {}, found {}",
                    k.multilabel, observed.multilabel
                ));
            }
        }
        StatsReport {
            name: self.name.clone(),
            ok: diffs.is_empty(),
            observed,
            expected,
            diffs,
        }
    }
}

/// Reads an edge list and a label file without checking reference sizes.
pub fn read_dataset(name: &str, edges: &Path, labels: &Path, options: LabelOptions) -> Result<Dataset> {
    let open = |p: &Path| File::open(p).map(BufReader::new).map_err(|e| Error::io(p, e));
    let graph = load_graph(open(edges)?)?;
    let truth = load_labels(open(labels)?, &graph, options)?;
    Ok(Dataset {
        name: name.to_string(),
        graph,
        truth,
    })
}

/// Loads an edge list and a label file. A known dataset name must match
/// its reference sizes or loading fails with the differences.
pub fn load_dataset(
    name: &str,
    edges: &Path,
    labels: &Path,
    options: LabelOptions,
) -> Result<Dataset> {
    let dataset = read_dataset(name, edges, labels, options)?;
    let report = dataset.validate();
    if !report.ok {
        return Err(Error::Stats {
            name: name.to_string(),
            diff: report.diffs.join("; "),
        });
    }
    Ok(dataset)
}

/// Looks for `<name>.edges` and `<name>.labels` in `dir`.
pub fn dataset_paths(dir: &Path, name: &str) -> Option<(std::path::PathBuf, std::path::PathBuf)> {
    let edges = dir.join(format!("{name}.edges"));
    let labels = dir.join(format!("{name}.labels"));
    (edges.is_file() && labels.is_file()).then_some((edges, labels))
}

/// Histogram of class sizes keyed by original label id.
pub fn class_sizes(truth: &GroundTruth) -> BTreeMap<u64, usize> {
    truth
        .members()
        .iter()
        .enumerate()
        .map(|(c, m)| (truth.class_ids[c], m.len()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph() -> Graph {
        load_graph("10 20\n20 30\n30 40\n".as_bytes()).unwrap()
    }

    #[test]
    fn labels_map_to_graph_indices() {
        let g = path_graph();
        let t = load_labels("# c\n30 7\n10 3\n20 7\n".as_bytes(), &g, LabelOptions::default()).unwrap();
        assert_eq!(t.class_ids, vec![3, 7]);
        assert_eq!(t.labels, vec![vec![0], vec![1], vec![1], vec![]]);
        assert!(!t.multilabel);
        assert_eq!(t.labeled_nodes(), vec![0, 1, 2]);
    }

    #[test]
    fn repeated_node_is_multilabel() {
        let g = path_graph();
        let t = load_labels("10 1\n10 2\n20 1\n".as_bytes(), &g, LabelOptions::default()).unwrap();
        assert!(t.multilabel);
        assert_eq!(t.labels[0], vec![0, 1]);
    }

    #[test]
    fn unknown_nodes_rejected_or_dropped() {
        let g = path_graph();
        let err = load_labels("99 1\n".as_bytes(), &g, LabelOptions::default()).unwrap_err();
        assert!(err.to_string().contains("line 1"));
        let opts = LabelOptions {
            drop_unknown_nodes: true,
        };
        let t = load_labels("99 1\n10 2\n".as_bytes(), &g, opts).unwrap();
        assert_eq!(t.num_classes(), 1);
    }

    #[test]
    fn malformed_label_lines() {
        let g = path_graph();
        assert!(load_labels("10\n".as_bytes(), &g, LabelOptions::default()).is_err());
        assert!(load_labels("10 x\n".as_bytes(), &g, LabelOptions::default()).is_err());
        assert!(load_labels("".as_bytes(), &g, LabelOptions::default()).is_err());
    }

    #[test]
    fn largest_component_keeps_labels_aligned() {
        let g = load_graph("1 2\n2 3\n7 8\n".as_bytes()).unwrap();
        let truth = load_labels("1 0\n3 1\n8 1\n".as_bytes(), &g, LabelOptions::default()).unwrap();
        let ds = Dataset {
            name: "toy".into(),
            graph: g,
            truth,
        };
        let lcc = ds.largest_component().unwrap();
        assert_eq!(lcc.graph.original_ids(), &[1, 2, 3]);
        assert_eq!(lcc.truth.labels, vec![vec![0], vec![], vec![1]]);
    }

    #[test]
    fn known_name_triggers_validation() {
        let g = path_graph();
        let truth = load_labels("10 1\n".as_bytes(), &g, LabelOptions::default()).unwrap();
        let ds = Dataset {
            name: "Cora".into(),
            graph: g.clone(),
            truth: truth.clone(),
        };
        let report = ds.validate();
        assert!(!report.ok);
        assert_eq!(report.diffs.len(), 3);
        let custom = Dataset {
            name: "toy".into(),
            graph: g,
            truth,
        };
        assert!(custom.validate().ok);
    }
}
