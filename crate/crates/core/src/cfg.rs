//! Control-flow-graph IR of application code, the input to skeleton
//! extraction. Nodes are I/O API call sites, opaque computation, or exits.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeKind {
    /// Call into an I/O API with a format string, e.g. scanf("%d").
    Api {
        api: String,
        format: String,
    },
    /// Computation with no I/O effect.
    Opaque,
    Exit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CfgNode {
    pub id: String,
    #[serde(flatten)]
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CfgEdge {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cfg {
    pub entry: String,
    pub nodes: Vec<CfgNode>,
    pub edges: Vec<CfgEdge>,
}

impl Cfg {
    pub fn node(&self, id: &str) -> Option<&CfgNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn successors<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> {
        self.edges
            .iter()
            .filter(move |e| e.from == id)
            .map(|e| e.to.as_str())
    }

    /// Checks structure and returns warnings for nodes unreachable from the
    /// entry (allowed, but suspicious input).
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut ids = BTreeSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id.as_str()) {
                return Err(Error::Cfg(format!("duplicate node id `{}`", n.id)));
            }
        }
        if !ids.contains(self.entry.as_str()) {
            return Err(Error::Cfg(format!(
                "entry node `{}` is not declared",
                self.entry
            )));
        }
        for e in &self.edges {
            for end in [&e.from, &e.to] {
                if !ids.contains(end.as_str()) {
                    return Err(Error::Cfg(format!(
                        "edge {} -> {} references unknown node `{end}`",
                        e.from, e.to
                    )));
                }
            }
        }
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([self.entry.as_str()]);
        while let Some(id) = queue.pop_front() {
            if seen.insert(id) {
                queue.extend(self.successors(id));
            }
        }
        let warnings = self
            .nodes
            .iter()
            .filter(|n| !seen.contains(n.id.as_str()))
            .map(|n| format!("node `{}` is unreachable from the entry", n.id))
            .collect();
        Ok(warnings)
    }

    /// Adjacency map, for traversals.
    pub fn adjacency(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for n in &self.nodes {
            adj.entry(n.id.as_str()).or_default();
        }
        for e in &self.edges {
            adj.entry(e.from.as_str()).or_default().push(e.to.as_str());
        }
        adj
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Cfg {
        Cfg {
            entry: "n0".into(),
            nodes: vec![
                CfgNode {
                    id: "n0".into(),
                    kind: NodeKind::Opaque,
                },
                CfgNode {
                    id: "s1".into(),
                    kind: NodeKind::Api {
                        api: "scanf".into(),
                        format: "%d".into(),
                    },
                },
                CfgNode {
                    id: "x".into(),
                    kind: NodeKind::Exit,
                },
            ],
            edges: vec![
                CfgEdge {
                    from: "n0".into(),
                    to: "s1".into(),
                },
                CfgEdge {
                    from: "s1".into(),
                    to: "x".into(),
                },
            ],
        }
    }

    #[test]
    fn validates_and_round_trips() {
        let cfg = small();
        assert!(cfg.validate().unwrap().is_empty());
        let text = serde_json::to_string(&cfg).unwrap();
        let back: Cfg = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn warns_on_unreachable_node() {
        let mut cfg = small();
        cfg.nodes.push(CfgNode {
            id: "island".into(),
            kind: NodeKind::Opaque,
        });
        let warnings = cfg.validate().unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("island"));
    }

    #[test]
    fn rejects_dangling_edge() {
        let mut cfg = small();
        cfg.edges.push(CfgEdge {
            from: "s1".into(),
            to: "ghost".into(),
        });
        assert!(cfg.validate().is_err());
    }
}
