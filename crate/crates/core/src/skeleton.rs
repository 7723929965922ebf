//! Skeleton extraction: format strings to type-labeled fragments, CFG
//! rewriting with fragment splicing, and epsilon elimination.
//!
//! The result is an epsilon-free NFA over the type alphabet whose directive
//! transitions remember which CFG node and format directive produced them.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cfg::{Cfg, NodeKind};
use crate::effects::{extended_fragment, ApiTable};
use crate::value::ValueType;
use crate::{Error, Result};

/// The type alphabet of skeletons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symbol {
    Int,
    Float,
    Newline,
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Symbol::Int => "int",
            Symbol::Float => "float",
            Symbol::Newline => "newline",
        };
        f.write_str(s)
    }
}

impl Symbol {
    pub const ALL: [Symbol; 3] = [Symbol::Int, Symbol::Float, Symbol::Newline];

    /// Erasure of a channel type; bool channels do not exist.
    pub fn for_channel_type(ty: ValueType) -> Option<Symbol> {
        match ty {
            ValueType::Int => Some(Symbol::Int),
            ValueType::Float => Some(Symbol::Float),
            ValueType::Unit => Some(Symbol::Newline),
            ValueType::Bool => None,
        }
    }
}

/// One conversion directive of a format string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Directive {
    Int,
    Float,
}

impl Directive {
    pub fn symbol(&self) -> Symbol {
        match self {
            Directive::Int => Symbol::Int,
            Directive::Float => Symbol::Float,
        }
    }

    pub fn value_type(&self) -> ValueType {
        match self {
            Directive::Int => ValueType::Int,
            Directive::Float => ValueType::Float,
        }
    }
}

/// Parses a scanf-style format string into its directives. Only `%d` and
/// `%f` are supported; whitespace separators are dropped.
pub fn parse_format(fmt: &str) -> Result<Vec<Directive>> {
    let mut directives = Vec::new();
    let mut chars = fmt.chars();
    while let Some(ch) = chars.next() {
        match ch {
            '%' => match chars.next() {
                Some('d') => directives.push(Directive::Int),
                Some('f') => directives.push(Directive::Float),
                Some(other) => {
                    return Err(Error::UnsupportedFormat {
                        format: fmt.to_string(),
                        offending: format!("%{other}"),
                    })
                }
                None => {
                    return Err(Error::UnsupportedFormat {
                        format: fmt.to_string(),
                        offending: "%".to_string(),
                    })
                }
            },
            c if c.is_whitespace() => {}
            other => {
                return Err(Error::UnsupportedFormat {
                    format: fmt.to_string(),
                    offending: other.to_string(),
                })
            }
        }
    }
    Ok(directives)
}

/// Provenance of a fragment transition, relative to the fragment's call site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FragmentProv {
    Directive(usize),
    SelfLoop,
    Terminator,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentTransition {
    pub from: usize,
    pub to: usize,
    pub symbol: Symbol,
    pub prov: FragmentProv,
}

/// A small NFA piece standing for one I/O API call: a single-entry,
/// single-exit chain of directive transitions, possibly with designated
/// self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonFragment {
    pub state_count: usize,
    pub entry: usize,
    pub exit: usize,
    pub transitions: Vec<FragmentTransition>,
}

/// Linear chain with one transition per directive; an empty directive list
/// collapses entry and exit into a single state.
pub fn fragment_for(directives: &[Directive]) -> SkeletonFragment {
    let transitions = directives
        .iter()
        .enumerate()
        .map(|(i, d)| FragmentTransition {
            from: i,
            to: i + 1,
            symbol: d.symbol(),
            prov: FragmentProv::Directive(i),
        })
        .collect();
    SkeletonFragment {
        state_count: directives.len() + 1,
        entry: 0,
        exit: directives.len(),
        transitions,
    }
}

/// Provenance of a skeleton transition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Directive { node: String, directive: usize },
    ApiEffectSelfLoop,
    ApiEffectTerminator,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SkelTransition {
    pub from: String,
    pub to: String,
    pub symbol: Symbol,
    pub provenance: Provenance,
}

/// Epsilon-free NFA over the type alphabet, with total transition provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skeleton {
    pub states: Vec<String>,
    pub start: String,
    pub transitions: Vec<SkelTransition>,
}

impl Skeleton {
    pub fn directive_transitions(&self) -> impl Iterator<Item = &SkelTransition> {
        self.transitions
            .iter()
            .filter(|t| matches!(t.provenance, Provenance::Directive { .. }))
    }

    /// Deterministic symbol-level walk: the set of states reachable on a
    /// symbol string. Empty means the string is rejected.
    pub fn walk(&self, symbols: &[Symbol]) -> BTreeSet<&str> {
        let mut current: BTreeSet<&str> = BTreeSet::from([self.start.as_str()]);
        for sym in symbols {
            current = self
                .transitions
                .iter()
                .filter(|t| *sym == t.symbol && current.contains(t.from.as_str()))
                .map(|t| t.to.as_str())
                .collect();
            if current.is_empty() {
                break;
            }
        }
        current
    }

    pub fn accepts_symbols(&self, symbols: &[Symbol]) -> bool {
        !self.walk(symbols).is_empty()
    }
}

/// Fragment choice for extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractionMode {
    /// Plain skeleton fragments: directives only.
    Plain,
    /// Extended fragments that model I/O API effects (newline skipping,
    /// unread line tails).
    ApiEffects,
}

struct RawNfa {
    transitions: Vec<(String, Symbol, String, Provenance)>,
    eps: Vec<(String, String)>,
    start: String,
}

/// Splices per-call fragments into the CFG, eliminates epsilon transitions,
/// prunes unreachable states, merges states with identical outgoing edges,
/// and renames states canonically in traversal order.
pub fn extract_skeleton(cfg: &Cfg, apis: &ApiTable, mode: ExtractionMode) -> Result<Skeleton> {
    cfg.validate()?;
    let raw = splice(cfg, apis, mode)?;
    let mut skeleton = eliminate_epsilon(&raw);
    merge_equivalent_states(&mut skeleton);
    Ok(canonical_rename(&skeleton))
}

fn splice(cfg: &Cfg, apis: &ApiTable, mode: ExtractionMode) -> Result<RawNfa> {
    let mut transitions = Vec::new();
    let mut eps = Vec::new();
    // in/out state names per node
    let mut ports: BTreeMap<&str, (String, String)> = BTreeMap::new();
    for node in &cfg.nodes {
        match &node.kind {
            NodeKind::Api { api, format } => {
                let model = apis.model(api)?;
                let directives = parse_format(format)?;
                let fragment = match mode {
                    ExtractionMode::Plain => fragment_for(&directives),
                    ExtractionMode::ApiEffects => extended_fragment(model, &directives),
                };
                let local = |i: usize| format!("{}.{i}", node.id);
                for t in &fragment.transitions {
                    let prov = match t.prov {
                        FragmentProv::Directive(i) => Provenance::Directive {
                            node: node.id.clone(),
                            directive: i,
                        },
                        FragmentProv::SelfLoop => Provenance::ApiEffectSelfLoop,
                        FragmentProv::Terminator => Provenance::ApiEffectTerminator,
                    };
                    transitions.push((local(t.from), t.symbol, local(t.to), prov));
                }
                ports.insert(
                    node.id.as_str(),
                    (local(fragment.entry), local(fragment.exit)),
                );
            }
            NodeKind::Opaque | NodeKind::Exit => {
                ports.insert(node.id.as_str(), (node.id.clone(), node.id.clone()));
            }
        }
    }
    for edge in &cfg.edges {
        let out = ports[edge.from.as_str()].1.clone();
        let into = ports[edge.to.as_str()].0.clone();
        eps.push((out, into));
    }
    let start = ports[cfg.entry.as_str()].0.clone();
    Ok(RawNfa {
        transitions,
        eps,
        start,
    })
}

fn eliminate_epsilon(raw: &RawNfa) -> Skeleton {
    // forward epsilon closure per state
    let mut eps_adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (from, to) in &raw.eps {
        eps_adj.entry(from.as_str()).or_default().push(to.as_str());
    }
    let closure = |state: &str| -> BTreeSet<String> {
        let mut seen = BTreeSet::from([state.to_string()]);
        let mut queue = VecDeque::from([state.to_string()]);
        while let Some(s) = queue.pop_front() {
            if let Some(nexts) = eps_adj.get(s.as_str()) {
                for n in nexts {
                    if seen.insert(n.to_string()) {
                        queue.push_back(n.to_string());
                    }
                }
            }
        }
        seen
    };

    let mut by_source: BTreeMap<&str, Vec<&(String, Symbol, String, Provenance)>> = BTreeMap::new();
    for t in &raw.transitions {
        by_source.entry(t.0.as_str()).or_default().push(t);
    }

    // reachability over closed transitions, building as we go
    let mut result: BTreeSet<SkelTransition> = BTreeSet::new();
    let mut states = BTreeSet::from([raw.start.clone()]);
    let mut queue = VecDeque::from([raw.start.clone()]);
    while let Some(state) = queue.pop_front() {
        for member in closure(&state) {
            for (_, symbol, to, prov) in by_source.get(member.as_str()).into_iter().flatten() {
                result.insert(SkelTransition {
                    from: state.clone(),
                    to: to.clone(),
                    symbol: *symbol,
                    provenance: prov.clone(),
                });
                if states.insert(to.clone()) {
                    queue.push_back(to.clone());
                }
            }
        }
    }
    Skeleton {
        states: states.into_iter().collect(),
        start: raw.start.clone(),
        transitions: result.into_iter().collect(),
    }
}

/// Merges states whose outgoing transition sets are identical; iterates to a
/// fixpoint so chains of equivalent states collapse.
fn merge_equivalent_states(sk: &mut Skeleton) {
    loop {
        let mut groups: BTreeMap<Vec<(Symbol, &str, &Provenance)>, Vec<&str>> = BTreeMap::new();
        for state in &sk.states {
            let mut key: Vec<(Symbol, &str, &Provenance)> = sk
                .transitions
                .iter()
                .filter(|t| t.from == *state)
                .map(|t| (t.symbol, t.to.as_str(), &t.provenance))
                .collect();
            key.sort();
            key.dedup();
            groups.entry(key).or_default().push(state.as_str());
        }
        let mut rename: BTreeMap<String, String> = BTreeMap::new();
        for members in groups.values() {
            if members.len() < 2 {
                continue;
            }
            let rep = members
                .iter()
                .find(|m| **m == sk.start)
                .unwrap_or(&members[0]);
            for m in members {
                if m != rep {
                    rename.insert(m.to_string(), rep.to_string());
                }
            }
        }
        if rename.is_empty() {
            return;
        }
        let map = |s: &str| rename.get(s).cloned().unwrap_or_else(|| s.to_string());
        let transitions: BTreeSet<SkelTransition> = sk
            .transitions
            .iter()
            .map(|t| SkelTransition {
                from: map(&t.from),
                to: map(&t.to),
                symbol: t.symbol,
                provenance: t.provenance.clone(),
            })
            .collect();
        sk.transitions = transitions.into_iter().collect();
        sk.states = sk
            .states
            .iter()
            .map(|s| map(s))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        sk.start = map(&sk.start);
    }
}

/// Renames states to s0, s1, ... in breadth-first symbol order from the
/// start, so equal constructions produce byte-equal artifacts.
fn canonical_rename(sk: &Skeleton) -> Skeleton {
    let mut order: Vec<&str> = Vec::new();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut queue = VecDeque::from([sk.start.as_str()]);
    seen.insert(sk.start.as_str());
    while let Some(state) = queue.pop_front() {
        order.push(state);
        let mut outs: Vec<(Symbol, &str)> = sk
            .transitions
            .iter()
            .filter(|t| t.from == state)
            .map(|t| (t.symbol, t.to.as_str()))
            .collect();
        outs.sort();
        for (_, to) in outs {
            if seen.insert(to) {
                queue.push_back(to);
            }
        }
    }
    // unreachable states were pruned during elimination, but stay defensive
    for s in &sk.states {
        if seen.insert(s.as_str()) {
            order.push(s.as_str());
        }
    }
    let names: BTreeMap<&str, String> = order
        .iter()
        .enumerate()
        .map(|(i, s)| (*s, format!("s{i}")))
        .collect();
    let mut transitions: Vec<SkelTransition> = sk
        .transitions
        .iter()
        .map(|t| SkelTransition {
            from: names[t.from.as_str()].clone(),
            to: names[t.to.as_str()].clone(),
            symbol: t.symbol,
            provenance: t.provenance.clone(),
        })
        .collect();
    transitions.sort();
    Skeleton {
        states: (0..order.len()).map(|i| format!("s{i}")).collect(),
        start: names[sk.start.as_str()].clone(),
        transitions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_basic_formats() {
        assert_eq!(
            parse_format("%d%f").unwrap(),
            vec![Directive::Int, Directive::Float]
        );
        assert_eq!(parse_format("").unwrap(), vec![]);
        assert_eq!(
            parse_format("%d %f %f").unwrap(),
            vec![Directive::Int, Directive::Float, Directive::Float]
        );
    }

    #[test]
    fn rejects_unsupported_directives() {
        let err = parse_format("%s").unwrap_err();
        assert!(err.to_string().contains("%s"));
        let err = parse_format("%d,%f").unwrap_err();
        assert!(err.to_string().contains(","));
    }

    #[test]
    fn fragment_is_a_labeled_chain() {
        let f = fragment_for(&[Directive::Int, Directive::Float]);
        assert_eq!(f.state_count, 3);
        assert_eq!((f.entry, f.exit), (0, 2));
        assert_eq!(f.transitions.len(), 2);
        assert_eq!(f.transitions[0].symbol, Symbol::Int);
        assert_eq!(f.transitions[1].symbol, Symbol::Float);
    }

    #[test]
    fn empty_fragment_is_a_single_state() {
        let f = fragment_for(&[]);
        assert_eq!(f.state_count, 1);
        assert_eq!(f.entry, f.exit);
        assert!(f.transitions.is_empty());
    }
}
