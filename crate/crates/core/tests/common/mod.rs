//! Independent oracles shared by the integration and acceptance suites.
//!
//! Everything here recomputes expected answers from first principles —
//! naive recursive walks, brute-force string enumeration, and a direct
//! interpreter over the raw JSON — so the library's subset constructions,
//! epsilon elimination, and typed evaluators are checked against something
//! that does not share their code paths.

#![allow(dead_code)]

use std::collections::BTreeSet;

use agmon_core::cfg::{Cfg, NodeKind};
use agmon_core::inclusion::SymbolNfa;
use agmon_core::skeleton::{parse_format, Symbol};

/// All strings over the type alphabet up to the given length, in
/// (length, lexicographic) order.
pub fn all_strings(max_len: usize) -> Vec<Vec<Symbol>> {
    let mut out: Vec<Vec<Symbol>> = vec![Vec::new()];
    let mut frontier: Vec<Vec<Symbol>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for s in Symbol::ALL {
                let mut w2 = w.clone();
                w2.push(s);
                next.push(w2);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Naive recursive membership for a symbol NFA: does any path from `state`
/// consume all of `w`? Every state is accepting.
pub fn naive_accepts(nfa: &SymbolNfa, w: &[Symbol]) -> bool {
    fn go(nfa: &SymbolNfa, state: usize, w: &[Symbol]) -> bool {
        match w.split_first() {
            None => true,
            Some((sym, rest)) => nfa.edges[state]
                .iter()
                .any(|(s, to)| s == sym && go(nfa, *to, rest)),
        }
    }
    go(nfa, nfa.start, w)
}

/// The language of a symbol NFA up to a length bound, by brute force.
pub fn enumerate_language(nfa: &SymbolNfa, max_len: usize) -> BTreeSet<Vec<Symbol>> {
    all_strings(max_len)
        .into_iter()
        .filter(|w| naive_accepts(nfa, w))
        .collect()
}

/// An epsilon-NFA built directly from a CFG the way the construction is
/// described: every node becomes its fragment (a plain directive chain), CFG
/// edges become epsilon moves. Acceptance is decided by a recursive walk
/// with explicit epsilon closure — no elimination involved.
pub struct EpsilonNfa {
    pub start: usize,
    pub symbol_edges: Vec<(usize, Symbol, usize)>,
    pub eps_edges: Vec<(usize, usize)>,
    pub state_count: usize,
}

impl EpsilonNfa {
    pub fn from_cfg_plain(cfg: &Cfg) -> EpsilonNfa {
        let mut symbol_edges = Vec::new();
        let mut eps_edges = Vec::new();
        let mut ports = std::collections::BTreeMap::new();
        let mut count = 0;
        for node in &cfg.nodes {
            match &node.kind {
                NodeKind::Api { format, .. } => {
                    let dirs = parse_format(format).expect("oracle formats parse");
                    let entry = count;
                    count += dirs.len() + 1;
                    for (i, d) in dirs.iter().enumerate() {
                        symbol_edges.push((entry + i, d.symbol(), entry + i + 1));
                    }
                    ports.insert(node.id.clone(), (entry, count - 1));
                }
                _ => {
                    ports.insert(node.id.clone(), (count, count));
                    count += 1;
                }
            }
        }
        for e in &cfg.edges {
            eps_edges.push((ports[&e.from].1, ports[&e.to].0));
        }
        EpsilonNfa {
            start: ports[&cfg.entry].0,
            symbol_edges,
            eps_edges,
            state_count: count,
        }
    }

    fn closure(&self, set: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut out = set.clone();
        loop {
            let mut grew = false;
            for (from, to) in &self.eps_edges {
                if out.contains(from) && out.insert(*to) {
                    grew = true;
                }
            }
            if !grew {
                return out;
            }
        }
    }

    pub fn accepts(&self, w: &[Symbol]) -> bool {
        let mut set = self.closure(&BTreeSet::from([self.start]));
        for sym in w {
            let mut next = BTreeSet::new();
            for (from, s, to) in &self.symbol_edges {
                if *s == *sym && set.contains(from) {
                    next.insert(*to);
                }
            }
            set = self.closure(&next);
            if set.is_empty() {
                return false;
            }
        }
        true
    }
}

/// Hand-built symbol NFA: the expected 3-state `int -> float -> float`
/// cycle of the case study's read loop.
pub fn expected_gps_cycle() -> SymbolNfa {
    SymbolNfa {
        state_names: vec!["c0".into(), "c1".into(), "c2".into()],
        start: 0,
        edges: vec![
            vec![(Symbol::Int, 1)],
            vec![(Symbol::Float, 2)],
            vec![(Symbol::Float, 0)],
        ],
    }
}

/// Direct interpreter over the raw assumption JSON document: walks
/// locations and variables using ad-hoc string evaluation of the guard and
/// update atoms. Shares nothing with the typed machinery.
pub mod json_oracle {
    use serde_json::Value as J;
    use std::collections::BTreeMap;

    #[derive(Debug, Clone, Copy, PartialEq)]
    pub enum V {
        I(i64),
        F(f64),
        B(bool),
        Unit,
    }

    impl V {
        fn num(self) -> f64 {
            match self {
                V::I(i) => i as f64,
                V::F(x) => x,
                V::B(_) | V::Unit => f64::NAN,
            }
        }
    }

    fn term(s: &str, env: &BTreeMap<String, V>, c: V) -> V {
        let s = s.trim();
        if s == "c" {
            return c;
        }
        if s == "true" {
            return V::B(true);
        }
        if s == "false" {
            return V::B(false);
        }
        if let Ok(i) = s.parse::<i64>() {
            return V::I(i);
        }
        if let Ok(x) = s.parse::<f64>() {
            return V::F(x);
        }
        env[s]
    }

    fn atom_holds(atom: &str, env: &BTreeMap<String, V>, c: V) -> bool {
        atom.split("||").any(|part| {
            let part = part.trim();
            for op in ["<=", ">=", "!=", "==", "<", ">", "="] {
                if let Some((l, r)) = part.split_once(op) {
                    let (a, b) = (term(l, env, c).num(), term(r, env, c).num());
                    return match op {
                        "<=" => a <= b,
                        ">=" => a >= b,
                        "!=" => a != b,
                        "==" | "=" => a == b,
                        "<" => a < b,
                        ">" => a > b,
                        _ => unreachable!(),
                    };
                }
            }
            matches!(term(part, env, c), V::B(true))
        })
    }

    /// Prefix-closed acceptance of an event list over the raw JSON machine.
    pub fn accepts(doc: &J, events: &[(&str, V)]) -> bool {
        let mut loc = doc["start"].as_str().unwrap().to_string();
        let mut env: BTreeMap<String, V> = BTreeMap::new();
        for v in doc["variables"].as_array().unwrap() {
            let name = v["name"].as_str().unwrap().to_string();
            let init = &v["init"];
            let value = if let Some(b) = init.as_bool() {
                V::B(b)
            } else if init.is_i64() {
                V::I(init.as_i64().unwrap())
            } else {
                V::F(init.as_f64().unwrap())
            };
            env.insert(name, value);
        }
        'events: for (channel, value) in events {
            for t in doc["transitions"].as_array().unwrap() {
                if t["from"].as_str() != Some(loc.as_str())
                    || t["channel"].as_str() != Some(channel)
                {
                    continue;
                }
                let guard_ok = t["guard"]
                    .as_array()
                    .map(|atoms| {
                        atoms
                            .iter()
                            .all(|a| atom_holds(a.as_str().unwrap(), &env, *value))
                    })
                    .unwrap_or(true);
                if !guard_ok {
                    continue;
                }
                let mut next_env = env.clone();
                if let Some(stmts) = t["update"].as_array() {
                    for stmt in stmts {
                        let (lhs, rhs) = stmt.as_str().unwrap().split_once(":=").unwrap();
                        next_env.insert(lhs.trim().to_string(), term(rhs, &env, *value));
                    }
                }
                env = next_env;
                loc = t["to"].as_str().unwrap().to_string();
                continue 'events;
            }
            return false;
        }
        true
    }
}
