//! Language-inclusion checking between the contract assumption and the
//! extended internal assumption, plus enumeration of the undetectable
//! deviation gap.
//!
//! Full EFSM inclusion is undecidable, so the check is layered: exact
//! symbol-level NFA inclusion, sound-but-incomplete guard implication over
//! the reachable product, and bounded differential testing. `Verified` is
//! sound; `Unknown` is an honest verdict carrying the unproven obligations.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::efsm::{Efsm, Event, StepOutcome, Trace, Transition};
use crate::expr::{Clause, CmpOp, Literal, Term};
use crate::sample::{generate_trace, instantiate_symbols};
use crate::skeleton::{Skeleton, Symbol};
use crate::{Error, Result};

// --- symbol-level NFAs ------------------------------------------------------

/// An EFSM or skeleton erased to an NFA over the type alphabet. All states
/// are accepting (prefix-closed safety languages).
#[derive(Debug, Clone)]
pub struct SymbolNfa {
    pub state_names: Vec<String>,
    pub start: usize,
    /// outgoing edges per state
    pub edges: Vec<Vec<(Symbol, usize)>>,
}

impl SymbolNfa {
    pub fn from_skeleton(sk: &Skeleton) -> SymbolNfa {
        let index: BTreeMap<&str, usize> = sk
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut edges = vec![Vec::new(); sk.states.len()];
        for t in &sk.transitions {
            edges[index[t.from.as_str()]].push((t.symbol, index[t.to.as_str()]));
        }
        SymbolNfa {
            state_names: sk.states.clone(),
            start: index[sk.start.as_str()],
            edges,
        }
    }

    pub fn from_efsm(m: &Efsm) -> Result<SymbolNfa> {
        let index: BTreeMap<&str, usize> = m
            .locations
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut edges = vec![Vec::new(); m.locations.len()];
        for t in &m.transitions {
            let chan = m
                .channel(&t.channel)
                .ok_or_else(|| Error::UndeclaredChannel(t.channel.clone()))?;
            let symbol = Symbol::for_channel_type(chan.value_type)
                .ok_or_else(|| Error::Type(format!("channel `{}` has no symbol", t.channel)))?;
            edges[index[t.from.as_str()]].push((symbol, index[t.to.as_str()]));
        }
        Ok(SymbolNfa {
            state_names: m.locations.clone(),
            start: index[m.start.as_str()],
            edges,
        })
    }

    pub fn step_set(&self, set: &BTreeSet<usize>, symbol: Symbol) -> BTreeSet<usize> {
        let mut next = BTreeSet::new();
        for s in set {
            for (sym, to) in &self.edges[*s] {
                if *sym == symbol {
                    next.insert(*to);
                }
            }
        }
        next
    }

    pub fn accepts(&self, symbols: &[Symbol]) -> bool {
        let mut set = BTreeSet::from([self.start]);
        for sym in symbols {
            set = self.step_set(&set, *sym);
            if set.is_empty() {
                return false;
            }
        }
        true
    }
}

/// Result of a symbol-level inclusion check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolInclusion {
    pub holds: bool,
    /// A shortest string in L(a) \ L(b); lexicographically least among the
    /// shortest.
    pub counterexample: Option<Vec<Symbol>>,
}

type ProductState = (usize, BTreeSet<usize>);

/// Classical prefix-closed NFA inclusion via subset construction on `b` and
/// breadth-first product search.
pub fn symbol_inclusion(a: &SymbolNfa, b: &SymbolNfa) -> SymbolInclusion {
    let mut visited: BTreeSet<ProductState> = BTreeSet::new();
    let start = (a.start, BTreeSet::from([b.start]));
    let mut queue: VecDeque<(ProductState, Vec<Symbol>)> =
        VecDeque::from([(start.clone(), Vec::new())]);
    visited.insert(start);
    while let Some(((qa, bset), path)) = queue.pop_front() {
        for sym in Symbol::ALL {
            let a_next: BTreeSet<usize> = a.edges[qa]
                .iter()
                .filter(|(s, _)| *s == sym)
                .map(|(_, t)| *t)
                .collect();
            if a_next.is_empty() {
                continue;
            }
            let b_next = b.step_set(&bset, sym);
            if b_next.is_empty() {
                let mut cex = path.clone();
                cex.push(sym);
                return SymbolInclusion {
                    holds: false,
                    counterexample: Some(cex),
                };
            }
            for qa_next in a_next {
                let key = (qa_next, b_next.clone());
                if visited.insert(key.clone()) {
                    let mut next_path = path.clone();
                    next_path.push(sym);
                    queue.push_back((key, next_path));
                }
            }
        }
    }
    SymbolInclusion {
        holds: true,
        counterexample: None,
    }
}

// --- guard implication ------------------------------------------------------

fn flip(op: CmpOp) -> CmpOp {
    match op {
        CmpOp::Lt => CmpOp::Gt,
        CmpOp::Le => CmpOp::Ge,
        CmpOp::Gt => CmpOp::Lt,
        CmpOp::Ge => CmpOp::Le,
        CmpOp::Eq => CmpOp::Eq,
        CmpOp::Ne => CmpOp::Ne,
    }
}

fn translate_term(t: &Term, var_map: &BTreeMap<String, String>) -> Option<Term> {
    match t {
        Term::Var(v) => var_map.get(v).map(|w| Term::Var(w.clone())),
        other => Some(other.clone()),
    }
}

fn translate_literal(l: &Literal, var_map: &BTreeMap<String, String>) -> Option<Literal> {
    match l {
        Literal::Cmp { lhs, op, rhs } => Some(Literal::Cmp {
            lhs: translate_term(lhs, var_map)?,
            op: *op,
            rhs: translate_term(rhs, var_map)?,
        }),
        Literal::BoolVar { name, negated } => var_map.get(name).map(|w| Literal::BoolVar {
            name: w.clone(),
            negated: *negated,
        }),
        Literal::Const(b) => Some(Literal::Const(*b)),
    }
}

/// `(term, op, k)` view of a comparison against a numeric constant.
fn against_constant(l: &Literal) -> Option<(&Term, CmpOp, f64)> {
    let Literal::Cmp { lhs, op, rhs } = l else {
        return None;
    };
    match (lhs.constant(), rhs.constant()) {
        (None, Some(k)) => k.as_f64().ok().map(|k| (lhs, *op, k)),
        (Some(k), None) => k.as_f64().ok().map(|k| (rhs, flip(*op), k)),
        _ => None,
    }
}

/// Interval reasoning over constant comparisons: does `t op1 k1` force
/// `t op2 k2`? Real-number semantics; sound for both value types.
fn constant_implies(op1: CmpOp, k1: f64, op2: CmpOp, k2: f64) -> bool {
    use CmpOp::*;
    match (op1, op2) {
        (Eq, _) => {
            let ord = k1.partial_cmp(&k2);
            matches!(
                (op2, ord),
                (Lt, Some(std::cmp::Ordering::Less))
                    | (
                        Le,
                        Some(std::cmp::Ordering::Less | std::cmp::Ordering::Equal)
                    )
                    | (Gt, Some(std::cmp::Ordering::Greater))
                    | (
                        Ge,
                        Some(std::cmp::Ordering::Greater | std::cmp::Ordering::Equal)
                    )
                    | (Eq, Some(std::cmp::Ordering::Equal))
                    | (
                        Ne,
                        Some(std::cmp::Ordering::Less | std::cmp::Ordering::Greater)
                    )
            )
        }
        (Ge, Ge) | (Gt, Ge) | (Gt, Gt) | (Gt, Ne) => k1 >= k2,
        (Ge, Gt) | (Ge, Ne) => k1 > k2,
        (Le, Le) | (Lt, Le) | (Lt, Lt) | (Lt, Ne) => k1 <= k2,
        (Le, Lt) | (Le, Ne) => k1 < k2,
        (Ne, Ne) => k1 == k2,
        _ => false,
    }
}

/// Does the (already translated) literal `la` imply `lb`?
fn literal_implies(la: &Literal, lb: &Literal) -> bool {
    if la == lb {
        return true;
    }
    if matches!(lb, Literal::Const(true)) || matches!(la, Literal::Const(false)) {
        return true;
    }
    match (against_constant(la), against_constant(lb)) {
        (Some((t1, op1, k1)), Some((t2, op2, k2))) if t1 == t2 => {
            constant_implies(op1, k1, op2, k2)
        }
        _ => false,
    }
}

/// Does clause `ca` (translated) subsume `cb`: every disjunct of `ca`
/// implies some disjunct of `cb`?
fn clause_subsumes(ca: &Clause, cb: &Clause, var_map: &BTreeMap<String, String>) -> bool {
    if ca.0.is_empty() {
        // empty disjunction is false, which implies anything
        return true;
    }
    ca.0.iter().all(|la| match translate_literal(la, var_map) {
        Some(la) => cb.0.iter().any(|lb| literal_implies(&la, lb)),
        None => false,
    })
}

/// Sound check that `ga` implies `gb` under the variable correspondence, for
/// every reachable pair of corresponding valuations.
fn guard_implies(
    ga: &crate::efsm::Guard,
    gb: &crate::efsm::Guard,
    var_map: &BTreeMap<String, String>,
) -> bool {
    gb.clauses.iter().all(|cb| {
        cb.0.iter().any(|l| matches!(l, Literal::Const(true)))
            || ga.clauses.iter().any(|ca| clause_subsumes(ca, cb, var_map))
    })
}

/// Corresponding variables must be updated in lockstep for the
/// correspondence to persist across the transition pair.
fn updates_correspond(
    ua: &crate::efsm::Update,
    ub: &crate::efsm::Update,
    var_map: &BTreeMap<String, String>,
) -> bool {
    for (xa, xb) in var_map {
        let ta = ua.assignments.iter().find(|(n, _)| n == xa).map(|(_, t)| t);
        let tb = ub.assignments.iter().find(|(n, _)| n == xb).map(|(_, t)| t);
        match (ta, tb) {
            (None, None) => {}
            (Some(ta), Some(tb)) => match translate_term(ta, var_map) {
                Some(translated) if translated == *tb => {}
                _ => return false,
            },
            _ => return false,
        }
    }
    true
}

// --- the three-stage check --------------------------------------------------

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub seed: u64,
    /// Differential traces generated in stage three.
    pub traces: usize,
    /// Maximum events per generated trace.
    pub max_events: usize,
    /// Channel renaming from `a` to `b`; identity when absent.
    pub channel_map: Option<BTreeMap<String, String>>,
    /// Variable correspondence from `a` to `b`; discovered when absent.
    pub var_map: Option<BTreeMap<String, String>>,
}

impl CheckOptions {
    pub fn seeded(seed: u64) -> CheckOptions {
        CheckOptions {
            seed,
            traces: 2000,
            max_events: 50,
            channel_map: None,
            var_map: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictStatus {
    Verified,
    Falsified,
    Unknown,
}

#[derive(Debug, Clone, Serialize)]
pub struct InclusionVerdict {
    pub status: VerdictStatus,
    /// Present iff falsified: a trace accepted by `a` and rejected by `b`.
    pub witness: Option<Trace>,
    pub explanation: String,
    /// Guard obligations that could not be proven (unknown verdicts).
    pub obligations: Vec<String>,
}

fn identity_channel_map(a: &Efsm) -> BTreeMap<String, String> {
    a.channels
        .iter()
        .map(|c| (c.name.clone(), c.name.clone()))
        .collect()
}

fn check_alphabets(a: &Efsm, b: &Efsm, map: &BTreeMap<String, String>) -> Result<()> {
    let used: BTreeSet<&str> = a.transitions.iter().map(|t| t.channel.as_str()).collect();
    for name in used {
        let target = map.get(name).ok_or_else(|| {
            Error::IncompatibleAlphabets(format!("no mapping for channel `{name}`"))
        })?;
        let ca = a
            .channel(name)
            .ok_or_else(|| Error::UndeclaredChannel(name.to_string()))?;
        let cb = b.channel(target).ok_or_else(|| {
            Error::IncompatibleAlphabets(format!(
                "channel `{name}` maps to `{target}`, which `b` does not declare"
            ))
        })?;
        if ca.value_type != cb.value_type {
            return Err(Error::IncompatibleAlphabets(format!(
                "channel `{name}` ({}) maps to `{target}` ({})",
                ca.value_type, cb.value_type
            )));
        }
    }
    Ok(())
}

fn map_trace(t: &Trace, map: &BTreeMap<String, String>) -> Trace {
    Trace::new(
        t.iter()
            .map(|e| Event {
                channel: map
                    .get(&e.channel)
                    .cloned()
                    .unwrap_or_else(|| e.channel.clone()),
                value: e.value,
            })
            .collect(),
    )
}

/// Variable correspondence discovery: name identity first (same name, type,
/// and initial value), then update-shape matching — variables assigned the
/// same right-hand sides on the same channels. A wrong guess costs only
/// completeness: every matched transition pair still has to keep the
/// correspondence in lockstep before an obligation counts as proven.
fn discover_var_map(
    a: &Efsm,
    b: &Efsm,
    chan_map: &BTreeMap<String, String>,
) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    let mut taken: BTreeSet<String> = BTreeSet::new();
    for va in &a.variables {
        if let Some(vb) = b.variables.iter().find(|vb| vb.name == va.name) {
            if va.value_type == vb.value_type && va.init == vb.init {
                map.insert(va.name.clone(), vb.name.clone());
                taken.insert(vb.name.clone());
            }
        }
    }
    // (channel, rhs) pairs of the simple assignments storing a variable;
    // channels on the `a` side are mapped into `b`'s vocabulary
    let shape = |m: &Efsm, var: &str, rename: bool| -> Option<BTreeSet<(String, String)>> {
        let mut set = BTreeSet::new();
        for t in &m.transitions {
            for (name, term) in &t.update.assignments {
                if name != var {
                    continue;
                }
                if matches!(term, Term::Var(_)) {
                    // shapes over other variables would need the very map
                    // being built
                    return None;
                }
                let chan = if rename {
                    chan_map.get(&t.channel)?.clone()
                } else {
                    t.channel.clone()
                };
                set.insert((chan, term.to_string()));
            }
        }
        (!set.is_empty()).then_some(set)
    };
    for va in &a.variables {
        if map.contains_key(&va.name) {
            continue;
        }
        let Some(sa) = shape(a, &va.name, true) else {
            continue;
        };
        let candidates: Vec<&str> = b
            .variables
            .iter()
            .filter(|vb| {
                !taken.contains(&vb.name)
                    && vb.value_type == va.value_type
                    && vb.init == va.init
                    && shape(b, &vb.name, false).as_ref() == Some(&sa)
            })
            .map(|vb| vb.name.as_str())
            .collect();
        if let [only] = candidates.as_slice() {
            map.insert(va.name.clone(), only.to_string());
            taken.insert(only.to_string());
        }
    }
    map
}

/// A supplied correspondence is only sound when both sides exist with equal
/// types and initial values; anything else would poison the induction that
/// guard implication relies on.
fn validate_var_map(a: &Efsm, b: &Efsm, map: &BTreeMap<String, String>) -> Result<()> {
    for (xa, xb) in map {
        let va = a
            .variables
            .iter()
            .find(|v| v.name == *xa)
            .ok_or_else(|| Error::Validation(format!("variable map names unknown `{xa}`")))?;
        let vb = b
            .variables
            .iter()
            .find(|v| v.name == *xb)
            .ok_or_else(|| Error::Validation(format!("variable map names unknown `{xb}`")))?;
        if va.value_type != vb.value_type || va.init != vb.init {
            return Err(Error::Validation(format!(
                "variable map `{xa}` -> `{xb}`: types or initial values differ"
            )));
        }
    }
    Ok(())
}

/// Walks the reachable channel-level product and collects every guard
/// obligation that could not be proven. Empty result means stage two proved
/// inclusion outright.
fn guard_obligations(
    a: &Efsm,
    b: &Efsm,
    chan_map: &BTreeMap<String, String>,
    var_map: &BTreeMap<String, String>,
) -> Vec<String> {
    let mut obligations = BTreeSet::new();
    let mut visited: BTreeSet<(String, BTreeSet<String>)> = BTreeSet::new();
    let start = (a.start.clone(), BTreeSet::from([b.start.clone()]));
    let mut queue = VecDeque::from([start.clone()]);
    visited.insert(start);
    while let Some((qa, bset)) = queue.pop_front() {
        for ta in a.transitions.iter().filter(|t| t.from == qa) {
            let Some(ch_b) = chan_map.get(&ta.channel) else {
                obligations.insert(format!(
                    "channel `{}` of `a` has no counterpart in `b`",
                    ta.channel
                ));
                continue;
            };
            let matches: Vec<&Transition> = b
                .transitions
                .iter()
                .filter(|tb| tb.channel == *ch_b && bset.contains(&tb.from))
                .collect();
            if matches.is_empty() {
                obligations.insert(format!(
                    "at ({qa}, {{{}}}): no `b` transition on channel `{ch_b}`",
                    set_to_string(&bset)
                ));
                continue;
            }
            let proven: Vec<&&Transition> = matches
                .iter()
                .filter(|tb| {
                    guard_implies(&ta.guard, &tb.guard, var_map)
                        && updates_correspond(&ta.update, &tb.update, var_map)
                })
                .collect();
            let next_set: BTreeSet<String> = if proven.is_empty() {
                let gb: Vec<String> = matches
                    .iter()
                    .map(|tb| format!("[{}]", guard_to_string(&tb.guard)))
                    .collect();
                obligations.insert(format!(
                    "at ({qa}, {{{}}}) on `{}`: guard [{}] not shown to imply any of {}",
                    set_to_string(&bset),
                    ta.channel,
                    guard_to_string(&ta.guard),
                    gb.join(", ")
                ));
                // keep exploring to surface further obligations
                matches.iter().map(|tb| tb.to.clone()).collect()
            } else {
                proven.iter().map(|tb| tb.to.clone()).collect()
            };
            let key = (ta.to.clone(), next_set);
            if visited.insert(key.clone()) {
                queue.push_back(key);
            }
        }
    }
    obligations.into_iter().collect()
}

fn set_to_string(set: &BTreeSet<String>) -> String {
    set.iter().cloned().collect::<Vec<_>>().join(",")
}

fn guard_to_string(g: &crate::efsm::Guard) -> String {
    g.clauses
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(" && ")
}

fn symbols_to_string(symbols: &[Symbol]) -> String {
    symbols
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Lockstep narration of a witness through both machines.
fn explain_witness(a: &Efsm, b: &Efsm, map: &BTreeMap<String, String>, w: &Trace) -> String {
    let mut lines = Vec::new();
    let mut sa = a.initial_state();
    let mut sb = b.initial_state();
    for e in w.iter() {
        let eb = Event {
            channel: map
                .get(&e.channel)
                .cloned()
                .unwrap_or_else(|| e.channel.clone()),
            value: e.value,
        };
        let la = sa.locations().join(",");
        let lb = sb.locations().join(",");
        match b.step(&sb, &eb) {
            Ok(StepOutcome::Advanced(next)) => {
                lines.push(format!("{e}: a at {{{la}}}, b at {{{lb}}} -> advance"));
                sb = next;
            }
            Ok(StepOutcome::GuardRejected { failed_atoms, .. }) => {
                lines.push(format!(
                    "{e}: a at {{{la}}}, b at {{{lb}}} -> b rejects (failed: {})",
                    failed_atoms.join("; ")
                ));
                break;
            }
            Ok(StepOutcome::NoChannelMatch) => {
                lines.push(format!(
                    "{e}: a at {{{la}}}, b at {{{lb}}} -> b has no transition on this channel"
                ));
                break;
            }
            Err(err) => {
                lines.push(format!("{e}: b errors: {err}"));
                break;
            }
        }
        if let Ok(StepOutcome::Advanced(next)) = a.step(&sa, e) {
            sa = next;
        }
    }
    lines.join("\n")
}

/// Checks that every trace of `a` is a trace of `b`.
///
/// Stage one: exact symbol-level inclusion. Stage two: guard implication
/// over the reachable product. Stage three: bounded differential testing.
/// `Verified` requires stages one and two to close every obligation.
pub fn check_inclusion(a: &Efsm, b: &Efsm, opts: &CheckOptions) -> Result<InclusionVerdict> {
    let chan_map = opts
        .channel_map
        .clone()
        .unwrap_or_else(|| identity_channel_map(a));
    check_alphabets(a, b, &chan_map)?;

    // stage one: symbol inclusion
    let na = SymbolNfa::from_efsm(a)?;
    let nb = SymbolNfa::from_efsm(b)?;
    let sym = symbol_inclusion(&na, &nb);
    if let Some(cex) = sym.counterexample {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        match instantiate_symbols(a, &cex, &mut rng) {
            Some(witness) => {
                let mapped = map_trace(&witness, &chan_map);
                debug_assert!(!b.accepts(&mapped)?);
                let explanation = format!(
                    "symbol-level counterexample: {}\n{}",
                    symbols_to_string(&cex),
                    explain_witness(a, b, &chan_map, &witness)
                );
                return Ok(InclusionVerdict {
                    status: VerdictStatus::Falsified,
                    witness: Some(witness),
                    explanation,
                    obligations: Vec::new(),
                });
            }
            None => {
                return Ok(InclusionVerdict {
                    status: VerdictStatus::Unknown,
                    witness: None,
                    explanation: format!(
                        "symbol inclusion fails on {} but no guard-feasible instantiation was found",
                        symbols_to_string(&cex)
                    ),
                    obligations: vec![format!(
                        "instantiate symbol counterexample: {}",
                        symbols_to_string(&cex)
                    )],
                });
            }
        }
    }

    // stage two: guard subsumption over the product
    let var_map = match &opts.var_map {
        Some(supplied) => {
            validate_var_map(a, b, supplied)?;
            supplied.clone()
        }
        None => discover_var_map(a, b, &chan_map),
    };
    let obligations = guard_obligations(a, b, &chan_map, &var_map);
    if obligations.is_empty() {
        return Ok(InclusionVerdict {
            status: VerdictStatus::Verified,
            witness: None,
            explanation: "symbol inclusion holds and every guard obligation was proven".to_string(),
            obligations: Vec::new(),
        });
    }

    // stage three: bounded differential testing
    let found: Option<Trace> = (0..opts.traces as u64).into_par_iter().find_map_first(|i| {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(i));
        let len = rng.gen_range(1..=opts.max_events.max(1));
        let t = generate_trace(a, &mut rng, len);
        let mapped = map_trace(&t, &chan_map);
        match b.accepts(&mapped) {
            Ok(true) => None,
            Ok(false) => Some(t),
            Err(_) => Some(t),
        }
    });
    if let Some(full) = found {
        let witness = trim_to_rejection(b, &chan_map, &full);
        let explanation = explain_witness(a, b, &chan_map, &witness);
        return Ok(InclusionVerdict {
            status: VerdictStatus::Falsified,
            witness: Some(witness),
            explanation,
            obligations,
        });
    }
    Ok(InclusionVerdict {
        status: VerdictStatus::Unknown,
        witness: None,
        explanation: format!(
            "{} guard obligation(s) unproven; {} differential traces found no counterexample",
            obligations.len(),
            opts.traces
        ),
        obligations,
    })
}

/// Shortest prefix of `t` that `b` rejects. Prefix closure of `a` keeps the
/// result a valid witness.
fn trim_to_rejection(b: &Efsm, chan_map: &BTreeMap<String, String>, t: &Trace) -> Trace {
    let mut state = b.initial_state();
    for (i, e) in t.iter().enumerate() {
        let eb = Event {
            channel: chan_map
                .get(&e.channel)
                .cloned()
                .unwrap_or_else(|| e.channel.clone()),
            value: e.value,
        };
        match b.step(&state, &eb) {
            Ok(StepOutcome::Advanced(next)) => state = next,
            _ => return Trace::new(t.events[..=i].to_vec()),
        }
    }
    t.clone()
}

// --- undetectable deviations -------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationKind {
    /// Rejected by `a` at the symbol level.
    Structural,
    /// Symbol-accepted by `a` but value-rejected by its guards.
    GuardLevel,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeviationWitness {
    pub symbols: Vec<Symbol>,
    pub kind: DeviationKind,
    /// Concrete instantiation accepted by `b` and rejected by `a`, when one
    /// was found.
    pub trace: Option<Trace>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeviationReport {
    pub bound: usize,
    pub witnesses: Vec<DeviationWitness>,
}

impl DeviationReport {
    pub fn is_empty(&self) -> bool {
        self.witnesses.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct DeviationOptions {
    pub seed: u64,
    /// Random walks on `b` used to hunt guard-level deviations.
    pub guard_walks: usize,
    pub max_witnesses: usize,
    pub channel_map: Option<BTreeMap<String, String>>,
}

impl DeviationOptions {
    pub fn seeded(seed: u64) -> DeviationOptions {
        DeviationOptions {
            seed,
            guard_walks: 400,
            max_witnesses: 100,
            channel_map: None,
        }
    }
}

/// Enumerates the deviation gap L(b) \ L(a) up to `bound`: minimal symbol
/// strings accepted by the internal assumption but rejected by the contract
/// assumption, plus value-level deviations found by sampling. Every reported
/// witness replays as rejected-by-a / accepted-by-b.
pub fn undetectable_deviations(
    a: &Efsm,
    b: &Efsm,
    bound: usize,
    opts: &DeviationOptions,
) -> Result<DeviationReport> {
    if bound > 12 {
        return Err(Error::Validation(
            "deviation bound larger than 12 is not supported".to_string(),
        ));
    }
    let chan_map = opts
        .channel_map
        .clone()
        .unwrap_or_else(|| identity_channel_map(a));
    // trace-level replay needs the map inverted
    let inverse: BTreeMap<String, String> = chan_map
        .iter()
        .map(|(k, v)| (v.clone(), k.clone()))
        .collect();
    let invertible = inverse.len() == chan_map.len();

    let na = SymbolNfa::from_efsm(a)?;
    let nb = SymbolNfa::from_efsm(b)?;

    // minimal symbol strings in L(b) \ L(a)
    let mut structural: Vec<Vec<Symbol>> = Vec::new();
    let mut stack = vec![(
        BTreeSet::from([na.start]),
        BTreeSet::from([nb.start]),
        Vec::new(),
    )];
    while let Some((aset, bset, path)) = stack.pop() {
        if path.len() >= bound {
            continue;
        }
        // reversed symbol order: the stack pops lexicographically
        for sym in Symbol::ALL.iter().rev() {
            let b_next = nb.step_set(&bset, *sym);
            if b_next.is_empty() {
                continue;
            }
            let a_next = na.step_set(&aset, *sym);
            let mut next_path = path.clone();
            next_path.push(*sym);
            if a_next.is_empty() {
                structural.push(next_path);
            } else {
                stack.push((a_next, b_next, next_path));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut witnesses: Vec<DeviationWitness> = Vec::new();
    let mut seen_symbols: BTreeSet<Vec<Symbol>> = BTreeSet::new();
    for symbols in structural {
        let trace = instantiate_symbols(b, &symbols, &mut rng);
        if let (Some(t), true) = (&trace, invertible) {
            debug_assert!(!a.accepts(&map_trace(t, &inverse))?);
        }
        seen_symbols.insert(symbols.clone());
        witnesses.push(DeviationWitness {
            symbols,
            kind: DeviationKind::Structural,
            trace,
        });
    }

    // guard-level deviations: walk b, replay on a
    if invertible && bound > 0 {
        for i in 0..opts.guard_walks as u64 {
            let mut walk_rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1 + i));
            let len = walk_rng.gen_range(1..=bound);
            let t = generate_trace(b, &mut walk_rng, len);
            if t.is_empty() {
                continue;
            }
            let on_a = map_trace(&t, &inverse);
            if a.accepts(&on_a)? {
                continue;
            }
            let trimmed = trim_to_rejection(a, &BTreeMap::new(), &on_a);
            let symbols: Vec<Symbol> = trimmed
                .iter()
                .map(|e| {
                    Symbol::for_channel_type(a.channel(&e.channel).unwrap().value_type).unwrap()
                })
                .collect();
            // structurally rejected prefixes are already reported
            if !na.accepts(&symbols) || !seen_symbols.insert(symbols.clone()) {
                continue;
            }
            witnesses.push(DeviationWitness {
                symbols,
                kind: DeviationKind::GuardLevel,
                trace: Some(map_trace(&trimmed, &chan_map)),
            });
        }
    }

    witnesses.sort_by(|x, y| {
        (
            x.symbols.len(),
            &x.symbols,
            x.kind == DeviationKind::GuardLevel,
        )
            .cmp(&(
                y.symbols.len(),
                &y.symbols,
                y.kind == DeviationKind::GuardLevel,
            ))
    });
    witnesses.truncate(opts.max_witnesses);
    Ok(DeviationReport { bound, witnesses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_clause;

    fn clause(s: &str) -> Clause {
        parse_clause(s).unwrap()
    }

    fn guard(atoms: &[&str]) -> crate::efsm::Guard {
        crate::efsm::Guard {
            clauses: atoms.iter().map(|s| clause(s)).collect(),
        }
    }

    fn identity(names: &[&str]) -> BTreeMap<String, String> {
        names
            .iter()
            .map(|n| (n.to_string(), n.to_string()))
            .collect()
    }

    #[test]
    fn interval_implication_rules() {
        let vm = identity(&[]);
        assert!(guard_implies(
            &guard(&["c >= -90.0"]),
            &guard(&["c >= -180.0"]),
            &vm
        ));
        assert!(!guard_implies(
            &guard(&["c >= -90.0"]),
            &guard(&["c >= -45.0"]),
            &vm
        ));
        assert!(guard_implies(
            &guard(&["c <= 90.0"]),
            &guard(&["c <= 180.0"]),
            &vm
        ));
        assert!(guard_implies(
            &guard(&["c == 5"]),
            &guard(&["c >= 0", "c <= 10"]),
            &vm
        ));
        assert!(guard_implies(&guard(&["c > 0"]), &guard(&["c != 0"]), &vm));
        assert!(!guard_implies(
            &guard(&["c >= 0"]),
            &guard(&["c != 0"]),
            &vm
        ));
    }

    #[test]
    fn empty_candidate_guard_is_always_implied() {
        let vm = identity(&[]);
        assert!(guard_implies(&guard(&[]), &guard(&[]), &vm));
        assert!(guard_implies(&guard(&["c >= 0"]), &guard(&[]), &vm));
    }

    #[test]
    fn identical_disjunctions_subsume() {
        let vm = identity(&["first", "last_time"]);
        let g = guard(&["c >= 0", "first || c >= last_time"]);
        assert!(guard_implies(&g, &g, &vm));
    }

    #[test]
    fn variable_comparison_needs_the_correspondence() {
        let empty = BTreeMap::new();
        let g = guard(&["c >= last_time"]);
        assert!(!guard_implies(&g, &g, &empty));
        assert!(guard_implies(&g, &g, &identity(&["last_time"])));
    }

    #[test]
    fn lockstep_updates_required() {
        let vm = identity(&["last_time"]);
        let store = crate::efsm::Update {
            assignments: vec![("last_time".to_string(), Term::Chan)],
        };
        let skip = crate::efsm::Update::default();
        assert!(updates_correspond(&store, &store, &vm));
        assert!(!updates_correspond(&store, &skip, &vm));
        assert!(updates_correspond(&skip, &skip, &vm));
    }
}
