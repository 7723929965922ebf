//! Random trace generation from a machine: uniform walks over enabled
//! transitions with guard-satisfying values sampled from the intervals the
//! guard atoms imply. Endpoints are chosen with probability 0.25, since
//! boundary values are where guard subsumption breaks.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::efsm::{Config, Efsm, Event, Guard, StepOutcome, Trace, Valuation};
use crate::expr::{CmpOp, Literal, Term};
use crate::skeleton::Symbol;
use crate::value::{Value, ValueType};

const BOUNDARY_PROB: f64 = 0.25;
const DEFAULT_SPAN: f64 = 1000.0;

#[derive(Debug, Default, Clone)]
struct Bounds {
    lo: Option<(f64, bool)>, // (bound, strict)
    hi: Option<(f64, bool)>,
    eq: Option<f64>,
    ne: Vec<f64>,
}

impl Bounds {
    fn add(&mut self, op: CmpOp, k: f64) {
        match op {
            CmpOp::Ge => self.tighten_lo(k, false),
            CmpOp::Gt => self.tighten_lo(k, true),
            CmpOp::Le => self.tighten_hi(k, false),
            CmpOp::Lt => self.tighten_hi(k, true),
            CmpOp::Eq => self.eq = Some(k),
            CmpOp::Ne => self.ne.push(k),
        }
    }

    fn tighten_lo(&mut self, k: f64, strict: bool) {
        let better = match self.lo {
            None => true,
            Some((cur, cur_strict)) => k > cur || (k == cur && strict && !cur_strict),
        };
        if better {
            self.lo = Some((k, strict));
        }
    }

    fn tighten_hi(&mut self, k: f64, strict: bool) {
        let better = match self.hi {
            None => true,
            Some((cur, cur_strict)) => k < cur || (k == cur && strict && !cur_strict),
        };
        if better {
            self.hi = Some((k, strict));
        }
    }
}

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

/// What one literal demands of the channel value, under a fixed valuation.
enum LiteralCase {
    /// Satisfied regardless of the channel value.
    Free,
    /// Unsatisfiable regardless of the channel value.
    Dead,
    /// Constrains the channel value.
    On(CmpOp, f64),
}

fn literal_case(lit: &Literal, d: &Valuation) -> LiteralCase {
    match lit {
        Literal::Const(true) => LiteralCase::Free,
        Literal::Const(false) => LiteralCase::Dead,
        Literal::BoolVar { name, negated } => match d.get(name) {
            Some(Value::Bool(b)) if b != *negated => LiteralCase::Free,
            Some(Value::Bool(_)) => LiteralCase::Dead,
            _ => LiteralCase::Dead,
        },
        Literal::Cmp { lhs, op, rhs } => {
            let eval_side = |t: &Term| -> Option<f64> {
                match t {
                    Term::Chan => None,
                    other => other.eval(&d.0, None).ok().and_then(|v| v.as_f64().ok()),
                }
            };
            match (lhs, rhs) {
                (Term::Chan, Term::Chan) => match op {
                    CmpOp::Eq | CmpOp::Le | CmpOp::Ge => LiteralCase::Free,
                    _ => LiteralCase::Dead,
                },
                (Term::Chan, other) => match eval_side(other) {
                    Some(k) => LiteralCase::On(*op, k),
                    None => LiteralCase::Dead,
                },
                (other, Term::Chan) => match eval_side(other) {
                    Some(k) => LiteralCase::On(flip(*op), k),
                    None => LiteralCase::Dead,
                },
                (l, r) => match (eval_side(l), eval_side(r)) {
                    (Some(a), Some(b)) => {
                        if crate::expr::compare(Value::Float(a), Value::Float(b), *op)
                            .unwrap_or(false)
                        {
                            LiteralCase::Free
                        } else {
                            LiteralCase::Dead
                        }
                    }
                    _ => LiteralCase::Dead,
                },
            }
        }
    }
}

fn sample_int(b: &Bounds, rng: &mut ChaCha8Rng) -> Option<Value> {
    if let Some(k) = b.eq {
        if k.fract() != 0.0 || b.ne.contains(&k) {
            return None;
        }
        let v = k as i64;
        return within(b, k).then_some(Value::Int(v));
    }
    let span = DEFAULT_SPAN as i64;
    let lo = match b.lo {
        Some((k, strict)) => {
            let c = k.ceil();
            if strict && c == k {
                c as i64 + 1
            } else {
                c as i64
            }
        }
        None => match b.hi {
            Some((k, _)) => k.floor() as i64 - span,
            None => -span,
        },
    };
    let hi = match b.hi {
        Some((k, strict)) => {
            let f = k.floor();
            if strict && f == k {
                f as i64 - 1
            } else {
                f as i64
            }
        }
        None => lo + 2 * span,
    };
    if lo > hi {
        return None;
    }
    for _ in 0..16 {
        let v = if rng.gen_bool(BOUNDARY_PROB) {
            if rng.gen_bool(0.5) {
                lo
            } else {
                hi
            }
        } else {
            rng.gen_range(lo..=hi)
        };
        if !b.ne.contains(&(v as f64)) {
            return Some(Value::Int(v));
        }
    }
    None
}

fn within(b: &Bounds, v: f64) -> bool {
    if let Some((k, strict)) = b.lo {
        if v < k || (strict && v == k) {
            return false;
        }
    }
    if let Some((k, strict)) = b.hi {
        if v > k || (strict && v == k) {
            return false;
        }
    }
    true
}

fn sample_float(b: &Bounds, rng: &mut ChaCha8Rng) -> Option<Value> {
    if let Some(k) = b.eq {
        return (within(b, k) && !b.ne.contains(&k)).then_some(Value::Float(k));
    }
    let (lo, lo_strict) = b.lo.unwrap_or_else(|| {
        (
            b.hi.map(|(k, _)| k - DEFAULT_SPAN).unwrap_or(-DEFAULT_SPAN),
            false,
        )
    });
    let (hi, hi_strict) = b.hi.unwrap_or((lo + 2.0 * DEFAULT_SPAN, false));
    if lo > hi || (lo == hi && (lo_strict || hi_strict)) {
        return None;
    }
    let eps = ((hi - lo).abs() * 1e-9).max(1e-9);
    for _ in 0..16 {
        let v = if rng.gen_bool(BOUNDARY_PROB) {
            let pick_lo = rng.gen_bool(0.5);
            match (pick_lo, lo_strict, hi_strict) {
                (true, false, _) => lo,
                (true, true, _) => lo + eps,
                (false, _, false) => hi,
                (false, _, true) => hi - eps,
            }
        } else {
            lo + rng.gen::<f64>() * (hi - lo)
        };
        if within(b, v) && !b.ne.contains(&v) {
            return Some(Value::Float(v));
        }
    }
    None
}

/// Samples a channel value satisfying the guard under the given valuation,
/// or None when the guard is unsatisfiable there. `chan_ty` is None for unit
/// channels.
pub fn sample_value(
    chan_ty: Option<ValueType>,
    guard: &Guard,
    d: &Valuation,
    rng: &mut ChaCha8Rng,
) -> Option<Value> {
    let Some(ty) = chan_ty else {
        return guard.eval(d, None).ok()?.then_some(Value::Unit);
    };
    'attempt: for _ in 0..4 {
        let mut bounds = Bounds::default();
        for clause in &guard.clauses {
            let mut options: Vec<Option<(CmpOp, f64)>> = Vec::new();
            for lit in &clause.0 {
                match literal_case(lit, d) {
                    LiteralCase::Free => options.push(None),
                    LiteralCase::On(op, k) => options.push(Some((op, k))),
                    LiteralCase::Dead => {}
                }
            }
            if options.is_empty() {
                return None;
            }
            if let Some((op, k)) = options[rng.gen_range(0..options.len())] {
                bounds.add(op, k);
            }
        }
        let sampled = match ty {
            ValueType::Int => sample_int(&bounds, rng),
            ValueType::Float => sample_float(&bounds, rng),
            _ => None,
        };
        match sampled {
            Some(v) => {
                // the clause choice may have been contradictory; trust only a
                // value the guard itself confirms
                if guard.eval(d, Some(v)).unwrap_or(false) {
                    return Some(v);
                }
                continue 'attempt;
            }
            None => continue 'attempt,
        }
    }
    None
}

fn candidates<'m>(m: &'m Efsm, configs: &[Config]) -> Vec<(usize, &'m crate::efsm::Transition)> {
    let mut out = Vec::new();
    for (i, cfg) in configs.iter().enumerate() {
        for t in m.transitions.iter().filter(|t| t.from == cfg.location) {
            out.push((i, t));
        }
    }
    out
}

fn try_emit(
    m: &Efsm,
    state: &crate::efsm::MachineState,
    rng: &mut ChaCha8Rng,
    wanted: Option<Symbol>,
) -> Option<Event> {
    let configs = state.configs();
    let mut opts = candidates(m, configs);
    if let Some(sym) = wanted {
        opts.retain(|(_, t)| {
            m.channel(&t.channel)
                .and_then(|c| Symbol::for_channel_type(c.value_type))
                == Some(sym)
        });
    }
    opts.shuffle(rng);
    for (cfg_idx, t) in opts {
        let chan = m.channel(&t.channel)?;
        let chan_ty = match chan.value_type {
            ValueType::Unit => None,
            ty => Some(ty),
        };
        if let Some(v) = sample_value(chan_ty, &t.guard, &configs[cfg_idx].valuation, rng) {
            return Some(Event {
                channel: t.channel.clone(),
                value: v,
            });
        }
    }
    None
}

/// Uniform random walk of up to `max_events` steps; stops early if no
/// transition can be enabled. The result is accepted by `m` by construction.
pub fn generate_trace(m: &Efsm, rng: &mut ChaCha8Rng, max_events: usize) -> Trace {
    let mut state = m.initial_state();
    let mut trace = Trace::default();
    for _ in 0..max_events {
        let Some(event) = try_emit(m, &state, rng, None) else {
            break;
        };
        match m.step(&state, &event) {
            Ok(StepOutcome::Advanced(next)) => {
                state = next;
                trace.push(event);
            }
            _ => break,
        }
    }
    trace
}

/// Instantiates a symbol string as a concrete trace of `m`, or None when the
/// guards along every tried path reject it.
pub fn instantiate_symbols(m: &Efsm, symbols: &[Symbol], rng: &mut ChaCha8Rng) -> Option<Trace> {
    'retry: for _ in 0..24 {
        let mut state = m.initial_state();
        let mut trace = Trace::default();
        for sym in symbols {
            let Some(event) = try_emit(m, &state, rng, Some(*sym)) else {
                continue 'retry;
            };
            match m.step(&state, &event) {
                Ok(StepOutcome::Advanced(next)) => {
                    state = next;
                    trace.push(event);
                }
                _ => continue 'retry,
            }
        }
        return Some(trace);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_clause;
    use rand::SeedableRng;

    fn guard(atoms: &[&str]) -> Guard {
        Guard {
            clauses: atoms.iter().map(|s| parse_clause(s).unwrap()).collect(),
        }
    }

    #[test]
    fn samples_respect_ranges() {
        let g = guard(&["c >= -90.0", "c <= 90.0"]);
        let d = Valuation::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut hit_boundary = false;
        for _ in 0..500 {
            let v = sample_value(Some(ValueType::Float), &g, &d, &mut rng).unwrap();
            let x = v.as_f64().unwrap();
            assert!((-90.0..=90.0).contains(&x));
            if x == -90.0 || x == 90.0 {
                hit_boundary = true;
            }
        }
        assert!(hit_boundary, "boundary bias never hit an endpoint");
    }

    #[test]
    fn unsatisfiable_guard_yields_none() {
        let g = guard(&["c >= 10", "c <= 5"]);
        let d = Valuation::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_value(Some(ValueType::Int), &g, &d, &mut rng), None);
    }

    #[test]
    fn disjunction_uses_flag_when_set() {
        let g = guard(&["first || c >= last_time"]);
        let d = Valuation(
            [
                ("first".to_string(), Value::Bool(false)),
                ("last_time".to_string(), Value::Int(50)),
            ]
            .into_iter()
            .collect(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let v = sample_value(Some(ValueType::Int), &g, &d, &mut rng).unwrap();
            assert!(matches!(v, Value::Int(i) if i >= 50));
        }
    }
}
