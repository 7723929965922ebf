//! Extended finite state machines: typed channels, guarded transitions with
//! variable updates, and prefix-closed trace acceptance.
//!
//! Every location is accepting; a trace is rejected exactly when no enabled
//! transition consumes the next event. Stepping works on a *set* of
//! location/valuation pairs so nondeterministic machines run under online
//! subset semantics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::{self, Clause, Term};
use crate::value::{Value, ValueType};
use crate::{Error, Result};

/// A typed channel declaration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelDecl {
    pub name: String,
    #[serde(rename = "type")]
    pub value_type: ValueType,
}

/// A state variable declaration with its initial value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableDecl {
    pub name: String,
    #[serde(rename = "type")]
    pub value_type: ValueType,
    pub init: Value,
}

/// One observation: a value on a channel. Unit channels carry no payload.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Event {
    pub channel: String,
    pub value: Value,
}

impl Event {
    pub fn int(channel: &str, v: i64) -> Event {
        Event {
            channel: channel.to_string(),
            value: Value::Int(v),
        }
    }

    pub fn float(channel: &str, v: f64) -> Event {
        Event {
            channel: channel.to_string(),
            value: Value::Float(v),
        }
    }

    pub fn unit(channel: &str) -> Event {
        Event {
            channel: channel.to_string(),
            value: Value::Unit,
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value {
            Value::Unit => write!(f, "{}", self.channel),
            v => write!(f, "{}({})", self.channel, v),
        }
    }
}

impl Serialize for Event {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let n = if self.value == Value::Unit { 1 } else { 2 };
        let mut map = ser.serialize_map(Some(n))?;
        map.serialize_entry("channel", &self.channel)?;
        if self.value != Value::Unit {
            map.serialize_entry("value", &self.value)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Event {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            channel: String,
            #[serde(default)]
            value: Option<Value>,
        }
        let raw = Raw::deserialize(de)?;
        Ok(Event {
            channel: raw.channel,
            value: raw.value.unwrap_or(Value::Unit),
        })
    }
}

/// A finite sequence of events.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trace {
    pub events: Vec<Event>,
}

impl Trace {
    pub fn new(events: Vec<Event>) -> Trace {
        Trace { events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Event> {
        self.events.iter()
    }

    pub fn push(&mut self, e: Event) {
        self.events.push(e);
    }

    /// Maximal subsequence whose events lie on the given channels; order
    /// preserved.
    pub fn project<S: AsRef<str>>(&self, channels: &[S]) -> Trace {
        let keep: BTreeSet<&str> = channels.iter().map(|s| s.as_ref()).collect();
        Trace {
            events: self
                .events
                .iter()
                .filter(|e| keep.contains(e.channel.as_str()))
                .cloned()
                .collect(),
        }
    }
}

impl From<Vec<Event>> for Trace {
    fn from(events: Vec<Event>) -> Trace {
        Trace { events }
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for e in &self.events {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Total mapping from the machine's variables to values.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Valuation(pub BTreeMap<String, Value>);

impl Valuation {
    pub fn get(&self, name: &str) -> Option<Value> {
        self.0.get(name).copied()
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        let mut first = true;
        for (k, v) in &self.0 {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            write!(f, "{k}: {v}")?;
        }
        f.write_str("}")
    }
}

/// Conjunction of clauses; empty guard is true.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Guard {
    pub clauses: Vec<Clause>,
}

impl Guard {
    /// True iff every clause holds under `d` extended with `c -> chan`.
    pub fn eval(&self, d: &Valuation, chan: Option<Value>) -> Result<bool> {
        for clause in &self.clauses {
            if !clause.eval(&d.0, chan)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Clauses that evaluate to false, as their canonical strings.
    pub fn failed_clauses(&self, d: &Valuation, chan: Option<Value>) -> Result<Vec<String>> {
        let mut failed = Vec::new();
        for clause in &self.clauses {
            if !clause.eval(&d.0, chan)? {
                failed.push(clause.to_string());
            }
        }
        Ok(failed)
    }
}

impl Serialize for Guard {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let strings: Vec<String> = self.clauses.iter().map(|c| c.to_string()).collect();
        strings.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Guard {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let strings = Vec::<String>::deserialize(de)?;
        let clauses = strings
            .iter()
            .map(|s| expr::parse_clause(s))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        Ok(Guard { clauses })
    }
}

/// Simultaneous assignments; unassigned variables persist.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Update {
    pub assignments: Vec<(String, Term)>,
}

impl Update {
    /// All right-hand sides evaluate against the pre-update valuation.
    pub fn apply(&self, d: &Valuation, chan: Option<Value>) -> Result<Valuation> {
        let mut next = d.clone();
        for (name, term) in &self.assignments {
            let v = term.eval(&d.0, chan)?;
            let declared = d
                .get(name)
                .ok_or_else(|| Error::Type(format!("undeclared variable `{name}`")))?;
            next.0
                .insert(name.clone(), v.coerce_to(declared.value_type())?);
        }
        Ok(next)
    }
}

impl Serialize for Update {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let strings: Vec<String> = self
            .assignments
            .iter()
            .map(|(n, t)| format!("{n} := {t}"))
            .collect();
        strings.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Update {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let strings = Vec::<String>::deserialize(de)?;
        let assignments = strings
            .iter()
            .map(|s| expr::parse_assignment(s))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        Ok(Update { assignments })
    }
}

/// Where a transition came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    #[default]
    Directive,
    ApiEffectSelfLoop,
    ApiEffectTerminator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub to: String,
    pub channel: String,
    #[serde(default)]
    pub guard: Guard,
    #[serde(default)]
    pub update: Update,
    #[serde(default)]
    pub origin: Origin,
}

/// `<locations, start, channels, variables, transitions>` with every location
/// accepting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Efsm {
    pub locations: Vec<String>,
    pub start: String,
    pub channels: Vec<ChannelDecl>,
    pub variables: Vec<VariableDecl>,
    pub transitions: Vec<Transition>,
}

/// One location/valuation pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Config {
    pub location: String,
    pub valuation: Valuation,
}

/// The set of configurations a (possibly nondeterministic) machine is in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineState {
    configs: Vec<Config>,
}

impl MachineState {
    pub fn new(configs: Vec<Config>) -> MachineState {
        let set: BTreeSet<Config> = configs.into_iter().collect();
        MachineState {
            configs: set.into_iter().collect(),
        }
    }

    pub fn configs(&self) -> &[Config] {
        &self.configs
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn locations(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.configs.iter().map(|c| &c.location).collect();
        set.into_iter().cloned().collect()
    }
}

/// Result of consuming one event.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    /// At least one transition was enabled.
    Advanced(MachineState),
    /// Transitions on the event's channel exist, but every guard failed.
    /// `forced` is the state reached by taking those transitions anyway,
    /// applying their updates with the offending value.
    GuardRejected {
        failed_atoms: Vec<String>,
        forced: MachineState,
    },
    /// No transition on the event's channel leaves any current location.
    NoChannelMatch,
}

impl StepOutcome {
    pub fn is_advance(&self) -> bool {
        matches!(self, StepOutcome::Advanced(_))
    }
}

impl Efsm {
    pub fn channel(&self, name: &str) -> Option<&ChannelDecl> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn variable_types(&self) -> BTreeMap<String, ValueType> {
        self.variables
            .iter()
            .map(|v| (v.name.clone(), v.value_type))
            .collect()
    }

    pub fn initial_valuation(&self) -> Valuation {
        // inits widen to their declared type (a float variable may be
        // initialized with an integer literal); validation guarantees the
        // coercion succeeds on any loaded machine
        Valuation(
            self.variables
                .iter()
                .map(|v| {
                    let value = v.init.coerce_to(v.value_type).unwrap_or(v.init);
                    (v.name.clone(), value)
                })
                .collect(),
        )
    }

    pub fn initial_state(&self) -> MachineState {
        MachineState::new(vec![Config {
            location: self.start.clone(),
            valuation: self.initial_valuation(),
        }])
    }

    pub fn transitions_from<'a>(
        &'a self,
        location: &'a str,
        channel: &'a str,
    ) -> impl Iterator<Item = &'a Transition> {
        self.transitions
            .iter()
            .filter(move |t| t.from == location && t.channel == channel)
    }

    /// Structural and type validation; called on every machine loaded from a
    /// file or built by a constructor.
    pub fn validate(&self) -> Result<()> {
        let locs: BTreeSet<&String> = self.locations.iter().collect();
        if locs.len() != self.locations.len() {
            return Err(Error::Validation("duplicate location names".to_string()));
        }
        if !locs.contains(&self.start) {
            return Err(Error::Validation(format!(
                "start location `{}` is not declared",
                self.start
            )));
        }
        let mut chan_names = BTreeSet::new();
        for c in &self.channels {
            if !chan_names.insert(&c.name) {
                return Err(Error::Validation(format!("duplicate channel `{}`", c.name)));
            }
            if c.value_type == ValueType::Bool {
                return Err(Error::Validation(format!(
                    "channel `{}`: bool channels are not supported",
                    c.name
                )));
            }
        }
        let mut var_names = BTreeSet::new();
        for v in &self.variables {
            if !var_names.insert(&v.name) {
                return Err(Error::Validation(format!(
                    "duplicate variable `{}`",
                    v.name
                )));
            }
            if v.name == "c" {
                return Err(Error::Validation(
                    "`c` is reserved for the channel value".to_string(),
                ));
            }
            if v.value_type == ValueType::Unit {
                return Err(Error::Validation(format!(
                    "variable `{}`: unit variables are not supported",
                    v.name
                )));
            }
            v.init.coerce_to(v.value_type).map_err(|e| {
                Error::Validation(format!("variable `{}` initial value: {e}", v.name))
            })?;
        }
        let var_types = self.variable_types();
        for (i, t) in self.transitions.iter().enumerate() {
            let at = |msg: String| Error::Validation(format!("transition {i}: {msg}"));
            if !locs.contains(&t.from) {
                return Err(at(format!("unknown source location `{}`", t.from)));
            }
            if !locs.contains(&t.to) {
                return Err(at(format!("unknown target location `{}`", t.to)));
            }
            let chan = self
                .channel(&t.channel)
                .ok_or_else(|| at(format!("undeclared channel `{}`", t.channel)))?;
            let chan_ty = match chan.value_type {
                ValueType::Unit => None,
                ty => Some(ty),
            };
            for clause in &t.guard.clauses {
                clause
                    .check_types(chan_ty, &var_types)
                    .map_err(|e| at(format!("guard `{clause}`: {e}")))?;
            }
            let mut assigned = BTreeSet::new();
            for (name, term) in &t.update.assignments {
                if !assigned.insert(name) {
                    return Err(at(format!("variable `{name}` assigned twice")));
                }
                let var_ty = *var_types
                    .get(name)
                    .ok_or_else(|| at(format!("update assigns undeclared variable `{name}`")))?;
                let term_ty = term
                    .check_type(chan_ty, &var_types)
                    .map_err(|e| at(format!("update `{name} := {term}`: {e}")))?;
                let ok =
                    term_ty == var_ty || (term_ty == ValueType::Int && var_ty == ValueType::Float);
                if !ok {
                    return Err(at(format!(
                        "update `{name} := {term}`: cannot assign {term_ty} to {var_ty} variable"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Normalizes an event against this machine's channel declarations:
    /// checks the channel exists and the value is type-correct (Int widens on
    /// Float channels).
    fn resolve_event(&self, e: &Event) -> Result<Option<Value>> {
        let chan = self
            .channel(&e.channel)
            .ok_or_else(|| Error::UndeclaredChannel(e.channel.clone()))?;
        match chan.value_type {
            ValueType::Unit => {
                if e.value == Value::Unit {
                    Ok(None)
                } else {
                    Err(Error::Type(format!(
                        "unit channel `{}` carries no payload",
                        e.channel
                    )))
                }
            }
            ty => Ok(Some(e.value.coerce_to(ty).map_err(|err| {
                Error::Type(format!("on channel `{}`: {err}", e.channel))
            })?)),
        }
    }

    /// Consumes one event from a state set, returning all successors over
    /// enabled transitions. An empty state set yields `NoChannelMatch`.
    pub fn step(&self, state: &MachineState, e: &Event) -> Result<StepOutcome> {
        let chan_value = self.resolve_event(e)?;
        let mut successors = Vec::new();
        let mut forced = Vec::new();
        let mut failed_atoms = Vec::new();
        let mut channel_matched = false;
        for cfg in state.configs() {
            for t in self.transitions_from(&cfg.location, &e.channel) {
                channel_matched = true;
                if t.guard.eval(&cfg.valuation, chan_value)? {
                    successors.push(Config {
                        location: t.to.clone(),
                        valuation: t.update.apply(&cfg.valuation, chan_value)?,
                    });
                } else {
                    failed_atoms.extend(t.guard.failed_clauses(&cfg.valuation, chan_value)?);
                    forced.push(Config {
                        location: t.to.clone(),
                        valuation: t.update.apply(&cfg.valuation, chan_value)?,
                    });
                }
            }
        }
        if !successors.is_empty() {
            Ok(StepOutcome::Advanced(MachineState::new(successors)))
        } else if channel_matched {
            failed_atoms.sort();
            failed_atoms.dedup();
            Ok(StepOutcome::GuardRejected {
                failed_atoms,
                forced: MachineState::new(forced),
            })
        } else {
            Ok(StepOutcome::NoChannelMatch)
        }
    }

    /// Prefix-closed acceptance: true iff some run consumes the whole trace.
    pub fn accepts(&self, t: &Trace) -> Result<bool> {
        let mut state = self.initial_state();
        for e in t.iter() {
            match self.step(&state, e)? {
                StepOutcome::Advanced(next) => state = next,
                _ => return Ok(false),
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn guard(atoms: &[&str]) -> Guard {
        Guard {
            clauses: atoms
                .iter()
                .map(|s| expr::parse_clause(s).unwrap())
                .collect(),
        }
    }

    fn update(stmts: &[&str]) -> Update {
        Update {
            assignments: stmts
                .iter()
                .map(|s| expr::parse_assignment(s).unwrap())
                .collect(),
        }
    }

    fn val(pairs: &[(&str, Value)]) -> Valuation {
        Valuation(pairs.iter().map(|(n, v)| (n.to_string(), *v)).collect())
    }

    #[test]
    fn guard_latitude_range() {
        let g = guard(&["c >= -90.0", "c <= 90.0"]);
        assert!(g.eval(&val(&[]), Some(Value::Float(45.0))).unwrap());
        assert!(!g.eval(&val(&[]), Some(Value::Float(95.0))).unwrap());
    }

    #[test]
    fn empty_guard_is_true() {
        let g = Guard::default();
        assert!(g
            .eval(&val(&[("x", Value::Int(1))]), Some(Value::Int(9)))
            .unwrap());
    }

    #[test]
    fn guard_against_variable() {
        let g = guard(&["c >= last_time"]);
        let d = val(&[("last_time", Value::Int(7))]);
        assert!(!g.eval(&d, Some(Value::Int(3))).unwrap());
        assert!(g.eval(&d, Some(Value::Int(7))).unwrap());
    }

    #[test]
    fn update_stores_channel_value() {
        let u = update(&["last_time := c"]);
        let d = val(&[("last_time", Value::Int(0))]);
        let next = u.apply(&d, Some(Value::Int(5))).unwrap();
        assert_eq!(next.get("last_time"), Some(Value::Int(5)));
    }

    #[test]
    fn empty_update_is_identity() {
        let u = Update::default();
        let d = val(&[("x", Value::Int(1))]);
        assert_eq!(u.apply(&d, Some(Value::Int(9))).unwrap(), d);
    }

    #[test]
    fn update_is_simultaneous() {
        // y reads the pre-update x
        let u = update(&["x := c", "y := x"]);
        let d = val(&[("x", Value::Int(2)), ("y", Value::Int(0))]);
        let next = u.apply(&d, Some(Value::Int(7))).unwrap();
        assert_eq!(next.get("x"), Some(Value::Int(7)));
        assert_eq!(next.get("y"), Some(Value::Int(2)));
    }

    #[test]
    fn projection_keeps_order_and_channels() {
        let t = Trace::new(vec![
            Event::int("time", 0),
            Event::unit("newline"),
            Event::int("time", 1),
        ]);
        let p = t.project(&["time"]);
        assert_eq!(p.events, vec![Event::int("time", 0), Event::int("time", 1)]);
        assert!(t.project(&[] as &[&str]).is_empty());
        assert_eq!(t.project(&["time", "newline"]), t);
    }

    #[test]
    fn step_on_empty_state_set_rejects() {
        let m = two_location_machine();
        let empty = MachineState::new(vec![]);
        let out = m.step(&empty, &Event::int("a", 1)).unwrap();
        assert_eq!(out, StepOutcome::NoChannelMatch);
    }

    #[test]
    fn step_undeclared_channel_is_an_error() {
        let m = two_location_machine();
        let st = m.initial_state();
        assert!(matches!(
            m.step(&st, &Event::int("nope", 1)),
            Err(Error::UndeclaredChannel(_))
        ));
    }

    fn two_location_machine() -> Efsm {
        let m = Efsm {
            locations: vec!["s0".into(), "s1".into()],
            start: "s0".into(),
            channels: vec![ChannelDecl {
                name: "a".into(),
                value_type: ValueType::Int,
            }],
            variables: vec![],
            transitions: vec![Transition {
                from: "s0".into(),
                to: "s1".into(),
                channel: "a".into(),
                guard: Guard::default(),
                update: Update::default(),
                origin: Origin::Directive,
            }],
        };
        m.validate().unwrap();
        m
    }

    #[test]
    fn validation_rejects_undeclared_transition_channel() {
        let mut m = two_location_machine();
        m.transitions[0].channel = "ghost".into();
        assert!(m.validate().is_err());
    }

    #[test]
    fn validation_rejects_type_confused_guard() {
        let mut m = two_location_machine();
        m.transitions[0].guard = guard(&["c >= missing_var"]);
        assert!(m.validate().is_err());
    }

    #[test]
    fn integer_literal_init_widens_for_float_variables() {
        let m: Efsm = serde_json::from_str(
            r#"{
                "locations": ["s0"],
                "start": "s0",
                "channels": [{"name": "a", "type": "float"}],
                "variables": [{"name": "x", "type": "float", "init": 0}],
                "transitions": [{
                    "from": "s0", "to": "s0", "channel": "a",
                    "guard": ["c >= x"], "update": ["x := c"]
                }]
            }"#,
        )
        .unwrap();
        m.validate().unwrap();
        assert_eq!(m.initial_valuation().get("x"), Some(Value::Float(0.0)));
        let t = Trace::new(vec![Event::float("a", 1.5), Event::float("a", 2.0)]);
        assert!(m.accepts(&t).unwrap());
    }

    #[test]
    fn efsm_json_round_trip() {
        let m = two_location_machine();
        let text = serde_json::to_string_pretty(&m).unwrap();
        let back: Efsm = serde_json::from_str(&text).unwrap();
        assert_eq!(m, back);
    }
}
