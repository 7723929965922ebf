//! Turns a type-labeled skeleton into an EFSM by binding channels, guards,
//! and updates to its directive transitions.
//!
//! The binding is file-driven: semantic constraints are not inferred from
//! code. Effect transitions are bound automatically — newline loops and
//! terminators to the `newline` channel, value self-loops to every declared
//! channel of their type.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::efsm::{ChannelDecl, Efsm, Guard, Transition, Update, VariableDecl};
use crate::skeleton::{Provenance, Skeleton, Symbol};
use crate::value::ValueType;
use crate::{Error, Result};

/// Channel, guard, and update for one directive transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub channel: String,
    #[serde(default)]
    pub guard: Guard,
    #[serde(default)]
    pub update: Update,
}

/// The manual annotation input: typed channels, state variables, and one
/// binding per `nodeId/directiveIndex` of the source CFG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSpec {
    pub channels: Vec<ChannelDecl>,
    #[serde(default)]
    pub variables: Vec<VariableDecl>,
    pub bindings: BTreeMap<String, Binding>,
}

impl AnnotationSpec {
    pub fn binding(&self, node: &str, directive: usize) -> Option<&Binding> {
        self.bindings.get(&format!("{node}/{directive}"))
    }
}

fn symbol_type(symbol: Symbol) -> ValueType {
    match symbol {
        Symbol::Int => ValueType::Int,
        Symbol::Float => ValueType::Float,
        Symbol::Newline => ValueType::Unit,
    }
}

/// Builds the EFSM for a skeleton under an annotation spec. Every directive
/// transition must be covered by a binding whose channel type matches the
/// transition's symbol.
pub fn annotate(sk: &Skeleton, spec: &AnnotationSpec) -> Result<Efsm> {
    let channel_types: BTreeMap<&str, ValueType> = spec
        .channels
        .iter()
        .map(|c| (c.name.as_str(), c.value_type))
        .collect();
    let mut transitions = Vec::new();
    for t in &sk.transitions {
        match &t.provenance {
            Provenance::Directive { node, directive } => {
                let binding =
                    spec.binding(node, *directive)
                        .ok_or_else(|| Error::UncoveredDirective {
                            node: node.clone(),
                            directive: *directive,
                        })?;
                let declared = channel_types.get(binding.channel.as_str()).ok_or_else(|| {
                    Error::Validation(format!(
                        "binding {node}/{directive}: channel `{}` is not declared",
                        binding.channel
                    ))
                })?;
                if *declared != symbol_type(t.symbol) {
                    return Err(Error::Validation(format!(
                        "binding {node}/{directive}: {} transition bound to {} channel `{}`",
                        t.symbol, declared, binding.channel
                    )));
                }
                transitions.push(Transition {
                    from: t.from.clone(),
                    to: t.to.clone(),
                    channel: binding.channel.clone(),
                    guard: binding.guard.clone(),
                    update: binding.update.clone(),
                    origin: crate::efsm::Origin::Directive,
                });
            }
            Provenance::ApiEffectSelfLoop | Provenance::ApiEffectTerminator => {
                let origin = match t.provenance {
                    Provenance::ApiEffectSelfLoop => crate::efsm::Origin::ApiEffectSelfLoop,
                    _ => crate::efsm::Origin::ApiEffectTerminator,
                };
                let ty = symbol_type(t.symbol);
                let names: Vec<&str> = spec
                    .channels
                    .iter()
                    .filter(|c| c.value_type == ty)
                    .map(|c| c.name.as_str())
                    .collect();
                if names.is_empty() {
                    return Err(Error::Validation(format!(
                        "no declared channel of type {ty} for an effect transition on `{}`",
                        t.symbol
                    )));
                }
                for name in names {
                    transitions.push(Transition {
                        from: t.from.clone(),
                        to: t.to.clone(),
                        channel: name.to_string(),
                        guard: Guard::default(),
                        update: Update::default(),
                        origin,
                    });
                }
            }
        }
    }
    transitions.dedup();
    let machine = Efsm {
        locations: sk.states.clone(),
        start: sk.start.clone(),
        channels: spec.channels.clone(),
        variables: spec.variables.clone(),
        transitions,
    };
    machine.validate()?;
    Ok(machine)
}
