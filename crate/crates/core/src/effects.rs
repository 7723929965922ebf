//! I/O API effect models: how a library call changes the application's view
//! of the input.
//!
//! A scanf-like call silently skips newlines before each item, so its
//! extended fragment carries a newline self-loop on every state a directive
//! departs from. A getline+sscanf pattern reads a whole line, ignores items
//! beyond the format string, and has consumed the line break by the time it
//! returns: value self-loops on the fragment exit plus a terminal newline
//! transition.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annotate::{annotate, AnnotationSpec};
use crate::cfg::Cfg;
use crate::efsm::{Efsm, Event, Trace};
use crate::skeleton::{
    extract_skeleton, fragment_for, Directive, ExtractionMode, FragmentProv, FragmentTransition,
    SkeletonFragment,
};
use crate::value::Value;
use crate::{Error, Result};

/// Effect model of one kind of I/O API.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiModel {
    /// scanf-style: whitespace (including line breaks) is skipped before
    /// each converted item.
    ScanfLike,
    /// getline+sscanf treated as a single call: one line per call, unread
    /// tail items, line break consumed at the end.
    #[serde(rename = "line_pattern")]
    LinePatternLike,
}

/// Binds the API identifiers used by CFG nodes to their effect models.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ApiTable(pub BTreeMap<String, ApiModel>);

impl ApiTable {
    pub fn model(&self, api: &str) -> Result<ApiModel> {
        self.0
            .get(api)
            .copied()
            .ok_or_else(|| Error::UnknownApi(api.to_string()))
    }

    /// The table used by the bundled case study.
    pub fn standard() -> ApiTable {
        ApiTable(BTreeMap::from([
            ("scanf".to_string(), ApiModel::ScanfLike),
            ("getline_sscanf".to_string(), ApiModel::LinePatternLike),
        ]))
    }
}

/// Skeleton fragment of an API call extended with the call's effect on the
/// input view.
pub fn extended_fragment(model: ApiModel, directives: &[Directive]) -> SkeletonFragment {
    let mut fragment = fragment_for(directives);
    match model {
        ApiModel::ScanfLike => {
            // newline skipping happens before each item, not after the last
            for i in 0..directives.len() {
                fragment.transitions.push(FragmentTransition {
                    from: i,
                    to: i,
                    symbol: crate::skeleton::Symbol::Newline,
                    prov: FragmentProv::SelfLoop,
                });
            }
        }
        ApiModel::LinePatternLike => {
            let tail = fragment.exit;
            for d in [Directive::Int, Directive::Float] {
                fragment.transitions.push(FragmentTransition {
                    from: tail,
                    to: tail,
                    symbol: d.symbol(),
                    prov: FragmentProv::SelfLoop,
                });
            }
            let exit = fragment.state_count;
            fragment.transitions.push(FragmentTransition {
                from: tail,
                to: exit,
                symbol: crate::skeleton::Symbol::Newline,
                prov: FragmentProv::Terminator,
            });
            fragment.state_count += 1;
            fragment.exit = exit;
        }
    }
    fragment
}

/// Extracts with extended fragments and annotates: the machine that stands
/// in for the composition of the I/O API model with the internal assumption,
/// over the external channel alphabet.
pub fn build_external_efsm(cfg: &Cfg, apis: &ApiTable, spec: &AnnotationSpec) -> Result<Efsm> {
    let skeleton = extract_skeleton(cfg, apis, ExtractionMode::ApiEffects)?;
    annotate(&skeleton, spec)
}

/// Splits a trace into lines at unit-channel `newline` events; the newline
/// markers themselves are not part of any line. Input without a trailing
/// newline contributes a final line; input with no newline at all is one
/// single line.
pub fn split_lines(external: &Trace) -> Vec<Vec<Event>> {
    let mut lines = Vec::new();
    let mut current = Vec::new();
    let mut saw_newline_last = true;
    for e in external.iter() {
        if e.channel == "newline" && e.value == Value::Unit {
            lines.push(std::mem::take(&mut current));
            saw_newline_last = true;
        } else {
            current.push(e.clone());
            saw_newline_last = false;
        }
    }
    if !saw_newline_last {
        lines.push(current);
    }
    lines
}

/// What one line-pattern call delivered.
#[derive(Debug, Clone, PartialEq)]
pub struct LineRead {
    pub delivered: Vec<Event>,
    /// Values on the line beyond the format string, never seen by the code.
    pub discarded: usize,
    /// True when the line held fewer items than the format string; mirrors a
    /// short sscanf return count.
    pub short: bool,
}

/// Per-line delivery of the first `items_per_call` values, the way a
/// getline+sscanf loop observes the input.
pub fn adapt_lines(external: &Trace, items_per_call: usize) -> Vec<LineRead> {
    split_lines(external)
        .into_iter()
        .map(|line| {
            let total = line.len();
            let delivered: Vec<Event> = line.into_iter().take(items_per_call).collect();
            LineRead {
                short: delivered.len() < items_per_call,
                discarded: total - delivered.len(),
                delivered,
            }
        })
        .collect()
}

/// Maps an environment trace to the trace the application code observes
/// through the given API. `items_per_call` is the directive count of the
/// call's format string; scanf-like adaptation ignores it.
pub fn api_adapter(model: ApiModel, items_per_call: usize, external: &Trace) -> Trace {
    match model {
        ApiModel::ScanfLike => Trace::new(
            external
                .iter()
                .filter(|e| !(e.channel == "newline" && e.value == Value::Unit))
                .cloned()
                .collect(),
        ),
        ApiModel::LinePatternLike => Trace::new(
            adapt_lines(external, items_per_call)
                .into_iter()
                .flat_map(|line| line.delivered)
                .collect(),
        ),
    }
}
