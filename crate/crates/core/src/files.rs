//! File loading and saving with errors that name the file and the JSON path
//! of the fault.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::annotate::AnnotationSpec;
use crate::cfg::Cfg;
use crate::effects::ApiTable;
use crate::efsm::{Efsm, Event, Trace};
use crate::skeleton::Skeleton;
use crate::{Error, Result};

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        file: file.clone(),
        source,
    })?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Json {
        file,
        location: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

pub fn load_efsm(path: &Path) -> Result<Efsm> {
    let m: Efsm = load_json(path)?;
    m.validate().map_err(|e| Error::Json {
        file: path.display().to_string(),
        location: ".".to_string(),
        message: e.to_string(),
    })?;
    Ok(m)
}

pub fn load_cfg(path: &Path) -> Result<Cfg> {
    let cfg: Cfg = load_json(path)?;
    cfg.validate().map_err(|e| Error::Json {
        file: path.display().to_string(),
        location: ".".to_string(),
        message: e.to_string(),
    })?;
    Ok(cfg)
}

pub fn load_annotations(path: &Path) -> Result<AnnotationSpec> {
    load_json(path)
}

pub fn load_api_table(path: &Path) -> Result<ApiTable> {
    load_json(path)
}

pub fn load_skeleton(path: &Path) -> Result<Skeleton> {
    load_json(path)
}

/// One event per line: `{"channel": "time", "value": 0}`; unit events carry
/// no value field.
pub fn events_from_jsonl(text: &str) -> std::result::Result<Trace, (usize, String)> {
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let event: Event = serde_json::from_str(line).map_err(|e| (i + 1, e.to_string()))?;
        events.push(event);
    }
    Ok(Trace::new(events))
}

pub fn events_to_jsonl(t: &Trace) -> String {
    let mut out = String::new();
    for e in t.iter() {
        out.push_str(&serde_json::to_string(e).expect("events always serialize"));
        out.push('\n');
    }
    out
}

pub fn load_events(path: &Path) -> Result<Trace> {
    let file = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        file: file.clone(),
        source,
    })?;
    events_from_jsonl(&text).map_err(|(line, message)| Error::Json {
        file,
        location: format!("line {line}"),
        message,
    })
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io {
        file: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Value;

    #[test]
    fn jsonl_round_trip() {
        let t = Trace::new(vec![
            Event::int("time", 0),
            Event::float("lat", 10.5),
            Event::unit("newline"),
        ]);
        let text = events_to_jsonl(&t);
        assert_eq!(events_from_jsonl(&text).unwrap(), t);
        assert!(!text.contains("\"value\":null"));
    }

    #[test]
    fn jsonl_error_names_the_line() {
        let err = events_from_jsonl("{\"channel\": \"a\"}\nnot json\n").unwrap_err();
        assert_eq!(err.0, 2);
    }

    #[test]
    fn integer_json_stays_integer() {
        let t = events_from_jsonl("{\"channel\": \"lat\", \"value\": 10}").unwrap();
        assert_eq!(t.events[0].value, Value::Int(10));
    }
}
