//! The GPS travel-distance case study: conforming input generation,
//! deviation injectors, read-loop simulations of the two calculator
//! implementations, and the detection-matrix experiment that crosses them.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::annotate::{annotate, AnnotationSpec};
use crate::cfg::Cfg;
use crate::effects::{adapt_lines, api_adapter, build_external_efsm, ApiModel, ApiTable};
use crate::efsm::{Efsm, Event, Trace};
use crate::monitor::{run_trace, AlarmPolicy, MonitorReport};
use crate::skeleton::{extract_skeleton, ExtractionMode};
use crate::value::{Value, ValueType};
use crate::Result;

pub const ASSUMPTION_JSON: &str = include_str!("../data/assumption.efsm.json");
pub const LISTING1_CFG_JSON: &str = include_str!("../data/listing1.cfg.json");
pub const LISTING2_CFG_JSON: &str = include_str!("../data/listing2.cfg.json");
pub const GPS_ANNOTATIONS_JSON: &str = include_str!("../data/gps.annotations.json");
pub const APIS_JSON: &str = include_str!("../data/apis.json");

/// The contract assumption over the GPS input format.
pub fn assumption() -> Result<Efsm> {
    let m: Efsm = serde_json::from_str(ASSUMPTION_JSON)?;
    m.validate()?;
    Ok(m)
}

/// CFG of the scanf-based calculator's read loop.
pub fn scanf_cfg() -> Result<Cfg> {
    let cfg: Cfg = serde_json::from_str(LISTING1_CFG_JSON)?;
    cfg.validate()?;
    Ok(cfg)
}

/// CFG of the getline+sscanf calculator's read loop.
pub fn line_cfg() -> Result<Cfg> {
    let cfg: Cfg = serde_json::from_str(LISTING2_CFG_JSON)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn annotations() -> Result<AnnotationSpec> {
    Ok(serde_json::from_str(GPS_ANNOTATIONS_JSON)?)
}

pub fn api_table() -> Result<ApiTable> {
    Ok(serde_json::from_str(APIS_JSON)?)
}

/// Which calculator implementation to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CalculatorImpl {
    /// Three scanf calls per point; line breaks invisible.
    Scanf,
    /// One getline+sscanf per point; one line per call.
    LinePattern,
}

impl CalculatorImpl {
    pub fn cfg(&self) -> Result<Cfg> {
        match self {
            CalculatorImpl::Scanf => scanf_cfg(),
            CalculatorImpl::LinePattern => line_cfg(),
        }
    }

    pub fn api_model(&self) -> ApiModel {
        match self {
            CalculatorImpl::Scanf => ApiModel::ScanfLike,
            CalculatorImpl::LinePattern => ApiModel::LinePatternLike,
        }
    }
}

/// The runtime monitor of an implementation: plain extraction of its CFG,
/// annotated with the GPS constraints.
pub fn monitor_for(imp: CalculatorImpl) -> Result<Efsm> {
    let sk = extract_skeleton(&imp.cfg()?, &api_table()?, ExtractionMode::Plain)?;
    annotate(&sk, &annotations()?)
}

/// The machine an implementation is verified against: extraction with the
/// API effect fragments, same annotation.
pub fn external_for(imp: CalculatorImpl) -> Result<Efsm> {
    build_external_efsm(&imp.cfg()?, &api_table()?, &annotations()?)
}

/// One point of the GPS stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GpsPoint {
    pub time: i64,
    pub lat: f64,
    pub lon: f64,
}

/// Great-circle distance in meters on a 6,371,000 m sphere.
pub fn haversine_m(a: &GpsPoint, b: &GpsPoint) -> f64 {
    const EARTH_RADIUS_M: f64 = 6_371_000.0;
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

pub fn path_distance_m(points: &[GpsPoint]) -> f64 {
    // fold from +0.0: f64's Sum starts at -0.0, which leaks into reports
    // for paths with no pairs
    points
        .windows(2)
        .map(|w| haversine_m(&w[0], &w[1]))
        .fold(0.0, |acc, d| acc + d)
}

/// Replayable conforming points: non-decreasing timestamps starting above
/// 90 (so a timestamp misread as a latitude always breaks its range guard),
/// latitude in [-90, 90], longitude in [-180, 180].
pub fn generate_points(n: usize, seed: u64) -> Vec<GpsPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut time = rng.gen_range(100..=200);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        points.push(GpsPoint {
            time,
            lat: rng.gen_range(-90.0..=90.0),
            lon: rng.gen_range(-180.0..=180.0),
        });
        time += rng.gen_range(0..=10);
    }
    points
}

pub fn points_to_trace(points: &[GpsPoint]) -> Trace {
    let mut t = Trace::default();
    for p in points {
        t.push(Event::int("time", p.time));
        t.push(Event::float("lat", p.lat));
        t.push(Event::float("lon", p.lon));
        t.push(Event::unit("newline"));
    }
    t
}

/// Seeded conforming trace of `n` points, each `time lat lon newline`.
pub fn generate_conforming(n: usize, seed: u64) -> Trace {
    points_to_trace(&generate_points(n, seed))
}

/// A format deviation injected into a conforming trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Deviation {
    /// The upgraded sensor emits an altitude after each longitude.
    ExtraAltitude { alt_min: f64, alt_max: f64 },
    /// Line breaks disappear, as in a streaming rewrite.
    DropNewlines,
}

impl Deviation {
    pub fn extra_altitude() -> Deviation {
        Deviation::ExtraAltitude {
            alt_min: 0.0,
            alt_max: 9000.0,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Deviation::ExtraAltitude { .. } => "extra_altitude",
            Deviation::DropNewlines => "drop_newlines",
        }
    }
}

/// Injects a deviation. `seed` drives the altitude values; it is unused for
/// newline removal.
pub fn apply_deviation(t: &Trace, d: &Deviation, seed: u64) -> Trace {
    match d {
        Deviation::ExtraAltitude { alt_min, alt_max } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Trace::default();
            for e in t.iter() {
                let is_lon = e.channel == "lon";
                out.push(e.clone());
                if is_lon {
                    out.push(Event::float("alt", rng.gen_range(*alt_min..=*alt_max)));
                }
            }
            out
        }
        Deviation::DropNewlines => t.project(&["time", "lat", "lon", "alt"]),
    }
}

/// Result of simulating one calculator over one external trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalculatorRun {
    pub distance: f64,
    pub points_consumed: usize,
    /// The value-assignment events the instrumented read loop would report:
    /// each consumed value on the channel of the variable receiving it.
    pub monitor_events: Trace,
}

const READ_CYCLE: [(&str, ValueType); 3] = [
    ("time", ValueType::Int),
    ("lat", ValueType::Float),
    ("lon", ValueType::Float),
];

// What a C read of the given type makes of the value: %f widens integers,
// %d keeps the integer part.
fn read_as(v: Value, ty: ValueType) -> Value {
    match (v, ty) {
        (Value::Int(i), ValueType::Float) => Value::Float(i as f64),
        (Value::Float(x), ValueType::Int) => Value::Int(x.trunc() as i64),
        _ => v,
    }
}

fn point_from(vals: &[Value]) -> GpsPoint {
    GpsPoint {
        time: match vals[0] {
            Value::Int(i) => i,
            _ => unreachable!("time slot is read as int"),
        },
        lat: vals[1].as_f64().unwrap_or(0.0),
        lon: vals[2].as_f64().unwrap_or(0.0),
    }
}

/// Simulates the implementation's read loop over the adapted input and sums
/// the great-circle distance of fully consumed points.
pub fn run_calculator(imp: CalculatorImpl, external: &Trace) -> CalculatorRun {
    let mut monitor_events = Trace::default();
    let mut points = Vec::new();
    match imp {
        CalculatorImpl::Scanf => {
            let values: Vec<Value> = api_adapter(ApiModel::ScanfLike, 1, external)
                .events
                .into_iter()
                .map(|e| e.value)
                .collect();
            let mut next = 0;
            'read_loop: loop {
                let mut triple = Vec::with_capacity(3);
                for (channel, ty) in READ_CYCLE {
                    let Some(v) = values.get(next) else {
                        break 'read_loop; // scanf returns 0 items, loop breaks
                    };
                    next += 1;
                    let read = read_as(*v, ty);
                    monitor_events.push(Event {
                        channel: channel.to_string(),
                        value: read,
                    });
                    triple.push(read);
                }
                points.push(point_from(&triple));
            }
        }
        CalculatorImpl::LinePattern => {
            for line in adapt_lines(external, READ_CYCLE.len()) {
                let mut triple = Vec::with_capacity(3);
                for (ev, (channel, ty)) in line.delivered.iter().zip(READ_CYCLE) {
                    let read = read_as(ev.value, ty);
                    monitor_events.push(Event {
                        channel: channel.to_string(),
                        value: read,
                    });
                    triple.push(read);
                }
                if line.short {
                    break; // items_read < 3
                }
                points.push(point_from(&triple));
            }
            // getline reports end of input after the last line
        }
    }
    CalculatorRun {
        distance: path_distance_m(&points),
        points_consumed: points.len(),
        monitor_events,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultStatus {
    CorrectResult,
    WrongResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixCell {
    pub implementation: CalculatorImpl,
    /// None is the conforming control row.
    pub deviation: Option<&'static str>,
    pub alarms: usize,
    pub points_consumed: usize,
    pub distance: f64,
    pub result: ResultStatus,
}

/// The deviation-detection experiment: both implementations crossed with
/// both deviations, plus a conforming control row per implementation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionMatrix {
    pub points: usize,
    pub seed: u64,
    pub baseline_distance: f64,
    pub cells: Vec<MatrixCell>,
}

const RESULT_TOLERANCE: f64 = 1e-9;

fn result_status(distance: f64, baseline: f64) -> ResultStatus {
    if (distance - baseline).abs() <= RESULT_TOLERANCE * baseline.abs().max(1.0) {
        ResultStatus::CorrectResult
    } else {
        ResultStatus::WrongResult
    }
}

/// Runs the full experiment: for each implementation and each input variant,
/// the simulated result and the alarms its extracted monitor raises over the
/// instrumented read stream.
pub fn detection_matrix(n: usize, seed: u64) -> Result<DetectionMatrix> {
    let baseline = generate_conforming(n, seed);
    let variants: [(Option<Deviation>, Trace); 3] = [
        (None, baseline.clone()),
        (
            Some(Deviation::extra_altitude()),
            apply_deviation(
                &baseline,
                &Deviation::extra_altitude(),
                seed.wrapping_add(1),
            ),
        ),
        (
            Some(Deviation::DropNewlines),
            apply_deviation(&baseline, &Deviation::DropNewlines, seed.wrapping_add(1)),
        ),
    ];
    let mut cells = Vec::new();
    let mut baseline_distance = 0.0;
    for imp in [CalculatorImpl::Scanf, CalculatorImpl::LinePattern] {
        let monitor = monitor_for(imp)?;
        let base_run = run_calculator(imp, &baseline);
        baseline_distance = base_run.distance;
        for (deviation, trace) in &variants {
            let run = run_calculator(imp, trace);
            let report: MonitorReport =
                run_trace(&monitor, &run.monitor_events, AlarmPolicy::default())?;
            cells.push(MatrixCell {
                implementation: imp,
                deviation: deviation.as_ref().map(|d| d.label()),
                alarms: report.alarms.len(),
                points_consumed: run.points_consumed,
                distance: run.distance,
                result: result_status(run.distance, base_run.distance),
            });
        }
    }
    Ok(DetectionMatrix {
        points: n,
        seed,
        baseline_distance,
        cells,
    })
}

impl fmt::Display for DetectionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "detection matrix: {} points, seed {}, baseline distance {:.3} m",
            self.points, self.seed, self.baseline_distance
        )?;
        writeln!(
            f,
            "{impl_:<14} {input:<16} {alarms:>7} {points:>8} {distance:>16} result",
            impl_ = "impl",
            input = "input",
            alarms = "alarms",
            points = "points",
            distance = "distance_m"
        )?;
        for c in &self.cells {
            writeln!(
                f,
                "{:<14} {:<16} {:>7} {:>8} {:>16.3} {}",
                match c.implementation {
                    CalculatorImpl::Scanf => "scanf",
                    CalculatorImpl::LinePattern => "getline_sscanf",
                },
                c.deviation.unwrap_or("conforming"),
                c.alarms,
                c.points_consumed,
                c.distance,
                match c.result {
                    ResultStatus::CorrectResult => "correct",
                    ResultStatus::WrongResult => "WRONG",
                }
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_artifacts_parse() {
        assumption().unwrap();
        scanf_cfg().unwrap();
        line_cfg().unwrap();
        annotations().unwrap();
        api_table().unwrap();
    }

    #[test]
    fn conforming_trace_shape() {
        let t = generate_conforming(2, 42);
        assert_eq!(t.len(), 8);
        assert_eq!(t.events[0].channel, "time");
        assert_eq!(t.events[3].channel, "newline");
        assert!(generate_conforming(0, 1).is_empty());
    }

    #[test]
    fn generation_is_replayable() {
        assert_eq!(generate_conforming(50, 7), generate_conforming(50, 7));
        assert_ne!(generate_conforming(50, 7), generate_conforming(50, 8));
    }

    #[test]
    fn altitude_goes_after_lon() {
        let t = generate_conforming(1, 3);
        let d = apply_deviation(&t, &Deviation::extra_altitude(), 9);
        let channels: Vec<&str> = d.iter().map(|e| e.channel.as_str()).collect();
        assert_eq!(channels, vec!["time", "lat", "lon", "alt", "newline"]);
    }

    #[test]
    fn drop_newlines_is_projection() {
        let t = generate_conforming(5, 3);
        let d = apply_deviation(&t, &Deviation::DropNewlines, 0);
        assert_eq!(d, t.project(&["time", "lat", "lon"]));
    }

    #[test]
    fn deviations_compose() {
        let t = generate_conforming(3, 3);
        let both = apply_deviation(
            &apply_deviation(&t, &Deviation::extra_altitude(), 9),
            &Deviation::DropNewlines,
            0,
        );
        assert_eq!(both.len(), 3 * 4);
        assert!(both.iter().all(|e| e.channel != "newline"));
    }

    #[test]
    fn single_point_has_zero_distance() {
        let t = generate_conforming(1, 5);
        for imp in [CalculatorImpl::Scanf, CalculatorImpl::LinePattern] {
            let run = run_calculator(imp, &t);
            assert_eq!(run.points_consumed, 1);
            assert_eq!(run.distance, 0.0);
        }
    }

    #[test]
    fn both_implementations_agree_on_conforming_input() {
        let t = generate_conforming(20, 11);
        let a = run_calculator(CalculatorImpl::Scanf, &t);
        let b = run_calculator(CalculatorImpl::LinePattern, &t);
        assert_eq!(a.points_consumed, 20);
        assert_eq!(b.points_consumed, 20);
        assert_eq!(a.distance, b.distance);
        assert_eq!(a.monitor_events, b.monitor_events);
    }

    #[test]
    fn haversine_known_value() {
        // quarter of the equator
        let a = GpsPoint {
            time: 0,
            lat: 0.0,
            lon: 0.0,
        };
        let b = GpsPoint {
            time: 1,
            lat: 0.0,
            lon: 90.0,
        };
        let quarter = std::f64::consts::FRAC_PI_2 * 6_371_000.0;
        assert!((haversine_m(&a, &b) - quarter).abs() < 1e-6);
    }
}
