//! Seeded synthetic workloads and the trace file format.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::ingest::{decode_record, encode_record, CallEvent, WireRecord};
use crate::model::{class_order, validate_model, ClassRecord, ModelRecord, SystemModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HotClass {
    pub class_id: String,
    pub mean_calls_per_second: f64,
}

/// Multiplies one class's rate inside `[start_ms, end_ms)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Burst {
    pub start_ms: u64,
    pub end_ms: u64,
    pub class_id: String,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WorkloadSpec {
    pub model: ModelRecord,
    pub duration_ms: u64,
    pub seed: u64,
    #[serde(default)]
    pub hot_classes: Vec<HotClass>,
    #[serde(default)]
    pub baseline_calls_per_second: f64,
    #[serde(default)]
    pub burst: Option<Burst>,
}

impl WorkloadSpec {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::InvalidSpec(e.to_string()))
    }

    pub fn validate(&self) -> Result<SystemModel, HarnessError> {
        let invalid = |m: String| Err(HarnessError::InvalidSpec(m));
        let model = validate_model(&self.model).map_err(|e| HarnessError::InvalidSpec(e.to_string()))?;
        let rate_ok = |r: f64| r >= 0.0 && r.is_finite();
        if !rate_ok(self.baseline_calls_per_second) {
            return invalid("baseline rate must be a finite non-negative number".into());
        }
        for hot in &self.hot_classes {
            if !model.contains(&hot.class_id) {
                return invalid(format!("hot class `{}` is not in the model", hot.class_id));
            }
            if !rate_ok(hot.mean_calls_per_second) {
                return invalid(format!("rate of `{}` must be finite and non-negative", hot.class_id));
            }
        }
        if let Some(b) = &self.burst {
            if !model.contains(&b.class_id) {
                return invalid(format!("burst class `{}` is not in the model", b.class_id));
            }
            if b.start_ms > b.end_ms || b.end_ms > self.duration_ms {
                return invalid("burst interval must lie within the duration".into());
            }
            if !rate_ok(b.multiplier) {
                return invalid("burst multiplier must be finite and non-negative".into());
            }
        }
        Ok(model)
    }
}

/// A model record followed by time-ordered events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceFile {
    pub model: ModelRecord,
    pub events: Vec<CallEvent>,
}

impl TraceFile {
    pub fn duration_ms(&self) -> u64 {
        self.events.last().map_or(0, |e| e.timestamp_ms)
    }

    /// Per-class sums of event counts.
    pub fn totals(&self) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for e in &self.events {
            *out.entry(e.class_id.clone()).or_insert(0) += e.count;
        }
        out
    }

    pub fn lines(&self) -> impl Iterator<Item = String> + '_ {
        std::iter::once(encode_record(&WireRecord::Model(self.model.clone())))
            .chain(self.events.iter().map(|e| encode_record(&WireRecord::Event(e.clone()))))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for line in self.lines() {
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let malformed = |line: usize, why: String| HarnessError::MalformedTrace { line, reason: why };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let model = match lines.next() {
            None => return Err(malformed(1, "empty trace".into())),
            Some((n, l)) => match decode_record(l) {
                Ok(WireRecord::Model(m)) => m,
                Ok(_) => return Err(malformed(n + 1, "first record must be a model".into())),
                Err(e) => return Err(malformed(n + 1, e.to_string())),
            },
        };
        let mut events = Vec::new();
        let mut last = 0;
        for (n, l) in lines {
            match decode_record(l) {
                Ok(WireRecord::Event(e)) => {
                    if e.timestamp_ms < last {
                        return Err(malformed(n + 1, "timestamps go backwards".into()));
                    }
                    last = e.timestamp_ms;
                    events.push(e);
                }
                Ok(_) => return Err(malformed(n + 1, "expected an event record".into())),
                Err(e) => return Err(malformed(n + 1, e.to_string())),
            }
        }
        Ok(TraceFile { model, events })
    }
}

/// Draws each class's calls from a Poisson process at its rate (the burst
/// multiplies the rate inside its interval). Calls of one class in the same
/// millisecond are batched into one event. Each class uses its own stream
/// of the seeded generator, so adding a class leaves the others unchanged.
pub fn generate_workload(spec: &WorkloadSpec) -> Result<TraceFile, HarnessError> {
    let model = spec.validate()?;
    let hot: BTreeMap<&str, f64> =
        spec.hot_classes.iter().map(|h| (h.class_id.as_str(), h.mean_calls_per_second)).collect();

    let mut events: Vec<(u64, usize, CallEvent)> = Vec::new();
    for (rank, id) in class_order(&model).into_iter().enumerate() {
        let rate = hot.get(id.as_str()).copied().unwrap_or(spec.baseline_calls_per_second);
        let segments = match &spec.burst {
            Some(b) if b.class_id == id => vec![
                (0, b.start_ms, rate),
                (b.start_ms, b.end_ms, rate * b.multiplier),
                (b.end_ms, spec.duration_ms, rate),
            ],
            _ => vec![(0, spec.duration_ms, rate)],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(rank as u64);

        let mut per_ms: BTreeMap<u64, u64> = BTreeMap::new();
        for (start, end, per_second) in segments {
            if per_second <= 0.0 || start >= end {
                continue;
            }
            let gap = Exp::new(per_second / 1000.0).expect("positive rate");
            let mut t = start as f64;
            loop {
                t += gap.sample(&mut rng);
                if t >= end as f64 {
                    break;
                }
                *per_ms.entry(t as u64).or_insert(0) += 1;
            }
        }
        events.extend(
            per_ms.into_iter().map(|(ms, count)| (ms, rank, CallEvent::new(id.clone(), count, ms))),
        );
    }
    events.sort_by_key(|(ms, rank, _)| (*ms, *rank));

    let mut model_record = model.to_record();
    model_record.revision = spec.model.revision;
    Ok(TraceFile { model: model_record, events: events.into_iter().map(|(_, _, e)| e).collect() })
}

/// A random package tree with `classes` classes at most `max_depth`
/// packages deep and metrics in `0..=40`.
pub fn random_model(classes: usize, max_depth: usize, seed: u64) -> ModelRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_depth = max_depth.max(1);
    let mut packages: Vec<Vec<String>> = Vec::new();
    let n_packages = (classes / 6).clamp(1, 60);
    for p in 0..n_packages {
        let depth = rng.random_range(1..=max_depth);
        let mut path = match packages.is_empty() || rng.random_bool(0.3) {
            true => Vec::new(),
            false => packages[rng.random_range(0..packages.len())].clone(),
        };
        path.truncate(depth - 1);
        path.push(format!("pkg{p}"));
        packages.push(path);
    }
    let classes = (0..classes)
        .map(|i| {
            let path = packages[rng.random_range(0..packages.len())].clone();
            ClassRecord {
                id: format!("{}.C{i}", path.join(".")),
                name: format!("C{i}"),
                package_path: path,
                num_methods: rng.random_range(0..=40),
                num_attributes: rng.random_range(0..=40),
            }
        })
        .collect();
    ModelRecord { revision: None, packages: Vec::new(), classes }
}
