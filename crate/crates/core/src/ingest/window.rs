//! Fixed-length windowing of call events into metric frames.

use std::collections::BTreeMap;

use thiserror::Error;

use super::wire::{CallEvent, MetricFrame};
use crate::model::{ClassId, SystemModel};

pub const DEFAULT_WINDOW_MS: u64 = 1000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AggregateError {
    #[error("event at {timestamp_ms} ms is before the open window starting at {window_start_ms} ms")]
    LateEvent { timestamp_ms: u64, window_start_ms: u64 },
    #[error("event for unknown class `{0}`")]
    UnknownClass(ClassId),
}

/// Diagnostic counters for events the aggregator refused.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DropTally {
    pub late_events: u64,
    pub late_calls: u64,
    pub unknown_events: u64,
    pub unknown_calls: u64,
}

impl DropTally {
    pub fn events(&self) -> u64 {
        self.late_events + self.unknown_events
    }
}

/// Streaming aggregator. Window `k` covers `[k * window_ms, (k + 1) * window_ms)`
/// in event time; windows are emitted strictly in order with no gaps,
/// including idle windows as frames with empty counts.
#[derive(Debug, Clone)]
pub struct WindowAggregator {
    window_ms: u64,
    current: u64,
    counts: BTreeMap<ClassId, u64>,
    tally: DropTally,
}

impl WindowAggregator {
    /// # Panics
    /// If `window_ms` is zero.
    pub fn new(window_ms: u64) -> Self {
        assert!(window_ms >= 1, "window length must be at least 1 ms");
        Self { window_ms, current: 0, counts: BTreeMap::new(), tally: DropTally::default() }
    }

    pub fn window_ms(&self) -> u64 {
        self.window_ms
    }

    /// Index of the window currently accumulating.
    pub fn current_window(&self) -> u64 {
        self.current
    }

    pub fn current_start_ms(&self) -> u64 {
        self.current * self.window_ms
    }

    pub fn current_end_ms(&self) -> u64 {
        (self.current + 1) * self.window_ms
    }

    pub fn tally(&self) -> DropTally {
        self.tally
    }

    /// Accepts one event. Windows that the event's timestamp closes are
    /// appended to `out` even when the event itself is then refused as
    /// belonging to an unknown class.
    pub fn push(
        &mut self,
        event: &CallEvent,
        model: Option<&SystemModel>,
        out: &mut Vec<MetricFrame>,
    ) -> Result<(), AggregateError> {
        if event.timestamp_ms < self.current_start_ms() {
            self.tally.late_events += 1;
            self.tally.late_calls += event.count;
            return Err(AggregateError::LateEvent {
                timestamp_ms: event.timestamp_ms,
                window_start_ms: self.current_start_ms(),
            });
        }
        self.advance_to(event.timestamp_ms, out);
        if !model.is_some_and(|m| m.contains(&event.class_id)) {
            self.tally.unknown_events += 1;
            self.tally.unknown_calls += event.count;
            return Err(AggregateError::UnknownClass(event.class_id.clone()));
        }
        *self.counts.entry(event.class_id.clone()).or_insert(0) += event.count;
        Ok(())
    }

    /// Closes every window whose end is at or before `time_ms`.
    pub fn advance_to(&mut self, time_ms: u64, out: &mut Vec<MetricFrame>) {
        while self.current_end_ms() <= time_ms {
            out.push(self.close());
        }
    }

    /// Emits the open window as-is (possibly partial) and opens the next.
    pub fn flush(&mut self) -> MetricFrame {
        self.close()
    }

    /// Drops accumulated counts of classes no longer in `model`; they are
    /// tallied as unknown.
    pub fn retain_known(&mut self, model: &SystemModel) {
        let tally = &mut self.tally;
        self.counts.retain(|id, calls| {
            let keep = model.contains(id);
            if !keep {
                tally.unknown_calls += *calls;
            }
            keep
        });
    }

    fn close(&mut self) -> MetricFrame {
        let frame = MetricFrame {
            window_index: self.current,
            window_start_ms: self.current_start_ms(),
            counts: std::mem::take(&mut self.counts),
        };
        self.current += 1;
        frame
    }
}

/// Result of aggregating a finite event stream.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Aggregation {
    pub frames: Vec<MetricFrame>,
    pub tally: DropTally,
}

/// Aggregates a finite, time-ordered event stream. The window holding the
/// last event is flushed at the end; late and unknown-class events are
/// dropped and tallied.
pub fn window_aggregate(
    events: impl IntoIterator<Item = CallEvent>,
    window_ms: u64,
    model: &SystemModel,
) -> Aggregation {
    let mut agg = WindowAggregator::new(window_ms);
    let mut frames = Vec::new();
    let mut any = false;
    for event in events {
        any = true;
        let _ = agg.push(&event, Some(model), &mut frames);
    }
    if any {
        frames.push(agg.flush());
    }
    Aggregation { frames, tally: agg.tally() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClassInfo;
    use rand::{Rng, SeedableRng};

    fn model(ids: &[&str]) -> SystemModel {
        SystemModel::from_classes(ids.iter().map(|id| ClassInfo {
            id: id.to_string(),
            name: id.to_string(),
            package_path: vec!["p".into()],
            num_methods: 1,
            num_attributes: 1,
        }))
        .unwrap()
    }

    #[test]
    fn window_arithmetic() {
        let m = model(&["A", "B"]);
        let agg = window_aggregate(
            [CallEvent::new("A", 1, 10), CallEvent::new("A", 2, 40), CallEvent::new("B", 1, 60)],
            50,
            &m,
        );
        assert_eq!(agg.frames.len(), 2);
        assert_eq!(agg.frames[0].counts, BTreeMap::from([("A".to_string(), 3)]));
        assert_eq!(agg.frames[1].counts, BTreeMap::from([("B".to_string(), 1)]));
        assert_eq!(agg.frames[1].window_start_ms, 50);
    }

    #[test]
    fn idle_windows_are_emitted() {
        let mut agg = WindowAggregator::new(100);
        let mut out = Vec::new();
        agg.advance_to(300, &mut out);
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|f| f.counts.is_empty()));
        assert_eq!(out.iter().map(|f| f.window_index).collect::<Vec<_>>(), vec![0, 1, 2]);

        let m = model(&["A"]);
        let agg = window_aggregate([CallEvent::new("A", 1, 10), CallEvent::new("A", 1, 170)], 50, &m);
        let sizes: Vec<usize> = agg.frames.iter().map(|f| f.counts.len()).collect();
        assert_eq!(sizes, vec![1, 0, 0, 1]);
    }

    #[test]
    fn late_and_unknown_are_tallied() {
        let m = model(&["A"]);
        let mut agg = WindowAggregator::new(50);
        let mut out = Vec::new();
        agg.push(&CallEvent::new("A", 1, 120), Some(&m), &mut out).unwrap();
        assert_eq!(out.len(), 2);
        assert!(matches!(
            agg.push(&CallEvent::new("A", 5, 30), Some(&m), &mut out),
            Err(AggregateError::LateEvent { .. })
        ));
        assert_eq!(
            agg.push(&CallEvent::new("Z", 2, 130), Some(&m), &mut out),
            Err(AggregateError::UnknownClass("Z".into()))
        );
        assert_eq!(
            agg.push(&CallEvent::new("A", 2, 130), None, &mut out),
            Err(AggregateError::UnknownClass("A".into()))
        );
        let t = agg.tally();
        assert_eq!((t.late_events, t.late_calls, t.unknown_events, t.unknown_calls), (1, 5, 2, 4));
        // Events in the open window are not late.
        agg.push(&CallEvent::new("A", 1, 100), Some(&m), &mut out).unwrap();
        assert_eq!(agg.flush().count("A"), 2);
    }

    #[test]
    fn unknown_event_still_advances_time() {
        let m = model(&["A"]);
        let mut agg = WindowAggregator::new(10);
        let mut out = Vec::new();
        let _ = agg.push(&CallEvent::new("Z", 1, 35), Some(&m), &mut out);
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn removed_classes_are_pruned() {
        let mut agg = WindowAggregator::new(10);
        let mut out = Vec::new();
        agg.push(&CallEvent::new("A", 3, 1), Some(&model(&["A", "B"])), &mut out).unwrap();
        agg.push(&CallEvent::new("B", 1, 1), Some(&model(&["A", "B"])), &mut out).unwrap();
        agg.retain_known(&model(&["B"]));
        let frame = agg.flush();
        assert_eq!(frame.count("A"), 0);
        assert_eq!(frame.count("B"), 1);
        assert_eq!(agg.tally().unknown_calls, 3);
    }

    #[test]
    fn conservation_against_brute_force() {
        let ids = ["A", "B", "C", "D", "E"];
        let m = model(&ids);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let mut t = 0u64;
            let events: Vec<CallEvent> = (0..rng.random_range(0..400))
                .map(|_| {
                    t += rng.random_range(0..40);
                    let id = if rng.random_bool(0.05) { "ghost" } else { ids[rng.random_range(0..5)] };
                    CallEvent::new(id, rng.random_range(1..20), t)
                })
                .collect();
            let window = rng.random_range(1..200);
            let agg = window_aggregate(events.clone(), window, &m);

            let mut expected: BTreeMap<&str, u64> = BTreeMap::new();
            for e in events.iter().filter(|e| e.class_id != "ghost") {
                *expected.entry(&e.class_id).or_default() += e.count;
            }
            let mut got: BTreeMap<&str, u64> = BTreeMap::new();
            for f in &agg.frames {
                for (id, c) in &f.counts {
                    assert!(*c > 0);
                    *got.entry(id).or_default() += c;
                }
            }
            assert_eq!(got, expected);
            for (i, f) in agg.frames.iter().enumerate() {
                assert_eq!(f.window_index, i as u64);
                assert_eq!(f.window_start_ms, i as u64 * window);
                for e in events.iter().filter(|e| e.class_id != "ghost") {
                    let inside = e.timestamp_ms >= f.window_start_ms
                        && e.timestamp_ms < f.window_start_ms + window;
                    if inside {
                        assert!(f.counts.contains_key(&e.class_id));
                    }
                }
            }
        }
    }
}
