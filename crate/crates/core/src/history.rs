//! Fixed-capacity frame history backing the scatter plot, and the
//! live/paused view cursor over it.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{ControlAction, MetricFrame};
use crate::model::ClassId;

pub const DEFAULT_HISTORY_CAPACITY: usize = 300;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HistoryError {
    #[error("frame {got} is not newer than buffered frame {newest}")]
    OutOfOrderFrame { got: u64, newest: u64 },
    #[error("window {target} is not buffered{}", match .range {
        Some(r) => format!(" (buffered: {}..={})", r.oldest, r.newest),
        None => " (buffer is empty)".to_string(),
    })]
    SeekOutOfRange { target: u64, range: Option<WindowRange> },
    #[error("seek requires a window index")]
    MissingSeekTarget,
    #[error("history capacity must be at least 1")]
    ZeroCapacity,
}

/// Inclusive range of buffered window indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowRange {
    pub oldest: u64,
    pub newest: u64,
}

impl WindowRange {
    pub fn contains(&self, index: u64) -> bool {
        (self.oldest..=self.newest).contains(&index)
    }
}

/// FIFO of the most recent `capacity` frames, oldest first.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    capacity: usize,
    frames: VecDeque<Arc<MetricFrame>>,
    total_pushed: u64,
}

impl HistoryBuffer {
    pub fn new(capacity: usize) -> Result<Self, HistoryError> {
        if capacity == 0 {
            return Err(HistoryError::ZeroCapacity);
        }
        Ok(Self { capacity, frames: VecDeque::with_capacity(capacity), total_pushed: 0 })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn total_pushed(&self) -> u64 {
        self.total_pushed
    }

    pub fn frames(&self) -> impl DoubleEndedIterator<Item = &Arc<MetricFrame>> + ExactSizeIterator {
        self.frames.iter()
    }

    pub fn newest(&self) -> Option<&MetricFrame> {
        self.frames.back().map(|f| f.as_ref())
    }

    pub fn range(&self) -> Option<WindowRange> {
        Some(WindowRange {
            oldest: self.frames.front()?.window_index,
            newest: self.frames.back()?.window_index,
        })
    }

    /// Appends `frame`, evicting and returning the oldest frame when full.
    pub fn push_frame(
        &mut self,
        frame: impl Into<Arc<MetricFrame>>,
    ) -> Result<Option<Arc<MetricFrame>>, HistoryError> {
        let frame = frame.into();
        if let Some(newest) = self.frames.back() {
            if frame.window_index <= newest.window_index {
                return Err(HistoryError::OutOfOrderFrame {
                    got: frame.window_index,
                    newest: newest.window_index,
                });
            }
        }
        let evicted =
            if self.frames.len() == self.capacity { self.frames.pop_front() } else { None };
        self.frames.push_back(frame);
        self.total_pushed += 1;
        Ok(evicted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CursorMode {
    #[default]
    Live,
    Paused,
}

/// Which window is the newest visible column. `position` is `None` only
/// while nothing is buffered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ViewCursor {
    pub mode: CursorMode,
    pub position: Option<u64>,
}

impl ViewCursor {
    pub fn live(range: Option<WindowRange>) -> Self {
        Self { mode: CursorMode::Live, position: range.map(|r| r.newest) }
    }

    pub fn is_live(&self) -> bool {
        self.mode == CursorMode::Live
    }

    /// Applies a transport action against the currently buffered range.
    pub fn set_cursor(
        self,
        action: ControlAction,
        arg: Option<u64>,
        range: Option<WindowRange>,
    ) -> Result<ViewCursor, HistoryError> {
        let newest = range.map(|r| r.newest);
        match action {
            ControlAction::Pause => Ok(Self { mode: CursorMode::Paused, position: newest }),
            ControlAction::Resume => Ok(Self { mode: CursorMode::Live, position: newest }),
            ControlAction::Seek => {
                let target = arg.ok_or(HistoryError::MissingSeekTarget)?;
                match range {
                    Some(r) if r.contains(target) => {
                        Ok(Self { mode: CursorMode::Paused, position: Some(target) })
                    }
                    _ => Err(HistoryError::SeekOutOfRange { target, range }),
                }
            }
        }
    }

    /// Re-establishes the cursor invariants after the buffer changed: a live
    /// cursor follows the newest frame, a paused cursor whose frame was
    /// evicted moves to the oldest buffered frame.
    pub fn sync(&mut self, range: Option<WindowRange>) {
        match (self.mode, range) {
            (_, None) => self.position = None,
            (CursorMode::Live, Some(r)) => self.position = Some(r.newest),
            (CursorMode::Paused, Some(r)) => {
                self.position = Some(match self.position {
                    Some(p) => p.clamp(r.oldest, r.newest),
                    None => r.newest,
                });
            }
        }
    }
}

/// Rows follow the class order, columns are visible frames oldest first.
/// A zero cell means "no mark".
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScatterMatrix {
    pub rows: Vec<ClassId>,
    pub columns: Vec<u64>,
    pub cells: Vec<Vec<u64>>,
}

impl ScatterMatrix {
    pub fn get(&self, row: usize, column: usize) -> u64 {
        self.cells[row][column]
    }

    pub fn has_mark(&self, row: usize, column: usize) -> bool {
        self.get(row, column) > 0
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows.len(), self.columns.len())
    }
}

pub fn scatter_matrix(
    buffer: &HistoryBuffer,
    order: &[ClassId],
    cursor: &ViewCursor,
) -> ScatterMatrix {
    let visible: Vec<&MetricFrame> = match cursor.position {
        None => Vec::new(),
        Some(pos) => buffer
            .frames()
            .map(|f| f.as_ref())
            .take_while(|f| cursor.is_live() || f.window_index <= pos)
            .collect(),
    };
    ScatterMatrix {
        rows: order.to_vec(),
        columns: visible.iter().map(|f| f.window_index).collect(),
        cells: order.iter().map(|id| visible.iter().map(|f| f.count(id)).collect()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn frame(i: u64, counts: &[(&str, u64)]) -> MetricFrame {
        MetricFrame {
            window_index: i,
            window_start_ms: i * 1000,
            counts: counts.iter().map(|(k, v)| (k.to_string(), *v)).collect::<BTreeMap<_, _>>(),
        }
    }

    fn indices(b: &HistoryBuffer) -> Vec<u64> {
        b.frames().map(|f| f.window_index).collect()
    }

    #[test]
    fn fifo_eviction() {
        let mut b = HistoryBuffer::new(3).unwrap();
        for i in 0..4 {
            b.push_frame(frame(i, &[])).unwrap();
        }
        assert_eq!(indices(&b), vec![1, 2, 3]);
        assert_eq!(b.total_pushed(), 4);
        assert_eq!(b.range(), Some(WindowRange { oldest: 1, newest: 3 }));
    }

    #[test]
    fn rejects_out_of_order() {
        let mut b = HistoryBuffer::new(3).unwrap();
        b.push_frame(frame(5, &[])).unwrap();
        assert_eq!(
            b.push_frame(frame(5, &[])),
            Err(HistoryError::OutOfOrderFrame { got: 5, newest: 5 })
        );
        assert!(b.push_frame(frame(2, &[])).is_err());
        assert_eq!(b.len(), 1);
        assert_eq!(HistoryBuffer::new(0).err(), Some(HistoryError::ZeroCapacity));
    }

    #[test]
    fn matrix_lookup() {
        let mut b = HistoryBuffer::new(10).unwrap();
        b.push_frame(frame(0, &[("A", 3)])).unwrap();
        b.push_frame(frame(1, &[("B", 1)])).unwrap();
        let order = vec!["A".to_string(), "B".to_string()];
        let m = scatter_matrix(&b, &order, &ViewCursor::live(b.range()));
        assert_eq!(m.cells, vec![vec![3, 0], vec![0, 1]]);
        assert!(m.has_mark(0, 0) && !m.has_mark(0, 1));
        assert_eq!(m.columns, vec![0, 1]);
    }

    #[test]
    fn empty_buffer_has_no_columns() {
        let b = HistoryBuffer::new(4).unwrap();
        let order = vec!["A".to_string()];
        let m = scatter_matrix(&b, &order, &ViewCursor::live(b.range()));
        assert_eq!(m.dims(), (1, 0));
        assert_eq!(m.cells, vec![Vec::<u64>::new()]);
    }

    #[test]
    fn cursor_transport() {
        let mut b = HistoryBuffer::new(5).unwrap();
        for i in 6..=10 {
            b.push_frame(frame(i, &[("A", i)])).unwrap();
        }
        let live = ViewCursor::live(b.range());
        let paused = live.set_cursor(ControlAction::Pause, None, b.range()).unwrap();
        assert_eq!(paused, ViewCursor { mode: CursorMode::Paused, position: Some(10) });
        let back = paused.set_cursor(ControlAction::Seek, Some(7), b.range()).unwrap();
        assert_eq!(back.position, Some(7));
        assert!(matches!(
            back.set_cursor(ControlAction::Seek, Some(5), b.range()),
            Err(HistoryError::SeekOutOfRange { target: 5, .. })
        ));
        assert_eq!(
            back.set_cursor(ControlAction::Seek, None, b.range()),
            Err(HistoryError::MissingSeekTarget)
        );

        let order = vec!["A".to_string()];
        let m = scatter_matrix(&b, &order, &back);
        assert_eq!(m.columns, vec![6, 7]);
        assert_eq!(m.cells, vec![vec![6, 7]]);

        let resumed = back.set_cursor(ControlAction::Resume, None, b.range()).unwrap();
        assert_eq!(resumed, ViewCursor::live(b.range()));
    }

    #[test]
    fn paused_cursor_clamps_after_eviction() {
        let mut b = HistoryBuffer::new(2).unwrap();
        b.push_frame(frame(0, &[])).unwrap();
        b.push_frame(frame(1, &[])).unwrap();
        let mut c = ViewCursor::live(b.range())
            .set_cursor(ControlAction::Seek, Some(0), b.range())
            .unwrap();
        b.push_frame(frame(2, &[])).unwrap();
        c.sync(b.range());
        assert_eq!(c.position, Some(1));
        assert_eq!(c.mode, CursorMode::Paused);

        let mut live = ViewCursor::live(b.range());
        b.push_frame(frame(3, &[])).unwrap();
        live.sync(b.range());
        assert_eq!(live.position, Some(3));
    }

    #[test]
    fn resume_shows_new_columns() {
        let mut b = HistoryBuffer::new(100).unwrap();
        for i in 0..10 {
            b.push_frame(frame(i, &[])).unwrap();
        }
        let order: Vec<ClassId> = vec![];
        let mut c = ViewCursor::live(b.range()).set_cursor(ControlAction::Pause, None, b.range()).unwrap();
        let before = scatter_matrix(&b, &order, &c).columns.len();
        for i in 10..17 {
            b.push_frame(frame(i, &[])).unwrap();
            c.sync(b.range());
            assert_eq!(scatter_matrix(&b, &order, &c).columns.len(), before);
        }
        let c = c.set_cursor(ControlAction::Resume, None, b.range()).unwrap();
        assert_eq!(scatter_matrix(&b, &order, &c).columns.len(), before + 7);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn buffer_is_suffix_of_pushed(cap in 1usize..20, gaps in proptest::collection::vec(1u64..4, 0..80)) {
                let mut b = HistoryBuffer::new(cap).unwrap();
                let mut all = Vec::new();
                let mut idx = 0;
                for g in gaps {
                    idx += g;
                    all.push(idx);
                    b.push_frame(frame(idx, &[])).unwrap();
                }
                let keep = all.len().min(cap);
                prop_assert_eq!(indices(&b), all[all.len() - keep..].to_vec());
                prop_assert_eq!(b.total_pushed(), all.len() as u64);
            }
        }
    }
}
