//! Wire protocol decoding and time-window aggregation of call events.

mod window;
mod wire;

pub use window::{
    window_aggregate, AggregateError, Aggregation, DropTally, WindowAggregator, DEFAULT_WINDOW_MS,
};
pub use wire::{
    decode_record, encode_record, CallEvent, ControlAction, ControlRecord, DecodeError,
    MetricFrame, WireRecord,
};
