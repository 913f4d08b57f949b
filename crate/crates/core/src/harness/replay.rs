//! Timed replay of a trace over the ingest protocol.

use std::io::{BufWriter, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use super::{HarnessError, TraceFile};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayReport {
    pub records_sent: u64,
    pub wall_time: Duration,
}

/// Sends `trace` to `target`, pacing each event at `timestamp / speed`
/// after the start. The model record goes out immediately.
pub fn replay(trace: &TraceFile, target: &str, speed: f64) -> Result<ReplayReport, HarnessError> {
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(HarnessError::InvalidSpec(format!("replay speed must be positive, got {speed}")));
    }
    let addrs: Vec<SocketAddr> = target
        .to_socket_addrs()
        .map_err(|e| HarnessError::ConnectionRefused { target: target.to_string(), source: e })?
        .collect();
    let stream = TcpStream::connect(&addrs[..])
        .map_err(|e| HarnessError::ConnectionRefused { target: target.to_string(), source: e })?;
    stream.set_nodelay(true)?;
    let mut out = BufWriter::with_capacity(64 * 1024, stream);

    let start = Instant::now();
    let mut sent = 0u64;
    for line in trace.lines() {
        if sent > 0 {
            let ts = trace.events[sent as usize - 1].timestamp_ms;
            let due = start + Duration::from_secs_f64(ts as f64 / 1000.0 / speed);
            let now = Instant::now();
            if due > now {
                out.flush()?;
                std::thread::sleep(due - now);
            }
        }
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
        if sent == 0 {
            out.flush()?;
        }
        sent += 1;
    }
    out.flush()?;
    let wall_time = start.elapsed();
    let stream = out.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
    let _ = stream.shutdown(std::net::Shutdown::Write);
    Ok(ReplayReport { records_sent: sent, wall_time })
}
