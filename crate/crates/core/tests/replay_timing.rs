use std::collections::HashSet;
use std::io::Read;
use std::net::TcpListener;
use std::thread;

use perfcity::harness::{generate_workload, random_model, replay, WorkloadSpec};
use perfcity::ingest::{decode_record, encode_record, CallEvent, WireRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Accepts one connection and reads it to the end.
fn sink() -> (String, thread::JoinHandle<usize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let reader = thread::spawn(move || {
        let (mut s, _) = listener.accept().unwrap();
        let mut buf = Vec::new();
        s.read_to_end(&mut buf).unwrap();
        buf.iter().filter(|&&b| b == b'\n').count()
    });
    (addr, reader)
}

#[test]
fn replay_wall_time_scales_with_speed() {
    let spec = WorkloadSpec {
        model: random_model(10, 2, 4),
        duration_ms: 10_000,
        seed: 4,
        hot_classes: vec![],
        baseline_calls_per_second: 20.0,
        burst: None,
    };
    let trace = generate_workload(&spec).unwrap();
    let last = trace.events.last().unwrap().timestamp_ms;
    assert!(last >= 9_900, "trace ends at {last} ms");

    for (speed, expected_secs) in [(1.0, 10.0), (10.0, 1.0)] {
        let (addr, reader) = sink();
        let report = replay(&trace, &addr, speed).unwrap();
        let lines = reader.join().unwrap();
        assert_eq!(lines as u64, report.records_sent);
        assert_eq!(report.records_sent, trace.events.len() as u64 + 1);
        let secs = report.wall_time.as_secs_f64();
        assert!(
            (secs - expected_secs).abs() <= 0.1 * expected_secs,
            "speed {speed}: {secs:.3} s, expected {expected_secs} s"
        );
    }
}

#[test]
fn distinct_records_encode_to_distinct_lines() {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let records: Vec<WireRecord> = (0..1000u64)
        .map(|i| {
            let class = format!("p{}.C{}", rng.random_range(0..5), rng.random_range(0..50));
            WireRecord::Event(CallEvent::new(class, rng.random_range(1..1_000), i * 7 + rng.random_range(0..7)))
        })
        .collect();
    let lines: Vec<String> = records.iter().map(encode_record).collect();
    assert_eq!(lines.iter().collect::<HashSet<_>>().len(), 1000);
    for (line, record) in lines.iter().zip(&records) {
        assert!(!line.contains('\n'));
        assert_eq!(&decode_record(line).unwrap(), record);
    }
}
