mod support;

use std::thread;
use std::time::Duration;

use qmio::broker::{CalibrationWindow, WindowPolicy};
use qmio::event_log::Event;
use qmio::framing::read_envelope;
use qmio_core::calib::CalibrationScope;
use qmio_core::engine::OutputFormat;
use qmio_core::job::{codes, JobSpec, JobState};
use qmio_core::qasm::parse_qasm2;
use qmio_core::transpile::{compile_aot, StalePolicy};
use qmio_core::wire::{Envelope, JobId, MsgType};
use std::io::Write;
use std::net::TcpStream;

use support::*;

#[test]
fn ping_pong_echoes_the_job_id() {
    let b = start_broker(|_| {});
    let id = JobId::from_u128(0xabc);
    let reply = connect(b.local_addr()).request(&Envelope::new(MsgType::Ping, id, "")).unwrap();
    assert_eq!((reply.msg_type, reply.job_id), (MsgType::Pong, id));
}

#[test]
fn bell_round_trip_with_lifecycle() {
    let b = start_broker(|_| {});
    let r = expect_result(submit(b.local_addr(), 1, &bell(2000, 5)));
    assert_eq!(r.result.shots, 2000);
    assert!(r.result.counts.keys().all(|k| k == "00" || k == "11"));
    assert_eq!(r.result.counts.values().sum::<u64>(), 2000);
    assert!((r.result.program_duration - 1.34e-6).abs() < 1e-15);
    let rec = b.record(JobId::from_u128(1)).unwrap();
    let states: Vec<JobState> = rec.transitions.iter().map(|t| t.state).collect();
    assert_eq!(states, [JobState::Queued, JobState::Compiling, JobState::Executing, JobState::Done]);
    assert!(rec.transitions.windows(2).all(|w| w[0].t_ns <= w[1].t_ns));
    let st = expect_status(status(b.local_addr(), 1));
    assert_eq!(st.state, JobState::Done);
    assert_eq!(st.transitions, rec.transitions);
}

#[test]
fn same_seed_same_counts_and_memory_format() {
    let b = start_broker(|_| {});
    let a = expect_result(submit(b.local_addr(), 1, &bell(500, 9)));
    let c = expect_result(submit(b.local_addr(), 2, &bell(500, 9)));
    assert_eq!(a.result.counts, c.result.counts);
    let spec = JobSpec { output_format: OutputFormat::Memory, ..bell(50, 9) };
    let m = expect_result(submit(b.local_addr(), 3, &spec));
    assert_eq!(m.result.memory.as_ref().map(Vec::len), Some(50));
}

#[test]
fn validation_failures_carry_stages() {
    let b = start_broker(|_| {});
    let addr = b.local_addr();
    let mut spec = bell(10, 0);
    spec.ir_kind = "qasm3".into();
    let e = expect_error(submit(addr, 1, &spec));
    assert_eq!((e.code.as_str(), e.stage.as_deref()), (codes::VALIDATION_FAILED, Some("validate")));

    let e = expect_error(submit(addr, 2, &JobSpec::qasm("qreg q[1];\nh q[0]\n", 10)));
    assert_eq!(e.stage.as_deref(), Some("parse"));
    assert!(e.message.contains("3:1") || e.message.contains("2:"), "{}", e.message);

    let e = expect_error(submit(addr, 3, &JobSpec::qasm("qreg q[40];\nh q[39];\n", 10)));
    assert_eq!(e.stage.as_deref(), Some("validate"));

    let reply = connect(addr).request(&Envelope::new(MsgType::Submit, JobId::from_u128(4), "{not json")).unwrap();
    assert_eq!(expect_error(reply).stage.as_deref(), Some("decode"));

    assert_eq!(expect_error(submit(addr, 5, &JobSpec::qasm(x_chain(1), 0))).stage.as_deref(), Some("validate"));
}

#[test]
fn duration_budget_fails_at_schedule() {
    let b = start_broker(|c| c.engine = qmio_core::engine::EngineConfig::echo(0));
    // 40 ns per x, 1 us readout
    let ok = expect_result(submit(b.local_addr(), 1, &JobSpec::qasm(x_chain(12_450), 10)));
    assert!((ok.result.program_duration - 499e-6).abs() < 1e-12);
    let e = expect_error(submit(b.local_addr(), 2, &JobSpec::qasm(x_chain(12_500), 10)));
    assert_eq!((e.code.as_str(), e.stage.as_deref()), (codes::VALIDATION_FAILED, Some("schedule")));
    assert_eq!(b.record(JobId::from_u128(2)).unwrap().state, JobState::Failed);
}

#[test]
fn duplicate_ids_and_unknown_jobs() {
    let b = start_broker(|_| {});
    expect_result(submit(b.local_addr(), 7, &bell(10, 0)));
    let e = expect_error(submit(b.local_addr(), 7, &bell(10, 0)));
    assert!(e.message.contains("duplicate"));
    assert_eq!(expect_error(status(b.local_addr(), 99)).code, codes::UNKNOWN_JOB);
}

#[test]
fn queue_full_then_cancel_of_queued_job() {
    let b = start_broker(|c| {
        c.max_queue_depth = 1;
        // Bell at 1000 shots is one QPU-second; hold it for 0.4 s
        c.wall_time_scale = 0.4;
    });
    let addr = b.local_addr();
    let first = thread::spawn(move || submit(addr, 1, &bell(1000, 1)));
    wait_for_state(&b, 1, JobState::Executing);
    let second = thread::spawn(move || submit(addr, 2, &bell(1000, 1)));
    wait_for_state(&b, 2, JobState::Queued);
    let st = expect_status(status(addr, 2));
    assert_eq!(st.position, Some(0));

    let e = expect_error(submit(addr, 3, &bell(10, 1)));
    assert_eq!(e.code, codes::QUEUE_FULL);
    assert!(b.record(JobId::from_u128(3)).is_none());

    let reply = connect(addr).request(&Envelope::new(MsgType::Cancel, JobId::from_u128(2), "")).unwrap();
    assert_eq!(expect_status(reply).state, JobState::Cancelled);
    assert_eq!(expect_error(second.join().unwrap()).code, codes::CANCELLED);

    // an executing job cannot be cancelled
    let reply = connect(addr).request(&Envelope::new(MsgType::Cancel, JobId::from_u128(1), "")).unwrap();
    assert_eq!(expect_error(reply).code, codes::VALIDATION_FAILED);
    expect_result(first.join().unwrap());
}

#[test]
fn jobs_run_in_fifo_order_one_at_a_time() {
    let b = start_broker(|c| c.wall_time_scale = 0.02);
    let addr = b.local_addr();
    let first = thread::spawn(move || submit(addr, 10, &bell(1000, 1)));
    wait_for_state(&b, 10, JobState::Executing);
    let mut rest = Vec::new();
    for id in 11..14u128 {
        rest.push(thread::spawn(move || submit(addr, id, &bell(100, 1))));
        wait_for_state(&b, id, JobState::Queued);
    }
    expect_result(first.join().unwrap());
    for h in rest {
        expect_result(h.join().unwrap());
    }
    let events = b.events();
    let started: Vec<JobId> = events
        .iter()
        .filter_map(|e| match &e.event {
            Event::Transition { job_id, to: JobState::Executing, .. } => Some(*job_id),
            _ => None,
        })
        .collect();
    assert_eq!(started, (10..14u128).map(JobId::from_u128).collect::<Vec<_>>());
    // no two jobs overlap between Executing and Done
    let mut busy = false;
    for e in &events {
        if let Event::Transition { to, .. } = e.event {
            match to {
                JobState::Executing => {
                    assert!(!busy);
                    busy = true;
                }
                JobState::Done | JobState::Failed => busy = false,
                _ => {}
            }
        }
    }
}

#[test]
fn per_job_timeout_releases_the_qpu() {
    let b = start_broker(|c| {
        c.wall_time_scale = 1.0;
        c.per_job_timeout = Duration::from_millis(200);
    });
    let e = expect_error(submit(b.local_addr(), 1, &bell(1000, 0)));
    assert_eq!((e.code.as_str(), e.stage.as_deref()), (codes::TIMEOUT, Some("execute")));
    assert_eq!(b.record(JobId::from_u128(1)).unwrap().state, JobState::Failed);
    expect_result(submit(b.local_addr(), 2, &bell(10, 0)));
}

fn short_window(policy: WindowPolicy) -> CalibrationWindow {
    // two simulated hours pass in 0.36 s
    CalibrationWindow { policy, duration: 7200.0, time_scale: 5e-5 }
}

#[test]
fn calibration_window_queues_and_swaps_the_model() {
    let b = start_broker(|c| c.calibration = short_window(WindowPolicy::Queue));
    let addr = b.local_addr();
    let v0 = b.model().version;
    let v1 = b.begin_calibration(CalibrationScope::Daily, 3, 1_700_000_000);
    assert_eq!(v1, v0 + 1);
    assert!(b.is_calibrating());
    let job = thread::spawn(move || submit(addr, 1, &bell(100, 0)));
    wait_for_state(&b, 1, JobState::Queued);
    let st = expect_status(status(addr, 1));
    assert!(st.behind_calibration);
    assert_eq!(st.model_version, v0);
    let r = expect_result(job.join().unwrap());
    assert_eq!(r.result.model_version, v1);
    assert!(!b.is_calibrating());
    let events = b.events();
    let pos = |f: &dyn Fn(&Event) -> bool| events.iter().position(|e| f(&e.event)).unwrap();
    let start = pos(&|e| matches!(e, Event::CalibrationStart { .. }));
    let swap = pos(&|e| matches!(e, Event::ModelSwap { version } if *version == v1));
    let compiling = pos(&|e| matches!(e, Event::Transition { to: JobState::Compiling, .. }));
    assert!(start < swap && swap < compiling);
    let elapsed = events[swap].t_ns - events[start].t_ns;
    assert!(elapsed >= 350_000_000, "window closed after {elapsed} ns");
}

#[test]
fn calibration_window_can_reject() {
    let b = start_broker(|c| c.calibration = short_window(WindowPolicy::Reject));
    b.begin_calibration(CalibrationScope::Weekly, 3, 0);
    assert_eq!(expect_error(submit(b.local_addr(), 1, &bell(10, 0))).code, codes::CALIBRATING);
}

#[test]
fn artifacts_bind_and_stale_policy_applies() {
    let src = "OPENQASM 2.0;\ninclude \"qelib1.inc\";\n// @param theta\nqreg q[1];\ncreg c[1];\nu(theta,0,0) q[0];\nmeasure q[0] -> c[0];\n";
    let model = qmio::model_io::bundled_qmio32();
    let artifact = compile_aot(&parse_qasm2(src).unwrap(), &model, 0).unwrap();
    let text = artifact.to_text();

    let b = start_broker(|_| {});
    let r = expect_result(submit(b.local_addr(), 1, &JobSpec::artifact(text.clone(), vec![std::f64::consts::PI], 100)));
    assert_eq!(r.result.counts.get("1"), Some(&100));
    assert!(r.warnings.is_empty());

    let e = expect_error(submit(b.local_addr(), 2, &JobSpec::artifact(text.clone(), vec![], 100)));
    assert_eq!(e.stage.as_deref(), Some("bind"));
    let e = expect_error(submit(b.local_addr(), 3, &JobSpec::artifact(text.replacen("sx ", "x ", 1), vec![1.0], 100)));
    assert_eq!(e.stage.as_deref(), Some("load"));

    let mut newer = model.clone();
    newer.version += 1;
    b.swap_model(newer.clone());
    let r = expect_result(submit(b.local_addr(), 4, &JobSpec::artifact(text.clone(), vec![0.0], 100)));
    assert_eq!(r.warnings.len(), 1);

    let strict = start_broker(|c| {
        c.stale_policy = StalePolicy::Reject;
        c.reject_uncompiled = true;
    });
    strict.swap_model(newer);
    let e = expect_error(submit(strict.local_addr(), 1, &JobSpec::artifact(text, vec![0.0], 100)));
    assert_eq!(e.stage.as_deref(), Some("bind"));
    let e = expect_error(submit(strict.local_addr(), 2, &bell(10, 0)));
    assert_eq!(e.stage.as_deref(), Some("validate"));
}

#[test]
fn bad_frames_and_unsupported_messages() {
    let b = start_broker(|_| {});
    let reply = connect(b.local_addr()).request(&Envelope::new(MsgType::Pong, JobId::default(), "")).unwrap();
    assert_eq!(expect_error(reply).code, codes::UNSUPPORTED);

    let mut s = TcpStream::connect(b.local_addr()).unwrap();
    s.write_all(b"HTTP/1.1 GET /\r\n\r\n").unwrap();
    let reply = read_envelope(&mut s).unwrap().unwrap();
    assert_eq!(expect_error(reply).code, codes::BAD_FRAME);
    assert!(read_envelope(&mut s).unwrap().is_none(), "connection closes after a bad frame");

    // broker still serves other connections
    expect_result(submit(b.local_addr(), 1, &bell(10, 0)));
}

#[test]
fn execution_errors_are_reported_at_execute() {
    let b = start_broker(|c| {
        c.engine = qmio_core::engine::EngineConfig::new(qmio_core::engine::EngineKind::Statevector, 2, 0).unwrap()
    });
    let src =
        "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[3];\ncreg c[3];\nh q[0];\nh q[1];\nh q[2];\nmeasure q -> c;\n";
    let e = expect_error(submit(b.local_addr(), 1, &JobSpec::qasm(src, 10)));
    assert_eq!((e.code.as_str(), e.stage.as_deref()), (codes::EXECUTION_FAILED, Some("execute")));
}
