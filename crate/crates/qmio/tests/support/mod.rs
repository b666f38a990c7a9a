#![allow(dead_code)]

use std::net::SocketAddr;
use std::thread;
use std::time::{Duration, Instant};

use qmio::broker::{Broker, BrokerConfig, JobRecord};
use qmio::framing::{from_payload, to_payload, Connection};
use qmio::model_io::bundled_qmio32;
use qmio_core::job::{ErrorReply, JobSpec, JobState, ResultReply, StatusReply};
use qmio_core::wire::{Envelope, JobId, MsgType};

pub use qmio::client::BELL;

pub fn start_broker(tweak: impl FnOnce(&mut BrokerConfig)) -> Broker {
    let mut cfg = BrokerConfig { listen: "127.0.0.1:0".into(), ..BrokerConfig::default() };
    tweak(&mut cfg);
    Broker::start(cfg, bundled_qmio32()).expect("broker starts")
}

pub fn connect(addr: SocketAddr) -> Connection {
    Connection::open(addr, Some(Duration::from_secs(60))).expect("connect")
}

pub fn submit(addr: SocketAddr, id: u128, spec: &JobSpec) -> Envelope {
    connect(addr).request(&Envelope::new(MsgType::Submit, JobId::from_u128(id), to_payload(spec))).expect("reply")
}

pub fn expect_result(env: Envelope) -> ResultReply {
    match env.msg_type {
        MsgType::Result => from_payload(&env.payload).expect("result payload"),
        other => panic!("expected RESULT, got {other}: {}", env.payload),
    }
}

pub fn expect_error(env: Envelope) -> ErrorReply {
    match env.msg_type {
        MsgType::Error => from_payload(&env.payload).expect("error payload"),
        other => panic!("expected ERROR, got {other}: {}", env.payload),
    }
}

pub fn status(addr: SocketAddr, id: u128) -> Envelope {
    connect(addr).request(&Envelope::new(MsgType::StatusReq, JobId::from_u128(id), "")).expect("reply")
}

pub fn expect_status(env: Envelope) -> StatusReply {
    assert_eq!(env.msg_type, MsgType::StatusRep, "{}", env.payload);
    from_payload(&env.payload).expect("status payload")
}

/// Polls until `pred` holds, panicking after ten seconds.
pub fn wait_until(what: &str, mut pred: impl FnMut() -> bool) {
    let t0 = Instant::now();
    while !pred() {
        assert!(t0.elapsed() < Duration::from_secs(10), "timed out waiting for {what}");
        thread::sleep(Duration::from_millis(2));
    }
}

pub fn wait_for_state(broker: &Broker, id: u128, state: JobState) -> JobRecord {
    let id = JobId::from_u128(id);
    let mut rec = None;
    wait_until(&format!("job {id} to reach {state}"), || {
        rec = broker.record(id).filter(|r| r.state == state);
        rec.is_some()
    });
    rec.expect("loop exits with a record")
}

pub fn bell(shots: u64, seed: u64) -> JobSpec {
    JobSpec { seed: Some(seed), ..JobSpec::qasm(BELL, shots) }
}

/// `n` X gates then a measurement on one qubit.
pub fn x_chain(n: usize) -> String {
    let mut s = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[1];\ncreg c[1];\n");
    for _ in 0..n {
        s.push_str("x q[0];\n");
    }
    s.push_str("measure q[0] -> c[0];\n");
    s
}
