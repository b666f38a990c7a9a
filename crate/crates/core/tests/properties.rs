mod common;

use proptest::prelude::*;
use qmio_core::calib::{apply_drift, DriftParams, OuParams};
use qmio_core::engine::{execute, EngineConfig, OutputFormat};
use qmio_core::hardware::generate_hex_lattice;
use qmio_core::program::{GateKind, GateOp, Param, Program};
use qmio_core::qasm::{emit_qasm2, parse_qasm2};
use qmio_core::transpile::transpile;
use qmio_core::wire::{decode_envelope, decode_stream, encode_envelope, Decoded, Envelope, JobId, MsgType};

fn msg_type() -> impl Strategy<Value = MsgType> {
    prop::sample::select(MsgType::ALL.to_vec())
}

fn envelope() -> impl Strategy<Value = Envelope> {
    (msg_type(), any::<[u8; 16]>(), ".{0,200}").prop_map(|(t, id, payload)| Envelope {
        msg_type: t,
        job_id: JobId(id),
        payload,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn codec_round_trip(e in envelope()) {
        let bytes = encode_envelope(&e).unwrap();
        prop_assert_eq!(bytes.len(), 25 + e.payload.len());
        prop_assert_eq!(decode_envelope(&bytes).unwrap(), e);
    }

    #[test]
    fn decoder_is_prefix_safe(e in envelope()) {
        let bytes = encode_envelope(&e).unwrap();
        for cut in 0..bytes.len() {
            match decode_stream(&bytes[..cut]) {
                Ok(Decoded::NeedMore(n)) => prop_assert!(n >= 1 && n <= bytes.len() - cut),
                other => prop_assert!(false, "prefix {} gave {:?}", cut, other),
            }
        }
        match decode_stream(&bytes).unwrap() {
            Decoded::Complete { envelope, consumed } => {
                prop_assert_eq!(envelope, e);
                prop_assert_eq!(consumed, bytes.len());
            }
            other => prop_assert!(false, "full frame gave {:?}", other),
        }
    }

    #[test]
    fn decoder_total_on_noise(bytes in prop::collection::vec(any::<u8>(), 0..96)) {
        let _ = decode_envelope(&bytes);
        let _ = decode_stream(&bytes);
    }

    #[test]
    fn decoder_total_on_valid_header_noise(t in 1u8..=8, tail in prop::collection::vec(any::<u8>(), 0..64)) {
        let mut bytes = b"QHQ1".to_vec();
        bytes.push(t);
        bytes.extend(tail);
        let _ = decode_envelope(&bytes);
    }

    #[test]
    fn parser_never_panics(src in "[ -~\n]{0,200}") {
        let _ = parse_qasm2(&src);
    }

    #[test]
    fn parser_never_panics_on_token_soup(
        toks in prop::collection::vec(
            prop::sample::select(vec![
                "qreg", "creg", "q", "c", "[", "]", "(", ")", "0", "1", "3", ";", ",", "->", "h", "cx", "u",
                "rz", "measure", "barrier", "pi", "+", "-", "*", "/", "theta", "OPENQASM", "2.0", "include",
                "\"qelib1.inc\"", "// @param theta\n", "if", "==", "gate", "{", "}", "1e400", "sin",
            ]),
            0..60,
        )
    ) {
        let _ = parse_qasm2(&toks.join(" "));
    }

    #[test]
    fn emit_parse_round_trip(seed in any::<u64>(), measure in any::<bool>()) {
        let mut p = common::random_program(seed, 5, 20);
        if measure {
            p.n_clbits = p.n_qubits;
            for q in 0..p.n_qubits {
                p.push(GateOp::measure(q, q));
            }
        }
        let back = parse_qasm2(&emit_qasm2(&p)).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn symbolic_emit_round_trip(scale in -4.0f64..4.0, offset in -4.0f64..4.0) {
        prop_assume!(scale != 0.0);
        let mut p = Program::new(1, 0);
        p.parameters.push("theta".into());
        p.push(GateOp::new(GateKind::Rz, vec![0], vec![Param::Symbol { name: "theta".into(), scale, offset }]));
        let back = parse_qasm2(&emit_qasm2(&p)).unwrap();
        let (a, b) = (&back.ops[0].params[0], &p.ops[0].params[0]);
        let at = |x: f64| a.resolve(|_| Some(x)).unwrap() - b.resolve(|_| Some(x)).unwrap();
        prop_assert!(at(0.0).abs() < 1e-12 && at(1.7).abs() < 1e-12);
    }

    #[test]
    fn drift_keeps_sets_physical(elapsed in 0.0f64..1e7, seed in any::<u64>(), vol_scale in 1.0f64..1e3) {
        let set = generate_hex_lattice(6).unwrap().calibration_set();
        let mut params = DriftParams::default();
        params.readout_fidelity.volatility *= vol_scale;
        params.two_qubit_fidelity.volatility *= vol_scale;
        params.t1.volatility *= vol_scale;
        let out = apply_drift(&set, elapsed, seed, &params).unwrap();
        prop_assert!(out.is_physical());
        prop_assert_eq!(out, apply_drift(&set, elapsed, seed, &params).unwrap());
    }

    #[test]
    fn wall_time_monotone(shots in 1u64..5000, extra in 1u64..5000, p in 1e-6f64..1e-2, dp in 0.0f64..1e-2) {
        let m = generate_hex_lattice(4).unwrap();
        let t = transpile(&parse_qasm2("qreg q[2]; creg c[2]; h q[0]; cx q[0],q[1]; measure q -> c;").unwrap(), &m, 0)
            .unwrap()
            .1;
        let cfg = EngineConfig::echo(0);
        let w = |s, period| execute(&cfg, &t, s, Some(period), OutputFormat::Counts).unwrap().estimated_wall_time;
        prop_assert!(w(shots + extra, p) >= w(shots, p));
        prop_assert!(w(shots, p + dp) >= w(shots, p));
    }

    #[test]
    fn echo_ignores_program_and_seed(seed in any::<u64>(), engine_seed in any::<u64>()) {
        let m = generate_hex_lattice(8).unwrap();
        let mut p = common::random_program(seed, 5, 20);
        p.n_clbits = 2.min(p.n_qubits);
        for q in 0..p.n_clbits {
            p.push(GateOp::measure(q, q));
        }
        let t = transpile(&p, &m, seed).unwrap().1;
        let r = execute(&EngineConfig::echo(engine_seed), &t, 64, None, OutputFormat::Counts).unwrap();
        prop_assert_eq!(r.counts.len(), 1);
        prop_assert_eq!(r.counts.get(&"0".repeat(p.n_clbits)).copied(), Some(64));
    }
}

/// Monte-Carlo mean of many seeded walks tracks the closed-form OU mean and
/// approaches the degraded attractor monotonically.
#[test]
fn drift_mean_approaches_attractor() {
    let mut set = generate_hex_lattice(2).unwrap().calibration_set();
    for q in &mut set.qubits {
        q.single_qubit_fidelity = 0.999;
    }
    let params = DriftParams::default();
    let ou: OuParams = params.single_qubit_fidelity;
    assert_eq!(ou.attractor, 0.98);
    let horizons = [0.5, 1.0, 2.0, 5.0, 10.0, 30.0].map(|d| d * 86_400.0);
    let mut previous = 0.999;
    for dt in horizons {
        let walks = 1000;
        let mean: f64 = (0..walks)
            .map(|seed| apply_drift(&set, dt, seed, &params).unwrap().qubits[0].single_qubit_fidelity)
            .sum::<f64>()
            / walks as f64;
        let expected = ou.mean_after(0.999, dt);
        let stationary_sd = ou.volatility / (2.0 * ou.rate).sqrt();
        assert!(
            (mean - expected).abs() < 4.0 * stationary_sd / (walks as f64).sqrt() + 1e-6,
            "{dt}: {mean} vs {expected}"
        );
        assert!(mean < previous, "not decreasing at {dt}");
        assert!(mean > 0.98 - 1e-3);
        previous = mean;
    }
    assert!((previous - 0.98).abs() < 2e-3);
}
