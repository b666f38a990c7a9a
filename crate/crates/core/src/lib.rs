//! Core of a desk-scale hybrid HPC/quantum stack: hardware models, an
//! OpenQASM 2.0 frontend, the transpiler, emulator engines, the envelope
//! codec, calibration drift and small variational helpers.
//!
//! Everything here needs only `alloc`; IO, networking and file formats live
//! in the `qmio` crate.

#![no_std]
extern crate alloc;

pub mod calib;
pub mod engine;
pub mod hardware;
pub mod job;
pub mod latency;
pub mod math;
pub mod program;
pub mod qasm;
pub mod transpile;
pub mod vqe;
pub mod wire;

pub use engine::{execute, EngineConfig, EngineKind, ExecutionResult, OutputFormat};
pub use hardware::{generate_hex_lattice, HardwareModel};
pub use job::JobSpec;
pub use program::{GateKind, GateOp, Param, Program};
pub use qasm::{emit_qasm2, parse_qasm2};
pub use transpile::{bind_parameters, compile_aot, transpile, CompiledArtifact, StalePolicy, TimedProgram};
pub use wire::{decode_envelope, encode_envelope, Envelope, JobId, MsgType};
