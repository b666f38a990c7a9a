//! Host-side services for the QMIO stack: the control-node broker, the
//! scheduler gateway, the runtime client and calibration tooling.

pub mod broker;
pub mod client;
pub mod event_log;
pub mod framing;
pub mod gateway;
pub mod metrics;
pub mod model_io;
