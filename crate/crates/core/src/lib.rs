//! Discrete-event simulator of an HSDPA cell carrying a mixed real-time and
//! best-effort flow to one test user, used to compare MAC-hs buffer
//! management schemes: complete buffer sharing and static or dynamic
//! time-space priority.

pub mod buffer;
pub mod engine;
pub mod flow_control;
pub mod radio;
pub mod rlc;
pub mod scheduler;
pub mod traffic;
pub mod config;
pub mod sim;
pub mod sweep;
