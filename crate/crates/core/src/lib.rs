// SPDX-License-Identifier: Apache-2.0

//! Functional simulator of a processing-in-SOT-MRAM fabric with a de Bruijn
//! graph assembler that runs through the fabric's in-memory instructions,
//! plus a trace-driven latency/energy model.

pub mod assembly;
pub mod bits;
pub mod error;
pub mod fabric;
pub mod isa;
pub mod mapping;
pub mod perf;
pub mod runner;
pub mod seq;
pub mod trace;
pub mod workload;

pub use bits::Bits;
pub use error::{Error, Result};
