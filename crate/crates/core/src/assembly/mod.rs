// SPDX-License-Identifier: Apache-2.0

//! De Bruijn graph assembly executed through the in-memory instruction set.

pub mod euler;
pub mod graph;
pub mod hashmap;
pub mod pipeline;

pub use euler::{
    contigs_from_path, degree_pass, find_start, fleury, is_valid_next_edge, DegreeTable, EulerPath,
};
pub use graph::{debruijn_build, simplify, Edge, GraphConfig, SparseGraph};
pub use hashmap::{hashmap_build, HashConfig, KmerTable};
pub use pipeline::{assemble, Assembly, AssemblyConfig, Multiplicity};
