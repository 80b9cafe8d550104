// SPDX-License-Identifier: Apache-2.0

//! Ordered operation trace feeding the cost model.
//!
//! Events are appended in issue order. Adjacent events with the same
//! kind and stage are coalesced into one record so that long workloads
//! keep a compact log; totals are unaffected by coalescing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    /// Single-row read.
    R,
    /// Row write (any subset of one row).
    W,
    /// Single sub-SA logic activation (AND3/OR3/MAJ and complements).
    #[serde(rename = "C_AND3")]
    CAnd3,
    /// Triple sub-SA activation (XOR3/XNOR2/full-add cycle).
    #[serde(rename = "C_ADD")]
    CAdd,
    /// Shared digital processing unit operation.
    #[serde(rename = "DPU")]
    Dpu,
    /// Host/fabric or cross-sub-array data movement, counted in bytes.
    #[serde(rename = "XFER")]
    Xfer,
}

impl EventKind {
    pub const ALL: [EventKind; 6] =
        [EventKind::R, EventKind::W, EventKind::CAnd3, EventKind::CAdd, EventKind::Dpu, EventKind::Xfer];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::R => "R",
            EventKind::W => "W",
            EventKind::CAnd3 => "C_AND3",
            EventKind::CAdd => "C_ADD",
            EventKind::Dpu => "DPU",
            EventKind::Xfer => "XFER",
        }
    }

    /// Event classes that occupy the memory arrays themselves.
    pub fn is_fabric(self) -> bool {
        matches!(self, EventKind::R | EventKind::W | EventKind::CAnd3 | EventKind::CAdd)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown event class `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Hashmap,
    Graph,
    Traverse,
    Io,
    #[default]
    Other,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Hashmap, Stage::Graph, Stage::Traverse, Stage::Io, Stage::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Hashmap => "hashmap",
            Stage::Graph => "graph",
            Stage::Traverse => "traverse",
            Stage::Io => "io",
            Stage::Other => "other",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage tag `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceEvent {
    pub kind: EventKind,
    /// Cycles for fabric/DPU kinds, bytes for `XFER`.
    pub count: u64,
    pub stage: Stage,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OpTrace {
    events: Vec<TraceEvent>,
}

impl OpTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, kind: EventKind, count: u64, stage: Stage) {
        if count == 0 {
            return;
        }
        if let Some(last) = self.events.last_mut() {
            if last.kind == kind && last.stage == stage {
                last.count += count;
                return;
            }
        }
        self.events.push(TraceEvent { kind, count, stage });
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn clear(&mut self) {
        self.events.clear();
    }

    pub fn take(&mut self) -> OpTrace {
        std::mem::take(self)
    }

    pub fn extend(&mut self, other: &OpTrace) {
        for e in &other.events {
            self.push(e.kind, e.count, e.stage);
        }
    }

    pub fn total(&self, kind: EventKind) -> u64 {
        self.events.iter().filter(|e| e.kind == kind).map(|e| e.count).sum()
    }

    pub fn total_in(&self, stage: Stage, kind: EventKind) -> u64 {
        self.events.iter().filter(|e| e.kind == kind && e.stage == stage).map(|e| e.count).sum()
    }

    /// One `stage,kind,count` line per event.
    pub fn to_lines(&self) -> String {
        let mut s = String::with_capacity(self.events.len() * 16);
        for e in &self.events {
            s.push_str(e.stage.as_str());
            s.push(',');
            s.push_str(e.kind.as_str());
            s.push(',');
            s.push_str(&e.count.to_string());
            s.push('\n');
        }
        s
    }

    pub fn parse_lines(text: &str) -> Result<OpTrace> {
        let mut t = OpTrace::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 3 {
                return Err(Error::Parse(format!("trace line {}: expected stage,kind,count", n + 1)));
            }
            let stage: Stage = parts[0].trim().parse()?;
            let kind: EventKind = parts[1].trim().parse()?;
            let count: u64 = parts[2]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("trace line {}: bad count", n + 1)))?;
            t.push(kind, count, stage);
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjacent_events_coalesce() {
        let mut t = OpTrace::new();
        t.push(EventKind::W, 1, Stage::Hashmap);
        t.push(EventKind::W, 2, Stage::Hashmap);
        t.push(EventKind::R, 1, Stage::Hashmap);
        t.push(EventKind::W, 1, Stage::Graph);
        assert_eq!(t.events().len(), 3);
        assert_eq!(t.total(EventKind::W), 4);
    }

    #[test]
    fn lines_round_trip() {
        let mut t = OpTrace::new();
        t.push(EventKind::CAdd, 8, Stage::Traverse);
        t.push(EventKind::Xfer, 64, Stage::Io);
        let back = OpTrace::parse_lines(&t.to_lines()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn unknown_kind_is_config_error() {
        let err = OpTrace::parse_lines("hashmap,FOO,1\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
