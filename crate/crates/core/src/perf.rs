// SPDX-License-Identifier: Apache-2.0

//! Trace-driven latency, energy and power model.
//!
//! Every event class has a fixed latency and dynamic energy. A trace prices
//! serially; the parallelism degree `pd` scales latency with an Amdahl
//! factor `(1 - p) + p / pd`, and leakage power grows by one group term per
//! replicated sub-array set.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{EventKind, OpTrace, Stage};

pub const SCHEMA_VERSION: u32 = 1;

/// Flat cost table. Latencies in ns, energies in nJ, leakage in mW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostConfig {
    pub r_latency_ns: f64,
    pub r_energy_nj: f64,
    pub w_latency_ns: f64,
    pub w_energy_nj: f64,
    pub c_and3_latency_ns: f64,
    pub c_and3_energy_nj: f64,
    pub c_add_latency_ns: f64,
    pub c_add_energy_nj: f64,
    pub dpu_latency_ns: f64,
    pub dpu_energy_nj: f64,
    pub xfer_latency_ns_per_byte: f64,
    pub xfer_energy_nj_per_byte: f64,
    pub leakage_base_mw: f64,
    pub leakage_per_group_mw: f64,
    pub parallel_fraction: f64,
    /// Relative surcharge on total time and energy; 0.25 adds 25%.
    pub total_penalty: f64,
    pub area_mm2: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            r_latency_ns: 3.91,
            r_energy_nj: 0.78,
            w_latency_ns: 4.59,
            w_energy_nj: 0.69,
            c_and3_latency_ns: 3.91,
            c_and3_energy_nj: 0.85,
            c_add_latency_ns: 3.91,
            c_add_energy_nj: 1.93,
            dpu_latency_ns: 0.05,
            dpu_energy_nj: 0.01,
            // 1 ns and 0.1 nJ per 64-byte burst.
            xfer_latency_ns_per_byte: 1.0 / 64.0,
            xfer_energy_nj_per_byte: 0.1 / 64.0,
            leakage_base_mw: 586.0,
            leakage_per_group_mw: 0.0,
            parallel_fraction: 0.0,
            total_penalty: 0.0,
            area_mm2: 9.3,
        }
    }
}

impl CostConfig {
    /// Latency and energy of one unit (cycle or byte) of `kind`.
    pub fn unit(&self, kind: EventKind) -> (f64, f64) {
        match kind {
            EventKind::R => (self.r_latency_ns, self.r_energy_nj),
            EventKind::W => (self.w_latency_ns, self.w_energy_nj),
            EventKind::CAnd3 => (self.c_and3_latency_ns, self.c_and3_energy_nj),
            EventKind::CAdd => (self.c_add_latency_ns, self.c_add_energy_nj),
            EventKind::Dpu => (self.dpu_latency_ns, self.dpu_energy_nj),
            EventKind::Xfer => (self.xfer_latency_ns_per_byte, self.xfer_energy_nj_per_byte),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("r_latency_ns", self.r_latency_ns),
            ("r_energy_nj", self.r_energy_nj),
            ("w_latency_ns", self.w_latency_ns),
            ("w_energy_nj", self.w_energy_nj),
            ("c_and3_latency_ns", self.c_and3_latency_ns),
            ("c_and3_energy_nj", self.c_and3_energy_nj),
            ("c_add_latency_ns", self.c_add_latency_ns),
            ("c_add_energy_nj", self.c_add_energy_nj),
            ("dpu_latency_ns", self.dpu_latency_ns),
            ("dpu_energy_nj", self.dpu_energy_nj),
            ("xfer_latency_ns_per_byte", self.xfer_latency_ns_per_byte),
            ("xfer_energy_nj_per_byte", self.xfer_energy_nj_per_byte),
            ("leakage_base_mw", self.leakage_base_mw),
            ("leakage_per_group_mw", self.leakage_per_group_mw),
            ("total_penalty", self.total_penalty),
            ("area_mm2", self.area_mm2),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be a nonnegative number, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.parallel_fraction) {
            return Err(Error::Config(format!("parallel_fraction {} outside [0, 1]", self.parallel_fraction)));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: CostConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("cost config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read cost config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Leakage in mW with `pd` active groups.
    pub fn leakage_mw(&self, pd: u32) -> f64 {
        self.leakage_base_mw + self.leakage_per_group_mw * pd as f64
    }

    pub fn amdahl(&self, pd: u32) -> f64 {
        (1.0 - self.parallel_fraction) + self.parallel_fraction / pd as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRow {
    pub stage: Stage,
    /// Cycles per event class (bytes for `XFER`).
    pub cycles: BTreeMap<EventKind, u64>,
    pub latency_ns: f64,
    pub dynamic_energy_nj: f64,
    pub energy_nj: f64,
    pub avg_power_w: f64,
    /// Share of total latency.
    pub fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Totals {
    pub latency_ns: f64,
    pub dynamic_energy_nj: f64,
    pub leakage_energy_nj: f64,
    pub energy_nj: f64,
    pub avg_power_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub schema_version: u32,
    pub pd: u32,
    pub stages: Vec<StageRow>,
    pub totals: Totals,
    /// Totals with the configured penalty; absent when the penalty is 0.
    pub penalized: Option<Totals>,
    /// Memory-bottleneck ratio: transfer time over total time.
    pub mbr: f64,
    /// Resource-utilization ratio: time the arrays are busy over total time.
    pub rur: f64,
    pub area_mm2: f64,
}

impl StageReport {
    /// Totals after the penalty, if one is configured.
    pub fn headline(&self) -> Totals {
        self.penalized.unwrap_or(self.totals)
    }

    pub fn stage(&self, s: Stage) -> Option<&StageRow> {
        self.stages.iter().find(|r| r.stage == s)
    }

    pub fn stage_fraction(&self, s: Stage) -> f64 {
        self.stage(s).map_or(0.0, |r| r.fraction)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn power(energy_nj: f64, latency_ns: f64) -> f64 {
    if latency_ns > 0.0 {
        energy_nj / latency_ns
    } else {
        0.0
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        0.0
    }
}

/// Prices `trace` at parallelism degree 1.
pub fn account(trace: &OpTrace, cfg: &CostConfig) -> Result<StageReport> {
    account_pd(trace, cfg, 1)
}

pub fn account_pd(trace: &OpTrace, cfg: &CostConfig, pd: u32) -> Result<StageReport> {
    cfg.validate()?;
    if pd == 0 {
        return Err(Error::Config("parallelism degree must be at least 1".into()));
    }
    let mut cycles: BTreeMap<Stage, BTreeMap<EventKind, u64>> = BTreeMap::new();
    for e in trace.events() {
        *cycles.entry(e.stage).or_default().entry(e.kind).or_default() += e.count;
    }
    let scale = cfg.amdahl(pd);
    let leak = cfg.leakage_mw(pd);
    let mut stages = Vec::new();
    let mut totals = Totals::default();
    let (mut xfer_ns, mut fabric_ns) = (0.0, 0.0);
    for s in Stage::ALL {
        let Some(c) = cycles.remove(&s) else { continue };
        let (mut lat, mut dyn_e) = (0.0, 0.0);
        for (&kind, &n) in &c {
            let (l, e) = cfg.unit(kind);
            let t = n as f64 * l * scale;
            lat += t;
            dyn_e += n as f64 * e;
            if kind == EventKind::Xfer {
                xfer_ns += t;
            } else if kind.is_fabric() {
                fabric_ns += t;
            }
        }
        let leak_e = leak * lat / 1000.0;
        totals.latency_ns += lat;
        totals.dynamic_energy_nj += dyn_e;
        totals.leakage_energy_nj += leak_e;
        stages.push(StageRow {
            stage: s,
            cycles: c,
            latency_ns: lat,
            dynamic_energy_nj: dyn_e,
            energy_nj: dyn_e + leak_e,
            avg_power_w: power(dyn_e + leak_e, lat),
            fraction: 0.0,
        });
    }
    for r in &mut stages {
        r.fraction = ratio(r.latency_ns, totals.latency_ns);
    }
    totals.energy_nj = totals.dynamic_energy_nj + totals.leakage_energy_nj;
    totals.avg_power_w = power(totals.energy_nj, totals.latency_ns);
    let penalized = (cfg.total_penalty > 0.0).then(|| {
        let f = 1.0 + cfg.total_penalty;
        Totals {
            latency_ns: totals.latency_ns * f,
            dynamic_energy_nj: totals.dynamic_energy_nj * f,
            leakage_energy_nj: totals.leakage_energy_nj * f,
            energy_nj: totals.energy_nj * f,
            avg_power_w: totals.avg_power_w,
        }
    });
    Ok(StageReport {
        schema_version: SCHEMA_VERSION,
        pd,
        stages,
        totals,
        penalized,
        mbr: ratio(xfer_ns, totals.latency_ns),
        rur: ratio(fabric_ns, totals.latency_ns),
        area_mm2: cfg.area_mm2,
    })
}

/// Transfer and array-busy shares of total time.
pub fn memory_wall_metrics(trace: &OpTrace, cfg: &CostConfig) -> Result<(f64, f64)> {
    let r = account(trace, cfg)?;
    Ok((r.mbr, r.rur))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub pd: u32,
    pub runtime_ns: f64,
    pub avg_power_w: f64,
    pub energy_nj: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn get(&self, pd: u32) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.pd == pd)
    }
}

pub fn sweep_pd(trace: &OpTrace, cfg: &CostConfig, pd_list: &[u32]) -> Result<SweepResult> {
    if pd_list.is_empty() {
        return Err(Error::Config("empty parallelism-degree list".into()));
    }
    let points = pd_list
        .iter()
        .map(|&pd| {
            let t = account_pd(trace, cfg, pd)?.headline();
            Ok(SweepPoint { pd, runtime_ns: t.latency_ns, avg_power_w: t.avg_power_w, energy_nj: t.energy_nj })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { points })
}

/// Speed-up and power growth targets between `pd = 1` and `pd = pd_hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTarget {
    pub pd_hi: u32,
    pub speedup: f64,
    pub power_ratio: f64,
}

impl Default for CalibrationTarget {
    fn default() -> Self {
        CalibrationTarget { pd_hi: 8, speedup: 3.0, power_ratio: 7.0 }
    }
}

/// Solves for the parallel fraction and per-group leakage that hit `target`
/// on `trace`, keeping every other field of `base`.
pub fn calibrate(trace: &OpTrace, base: &CostConfig, target: CalibrationTarget) -> Result<CostConfig> {
    let CalibrationTarget { pd_hi, speedup: s, power_ratio: rho } = target;
    let hi = pd_hi as f64;
    if pd_hi < 2 || !(1.0..=hi).contains(&s) || rho < 1.0 || rho >= hi {
        return Err(Error::Config(format!(
            "unreachable calibration target: speed-up {s} and power ratio {rho} at pd {pd_hi}"
        )));
    }
    let pf = (1.0 - 1.0 / s) / (1.0 - 1.0 / hi);
    let serial = account(trace, &CostConfig { parallel_fraction: 0.0, leakage_per_group_mw: 0.0, total_penalty: 0.0, ..*base })?;
    if serial.totals.latency_ns <= 0.0 {
        return Err(Error::Config("cannot calibrate on an empty trace".into()));
    }
    // Dynamic power at pd = 1 in mW.
    let d = serial.totals.dynamic_energy_nj / serial.totals.latency_ns * 1000.0;
    let lb = base.leakage_base_mw;
    let lg = (d * (rho - s) + lb * (rho - 1.0)) / (hi - rho);
    let cfg = CostConfig { parallel_fraction: pf, leakage_per_group_mw: lg, ..*base };
    cfg.validate()?;
    Ok(cfg)
}

/// Stage-breakdown comparison across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub pd: u32,
    pub runtime_ns: f64,
    pub energy_nj: f64,
    pub avg_power_w: f64,
    pub mbr: f64,
    pub rur: f64,
    /// Percent of runtime per stage, in `Stage::ALL` order.
    pub stage_pct: BTreeMap<Stage, f64>,
}

pub fn comparison_table(labels: &[String], reports: &[StageReport]) -> Result<ComparisonTable> {
    if labels.len() != reports.len() {
        return Err(Error::Config(format!("{} labels for {} reports", labels.len(), reports.len())));
    }
    let rows = labels
        .iter()
        .zip(reports)
        .map(|(label, r)| {
            let t = r.headline();
            ComparisonRow {
                label: label.clone(),
                pd: r.pd,
                runtime_ns: t.latency_ns,
                energy_nj: t.energy_nj,
                avg_power_w: t.avg_power_w,
                mbr: r.mbr,
                rur: r.rur,
                stage_pct: Stage::ALL.iter().map(|&s| (s, 100.0 * r.stage_fraction(s))).collect(),
            }
        })
        .collect();
    Ok(ComparisonTable { rows })
}

impl ComparisonTable {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("label,pd,runtime_ns,energy_nj,avg_power_w,mbr,rur");
        for st in Stage::ALL {
            let _ = write!(s, ",{st}_pct");
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(
                s,
                "{},{},{},{},{},{},{}",
                r.label, r.pd, r.runtime_ns, r.energy_nj, r.avg_power_w, r.mbr, r.rur
            );
            for st in Stage::ALL {
                let _ = write!(s, ",{}", r.stage_pct.get(&st).copied().unwrap_or(0.0));
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_leak() -> CostConfig {
        CostConfig { leakage_base_mw: 0.0, ..CostConfig::default() }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * b.abs().max(1.0)
    }

    #[test]
    fn thousand_adds() {
        let mut t = OpTrace::new();
        t.push(EventKind::CAdd, 1000, Stage::Hashmap);
        let r = account(&t, &zero_leak()).unwrap();
        assert!(close(r.totals.dynamic_energy_nj, 1930.0));
        assert!(close(r.totals.latency_ns, 3910.0));
        assert_eq!(r.mbr, 0.0);
        assert!(close(r.rur, 1.0));
    }

    #[test]
    fn one_read_and_empty_trace() {
        let mut t = OpTrace::new();
        t.push(EventKind::R, 1, Stage::Other);
        let r = account(&t, &zero_leak()).unwrap();
        assert!(close(r.totals.energy_nj, 0.78));
        assert!(close(r.totals.latency_ns, 3.91));
        let e = account(&OpTrace::new(), &CostConfig::default()).unwrap();
        assert!(e.stages.is_empty());
        assert_eq!(e.totals, Totals::default());
    }

    #[test]
    fn all_transfer_trace() {
        let mut t = OpTrace::new();
        t.push(EventKind::Xfer, 640, Stage::Io);
        let (mbr, rur) = memory_wall_metrics(&t, &CostConfig::default()).unwrap();
        assert_eq!((mbr, rur), (1.0, 0.0));
    }

    #[test]
    fn config_rejects_unknown_and_negative() {
        assert!(matches!(CostConfig::from_json(r#"{"bogus": 1}"#), Err(Error::Config(_))));
        assert!(matches!(CostConfig::from_json(r#"{"w_energy_nj": -1}"#), Err(Error::Config(_))));
        assert!(matches!(CostConfig::from_json(r#"{"parallel_fraction": 1.5}"#), Err(Error::Config(_))));
        let c = CostConfig::from_json(r#"{"leakage_base_mw": 10}"#).unwrap();
        assert_eq!(c.r_energy_nj, 0.78);
        assert_eq!(CostConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn penalty_touches_totals_only() {
        let mut t = OpTrace::new();
        t.push(EventKind::W, 10, Stage::Graph);
        let r = account(&t, &CostConfig { total_penalty: 0.25, ..CostConfig::default() }).unwrap();
        let p = r.penalized.unwrap();
        assert!(close(p.latency_ns, 1.25 * r.totals.latency_ns));
        assert!(close(r.stages[0].latency_ns, r.totals.latency_ns));
    }

    #[test]
    fn calibration_hits_targets() {
        let mut t = OpTrace::new();
        t.push(EventKind::W, 5000, Stage::Hashmap);
        t.push(EventKind::CAdd, 3000, Stage::Hashmap);
        t.push(EventKind::Xfer, 64, Stage::Io);
        let cfg = calibrate(&t, &CostConfig::default(), CalibrationTarget::default()).unwrap();
        let s = sweep_pd(&t, &cfg, &[1, 8]).unwrap();
        let (a, b) = (s.points[0], s.points[1]);
        assert!(close(a.runtime_ns / b.runtime_ns, 3.0));
        assert!(close(b.avg_power_w / a.avg_power_w, 7.0));
        assert!((cfg.parallel_fraction - 0.762).abs() < 1e-3);
        assert!(calibrate(&t, &cfg, CalibrationTarget { power_ratio: 8.0, ..Default::default() }).is_err());
    }

    #[test]
    fn table_rows_and_percentages() {
        let mut t = OpTrace::new();
        t.push(EventKind::W, 7, Stage::Hashmap);
        t.push(EventKind::R, 3, Stage::Traverse);
        let r = account(&t, &CostConfig::default()).unwrap();
        let tab = comparison_table(&["a".into()], &[r]).unwrap();
        assert_eq!(tab.rows.len(), 1);
        let sum: f64 = tab.rows[0].stage_pct.values().sum();
        assert!(close(sum, 100.0));
        assert_eq!(tab.to_csv().lines().count(), 2);
        assert!(comparison_table(&[], &[account(&t, &CostConfig::default()).unwrap()]).is_err());
    }
}
