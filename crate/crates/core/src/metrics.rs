//! Confusion counting against ground truth, sensitivity and specificity,
//! throughput, and the per-object event records behind the run log.
//!
//! The positive class is *Defective*: a true positive is a defective object
//! that the station rejected.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::camera::{Outcome, ToolResult};
use crate::scenarios::{CaseKind, Truth};
use crate::{CoreError, CoreResult};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub vp: u64,
    pub fp: u64,
    pub vn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.vp + self.fp + self.vn + self.fn_
    }

    pub fn record(&mut self, verdict: Outcome, truth: Truth) {
        *self = record(*self, verdict, truth);
    }
}

/// Adds one classified object to the counts.
pub fn record(mut counts: ConfusionCounts, verdict: Outcome, truth: Truth) -> ConfusionCounts {
    match (verdict, truth) {
        (Outcome::Fail, Truth::Defective) => counts.vp += 1,
        (Outcome::Fail, Truth::Good) => counts.fp += 1,
        (Outcome::Pass, Truth::Good) => counts.vn += 1,
        (Outcome::Pass, Truth::Defective) => counts.fn_ += 1,
    }
    counts
}

/// A percentage held exactly in hundredths (two decimals).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Percent {
    hundredths: u32,
}

impl Percent {
    /// `100·num/den` rounded half-up to two decimals. `den` must be nonzero.
    pub fn from_ratio(num: u64, den: u64) -> Self {
        debug_assert!(den > 0 && num <= den);
        let (num, den) = (u128::from(num), u128::from(den));
        let hundredths = (20_000 * num + den) / (2 * den);
        Self {
            hundredths: hundredths as u32,
        }
    }

    pub fn from_hundredths(hundredths: u32) -> Self {
        Self { hundredths }
    }

    pub fn hundredths(&self) -> u32 {
        self.hundredths
    }

    pub fn as_f64(&self) -> f64 {
        f64::from(self.hundredths) / 100.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.hundredths / 100, self.hundredths % 100)
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Percent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        if !(0.0..=100.0).contains(&v) {
            return Err(serde::de::Error::custom("percentage outside [0, 100]"));
        }
        Ok(Percent {
            hundredths: libm::round(v * 100.0) as u32,
        })
    }
}

/// `VP/(VP + FN)·100`; `None` when no defective object has been seen.
pub fn sensitivity(c: &ConfusionCounts) -> Option<Percent> {
    let den = c.vp + c.fn_;
    (den > 0).then(|| Percent::from_ratio(c.vp, den))
}

/// `VN/(VN + FP)·100`; `None` when no good object has been seen.
pub fn specificity(c: &ConfusionCounts) -> Option<Percent> {
    let den = c.vn + c.fp;
    (den > 0).then(|| Percent::from_ratio(c.vn, den))
}

/// Objects per minute.
pub fn throughput(inspected: u64, elapsed_s: f64) -> CoreResult<f64> {
    if !(elapsed_s > 0.0) {
        return Err(CoreError::ZeroElapsed);
    }
    Ok(60.0 * inspected as f64 / elapsed_s)
}

/// One inspected object, as written to the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectionEvent {
    /// Verdict time, ms.
    pub t_ms: f64,
    pub object_id: u64,
    pub case: CaseKind,
    pub truth: Truth,
    pub verdict: Outcome,
    pub tools: Vec<ToolResult>,
    /// Trigger to verdict, ms.
    pub latency_ms: f64,
    pub edge_ms: f64,
    pub trigger_ms: f64,
    pub capture_ms: f64,
}

/// Trailer written when a run ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEnd {
    pub event: RunEndTag,
    pub t_ms: f64,
    pub elapsed_s: f64,
    pub missed_triggers: u64,
    pub uninspected: u64,
    /// Whether the run was stopped by an operator rather than its limit.
    #[serde(default)]
    pub stopped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunEndTag {
    RunEnd,
}

/// A line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogRecord {
    End(RunEnd),
    Inspection(InspectionEvent),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub inspected: u64,
    pub elapsed_s: f64,
    pub sensitivity_pct: Option<Percent>,
    pub specificity_pct: Option<Percent>,
    /// Objects per minute.
    pub throughput: f64,
    pub missed_triggers: u64,
    pub uninspected: u64,
    pub counts: ConfusionCounts,
}

impl RunSummary {
    pub fn from_counts(counts: ConfusionCounts, elapsed_s: f64, missed_triggers: u64, uninspected: u64) -> Self {
        let inspected = counts.total();
        Self {
            inspected,
            elapsed_s,
            sensitivity_pct: sensitivity(&counts),
            specificity_pct: specificity(&counts),
            throughput: throughput(inspected, elapsed_s).unwrap_or(0.0),
            missed_triggers,
            uninspected,
            counts,
        }
    }

    /// One CSV row in the column order
    /// `case,inspected,elapsed,fp,fn,sensitivity,specificity`.
    pub fn csv_row(&self, case: CaseKind) -> String {
        let pct = |p: Option<Percent>| p.map(|p| alloc::format!("{p}")).unwrap_or_default();
        let secs = libm::round(self.elapsed_s) as u64;
        alloc::format!(
            "{},{},{}'{:02}\",{},{},{},{}",
            case.as_str(),
            self.inspected,
            secs / 60,
            secs % 60,
            self.counts.fp,
            self.counts.fn_,
            pct(self.sensitivity_pct),
            pct(self.specificity_pct)
        )
    }
}

pub const CSV_HEADER: &str = "case,inspected,elapsed,fp,fn,sensitivity,specificity";

/// Summary of a sequence of log records. A log may hold several runs,
/// each closed by a run-end trailer; the last run is summarised. Without a
/// trailer the elapsed time is that of the last verdict.
pub fn summarize<'a>(records: impl IntoIterator<Item = &'a LogRecord>) -> RunSummary {
    summarize_runs(records)
        .pop()
        .unwrap_or_else(|| RunSummary::from_counts(ConfusionCounts::default(), 0.0, 0, 0))
}

/// One summary per run in the log, in order.
pub fn summarize_runs<'a>(records: impl IntoIterator<Item = &'a LogRecord>) -> Vec<RunSummary> {
    let mut runs = Vec::new();
    let mut counts = ConfusionCounts::default();
    let mut last_t = 0.0f64;
    let mut open = false;
    for r in records {
        match r {
            LogRecord::Inspection(ev) => {
                counts.record(ev.verdict, ev.truth);
                last_t = last_t.max(ev.t_ms);
                open = true;
            }
            LogRecord::End(e) => {
                runs.push(RunSummary::from_counts(counts, e.elapsed_s, e.missed_triggers, e.uninspected));
                counts = ConfusionCounts::default();
                last_t = 0.0;
                open = false;
            }
        }
    }
    if open {
        runs.push(RunSummary::from_counts(counts, last_t / 1000.0, 0, 0));
    }
    runs
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn counts(vp: u64, fp: u64, vn: u64, fn_: u64) -> ConfusionCounts {
        ConfusionCounts { vp, fp, vn, fn_ }
    }

    #[test]
    fn record_definitions() {
        let c = record(ConfusionCounts::default(), Outcome::Fail, Truth::Defective);
        assert_eq!(c.vp, 1);
        let c = record(c, Outcome::Pass, Truth::Defective);
        assert_eq!(c.fn_, 1);
        let c = record(c, Outcome::Fail, Truth::Good);
        let c = record(c, Outcome::Pass, Truth::Good);
        assert_eq!(c, counts(1, 1, 1, 1));
    }

    #[test]
    fn sensitivity_examples() {
        assert_eq!(sensitivity(&counts(5, 0, 0, 0)).unwrap().to_string(), "100.00");
        assert_eq!(sensitivity(&counts(2499, 0, 0, 1)).unwrap().to_string(), "99.96");
        assert_eq!(sensitivity(&counts(0, 3, 3, 0)), None);
    }

    #[test]
    fn specificity_examples() {
        assert_eq!(specificity(&counts(0, 0, 7, 0)).unwrap().to_string(), "100.00");
        assert_eq!(specificity(&counts(0, 2, 1537, 0)).unwrap().to_string(), "99.87");
        assert_eq!(specificity(&counts(0, 5, 0, 0)).unwrap().to_string(), "0.00");
        assert_eq!(specificity(&counts(1, 0, 0, 1)), None);
    }

    #[test]
    fn throughput_examples() {
        let a = throughput(3268, 1422.0).unwrap();
        assert!((a - 137.89).abs() < 0.01, "{a}");
        assert_eq!(throughput(0, 10.0).unwrap(), 0.0);
        assert_eq!(throughput(390, 60.0).unwrap(), 390.0);
        assert_eq!(throughput(5, 0.0), Err(CoreError::ZeroElapsed));
    }

    #[test]
    fn half_up_rounding() {
        // 1/8 = 12.5% exactly; 1/3 rounds down; 2/3 rounds up.
        assert_eq!(Percent::from_ratio(1, 8).hundredths(), 1250);
        assert_eq!(Percent::from_ratio(1, 3).hundredths(), 3333);
        assert_eq!(Percent::from_ratio(2, 3).hundredths(), 6667);
        // 1/80000 = 0.00125% → 0.00; 1/16 = 6.25%.
        assert_eq!(Percent::from_ratio(1, 16).hundredths(), 625);
    }

    #[test]
    fn empty_summary_is_undefined() {
        let s = summarize(&[]);
        assert_eq!(s.inspected, 0);
        assert_eq!(s.sensitivity_pct, None);
        assert_eq!(s.specificity_pct, None);
    }

    fn event(id: u64, truth: Truth, verdict: Outcome) -> LogRecord {
        LogRecord::Inspection(InspectionEvent {
            t_ms: 100.0 * id as f64,
            object_id: id,
            case: CaseKind::A,
            truth,
            verdict,
            tools: vec![],
            latency_ms: 10.0,
            edge_ms: 0.0,
            trigger_ms: 0.0,
            capture_ms: 0.0,
        })
    }

    #[test]
    fn summary_aggregates_records() {
        let log = vec![
            event(1, Truth::Defective, Outcome::Fail),
            event(2, Truth::Defective, Outcome::Pass),
            event(3, Truth::Good, Outcome::Pass),
        ];
        let s = summarize(&log);
        assert_eq!(s.counts, counts(1, 0, 1, 1));
        assert_eq!(s.inspected, 3);
        assert_eq!(s.sensitivity_pct.unwrap().to_string(), "50.00");
    }

    #[test]
    fn runs_are_split_at_trailers() {
        let end = |elapsed_s: f64| {
            LogRecord::End(RunEnd {
                event: RunEndTag::RunEnd,
                t_ms: elapsed_s * 1000.0,
                elapsed_s,
                missed_triggers: 0,
                uninspected: 1,
                stopped: false,
            })
        };
        let log = vec![
            event(1, Truth::Good, Outcome::Pass),
            end(2.0),
            event(2, Truth::Good, Outcome::Fail),
            event(3, Truth::Good, Outcome::Pass),
            end(5.0),
        ];
        let runs = summarize_runs(&log);
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[0].inspected, 1);
        assert_eq!(summarize(&log), runs[1]);
        assert_eq!(runs[1].specificity_pct.unwrap().to_string(), "50.00");
        assert_eq!(runs[1].elapsed_s, 5.0);
        assert_eq!(runs[1].uninspected, 1);
    }

    #[test]
    fn csv_row_layout() {
        let s = RunSummary::from_counts(counts(2499, 0, 768, 1), 1422.0, 0, 0);
        assert_eq!(s.csv_row(CaseKind::A), "A,3268,23'42\",0,1,99.96,100.00");
    }

    #[test]
    fn percent_json_round_trip() {
        let p = Percent::from_hundredths(9996);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "99.96");
        assert_eq!(serde_json::from_str::<Percent>(&s).unwrap(), p);
    }
}
