//! RSSI log ingestion.
//!
//! Log schema (UTF-8 CSV):
//!
//! ```text
//! timestamp,epc,rssi_dbm[,read_count]
//! 0.2,T1,-39.41
//! ```
//!
//! Timestamps are decimal seconds; the EPC is an opaque string matched
//! against the scene's tag ids. A missing read is simply an absent line.
//!
//! Readers report tags asynchronously, so reads are binned into fixed
//! windows anchored at `t = 0` to form synchronous frames.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::link_budget::MISSING_READ_THRESHOLD_DBM;
use crate::sim::RssFrame;

pub const LOG_HEADER: &str = "timestamp,epc,rssi_dbm";
pub const LOG_HEADER_WITH_COUNT: &str = "timestamp,epc,rssi_dbm,read_count";

/// Reads above this are rejected as implausible.
pub const MAX_PLAUSIBLE_RSSI_DBM: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RssRecord {
    pub timestamp: f64,
    pub tag_id: String,
    pub rssi_dbm: f64,
    pub read_count: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedLog {
    pub records: Vec<RssRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ParsedLog {
    pub fn error_count(&self) -> usize {
        self.diagnostics.len()
    }
}

fn parse_line(line: &str, with_count: bool) -> std::result::Result<RssRecord, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    let expected = if with_count { 4 } else { 3 };
    if fields.len() != expected && !(with_count && fields.len() == 3) {
        return Err(format!("expected {expected} fields, found {}", fields.len()));
    }
    let timestamp: f64 = fields[0]
        .parse()
        .map_err(|_| format!("bad timestamp {:?}", fields[0]))?;
    if !timestamp.is_finite() {
        return Err(format!("timestamp {:?} is not finite", fields[0]));
    }
    if fields[1].is_empty() {
        return Err("empty epc".into());
    }
    let rssi_dbm: f64 = fields[2]
        .parse()
        .map_err(|_| format!("bad rssi {:?}", fields[2]))?;
    if !rssi_dbm.is_finite() || rssi_dbm > MAX_PLAUSIBLE_RSSI_DBM {
        return Err(format!("implausible rssi {rssi_dbm} dBm"));
    }
    let read_count = match fields.get(3) {
        Some(s) if !s.is_empty() => Some(s.parse().map_err(|_| format!("bad read_count {s:?}"))?),
        _ => None,
    };
    Ok(RssRecord {
        timestamp,
        tag_id: fields[1].to_string(),
        rssi_dbm,
        read_count,
    })
}

/// Parses a whole log. Bad lines are reported with their 1-based line
/// number and skipped; a missing or wrong header is fatal.
pub fn parse_rssi_log<R: BufRead>(reader: R) -> Result<ParsedLog> {
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, Ok(l))) if l.trim().is_empty() => continue,
            Some((_, Ok(l))) => break l,
            Some((i, Err(e))) => return Err(Error::Format(format!("line {}: {e}", i + 1))),
            None => return Err(Error::Format("log is empty; expected header line".into())),
        }
    };
    let with_count = match header.trim().trim_start_matches('\u{feff}') {
        LOG_HEADER => false,
        LOG_HEADER_WITH_COUNT => true,
        other => {
            return Err(Error::Format(format!(
                "missing header: expected {LOG_HEADER:?}, found {other:?}"
            )))
        }
    };
    let mut out = ParsedLog::default();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line, with_count) {
            Ok(r) => out.records.push(r),
            Err(message) => out.diagnostics.push(Diagnostic { line: i + 1, message }),
        }
    }
    Ok(out)
}

/// Serializes frames in the log schema, one line per non-missing read.
/// Values use the shortest representation that parses back to the same bits.
pub fn write_rssi_log<W: Write>(frames: &[RssFrame], tag_ids: &[&str], mut out: W) -> Result<()> {
    let io = |e| Error::Format(format!("writing log: {e}"));
    writeln!(out, "{LOG_HEADER}").map_err(io)?;
    for f in frames {
        if f.len() != tag_ids.len() {
            return Err(Error::arg(format!(
                "frame at {} has {} links, scene has {}",
                f.timestamp,
                f.len(),
                tag_ids.len()
            )));
        }
        for (id, v) in tag_ids.iter().zip(&f.rss_dbm) {
            if let Some(v) = v {
                writeln!(out, "{},{id},{v}", f.timestamp).map_err(io)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FramePolicy {
    /// A silent link repeats its previous value.
    #[default]
    LastValueHold,
    /// Mean of the reads in the window; a silent link is missing.
    MeanInWindow,
}

impl std::str::FromStr for FramePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "last_value_hold" => Ok(Self::LastValueHold),
            "mean_in_window" => Ok(Self::MeanInWindow),
            other => Err(Error::arg(format!("unknown frame policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct AssembledFrames {
    pub frames: Vec<RssFrame>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Bins reads into windows `[k·w, (k+1)·w)` and emits one frame per window
/// from the first to the last occupied one. Frame `k` is stamped `k·w`.
/// Under last-value-hold the most recent read in the window wins.
pub fn assemble_frames(
    records: &[RssRecord],
    tag_ids: &[&str],
    window_s: f64,
    policy: FramePolicy,
) -> Result<AssembledFrames> {
    if !(window_s > 0.0) || !window_s.is_finite() {
        return Err(Error::arg(format!("window must be positive, got {window_s}")));
    }
    let index: HashMap<&str, usize> = tag_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut diagnostics = Vec::new();
    // window -> per link (sum, count, last)
    let mut bins: std::collections::BTreeMap<i64, Vec<(f64, u32, f64, f64)>> = Default::default();
    for (n, r) in records.iter().enumerate() {
        let Some(&link) = index.get(r.tag_id.as_str()) else {
            diagnostics.push(Diagnostic {
                line: n + 1,
                message: format!("unknown tag id {:?}", r.tag_id),
            });
            continue;
        };
        // tolerance keeps k·w stamps in window k despite round-off
        let k = (r.timestamp / window_s + 1e-6).floor() as i64;
        let slots = bins
            .entry(k)
            .or_insert_with(|| vec![(0.0, 0, f64::NEG_INFINITY, f64::NAN); tag_ids.len()]);
        let slot = &mut slots[link];
        slot.0 += r.rssi_dbm;
        slot.1 += 1;
        if r.timestamp >= slot.2 {
            slot.2 = r.timestamp;
            slot.3 = r.rssi_dbm;
        }
    }
    let (Some(&first), Some(&last)) = (bins.keys().next(), bins.keys().next_back()) else {
        return Ok(AssembledFrames {
            frames: Vec::new(),
            diagnostics,
        });
    };
    let mut held: Vec<Option<f64>> = vec![None; tag_ids.len()];
    let mut frames = Vec::with_capacity((last - first + 1) as usize);
    for k in first..=last {
        let rss_dbm = match bins.get(&k) {
            None => match policy {
                FramePolicy::LastValueHold => held.clone(),
                FramePolicy::MeanInWindow => vec![None; tag_ids.len()],
            },
            Some(slots) => slots
                .iter()
                .enumerate()
                .map(|(i, &(sum, count, _, latest))| {
                    let v = match (count, policy) {
                        (0, FramePolicy::LastValueHold) => held[i],
                        (0, FramePolicy::MeanInWindow) => None,
                        (_, FramePolicy::LastValueHold) => Some(latest),
                        (c, FramePolicy::MeanInWindow) => Some(sum / c as f64),
                    };
                    if count > 0 {
                        held[i] = v;
                    }
                    v
                })
                .collect(),
        };
        frames.push(RssFrame {
            timestamp: k as f64 * window_s,
            rss_dbm,
        });
    }
    Ok(AssembledFrames { frames, diagnostics })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    pub mean_dbm: Vec<f64>,
    pub std_db: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Baseline {
    /// A link with no baseline reads cannot be differenced.
    pub fn usable(&self, link: usize) -> bool {
        self.counts[link] > 0
    }

    pub fn unusable_links(&self) -> Vec<usize> {
        (0..self.counts.len()).filter(|&i| !self.usable(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Per-link mean and sample standard deviation over a quiet period.
pub fn compute_baseline(frames: &[RssFrame]) -> Result<Baseline> {
    let Some(first) = frames.first() else {
        return Err(Error::arg("baseline needs at least one frame"));
    };
    let q = first.len();
    if frames.iter().any(|f| f.len() != q) {
        return Err(Error::arg("baseline frames disagree on link count"));
    }
    let mut out = Baseline {
        mean_dbm: vec![f64::NAN; q],
        std_db: vec![f64::NAN; q],
        counts: vec![0; q],
    };
    for i in 0..q {
        let xs: Vec<f64> = frames.iter().filter_map(|f| f.rss_dbm[i]).collect();
        if xs.is_empty() {
            continue;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        out.mean_dbm[i] = mean;
        out.std_db[i] = var.sqrt();
        out.counts[i] = xs.len();
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Imputation {
    /// Substitute the sensitivity floor before differencing.
    #[default]
    Floor,
    /// Treat the link as unchanged.
    Zero,
    /// Remove the link from this frame's system.
    Drop,
}

impl std::str::FromStr for Imputation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "floor" => Ok(Self::Floor),
            "zero" => Ok(Self::Zero),
            "drop" => Ok(Self::Drop),
            other => Err(Error::arg(format!("unknown imputation {other:?}"))),
        }
    }
}

/// RSS change of the participating links, `current − baseline` in dB.
/// Links never read during the baseline cannot be differenced and are left
/// out whatever the imputation.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaY {
    /// Indices of the links that take part, ascending.
    pub links: Vec<usize>,
    pub values: Vec<f64>,
}

impl DeltaY {
    /// `baseline − current`: the sign the solver consumes, so that a
    /// shadowing target reconstructs as positive attenuation.
    pub fn solver_input(&self) -> Vec<f64> {
        self.values.iter().map(|v| -v).collect()
    }

    pub fn is_complete(&self, q: usize) -> bool {
        self.links.len() == q
    }
}

pub fn delta_rss(frame: &RssFrame, baseline: &Baseline, imputation: Imputation) -> Result<DeltaY> {
    delta_rss_at(frame, baseline, imputation, MISSING_READ_THRESHOLD_DBM)
}

pub fn delta_rss_at(
    frame: &RssFrame,
    baseline: &Baseline,
    imputation: Imputation,
    floor_dbm: f64,
) -> Result<DeltaY> {
    if frame.len() != baseline.len() {
        return Err(Error::arg(format!(
            "frame has {} links, baseline has {}",
            frame.len(),
            baseline.len()
        )));
    }
    let mut out = DeltaY {
        links: Vec::with_capacity(frame.len()),
        values: Vec::with_capacity(frame.len()),
    };
    for (i, rss) in frame.rss_dbm.iter().enumerate() {
        if !baseline.usable(i) {
            continue;
        }
        let base = baseline.mean_dbm[i];
        let v = match (rss, imputation) {
            (Some(v), _) => v - base,
            (None, Imputation::Floor) => floor_dbm - base,
            (None, Imputation::Zero) => 0.0,
            (None, Imputation::Drop) => continue,
        };
        out.links.push(i);
        out.values.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse(text: &str) -> Result<ParsedLog> {
        parse_rssi_log(Cursor::new(text))
    }

    #[test]
    fn parses_a_line() {
        let log = parse("timestamp,epc,rssi_dbm\n0.00,E200-1,-61.5\n").unwrap();
        assert_eq!(
            log.records,
            vec![RssRecord {
                timestamp: 0.0,
                tag_id: "E200-1".into(),
                rssi_dbm: -61.5,
                read_count: None
            }]
        );
    }

    #[test]
    fn header_only_is_empty() {
        let log = parse("timestamp,epc,rssi_dbm\n").unwrap();
        assert!(log.records.is_empty());
        assert_eq!(log.error_count(), 0);
    }

    #[test]
    fn missing_header_is_fatal() {
        assert!(matches!(parse("0.0,E1,-60\n"), Err(Error::Format(_))));
        assert!(matches!(parse(""), Err(Error::Format(_))));
    }

    #[test]
    fn bad_lines_are_reported() {
        let log = parse("timestamp,epc,rssi_dbm,read_count\n0.1,A,+20\n0.2,A,-60,3\nx,A,-60\n0.3,A\n0.4,B,-70,\n").unwrap();
        assert_eq!(log.records.len(), 2);
        assert_eq!(log.records[0].read_count, Some(3));
        assert_eq!(log.records[1].read_count, None);
        let lines: Vec<usize> = log.diagnostics.iter().map(|d| d.line).collect();
        assert_eq!(lines, vec![2, 4, 5]);
        assert!(log.diagnostics[0].message.contains("implausible"));
    }

    fn rec(t: f64, id: &str, v: f64) -> RssRecord {
        RssRecord {
            timestamp: t,
            tag_id: id.into(),
            rssi_dbm: v,
            read_count: None,
        }
    }

    #[test]
    fn one_read_per_window() {
        let recs = vec![rec(0.0, "a", -60.0), rec(0.05, "b", -61.0), rec(0.2, "a", -62.0), rec(0.25, "b", -63.0)];
        for policy in [FramePolicy::LastValueHold, FramePolicy::MeanInWindow] {
            let out = assemble_frames(&recs, &["a", "b"], 0.2, policy).unwrap();
            assert_eq!(out.frames.len(), 2);
            assert_eq!(out.frames[0].rss_dbm, vec![Some(-60.0), Some(-61.0)]);
            assert_eq!(out.frames[1].rss_dbm, vec![Some(-62.0), Some(-63.0)]);
        }
    }

    #[test]
    fn silent_tag_policies() {
        let recs = vec![rec(0.0, "a", -60.0), rec(0.0, "b", -61.0), rec(0.2, "a", -62.0)];
        let hold = assemble_frames(&recs, &["a", "b"], 0.2, FramePolicy::LastValueHold).unwrap();
        assert_eq!(hold.frames[1].rss_dbm, vec![Some(-62.0), Some(-61.0)]);
        let mean = assemble_frames(&recs, &["a", "b"], 0.2, FramePolicy::MeanInWindow).unwrap();
        assert_eq!(mean.frames[1].rss_dbm, vec![Some(-62.0), None]);
    }

    #[test]
    fn mean_in_window() {
        let recs = vec![rec(0.01, "a", -60.0), rec(0.11, "a", -62.0)];
        let out = assemble_frames(&recs, &["a"], 0.2, FramePolicy::MeanInWindow).unwrap();
        assert_eq!(out.frames[0].rss_dbm, vec![Some(-61.0)]);
        let out = assemble_frames(&recs, &["a"], 0.2, FramePolicy::LastValueHold).unwrap();
        assert_eq!(out.frames[0].rss_dbm, vec![Some(-62.0)]);
    }

    #[test]
    fn empty_windows_are_filled() {
        let recs = vec![rec(0.0, "a", -60.0), rec(0.6, "a", -62.0)];
        let out = assemble_frames(&recs, &["a"], 0.2, FramePolicy::LastValueHold).unwrap();
        assert_eq!(out.frames.len(), 4);
        assert_eq!(out.frames[2].rss_dbm, vec![Some(-60.0)]);
        let out = assemble_frames(&recs, &["a"], 0.2, FramePolicy::MeanInWindow).unwrap();
        assert_eq!(out.frames[1].rss_dbm, vec![None]);
    }

    #[test]
    fn unknown_tags_are_diagnosed() {
        let recs = vec![rec(0.0, "a", -60.0), rec(0.0, "zz", -61.0)];
        let out = assemble_frames(&recs, &["a"], 0.2, FramePolicy::LastValueHold).unwrap();
        assert_eq!(out.frames.len(), 1);
        assert_eq!(out.diagnostics.len(), 1);
        assert!(assemble_frames(&recs, &["a"], 0.0, FramePolicy::LastValueHold).is_err());
    }

    fn frame(v: Vec<Option<f64>>) -> RssFrame {
        RssFrame { timestamp: 0.0, rss_dbm: v }
    }

    #[test]
    fn baselines() {
        let frames: Vec<_> = (0..10).map(|_| frame(vec![Some(-60.0), None])).collect();
        let b = compute_baseline(&frames).unwrap();
        assert_eq!(b.mean_dbm[0], -60.0);
        assert_eq!(b.std_db[0], 0.0);
        assert!(!b.usable(1));
        assert_eq!(b.unusable_links(), vec![1]);
        let b = compute_baseline(&[frame(vec![Some(-60.0)]), frame(vec![Some(-62.0)])]).unwrap();
        assert_eq!(b.mean_dbm[0], -61.0);
        assert!(compute_baseline(&[]).is_err());
    }

    #[test]
    fn deltas() {
        let base = compute_baseline(&[frame(vec![Some(-60.0), Some(-80.0)])]).unwrap();
        let same = delta_rss(&frame(vec![Some(-60.0), Some(-80.0)]), &base, Imputation::Floor).unwrap();
        assert_eq!(same.values, vec![0.0, 0.0]);
        let d = delta_rss(&frame(vec![Some(-70.0), None]), &base, Imputation::Floor).unwrap();
        assert_eq!(d.values, vec![-10.0, -4.0]);
        assert_eq!(d.solver_input(), vec![10.0, 4.0]);
        let d = delta_rss(&frame(vec![Some(-70.0), None]), &base, Imputation::Zero).unwrap();
        assert_eq!(d.values, vec![-10.0, 0.0]);
        let d = delta_rss(&frame(vec![Some(-70.0), None]), &base, Imputation::Drop).unwrap();
        assert_eq!((d.links, d.values), (vec![0], vec![-10.0]));
    }

    #[test]
    fn unusable_link_is_left_out() {
        let base = compute_baseline(&[frame(vec![Some(-60.0), None])]).unwrap();
        let f = frame(vec![Some(-61.0), Some(-70.0)]);
        for imp in [Imputation::Floor, Imputation::Zero, Imputation::Drop] {
            assert_eq!(delta_rss(&f, &base, imp).unwrap().links, vec![0]);
        }
    }

    #[test]
    fn policy_names() {
        assert_eq!("mean_in_window".parse::<FramePolicy>().unwrap(), FramePolicy::MeanInWindow);
        assert_eq!("drop".parse::<Imputation>().unwrap(), Imputation::Drop);
        assert!("nope".parse::<Imputation>().is_err());
    }
}
