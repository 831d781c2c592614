//! Monitoring-trace ingestion: CSV parsing, min-max scaling, sliding-window
//! dataset construction and synthetic trace generation.

pub mod features;
pub mod synth;

pub use features::{day_of_week, part_of_day, GlobalFeatures, NodeSlot, DEFAULT_FLEET_CAPACITY};
pub use synth::{synthesize_trace, DiurnalComponent, SynthProfile};

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The resource metrics tracked per node, in canonical column order.
pub const METRIC_NAMES: [&str; 5] = ["cpu", "ram", "disk", "net_sent", "net_recv"];
pub const METRIC_COUNT: usize = METRIC_NAMES.len();

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("trace contains no data rows")]
    EmptyTrace,
    #[error("non-monotone timestamps for node {node} at {timestamp}")]
    NonMonotoneTimestamps { node: String, timestamp: i64 },
    #[error("series of length {len} too short for lookback+horizon {needed}")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("cannot fit a scaler on an empty series")]
    EmptySeries,
    #[error("invalid synthesis profile: {0}")]
    InvalidProfile(String),
}

/// One timestamped vector of per-node utilization metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceSample {
    pub timestamp: i64,
    pub node_id: String,
    pub cpu: f64,
    pub ram: f64,
    pub disk: f64,
    pub net_sent: f64,
    pub net_recv: f64,
}

impl ResourceSample {
    pub fn metrics(&self) -> [f64; METRIC_COUNT] {
        [self.cpu, self.ram, self.disk, self.net_sent, self.net_recv]
    }
}

/// Samples grouped per node, each series strictly increasing in time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub nodes: BTreeMap<String, Vec<ResourceSample>>,
}

impl Trace {
    pub fn node_ids(&self) -> Vec<String> {
        self.nodes.keys().cloned().collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestamp,node_id,cpu,ram,disk,net_sent,net_recv\n");
        // rows interleaved by timestamp so the file reads like a monitoring log
        let mut all: Vec<&ResourceSample> = self.nodes.values().flatten().collect();
        all.sort_by(|a, b| (a.timestamp, &a.node_id).cmp(&(b.timestamp, &b.node_id)));
        for s in all {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                s.timestamp, s.node_id, s.cpu, s.ram, s.disk, s.net_sent, s.net_recv
            ));
        }
        out
    }
}

const EXPECTED_HEADER: [&str; 7] = [
    "timestamp", "node_id", "cpu", "ram", "disk", "net_sent", "net_recv",
];

/// Parses a monitoring trace CSV into per-node sample series.
pub fn parse_trace<R: Read>(reader: R) -> Result<Trace, TraceError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);

    let headers = rdr.headers().map_err(|e| TraceError::MalformedRow {
        line: 1,
        reason: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != EXPECTED_HEADER {
        return Err(TraceError::MalformedRow {
            line: 1,
            reason: format!("unexpected header: {}", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut trace = Trace::default();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 2; // 1-based, after header
        let record = record.map_err(|e| TraceError::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        if record.len() != EXPECTED_HEADER.len() {
            return Err(TraceError::MalformedRow {
                line,
                reason: format!("expected {} fields, got {}", EXPECTED_HEADER.len(), record.len()),
            });
        }
        let num = |i: usize, name: &str| -> Result<f64, TraceError> {
            record[i].trim().parse::<f64>().map_err(|_| TraceError::MalformedRow {
                line,
                reason: format!("non-numeric {name}: {:?}", &record[i]),
            })
        };
        let timestamp =
            record[0]
                .trim()
                .parse::<i64>()
                .map_err(|_| TraceError::MalformedRow {
                    line,
                    reason: format!("non-integer timestamp: {:?}", &record[0]),
                })?;
        let sample = ResourceSample {
            timestamp,
            node_id: record[1].trim().to_string(),
            cpu: num(2, "cpu")?,
            ram: num(3, "ram")?,
            disk: num(4, "disk")?,
            net_sent: num(5, "net_sent")?,
            net_recv: num(6, "net_recv")?,
        };
        for (value, name) in [(sample.cpu, "cpu"), (sample.ram, "ram"), (sample.disk, "disk")] {
            if !(0.0..=100.0).contains(&value) {
                return Err(TraceError::MalformedRow {
                    line,
                    reason: format!("{name} out of [0,100]: {value}"),
                });
            }
        }
        for (value, name) in [(sample.net_sent, "net_sent"), (sample.net_recv, "net_recv")] {
            if value < 0.0 {
                return Err(TraceError::MalformedRow {
                    line,
                    reason: format!("{name} negative: {value}"),
                });
            }
        }
        let series = trace.nodes.entry(sample.node_id.clone()).or_default();
        if let Some(last) = series.last() {
            if sample.timestamp <= last.timestamp {
                return Err(TraceError::NonMonotoneTimestamps {
                    node: sample.node_id,
                    timestamp: sample.timestamp,
                });
            }
        }
        series.push(sample);
    }

    if trace.nodes.is_empty() {
        return Err(TraceError::EmptyTrace);
    }
    Ok(trace)
}

/// Per-column min-max scaler fit on a training slice. Degenerate columns
/// (max == min) map to constant 0 and are flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub degenerate: Vec<bool>,
}

impl ScalerParams {
    pub fn identity(dim: usize) -> Self {
        ScalerParams {
            min: vec![0.0; dim],
            max: vec![1.0; dim],
            degenerate: vec![false; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(i, &v)| {
                if self.degenerate[i] {
                    0.0
                } else {
                    (v - self.min[i]) / (self.max[i] - self.min[i])
                }
            })
            .collect()
    }

    pub fn invert(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(i, &v)| {
                if self.degenerate[i] {
                    self.min[i]
                } else {
                    self.min[i] + v * (self.max[i] - self.min[i])
                }
            })
            .collect()
    }
}

/// Fits per-column min/max over the given rows.
pub fn fit_scaler(rows: &[Vec<f64>]) -> Result<ScalerParams, TraceError> {
    let first = rows.first().ok_or(TraceError::EmptySeries)?;
    let dim = first.len();
    let mut min = vec![f64::INFINITY; dim];
    let mut max = vec![f64::NEG_INFINITY; dim];
    for row in rows {
        for (i, &v) in row.iter().enumerate() {
            min[i] = min[i].min(v);
            max[i] = max[i].max(v);
        }
    }
    let degenerate = min.iter().zip(max.iter()).map(|(a, b)| a == b).collect();
    Ok(ScalerParams { min, max, degenerate })
}

/// Sliding-window configuration: `lookback` past steps in, per-metric max
/// over the next `horizon` steps out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub step_seconds: u64,
}

impl WindowConfig {
    pub fn new(lookback: usize, horizon: usize, step_seconds: u64) -> Self {
        assert!(lookback >= 1 && horizon >= 1);
        WindowConfig {
            lookback,
            horizon,
            step_seconds,
        }
    }
}

/// One supervised sample: a scaled local window, the global feature vector
/// at the anchor step, and the scaled per-metric horizon max.
#[derive(Debug, Clone)]
pub struct WindowSample {
    pub local: Vec<Vec<f64>>,
    pub global: Vec<f64>,
    pub target: Vec<f64>,
    pub anchor_index: usize,
}

/// A windowed dataset plus the scaler that produced it.
#[derive(Debug, Clone)]
pub struct WindowedDataset {
    pub node_id: String,
    pub samples: Vec<WindowSample>,
    pub scaler: ScalerParams,
    pub config: WindowConfig,
    pub metric_count: usize,
    pub global_dim: usize,
}

/// Builds windows over a raw local series; `scaler` (when given) is applied
/// to both the window rows and the horizon-max targets.
pub fn make_windows(
    local: &[Vec<f64>],
    global: &[Vec<f64>],
    cfg: &WindowConfig,
    scaler: Option<&ScalerParams>,
) -> Result<Vec<WindowSample>, TraceError> {
    let n = local.len();
    let needed = cfg.lookback + cfg.horizon;
    if n < needed {
        return Err(TraceError::SeriesTooShort { len: n, needed });
    }
    assert_eq!(global.len(), n, "global series must align with local series");
    let dim = local[0].len();
    let mut samples = Vec::with_capacity(n - needed + 1);
    for anchor in (cfg.lookback - 1)..(n - cfg.horizon) {
        let window: Vec<Vec<f64>> = (anchor + 1 - cfg.lookback..=anchor)
            .map(|i| match scaler {
                Some(s) => s.apply(&local[i]),
                None => local[i].clone(),
            })
            .collect();
        let mut target = vec![f64::NEG_INFINITY; dim];
        for step in (anchor + 1)..=(anchor + cfg.horizon) {
            for (d, t) in target.iter_mut().enumerate() {
                *t = t.max(local[step][d]);
            }
        }
        let target = match scaler {
            Some(s) => s.apply(&target),
            None => target,
        };
        samples.push(WindowSample {
            local: window,
            global: global[anchor].clone(),
            target,
            anchor_index: anchor,
        });
    }
    Ok(samples)
}

/// Builds a full dataset from raw series: fits the scaler on the slice of
/// raw steps that the chronologically-first `train_fraction` of samples can
/// see (window plus target horizon), then windows the whole series with it.
pub fn build_dataset(
    node_id: &str,
    local: &[Vec<f64>],
    global: &[Vec<f64>],
    cfg: &WindowConfig,
    train_fraction: f64,
) -> Result<(WindowedDataset, usize), TraceError> {
    let n = local.len();
    let needed = cfg.lookback + cfg.horizon;
    if n < needed {
        return Err(TraceError::SeriesTooShort { len: n, needed });
    }
    let sample_count = n - needed + 1;
    let split = ((sample_count as f64) * train_fraction).floor() as usize;
    let split = split.clamp(1, sample_count);
    // last raw step any training sample touches
    let train_raw_end = (cfg.lookback - 1) + (split - 1) + cfg.horizon + 1;
    let scaler = fit_scaler(&local[..train_raw_end.min(n)])?;
    let samples = make_windows(local, global, cfg, Some(&scaler))?;
    let global_dim = samples.first().map(|s| s.global.len()).unwrap_or(0);
    Ok((
        WindowedDataset {
            node_id: node_id.to_string(),
            samples,
            scaler,
            config: *cfg,
            metric_count: local[0].len(),
            global_dim,
        },
        split,
    ))
}
