use serde::{Deserialize, Serialize};

use crate::microsim::DetectorLog;
use crate::network::TrafficNetwork;

/// Lag `m` and memory depth `n` of the sensor window, with the aggregation
/// period of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorWindow {
    pub lag: usize,
    pub depth: usize,
    pub period: f64,
}

impl Default for SensorWindow {
    fn default() -> Self {
        Self {
            lag: 0,
            depth: 4,
            period: 120.0,
        }
    }
}

impl SensorWindow {
    pub fn columns(&self) -> usize {
        self.depth - self.lag + 1
    }

    pub fn is_valid(&self) -> bool {
        self.lag < self.depth && self.period > 0.0
    }
}

/// Per-sensor flow history. Row `i` is sensor `i`; column `c` holds the count
/// for period `t − n + c`, so the rightmost column is the most recent usable one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl StateMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged state rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.cols + col] = v;
    }

    /// Column `col` as a sensor vector.
    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    /// Column-major flattening: all sensors of the oldest column first.
    pub fn flatten_by_time(&self) -> Vec<f64> {
        (0..self.cols).flat_map(|c| self.column(c)).collect()
    }

    /// Window ending at the latest aggregation period completed by time `t`.
    /// Periods before the start of the run read as zero flow.
    pub fn from_detector_log(log: &DetectorLog, window: &SensorWindow, t: f64) -> Self {
        let cols = window.columns();
        let mut q = Self::zeros(log.n_detectors(), cols);
        let latest = log.completed_periods(t) as i64 - 1;
        for c in 0..cols {
            let period = latest - window.depth as i64 + c as i64;
            if period < 0 {
                continue;
            }
            for (i, counts) in log.counts.iter().enumerate() {
                if let Some(&n) = counts.get(period as usize) {
                    q.set(i, c, n as f64);
                }
            }
        }
        q
    }
}

/// Divide each row by its sensor's saturation count and clamp to [0, 1].
pub fn normalize_state(q: &StateMatrix, saturation: &[f64]) -> StateMatrix {
    assert_eq!(saturation.len(), q.rows, "one saturation value per sensor");
    let mut out = q.clone();
    for r in 0..q.rows {
        for c in 0..q.cols {
            out.set(r, c, (q.get(r, c) / saturation[r]).min(1.0));
        }
    }
    out
}

/// Default saturation counts: 0.5 veh/s per lane over one aggregation period.
pub fn default_saturation(net: &TrafficNetwork, period: f64) -> Vec<f64> {
    net.detectors
        .iter()
        .map(|d| {
            let lanes = net
                .link_idx(&d.link)
                .map_or(1, |l| net.links[l].lanes);
            lanes as f64 * 0.5 * period
        })
        .collect()
}
