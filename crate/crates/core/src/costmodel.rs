//! Closed-form compute and memory counters for one module, plus a two-point
//! critical-path model.
//!
//! The counters are exact integer arithmetic over the module shape. The only
//! quantity that differs between the two orderings is the number of rows the
//! MLP processes: the baseline ordering runs it over every gathered neighbor
//! row (n_out x k rows), the delayed ordering over every input point (n_in
//! rows). Everything else follows from that ratio.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::nit_stream_bytes;
use crate::pipeline::{Mode, ModuleConfig};

pub const WORD_BYTES: u64 = 4;

/// Compute and memory counters for one module in one mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub mode: Mode,
    /// Multiply-accumulates per MLP layer. Max comparisons and subtractions
    /// are not counted.
    pub macs_per_layer: Vec<u64>,
    pub macs_total: u64,
    /// Bytes of each layer's output activation (4-byte words).
    pub activation_bytes_per_layer: Vec<u64>,
    /// Bytes of the matrix the aggregation gather reads from: the input
    /// point matrix in baseline mode, the point feature table in delayed.
    pub aggregation_working_set_bytes: u64,
    /// Serialized size of the neighbor index table.
    pub nit_bytes: u64,
    /// Size of the point feature table; 0 in baseline mode, which never
    /// materializes one.
    pub pft_bytes: u64,
}

fn mlp_rows(cfg: &ModuleConfig, n_in: usize, mode: Mode) -> u64 {
    match mode {
        Mode::Baseline => cfg.n_out as u64 * cfg.k as u64,
        Mode::Delayed => n_in as u64,
    }
}

/// Full cost report for one module. [`count_macs`] and
/// [`activation_footprint`] are the per-concern views of the same counters.
pub fn cost_report(cfg: &ModuleConfig, n_in: usize, mode: Mode) -> CostReport {
    let rows = mlp_rows(cfg, n_in, mode);
    let widths = cfg.mlp.widths();
    let m_in = widths[0] as u64;
    let m_out = *widths.last().unwrap() as u64;

    let macs_per_layer: Vec<u64> = widths
        .windows(2)
        .map(|w| rows * w[0] as u64 * w[1] as u64)
        .collect();
    let macs_total = macs_per_layer.iter().sum();

    let activation_bytes_per_layer: Vec<u64> = widths[1..]
        .iter()
        .map(|&w| rows * w as u64 * WORD_BYTES)
        .collect();

    let aggregation_working_set_bytes = match mode {
        Mode::Baseline => n_in as u64 * m_in * WORD_BYTES,
        Mode::Delayed => n_in as u64 * m_out * WORD_BYTES,
    };
    let pft_bytes = match mode {
        Mode::Baseline => 0,
        Mode::Delayed => n_in as u64 * m_out * WORD_BYTES,
    };

    CostReport {
        mode,
        macs_per_layer,
        macs_total,
        activation_bytes_per_layer,
        aggregation_working_set_bytes,
        nit_bytes: nit_stream_bytes(cfg.n_out, cfg.k),
        pft_bytes,
    }
}

/// MAC counters for one module (returns the full report; the MAC fields are
/// the ones this operation defines).
pub fn count_macs(cfg: &ModuleConfig, n_in: usize, mode: Mode) -> CostReport {
    cost_report(cfg, n_in, mode)
}

/// Activation and working-set byte counters for one module.
pub fn activation_footprint(cfg: &ModuleConfig, n_in: usize, mode: Mode) -> CostReport {
    cost_report(cfg, n_in, mode)
}

/// Per-stage time costs supplied by the caller (measured or modeled), in
/// whatever unit the caller prefers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageCosts {
    pub neighbor: f64,
    pub aggregate: f64,
    pub feature: f64,
}

/// Critical-path estimate: the baseline ordering serializes all three
/// stages; the delayed ordering overlaps neighbor search with feature
/// computation and then aggregates.
pub fn critical_path(stages: StageCosts, mode: Mode) -> Result<f64> {
    if stages.neighbor < 0.0 || stages.aggregate < 0.0 || stages.feature < 0.0 {
        return Err(Error::Argument(format!(
            "stage costs must be nonnegative, got {stages:?}"
        )));
    }
    Ok(match mode {
        Mode::Baseline => stages.neighbor + stages.aggregate + stages.feature,
        Mode::Delayed => stages.neighbor.max(stages.feature) + stages.aggregate,
    })
}
