//! Cycle-approximate model of a banked aggregation unit.
//!
//! The unit streams neighbor index entries from DRAM into a double-buffered
//! on-chip table and serves row gathers out of a banked feature buffer. Rows
//! are interleaved across banks by their low index bits. Banks stream rows
//! in parallel, one word per cycle each, so a conflict-free group of
//! neighbor reads finishes after one round of `m_out` cycles; each extra
//! request on the most-loaded bank adds another round. When the feature
//! table is too large for the buffer it is split into column partitions and
//! the whole index stream is replayed once per partition. A round then only
//! streams the resident columns, so the total SRAM cycle count is unchanged
//! by partitioning; what grows is index traffic, since the table is fetched
//! from DRAM once per partition.
//!
//! Cycle accounting is deliberately coarse: row streams and centroid reads
//! only, DRAM traffic reported as bytes rather than cycles. Double
//! buffering is assumed to hide index fetch latency.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::nit_stream_bytes;
use crate::geometry::NeighborIndexTable;
use crate::tensor::Mat;

/// Hardware shape of the aggregation unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuConfig {
    /// Number of SRAM banks in the feature buffer. Must be a power of two.
    pub banks: usize,
    /// Total feature buffer capacity in bytes, across all banks.
    pub pft_buffer_bytes: usize,
    /// Capacity of the on-chip neighbor index buffer, in entries.
    pub nit_entries: usize,
    /// Width of a stored neighbor index. Rows at or beyond `2^index_bits`
    /// cannot be addressed.
    pub index_bits: u32,
    /// Bytes per feature word.
    pub word_bytes: usize,
}

impl Default for AuConfig {
    fn default() -> Self {
        AuConfig {
            banks: 32,
            pft_buffer_bytes: 64 * 1024,
            nit_entries: 128,
            index_bits: 12,
            word_bytes: 4,
        }
    }
}

impl AuConfig {
    pub fn validate(&self) -> Result<()> {
        if self.banks == 0 || !self.banks.is_power_of_two() {
            return Err(Error::Config(format!(
                "banks must be a power of two, got {}",
                self.banks
            )));
        }
        if self.pft_buffer_bytes == 0 {
            return Err(Error::Config("pft_buffer_bytes must be positive".into()));
        }
        if self.nit_entries == 0 {
            return Err(Error::Config("nit_entries must be positive".into()));
        }
        if self.index_bits == 0 || self.index_bits > 32 {
            return Err(Error::Config(format!(
                "index_bits must be in 1..=32, got {}",
                self.index_bits
            )));
        }
        if self.word_bytes == 0 {
            return Err(Error::Config("word_bytes must be positive".into()));
        }
        Ok(())
    }
}

/// Bank holding row `idx` under low-bit interleaving.
pub fn bank_of(idx: usize, banks: usize) -> usize {
    idx % banks
}

/// Split `m_out` feature columns into contiguous ranges such that one range
/// of all `n_in` rows fits in the buffer.
pub fn partition_pft(n_in: usize, m_out: usize, cfg: &AuConfig) -> Result<Vec<Range<usize>>> {
    cfg.validate()?;
    if n_in == 0 || m_out == 0 {
        return Err(Error::Argument(
            "partition_pft requires a nonempty table".into(),
        ));
    }
    let column_bytes = n_in * cfg.word_bytes;
    let cols_per = cfg.pft_buffer_bytes / column_bytes;
    if cols_per == 0 {
        return Err(Error::Capacity(format!(
            "one feature column needs {column_bytes} bytes but the buffer holds {}",
            cfg.pft_buffer_bytes
        )));
    }
    let mut ranges = Vec::new();
    let mut start = 0;
    while start < m_out {
        let end = (start + cols_per).min(m_out);
        ranges.push(start..end);
        start = end;
    }
    Ok(ranges)
}

/// Greedy conflict resolution: place each index, in order, into the first
/// round where its bank is still free. Rounds equal the occupancy of the
/// most-loaded bank, and the first round holds one index per distinct bank.
pub fn schedule_rounds(indices: &[usize], banks: usize) -> Vec<Vec<usize>> {
    let mut rounds: Vec<Vec<usize>> = Vec::new();
    let mut used: Vec<Vec<bool>> = Vec::new();
    for &idx in indices {
        let b = bank_of(idx, banks);
        let slot = match used.iter().position(|round| !round[b]) {
            Some(r) => r,
            None => {
                rounds.push(Vec::new());
                used.push(vec![false; banks]);
                rounds.len() - 1
            }
        };
        rounds[slot].push(idx);
        used[slot][b] = true;
    }
    rounds
}

/// Counters produced by one simulated module aggregation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuStats {
    /// Total cycles: neighbor row streams plus centroid row reads.
    pub cycles: u64,
    /// Conflict rounds executed, summed over all centroids and partitions.
    pub rounds_total: u64,
    /// Cycles spent streaming neighbor rows. A round costs one cycle per
    /// resident column, so across all partitions this is the per-centroid
    /// round count times `m_out`.
    pub neighbor_read_cycles: u64,
    /// Cycles spent streaming each centroid's own row for the subtraction.
    pub centroid_read_cycles: u64,
    /// Bank words read: neighbor rows plus centroid rows.
    pub pft_reads: u64,
    /// Words streamed in rounds after a group's first, the price of bank
    /// conflicts.
    pub conflict_service_reads: u64,
    /// Index entries streamed through the on-chip buffer: one per centroid
    /// per partition.
    pub nit_entry_reads: u64,
    /// Number of column partitions the feature table was split into.
    pub partitions: u64,
    /// Index table bytes fetched from DRAM; the table is re-read once per
    /// partition.
    pub dram_nit_bytes: u64,
}

fn validate_addressable(nit: &NeighborIndexTable, n_in: usize, cfg: &AuConfig) -> Result<()> {
    nit.validate_for(n_in)?;
    if nit.k() > crate::formats::NIT_ENTRY_SLOTS {
        return Err(Error::Capacity(format!(
            "k = {} but one index entry holds at most {} neighbors",
            nit.k(),
            crate::formats::NIT_ENTRY_SLOTS
        )));
    }
    let limit = 1usize << cfg.index_bits.min(63);
    for c in 0..nit.n_out() {
        for &idx in nit.row(c) {
            if idx >= limit {
                return Err(Error::Capacity(format!(
                    "index {idx} does not fit in {} index bits",
                    cfg.index_bits
                )));
            }
        }
        if nit.centroid(c) >= limit {
            return Err(Error::Capacity(format!(
                "centroid index {} does not fit in {} index bits",
                nit.centroid(c),
                cfg.index_bits
            )));
        }
    }
    Ok(())
}

/// Simulate aggregating one module's neighbor table against an `n_in` by
/// `m_out` feature table.
pub fn simulate(
    nit: &NeighborIndexTable,
    n_in: usize,
    m_out: usize,
    cfg: &AuConfig,
) -> Result<AuStats> {
    validate_addressable(nit, n_in, cfg)?;
    let parts = partition_pft(n_in, m_out, cfg)?;
    let partitions = parts.len() as u64;

    // The round schedule is a property of the index stream alone, so one
    // pass computes it for every partition.
    let mut rounds_per_pass = 0u64;
    let mut late_rows_per_pass = 0u64;
    for c in 0..nit.n_out() {
        let row = nit.row(c);
        let rounds = schedule_rounds(row, cfg.banks);
        rounds_per_pass += rounds.len() as u64;
        late_rows_per_pass += (row.len() - rounds[0].len()) as u64;
    }

    let n_out = nit.n_out() as u64;
    let k = nit.k() as u64;
    let m = m_out as u64;

    // A round streams one cycle per resident column; summed over all
    // partitions the resident columns add up to m_out exactly, whatever the
    // partition count.
    let neighbor_read_cycles = rounds_per_pass * m;
    let centroid_read_cycles = n_out * m;
    Ok(AuStats {
        cycles: neighbor_read_cycles + centroid_read_cycles,
        rounds_total: rounds_per_pass * partitions,
        neighbor_read_cycles,
        centroid_read_cycles,
        pft_reads: (k + 1) * n_out * m,
        conflict_service_reads: late_rows_per_pass * m,
        nit_entry_reads: n_out * partitions,
        partitions,
        dram_nit_bytes: nit_stream_bytes(nit.n_out(), nit.k()) * partitions,
    })
}

/// Run the aggregation the way the hardware would (per partition, per round)
/// and return the resulting offset-max feature matrix. The result is
/// identical to aggregating in one pass because max is insensitive to
/// grouping order.
pub fn functional_aggregate_via_sim(
    pft: &Mat,
    nit: &NeighborIndexTable,
    cfg: &AuConfig,
) -> Result<Mat> {
    validate_addressable(nit, pft.rows(), cfg)?;
    let parts = partition_pft(pft.rows(), pft.cols(), cfg)?;
    let m_out = pft.cols();
    let mut out = vec![0.0f32; nit.n_out() * m_out];
    for range in &parts {
        for c in 0..nit.n_out() {
            let rounds = schedule_rounds(nit.row(c), cfg.banks);
            let dst = &mut out[c * m_out..(c + 1) * m_out];
            let mut acc = vec![f32::NEG_INFINITY; range.len()];
            for round in &rounds {
                for &idx in round {
                    let row = pft.row(idx);
                    for (a, &v) in acc.iter_mut().zip(&row[range.clone()]) {
                        if v > *a {
                            *a = v;
                        }
                    }
                }
            }
            let centroid_row = pft.row(nit.centroid(c));
            for (j, a) in acc.iter().enumerate() {
                dst[range.start + j] = a - centroid_row[range.start + j];
            }
        }
    }
    Mat::from_vec(nit.n_out(), m_out, out)
}
