//! Entropy, histogram, and KL-divergence instrumentation of weight matrices.
//!
//! The entropy of a matrix is the Shannon entropy (in bits) of the empirical
//! histogram of its values over `bins` equal-width bins spanning
//! `[min, max]` of the value multiset. Because the binning depends only on
//! the multiset, weight shuffling leaves this quantity exactly unchanged.

use std::io::Write;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wmm::init_bound;

pub const DEFAULT_BINS: usize = 64;

/// Probability floor assigned to the overflow bins of the discretized
/// initialization distribution, keeping the KL divergence finite when mass
/// falls outside the initialization range.
const KL_OVERFLOW_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    /// Strictly increasing bin edges, length `bins + 1`.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Equal-width histogram over `[min, max]` of the values. Bins are
/// right-open except the last, which is closed. A degenerate single-point
/// range collapses to one bin holding every element.
pub fn histogram(w: ArrayView2<'_, f64>, bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::invalid("bins must be >= 1"));
    }
    if w.is_empty() {
        return Err(Error::invalid("histogram of an empty matrix"));
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in w.iter() {
        if !v.is_finite() {
            return Err(Error::invalid("histogram input contains non-finite values"));
        }
        min = min.min(v);
        max = max.max(v);
    }
    if min == max {
        // degenerate range: one bin holding all elements
        let width = min.abs().max(1.0);
        return Ok(Histogram {
            edges: vec![min, min + width],
            counts: vec![w.len() as u64],
        });
    }
    let span = max - min;
    let mut counts = vec![0u64; bins];
    for &v in w.iter() {
        let k = (((v - min) / span) * bins as f64) as usize;
        counts[k.min(bins - 1)] += 1;
    }
    let edges = (0..=bins)
        .map(|i| min + span * i as f64 / bins as f64)
        .collect();
    Ok(Histogram { edges, counts })
}

/// Shannon entropy in bits of the empirical bin distribution of `w`.
pub fn weight_entropy(w: ArrayView2<'_, f64>, bins: usize) -> Result<f64> {
    let hist = histogram(w, bins)?;
    let total = hist.total() as f64;
    let mut h = 0.0;
    for &c in &hist.counts {
        if c > 0 {
            let q = c as f64 / total;
            h -= q * q.log2();
        }
    }
    Ok(h.max(0.0))
}

/// KL divergence (bits) between the empirical distribution of `w` over
/// `bins` equal-width bins spanning the initialization range
/// `[-1/sqrt(cols), +1/sqrt(cols)]` (plus two overflow bins) and the
/// discretized initialization distribution.
pub fn kl_to_init(w: ArrayView2<'_, f64>, bins: usize) -> Result<f64> {
    if bins == 0 {
        return Err(Error::invalid("bins must be >= 1"));
    }
    if w.is_empty() {
        return Err(Error::invalid("kl_to_init of an empty matrix"));
    }
    let bound = init_bound(w.ncols());
    let span = 2.0 * bound;
    // counts: [underflow, bins in-range bins..., overflow]
    let mut counts = vec![0u64; bins + 2];
    for &v in w.iter() {
        if !v.is_finite() {
            return Err(Error::invalid("kl_to_init input contains non-finite values"));
        }
        let slot = if v < -bound {
            0
        } else if v > bound {
            bins + 1
        } else {
            let k = (((v + bound) / span) * bins as f64) as usize;
            1 + k.min(bins - 1)
        };
        counts[slot] += 1;
    }
    let total = w.len() as f64;
    let in_range_mass = 1.0 - 2.0 * KL_OVERFLOW_FLOOR;
    let mut kl = 0.0;
    for (slot, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let q = c as f64 / total;
        let u = if slot == 0 || slot == bins + 1 {
            KL_OVERFLOW_FLOOR
        } else {
            in_range_mass / bins as f64
        };
        kl += q * (q / u).log2();
    }
    Ok(kl.max(0.0))
}

/// One per-matrix entropy measurement at a given epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub epoch: usize,
    pub target: String,
    pub entropy_bits: f64,
    /// Sum of the per-matrix entropies recorded at this epoch.
    pub total_bits: f64,
}

/// Per-epoch entropy record of the tracked weight matrices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EntropyTimeline {
    entries: Vec<TimelineEntry>,
}

impl EntropyTimeline {
    pub fn new() -> Self {
        EntropyTimeline::default()
    }

    pub fn entries(&self) -> &[TimelineEntry] {
        &self.entries
    }

    pub fn last_epoch(&self) -> Option<usize> {
        self.entries.last().map(|e| e.epoch)
    }

    /// Appends one entry per tracked matrix; the network total is the sum of
    /// the per-matrix entropies. Epochs must be recorded in strictly
    /// increasing order.
    pub fn record_epoch(
        &mut self,
        epoch: usize,
        tracked: &[(String, ArrayView2<'_, f64>)],
        bins: usize,
    ) -> Result<()> {
        if let Some(last) = self.last_epoch() {
            if epoch <= last {
                return Err(Error::invalid(format!(
                    "epoch {epoch} not after last recorded epoch {last}"
                )));
            }
        }
        let entropies: Vec<(String, f64)> = tracked
            .iter()
            .map(|(name, view)| Ok((name.clone(), weight_entropy(*view, bins)?)))
            .collect::<Result<_>>()?;
        let total: f64 = entropies.iter().map(|(_, h)| h).sum();
        for (target, entropy_bits) in entropies {
            self.entries.push(TimelineEntry {
                epoch,
                target,
                entropy_bits,
                total_bits: total,
            });
        }
        Ok(())
    }

    /// CSV serialization: `epoch,target_id,entropy_bits,total_bits`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "epoch,target_id,entropy_bits,total_bits")?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{}",
                e.epoch, e.target, e.entropy_bits, e.total_bits
            )?;
        }
        Ok(())
    }
}
