//! Sliding-window regression datasets with leak-free split assignment.
//!
//! Windows from one source series overlap heavily, so splits are assigned at
//! the series level: a series contributes windows to exactly one split, and
//! a boundary series that overfills its split's quota is truncated rather
//! than shared.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }

    pub fn scaled(&self, scale: f64) -> Result<SplitSizes> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid(format!("scale must be positive, got {scale}")));
        }
        let sizes = SplitSizes {
            train: (self.train as f64 * scale).round() as usize,
            val: (self.val as f64 * scale).round() as usize,
            test: (self.test as f64 * scale).round() as usize,
        };
        if sizes.train == 0 || sizes.val == 0 || sizes.test == 0 {
            return Err(Error::invalid(format!(
                "scale {scale} yields an empty split (train {}, val {}, test {})",
                sizes.train, sizes.val, sizes.test
            )));
        }
        Ok(sizes)
    }
}

/// One sliding-window regression split: each row holds `window` consecutive
/// samples, the target is the next value after the window.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowedDataset {
    pub inputs: Array2<f64>,
    pub targets: Array1<f64>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn window(&self) -> usize {
        self.inputs.ncols()
    }
}

/// Contiguous block of window offsets `[start, end)` taken from one series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowBlock {
    pub series: usize,
    pub start: usize,
    pub end: usize,
}

/// Which series (and which window offsets within them) each split uses.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<WindowBlock>,
    pub val: Vec<WindowBlock>,
    pub test: Vec<WindowBlock>,
}

impl SplitAssignment {
    /// Source series indices used by each split are pairwise disjoint.
    pub fn is_leak_free(&self) -> bool {
        let series_of = |blocks: &[WindowBlock]| -> std::collections::HashSet<usize> {
            blocks.iter().map(|b| b.series).collect()
        };
        let tr = series_of(&self.train);
        let va = series_of(&self.val);
        let te = series_of(&self.test);
        tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te)
    }
}

/// Slices every pooled series into next-step-regression windows and assigns
/// whole series to the train/val/test splits in shuffled order until each
/// quota is met exactly.
pub fn window_dataset(
    pool: &[Vec<f64>],
    window: usize,
    sizes: SplitSizes,
    rng: &mut RngState,
) -> Result<(WindowedDataset, WindowedDataset, WindowedDataset, SplitAssignment)> {
    if window == 0 {
        return Err(Error::invalid("window must be >= 1"));
    }
    for (i, series) in pool.iter().enumerate() {
        if series.len() < window + 1 {
            return Err(Error::invalid(format!(
                "series {i} has {} samples, need at least window + 1 = {}",
                series.len(),
                window + 1
            )));
        }
    }
    let available: usize = pool.iter().map(|s| s.len() - window).sum();
    let needed = sizes.total();
    if available < needed {
        return Err(Error::data(format!(
            "insufficient windows: need {needed}, pool provides {available} \
             (short by {})",
            needed - available
        )));
    }

    let mut order: Vec<usize> = (0..pool.len()).collect();
    rng.shuffle(&mut order);

    let mut assignment = SplitAssignment::default();
    let mut cursor = order.into_iter();
    let mut fill = |quota: usize, blocks: &mut Vec<WindowBlock>| -> Result<WindowedDataset> {
        let mut inputs = Array2::zeros((quota, window));
        let mut targets = Array1::zeros(quota);
        let mut row = 0usize;
        while row < quota {
            let series_idx = cursor.next().ok_or_else(|| {
                Error::data(format!(
                    "insufficient windows: a split still needs {} more but the series \
                     pool is exhausted (leftover windows of a series assigned to an \
                     earlier split are discarded, never shared)",
                    quota - row
                ))
            })?;
            let series = &pool[series_idx];
            let take = (series.len() - window).min(quota - row);
            for offset in 0..take {
                for k in 0..window {
                    inputs[[row, k]] = series[offset + k];
                }
                targets[row] = series[offset + window];
                row += 1;
            }
            blocks.push(WindowBlock {
                series: series_idx,
                start: 0,
                end: take,
            });
        }
        Ok(WindowedDataset { inputs, targets })
    };

    let train = fill(sizes.train, &mut assignment.train)?;
    let val = fill(sizes.val, &mut assignment.val)?;
    let test = fill(sizes.test, &mut assignment.test)?;
    Ok((train, val, test, assignment))
}

/// Writes one split as CSV: header `x0..x{w-1},y`, one row per window.
pub fn write_dataset_csv(path: &Path, ds: &WindowedDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header: Vec<String> = (0..ds.window()).map(|i| format!("x{i}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for (row, target) in ds.inputs.rows().into_iter().zip(ds.targets.iter()) {
        let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        record.push(target.to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv(path: &Path) -> Result<WindowedDataset> {
    let mut reader = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let width = reader.headers()?.len();
    if width < 2 {
        return Err(Error::data(format!(
            "{}: need at least one input column and a target",
            path.display()
        )));
    }
    let window = width - 1;
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != width {
            return Err(Error::data(format!(
                "{}: row {i} has {} fields, expected {width}",
                path.display(),
                record.len()
            )));
        }
        for field in record.iter().take(window) {
            inputs.push(parse_field(field, path, i)?);
        }
        targets.push(parse_field(&record[window], path, i)?);
    }
    let rows = targets.len();
    Ok(WindowedDataset {
        inputs: Array2::from_shape_vec((rows, window), inputs)
            .map_err(|e| Error::data(e.to_string()))?,
        targets: Array1::from_vec(targets),
    })
}

fn parse_field(field: &str, path: &Path, row: usize) -> Result<f64> {
    field.parse::<f64>().map_err(|_| {
        Error::data(format!(
            "{}: row {row}: cannot parse {field:?} as a number",
            path.display()
        ))
    })
}
