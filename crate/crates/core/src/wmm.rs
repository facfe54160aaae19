//! Weight-matrix modification (WMM) operators.
//!
//! Both regularizers act on a rectangular window of a weight matrix whose
//! per-dimension extent is a fraction `c` of the matrix shape:
//!
//! * **Reinitialization** replaces a sparse subset (each in-window element
//!   kept with probability `p`) with fresh draws from the uniform
//!   initialization distribution `U[-1/sqrt(cols), +1/sqrt(cols)]`.
//! * **Shuffling** permutes a Bernoulli-masked subset of the in-window
//!   elements among themselves, leaving the value multiset of the matrix
//!   exactly unchanged.
//!
//! The per-step trigger (`u < p` per target matrix) lives in
//! [`apply_wmm_step`]; the operators themselves always fire. Bias vectors
//! are never targets. All operations are pure functions of
//! `(matrix, config, rng)` and mutate only the passed view.

use std::fmt;

use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;

/// Bernoulli parameter of the shuffle mask when not configured explicitly.
pub const DEFAULT_SHUFFLE_DENSITY: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WmmMethod {
    Reinit,
    Shuffle,
}

impl fmt::Display for WmmMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WmmMethod::Reinit => write!(f, "reinit"),
            WmmMethod::Shuffle => write!(f, "shuffle"),
        }
    }
}

/// LSTM gate, in row-block order within the stacked weight matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gate {
    Input,
    Forget,
    Cell,
    Output,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Cell, Gate::Output];

    /// Row-block index of the gate within a stacked `4h x n` matrix.
    pub fn block(self) -> usize {
        match self {
            Gate::Input => 0,
            Gate::Forget => 1,
            Gate::Cell => 2,
            Gate::Output => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Gate::Input => "input",
            Gate::Forget => "forget",
            Gate::Cell => "cell",
            Gate::Output => "output",
        }
    }
}

/// A regularization target as configured: a layer, optionally narrowed to a
/// single LSTM gate. Resolution against a concrete model expands this to one
/// or more weight matrices (never bias vectors).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TargetSel {
    pub layer: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<Gate>,
}

impl TargetSel {
    pub fn layer(layer: usize) -> Self {
        TargetSel { layer, gate: None }
    }

    pub fn gate(layer: usize, gate: Gate) -> Self {
        TargetSel {
            layer,
            gate: Some(gate),
        }
    }
}

impl fmt::Display for TargetSel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.gate {
            Some(g) => write!(f, "L{}.{}", self.layer, g.name()),
            None => write!(f, "L{}", self.layer),
        }
    }
}

/// One concrete weight matrix (or matrix slice) a WMM operator acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TargetKey {
    pub layer: usize,
    pub part: MatrixPart,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MatrixPart {
    /// The weight matrix of a dense layer.
    Dense,
    /// One gate's row block of an LSTM input-to-hidden matrix.
    LstmInput(Gate),
    /// One gate's row block of an LSTM hidden-to-hidden matrix.
    LstmHidden(Gate),
    /// One 2D filter of a convolutional filter bank.
    Filter(usize),
}

impl fmt::Display for TargetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.part {
            MatrixPart::Dense => write!(f, "L{}.w", self.layer),
            MatrixPart::LstmInput(g) => write!(f, "L{}.wx.{}", self.layer, g.name()),
            MatrixPart::LstmHidden(g) => write!(f, "L{}.wh.{}", self.layer, g.name()),
            MatrixPart::Filter(i) => write!(f, "L{}.f{}", self.layer, i),
        }
    }
}

/// Per-layer regularizer settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WmmConfig {
    pub method: WmmMethod,
    /// Trigger probability per target matrix per step; also the reinit-mask
    /// sparsity threshold.
    pub p: f64,
    /// Coverage: per-dimension fraction controlling the window extents.
    pub c: f64,
    /// Bernoulli parameter of the shuffle mask (ignored by reinit).
    #[serde(default = "default_density")]
    pub shuffle_density: f64,
    pub targets: Vec<TargetSel>,
}

fn default_density() -> f64 {
    DEFAULT_SHUFFLE_DENSITY
}

impl WmmConfig {
    pub fn new(method: WmmMethod, p: f64, c: f64, targets: Vec<TargetSel>) -> Self {
        WmmConfig {
            method,
            p,
            c,
            shuffle_density: DEFAULT_SHUFFLE_DENSITY,
            targets,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::invalid(format!("p must be in [0, 1], got {}", self.p)));
        }
        if !(self.c > 0.0 && self.c <= 1.0) {
            return Err(Error::invalid(format!("c must be in (0, 1], got {}", self.c)));
        }
        if !(0.0..=1.0).contains(&self.shuffle_density) {
            return Err(Error::invalid(format!(
                "shuffle_density must be in [0, 1], got {}",
                self.shuffle_density
            )));
        }
        if self.targets.is_empty() {
            return Err(Error::invalid("targets must be nonempty"));
        }
        Ok(())
    }
}

/// A real-valued parameter matrix. Construction and mutation keep the
/// "nonempty, all finite" invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    data: Array2<f64>,
}

impl WeightMatrix {
    pub fn from_array(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::invalid(format!(
                "weight matrix must have positive dimensions, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("weight matrix contains non-finite values"));
        }
        Ok(WeightMatrix { data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("weight matrix must have positive dimensions"));
        }
        Ok(WeightMatrix {
            data: Array2::zeros((rows, cols)),
        })
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn view_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        self.data.view_mut()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn as_array_mut(&mut self) -> &mut Array2<f64> {
        &mut self.data
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// A rectangular sub-region of a matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl WindowSpec {
    pub fn fits(&self, rows: usize, cols: usize) -> bool {
        self.height >= 1
            && self.width >= 1
            && self.top + self.height <= rows
            && self.left + self.width <= cols
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.top
            && row < self.top + self.height
            && col >= self.left
            && col < self.left + self.width
    }

    pub fn area(&self) -> usize {
        self.height * self.width
    }
}

/// Boolean matrix marking the elements affected by one WMM application.
/// True entries are confined to the window the mask was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMask {
    inner: Array2<bool>,
    window: WindowSpec,
}

impl SparseMask {
    pub fn shape(&self) -> (usize, usize) {
        self.inner.dim()
    }

    pub fn window(&self) -> WindowSpec {
        self.window
    }

    pub fn is_set(&self, row: usize, col: usize) -> bool {
        self.inner[[row, col]]
    }

    pub fn count(&self) -> usize {
        self.inner.iter().filter(|&&b| b).count()
    }

    /// True positions in row-major order.
    pub fn indices(&self) -> Vec<(usize, usize)> {
        self.inner
            .indexed_iter()
            .filter_map(|((r, c), &b)| b.then_some((r, c)))
            .collect()
    }
}

/// Draws a `rows x cols` matrix i.i.d. from `U[-1/sqrt(cols), +1/sqrt(cols)]`,
/// the same distribution reinitialization samples from.
pub fn uniform_init(rows: usize, cols: usize, rng: &mut RngState) -> Result<WeightMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid(format!(
            "uniform_init requires positive dimensions, got {rows}x{cols}"
        )));
    }
    let bound = init_bound(cols);
    let values: Vec<f64> = (0..rows * cols).map(|_| rng.uniform(-bound, bound)).collect();
    let data = Array2::from_shape_vec((rows, cols), values).expect("shape matches length");
    WeightMatrix::from_array(data)
}

/// Half-width of the initialization distribution for a matrix with `cols` columns.
pub fn init_bound(cols: usize) -> f64 {
    1.0 / (cols as f64).sqrt()
}

/// Picks a window of extent `max(1, round(c * dim))` per dimension, placed
/// uniformly over all valid positions.
pub fn select_window(rows: usize, cols: usize, c: f64, rng: &mut RngState) -> Result<WindowSpec> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("select_window requires a nonempty matrix"));
    }
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::invalid(format!("c must be in (0, 1], got {c}")));
    }
    let height = window_extent(rows, c);
    let width = window_extent(cols, c);
    let top = rng.index(rows - height + 1);
    let left = rng.index(cols - width + 1);
    Ok(WindowSpec {
        top,
        left,
        height,
        width,
    })
}

fn window_extent(dim: usize, c: f64) -> usize {
    (((c * dim as f64).round() as usize).max(1)).min(dim)
}

/// Thresholded uniform mask: inside the window, true iff `U[0,1) < p`.
pub fn build_reinit_mask(
    rows: usize,
    cols: usize,
    window: &WindowSpec,
    p: f64,
    rng: &mut RngState,
) -> Result<SparseMask> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("p must be in [0, 1], got {p}")));
    }
    build_bernoulli_mask(rows, cols, window, p, rng)
}

/// Bernoulli mask with the given density inside the window.
pub fn build_shuffle_mask(
    rows: usize,
    cols: usize,
    window: &WindowSpec,
    density: f64,
    rng: &mut RngState,
) -> Result<SparseMask> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::invalid(format!(
            "density must be in [0, 1], got {density}"
        )));
    }
    build_bernoulli_mask(rows, cols, window, density, rng)
}

fn build_bernoulli_mask(
    rows: usize,
    cols: usize,
    window: &WindowSpec,
    keep: f64,
    rng: &mut RngState,
) -> Result<SparseMask> {
    if !window.fits(rows, cols) {
        return Err(Error::invalid(format!(
            "window {window:?} does not fit a {rows}x{cols} matrix"
        )));
    }
    let mut inner = Array2::from_elem((rows, cols), false);
    for r in window.top..window.top + window.height {
        for c in window.left..window.left + window.width {
            inner[[r, c]] = rng.next_unit() < keep;
        }
    }
    Ok(SparseMask {
        inner,
        window: *window,
    })
}

/// Replaces a sparse, windowed subset of `w` with fresh draws from the
/// initialization distribution. Unmasked elements are untouched. Returns the
/// mask for instrumentation. The per-step trigger is not part of this
/// operation; see [`apply_wmm_step`].
pub fn weight_reinitialization(
    w: &mut ArrayViewMut2<'_, f64>,
    p: f64,
    c: f64,
    rng: &mut RngState,
) -> Result<SparseMask> {
    let (rows, cols) = w.dim();
    let window = select_window(rows, cols, c, rng)?;
    let mask = build_reinit_mask(rows, cols, &window, p, rng)?;
    let bound = init_bound(cols);
    for (r, col) in mask.indices() {
        w[[r, col]] = rng.uniform(-bound, bound);
    }
    Ok(mask)
}

/// Permutes a Bernoulli-masked, windowed subset of `w` among themselves by a
/// uniform random permutation (Fisher-Yates over the row-major index list).
/// The value multiset of the matrix is exactly preserved.
pub fn weight_shuffling(
    w: &mut ArrayViewMut2<'_, f64>,
    c: f64,
    density: f64,
    rng: &mut RngState,
) -> Result<SparseMask> {
    let (rows, cols) = w.dim();
    let window = select_window(rows, cols, c, rng)?;
    let mask = build_shuffle_mask(rows, cols, &window, density, rng)?;
    let indices = mask.indices();
    let mut values: Vec<f64> = indices.iter().map(|&(r, c)| w[[r, c]]).collect();
    rng.shuffle(&mut values);
    for (&(r, c), &v) in indices.iter().zip(values.iter()) {
        w[[r, c]] = v;
    }
    Ok(mask)
}

/// Anything that can resolve target selectors to concrete weight matrices
/// and hand out mutable views of them one at a time.
pub trait WmmHost {
    /// Expands selectors to concrete matrix keys, failing on any selector
    /// that does not resolve (before any mutation takes place).
    fn resolve_targets(&self, sel: &[TargetSel]) -> Result<Vec<TargetKey>>;

    fn with_matrix_mut(
        &mut self,
        key: &TargetKey,
        f: &mut dyn FnMut(ArrayViewMut2<'_, f64>) -> Result<SparseMask>,
    ) -> Result<SparseMask>;

    fn matrix_view(&self, key: &TargetKey) -> ArrayView2<'_, f64>;
}

/// Outcome of one step for one target matrix: the mask if the trigger fired,
/// `None` otherwise.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub target: TargetKey,
    pub mask: Option<SparseMask>,
}

/// Runs one WMM step over every resolved target matrix independently: draws
/// `u ~ U[0,1)` and applies the configured operator in place iff `u < p`.
pub fn apply_wmm_step<H: WmmHost>(
    host: &mut H,
    cfg: &WmmConfig,
    rng: &mut RngState,
) -> Result<Vec<StepOutcome>> {
    cfg.validate()?;
    let keys = host.resolve_targets(&cfg.targets)?;
    let mut outcomes = Vec::with_capacity(keys.len());
    for key in keys {
        let fired = rng.next_unit() < cfg.p;
        let mask = if fired {
            let method = cfg.method;
            let (p, c, density) = (cfg.p, cfg.c, cfg.shuffle_density);
            Some(host.with_matrix_mut(&key, &mut |mut w| match method {
                WmmMethod::Reinit => weight_reinitialization(&mut w, p, c, rng),
                WmmMethod::Shuffle => weight_shuffling(&mut w, c, density, rng),
            })?)
        } else {
            None
        };
        outcomes.push(StepOutcome { target: key, mask });
    }
    Ok(outcomes)
}

/// A bank of independent 2D filters (the per-filter application surface for
/// convolutional weights). Selecting the bank's layer targets every filter
/// independently.
#[derive(Clone, Debug)]
pub struct FilterBank {
    pub layer: usize,
    pub filters: Vec<WeightMatrix>,
}

impl WmmHost for FilterBank {
    fn resolve_targets(&self, sel: &[TargetSel]) -> Result<Vec<TargetKey>> {
        let mut keys = Vec::new();
        for s in sel {
            if s.layer != self.layer || s.gate.is_some() {
                return Err(Error::config(format!(
                    "target {s} does not resolve in filter bank at layer {}",
                    self.layer
                )));
            }
            keys.extend((0..self.filters.len()).map(|i| TargetKey {
                layer: self.layer,
                part: MatrixPart::Filter(i),
            }));
        }
        Ok(keys)
    }

    fn with_matrix_mut(
        &mut self,
        key: &TargetKey,
        f: &mut dyn FnMut(ArrayViewMut2<'_, f64>) -> Result<SparseMask>,
    ) -> Result<SparseMask> {
        let MatrixPart::Filter(i) = key.part else {
            return Err(Error::config(format!("bad filter key {key}")));
        };
        f(self.filters[i].view_mut())
    }

    fn matrix_view(&self, key: &TargetKey) -> ArrayView2<'_, f64> {
        let MatrixPart::Filter(i) = key.part else {
            panic!("bad filter key {key}");
        };
        self.filters[i].view()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn rng(seed: u64) -> RngState {
        RngState::from_seed(seed)
    }

    #[test]
    fn uniform_init_respects_bound_for_four_cols() {
        let w = uniform_init(1, 4, &mut rng(1)).unwrap();
        for &v in w.as_array() {
            assert!(v.abs() <= 0.5, "1/sqrt(4) = 0.5 bound violated: {v}");
        }
    }

    #[test]
    fn uniform_init_single_column_bound_is_one() {
        let w = uniform_init(2, 1, &mut rng(2)).unwrap();
        for &v in w.as_array() {
            assert!(v.abs() <= 1.0);
        }
    }

    #[test]
    fn uniform_init_moments() {
        // U[-a, a] with a = 1/sqrt(100): mean 0, variance (2a)^2 / 12
        let w = uniform_init(100, 100, &mut rng(3)).unwrap();
        let n = 10_000.0;
        let mean = w.as_array().iter().sum::<f64>() / n;
        let var = w.as_array().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let expected_var = (2.0 * 0.1) * (2.0 * 0.1) / 12.0;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!(
            (var - expected_var).abs() < 0.1 * expected_var,
            "var {var} vs {expected_var}"
        );
    }

    #[test]
    fn uniform_init_rejects_zero_dims() {
        assert!(uniform_init(0, 4, &mut rng(1)).is_err());
        assert!(uniform_init(4, 0, &mut rng(1)).is_err());
    }

    #[test]
    fn full_coverage_window_is_whole_matrix() {
        let w = select_window(10, 10, 1.0, &mut rng(4)).unwrap();
        assert_eq!(
            w,
            WindowSpec {
                top: 0,
                left: 0,
                height: 10,
                width: 10
            }
        );
    }

    #[test]
    fn tiny_coverage_clamps_to_single_cell_and_reaches_all_positions() {
        // 28 * 0.03 = 0.84 rounds to 1
        let mut r = rng(5);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..40_000 {
            let w = select_window(28, 28, 0.03, &mut r).unwrap();
            assert_eq!((w.height, w.width), (1, 1));
            seen.insert((w.top, w.left));
        }
        assert_eq!(seen.len(), 784, "all positions should occur");
    }

    #[test]
    fn window_extents_follow_rounding_rule() {
        // 8 * 0.35 = 2.8 -> 3; 4 * 0.35 = 1.4 -> 1
        let mut r = rng(6);
        for _ in 0..200 {
            let w = select_window(8, 4, 0.35, &mut r).unwrap();
            assert_eq!((w.height, w.width), (3, 1));
            assert!(w.top <= 5 && w.left <= 3);
        }
    }

    #[test]
    fn select_window_rejects_bad_coverage() {
        assert!(select_window(4, 4, 0.0, &mut rng(1)).is_err());
        assert!(select_window(4, 4, 1.2, &mut rng(1)).is_err());
        assert!(select_window(4, 4, -0.1, &mut rng(1)).is_err());
    }

    #[test]
    fn reinit_mask_degenerate_probabilities() {
        let win = WindowSpec {
            top: 1,
            left: 1,
            height: 3,
            width: 3,
        };
        let m0 = build_reinit_mask(5, 5, &win, 0.0, &mut rng(7)).unwrap();
        assert_eq!(m0.count(), 0);
        let m1 = build_reinit_mask(5, 5, &win, 1.0, &mut rng(7)).unwrap();
        assert_eq!(m1.count(), 9);
        for (r, c) in m1.indices() {
            assert!(win.contains(r, c));
        }
    }

    #[test]
    fn reinit_mask_rejects_out_of_bounds_window() {
        let win = WindowSpec {
            top: 3,
            left: 0,
            height: 3,
            width: 3,
        };
        assert!(build_reinit_mask(5, 5, &win, 0.5, &mut rng(1)).is_err());
    }

    #[test]
    fn reinit_mask_count_matches_binomial_mean() {
        // Binomial(2500, 0.2): mean 500, check the Monte Carlo mean within 5%
        let win = WindowSpec {
            top: 0,
            left: 0,
            height: 50,
            width: 50,
        };
        let mut r = rng(8);
        let mut total = 0usize;
        let trials = 10_000;
        for _ in 0..trials {
            total += build_reinit_mask(50, 50, &win, 0.2, &mut r).unwrap().count();
        }
        let mean = total as f64 / trials as f64;
        assert!((475.0..=525.0).contains(&mean), "mean {mean}");
    }

    #[test]
    fn shuffle_mask_density_extremes() {
        let win = WindowSpec {
            top: 0,
            left: 0,
            height: 4,
            width: 4,
        };
        assert_eq!(build_shuffle_mask(4, 4, &win, 1.0, &mut rng(9)).unwrap().count(), 16);
        assert_eq!(build_shuffle_mask(4, 4, &win, 0.0, &mut rng(9)).unwrap().count(), 0);
    }

    #[test]
    fn shuffle_mask_count_matches_binomial_mean() {
        // Binomial(1600, 0.5): mean 800, 5% tolerance on the Monte Carlo mean
        let win = WindowSpec {
            top: 0,
            left: 0,
            height: 40,
            width: 40,
        };
        let mut r = rng(10);
        let mut total = 0usize;
        let trials = 10_000;
        for _ in 0..trials {
            total += build_shuffle_mask(40, 40, &win, 0.5, &mut r).unwrap().count();
        }
        let mean = total as f64 / trials as f64;
        assert!((760.0..=840.0).contains(&mean), "mean {mean}");
    }

    #[test]
    fn reinit_with_p_zero_is_identity() {
        let mut w = uniform_init(6, 6, &mut rng(11)).unwrap();
        let before = w.as_array().clone();
        let mask = weight_reinitialization(&mut w.view_mut(), 0.0, 0.5, &mut rng(12)).unwrap();
        assert_eq!(mask.count(), 0);
        assert_eq!(w.as_array(), &before);
    }

    #[test]
    fn reinit_changes_confined_to_mask_and_range() {
        // start far outside the init range so every masked element visibly changes
        let mut w = WeightMatrix::from_array(Array2::from_elem((10, 16), 10.0)).unwrap();
        let before = w.as_array().clone();
        let mask = weight_reinitialization(&mut w.view_mut(), 0.3, 0.5, &mut rng(13)).unwrap();
        let bound = init_bound(16);
        let mut changed = Vec::new();
        for ((r, c), &b) in w.as_array().indexed_iter() {
            if before[[r, c]] != b {
                changed.push((r, c));
                assert!(b.abs() <= bound, "changed element outside init range: {b}");
                assert!(mask.window().contains(r, c));
            }
        }
        assert_eq!(changed, mask.indices(), "changed set must equal mask support");
    }

    #[test]
    fn reinit_full_coverage_matches_uniform_distribution() {
        // p=1, c=1: the output is a fresh uniform_init draw; KS test against
        // U[-1/sqrt(cols), 1/sqrt(cols)] over 1e5 pooled samples, alpha = 0.01
        let mut r = rng(14);
        let mut pooled = Vec::with_capacity(100_000);
        for _ in 0..10 {
            let mut w = WeightMatrix::from_array(Array2::from_elem((100, 100), 7.0)).unwrap();
            weight_reinitialization(&mut w.view_mut(), 1.0, 1.0, &mut r).unwrap();
            pooled.extend(w.as_array().iter().copied());
        }
        let bound = init_bound(100);
        pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = pooled.len() as f64;
        let mut d: f64 = 0.0;
        for (i, &x) in pooled.iter().enumerate() {
            let cdf = ((x + bound) / (2.0 * bound)).clamp(0.0, 1.0);
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            d = d.max((cdf - lo).abs()).max((hi - cdf).abs());
        }
        let critical = 1.628 / n.sqrt(); // alpha = 0.01
        assert!(d < critical, "KS statistic {d} >= {critical}");
    }

    #[test]
    fn shuffle_preserves_value_multiset_exactly() {
        let mut r = rng(15);
        let mut w = uniform_init(12, 9, &mut r).unwrap();
        let mut before: Vec<f64> = w.as_array().iter().copied().collect();
        weight_shuffling(&mut w.view_mut(), 0.7, 0.5, &mut r).unwrap();
        let mut after: Vec<f64> = w.as_array().iter().copied().collect();
        before.sort_by(|a, b| a.partial_cmp(b).unwrap());
        after.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // bitwise equality, not approximate
        assert!(before.iter().zip(&after).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn shuffle_of_at_most_one_element_is_identity() {
        let mut w = WeightMatrix::from_array(array![[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let before = w.as_array().clone();
        // density 0: empty mask
        weight_shuffling(&mut w.view_mut(), 1.0, 0.0, &mut rng(16)).unwrap();
        assert_eq!(w.as_array(), &before);
        // 1x1 matrix: any mask selects at most one element
        let mut single = WeightMatrix::from_array(array![[5.0]]).unwrap();
        weight_shuffling(&mut single.view_mut(), 1.0, 1.0, &mut rng(17)).unwrap();
        assert_eq!(single.as_array(), &array![[5.0]]);
    }

    #[test]
    fn shuffle_permutation_is_uniform_over_three_elements() {
        // 1x3 matrix, full window, density 1: every application permutes all
        // three values; each of the 6 permutations should occur ~1/6.
        let mut r = rng(18);
        let mut counts = std::collections::HashMap::new();
        let runs = 60_000;
        for _ in 0..runs {
            let mut w = WeightMatrix::from_array(array![[1.0, 2.0, 3.0]]).unwrap();
            weight_shuffling(&mut w.view_mut(), 1.0, 1.0, &mut r).unwrap();
            let key: Vec<u64> = w.as_array().iter().map(|v| *v as u64).collect();
            *counts.entry(key).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        for (perm, count) in counts {
            let freq = count as f64 / runs as f64;
            assert!(
                (freq - 1.0 / 6.0).abs() < 0.02,
                "permutation {perm:?} frequency {freq}"
            );
        }
    }

    #[test]
    fn shuffle_zero_values_buffer_untouched_by_empty_window() {
        // degenerate 1x1: window is the whole matrix, shuffle is a no-op
        let mut w = WeightMatrix::from_array(array![[2.5]]).unwrap();
        let mask = weight_shuffling(&mut w.view_mut(), 0.5, 1.0, &mut rng(19)).unwrap();
        assert_eq!(mask.shape(), (1, 1));
        assert_eq!(w.as_array()[[0, 0]], 2.5);
    }

    struct SingleMatrix {
        w: WeightMatrix,
    }

    impl WmmHost for SingleMatrix {
        fn resolve_targets(&self, sel: &[TargetSel]) -> Result<Vec<TargetKey>> {
            sel.iter()
                .map(|s| {
                    if s.layer == 0 && s.gate.is_none() {
                        Ok(TargetKey {
                            layer: 0,
                            part: MatrixPart::Dense,
                        })
                    } else {
                        Err(Error::config(format!("unresolvable target {s}")))
                    }
                })
                .collect()
        }

        fn with_matrix_mut(
            &mut self,
            _key: &TargetKey,
            f: &mut dyn FnMut(ArrayViewMut2<'_, f64>) -> Result<SparseMask>,
        ) -> Result<SparseMask> {
            f(self.w.view_mut())
        }

        fn matrix_view(&self, _key: &TargetKey) -> ArrayView2<'_, f64> {
            self.w.view()
        }
    }

    #[test]
    fn step_with_p_zero_never_modifies() {
        let mut host = SingleMatrix {
            w: uniform_init(8, 8, &mut rng(20)).unwrap(),
        };
        let before = host.w.as_array().clone();
        let cfg = WmmConfig::new(WmmMethod::Reinit, 0.0, 0.5, vec![TargetSel::layer(0)]);
        let mut r = rng(21);
        for _ in 0..100 {
            let out = apply_wmm_step(&mut host, &cfg, &mut r).unwrap();
            assert!(out.iter().all(|o| o.mask.is_none()));
        }
        assert_eq!(host.w.as_array(), &before);
    }

    #[test]
    fn step_with_p_one_always_modifies() {
        let mut host = SingleMatrix {
            w: uniform_init(8, 8, &mut rng(22)).unwrap(),
        };
        let cfg = WmmConfig::new(WmmMethod::Shuffle, 1.0, 1.0, vec![TargetSel::layer(0)]);
        let mut r = rng(23);
        for _ in 0..50 {
            let out = apply_wmm_step(&mut host, &cfg, &mut r).unwrap();
            assert!(out.iter().all(|o| o.mask.is_some()));
        }
    }

    #[test]
    fn step_trigger_frequency_tracks_p() {
        let mut host = SingleMatrix {
            w: uniform_init(8, 8, &mut rng(24)).unwrap(),
        };
        let cfg = WmmConfig::new(WmmMethod::Reinit, 0.25, 0.5, vec![TargetSel::layer(0)]);
        let mut r = rng(25);
        let steps = 100_000;
        let mut fired = 0usize;
        for _ in 0..steps {
            let out = apply_wmm_step(&mut host, &cfg, &mut r).unwrap();
            fired += usize::from(out[0].mask.is_some());
        }
        let freq = fired as f64 / steps as f64;
        assert!((0.23..=0.27).contains(&freq), "activation frequency {freq}");
    }

    #[test]
    fn step_rejects_unresolvable_target_before_mutation() {
        let mut host = SingleMatrix {
            w: uniform_init(4, 4, &mut rng(26)).unwrap(),
        };
        let before = host.w.as_array().clone();
        let cfg = WmmConfig::new(
            WmmMethod::Reinit,
            1.0,
            1.0,
            vec![TargetSel::layer(0), TargetSel::layer(3)],
        );
        assert!(apply_wmm_step(&mut host, &cfg, &mut rng(27)).is_err());
        assert_eq!(host.w.as_array(), &before, "no mutation on config error");
    }

    #[test]
    fn filter_bank_applies_per_filter_independently() {
        let mut r = rng(28);
        let mut bank = FilterBank {
            layer: 0,
            filters: (0..3).map(|_| uniform_init(5, 5, &mut r).unwrap()).collect(),
        };
        let before: Vec<Array2<f64>> = bank.filters.iter().map(|f| f.as_array().clone()).collect();
        let cfg = WmmConfig::new(WmmMethod::Shuffle, 1.0, 1.0, vec![TargetSel::layer(0)]);
        let out = apply_wmm_step(&mut bank, &cfg, &mut r).unwrap();
        assert_eq!(out.len(), 3, "one outcome per filter");
        for (i, filter) in bank.filters.iter().enumerate() {
            let mut a: Vec<f64> = before[i].iter().copied().collect();
            let mut b: Vec<f64> = filter.as_array().iter().copied().collect();
            a.sort_by(|x, y| x.partial_cmp(y).unwrap());
            b.sort_by(|x, y| x.partial_cmp(y).unwrap());
            assert_eq!(a, b, "filter {i} multiset preserved");
        }
    }

    #[test]
    fn config_validation() {
        let ok = WmmConfig::new(WmmMethod::Reinit, 0.2, 0.1, vec![TargetSel::layer(0)]);
        assert!(ok.validate().is_ok());
        let mut bad = ok.clone();
        bad.p = 1.5;
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.c = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = ok;
        bad.targets.clear();
        assert!(bad.validate().is_err());
    }
}
