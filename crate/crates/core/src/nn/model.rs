//! Network presets: MLPs and stacked-LSTM regressors, with the plumbing the
//! training loop and the WMM hook need (parameter slots, target resolution,
//! per-matrix views).

use ndarray::{Array2, Array3, ArrayView2, ArrayViewMut2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::activation::Activation;
use crate::nn::dense::DenseLayer;
use crate::nn::lstm::{LstmCell, LstmMatrix};
use crate::nn::optim::ParamSlot;
use crate::rng::{stream, RngState};
use crate::wmm::{
    init_bound, uniform_init, Gate, MatrixPart, SparseMask, TargetKey, TargetSel, WeightMatrix,
    WmmHost,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelPreset {
    Mlp {
        hidden: Vec<usize>,
    },
    Lstm {
        hidden: usize,
        #[serde(default = "default_lstm_layers")]
        layers: usize,
    },
}

fn default_lstm_layers() -> usize {
    2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitScheme {
    /// `U[-1/sqrt(cols), +1/sqrt(cols)]` per matrix.
    Uniform,
    /// Values clustered around `+bound/2`: a low-entropy, visibly skewed
    /// starting distribution for entropy-timeline experiments.
    Skewed,
}

impl Default for InitScheme {
    fn default() -> Self {
        InitScheme::Uniform
    }
}

#[derive(Clone, Debug)]
pub enum Model {
    Mlp(Mlp),
    Lstm(LstmNet),
}

#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

/// Stacked LSTM cells reading one feature per time step, with a dense head
/// on the final hidden state.
#[derive(Clone, Debug)]
pub struct LstmNet {
    pub cells: Vec<LstmCell>,
    pub head: DenseLayer,
    steps_cache: Option<usize>,
}

impl Model {
    /// Builds a preset model. Initialization draws from the `INIT` stream of
    /// `seed`, layer by layer in order.
    pub fn build(
        preset: &ModelPreset,
        in_dim: usize,
        out_dim: usize,
        out_activation: Activation,
        init: InitScheme,
        seed: u64,
    ) -> Result<Model> {
        let mut rng = RngState::derive(seed, stream::INIT);
        let mut model = match preset {
            ModelPreset::Mlp { hidden } => {
                let mut layers = Vec::new();
                let mut width = in_dim;
                for &h in hidden {
                    layers.push(DenseLayer::new(width, h, Activation::Tanh, &mut rng)?);
                    width = h;
                }
                layers.push(DenseLayer::new(width, out_dim, out_activation, &mut rng)?);
                Model::Mlp(Mlp { layers })
            }
            ModelPreset::Lstm { hidden, layers } => {
                if *layers == 0 {
                    return Err(Error::invalid("lstm preset needs at least one layer"));
                }
                let mut cells = Vec::new();
                let mut width = 1; // one feature per time step
                for _ in 0..*layers {
                    cells.push(LstmCell::new(width, *hidden, &mut rng)?);
                    width = *hidden;
                }
                let head = DenseLayer::new(*hidden, out_dim, out_activation, &mut rng)?;
                let _ = in_dim;
                Model::Lstm(LstmNet {
                    cells,
                    head,
                    steps_cache: None,
                })
            }
        };
        if init == InitScheme::Skewed {
            let mut skew_rng = RngState::derive(seed, stream::INIT);
            model.apply_skewed_init(&mut skew_rng);
        }
        Ok(model)
    }

    /// Overwrites every weight matrix with a skewed, low-entropy draw:
    /// `bound * (0.5 + 0.45 u^3)`, `u ~ U[-1, 1]`.
    fn apply_skewed_init(&mut self, rng: &mut RngState) {
        let mut skew = |w: &mut WeightMatrix| {
            let bound = init_bound(w.cols());
            for v in w.as_array_mut().iter_mut() {
                let u = rng.uniform(-1.0, 1.0);
                *v = bound * (0.5 + 0.45 * u * u * u);
            }
        };
        match self {
            Model::Mlp(mlp) => {
                for layer in &mut mlp.layers {
                    skew(&mut layer.w);
                }
            }
            Model::Lstm(net) => {
                for cell in &mut net.cells {
                    skew(&mut cell.w_x);
                    skew(&mut cell.w_h);
                }
                skew(&mut net.head.w);
            }
        }
    }

    pub fn is_recurrent(&self) -> bool {
        matches!(self, Model::Lstm(_))
    }

    pub fn forward(&mut self, x: &Array2<f64>) -> Result<Array2<f64>> {
        match self {
            Model::Mlp(mlp) => {
                let mut y = x.clone();
                for layer in &mut mlp.layers {
                    y = layer.forward(&y)?;
                }
                Ok(y)
            }
            Model::Lstm(net) => {
                let xs = as_sequence(x);
                net.steps_cache = Some(x.ncols());
                let mut hs = xs;
                for cell in &mut net.cells {
                    hs = cell.forward(&hs)?;
                }
                let last = hs.index_axis(Axis(1), hs.dim().1 - 1).to_owned();
                net.head.forward(&last)
            }
        }
    }

    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        match self {
            Model::Mlp(mlp) => {
                let mut y = x.clone();
                for layer in &mlp.layers {
                    y = layer.predict(&y)?;
                }
                Ok(y)
            }
            Model::Lstm(net) => {
                let mut hs = as_sequence(x);
                for cell in &net.cells {
                    hs = cell.predict(&hs)?;
                }
                let last = hs.index_axis(Axis(1), hs.dim().1 - 1).to_owned();
                net.head.predict(&last)
            }
        }
    }

    pub fn backward(&mut self, dout: &Array2<f64>) -> Result<()> {
        match self {
            Model::Mlp(mlp) => {
                let mut d = dout.clone();
                for layer in mlp.layers.iter_mut().rev() {
                    d = layer.backward(&d)?;
                }
                Ok(())
            }
            Model::Lstm(net) => {
                let steps = net
                    .steps_cache
                    .ok_or_else(|| Error::invalid("lstm backward without forward"))?;
                let dlast = net.head.backward(dout)?;
                let (batch, h) = dlast.dim();
                let mut dh = Array3::zeros((batch, steps, h));
                dh.index_axis_mut(Axis(1), steps - 1).assign(&dlast);
                for idx in (0..net.cells.len()).rev() {
                    let dxs = net.cells[idx].backward(&dh)?;
                    dh = dxs;
                }
                Ok(())
            }
        }
    }

    pub fn zero_grads(&mut self) {
        match self {
            Model::Mlp(mlp) => mlp.layers.iter_mut().for_each(DenseLayer::zero_grads),
            Model::Lstm(net) => {
                net.cells.iter_mut().for_each(LstmCell::zero_grads);
                net.head.zero_grads();
            }
        }
    }

    /// Flattened parameter/gradient slots in a fixed order.
    pub fn param_slots(&mut self) -> Vec<ParamSlot<'_>> {
        let mut slots = Vec::new();
        match self {
            Model::Mlp(mlp) => {
                for layer in &mut mlp.layers {
                    slots.push(ParamSlot {
                        values: layer.w.as_array_mut().as_slice_mut().expect("standard layout"),
                        grads: layer.grad_w.as_slice_mut().expect("standard layout"),
                        is_bias: false,
                    });
                    slots.push(ParamSlot {
                        values: layer.b.as_slice_mut().expect("contiguous"),
                        grads: layer.grad_b.as_slice_mut().expect("contiguous"),
                        is_bias: true,
                    });
                }
            }
            Model::Lstm(net) => {
                for cell in &mut net.cells {
                    slots.push(ParamSlot {
                        values: cell.w_x.as_array_mut().as_slice_mut().expect("standard layout"),
                        grads: cell.grad_wx.as_slice_mut().expect("standard layout"),
                        is_bias: false,
                    });
                    slots.push(ParamSlot {
                        values: cell.w_h.as_array_mut().as_slice_mut().expect("standard layout"),
                        grads: cell.grad_wh.as_slice_mut().expect("standard layout"),
                        is_bias: false,
                    });
                    slots.push(ParamSlot {
                        values: cell.b.as_slice_mut().expect("contiguous"),
                        grads: cell.grad_b.as_slice_mut().expect("contiguous"),
                        is_bias: true,
                    });
                }
                slots.push(ParamSlot {
                    values: net.head.w.as_array_mut().as_slice_mut().expect("standard layout"),
                    grads: net.head.grad_w.as_slice_mut().expect("standard layout"),
                    is_bias: false,
                });
                slots.push(ParamSlot {
                    values: net.head.b.as_slice_mut().expect("contiguous"),
                    grads: net.head.grad_b.as_slice_mut().expect("contiguous"),
                    is_bias: true,
                });
            }
        }
        slots
    }

    /// Every layer as a whole-layer target, the default tracking set.
    pub fn default_targets(&self) -> Vec<TargetSel> {
        (0..self.layer_count()).map(TargetSel::layer).collect()
    }

    pub fn layer_count(&self) -> usize {
        match self {
            Model::Mlp(mlp) => mlp.layers.len(),
            Model::Lstm(net) => net.cells.len() + 1,
        }
    }

    /// Eligible (layer, gate) pairs for hyper-parameter search: one entry
    /// per LSTM gate, one per dense layer.
    pub fn eligible_targets(&self) -> Vec<TargetSel> {
        match self {
            Model::Mlp(mlp) => (0..mlp.layers.len()).map(TargetSel::layer).collect(),
            Model::Lstm(net) => {
                let mut sels = Vec::new();
                for layer in 0..net.cells.len() {
                    for gate in Gate::ALL {
                        sels.push(TargetSel::gate(layer, gate));
                    }
                }
                sels.push(TargetSel::layer(net.cells.len()));
                sels
            }
        }
    }

    /// Named read views of the matrices a selector set resolves to.
    pub fn tracked_views(&self, sels: &[TargetSel]) -> Result<Vec<(String, ArrayView2<'_, f64>)>> {
        let keys = self.resolve_targets(sels)?;
        Ok(keys
            .into_iter()
            .map(|k| (k.to_string(), self.matrix_view(&k)))
            .collect())
    }
}

fn as_sequence(x: &Array2<f64>) -> Array3<f64> {
    // (B, T) windows become (B, T, 1): one feature per step
    let (batch, steps) = x.dim();
    x.clone().into_shape_with_order((batch, steps, 1)).expect("reshape")
}

impl WmmHost for Model {
    fn resolve_targets(&self, sels: &[TargetSel]) -> Result<Vec<TargetKey>> {
        let mut keys = Vec::new();
        for sel in sels {
            match self {
                Model::Mlp(mlp) => {
                    if sel.layer >= mlp.layers.len() {
                        return Err(Error::config(format!(
                            "target {sel}: model has {} layers",
                            mlp.layers.len()
                        )));
                    }
                    if sel.gate.is_some() {
                        return Err(Error::config(format!(
                            "target {sel}: layer {} is dense, gates do not apply",
                            sel.layer
                        )));
                    }
                    keys.push(TargetKey {
                        layer: sel.layer,
                        part: MatrixPart::Dense,
                    });
                }
                Model::Lstm(net) => {
                    if sel.layer < net.cells.len() {
                        let gates: Vec<Gate> = match sel.gate {
                            Some(g) => vec![g],
                            None => Gate::ALL.to_vec(),
                        };
                        for g in gates {
                            keys.push(TargetKey {
                                layer: sel.layer,
                                part: MatrixPart::LstmInput(g),
                            });
                            keys.push(TargetKey {
                                layer: sel.layer,
                                part: MatrixPart::LstmHidden(g),
                            });
                        }
                    } else if sel.layer == net.cells.len() {
                        if sel.gate.is_some() {
                            return Err(Error::config(format!(
                                "target {sel}: the head layer is dense, gates do not apply"
                            )));
                        }
                        keys.push(TargetKey {
                            layer: sel.layer,
                            part: MatrixPart::Dense,
                        });
                    } else {
                        return Err(Error::config(format!(
                            "target {sel}: model has {} layers",
                            net.cells.len() + 1
                        )));
                    }
                }
            }
        }
        Ok(keys)
    }

    fn with_matrix_mut(
        &mut self,
        key: &TargetKey,
        f: &mut dyn FnMut(ArrayViewMut2<'_, f64>) -> Result<SparseMask>,
    ) -> Result<SparseMask> {
        match self {
            Model::Mlp(mlp) => f(mlp.layers[key.layer].w.view_mut()),
            Model::Lstm(net) => match key.part {
                MatrixPart::Dense => f(net.head.w.view_mut()),
                MatrixPart::LstmInput(g) => {
                    f(net.cells[key.layer].gate_slice_mut(LstmMatrix::Input, g))
                }
                MatrixPart::LstmHidden(g) => {
                    f(net.cells[key.layer].gate_slice_mut(LstmMatrix::Hidden, g))
                }
                MatrixPart::Filter(_) => Err(Error::config("filter targets do not apply to models")),
            },
        }
    }

    fn matrix_view(&self, key: &TargetKey) -> ArrayView2<'_, f64> {
        match self {
            Model::Mlp(mlp) => mlp.layers[key.layer].w.view(),
            Model::Lstm(net) => match key.part {
                MatrixPart::Dense => net.head.w.view(),
                MatrixPart::LstmInput(g) => net.cells[key.layer].gate_slice(LstmMatrix::Input, g),
                MatrixPart::LstmHidden(g) => net.cells[key.layer].gate_slice(LstmMatrix::Hidden, g),
                MatrixPart::Filter(_) => panic!("filter targets do not apply to models"),
            },
        }
    }
}

/// Reinitializes `w` from the uniform scheme (test helper for fresh draws
/// outside a model).
pub fn fresh_like(w: &WeightMatrix, rng: &mut RngState) -> Result<WeightMatrix> {
    uniform_init(w.rows(), w.cols(), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wmm::{apply_wmm_step, WmmConfig, WmmMethod};

    fn mlp() -> Model {
        Model::build(
            &ModelPreset::Mlp { hidden: vec![8] },
            6,
            1,
            Activation::Identity,
            InitScheme::Uniform,
            3,
        )
        .unwrap()
    }

    fn lstm() -> Model {
        Model::build(
            &ModelPreset::Lstm { hidden: 4, layers: 2 },
            10,
            1,
            Activation::Identity,
            InitScheme::Uniform,
            4,
        )
        .unwrap()
    }

    #[test]
    fn build_is_deterministic_per_seed() {
        let a = mlp();
        let b = mlp();
        match (&a, &b) {
            (Model::Mlp(x), Model::Mlp(y)) => {
                assert_eq!(x.layers[0].w.as_array(), y.layers[0].w.as_array());
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn forward_and_predict_agree() {
        let x = Array2::from_shape_fn((3, 6), |(i, j)| ((i * 7 + j) as f64 * 0.13).sin());
        let mut m = mlp();
        let train = m.forward(&x).unwrap();
        let infer = m.predict(&x).unwrap();
        assert_eq!(train, infer);

        let x = Array2::from_shape_fn((2, 10), |(i, j)| ((i + j) as f64 * 0.21).cos() * 0.3);
        let mut l = lstm();
        let train = l.forward(&x).unwrap();
        let infer = l.predict(&x).unwrap();
        for (a, b) in train.iter().zip(infer.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn gate_target_resolution_expands_to_both_matrices() {
        let model = lstm();
        let keys = model
            .resolve_targets(&[TargetSel::gate(1, Gate::Forget)])
            .unwrap();
        assert_eq!(keys.len(), 2);
        assert_eq!(keys[0].part, MatrixPart::LstmInput(Gate::Forget));
        assert_eq!(keys[1].part, MatrixPart::LstmHidden(Gate::Forget));
    }

    #[test]
    fn whole_lstm_layer_expands_to_all_gates() {
        let model = lstm();
        let keys = model.resolve_targets(&[TargetSel::layer(0)]).unwrap();
        assert_eq!(keys.len(), 8);
    }

    #[test]
    fn bad_targets_are_config_errors() {
        let model = mlp();
        assert!(model.resolve_targets(&[TargetSel::layer(5)]).is_err());
        assert!(model
            .resolve_targets(&[TargetSel::gate(0, Gate::Cell)])
            .is_err());
        let model = lstm();
        assert!(model.resolve_targets(&[TargetSel::gate(2, Gate::Cell)]).is_err());
    }

    #[test]
    fn wmm_on_forget_gate_leaves_other_rows_untouched() {
        let mut model = lstm();
        let (wx_before, wh_before) = match &model {
            Model::Lstm(net) => (
                net.cells[0].w_x.as_array().clone(),
                net.cells[0].w_h.as_array().clone(),
            ),
            _ => unreachable!(),
        };
        let cfg = WmmConfig::new(
            WmmMethod::Reinit,
            1.0,
            1.0,
            vec![TargetSel::gate(0, Gate::Forget)],
        );
        let mut rng = RngState::from_seed(9);
        apply_wmm_step(&mut model, &cfg, &mut rng).unwrap();
        let Model::Lstm(net) = &model else { unreachable!() };
        let h = net.cells[0].hidden_dim();
        for ((r, c), &v) in net.cells[0].w_x.as_array().indexed_iter() {
            if !(h..2 * h).contains(&r) {
                assert_eq!(v, wx_before[[r, c]], "wx row {r} outside forget block");
            }
        }
        for ((r, c), &v) in net.cells[0].w_h.as_array().indexed_iter() {
            if !(h..2 * h).contains(&r) {
                assert_eq!(v, wh_before[[r, c]], "wh row {r} outside forget block");
            }
        }
    }

    #[test]
    fn shuffle_on_cell_gate_preserves_block_multiset() {
        let mut model = lstm();
        let before = match &model {
            Model::Lstm(net) => net.cells[1].gate_slice(LstmMatrix::Input, Gate::Cell).to_owned(),
            _ => unreachable!(),
        };
        let cfg = WmmConfig::new(
            WmmMethod::Shuffle,
            1.0,
            1.0,
            vec![TargetSel::gate(1, Gate::Cell)],
        );
        let mut rng = RngState::from_seed(10);
        apply_wmm_step(&mut model, &cfg, &mut rng).unwrap();
        let Model::Lstm(net) = &model else { unreachable!() };
        let after = net.cells[1].gate_slice(LstmMatrix::Input, Gate::Cell);
        let mut a: Vec<f64> = before.iter().copied().collect();
        let mut b: Vec<f64> = after.iter().copied().collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn skewed_init_concentrates_mass() {
        let model = Model::build(
            &ModelPreset::Mlp { hidden: vec![16] },
            20,
            1,
            Activation::Identity,
            InitScheme::Skewed,
            11,
        )
        .unwrap();
        let Model::Mlp(mlp) = &model else { unreachable!() };
        let w = mlp.layers[0].w.view();
        let bound = init_bound(20);
        assert!(w.iter().all(|&v| v > 0.0 && v <= bound));
        let entropy = crate::stats::weight_entropy(w, 64).unwrap();
        assert!(entropy < 4.5, "skewed init should be low-entropy, got {entropy}");
    }
}
