//! LSTM cell with stacked gate weights and full backpropagation through time.
//!
//! Both weight matrices stack the four gates as row blocks in the fixed
//! order [input, forget, cell, output], so each gate is an independently
//! addressable `h x n` slice for regularization.

use ndarray::{s, Array1, Array2, Array3, ArrayView2, ArrayViewMut2, Axis};

use crate::error::{Error, Result};
use crate::nn::activation::sigmoid;
use crate::rng::RngState;
use crate::wmm::{uniform_init, Gate, WeightMatrix};

/// Which of the two stacked weight matrices a gate slice comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LstmMatrix {
    /// Input-to-hidden weights, `4h x in`.
    Input,
    /// Hidden-to-hidden weights, `4h x h`.
    Hidden,
}

#[derive(Clone, Debug)]
pub struct LstmCell {
    pub w_x: WeightMatrix, // 4h x in
    pub w_h: WeightMatrix, // 4h x h
    pub b: Array1<f64>,    // 4h
    hidden: usize,
    input: usize,
    pub grad_wx: Array2<f64>,
    pub grad_wh: Array2<f64>,
    pub grad_b: Array1<f64>,
    cache: Option<LstmCache>,
}

#[derive(Clone, Debug)]
struct LstmCache {
    xs: Array3<f64>,           // (B, T, in)
    h_prev: Vec<Array2<f64>>,  // h_{t-1} per step, h_0 = zeros
    c_prev: Vec<Array2<f64>>,  // c_{t-1} per step
    gates_i: Vec<Array2<f64>>, // sigmoid activations
    gates_f: Vec<Array2<f64>>,
    gates_g: Vec<Array2<f64>>, // tanh activation
    gates_o: Vec<Array2<f64>>,
    tanh_c: Vec<Array2<f64>>,
}

impl LstmCell {
    pub fn new(input: usize, hidden: usize, rng: &mut RngState) -> Result<Self> {
        if input == 0 || hidden == 0 {
            return Err(Error::invalid("lstm dimensions must be positive"));
        }
        let w_x = uniform_init(4 * hidden, input, rng)?;
        let w_h = uniform_init(4 * hidden, hidden, rng)?;
        Ok(LstmCell {
            w_x,
            w_h,
            b: Array1::zeros(4 * hidden),
            hidden,
            input,
            grad_wx: Array2::zeros((4 * hidden, input)),
            grad_wh: Array2::zeros((4 * hidden, hidden)),
            grad_b: Array1::zeros(4 * hidden),
            cache: None,
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    fn gate_rows(&self, gate: Gate) -> std::ops::Range<usize> {
        let h = self.hidden;
        gate.block() * h..(gate.block() + 1) * h
    }

    pub fn gate_slice(&self, matrix: LstmMatrix, gate: Gate) -> ArrayView2<'_, f64> {
        let rows = self.gate_rows(gate);
        match matrix {
            LstmMatrix::Input => self.w_x.as_array().slice(s![rows, ..]),
            LstmMatrix::Hidden => self.w_h.as_array().slice(s![rows, ..]),
        }
    }

    pub fn gate_slice_mut(&mut self, matrix: LstmMatrix, gate: Gate) -> ArrayViewMut2<'_, f64> {
        let rows = self.gate_rows(gate);
        match matrix {
            LstmMatrix::Input => self.w_x.as_array_mut().slice_mut(s![rows, ..]),
            LstmMatrix::Hidden => self.w_h.as_array_mut().slice_mut(s![rows, ..]),
        }
    }

    /// The four named row-block views of one stacked weight matrix.
    pub fn gate_slices(&self, matrix: LstmMatrix) -> [(Gate, ArrayView2<'_, f64>); 4] {
        Gate::ALL.map(|g| (g, self.gate_slice(matrix, g)))
    }

    /// Runs the recurrence over a `(B, T, in)` batch, returning all hidden
    /// states `(B, T, h)` and caching intermediates for backward.
    pub fn forward(&mut self, xs: &Array3<f64>) -> Result<Array3<f64>> {
        let (batch, steps, width) = xs.dim();
        if width != self.input {
            return Err(Error::shape(format!(
                "lstm forward: input width {width} vs cell input {}",
                self.input
            )));
        }
        if steps == 0 {
            return Err(Error::invalid("lstm forward: sequence length must be >= 1"));
        }
        let h = self.hidden;
        let mut cache = LstmCache {
            xs: xs.clone(),
            h_prev: Vec::with_capacity(steps),
            c_prev: Vec::with_capacity(steps),
            gates_i: Vec::with_capacity(steps),
            gates_f: Vec::with_capacity(steps),
            gates_g: Vec::with_capacity(steps),
            gates_o: Vec::with_capacity(steps),
            tanh_c: Vec::with_capacity(steps),
        };
        let mut hidden_seq = Array3::zeros((batch, steps, h));
        let mut h_t = Array2::zeros((batch, h));
        let mut c_t = Array2::zeros((batch, h));
        for t in 0..steps {
            let x_t = xs.index_axis(Axis(1), t).to_owned();
            let z = x_t.dot(&self.w_x.as_array().t()) + h_t.dot(&self.w_h.as_array().t()) + &self.b;
            let i = z.slice(s![.., 0..h]).mapv(sigmoid);
            let f = z.slice(s![.., h..2 * h]).mapv(sigmoid);
            let g = z.slice(s![.., 2 * h..3 * h]).mapv(f64::tanh);
            let o = z.slice(s![.., 3 * h..4 * h]).mapv(sigmoid);
            cache.h_prev.push(h_t.clone());
            cache.c_prev.push(c_t.clone());
            c_t = &f * &c_t + &i * &g;
            let tanh_c = c_t.mapv(f64::tanh);
            h_t = &o * &tanh_c;
            hidden_seq.index_axis_mut(Axis(1), t).assign(&h_t);
            cache.gates_i.push(i);
            cache.gates_f.push(f);
            cache.gates_g.push(g);
            cache.gates_o.push(o);
            cache.tanh_c.push(tanh_c);
        }
        self.cache = Some(cache);
        Ok(hidden_seq)
    }

    /// Inference pass without caching.
    pub fn predict(&self, xs: &Array3<f64>) -> Result<Array3<f64>> {
        let (batch, steps, width) = xs.dim();
        if width != self.input {
            return Err(Error::shape(format!(
                "lstm predict: input width {width} vs cell input {}",
                self.input
            )));
        }
        if steps == 0 {
            return Err(Error::invalid("lstm predict: sequence length must be >= 1"));
        }
        let h = self.hidden;
        let mut hidden_seq = Array3::zeros((batch, steps, h));
        let mut h_t = Array2::zeros((batch, h));
        let mut c_t: Array2<f64> = Array2::zeros((batch, h));
        for t in 0..steps {
            let x_t = xs.index_axis(Axis(1), t).to_owned();
            let z = x_t.dot(&self.w_x.as_array().t()) + h_t.dot(&self.w_h.as_array().t()) + &self.b;
            let i = z.slice(s![.., 0..h]).mapv(sigmoid);
            let f = z.slice(s![.., h..2 * h]).mapv(sigmoid);
            let g = z.slice(s![.., 2 * h..3 * h]).mapv(f64::tanh);
            let o = z.slice(s![.., 3 * h..4 * h]).mapv(sigmoid);
            c_t = &f * &c_t + &i * &g;
            h_t = &o * &c_t.mapv(f64::tanh);
            hidden_seq.index_axis_mut(Axis(1), t).assign(&h_t);
        }
        Ok(hidden_seq)
    }

    /// Backpropagation through time. `dh_seq` holds `d loss / d h_t` for
    /// every step; returns `d loss / d xs` and accumulates parameter grads.
    pub fn backward(&mut self, dh_seq: &Array3<f64>) -> Result<Array3<f64>> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::invalid("lstm backward without forward"))?;
        let (batch, steps, _) = cache.xs.dim();
        let h = self.hidden;
        if dh_seq.dim() != (batch, steps, h) {
            return Err(Error::shape(format!(
                "lstm backward: upstream {:?} vs ({batch}, {steps}, {h})",
                dh_seq.dim()
            )));
        }
        let mut dxs = Array3::zeros((batch, steps, self.input));
        let mut dh_next: Array2<f64> = Array2::zeros((batch, h));
        let mut dc_next: Array2<f64> = Array2::zeros((batch, h));
        for t in (0..steps).rev() {
            let i = &cache.gates_i[t];
            let f = &cache.gates_f[t];
            let g = &cache.gates_g[t];
            let o = &cache.gates_o[t];
            let tanh_c = &cache.tanh_c[t];

            let dh = &dh_seq.index_axis(Axis(1), t).to_owned() + &dh_next;
            let dc = &dc_next + &(&dh * o * &tanh_c.mapv(|v| 1.0 - v * v));

            let dzo = &dh * tanh_c * o * &o.mapv(|v| 1.0 - v);
            let dzi = &dc * g * i * &i.mapv(|v| 1.0 - v);
            let dzg = &dc * i * &g.mapv(|v| 1.0 - v * v);
            let dzf = &dc * &cache.c_prev[t] * f * &f.mapv(|v| 1.0 - v);

            let mut dz = Array2::zeros((batch, 4 * h));
            dz.slice_mut(s![.., 0..h]).assign(&dzi);
            dz.slice_mut(s![.., h..2 * h]).assign(&dzf);
            dz.slice_mut(s![.., 2 * h..3 * h]).assign(&dzg);
            dz.slice_mut(s![.., 3 * h..4 * h]).assign(&dzo);

            let x_t = cache.xs.index_axis(Axis(1), t).to_owned();
            self.grad_wx += &dz.t().dot(&x_t);
            self.grad_wh += &dz.t().dot(&cache.h_prev[t]);
            self.grad_b += &dz.sum_axis(Axis(0));

            dxs.index_axis_mut(Axis(1), t)
                .assign(&dz.dot(self.w_x.as_array()));
            dh_next = dz.dot(self.w_h.as_array());
            dc_next = &dc * f;
        }
        Ok(dxs)
    }

    pub fn zero_grads(&mut self) {
        self.grad_wx.fill(0.0);
        self.grad_wh.fill(0.0);
        self.grad_b.fill(0.0);
    }
}
