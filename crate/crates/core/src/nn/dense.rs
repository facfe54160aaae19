use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::nn::activation::Activation;
use crate::rng::RngState;
use crate::wmm::{uniform_init, WeightMatrix};

/// Fully connected layer `y = act(x W^T + b)` over row-major batches.
/// The bias vector is excluded from weight-matrix regularization.
#[derive(Clone, Debug)]
pub struct DenseLayer {
    pub w: WeightMatrix, // out x in
    pub b: Array1<f64>,  // out
    pub activation: Activation,
    pub grad_w: Array2<f64>,
    pub grad_b: Array1<f64>,
    cache: Option<DenseCache>,
}

#[derive(Clone, Debug)]
struct DenseCache {
    x: Array2<f64>,
    z: Array2<f64>,
}

impl DenseLayer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut RngState,
    ) -> Result<Self> {
        let w = uniform_init(out_dim, in_dim, rng)?;
        Ok(Self::from_weights(w, Array1::zeros(out_dim), activation)?)
    }

    pub fn from_weights(w: WeightMatrix, b: Array1<f64>, activation: Activation) -> Result<Self> {
        if b.len() != w.rows() {
            return Err(Error::shape(format!(
                "bias length {} vs {} output rows",
                b.len(),
                w.rows()
            )));
        }
        let (out_dim, in_dim) = (w.rows(), w.cols());
        Ok(DenseLayer {
            w,
            b,
            activation,
            grad_w: Array2::zeros((out_dim, in_dim)),
            grad_b: Array1::zeros(out_dim),
            cache: None,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    fn preactivation(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.in_dim() {
            return Err(Error::shape(format!(
                "dense forward: input width {} vs layer input {}",
                x.ncols(),
                self.in_dim()
            )));
        }
        Ok(x.dot(&self.w.as_array().t()) + &self.b)
    }

    /// Training forward pass; caches pre-activations for backward.
    pub fn forward(&mut self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let z = self.preactivation(x)?;
        let y = z.mapv(|v| self.activation.apply(v));
        self.cache = Some(DenseCache { x: x.clone(), z });
        Ok(y)
    }

    /// Inference pass without caching.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.preactivation(x)?.mapv(|v| self.activation.apply(v)))
    }

    /// Accumulates parameter gradients from `d loss / d y` and returns
    /// `d loss / d x`. Requires a preceding `forward`.
    pub fn backward(&mut self, dy: &Array2<f64>) -> Result<Array2<f64>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::invalid("dense backward without forward"))?;
        if dy.dim() != cache.z.dim() {
            return Err(Error::shape(format!(
                "dense backward: upstream {:?} vs activations {:?}",
                dy.dim(),
                cache.z.dim()
            )));
        }
        let dz = dy * &cache.z.mapv(|v| self.activation.grad(v));
        self.grad_w += &dz.t().dot(&cache.x);
        self.grad_b += &dz.sum_axis(Axis(0));
        Ok(dz.dot(self.w.as_array()))
    }

    pub fn zero_grads(&mut self) {
        self.grad_w.fill(0.0);
        self.grad_b.fill(0.0);
    }
}
