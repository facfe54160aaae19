use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// d act(z) / d z, evaluated from the pre-activation.
    pub fn grad(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_at_zero_is_half() {
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn grads_match_analytic_forms() {
        for z in [-2.0, -0.5, 0.3, 1.7] {
            let s = sigmoid(z);
            assert!((Activation::Sigmoid.grad(z) - s * (1.0 - s)).abs() < 1e-15);
            let t = f64::tanh(z);
            assert!((Activation::Tanh.grad(z) - (1.0 - t * t)).abs() < 1e-15);
        }
        assert_eq!(Activation::Relu.grad(-1.0), 0.0);
        assert_eq!(Activation::Relu.grad(1.0), 1.0);
        assert_eq!(Activation::Identity.grad(123.0), 1.0);
    }
}
