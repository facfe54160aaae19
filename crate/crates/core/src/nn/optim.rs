use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// One flattened parameter tensor with its gradient. Slots are presented to
/// the optimizer in a fixed order every step.
pub struct ParamSlot<'a> {
    pub values: &'a mut [f64],
    pub grads: &'a mut [f64],
    pub is_bias: bool,
}

/// SGD or Adam over a fixed parameter layout. Adam keeps per-slot moment
/// estimates addressed by slot position; weight mutations from outside the
/// optimizer (e.g. a WMM application) never touch them.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    t: u64,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Optimizer {
            kind,
            lr,
            t: 0,
            moments: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut [ParamSlot<'_>]) {
        match self.kind {
            OptimizerKind::Sgd => {
                for slot in params.iter_mut() {
                    for (w, g) in slot.values.iter_mut().zip(slot.grads.iter()) {
                        *w -= self.lr * g;
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.moments.is_empty() {
                    self.moments = params
                        .iter()
                        .map(|s| (vec![0.0; s.values.len()], vec![0.0; s.values.len()]))
                        .collect();
                }
                self.t += 1;
                let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
                let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
                for (slot, (m, v)) in params.iter_mut().zip(self.moments.iter_mut()) {
                    for k in 0..slot.values.len() {
                        let g = slot.grads[k];
                        m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * g;
                        v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * g * g;
                        let mhat = m[k] / bc1;
                        let vhat = v[k] / bc2;
                        slot.values[k] -= self.lr * mhat / (vhat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}

/// Scales every gradient so the global L2 norm does not exceed `max_norm`.
pub fn clip_global_norm(params: &mut [ParamSlot<'_>], max_norm: f64) {
    let norm_sq: f64 = params
        .iter()
        .map(|s| s.grads.iter().map(|g| g * g).sum::<f64>())
        .sum();
    let norm = norm_sq.sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for slot in params.iter_mut() {
            for g in slot.grads.iter_mut() {
                *g *= scale;
            }
        }
    }
}

/// Adds the L2 penalty gradient `lambda * w` to weight slots (biases excluded).
pub fn apply_l2(params: &mut [ParamSlot<'_>], lambda: f64) {
    if lambda == 0.0 {
        return;
    }
    for slot in params.iter_mut() {
        if slot.is_bias {
            continue;
        }
        for (g, w) in slot.grads.iter_mut().zip(slot.values.iter()) {
            *g += lambda * w;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slot<'a>(values: &'a mut [f64], grads: &'a mut [f64]) -> ParamSlot<'a> {
        ParamSlot {
            values,
            grads,
            is_bias: false,
        }
    }

    #[test]
    fn sgd_moves_against_gradient() {
        let mut w = [1.0, -1.0];
        let mut g = [0.5, -0.5];
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1);
        opt.step(&mut [slot(&mut w, &mut g)]);
        assert!((w[0] - 0.95).abs() < 1e-15);
        assert!((w[1] + 0.95).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_size_is_lr() {
        // with bias correction the first update magnitude is ~lr regardless of g
        let mut w = [0.0];
        let mut g = [3.0];
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01);
        opt.step(&mut [slot(&mut w, &mut g)]);
        assert!((w[0] + 0.01).abs() < 1e-6, "w {w:?}");
    }

    #[test]
    fn adam_moments_survive_external_weight_mutation() {
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01);
        let mut w = [0.0, 0.0];
        for _ in 0..3 {
            let mut g = [1.0, -1.0];
            opt.step(&mut [slot(&mut w, &mut g)]);
        }
        let m_before = opt.moments.clone();
        w = [99.0, -99.0]; // external mutation, optimizer state untouched
        assert_eq!(opt.moments, m_before);
        let mut g = [1.0, -1.0];
        opt.step(&mut [slot(&mut w, &mut g)]);
        assert!(w[0] < 99.0 && w[1] > -99.0);
    }

    #[test]
    fn clip_rescales_only_above_threshold() {
        let mut w = [0.0; 2];
        let mut g = [3.0, 4.0]; // norm 5
        clip_global_norm(&mut [slot(&mut w, &mut g)], 5.0);
        assert_eq!(g, [3.0, 4.0]);
        clip_global_norm(&mut [slot(&mut w, &mut g)], 2.5);
        assert!((g[0] - 1.5).abs() < 1e-15 && (g[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn l2_skips_biases() {
        let mut w = [2.0];
        let mut gw = [0.0];
        let mut b = [2.0];
        let mut gb = [0.0];
        let mut slots = [
            ParamSlot {
                values: &mut w,
                grads: &mut gw,
                is_bias: false,
            },
            ParamSlot {
                values: &mut b,
                grads: &mut gb,
                is_bias: true,
            },
        ];
        apply_l2(&mut slots, 0.1);
        assert!((gw[0] - 0.2).abs() < 1e-15);
        assert_eq!(gb[0], 0.0);
    }
}
