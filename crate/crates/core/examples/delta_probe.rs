// scratch: sequence of reinit-event entropy deltas on a skewed matrix
use wmm_core::rng::RngState;
use wmm_core::stats::weight_entropy;
use wmm_core::wmm::{init_bound, weight_reinitialization, WeightMatrix};
use ndarray::Array2;

fn main() {
    for shape in [(64usize, 50usize), (32, 50), (80, 50)] {
        let (rows, cols) = shape;
        let bound = init_bound(cols);
        let mut rng = RngState::from_seed(5);
        let values: Vec<f64> = (0..rows * cols)
            .map(|_| {
                let u = rng.uniform(-1.0, 1.0);
                bound * (0.5 + 0.45 * u * u * u)
            })
            .collect();
        let mut w = WeightMatrix::from_array(Array2::from_shape_vec((rows, cols), values).unwrap()).unwrap();
        let mut h_prev = weight_entropy(w.view(), 64).unwrap();
        println!("shape {rows}x{cols} start H = {h_prev:.4}");
        let mut rng2 = RngState::from_seed(77);
        for ev in 0..15 {
            weight_reinitialization(&mut w.view_mut(), 0.3, 1.0, &mut rng2).unwrap();
            let h = weight_entropy(w.view(), 64).unwrap();
            println!("  event {ev:2}: H {h:.4} delta {:+.5}", h - h_prev);
            h_prev = h;
        }
    }
}
