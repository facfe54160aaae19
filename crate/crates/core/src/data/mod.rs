//! Dataset construction: synthetic time series, colored noise, windowed
//! regression splits, CSV persistence, and the MNIST IDX parser.

pub mod idx;
mod noise;
mod series;
mod windows;

pub use noise::colored_noise;
pub use series::{generate_series, SeriesRecipe};
pub use windows::{
    read_dataset_csv, window_dataset, write_dataset_csv, SplitAssignment, SplitSizes,
    WindowedDataset,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, RngState};

pub const DEFAULT_WINDOW: usize = 50;
pub const DEFAULT_SERIES_LEN: usize = 150;
/// Default signal-to-noise ratio of the noisy synthetic task, in dB.
pub const DEFAULT_SNR_DB: f64 = 10.0;
/// Spectral exponent of the colored noise (power spectral density ~ 1/f^alpha).
pub const DEFAULT_NOISE_ALPHA: f64 = 1.0;

/// Full-scale split sizes; `scale` multiplies these.
pub const FULL_SPLIT: SplitSizes = SplitSizes {
    train: 55_000,
    val: 5_000,
    test: 10_000,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Synthetic,
    SyntheticNoise,
    MnistMlp,
}

impl Task {
    pub fn is_generatable(self) -> bool {
        !matches!(self, Task::MnistMlp)
    }

    pub fn file_stem(self) -> &'static str {
        match self {
            Task::Synthetic => "synthetic",
            Task::SyntheticNoise => "synthetic-noise",
            Task::MnistMlp => "mnist-mlp",
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.file_stem())
    }
}

/// Everything needed to rebuild a synthetic dataset deterministically.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub task: Task,
    pub seed: u64,
    pub scale: f64,
    pub window: usize,
    pub series_len: usize,
    pub snr_db: f64,
    pub noise_alpha: f64,
}

impl SyntheticSpec {
    pub fn new(task: Task, seed: u64, scale: f64) -> Self {
        SyntheticSpec {
            task,
            seed,
            scale,
            window: DEFAULT_WINDOW,
            series_len: DEFAULT_SERIES_LEN,
            snr_db: DEFAULT_SNR_DB,
            noise_alpha: DEFAULT_NOISE_ALPHA,
        }
    }

    pub fn split_sizes(&self) -> Result<SplitSizes> {
        FULL_SPLIT.scaled(self.scale)
    }
}

/// A generated dataset with its sidecar metadata.
#[derive(Clone, Debug)]
pub struct DatasetBundle {
    pub train: WindowedDataset,
    pub val: WindowedDataset,
    pub test: WindowedDataset,
    pub meta: DatasetMeta,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub spec: SyntheticSpec,
    pub sizes: SplitSizes,
    pub num_series: usize,
    pub recipes: Vec<SeriesRecipe>,
    pub assignment: SplitAssignment,
}

/// Builds the windowed synthetic dataset for `spec`. The per-series recipe
/// and noise streams are derived from the spec seed, so the noisy variant is
/// the clean variant plus noise, element-wise.
pub fn generate_dataset(spec: &SyntheticSpec) -> Result<DatasetBundle> {
    if !spec.task.is_generatable() {
        return Err(Error::invalid(format!("task {} is not generatable", spec.task)));
    }
    if spec.series_len < spec.window + 1 {
        return Err(Error::invalid(format!(
            "series length {} must exceed window {}",
            spec.series_len, spec.window
        )));
    }
    let sizes = spec.split_sizes()?;
    let windows_per_series = spec.series_len - spec.window;
    // each split rounds up to whole series; boundary leftovers are discarded
    let num_series = sizes.train.div_ceil(windows_per_series)
        + sizes.val.div_ceil(windows_per_series)
        + sizes.test.div_ceil(windows_per_series);

    let mut recipes = Vec::with_capacity(num_series);
    let mut pool = Vec::with_capacity(num_series);
    for i in 0..num_series {
        let mut recipe_rng = RngState::derive(spec.seed, stream::series_recipe(i));
        let recipe = SeriesRecipe::sample(&mut recipe_rng);
        let mut values = generate_series(&recipe, spec.series_len)?;
        if spec.task == Task::SyntheticNoise {
            let mut noise_rng = RngState::derive(spec.seed, stream::series_noise(i));
            let amplitude = series_std(&values) * 10f64.powf(-spec.snr_db / 20.0);
            let noise = colored_noise(spec.series_len, spec.noise_alpha, amplitude, &mut noise_rng)?;
            for (v, n) in values.iter_mut().zip(&noise) {
                *v += n;
            }
        }
        recipes.push(recipe);
        pool.push(values);
    }

    let mut assembly_rng = RngState::derive(spec.seed, stream::DATASET_ASSEMBLY);
    let (train, val, test, assignment) =
        window_dataset(&pool, spec.window, sizes, &mut assembly_rng)?;
    Ok(DatasetBundle {
        train,
        val,
        test,
        meta: DatasetMeta {
            spec: spec.clone(),
            sizes,
            num_series,
            recipes,
            assignment,
        },
    })
}

fn series_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}
