//! Resampling with replacement, expressed as integer case weights.
//!
//! Replicate `i` draws from its own ChaCha8 stream (`seed`, stream `i`), so
//! results depend only on `(seed, n_boot)` and never on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_N_BOOT: usize = 5000;
/// Redraws allowed for a replicate on which the metric is undefined.
pub const MAX_REDRAWS: usize = 100;
/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "CADEVAL_THREADS";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleUnit {
    #[default]
    Patient,
    Scan,
    Nodule,
}

impl std::str::FromStr for ResampleUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "patient" => Ok(ResampleUnit::Patient),
            "scan" => Ok(ResampleUnit::Scan),
            "nodule" => Ok(ResampleUnit::Nodule),
            _ => Err(format!("unit must be patient, scan or nodule, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BootstrapConfig {
    pub n_boot: usize,
    pub seed: u64,
    /// Worker threads; `None` reads [`THREADS_ENV`], then uses rayon's default.
    pub threads: Option<usize>,
}

impl BootstrapConfig {
    pub fn new(n_boot: usize, seed: u64) -> Self {
        BootstrapConfig {
            n_boot,
            seed,
            threads: None,
        }
    }

    pub fn threads(mut self, n: usize) -> Self {
        self.threads = Some(n);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// One value per replicate; NaN where the metric stayed undefined.
    pub replicates: Vec<f64>,
    /// Metric on the full sample.
    pub estimate: f64,
    /// Mean of the defined replicates.
    pub mean: f64,
    pub ci95: (f64, f64),
    pub n_boot: usize,
    pub seed: u64,
    /// Replicates still undefined after [`MAX_REDRAWS`] redraws.
    pub n_skipped: usize,
    /// Total redraws performed.
    pub n_redrawn: usize,
}

/// Percentile of sorted data, linear between order statistics.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize(
    estimate: f64,
    replicates: Vec<f64>,
    cfg: &BootstrapConfig,
    n_skipped: usize,
    n_redrawn: usize,
) -> BootstrapResult {
    let mut finite: Vec<f64> = replicates.iter().copied().filter(|v| !v.is_nan()).collect();
    finite.sort_by(f64::total_cmp);
    let (mean, ci95) = if finite.is_empty() {
        (f64::NAN, (f64::NAN, f64::NAN))
    } else {
        let mean = finite.iter().sum::<f64>() / finite.len() as f64;
        (mean, (percentile(&finite, 0.025), percentile(&finite, 0.975)))
    };
    BootstrapResult {
        replicates,
        estimate,
        mean,
        ci95,
        n_boot: cfg.n_boot,
        seed: cfg.seed,
        n_skipped,
        n_redrawn,
    }
}

/// Thread count from the argument, then the environment.
pub fn thread_count(explicit: Option<usize>) -> Option<usize> {
    explicit
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()))
        .filter(|&n| n > 0)
}

fn run_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match thread_count(threads) {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
        None => Ok(job()),
    }
}

/// Multiplicities of `n` units drawn with replacement.
pub fn draw_weights(rng: &mut ChaCha8Rng, n: usize, weights: &mut [u32]) {
    weights.fill(0);
    for _ in 0..n {
        weights[rng.gen_range(0..n)] += 1;
    }
}

/// Bootstrap of several metrics evaluated on the same resamples.
///
/// `metric` receives one multiplicity per unit and returns one value per
/// metric, or `None` when any of them is undefined on that resample.
pub fn bootstrap_many<F>(n_units: usize, k: usize, cfg: &BootstrapConfig, metric: F) -> Result<Vec<BootstrapResult>>
where
    F: Fn(&[u32]) -> Option<Vec<f64>> + Sync,
{
    if n_units == 0 {
        return Err(Error::Empty("nothing to resample"));
    }
    let full = metric(&vec![1; n_units]).ok_or(Error::MetricUndefined)?;
    if full.len() != k {
        return Err(Error::invalid(format!(
            "metric returned {} values, expected {k}",
            full.len()
        )));
    }
    let seed = cfg.seed;
    let one = |i: usize| -> (Option<Vec<f64>>, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut w = vec![0u32; n_units];
        for attempt in 0..=MAX_REDRAWS {
            draw_weights(&mut rng, n_units, &mut w);
            if let Some(v) = metric(&w) {
                return (Some(v), attempt);
            }
        }
        (None, MAX_REDRAWS)
    };
    let outcomes: Vec<(Option<Vec<f64>>, usize)> =
        run_pool(cfg.threads, || (0..cfg.n_boot).into_par_iter().map(one).collect())?;

    let n_skipped = outcomes.iter().filter(|o| o.0.is_none()).count();
    let n_redrawn = outcomes.iter().map(|o| o.1).sum();
    Ok((0..k)
        .map(|m| {
            let reps = outcomes
                .iter()
                .map(|o| o.0.as_ref().map_or(f64::NAN, |v| v[m]))
                .collect();
            summarize(full[m], reps, cfg, n_skipped, n_redrawn)
        })
        .collect())
}

/// Bootstrap of one metric over `n_units` resampling units.
pub fn bootstrap<F>(n_units: usize, cfg: &BootstrapConfig, metric: F) -> Result<BootstrapResult>
where
    F: Fn(&[u32]) -> Option<f64> + Sync,
{
    let mut r = bootstrap_many(n_units, 1, cfg, |w| metric(w).map(|v| vec![v]))?;
    Ok(r.remove(0))
}

/// Repeat every item by its multiplicity, for metrics that want a plain
/// resampled list.
pub fn expand<T: Clone>(items: &[T], weights: &[u32]) -> Vec<T> {
    items
        .iter()
        .zip(weights)
        .flat_map(|(x, &w)| std::iter::repeat_n(x, w as usize).cloned())
        .collect()
}
