//! Repeated seeded-noise sweeps at several speeds: detection, precision
//! tables and per-stage timing.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inspect::{
    aggregate_precision, evaluate, run_pipeline, InspectError, PipelineConfig, PrecisionTable,
    SigmaEstimator, SpeedTrials, StageTimings,
};
use crate::io::ReportRow;
use crate::sim::{add_noise, simulate_clean, SceneSpec, SimError};

#[derive(Debug, Error, PartialEq)]
pub enum BenchError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Inspect(#[from] InspectError),
    #[error(
        "bench needs at least one speed and two trials (got {speeds} speeds, {trials} trials)"
    )]
    TooFewRuns { speeds: usize, trials: usize },
}

/// Noise seed of one run, derived from the bench seed, speed index and trial.
pub fn trial_seed(seed: u64, speed_index: usize, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((speed_index as u64) << 32) | trial as u64);
    rng.next_u64()
}

/// Outcome of one noisy sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub speed_mps: f64,
    pub trial: usize,
    pub seed: u64,
    pub events: usize,
    /// Time from the first to the last event of the noise-free sweep.
    pub clean_span_ns: u64,
    pub detection_rate: f64,
    pub false_positives: usize,
    /// Depth per truth hole; `None` when missed.
    pub depths: Vec<Option<f64>>,
    pub true_depths: Vec<f64>,
    pub rows: Vec<ReportRow>,
    /// Mean over detected holes of their window's stage times.
    pub hole_timing: StageTimings,
    pub holes_timed: usize,
    pub pipeline_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingTable {
    pub per_hole: StageTimings,
    /// Stage names, slowest first.
    pub ordering: Vec<String>,
    /// Whether clustering >= IWE >= fit >= depth.
    pub clustering_iwe_fit_depth: bool,
}

impl TimingTable {
    pub fn from_runs(runs: &[RunRecord]) -> Self {
        let n: usize = runs.iter().map(|r| r.holes_timed).sum();
        let mut sum = StageTimings::default();
        for r in runs {
            let k = r.holes_timed as f64;
            sum.iwe_s += r.hole_timing.iwe_s * k;
            sum.sae_s += r.hole_timing.sae_s * k;
            sum.clustering_s += r.hole_timing.clustering_s * k;
            sum.fit_s += r.hole_timing.fit_s * k;
            sum.depth_s += r.hole_timing.depth_s * k;
        }
        let per_hole = if n == 0 {
            sum
        } else {
            sum.scaled(1.0 / n as f64)
        };
        let mut stages = [
            ("iwe", per_hole.iwe_s),
            ("sae", per_hole.sae_s),
            ("clustering", per_hole.clustering_s),
            ("fit", per_hole.fit_s),
            ("depth", per_hole.depth_s),
        ];
        stages.sort_by(|a, b| b.1.total_cmp(&a.1));
        Self {
            per_hole,
            ordering: stages.iter().map(|s| s.0.to_string()).collect(),
            clustering_iwe_fit_depth: per_hole.clustering_s >= per_hole.iwe_s
                && per_hole.iwe_s >= per_hole.fit_s
                && per_hole.fit_s >= per_hole.depth_s,
        }
    }

    pub fn ordering_line(&self) -> String {
        self.ordering.join(" >= ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub seed: u64,
    pub speeds_mps: Vec<f64>,
    pub trials: usize,
    pub min_detection_rate: f64,
    pub mean_detection_rate: f64,
    pub false_positives: usize,
    pub mean_abs_depth_error_mm: f64,
    pub precision_sample: PrecisionTable,
    pub precision_population: PrecisionTable,
    pub timing: TimingTable,
    pub max_hole_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub runs: Vec<RunRecord>,
    pub summary: BenchSummary,
}

impl BenchResult {
    pub fn rows(&self) -> Vec<ReportRow> {
        self.runs
            .iter()
            .flat_map(|r| r.rows.iter().cloned())
            .collect()
    }
}

/// Sweeps `scene` at every speed `trials` times with freshly seeded noise.
/// The clean sweep is simulated once per speed; trials run in parallel and
/// are reported in (speed, trial) order.
pub fn run_bench(
    scene: &SceneSpec,
    speeds: &[f64],
    trials: usize,
    seed: u64,
    config: &PipelineConfig,
) -> Result<BenchResult, BenchError> {
    if speeds.is_empty() || trials < 2 {
        return Err(BenchError::TooFewRuns {
            speeds: speeds.len(),
            trials,
        });
    }
    config.validate()?;
    let mut runs = Vec::with_capacity(speeds.len() * trials);
    for (si, &speed) in speeds.iter().enumerate() {
        let scene = scene.with_speed(speed)?;
        let clean = simulate_clean(&scene, scene.sweep_duration_s(), scene.max_sim_step_s())?;
        let clean_span_ns = match (clean.stream.events.first(), clean.stream.events.last()) {
            (Some(a), Some(b)) => b.t_ns - a.t_ns,
            _ => 0,
        };
        let batch = (0..trials)
            .into_par_iter()
            .map(|trial| -> Result<RunRecord, BenchError> {
                let seed = trial_seed(seed, si, trial);
                let stream = add_noise(&clean, &scene, &scene.noise.with_seed(seed))?;
                let start = std::time::Instant::now();
                let mut report = run_pipeline(&stream, &scene.camera, &scene.twist, config)?;
                let pipeline_s = start.elapsed().as_secs_f64();
                let m = evaluate(&mut report, &clean.truth);
                let depths = m
                    .matched
                    .iter()
                    .map(|i| i.map(|i| report.holes[i].measurement.depth_mm))
                    .collect();
                let timed: Vec<StageTimings> =
                    report.holes.iter().map(|h| h.window_timing).collect();
                let mut hole_timing = StageTimings::default();
                for t in &timed {
                    hole_timing.iwe_s += t.iwe_s;
                    hole_timing.sae_s += t.sae_s;
                    hole_timing.clustering_s += t.clustering_s;
                    hole_timing.fit_s += t.fit_s;
                    hole_timing.depth_s += t.depth_s;
                }
                if !timed.is_empty() {
                    hole_timing = hole_timing.scaled(1.0 / timed.len() as f64);
                }
                Ok(RunRecord {
                    speed_mps: speed,
                    trial,
                    seed,
                    events: stream.len(),
                    clean_span_ns,
                    detection_rate: m.detection_rate,
                    false_positives: m.false_positives,
                    depths,
                    true_depths: clean.truth.holes.iter().map(|h| h.true_depth_mm).collect(),
                    rows: ReportRow::from_report(&report, speed, trial),
                    hole_timing,
                    holes_timed: timed.len(),
                    pipeline_s,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        runs.extend(batch);
    }
    let summary = summarize(&runs, speeds, trials, seed)?;
    Ok(BenchResult { runs, summary })
}

fn summarize(
    runs: &[RunRecord],
    speeds: &[f64],
    trials: usize,
    seed: u64,
) -> Result<BenchSummary, BenchError> {
    let per_speed: Vec<SpeedTrials> = speeds
        .iter()
        .enumerate()
        .map(|(si, &speed_mps)| SpeedTrials {
            speed_mps,
            depths: runs[si * trials..(si + 1) * trials]
                .iter()
                .map(|r| r.depths.clone())
                .collect(),
        })
        .collect();
    let errors: Vec<f64> = runs
        .iter()
        .flat_map(|r| {
            r.depths
                .iter()
                .zip(&r.true_depths)
                .filter_map(|(d, t)| d.map(|d| (d - t).abs()))
        })
        .collect();
    let mean_abs = if errors.is_empty() {
        f64::NAN
    } else {
        errors.iter().sum::<f64>() / errors.len() as f64
    };
    let rates: Vec<f64> = runs.iter().map(|r| r.detection_rate).collect();
    Ok(BenchSummary {
        seed,
        speeds_mps: speeds.to_vec(),
        trials,
        min_detection_rate: rates.iter().copied().fold(f64::INFINITY, f64::min),
        mean_detection_rate: rates.iter().sum::<f64>() / rates.len() as f64,
        false_positives: runs.iter().map(|r| r.false_positives).sum(),
        mean_abs_depth_error_mm: mean_abs,
        precision_sample: aggregate_precision(&per_speed, SigmaEstimator::Sample)?,
        precision_population: aggregate_precision(&per_speed, SigmaEstimator::Population)?,
        timing: TimingTable::from_runs(runs),
        max_hole_time_s: runs
            .iter()
            .filter(|r| r.holes_timed > 0)
            .map(|r| r.hole_timing.total_s())
            .fold(0.0, f64::max),
    })
}

/// Text table shaped like the published precision tables: one row per
/// speed, one column per hole, then the pooled σ_r row and the aggregate.
pub fn format_precision_table(table: &PrecisionTable, hole_labels: &[String]) -> String {
    let mut out = String::from("speed_mps");
    for l in hole_labels {
        out.push_str(&format!(",{l}"));
    }
    out.push('\n');
    let cell = |v: &Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
    for (speed, row) in table.speeds_mps.iter().zip(&table.sigma_d) {
        out.push_str(&format!("{speed}"));
        for v in row {
            out.push(',');
            out.push_str(&cell(v));
        }
        out.push('\n');
    }
    out.push_str("sigma_r");
    for v in &table.sigma_r {
        out.push(',');
        out.push_str(&cell(v));
    }
    out.push_str(&format!("\naggregate,{:.4}\n", table.aggregate));
    out
}

/// Text table shaped like the published stage timing table, in seconds
/// per hole.
pub fn format_timing_table(t: &TimingTable) -> String {
    let p = &t.per_hole;
    format!(
        "stage,seconds\niwe,{:.6}\nsae,{:.6}\nclustering,{:.6}\nfit,{:.6}\ndepth,{:.6}\ntotal,{:.6}\nordering,{}\n",
        p.iwe_s,
        p.sae_s,
        p.clustering_s,
        p.fit_s,
        p.depth_s,
        p.total_s(),
        t.ordering_line()
    )
}
