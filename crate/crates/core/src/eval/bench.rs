use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::geometry::TriMesh;
use crate::trials::{generate_scene, prepare_asset, CollisionMode, SceneConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub scene: SceneConfig,
    /// Requested collision part counts K.
    pub parts: Vec<usize>,
    /// Timed repetitions per K.
    pub runs: usize,
    pub seed: u64,
    pub scene_index: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig {
                asset: "assets/workpiece.obj".into(),
                ..SceneConfig::default()
            },
            parts: vec![1, 5, 10, 20],
            runs: 3,
            seed: 7,
            scene_index: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub requested_parts: usize,
    /// Parts the decomposition actually produced.
    pub parts: usize,
    pub steps: u64,
    pub run_seconds: Vec<f64>,
    pub mean_seconds: f64,
    pub std_seconds: f64,
    /// Median wall time per physics step.
    pub median_step_seconds: f64,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str = "requested_parts,parts,steps,mean_seconds,std_seconds,median_step_seconds";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{:.9}",
            self.requested_parts, self.parts, self.steps, self.mean_seconds, self.std_seconds, self.median_step_seconds
        )
    }
}

/// Times pile generation on one seeded scene for each part count.
///
/// Every K replays the same drop sequence; only the collision geometry
/// differs. Runs on the calling thread.
pub fn timing_benchmark(mesh: &TriMesh, config: &BenchConfig) -> Result<Vec<BenchRow>> {
    if config.runs == 0 || config.parts.is_empty() || config.parts.contains(&0) {
        return Err(EvalError::Config("runs and every part count must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(config.parts.len());
    for &k in &config.parts {
        let asset = prepare_asset(mesh.clone(), k, CollisionMode::Box)?;
        let mut times = Vec::with_capacity(config.runs);
        let mut steps = 0;
        for _ in 0..config.runs {
            let start = Instant::now();
            let scene = generate_scene(&config.scene, &asset, config.seed, config.scene_index)?;
            times.push(start.elapsed().as_secs_f64());
            steps = scene.world.steps();
        }
        let n = times.len() as f64;
        let mean = times.iter().sum::<f64>() / n;
        let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = times.clone();
        sorted.sort_by(f64::total_cmp);
        let median = if sorted.len() % 2 == 1 {
            sorted[sorted.len() / 2]
        } else {
            (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2]) / 2.0
        };
        log::info!("K = {k} ({} parts): {mean:.3} s over {steps} steps", asset.parts);
        rows.push(BenchRow {
            requested_parts: k,
            parts: asset.parts,
            steps,
            run_seconds: times,
            mean_seconds: mean,
            std_seconds: var.sqrt(),
            median_step_seconds: median / steps.max(1) as f64,
        });
    }
    Ok(rows)
}
