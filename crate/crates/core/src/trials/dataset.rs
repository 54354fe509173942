use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    generate_scene, io_err, run_pick_trial, sample_grasp_pose, scene_rng, Asset, CollisionMode, GraspPose, Label, PickOutcome, Result,
    SceneConfig, TrialParams, TrialsError,
};
use crate::render::{CameraConfig, DepthImage};

/// Stream indices above this are reserved for dataset-level draws.
const SELECT_STREAM: u64 = u64::MAX;
const SPLIT_STREAM: u64 = u64::MAX - 1;
/// Grasp poses draw from a second family of streams, separate from the drops.
const GRASP_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectConfig {
    pub seed: u64,
    pub scene: SceneConfig,
    pub trial: TrialParams,
    pub camera: CameraConfig,
    /// Grasps tried on copies of each settled pile.
    pub grasps_per_scene: usize,
    /// Scenes simulated between progress checks.
    pub batch_scenes: usize,
    /// Scene budget; collection stops with a partial dataset once spent.
    pub max_scenes: usize,
    pub train_fraction: f64,
}

impl Default for CollectConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            scene: SceneConfig::default(),
            trial: TrialParams::default(),
            camera: CameraConfig::default(),
            grasps_per_scene: 4,
            batch_scenes: 16,
            max_scenes: 100_000,
            train_fraction: 0.9,
        }
    }
}

impl CollectConfig {
    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.trial.validate()?;
        self.camera.validate()?;
        if self.grasps_per_scene == 0 || self.batch_scenes == 0 {
            return Err(TrialsError::Config("grasps_per_scene and batch_scenes must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.train_fraction) {
            return Err(TrialsError::Config("train_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Verify,
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// Global trial index (scene index × grasps per scene + grasp).
    pub trial: u64,
    pub scene: u64,
    pub seed: u64,
    pub asset: String,
    /// Collision part count K.
    pub parts: usize,
    pub collision: CollisionMode,
    pub pose: GraspPose,
    pub label: Label,
    pub split: Split,
    /// Depth blob path relative to the dataset directory.
    pub blob: String,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub camera: CameraConfig,
    pub records: Vec<TrialRecord>,
}

impl Dataset {
    pub fn image(&self, record: &TrialRecord) -> Result<DepthImage> {
        let path = self.dir.join(&record.blob);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        Ok(DepthImage::from_le_bytes(&self.camera, &bytes)?)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &TrialRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectSummary {
    pub scenes: u64,
    pub scenes_rejected: u64,
    pub trials: u64,
    pub successes_seen: u64,
    pub failures_seen: u64,
    pub discarded: u64,
    pub records: usize,
    /// True when the scene budget ran out before the target was met.
    pub partial: bool,
    /// SHA-256 of manifest.jsonl, hex.
    pub manifest_sha256: String,
}

struct SceneResult {
    image: Option<DepthImage>,
    trials: Vec<(u64, GraspPose, PickOutcome)>,
}

fn run_scene(config: &CollectConfig, asset: &Asset, index: u64) -> Result<SceneResult> {
    let scene = match generate_scene(&config.scene, asset, config.seed, index) {
        Ok(s) => s,
        Err(TrialsError::NotQuiescent { .. } | TrialsError::Escaped { .. } | TrialsError::Physics(_)) => {
            log::debug!("scene {index} rejected");
            return Ok(SceneResult {
                image: None,
                trials: Vec::new(),
            });
        }
        Err(e) => return Err(e),
    };
    let image = scene.render(asset, &config.camera);
    let mut rng = scene_rng(config.seed ^ GRASP_SALT, index);
    let half = [config.scene.tray.size[0] / 2.0, config.scene.tray.size[1] / 2.0];
    let mut trials = Vec::with_capacity(config.grasps_per_scene);
    for g in 0..config.grasps_per_scene as u64 {
        let pose = sample_grasp_pose(&image, &config.trial, half, &mut rng);
        let outcome = run_pick_trial(&scene, &image, &pose, &config.trial)?;
        trials.push((index * config.grasps_per_scene as u64 + g, pose, outcome));
    }
    Ok(SceneResult {
        image: Some(image),
        trials,
    })
}

/// Runs pick trials until `successes` successes and as many failures exist,
/// balances the labels, splits train/verify per label, and writes the dataset.
pub fn collect(config: &CollectConfig, successes: usize, workers: usize, out: &Path) -> Result<CollectSummary> {
    config.validate()?;
    if successes == 0 {
        return Err(TrialsError::Config("success target must be at least 1".into()));
    }
    let asset = config.scene.load_asset()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| TrialsError::Config(e.to_string()))?;

    let mut images: HashMap<u64, DepthImage> = HashMap::new();
    let mut kept: Vec<(u64, u64, GraspPose, Label)> = Vec::new();
    let (mut n_ok, mut n_fail, mut discarded, mut rejected) = (0usize, 0usize, 0u64, 0u64);
    let mut next = 0u64;
    let partial = loop {
        if n_ok >= successes && n_fail >= successes {
            break false;
        }
        if next >= config.max_scenes as u64 {
            log::warn!("scene budget of {} spent with {n_ok} successes and {n_fail} failures", config.max_scenes);
            break true;
        }
        let end = (next + config.batch_scenes as u64).min(config.max_scenes as u64);
        let batch: Vec<SceneResult> =
            pool.install(|| (next..end).into_par_iter().map(|i| run_scene(config, &asset, i)).collect::<Result<Vec<_>>>())?;
        for (i, result) in (next..end).zip(batch) {
            let Some(image) = result.image else {
                rejected += 1;
                continue;
            };
            let mut used = false;
            for (trial, pose, outcome) in result.trials {
                match outcome {
                    PickOutcome::Labeled(label) => {
                        match label {
                            Label::Success => n_ok += 1,
                            Label::Failure => n_fail += 1,
                        }
                        kept.push((trial, i, pose, label));
                        used = true;
                    }
                    PickOutcome::Discarded(why) => {
                        log::trace!("trial {trial} discarded: {why}");
                        discarded += 1;
                    }
                }
            }
            if used {
                images.insert(i, image);
            }
        }
        next = end;
        log::info!("{next} scenes: {n_ok} successes, {n_fail} failures, {discarded} discarded");
    };

    // cut at the trial where both targets were first met, so the result does
    // not depend on how far the last batch overshot
    let mut cut = kept.len();
    let (mut s, mut f) = (0, 0);
    for (k, rec) in kept.iter().enumerate() {
        match rec.3 {
            Label::Success => s += 1,
            Label::Failure => f += 1,
        }
        if s >= successes && f >= successes {
            cut = k + 1;
            break;
        }
    }
    let labeled = kept.len() as u64;
    let kept = &kept[..cut];
    let per_label = successes.min(s).min(f);
    let ok: Vec<usize> = (0..kept.len()).filter(|&k| kept[k].3 == Label::Success).collect();
    let fail: Vec<usize> = (0..kept.len()).filter(|&k| kept[k].3 == Label::Failure).collect();
    let mut rng = scene_rng(config.seed, SELECT_STREAM);
    let mut chosen: Vec<usize> = ok[..per_label].to_vec();
    chosen.extend(fail.choose_multiple(&mut rng, per_label).copied());
    chosen.sort_unstable();

    let selected: Vec<(u64, u64, GraspPose, Label)> = chosen.iter().map(|&k| kept[k]).collect();
    let labels: Vec<Label> = selected.iter().map(|r| r.3).collect();
    let splits = split_stratified(&labels, config.train_fraction, &mut scene_rng(config.seed, SPLIT_STREAM));

    fs::create_dir_all(out.join("blobs")).map_err(io_err(out))?;
    let config_path = out.join("config.json");
    let text = serde_json::to_string_pretty(config).map_err(|e| TrialsError::Format(e.to_string()))?;
    fs::write(&config_path, text).map_err(io_err(&config_path))?;

    let mut manifest = Vec::new();
    for (n, ((trial, scene, pose, label), split)) in selected.iter().zip(&splits).enumerate() {
        let blob = format!("blobs/{n:06}.f32");
        let image = &images[scene];
        let path = out.join(&blob);
        fs::write(&path, image.to_le_bytes()).map_err(io_err(&path))?;
        let record = TrialRecord {
            trial: *trial,
            scene: *scene,
            seed: config.seed,
            asset: asset.name.clone(),
            parts: asset.parts,
            collision: config.scene.collision,
            pose: *pose,
            label: *label,
            split: *split,
            blob,
        };
        serde_json::to_writer(&mut manifest, &record).map_err(|e| TrialsError::Format(e.to_string()))?;
        manifest.push(b'\n');
    }
    let manifest_path = out.join("manifest.jsonl");
    fs::File::create(&manifest_path)
        .and_then(|mut f| f.write_all(&manifest))
        .map_err(io_err(&manifest_path))?;

    Ok(CollectSummary {
        scenes: next,
        scenes_rejected: rejected,
        trials: labeled + discarded,
        successes_seen: n_ok as u64,
        failures_seen: n_fail as u64,
        discarded,
        records: selected.len(),
        partial,
        manifest_sha256: hex(&Sha256::digest(&manifest)),
    })
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Assigns `round(train_fraction · n)` records of each label to training,
/// chosen by a seeded shuffle.
pub fn split_stratified(labels: &[Label], train_fraction: f64, rng: &mut impl rand::Rng) -> Vec<Split> {
    let mut out = vec![Split::Verify; labels.len()];
    for label in [Label::Success, Label::Failure] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        idx.shuffle(rng);
        let n_train = (train_fraction * idx.len() as f64).round() as usize;
        for &i in &idx[..n_train] {
            out[i] = Split::Train;
        }
    }
    out
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let config_path = dir.join("config.json");
    let text = fs::read_to_string(&config_path).map_err(io_err(&config_path))?;
    let config: CollectConfig = serde_json::from_str(&text).map_err(|e| TrialsError::Format(format!("config.json: {e}")))?;
    let manifest_path = dir.join("manifest.jsonl");
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let mut records = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let r: TrialRecord =
            serde_json::from_str(line).map_err(|e| TrialsError::Format(format!("manifest line {}: {e}", n + 1)))?;
        if !dir.join(&r.blob).is_file() {
            return Err(TrialsError::Format(format!("manifest line {} references missing blob {}", n + 1, r.blob)));
        }
        records.push(r);
    }
    Ok(Dataset {
        dir: dir.to_path_buf(),
        camera: config.camera,
        records,
    })
}
