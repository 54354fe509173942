use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ConfusionMatrix, EvalError, Result};
use crate::geometry::load_mesh;
use crate::grasp::{InputConfig, NetScorer, RecordSource, Scorer};
use crate::nn::{evaluate, train, NetConfig, Network, SampleSource, TrainConfig, TrainReport};
use crate::render::DepthImage;
use crate::trials::{
    collect, generate_scene, load_dataset, prepare_asset, rebuild_scene, run_pick_trial, sample_grasp_pose, scene_rng, CollectConfig,
    CollisionMode, Dataset, GraspPose, Label, PickOutcome, Split, Symmetry, TrialsError,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Collection settings shared by both collision modes; `scene.collision` is overridden.
    pub collect: CollectConfig,
    /// Success target of each of the two collections.
    pub successes: usize,
    pub workers: usize,
    /// Fractions of training records taken from box-collision scenes.
    pub rates: Vec<f64>,
    pub net: NetConfig,
    pub train: TrainConfig,
    pub input: InputConfig,
    pub symmetries: Vec<Symmetry>,
    /// Number of box-only successes to collect as probes.
    pub probe_count: usize,
    /// Scene budget of the probe search.
    pub probe_scenes: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let mut collect = CollectConfig::default();
        collect.scene.asset = "assets/hex_prism.obj".into();
        collect.scene.approx_parts = 1;
        Self {
            collect,
            successes: 300,
            workers: 1,
            rates: vec![0.0, 0.3, 1.0],
            net: NetConfig::desk(),
            train: TrainConfig::default(),
            input: InputConfig::default(),
            symmetries: Symmetry::default_set(),
            probe_count: 40,
            probe_scenes: 400,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rates.is_empty() || self.rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(EvalError::Config("rates must be non-empty and lie in [0, 1]".into()));
        }
        if self.rates.windows(2).any(|w| w[0] > w[1]) {
            return Err(EvalError::Config("rates must be sorted".into()));
        }
        if self.successes == 0 {
            return Err(EvalError::Config("success target must be at least 1".into()));
        }
        if self.probe_count == 0 || self.probe_scenes == 0 {
            return Err(EvalError::Config("probe_count and probe_scenes must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rate: f64,
    pub box_records: usize,
    pub exact_records: usize,
    pub probe_scores: Vec<f64>,
    /// Mean predicted success over the probe grasps.
    pub probe_score: f64,
    /// On the exact-collision verify split.
    pub verify: ConfusionMatrix,
    pub final_train_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub probes: Vec<Probe>,
    pub probe_stats: ProbeStats,
    pub box_manifest_sha256: String,
    pub exact_manifest_sha256: String,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub const CSV_HEADER: &'static str = "rate,box_records,exact_records,probe_score,tp,fp,fn,tn";

    pub fn csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let m = r.verify;
            out.push_str(&format!(
                "{},{},{},{:.6},{},{},{},{}\n",
                r.rate, r.box_records, r.exact_records, r.probe_score, m.tp, m.fp, m.fn_, m.tn
            ));
        }
        out
    }
}

/// Pile grasps that succeed with box collision but fail once the same pile
/// is rebuilt with exact convex hulls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    /// Seed and stream index that regenerate the probe's pile.
    pub seed: u64,
    pub scene: u64,
    pub pose: GraspPose,
}

/// Outcome counts over every labeled probe-candidate grasp.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeStats {
    pub scenes: usize,
    /// Grasps labeled in both collision modes.
    pub trials: usize,
    pub box_successes: usize,
    pub exact_successes: usize,
    pub box_only: usize,
    pub exact_only: usize,
}

#[derive(Debug, Clone)]
pub struct ProbeSetup {
    pub probes: Vec<Probe>,
    /// Depth image of the box-collision pile each probe was sampled on.
    pub images: Vec<DepthImage>,
    pub stats: ProbeStats,
}

const PROBE_SALT: u64 = 0x7072_6f62_6573_0001;

/// Samples grasps on box-collision piles the way collection does, replays
/// each on the pile rebuilt with exact hulls, and keeps the grasps that
/// succeed only with boxes. Stops at `count` probes or after `max_scenes`.
pub fn probe_setup(config: &CollectConfig, count: usize, max_scenes: usize) -> Result<ProbeSetup> {
    let mut box_scene = config.scene.clone();
    box_scene.collision = CollisionMode::Box;
    let mesh = load_mesh(&config.scene.asset)?;
    let box_asset = prepare_asset(mesh.clone(), config.scene.approx_parts, CollisionMode::Box)?;
    let exact_asset = prepare_asset(mesh, config.scene.approx_parts, CollisionMode::ExactConvex)?;
    let seed = config.seed ^ PROBE_SALT;
    let half = [config.scene.tray.size[0] / 2.0, config.scene.tray.size[1] / 2.0];
    let mut setup = ProbeSetup {
        probes: Vec::new(),
        images: Vec::new(),
        stats: ProbeStats::default(),
    };
    for index in 0..max_scenes as u64 {
        if setup.probes.len() >= count {
            break;
        }
        let built = generate_scene(&box_scene, &box_asset, seed, index)
            .and_then(|scene| Ok((rebuild_scene(&scene, &exact_asset, &box_scene)?, scene)));
        let (twin, scene) = match built {
            Ok(pair) => pair,
            Err(TrialsError::NotQuiescent { .. } | TrialsError::Escaped { .. } | TrialsError::Physics(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        setup.stats.scenes += 1;
        let image = scene.render(&box_asset, &config.camera);
        let twin_image = twin.render(&exact_asset, &config.camera);
        let mut rng = scene_rng(seed, index);
        for _ in 0..config.grasps_per_scene {
            let pose = sample_grasp_pose(&image, &config.trial, half, &mut rng);
            let a = run_pick_trial(&scene, &image, &pose, &config.trial)?;
            let b = run_pick_trial(&twin, &twin_image, &pose, &config.trial)?;
            let (PickOutcome::Labeled(a), PickOutcome::Labeled(b)) = (a, b) else {
                continue;
            };
            let (a, b) = (a == Label::Success, b == Label::Success);
            let st = &mut setup.stats;
            st.trials += 1;
            st.box_successes += a as usize;
            st.exact_successes += b as usize;
            st.box_only += (a && !b) as usize;
            st.exact_only += (!a && b) as usize;
            if a && !b && setup.probes.len() < count {
                setup.probes.push(Probe { seed, scene: index, pose });
                setup.images.push(image.clone());
            }
        }
    }
    if setup.probes.is_empty() {
        return Err(EvalError::InsufficientData(format!(
            "no grasp succeeded only with box collision in {} scenes",
            setup.stats.scenes
        )));
    }
    Ok(setup)
}

/// Trains a fresh network on `train_items` expanded by `symmetries`.
pub fn train_on_records(
    train_items: Vec<(DepthImage, GraspPose, Label)>,
    verify_items: Vec<(DepthImage, GraspPose, Label)>,
    net: &NetConfig,
    config: &TrainConfig,
    input: &InputConfig,
    symmetries: &[Symmetry],
) -> Result<(Network<f32>, TrainReport)> {
    let train_set = RecordSource::new(train_items, symmetries.to_vec(), input.clone())?;
    let verify_set = RecordSource::new(verify_items, vec![Symmetry::IDENTITY], input.clone())?;
    let mut network = Network::<f32>::new(net.clone(), config.seed)?;
    let verify = (!verify_set.is_empty()).then_some(&verify_set as &dyn SampleSource);
    let report = train(&mut network, &train_set, verify, config)?;
    Ok((network, report))
}

fn items(dataset: &Dataset, split: Split) -> Result<Vec<(DepthImage, GraspPose, Label)>> {
    dataset
        .split(split)
        .map(|r| Ok((dataset.image(r)?, r.pose, r.label)))
        .collect()
}

/// Collects a box-collision and an exact-collision dataset, then for every
/// rate trains a network on a mixture and scores the probe grasps.
pub fn approx_effect_experiment(config: &SweepConfig, out: &Path) -> Result<SweepReport> {
    config.validate()?;
    let mut hashes = Vec::new();
    let mut sets = Vec::new();
    for (mode, name) in [(CollisionMode::Box, "box"), (CollisionMode::ExactConvex, "exact")] {
        let mut c = config.collect.clone();
        c.scene.collision = mode;
        let dir = out.join(name);
        let summary = collect(&c, config.successes, config.workers, &dir)?;
        log::info!("{name} dataset: {} records", summary.records);
        hashes.push(summary.manifest_sha256);
        sets.push(load_dataset(&dir)?);
    }
    let (box_set, exact_set) = (&sets[0], &sets[1]);
    let box_train = items(box_set, Split::Train)?;
    let exact_train = items(exact_set, Split::Train)?;
    let verify = items(exact_set, Split::Verify)?;

    let probe = probe_setup(&config.collect, config.probe_count, config.probe_scenes)?;
    log::info!("{} probes from {:?}", probe.probes.len(), probe.stats);

    let mut rows = Vec::new();
    for &rate in &config.rates {
        let mut mix = Vec::new();
        let (mut n_box, mut n_exact) = (0, 0);
        for label in [Label::Success, Label::Failure] {
            let b: Vec<_> = box_train.iter().filter(|i| i.2 == label).collect();
            let e: Vec<_> = exact_train.iter().filter(|i| i.2 == label).collect();
            let m = b.len().min(e.len());
            if m == 0 {
                return Err(EvalError::InsufficientData(format!("no {label:?} training records in one of the datasets")));
            }
            let k = (rate * m as f64).round() as usize;
            mix.extend(b[..k].iter().map(|&i| i.clone()));
            mix.extend(e[..m - k].iter().map(|&i| i.clone()));
            n_box += k;
            n_exact += m - k;
        }
        let (net, report) = train_on_records(mix, verify.clone(), &config.net, &config.train, &config.input, &config.symmetries)?;
        let scorer = NetScorer {
            net: &net,
            input: config.input.clone(),
        };
        let probe_scores = probe
            .probes
            .iter()
            .zip(&probe.images)
            .map(|(p, image)| Ok(scorer.score(image, &p.pose)?))
            .collect::<Result<Vec<f64>>>()?;
        let probe_score = probe_scores.iter().sum::<f64>() / probe_scores.len() as f64;
        let verify_source = RecordSource::new(verify.clone(), vec![Symmetry::IDENTITY], config.input.clone())?;
        let (_, cells) = evaluate(&net, &verify_source)?;
        log::info!("rate {rate}: probe score {probe_score:.4}");
        rows.push(SweepRow {
            rate,
            box_records: n_box,
            exact_records: n_exact,
            probe_scores,
            probe_score,
            verify: ConfusionMatrix::from_cells(cells),
            final_train_loss: report.epochs.last().map_or(f64::NAN, |e| e.train_loss),
        });
    }
    Ok(SweepReport {
        probes: probe.probes,
        probe_stats: probe.stats,
        box_manifest_sha256: hashes[0].clone(),
        exact_manifest_sha256: hashes[1].clone(),
        rows,
    })
}
