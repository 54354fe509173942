use std::f64::consts::PI;

use binpick::grasp::*;
use binpick::nn::{NetConfig, Network};
use binpick::physics::TrayConfig;
use binpick::render::{render_gripper_segment, CameraConfig, DepthImage};
use binpick::trials::{GraspPose, Label, Symmetry};
use proptest::prelude::*;

struct Constant(f64);

impl Scorer for Constant {
    fn score(&self, _: &DepthImage, _: &GraspPose) -> Result<f64> {
        Ok(self.0)
    }
}

/// Deterministic pseudo-random score per pose.
struct Hashed(u64);

impl Scorer for Hashed {
    fn score(&self, _: &DepthImage, p: &GraspPose) -> Result<f64> {
        let mut h = self.0 ^ p.x.to_bits().rotate_left(17) ^ p.y.to_bits().rotate_left(31) ^ p.theta.to_bits();
        h ^= h >> 33;
        h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
        h ^= h >> 33;
        Ok((h >> 11) as f64 / (1u64 << 53) as f64)
    }
}

fn empty_image() -> DepthImage {
    let cam = CameraConfig::default();
    DepthImage::filled(cam.grid(), cam.sensor_height, cam.floor_depth())
}

#[test]
fn default_scan_has_288_candidates() {
    let cam = CameraConfig::default();
    let c = enumerate_candidates(&cam.grid(), &TrayConfig::default(), &ScanConfig::default()).unwrap();
    assert_eq!(c.len(), 288);
    assert_eq!(ScanConfig::default().candidate_count(), 288);
    assert!(c.iter().enumerate().all(|(i, k)| k.index == i && k.score.is_none()));
}

#[test]
fn single_window_sits_at_the_image_center() {
    let cam = CameraConfig::default();
    let cfg = ScanConfig {
        grid: 1,
        ..ScanConfig::default()
    };
    let c = enumerate_candidates(&cam.grid(), &TrayConfig::default(), &cfg).unwrap();
    assert_eq!(c.len(), 8);
    for k in &c {
        assert!((k.pose.x - cam.center[0]).abs() < 1e-12 && (k.pose.y - cam.center[1]).abs() < 1e-12);
        assert_eq!((k.row, k.col), (64.0, 64.0));
    }
    let thetas: Vec<f64> = c.iter().map(|k| k.pose.theta).collect();
    for (o, t) in thetas.iter().enumerate() {
        assert!((t - o as f64 * PI / 8.0).abs() < 1e-12);
    }
}

#[test]
fn candidates_are_row_major_then_orientation() {
    let cam = CameraConfig::default();
    let c = enumerate_candidates(&cam.grid(), &TrayConfig::default(), &ScanConfig::default()).unwrap();
    for (i, k) in c.iter().enumerate() {
        assert_eq!(k.orientation, i % 8);
        let cell = i / 8;
        assert_eq!(k.row, c[(cell / 6) * 48].row);
        assert_eq!(k.col, c[(cell % 6) * 8].col);
    }
    // centers keep half a window from the tray edge: [32, 96] split into 6 cells
    let cols: Vec<f64> = (0..6).map(|j| c[j * 8].col).collect();
    let expected: Vec<f64> = (0..6).map(|j| 32.0 + (j as f64 + 0.5) * 64.0 / 6.0).collect();
    for (a, b) in cols.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn oversized_window_is_rejected() {
    let cam = CameraConfig::default();
    let cfg = ScanConfig {
        window: 200,
        ..ScanConfig::default()
    };
    assert!(matches!(enumerate_candidates(&cam.grid(), &TrayConfig::default(), &cfg), Err(GraspError::Config(_))));
}

#[test]
fn verdict_is_strictly_above_one_half() {
    assert!(verdict(0.51));
    assert!(!verdict(0.5));
    assert!(!verdict(0.1));
}

#[test]
fn zero_weight_net_gives_failure_verdict() {
    let mut net = Network::<f32>::new(NetConfig::desk(), 1).unwrap();
    for p in &mut net.params {
        p.data.iter_mut().for_each(|v| *v = 0.0);
    }
    let scorer = NetScorer {
        net: &net,
        input: InputConfig::default(),
    };
    let (y0, ok) = discriminate(&scorer, &empty_image(), &GraspPose::new(0.0, 0.0, 0.3, 0.05)).unwrap();
    assert_eq!(y0, 0.5);
    assert!(!ok);
}

#[test]
fn out_of_image_pose_is_an_error() {
    let net = Network::<f32>::new(NetConfig::desk(), 1).unwrap();
    let scorer = NetScorer {
        net: &net,
        input: InputConfig::default(),
    };
    let r = discriminate(&scorer, &empty_image(), &GraspPose::new(0.5, 0.0, 0.0, 0.05));
    assert!(matches!(r, Err(GraspError::OutOfBounds { .. })));
}

#[test]
fn crop_must_match_the_network() {
    let net = Network::<f32>::new(NetConfig::desk(), 1).unwrap();
    let scorer = NetScorer {
        net: &net,
        input: InputConfig {
            crop: 32,
            ..InputConfig::default()
        },
    };
    assert!(matches!(scorer.score(&empty_image(), &GraspPose::new(0.0, 0.0, 0.0, 0.05)), Err(GraspError::Config(_))));
}

#[test]
fn encoded_segment_is_centered_in_the_crop() {
    let image = empty_image();
    let (depth, grip) = encode_input(&image, &GraspPose::new(0.0, 0.0, 0.0, 0.05), &InputConfig::default()).unwrap();
    assert_eq!(depth.len(), 64 * 64);
    assert!(depth.iter().all(|&v| v == 0.0));
    let rows: Vec<usize> = (0..64).filter(|r| (0..64).any(|c| grip[r * 64 + c] == 1.0)).collect();
    assert_eq!(rows, [31, 32, 33]);
    let len = (0..64).filter(|c| grip[32 * 64 + c] == 1.0).count();
    assert_eq!(len, (0.05 / (0.2 / 128.0) as f64).round() as usize);
}

#[test]
fn equal_scores_pick_the_first_candidate() {
    let cam = CameraConfig::default();
    let cfg = ScanConfig::default();
    let c = enumerate_candidates(&cam.grid(), &TrayConfig::default(), &cfg).unwrap();
    let r = find_best_grasp(&Constant(0.95), &empty_image(), c, &cfg).unwrap();
    assert_eq!(r.best, 0);
    assert_eq!(r.good.len(), 288);
    assert!(r.best_succeeds);
    let c = enumerate_candidates(&cam.grid(), &TrayConfig::default(), &cfg).unwrap();
    let r = find_best_grasp(&Constant(0.5), &empty_image(), c, &cfg).unwrap();
    assert!(r.good.is_empty() && !r.best_succeeds);
}

#[test]
fn best_is_the_brute_force_maximum_regardless_of_threads() {
    let cam = CameraConfig::default();
    let cfg = ScanConfig::default();
    let image = empty_image();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let c = enumerate_candidates(&cam.grid(), &TrayConfig::default(), &cfg).unwrap();
            find_best_grasp(&Hashed(5), &image, c, &cfg).unwrap()
        })
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a, b);
    let scores = a.scores();
    let max = scores.iter().cloned().fold(f64::MIN, f64::max);
    assert_eq!(scores[a.best], max);
    assert_eq!(scores.iter().position(|&s| s == max), Some(a.best));
    let good: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] > 0.9).collect();
    assert_eq!(a.good, good);
}

#[test]
fn overlays_mark_best_and_good() {
    let cam = CameraConfig::default();
    let cfg = ScanConfig::default();
    let image = empty_image();
    let c = enumerate_candidates(&cam.grid(), &TrayConfig::default(), &cfg).unwrap();
    let r = find_best_grasp(&Hashed(1), &image, c, &cfg).unwrap();
    let rgb = overlay_rgb(&image, &r, 0.08).unwrap();
    assert_eq!(rgb.len(), 128 * 128);
    let b = r.best().pose;
    let seg = render_gripper_segment(b.x, b.y, b.theta, b.opening, 1, &image.grid).unwrap();
    let red: Vec<usize> = (0..rgb.len()).filter(|&i| rgb[i] == [255, 0, 0]).collect();
    let lit: Vec<usize> = (0..seg.values.len()).filter(|&i| seg.values[i] != 0).collect();
    assert_eq!(red, lit);
    let red = red.len();
    assert_eq!(rgb.iter().any(|p| *p == [255, 255, 0]), !r.good.is_empty());
    let gray = overlay_gray(&image, &r, 0.08).unwrap();
    assert_eq!(gray.iter().filter(|&&v| v == 255).count(), red);
}

#[test]
fn record_source_expands_by_symmetries() {
    let image = empty_image();
    let items = vec![
        (image.clone(), GraspPose::new(0.01, 0.02, 0.3, 0.05), Label::Success),
        (image.clone(), GraspPose::new(-0.03, 0.0, 1.0, 0.05), Label::Failure),
    ];
    let src = RecordSource::new(items, Symmetry::default_set(), InputConfig::default()).unwrap();
    use binpick::nn::SampleSource;
    assert_eq!(src.len(), 12);
    assert_eq!(src.records(), 2);
    for i in 0..12 {
        let s = src.sample(i);
        assert_eq!(s.label, if i < 6 { 0 } else { 1 });
        assert_eq!(s.depth.len(), 4096);
        assert!(s.gripper.iter().any(|&v| v == 1.0));
    }
    let bad = vec![(image, GraspPose::new(0.3, 0.0, 0.0, 0.05), Label::Success)];
    assert!(RecordSource::new(bad, vec![Symmetry::IDENTITY], InputConfig::default()).is_err());
}

proptest! {
    #[test]
    fn candidate_count_is_orientations_times_grid_squared(n in 1usize..8, o in 1usize..12) {
        let cam = CameraConfig::default();
        let cfg = ScanConfig { grid: n, orientations: o, ..ScanConfig::default() };
        let c = enumerate_candidates(&cam.grid(), &TrayConfig::default(), &cfg).unwrap();
        prop_assert_eq!(c.len(), o * n * n);
        let mut thetas: Vec<f64> = c[..o].iter().map(|k| k.pose.theta).collect();
        thetas.dedup();
        prop_assert_eq!(thetas.len(), o);
    }

    #[test]
    fn best_dominates_every_score(seed in any::<u64>()) {
        let cam = CameraConfig::default();
        let cfg = ScanConfig { grid: 3, ..ScanConfig::default() };
        let c = enumerate_candidates(&cam.grid(), &TrayConfig::default(), &cfg).unwrap();
        let r = find_best_grasp(&Hashed(seed), &empty_image(), c, &cfg).unwrap();
        let best = r.best().score.unwrap();
        prop_assert!(r.candidates.iter().all(|k| k.score.unwrap() <= best));
        prop_assert_eq!(r.best_succeeds, verdict(best));
    }
}
