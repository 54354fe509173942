use binpick::nn::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// `‖a − n‖ / max(‖a‖, ‖n‖)` between analytic and numeric gradients.
fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    if na.max(nn) == 0.0 {
        0.0
    } else {
        diff / na.max(nn)
    }
}

/// Central differences of `f` with respect to every entry of `x`.
fn numeric_grad(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut x = x.to_vec();
    (0..x.len())
        .map(|i| {
            let v = x[i];
            x[i] = v + H;
            let up = f(&x);
            x[i] = v - H;
            let down = f(&x);
            x[i] = v;
            (up - down) / (2.0 * H)
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn conv_gradients_match_finite_differences() {
    for seed in 0..12u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = 1 + seed as usize % 3;
        let o = 1 + seed as usize % 2;
        let stride = 1 + seed as usize % 2;
        let x = random_tensor(&[c, 8, 8], &mut rng);
        let k = random_tensor(&[o, c, 3, 3], &mut rng);
        let b: Vec<f64> = (0..o).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = conv2d_forward(&x, &k, &b, stride).unwrap();
        let r: Vec<f64> = (0..y.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |x: &Tensor<f64>, k: &Tensor<f64>, b: &[f64]| dot(&conv2d_forward(x, k, b, stride).unwrap().data, &r);
        let g = Tensor::from_vec(&y.shape, r.clone()).unwrap();
        let (gx, gk, gb) = conv2d_backward(&x, &k, stride, &g).unwrap();

        let nx = numeric_grad(&x.data, |v| loss(&Tensor::from_vec(&x.shape, v.to_vec()).unwrap(), &k, &b));
        let nk = numeric_grad(&k.data, |v| loss(&x, &Tensor::from_vec(&k.shape, v.to_vec()).unwrap(), &b));
        let nb = numeric_grad(&b, |v| loss(&x, &k, v));
        assert!(relative_error(&gx.data, &nx) <= TOL, "seed {seed} input");
        assert!(relative_error(&gk.data, &nk) <= TOL, "seed {seed} kernel");
        assert!(relative_error(&gb, &nb) <= TOL, "seed {seed} bias");
    }
}

#[test]
fn fc_gradients_match_finite_differences() {
    for seed in 0..12u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let (o, i) = (2 + seed as usize % 4, 3 + seed as usize % 5);
        let x: Vec<f64> = (0..i).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w = random_tensor(&[o, i], &mut rng);
        let b: Vec<f64> = (0..o).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r: Vec<f64> = (0..o).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |x: &[f64], w: &Tensor<f64>, b: &[f64]| dot(&fc_forward(x, w, b).unwrap(), &r);
        let (gx, gw, gb) = fc_backward(&x, &w, &r);
        assert!(relative_error(&gx, &numeric_grad(&x, |v| loss(v, &w, &b))) <= TOL);
        assert!(relative_error(&gw.data, &numeric_grad(&w.data, |v| loss(&x, &Tensor::from_vec(&w.shape, v.to_vec()).unwrap(), &b))) <= TOL);
        assert!(relative_error(&gb, &numeric_grad(&b, |v| loss(&x, &w, v))) <= TOL);
    }
}

#[test]
fn maxpool_gradients_match_finite_differences() {
    for seed in 0..12u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let (h, w) = (4 + seed as usize % 3, 5 + seed as usize % 2);
        let x = random_tensor(&[2, h, w], &mut rng);
        let (y, arg) = maxpool2_forward(&x).unwrap();
        let r: Vec<f64> = (0..y.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = maxpool2_backward(&x.shape, &arg, &Tensor::from_vec(&y.shape, r.clone()).unwrap()).unwrap();
        let n = numeric_grad(&x.data, |v| dot(&maxpool2_forward(&Tensor::from_vec(&x.shape, v.to_vec()).unwrap()).unwrap().0.data, &r));
        assert!(relative_error(&g.data, &n) <= TOL, "seed {seed}");
    }
}

#[test]
fn relu_gradients_match_finite_differences() {
    for seed in 0..12u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        // keep inputs away from the kink
        let x: Vec<f64> = (0..20)
            .map(|_| {
                let v: f64 = rng.gen_range(0.01..1.0);
                if rng.gen() {
                    v
                } else {
                    -v
                }
            })
            .collect();
        let r: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = |v: &[f64]| {
            let mut y = v.to_vec();
            relu(&mut y);
            dot(&y, &r)
        };
        let mut y = x.clone();
        relu(&mut y);
        let mut g = r.clone();
        relu_backward(&y, &mut g);
        assert!(relative_error(&g, &numeric_grad(&x, f)) <= TOL);
    }
}

#[test]
fn softmax_cross_entropy_gradients_match_finite_differences() {
    for seed in 0..12u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
        let n = 2 + seed as usize % 3;
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let target = seed as usize % n;
        let (_, g) = cross_entropy(&a, target);
        let num = numeric_grad(&a, |v| cross_entropy(v, target).0);
        assert!(relative_error(&g, &num) <= TOL, "seed {seed}");
        let p = softmax(&a);
        assert!((cross_entropy(&a, target).0 + p[target].ln()).abs() < 1e-12);
    }
}

fn tiny_config() -> NetConfig {
    let s = |filter, channels, stride| StageSpec {
        filter,
        channels,
        stride,
        pool: true,
    };
    NetConfig {
        input: 21,
        twin: vec![s(4, 3, 1), s(3, 4, 1)],
        shared: vec![s(2, 3, 1), s(1, 2, 1)],
        hidden: vec![6, 5],
        dropout: 0.5,
    }
}

/// End-to-end check through twins, merge, shared stages and FC layers.
#[test]
fn network_gradients_match_finite_differences() {
    for seed in 0..10u64 {
        let mut net = Network::<f64>::new(tiny_config(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        for p in net.params.iter_mut() {
            for v in p.data.iter_mut() {
                // non-zero biases keep ReLUs off their kinks
                *v += rng.gen_range(-0.05..0.05);
            }
        }
        let n = 21 * 21;
        let depth: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let grip: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.2) { 1.0 } else { 0.0 }).collect();
        let target = seed as usize % 2;
        let (_, grads) = net.loss_and_grad(&depth, &grip, target, None).unwrap();
        for (t, g) in grads.tensors.iter().enumerate() {
            let picks: Vec<usize> = (0..g.len().min(12)).map(|_| rng.gen_range(0..g.len())).collect();
            let mut analytic = Vec::new();
            let mut numeric = Vec::new();
            for &i in &picks {
                let v = net.params[t].data[i];
                net.params[t].data[i] = v + H;
                let up = net.loss_and_grad(&depth, &grip, target, None).unwrap().0;
                net.params[t].data[i] = v - H;
                let down = net.loss_and_grad(&depth, &grip, target, None).unwrap().0;
                net.params[t].data[i] = v;
                analytic.push(g.data[i]);
                numeric.push((up - down) / (2.0 * H));
            }
            let err = relative_error(&analytic, &numeric);
            assert!(err <= TOL, "seed {seed} tensor {t}: {err}");
        }
    }
}

#[test]
fn forward_outputs_a_distribution_and_is_deterministic() {
    let net = Network::<f32>::new(NetConfig::desk(), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let depth: Vec<f32> = (0..64 * 64).map(|_| rng.gen_range(0.0..1.0)).collect();
    let grip = vec![0.0f32; 64 * 64];
    let (y0, y1) = net.forward(&depth, &grip).unwrap();
    assert!(y0 > 0.0 && y1 > 0.0);
    assert!(((y0 + y1) as f64 - 1.0).abs() < 1e-6);
    let again = Network::<f32>::new(NetConfig::desk(), 3).unwrap().forward(&depth, &grip).unwrap();
    assert_eq!((y0.to_bits(), y1.to_bits()), (again.0.to_bits(), again.1.to_bits()));

    let net64 = net.cast::<f64>();
    let (a, b) = net64.forward(&depth.iter().map(|&v| v as f64).collect::<Vec<_>>(), &vec![0.0; 64 * 64]).unwrap();
    assert!((a + b - 1.0).abs() < 1e-9);
}

#[test]
fn zero_final_layer_gives_even_odds() {
    let mut net = Network::<f64>::new(NetConfig::desk(), 1).unwrap();
    let n = net.params.len();
    for p in &mut net.params[n - 2..] {
        p.data.iter_mut().for_each(|v| *v = 0.0);
    }
    let (y0, y1) = net.forward(&vec![0.3; 4096], &vec![1.0; 4096]).unwrap();
    assert_eq!((y0, y1), (0.5, 0.5));
}

#[test]
fn wrong_input_size_is_a_shape_error() {
    let net = Network::<f32>::new(NetConfig::desk(), 1).unwrap();
    assert!(matches!(net.forward(&[0.0; 10], &[0.0; 10]), Err(NnError::Shape(_))));
}

#[test]
fn paper_scale_graph_builds_with_two_outputs() {
    let specs = NetConfig::paper_scale().layer_specs().unwrap();
    let convs = specs.iter().filter(|s| matches!(s, LayerSpec::Conv { .. })).count();
    let fcs: Vec<_> = specs.iter().filter_map(|s| match s {
        LayerSpec::FullyConnected { outputs, .. } => Some(*outputs),
        _ => None,
    }).collect();
    assert_eq!(convs, 6, "twin stages appear once per channel");
    assert_eq!(fcs, [1024, 1024, 2]);
    assert!(matches!(specs.last(), Some(LayerSpec::Softmax { classes: 2 })));
    let dropouts = specs.iter().filter(|s| matches!(s, LayerSpec::Dropout { rate } if *rate == 0.5)).count();
    assert_eq!(dropouts, 2);
    let net = Network::<f32>::new(NetConfig::paper_scale(), 0).unwrap();
    assert_eq!(net.params.last().unwrap().len(), 2);
}

#[test]
fn desk_graph_sizes() {
    let specs = NetConfig::desk().layer_specs().unwrap();
    let outputs: Vec<[usize; 3]> = specs
        .iter()
        .filter_map(|s| match s {
            LayerSpec::MaxPool { output } => Some(*output),
            _ => None,
        })
        .collect();
    // 64 → conv 8 → 57 → pool 29 → conv 4 /2 → 13 → pool 7 → conv 3 → 5 → pool 3 → conv 3 → 1 → pool 1
    assert_eq!(outputs, [[8, 29, 29], [16, 7, 7], [8, 29, 29], [16, 7, 7], [16, 3, 3], [16, 1, 1]]);
    let mut bad = NetConfig::desk();
    bad.input = 10;
    assert!(matches!(bad.layer_specs(), Err(NnError::Config(_))));
}

/// Inverted dropout keeps each hidden unit's expectation.
#[test]
fn dropout_preserves_expectation() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let units = 128;
    let trials = 10_000;
    let mut sums = vec![0.0f64; units];
    for _ in 0..trials {
        let m: Vec<f64> = dropout_mask(units, 0.5, &mut rng);
        for (s, v) in sums.iter_mut().zip(m) {
            *s += v;
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / trials as f64).collect();
    let overall = means.iter().sum::<f64>() / units as f64;
    assert!((overall - 1.0).abs() < 0.01, "overall {overall}");
    // each unit: standard error 1%, allow five of them
    assert!(means.iter().all(|m| (m - 1.0).abs() < 0.05));
}

fn blob_set(n: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let present = i % 2 == 0;
            let mut depth: Vec<f32> = (0..4096).map(|_| rng.gen_range(0.0..0.05)).collect();
            if present {
                let (r0, c0) = (rng.gen_range(8..48), rng.gen_range(8..48));
                for r in r0..r0 + 8 {
                    for c in c0..c0 + 8 {
                        depth[r * 64 + c] = 1.0;
                    }
                }
            }
            let mut gripper = vec![0.0f32; 4096];
            for c in 16..48 {
                for r in 31..34 {
                    gripper[r * 64 + c] = 1.0;
                }
            }
            Sample {
                depth,
                gripper,
                label: if present { 0 } else { 1 },
            }
        })
        .collect()
}

fn toy_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 0.01,
        batch_size: 4,
        epochs: 50,
        seed: 5,
        ..TrainConfig::default()
    }
}

#[test]
fn toy_separable_set_is_learned_within_fifty_epochs() {
    let data = VecSource(blob_set(20, 9));
    let mut net = Network::<f32>::new(NetConfig::desk(), 2).unwrap();
    train(&mut net, &data, None, &toy_config()).unwrap();
    let (_, m) = evaluate(&net, &data).unwrap();
    assert_eq!((m[1], m[2]), (0, 0), "confusion {m:?}");
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let data = VecSource(blob_set(6, 1));
    let mut net = Network::<f32>::new(NetConfig::desk(), 2).unwrap();
    let before = net.clone();
    train(&mut net, &data, None, &TrainConfig { learning_rate: 0.0, epochs: 2, ..toy_config() }).unwrap();
    assert_eq!(net, before);
}

#[test]
fn same_seed_gives_identical_loss_curves() {
    let data = VecSource(blob_set(8, 4));
    let verify = VecSource(blob_set(4, 5));
    let run = || {
        let mut net = Network::<f32>::new(NetConfig::desk(), 8).unwrap();
        let r = train(&mut net, &data, Some(&verify), &TrainConfig { epochs: 3, ..toy_config() }).unwrap();
        (r.epochs.iter().map(|e| (e.train_loss.to_bits(), e.verify_loss.map(f64::to_bits), e.verify_confusion)).collect::<Vec<_>>(), net)
    };
    let (a, na) = run();
    let (b, nb) = run();
    assert_eq!(a, b);
    assert_eq!(na, nb);
}

#[test]
fn empty_training_set_is_rejected() {
    let mut net = Network::<f32>::new(NetConfig::desk(), 2).unwrap();
    assert!(matches!(train(&mut net, &VecSource(vec![]), None, &toy_config()), Err(NnError::Config(_))));
}

#[test]
fn parameter_files_round_trip_and_reject_bad_input() {
    let net = Network::<f32>::new(NetConfig::desk(), 11).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.bin");
    save_params(&net, &path).unwrap();
    let back: Network<f32> = load_params(&NetConfig::desk(), &path).unwrap();
    assert_eq!(back, net);
    let depth = vec![0.25f32; 4096];
    let grip = vec![1.0f32; 4096];
    let (a, b) = (net.forward(&depth, &grip).unwrap(), back.forward(&depth, &grip).unwrap());
    assert_eq!((a.0.to_bits(), a.1.to_bits()), (b.0.to_bits(), b.1.to_bits()));

    let bytes = std::fs::read(&path).unwrap();
    assert!(matches!(read_params::<f32>(&NetConfig::desk(), &bytes[..bytes.len() - 3]), Err(NnError::Format(_))));
    assert!(matches!(read_params::<f32>(&NetConfig::desk(), &bytes[..10]), Err(NnError::Format(_))));
    let mut other = NetConfig::desk();
    other.hidden = vec![64, 64];
    assert!(matches!(read_params::<f32>(&other, &bytes), Err(NnError::Fingerprint)));
    assert_ne!(fingerprint(&other).unwrap(), fingerprint(&NetConfig::desk()).unwrap());
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(a in prop::collection::vec(-50.0f64..50.0, 2..6), shift in -100.0f64..100.0) {
        let p = softmax(&a);
        prop_assert!(p.iter().all(|&v| v > 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let shifted: Vec<f64> = a.iter().map(|v| v + shift).collect();
        for (x, y) in p.iter().zip(softmax(&shifted)) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        if a.len() == 2 {
            prop_assert!((p[1] - (1.0 - p[0])).abs() < 1e-9);
        }
    }

    #[test]
    fn relu_is_nonnegative_and_idempotent(x in prop::collection::vec(-10.0f64..10.0, 1..40)) {
        let mut y = x.clone();
        relu(&mut y);
        prop_assert!(y.iter().all(|&v| v >= 0.0));
        let mut z = y.clone();
        relu(&mut z);
        prop_assert_eq!(y.clone(), z);
        for (a, b) in x.iter().zip(&y) {
            prop_assert!(*b == a.max(0.0));
        }
    }

    #[test]
    fn pooling_takes_window_maxima(h in 1usize..9, w in 1usize..9, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_tensor(&[1, h, w], &mut rng);
        let (y, arg) = maxpool2_forward(&x).unwrap();
        prop_assert_eq!(y.shape.clone(), vec![1, h.div_ceil(2), w.div_ceil(2)]);
        for (k, &i) in arg.iter().enumerate() {
            let (oy, ox) = (k / y.shape[2], k % y.shape[2]);
            let (r, c) = (i / w, i % w);
            prop_assert!(r / 2 == oy && c / 2 == ox);
            prop_assert_eq!(y.data[k], x.data[i]);
        }
    }
}
