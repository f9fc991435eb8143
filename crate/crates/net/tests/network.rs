use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semgrid_core::{loss_mask, GridGeometry, LossMask, Mask, PreparedSample, SemanticClass, SemanticGrid, NUM_CLASSES};
use semgrid_net::checkpoint;
use semgrid_net::train::{batch_loss, input_tensor, train_samples, train_step};
use semgrid_net::{EdConfig, EdNetwork, Error, Schedule, Tensor};

fn random_grid(geo: GridGeometry, rng: &mut ChaCha8Rng, unknown: f64) -> SemanticGrid {
    let cells = (0..geo.len())
        .map(|_| {
            if rng.random_bool(unknown) {
                SemanticClass::Unknown
            } else {
                SemanticClass::ALL[rng.random_range(1..NUM_CLASSES)]
            }
        })
        .collect();
    SemanticGrid::from_cells(geo, cells, 0.0).unwrap()
}

fn random_sample(geo: GridGeometry, n_inputs: usize, rng: &mut ChaCha8Rng) -> PreparedSample {
    let inputs: Vec<SemanticGrid> = (0..n_inputs).map(|_| random_grid(geo, rng, 0.4)).collect();
    let target = random_grid(geo, rng, 0.3);
    let refs: Vec<&SemanticGrid> = inputs.iter().collect();
    let mask = loss_mask(&target, &refs, 0).unwrap();
    PreparedSample { inputs, target, mask }
}

#[test]
fn parameter_count_matches_hand_count() {
    // d=2, f=4, 20 input channels, 10 classes; conv weights + BN scale/shift,
    // plus weights and bias of the upsampling conv.
    let hand = [
        20 * 4 * 9 + 8,  // encoder 0, conv a
        4 * 4 * 9 + 8,   // encoder 0, conv b
        4 * 8 * 9 + 16,  // encoder 1, conv a
        8 * 8 * 9 + 16,  // encoder 1, conv b
        8 * 4 * 4 + 4,   // decoder up conv 2×2
        8 * 4 * 9 + 8,   // decoder conv after concat
        4 * 4 * 9 + 8,   // decoder conv
        4 * 10 * 9 + 20, // head to max(10, 4/2)
        10 * 10 * 9 + 20,
    ];
    assert_eq!(hand.iter().sum::<usize>(), 3656);
    let net = EdNetwork::<f32>::new(EdConfig::new(2, 4, 20, 10, 16)).unwrap();
    assert_eq!(net.num_params(), 3656);
}

#[test]
fn latent_size_shape_law() {
    let c = EdConfig::new(3, 64, 20, 10, 128);
    let layout = semgrid_net::Layout::new(&c).unwrap();
    assert_eq!(c.latent_size(), 32);
    assert_eq!(layout.encoder[2][1].cout, 256);
    assert_eq!(layout.decoder.len(), 2);
    assert!(matches!(EdNetwork::<f32>::new(EdConfig::new(3, 4, 10, 10, 20)), Err(Error::Config(_))));
}

#[test]
fn tiny_network_output_shape_and_normalization() {
    let net = EdNetwork::<f64>::new(EdConfig::new(1, 2, 10, 10, 4)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = Tensor::from_vec(1, 10, 4, 4, (0..160).map(|_| rng.random::<f64>()).collect()).unwrap();
    let y = net.predict(&x).unwrap();
    assert_eq!(y.shape(), [1, 10, 4, 4]);
    for cell in 0..16 {
        let s: f64 = (0..10).map(|k| y.data[k * 16 + cell]).sum();
        assert!((s - 1.0).abs() < 1e-6);
    }
    assert_eq!(net.predict(&x).unwrap(), y);
    let wrong = Tensor::<f64>::zeros(1, 9, 4, 4);
    assert!(matches!(net.predict(&wrong), Err(Error::Shape(_))));
}

#[test]
fn eval_forward_is_deterministic_and_normalized_f32() {
    let net = EdNetwork::<f32>::new(EdConfig::new(2, 4, 20, 10, 16)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let geo = GridGeometry::square(16, 16.0);
    let samples: Vec<PreparedSample> = (0..3).map(|_| random_sample(geo, 2, &mut rng)).collect();
    let refs: Vec<&PreparedSample> = samples.iter().collect();
    let x = input_tensor::<f32>(&refs).unwrap();
    let a = net.predict(&x).unwrap();
    assert_eq!(a.data, net.predict(&x).unwrap().data);
    for n in 0..3 {
        for cell in 0..256 {
            let s: f32 = (0..10).map(|k| a.sample(n)[k * 256 + cell]).sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }
}

/// Straight-line re-implementation of the eval-mode forward pass over nested
/// vectors, reading parameters in declaration order.
mod oracle {
    pub type Img = Vec<Vec<Vec<f64>>>;

    pub struct Cursor<'a> {
        pub params: &'a [f64],
        pub stats: &'a [f64],
        pub p: usize,
        pub s: usize,
    }

    impl Cursor<'_> {
        fn take(&mut self, n: usize) -> Vec<f64> {
            let v = self.params[self.p..self.p + n].to_vec();
            self.p += n;
            v
        }

        fn take_stats(&mut self, n: usize) -> Vec<f64> {
            let v = self.stats[self.s..self.s + n].to_vec();
            self.s += n;
            v
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn conv(x: &Img, w: &[f64], cout: usize, k: usize) -> Img {
        let (cin, h, wd) = (x.len(), x[0].len(), x[0][0].len());
        let pad = (k as isize - 1) / 2;
        let mut y = vec![vec![vec![0.0; wd]; h]; cout];
        for co in 0..cout {
            for r in 0..h {
                for c in 0..wd {
                    let mut acc = 0.0;
                    for ci in 0..cin {
                        for ky in 0..k {
                            for kx in 0..k {
                                let sr = r as isize + ky as isize - pad;
                                let sc = c as isize + kx as isize - pad;
                                if sr >= 0 && sc >= 0 && (sr as usize) < h && (sc as usize) < wd {
                                    acc += w[((co * cin + ci) * k + ky) * k + kx] * x[ci][sr as usize][sc as usize];
                                }
                            }
                        }
                    }
                    y[co][r][c] = acc;
                }
            }
        }
        y
    }

    /// conv (no bias) → eval batch norm → optional ReLU.
    pub fn conv_bn(cur: &mut Cursor, x: &Img, cout: usize, relu: bool) -> Img {
        let w = cur.take(cout * x.len() * 9);
        let mut y = conv(x, &w, cout, 3);
        let gamma = cur.take(cout);
        let beta = cur.take(cout);
        let mean = cur.take_stats(cout);
        let var = cur.take_stats(cout);
        for (ch, plane) in y.iter_mut().enumerate() {
            for v in plane.iter_mut().flatten() {
                *v = gamma[ch] * (*v - mean[ch]) / (var[ch] + 1e-5).sqrt() + beta[ch];
                if relu && *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        y
    }

    pub fn up_conv(cur: &mut Cursor, x: &Img, cout: usize) -> Img {
        let up: Img = x
            .iter()
            .map(|p| (0..p.len() * 2).map(|r| (0..p[0].len() * 2).map(|c| p[r / 2][c / 2]).collect()).collect())
            .collect();
        let w = cur.take(cout * x.len() * 4);
        let mut y = conv(&up, &w, cout, 2);
        let b = cur.take(cout);
        for (ch, plane) in y.iter_mut().enumerate() {
            for v in plane.iter_mut().flatten() {
                *v += b[ch];
            }
        }
        y
    }

    pub fn pool(x: &Img) -> Img {
        x.iter()
            .map(|p| {
                (0..p.len() / 2)
                    .map(|r| {
                        (0..p[0].len() / 2)
                            .map(|c| {
                                p[2 * r][2 * c]
                                    .max(p[2 * r][2 * c + 1])
                                    .max(p[2 * r + 1][2 * c])
                                    .max(p[2 * r + 1][2 * c + 1])
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    pub fn softmax(x: &Img) -> Img {
        let mut y = x.clone();
        for r in 0..x[0].len() {
            for c in 0..x[0][0].len() {
                let z: Vec<f64> = x.iter().map(|p| p[r][c]).collect();
                let m = z.iter().cloned().fold(f64::MIN, f64::max);
                let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
                let s: f64 = e.iter().sum();
                for (ch, v) in e.iter().enumerate() {
                    y[ch][r][c] = v / s;
                }
            }
        }
        y
    }
}

#[test]
fn forward_matches_straight_line_oracle() {
    // depth 2, base 3 channels, 5 input channels, 4 classes, 8×8 grid.
    let config = EdConfig { dropout_rate: 0.5, seed: 11, ..EdConfig::new(2, 3, 5, 4, 8) };
    let mut net = EdNetwork::<f64>::new(config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for v in &mut net.params {
        *v += rng.random_range(-0.3..0.3);
    }
    let n_stats = net.stats.len();
    for (i, v) in net.stats.iter_mut().enumerate() {
        // Means anywhere, variances positive; every unit stores means first.
        *v = if i < n_stats { rng.random_range(0.2..1.5) } else { 0.0 };
    }
    let x_img: oracle::Img =
        (0..5).map(|_| (0..8).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()).collect();
    let x = Tensor::from_vec(1, 5, 8, 8, x_img.iter().flatten().flatten().copied().collect()).unwrap();
    let got = net.predict(&x).unwrap();

    let mut cur = oracle::Cursor { params: &net.params, stats: &net.stats, p: 0, s: 0 };
    let e0 = oracle::conv_bn(&mut cur, &x_img, 3, true);
    let e0 = oracle::conv_bn(&mut cur, &e0, 3, true);
    let p0 = oracle::pool(&e0);
    let e1 = oracle::conv_bn(&mut cur, &p0, 6, true);
    let e1 = oracle::conv_bn(&mut cur, &e1, 6, true);
    let up = oracle::up_conv(&mut cur, &e1, 3);
    let cat: oracle::Img = up.into_iter().chain(e0).collect();
    let d = oracle::conv_bn(&mut cur, &cat, 3, false);
    let d = oracle::conv_bn(&mut cur, &d, 3, false);
    let h = oracle::conv_bn(&mut cur, &d, 4, false);
    let h = oracle::conv_bn(&mut cur, &h, 4, false);
    let want = oracle::softmax(&h);
    assert_eq!((cur.p, cur.s), (net.params.len(), net.stats.len()));
    for (a, b) in got.data.iter().zip(want.iter().flatten().flatten()) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

fn loss_at(net: &EdNetwork<f64>, x: &Tensor<f64>, samples: &[&PreparedSample]) -> (f64, (Vec<bool>, Vec<u32>)) {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let cache = net.forward(x, &mut rng).unwrap();
    (batch_loss(&cache.probs, samples).unwrap().0, cache.activation_pattern())
}

#[test]
fn gradients_match_central_differences() {
    let config = EdConfig { seed: 4, ..EdConfig::new(2, 4, 20, 10, 16) };
    let mut net = EdNetwork::<f64>::new(config).unwrap();
    let geo = GridGeometry::square(16, 16.0);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let samples: Vec<PreparedSample> = (0..2).map(|_| random_sample(geo, 2, &mut rng)).collect();
    let refs: Vec<&PreparedSample> = samples.iter().collect();
    let x = input_tensor::<f64>(&refs).unwrap();

    let mut drop_rng = ChaCha8Rng::seed_from_u64(77);
    let cache = net.forward(&x, &mut drop_rng).unwrap();
    let (_, dprobs) = batch_loss(&cache.probs, &refs).unwrap();
    let grads = net.backward(&cache, &dprobs).unwrap();

    // Central differences straddling a ReLU or pooling switch measure a
    // kink, not the derivative; such draws are replaced.
    let eps = 1e-5;
    let (mut checked, mut straddled, mut worst) = (0, 0, 0.0f64);
    while checked < 200 {
        let i = rng.random_range(0..net.params.len());
        let orig = net.params[i];
        net.params[i] = orig + eps;
        let (up, pattern_up) = loss_at(&net, &x, &refs);
        net.params[i] = orig - eps;
        let (down, pattern_down) = loss_at(&net, &x, &refs);
        net.params[i] = orig;
        if pattern_up != pattern_down {
            straddled += 1;
            continue;
        }
        let numeric = (up - down) / (2.0 * eps);
        let rel = (grads[i] - numeric).abs() / grads[i].abs().max(numeric.abs()).max(1e-7);
        worst = worst.max(rel);
        checked += 1;
    }
    assert!(straddled < 40, "{straddled} draws straddled a kink");
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn zero_loss_gradient_gives_zero_parameter_gradient() {
    let net = EdNetwork::<f64>::new(EdConfig::new(2, 4, 20, 10, 16)).unwrap();
    let geo = GridGeometry::square(16, 16.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut sample = random_sample(geo, 2, &mut rng);
    let x = input_tensor::<f64>(&[&sample]).unwrap();
    let cache = net.forward(&x, &mut rng).unwrap();
    let zero = Tensor::zeros(1, 10, 16, 16);
    assert!(net.backward(&cache, &zero).unwrap().iter().all(|&g| g == 0.0));
    sample.mask = LossMask { mask: Mask::new(16, 16, true), ..sample.mask };
    let (loss, dprobs) = batch_loss(&cache.probs, &[&sample]).unwrap();
    assert_eq!(loss, 0.0);
    assert!(net.backward(&cache, &dprobs).unwrap().iter().all(|&g| g == 0.0));
}

#[test]
fn rmsprop_matches_hand_trace() {
    // Minimize θ² from θ = 1 with lr 0.01; only parameter 0 receives a gradient.
    let mut net = EdNetwork::<f64>::new(EdConfig::new(1, 1, 10, 10, 2)).unwrap();
    net.params[0] = 1.0;
    let trace =
        [(0.4, 0.9683772238983162), (0.7351017791060039, 0.9457880254881013), (1.0193975968580762, 0.9270530987217255)];
    let mut grads = vec![0.0; net.params.len()];
    for (v, theta) in trace {
        grads[0] = 2.0 * net.params[0];
        let before = net.params[1..].to_vec();
        net.rmsprop_step(&grads, 0.01).unwrap();
        assert!((net.rms[0] - v).abs() < 1e-15);
        assert!((net.params[0] - theta).abs() < 1e-15);
        assert_eq!(net.params[1..], before[..]);
    }
}

#[test]
fn first_rmsprop_step_closed_form() {
    let mut net = EdNetwork::<f64>::new(EdConfig::new(1, 1, 10, 10, 2)).unwrap();
    let start = net.params.clone();
    let grads: Vec<f64> = (0..start.len()).map(|i| (i as f64 - 40.0) * 0.013).collect();
    net.rmsprop_step(&grads, 1e-3).unwrap();
    for ((p, s), g) in net.params.iter().zip(&start).zip(&grads) {
        let want = -1e-3 * g / ((0.1 * g * g).sqrt() + 1e-8);
        assert!((p - s - want).abs() < 1e-15);
    }
}

fn identity_sample(geo: GridGeometry, rng: &mut ChaCha8Rng) -> PreparedSample {
    let g = random_grid(geo, rng, 0.0);
    PreparedSample { inputs: vec![g.clone(), g.clone()], mask: LossMask::empty(geo.width, geo.height), target: g }
}

#[test]
fn memorization_loss_decreases() {
    let geo = GridGeometry::square(16, 16.0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let sample = identity_sample(geo, &mut rng);
    let mut net = EdNetwork::<f32>::new(EdConfig { dropout_rate: 0.0, ..EdConfig::new(2, 8, 20, 10, 16) }).unwrap();
    let mut losses = Vec::new();
    for _ in 0..20 {
        losses.push(train_step(&mut net, &[&sample], 1e-3, &mut rng).unwrap());
    }
    for w in losses.windows(2) {
        assert!(w[1] < w[0], "{losses:?}");
    }
}

#[test]
fn training_is_reproducible_and_checkpoints_round_trip() {
    let geo = GridGeometry::square(16, 16.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let train: Vec<PreparedSample> = (0..6).map(|_| identity_sample(geo, &mut rng)).collect();
    let val: Vec<PreparedSample> = (0..2).map(|_| identity_sample(geo, &mut rng)).collect();
    let schedule = Schedule { epochs: 3, batch_size: 4, lr_drop_epoch: Some(2), ..Schedule::default() };
    let config = EdConfig::new(2, 4, 20, 10, 16);
    let run = || {
        let mut net = EdNetwork::<f32>::new(config).unwrap();
        let log = train_samples(&mut net, &train, &val, &schedule, 5, |_, _| {}).unwrap();
        (net, log)
    };
    let (a, log_a) = run();
    let (b, log_b) = run();
    assert_eq!(a, b);
    assert_eq!(log_a, log_b);
    assert_eq!(log_a.len(), 3);
    assert_eq!(log_a[2].learning_rate, 1e-4);
    assert!(log_a[0].val_miou.is_some());
    assert!(train_samples(&mut a.clone(), &[], &val, &schedule, 5, |_, _| {}).is_err());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.sged");
    checkpoint::save(&a, &path).unwrap();
    let loaded = checkpoint::load::<f32>(&path).unwrap();
    assert_eq!(loaded, a);
    let refs: Vec<&PreparedSample> = val.iter().collect();
    let x = input_tensor::<f32>(&refs).unwrap();
    assert_eq!(loaded.predict(&x).unwrap().data, a.predict(&x).unwrap().data);
    assert!(checkpoint::load_matching::<f32>(&path, &config).is_ok());
    let other = EdConfig { base_features: 8, ..config };
    assert!(matches!(checkpoint::load_matching::<f32>(&path, &other), Err(Error::ConfigMismatch(_))));
    std::fs::write(&path, b"SGEX").unwrap();
    assert!(matches!(checkpoint::load::<f32>(&path), Err(Error::Checkpoint(_))));
}
