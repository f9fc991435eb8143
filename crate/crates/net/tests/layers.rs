use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semgrid_net::layers::{
    concat, conv_backward, conv_forward, maxpool_backward, maxpool_forward, softmax, split_channels, upsample_backward,
    upsample_forward,
};
use semgrid_net::Tensor;

fn random(shape: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let [n, c, h, w] = shape;
    let data = (0..n * c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::from_vec(n, c, h, w, data).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_backward_is_the_adjoint(
        n in 1usize..3, cin in 1usize..4, cout in 1usize..4, h in 1usize..7, w in 1usize..7, k in 1usize..4, seed: u64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random([n, cin, h, w], &mut rng);
        let weight: Vec<f64> = (0..cout * cin * k * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = conv_forward(&x, &weight, None, cout, k);
        let dy = random(y.shape(), &mut rng);
        let mut dw = vec![0.0; weight.len()];
        let dx = conv_backward(&x, &weight, &dy, k, &mut dw, None, true).unwrap();
        // <conv(x), dy> is linear in both x and the weights.
        let lhs = dot(&y.data, &dy.data);
        prop_assert!((lhs - dot(&x.data, &dx.data)).abs() < 1e-9 * (1.0 + lhs.abs()));
        prop_assert!((lhs - dot(&weight, &dw)).abs() < 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn pool_and_upsample_adjoints(n in 1usize..3, c in 1usize..4, h in 1usize..5, w in 1usize..5, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random([n, c, 2 * h, 2 * w], &mut rng);
        let (y, idx) = maxpool_forward(&x);
        let dy = random(y.shape(), &mut rng);
        let dx = maxpool_backward(&dy, &idx, x.shape());
        prop_assert!((dot(&y.data, &dy.data) - dot(&x.data, &dx.data)).abs() < 1e-12);

        let small = random([n, c, h, w], &mut rng);
        let up = upsample_forward(&small);
        let dup = random(up.shape(), &mut rng);
        let back = upsample_backward(&dup);
        prop_assert!((dot(&up.data, &dup.data) - dot(&small.data, &back.data)).abs() < 1e-12);
    }

    #[test]
    fn concat_split_round_trip(ca in 1usize..4, cb in 1usize..4, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random([2, ca, 3, 2], &mut rng);
        let b = random([2, cb, 3, 2], &mut rng);
        let (a2, b2) = split_channels(&concat(&a, &b), ca);
        prop_assert_eq!(a2, a);
        prop_assert_eq!(b2, b);
    }

    #[test]
    fn softmax_normalizes_and_ignores_shifts(c in 1usize..12, shift in -50.0f64..50.0, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = random([2, c, 3, 3], &mut rng);
        x.data.iter_mut().for_each(|v| *v *= 20.0);
        let p = softmax(&x);
        for n in 0..2 {
            for y in 0..3 {
                for xx in 0..3 {
                    let s: f64 = (0..c).map(|k| p.at(n, k, y, xx)).sum();
                    prop_assert!((s - 1.0).abs() < 1e-12);
                }
            }
        }
        let mut shifted = x.clone();
        shifted.data.iter_mut().for_each(|v| *v += shift);
        let q = softmax(&shifted);
        prop_assert!(p.data.iter().zip(&q.data).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}
