//! Encoder-decoder network: configuration, parameter layout, forward and
//! backward passes, running statistics and the RMSprop update.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{self, BnCache};
use crate::tensor::{NetScalar, Tensor};

pub const BN_EPS: f64 = 1e-5;
/// Weight of the old value in the running batch-norm statistics.
pub const BN_MOMENTUM: f64 = 0.9;
pub const RMS_DECAY: f64 = 0.9;
pub const RMS_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdConfig {
    /// Encoder blocks.
    pub depth: usize,
    /// Channels of the first encoder block; doubled per block.
    pub base_features: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    /// Grid side length in cells.
    pub grid_size: usize,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl EdConfig {
    pub fn new(depth: usize, base_features: usize, in_channels: usize, out_channels: usize, grid_size: usize) -> Self {
        Self { depth, base_features, in_channels, out_channels, grid_size, dropout_rate: 0.5, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.base_features == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Config("depth, features and channel counts must be positive".into()));
        }
        if self.depth > 16 {
            return Err(Error::Config(format!("depth {} is too large", self.depth)));
        }
        if self.grid_size == 0 || !self.grid_size.is_multiple_of(1 << self.depth) {
            return Err(Error::Config(format!("grid size {} is not divisible by 2^{}", self.grid_size, self.depth)));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout rate {} outside [0, 1)", self.dropout_rate)));
        }
        Ok(())
    }

    /// Channels of encoder block `b`.
    pub fn channels(&self, block: usize) -> usize {
        self.base_features << block
    }

    /// Spatial side of the deepest encoder block.
    pub fn latent_size(&self) -> usize {
        self.grid_size >> (self.depth - 1)
    }
}

/// Convolution followed by an optional batch norm and an optional ReLU.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvUnit {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub weight: usize,
    /// Bias offset; convolutions feeding a batch norm have none.
    pub bias: Option<usize>,
    /// `(gamma offset, running-stat offset)`; beta follows gamma.
    pub bn: Option<(usize, usize)>,
    pub relu: bool,
}

impl ConvUnit {
    pub fn weight_len(&self) -> usize {
        self.cout * self.cin * self.k * self.k
    }

    /// Trainable values owned by the unit.
    pub fn param_count(&self) -> usize {
        self.weight_len()
            + if self.bias.is_some() { self.cout } else { 0 }
            + if self.bn.is_some() { 2 * self.cout } else { 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecoderBlock {
    /// Level whose skip connection this block consumes.
    pub level: usize,
    pub up: ConvUnit,
    pub convs: [ConvUnit; 2],
}

/// Offsets of every layer in the flat parameter and statistic vectors, in
/// deterministic layer order: encoder, decoder, head.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub encoder: Vec<[ConvUnit; 2]>,
    pub decoder: Vec<DecoderBlock>,
    pub head: [ConvUnit; 2],
    pub n_params: usize,
    pub n_stats: usize,
}

struct Builder {
    params: usize,
    stats: usize,
}

impl Builder {
    fn unit(&mut self, cin: usize, cout: usize, k: usize, bn: bool, relu: bool) -> ConvUnit {
        let weight = self.params;
        self.params += cout * cin * k * k;
        let bias = (!bn).then(|| {
            let b = self.params;
            self.params += cout;
            b
        });
        let bn = bn.then(|| {
            let g = self.params;
            self.params += 2 * cout;
            let s = self.stats;
            self.stats += 2 * cout;
            (g, s)
        });
        ConvUnit { cin, cout, k, weight, bias, bn, relu }
    }
}

impl Layout {
    pub fn new(config: &EdConfig) -> Result<Self> {
        config.validate()?;
        let mut b = Builder { params: 0, stats: 0 };
        let mut encoder = Vec::with_capacity(config.depth);
        let mut cin = config.in_channels;
        for level in 0..config.depth {
            let c = config.channels(level);
            encoder.push([b.unit(cin, c, 3, true, true), b.unit(c, c, 3, true, true)]);
            cin = c;
        }
        let mut decoder = Vec::with_capacity(config.depth - 1);
        for level in (0..config.depth - 1).rev() {
            let c = config.channels(level);
            let up = b.unit(cin, c, 2, false, false);
            let convs = [b.unit(2 * c, c, 3, true, false), b.unit(c, c, 3, true, false)];
            decoder.push(DecoderBlock { level, up, convs });
            cin = c;
        }
        let mid = config.out_channels.max(cin / 2);
        let head = [b.unit(cin, mid, 3, true, false), b.unit(mid, config.out_channels, 3, true, false)];
        let layout = Self { encoder, decoder, head, n_params: b.params, n_stats: b.stats };
        layout.audit(config)?;
        Ok(layout)
    }

    /// Checks the channel chain and that every decoder block's upsampled
    /// input has the spatial size of the skip connection it is joined with.
    fn audit(&self, config: &EdConfig) -> Result<()> {
        let mut c = config.in_channels;
        let mut size = config.grid_size;
        let mut skips = Vec::new();
        for (level, [a, b]) in self.encoder.iter().enumerate() {
            if a.cin != c || b.cin != a.cout {
                return Err(Error::Shape(format!("encoder block {level} channel chain broken")));
            }
            c = b.cout;
            if level + 1 < self.encoder.len() {
                skips.push((size, c));
                size /= 2;
            }
        }
        if size != config.latent_size() {
            return Err(Error::Shape(format!("latent size {size}, expected {}", config.latent_size())));
        }
        for block in &self.decoder {
            let (skip_size, skip_c) = skips.pop().ok_or_else(|| Error::Shape("decoder deeper than encoder".into()))?;
            size *= 2;
            if size != skip_size || block.up.cin != c || block.up.cout != skip_c || block.convs[0].cin != 2 * skip_c {
                return Err(Error::Shape(format!(
                    "decoder level {}: upsampled {size}×{c} vs skip {skip_size}×{skip_c}",
                    block.level
                )));
            }
            c = block.convs[1].cout;
        }
        if !skips.is_empty() || size != config.grid_size || self.head[0].cin != c {
            return Err(Error::Shape("decoder does not return to the grid size".into()));
        }
        Ok(())
    }

    pub fn units(&self) -> impl Iterator<Item = &ConvUnit> {
        self.encoder
            .iter()
            .flatten()
            .chain(self.decoder.iter().flat_map(|d| std::iter::once(&d.up).chain(d.convs.iter())))
            .chain(self.head.iter())
    }
}

/// Activations a unit's backward pass needs.
#[derive(Clone, Debug)]
struct UnitCache<T> {
    input: Tensor<T>,
    bn: Option<BnCache<T>>,
    output: Tensor<T>,
}

#[derive(Clone, Debug)]
struct EncoderCache<T> {
    units: [UnitCache<T>; 2],
    pool: Option<(Vec<u32>, [usize; 4])>,
}

#[derive(Clone, Debug)]
struct DecoderCache<T> {
    up: UnitCache<T>,
    units: [UnitCache<T>; 2],
}

/// Everything recorded by a training-mode forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    encoder: Vec<EncoderCache<T>>,
    dropout: Option<Vec<T>>,
    decoder: Vec<DecoderCache<T>>,
    head: [UnitCache<T>; 2],
    /// Softmax output.
    pub probs: Tensor<T>,
}

impl<T: NetScalar> ForwardCache<T> {
    /// ReLU on/off state of every encoder activation and the argmax of every
    /// pooling window. The network is smooth in its parameters only while
    /// this pattern stays fixed, which finite-difference checks rely on.
    pub fn activation_pattern(&self) -> (Vec<bool>, Vec<u32>) {
        let relu = self
            .encoder
            .iter()
            .flat_map(|e| e.units.iter())
            .flat_map(|u| u.output.data.iter().map(|&v| v > T::zero()))
            .collect();
        let pool = self.encoder.iter().filter_map(|e| e.pool.as_ref()).flat_map(|p| p.0.iter().copied()).collect();
        (relu, pool)
    }

    /// Per-channel batch statistics of every batch norm, in layout order.
    fn batch_stats(&self) -> impl Iterator<Item = &BnCache<T>> {
        self.encoder
            .iter()
            .flat_map(|e| e.units.iter())
            .chain(self.decoder.iter().flat_map(|d| std::iter::once(&d.up).chain(d.units.iter())))
            .chain(self.head.iter())
            .filter_map(|u| u.bn.as_ref())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdNetwork<T> {
    pub config: EdConfig,
    pub layout: Layout,
    pub params: Vec<T>,
    /// Running mean and variance of every batch norm.
    pub stats: Vec<T>,
    /// RMSprop squared-gradient accumulators.
    pub rms: Vec<T>,
}

impl<T: NetScalar> EdNetwork<T> {
    /// Builds and initializes a network: He-uniform weights drawn from a
    /// generator seeded with `config.seed`, zero biases, unit scale.
    pub fn new(config: EdConfig) -> Result<Self> {
        let layout = Layout::new(&config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = vec![T::zero(); layout.n_params];
        let mut stats = vec![T::zero(); layout.n_stats];
        for u in layout.units() {
            let limit = (6.0 / (u.cin * u.k * u.k) as f64).sqrt();
            for w in &mut params[u.weight..u.weight + u.weight_len()] {
                *w = T::of(rng.random_range(-limit..limit));
            }
            if let Some((g, s)) = u.bn {
                params[g..g + u.cout].fill(T::one());
                stats[s + u.cout..s + 2 * u.cout].fill(T::one());
            }
        }
        let rms = vec![T::zero(); layout.n_params];
        Ok(Self { config, layout, params, stats, rms })
    }

    pub fn num_params(&self) -> usize {
        self.layout.n_params
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let c = &self.config;
        if x.c != c.in_channels || x.h != c.grid_size || x.w != c.grid_size || x.n == 0 {
            return Err(Error::Shape(format!(
                "input {:?}, expected N×{}×{}×{}",
                x.shape(),
                c.in_channels,
                c.grid_size,
                c.grid_size
            )));
        }
        Ok(())
    }

    fn unit_forward(&self, u: &ConvUnit, x: Tensor<T>, train: bool) -> UnitCache<T> {
        let p = &self.params;
        let bias = u.bias.map(|b| &p[b..b + u.cout]);
        let z = layers::conv_forward(&x, &p[u.weight..u.weight + u.weight_len()], bias, u.cout, u.k);
        let (mut y, bn) = match u.bn {
            None => (z, None),
            Some((g, s)) => {
                let (gamma, beta) = (&p[g..g + u.cout], &p[g + u.cout..g + 2 * u.cout]);
                let eps = T::of(BN_EPS);
                if train {
                    let (y, cache) = layers::bn_forward_train(&z, gamma, beta, eps);
                    (y, Some(cache))
                } else {
                    let st = &self.stats;
                    let y = layers::bn_forward_eval(
                        &z,
                        gamma,
                        beta,
                        &st[s..s + u.cout],
                        &st[s + u.cout..s + 2 * u.cout],
                        eps,
                    );
                    (y, None)
                }
            }
        };
        if u.relu {
            layers::relu_inplace(&mut y);
        }
        UnitCache { input: x, bn, output: y }
    }

    fn unit_backward(
        &self,
        u: &ConvUnit,
        cache: &UnitCache<T>,
        dy: Tensor<T>,
        grads: &mut [T],
        need_dx: bool,
    ) -> Option<Tensor<T>> {
        let p = &self.params;
        let dy = if u.relu { layers::relu_backward(&dy, &cache.output) } else { dy };
        let dz = match (u.bn, &cache.bn) {
            (Some((g, _)), Some(bn)) => {
                let (dgamma, rest) = grads[g..g + 2 * u.cout].split_at_mut(u.cout);
                layers::bn_backward(&dy, bn, &p[g..g + u.cout], dgamma, rest)
            }
            _ => dy,
        };
        let (wgrad, bgrad) = match u.bias {
            Some(b) => {
                debug_assert_eq!(b, u.weight + u.weight_len());
                let (w, rest) = grads[u.weight..b + u.cout].split_at_mut(u.weight_len());
                (w, Some(rest))
            }
            None => (&mut grads[u.weight..u.weight + u.weight_len()], None),
        };
        layers::conv_backward(&cache.input, &p[u.weight..u.weight + u.weight_len()], &dz, u.k, wgrad, bgrad, need_dx)
    }

    fn run<R: Rng>(&self, x: &Tensor<T>, train: bool, rng: Option<&mut R>) -> ForwardCache<T> {
        let mut h = x.clone();
        let depth = self.layout.encoder.len();
        let mut encoder = Vec::with_capacity(depth);
        for (level, [a, b]) in self.layout.encoder.iter().enumerate() {
            let ca = self.unit_forward(a, h, train);
            let cb = self.unit_forward(b, ca.output.clone(), train);
            let pool = if level + 1 < depth {
                let (pooled, idx) = layers::maxpool_forward(&cb.output);
                h = pooled;
                Some((idx, cb.output.shape()))
            } else {
                h = cb.output.clone();
                None
            };
            encoder.push(EncoderCache { units: [ca, cb], pool });
        }
        let rate = self.config.dropout_rate;
        let dropout = match rng {
            Some(rng) if train && rate > 0.0 => {
                let keep = T::of(1.0 / (1.0 - rate));
                let mask: Vec<T> =
                    (0..h.data.len()).map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep }).collect();
                for (v, &m) in h.data.iter_mut().zip(&mask) {
                    *v *= m;
                }
                Some(mask)
            }
            _ => None,
        };
        let mut decoder = Vec::with_capacity(self.layout.decoder.len());
        for block in &self.layout.decoder {
            let up = self.unit_forward(&block.up, layers::upsample_forward(&h), train);
            let skip = &encoder[block.level].units[1].output;
            let ca = self.unit_forward(&block.convs[0], layers::concat(&up.output, skip), train);
            let cb = self.unit_forward(&block.convs[1], ca.output.clone(), train);
            h = cb.output.clone();
            decoder.push(DecoderCache { up, units: [ca, cb] });
        }
        let ha = self.unit_forward(&self.layout.head[0], h, train);
        let hb = self.unit_forward(&self.layout.head[1], ha.output.clone(), train);
        let probs = layers::softmax(&hb.output);
        ForwardCache { encoder, dropout, decoder, head: [ha, hb], probs }
    }

    /// Training-mode forward pass: batch statistics, dropout drawn from `rng`.
    pub fn forward<R: Rng>(&self, x: &Tensor<T>, rng: &mut R) -> Result<ForwardCache<T>> {
        self.check_input(x)?;
        Ok(self.run(x, true, Some(rng)))
    }

    /// Inference: running statistics, no dropout. Returns per-cell class
    /// probabilities, `N × out_channels × G × G`.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        Ok(self.run::<ChaCha8Rng>(x, false, None).probs)
    }

    /// Gradient of a loss with respect to every parameter, given the loss
    /// gradient `dprobs` with respect to the softmax output.
    pub fn backward(&self, cache: &ForwardCache<T>, dprobs: &Tensor<T>) -> Result<Vec<T>> {
        if dprobs.shape() != cache.probs.shape() {
            return Err(Error::Shape(format!("gradient {:?} vs output {:?}", dprobs.shape(), cache.probs.shape())));
        }
        let mut grads = vec![T::zero(); self.layout.n_params];
        let l = &self.layout;
        let dz = layers::softmax_backward(dprobs, &cache.probs);
        let d = self.unit_backward(&l.head[1], &cache.head[1], dz, &mut grads, true).expect("dx requested");
        let mut dh = self.unit_backward(&l.head[0], &cache.head[0], d, &mut grads, true).expect("dx requested");
        let depth = l.encoder.len();
        let mut dskips: Vec<Option<Tensor<T>>> = vec![None; depth];
        for (block, c) in l.decoder.iter().zip(&cache.decoder).rev() {
            let d = self.unit_backward(&block.convs[1], &c.units[1], dh, &mut grads, true).expect("dx requested");
            let d = self.unit_backward(&block.convs[0], &c.units[0], d, &mut grads, true).expect("dx requested");
            let (dup, dskip) = layers::split_channels(&d, block.up.cout);
            dskips[block.level] = Some(dskip);
            let d = self.unit_backward(&block.up, &c.up, dup, &mut grads, true).expect("dx requested");
            dh = layers::upsample_backward(&d);
        }
        if let Some(mask) = &cache.dropout {
            for (g, &m) in dh.data.iter_mut().zip(mask) {
                *g *= m;
            }
        }
        for level in (0..depth).rev() {
            let c = &cache.encoder[level];
            let mut d = match &c.pool {
                Some((idx, shape)) => layers::maxpool_backward(&dh, idx, *shape),
                None => dh,
            };
            if let Some(s) = dskips[level].take() {
                for (a, b) in d.data.iter_mut().zip(&s.data) {
                    *a += *b;
                }
            }
            let [ua, ub] = &l.encoder[level];
            let d = self.unit_backward(ub, &c.units[1], d, &mut grads, true).expect("dx requested");
            match self.unit_backward(ua, &c.units[0], d, &mut grads, level > 0) {
                Some(d) => dh = d,
                None => break,
            }
        }
        Ok(grads)
    }

    /// Folds the batch statistics of a training pass into the running
    /// statistics; the variance is stored unbiased.
    pub fn update_running_stats(&mut self, cache: &ForwardCache<T>) {
        let m = T::of(BN_MOMENTUM);
        let one_m = T::one() - m;
        let units: Vec<ConvUnit> = self.layout.units().copied().filter(|u| u.bn.is_some()).collect();
        for (u, bn) in units.iter().zip(cache.batch_stats()) {
            let (_, s) = u.bn.expect("filtered");
            let count = (bn.xhat.n * bn.xhat.plane()) as f64;
            let unbias = T::of(if count > 1.0 { count / (count - 1.0) } else { 1.0 });
            for ch in 0..u.cout {
                let mean = &mut self.stats[s + ch];
                *mean = m * *mean + one_m * bn.mean[ch];
                let var = &mut self.stats[s + u.cout + ch];
                *var = m * *var + one_m * bn.var[ch] * unbias;
            }
        }
    }

    /// RMSprop: `v ← ρv + (1−ρ)g²`, `θ ← θ − lr·g/(√v + ε)`.
    pub fn rmsprop_step(&mut self, grads: &[T], lr: T) -> Result<()> {
        if grads.len() != self.params.len() {
            return Err(Error::Shape(format!("{} gradients for {} parameters", grads.len(), self.params.len())));
        }
        let rho = T::of(RMS_DECAY);
        let eps = T::of(RMS_EPS);
        for ((p, v), &g) in self.params.iter_mut().zip(&mut self.rms).zip(grads) {
            *v = rho * *v + (T::one() - rho) * g * g;
            *p -= lr * g / (v.sqrt() + eps);
        }
        Ok(())
    }
}
