//! Layer kernels on NCHW tensors. Forward functions return what their
//! backward counterparts need; nothing here owns parameters.

use crate::tensor::{NetScalar, Tensor};

/// "Same" padding: `(before, after)` so the output keeps the input size.
#[inline]
pub fn same_padding(k: usize) -> (usize, usize) {
    let before = (k - 1) / 2;
    (before, k - 1 - before)
}

/// Unfolds one `c × h × w` sample into a `(c·k·k) × (h·w)` matrix.
fn im2col<T: NetScalar>(x: &[T], c: usize, h: usize, w: usize, k: usize, col: &mut [T]) {
    let (pad, _) = same_padding(k);
    let hw = h * w;
    for ci in 0..c {
        let src = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut col[((ci * k + ky) * k + kx) * hw..][..hw];
                let dx = kx as isize - pad as isize;
                let x0 = (-dx).max(0) as usize;
                let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
                for y in 0..h {
                    let sy = y as isize + ky as isize - pad as isize;
                    let out = &mut row[y * w..(y + 1) * w];
                    if sy < 0 || sy >= h as isize || x0 >= x1 {
                        out.fill(T::zero());
                        continue;
                    }
                    let s = &src[sy as usize * w..(sy as usize + 1) * w];
                    out[..x0].fill(T::zero());
                    out[x1..].fill(T::zero());
                    let sx0 = (x0 as isize + dx) as usize;
                    out[x0..x1].copy_from_slice(&s[sx0..sx0 + (x1 - x0)]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates columns back into the sample.
fn col2im<T: NetScalar>(col: &[T], c: usize, h: usize, w: usize, k: usize, dx: &mut [T]) {
    let (pad, _) = same_padding(k);
    let hw = h * w;
    for ci in 0..c {
        let dst = &mut dx[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &col[((ci * k + ky) * k + kx) * hw..][..hw];
                let off = kx as isize - pad as isize;
                let x0 = (-off).max(0) as usize;
                let x1 = (w as isize - off).min(w as isize).max(0) as usize;
                for y in 0..h {
                    let sy = y as isize + ky as isize - pad as isize;
                    if sy < 0 || sy >= h as isize || x0 >= x1 {
                        continue;
                    }
                    let d = &mut dst[sy as usize * w..(sy as usize + 1) * w];
                    let sx0 = (x0 as isize + off) as usize;
                    for (o, &v) in d[sx0..sx0 + (x1 - x0)].iter_mut().zip(&row[y * w + x0..y * w + x1]) {
                        *o += v;
                    }
                }
            }
        }
    }
}

/// Stride-1 convolution with "same" padding. `weight` is `cout × cin × k × k`.
pub fn conv_forward<T: NetScalar>(x: &Tensor<T>, weight: &[T], bias: Option<&[T]>, cout: usize, k: usize) -> Tensor<T> {
    let (cin, hw) = (x.c, x.plane());
    let ck = cin * k * k;
    debug_assert_eq!(weight.len(), cout * ck);
    let mut y = Tensor::zeros(x.n, cout, x.h, x.w);
    let mut col = vec![T::zero(); ck * hw];
    for i in 0..x.n {
        im2col(x.sample(i), cin, x.h, x.w, k, &mut col);
        let out = y.sample_mut(i);
        T::gemm(cout, ck, hw, T::one(), weight, ck as isize, 1, &col, hw as isize, 1, T::zero(), out, hw as isize, 1);
        if let Some(b) = bias {
            for (co, &bv) in b.iter().enumerate() {
                for v in &mut out[co * hw..(co + 1) * hw] {
                    *v += bv;
                }
            }
        }
    }
    y
}

/// Accumulates weight and bias gradients; returns the input gradient when
/// `need_dx`.
pub fn conv_backward<T: NetScalar>(
    x: &Tensor<T>,
    weight: &[T],
    dy: &Tensor<T>,
    k: usize,
    dweight: &mut [T],
    dbias: Option<&mut [T]>,
    need_dx: bool,
) -> Option<Tensor<T>> {
    let (cin, cout, hw) = (x.c, dy.c, x.plane());
    let ck = cin * k * k;
    let mut col = vec![T::zero(); ck * hw];
    let mut dcol = if need_dx { vec![T::zero(); ck * hw] } else { Vec::new() };
    let mut dx = need_dx.then(|| Tensor::zeros(x.n, cin, x.h, x.w));
    for i in 0..x.n {
        im2col(x.sample(i), cin, x.h, x.w, k, &mut col);
        let g = dy.sample(i);
        // dW += dY · colᵀ
        T::gemm(cout, hw, ck, T::one(), g, hw as isize, 1, &col, 1, hw as isize, T::one(), dweight, ck as isize, 1);
        if let Some(dx) = dx.as_mut() {
            // dcol = Wᵀ · dY
            T::gemm(
                ck,
                cout,
                hw,
                T::one(),
                weight,
                1,
                ck as isize,
                g,
                hw as isize,
                1,
                T::zero(),
                &mut dcol,
                hw as isize,
                1,
            );
            col2im(&dcol, cin, x.h, x.w, k, dx.sample_mut(i));
        }
    }
    if let Some(db) = dbias {
        for i in 0..x.n {
            let g = dy.sample(i);
            for (co, d) in db.iter_mut().enumerate() {
                *d += g[co * hw..(co + 1) * hw].iter().copied().sum::<T>();
            }
        }
    }
    dx
}

/// Normalized activations and per-channel statistics of a training-mode
/// batch norm.
#[derive(Clone, Debug)]
pub struct BnCache<T> {
    pub xhat: Tensor<T>,
    pub inv_std: Vec<T>,
    pub mean: Vec<T>,
    /// Biased batch variance.
    pub var: Vec<T>,
}

pub fn bn_forward_train<T: NetScalar>(x: &Tensor<T>, gamma: &[T], beta: &[T], eps: T) -> (Tensor<T>, BnCache<T>) {
    let (c, hw) = (x.c, x.plane());
    let m = T::of((x.n * hw) as f64);
    let mut mean = vec![T::zero(); c];
    let mut var = vec![T::zero(); c];
    for ch in 0..c {
        let mut s = T::zero();
        for i in 0..x.n {
            s += x.sample(i)[ch * hw..(ch + 1) * hw].iter().copied().sum::<T>();
        }
        let mu = s / m;
        let mut v = T::zero();
        for i in 0..x.n {
            for &val in &x.sample(i)[ch * hw..(ch + 1) * hw] {
                let d = val - mu;
                v += d * d;
            }
        }
        mean[ch] = mu;
        var[ch] = v / m;
    }
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut xhat = Tensor::zeros(x.n, c, x.h, x.w);
    let mut y = Tensor::zeros(x.n, c, x.h, x.w);
    for i in 0..x.n {
        let src = x.sample(i);
        let xh = xhat.sample_mut(i);
        for ch in 0..c {
            for j in ch * hw..(ch + 1) * hw {
                xh[j] = (src[j] - mean[ch]) * inv_std[ch];
            }
        }
        let out = y.sample_mut(i);
        for ch in 0..c {
            for j in ch * hw..(ch + 1) * hw {
                out[j] = gamma[ch] * xh[j] + beta[ch];
            }
        }
    }
    (y, BnCache { xhat, inv_std, mean, var })
}

pub fn bn_forward_eval<T: NetScalar>(
    x: &Tensor<T>,
    gamma: &[T],
    beta: &[T],
    running_mean: &[T],
    running_var: &[T],
    eps: T,
) -> Tensor<T> {
    let hw = x.plane();
    let mut y = x.clone();
    for i in 0..x.n {
        let out = y.sample_mut(i);
        for ch in 0..x.c {
            let scale = gamma[ch] / (running_var[ch] + eps).sqrt();
            let shift = beta[ch] - running_mean[ch] * scale;
            for v in &mut out[ch * hw..(ch + 1) * hw] {
                *v = *v * scale + shift;
            }
        }
    }
    y
}

/// Accumulates `dgamma`, `dbeta` and returns the input gradient.
pub fn bn_backward<T: NetScalar>(
    dy: &Tensor<T>,
    cache: &BnCache<T>,
    gamma: &[T],
    dgamma: &mut [T],
    dbeta: &mut [T],
) -> Tensor<T> {
    let (c, hw) = (dy.c, dy.plane());
    let m = T::of((dy.n * hw) as f64);
    let mut sum_dy = vec![T::zero(); c];
    let mut sum_dy_xhat = vec![T::zero(); c];
    for i in 0..dy.n {
        let g = dy.sample(i);
        let xh = cache.xhat.sample(i);
        for ch in 0..c {
            let mut a = T::zero();
            let mut b = T::zero();
            for j in ch * hw..(ch + 1) * hw {
                a += g[j];
                b += g[j] * xh[j];
            }
            sum_dy[ch] += a;
            sum_dy_xhat[ch] += b;
        }
    }
    for ch in 0..c {
        dbeta[ch] += sum_dy[ch];
        dgamma[ch] += sum_dy_xhat[ch];
    }
    let mut dx = Tensor::zeros(dy.n, c, dy.h, dy.w);
    for i in 0..dy.n {
        let g = dy.sample(i);
        let xh = cache.xhat.sample(i);
        let out = dx.sample_mut(i);
        for ch in 0..c {
            let k = gamma[ch] * cache.inv_std[ch] / m;
            let (sa, sb) = (sum_dy[ch], sum_dy_xhat[ch]);
            for j in ch * hw..(ch + 1) * hw {
                out[j] = k * (m * g[j] - sa - xh[j] * sb);
            }
        }
    }
    dx
}

pub fn relu_inplace<T: NetScalar>(x: &mut Tensor<T>) {
    for v in &mut x.data {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Gradient through a ReLU given its output.
pub fn relu_backward<T: NetScalar>(dy: &Tensor<T>, y: &Tensor<T>) -> Tensor<T> {
    let mut dx = dy.clone();
    for (d, &v) in dx.data.iter_mut().zip(&y.data) {
        if v <= T::zero() {
            *d = T::zero();
        }
    }
    dx
}

/// 2×2 max pooling with stride 2; returns the flat input index of each max.
pub fn maxpool_forward<T: NetScalar>(x: &Tensor<T>) -> (Tensor<T>, Vec<u32>) {
    let (oh, ow) = (x.h / 2, x.w / 2);
    let mut y = Tensor::zeros(x.n, x.c, oh, ow);
    let mut idx = vec![0u32; y.data.len()];
    let mut o = 0;
    for nc in 0..x.n * x.c {
        let base = nc * x.h * x.w;
        for yy in 0..oh {
            for xx in 0..ow {
                let mut best = base + 2 * yy * x.w + 2 * xx;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let j = base + (2 * yy + dy) * x.w + 2 * xx + dx;
                    if x.data[j] > x.data[best] {
                        best = j;
                    }
                }
                y.data[o] = x.data[best];
                idx[o] = best as u32;
                o += 1;
            }
        }
    }
    (y, idx)
}

pub fn maxpool_backward<T: NetScalar>(dy: &Tensor<T>, idx: &[u32], input_shape: [usize; 4]) -> Tensor<T> {
    let [n, c, h, w] = input_shape;
    let mut dx = Tensor::zeros(n, c, h, w);
    for (&j, &g) in idx.iter().zip(&dy.data) {
        dx.data[j as usize] += g;
    }
    dx
}

/// Nearest-neighbour ×2 upsampling.
pub fn upsample_forward<T: NetScalar>(x: &Tensor<T>) -> Tensor<T> {
    let (h, w) = (x.h * 2, x.w * 2);
    let mut y = Tensor::zeros(x.n, x.c, h, w);
    for nc in 0..x.n * x.c {
        let src = &x.data[nc * x.h * x.w..(nc + 1) * x.h * x.w];
        let dst = &mut y.data[nc * h * w..(nc + 1) * h * w];
        for yy in 0..h {
            for xx in 0..w {
                dst[yy * w + xx] = src[(yy / 2) * x.w + xx / 2];
            }
        }
    }
    y
}

pub fn upsample_backward<T: NetScalar>(dy: &Tensor<T>) -> Tensor<T> {
    let (h, w) = (dy.h / 2, dy.w / 2);
    let mut dx = Tensor::zeros(dy.n, dy.c, h, w);
    for nc in 0..dy.n * dy.c {
        let src = &dy.data[nc * dy.h * dy.w..(nc + 1) * dy.h * dy.w];
        let dst = &mut dx.data[nc * h * w..(nc + 1) * h * w];
        for yy in 0..dy.h {
            for xx in 0..dy.w {
                dst[(yy / 2) * w + xx / 2] += src[yy * dy.w + xx];
            }
        }
    }
    dx
}

/// Channel concatenation `[a, b]`.
pub fn concat<T: NetScalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    debug_assert_eq!((a.n, a.h, a.w), (b.n, b.h, b.w));
    let mut y = Tensor::zeros(a.n, a.c + b.c, a.h, a.w);
    for i in 0..a.n {
        let (sa, sb) = (a.sample(i), b.sample(i));
        let out = y.sample_mut(i);
        out[..sa.len()].copy_from_slice(sa);
        out[sa.len()..].copy_from_slice(sb);
    }
    y
}

/// Splits a gradient of `[a, b]` into the gradients of `a` and `b`.
pub fn split_channels<T: NetScalar>(dy: &Tensor<T>, ca: usize) -> (Tensor<T>, Tensor<T>) {
    let cb = dy.c - ca;
    let mut da = Tensor::zeros(dy.n, ca, dy.h, dy.w);
    let mut db = Tensor::zeros(dy.n, cb, dy.h, dy.w);
    let la = ca * dy.plane();
    for i in 0..dy.n {
        let g = dy.sample(i);
        da.sample_mut(i).copy_from_slice(&g[..la]);
        db.sample_mut(i).copy_from_slice(&g[la..]);
    }
    (da, db)
}

/// Softmax over channels at every pixel.
pub fn softmax<T: NetScalar>(x: &Tensor<T>) -> Tensor<T> {
    let mut y = x.clone();
    let hw = x.plane();
    for i in 0..x.n {
        let s = y.sample_mut(i);
        for p in 0..hw {
            let mut mx = T::neg_infinity();
            for ch in 0..x.c {
                mx = mx.max(s[ch * hw + p]);
            }
            let mut total = T::zero();
            for ch in 0..x.c {
                let e = (s[ch * hw + p] - mx).exp();
                s[ch * hw + p] = e;
                total += e;
            }
            for ch in 0..x.c {
                s[ch * hw + p] /= total;
            }
        }
    }
    y
}

/// Gradient through the softmax given its output `p` and `dL/dp`.
pub fn softmax_backward<T: NetScalar>(dp: &Tensor<T>, p: &Tensor<T>) -> Tensor<T> {
    let mut dz = Tensor::zeros(p.n, p.c, p.h, p.w);
    let hw = p.plane();
    for i in 0..p.n {
        let (g, s) = (dp.sample(i), p.sample(i));
        let out = dz.sample_mut(i);
        for px in 0..hw {
            let mut dot = T::zero();
            for ch in 0..p.c {
                dot += g[ch * hw + px] * s[ch * hw + px];
            }
            for ch in 0..p.c {
                let j = ch * hw + px;
                out[j] = s[j] * (g[j] - dot);
            }
        }
    }
    dz
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor(n: usize, c: usize, h: usize, w: usize, seed: u64) -> Tensor<f64> {
        let mut s = seed;
        let data = (0..n * c * h * w)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect();
        Tensor::from_vec(n, c, h, w, data).unwrap()
    }

    /// Direct-loop convolution oracle.
    fn naive_conv(x: &Tensor<f64>, w: &[f64], b: Option<&[f64]>, cout: usize, k: usize) -> Tensor<f64> {
        let (pad, _) = same_padding(k);
        let mut y = Tensor::zeros(x.n, cout, x.h, x.w);
        for n in 0..x.n {
            for co in 0..cout {
                for yy in 0..x.h {
                    for xx in 0..x.w {
                        let mut acc = b.map_or(0.0, |b| b[co]);
                        for ci in 0..x.c {
                            for ky in 0..k {
                                for kx in 0..k {
                                    let sy = yy as isize + ky as isize - pad as isize;
                                    let sx = xx as isize + kx as isize - pad as isize;
                                    if sy >= 0 && sx >= 0 && (sy as usize) < x.h && (sx as usize) < x.w {
                                        acc += w[((co * x.c + ci) * k + ky) * k + kx]
                                            * x.at(n, ci, sy as usize, sx as usize);
                                    }
                                }
                            }
                        }
                        y.data[((n * cout + co) * x.h + yy) * x.w + xx] = acc;
                    }
                }
            }
        }
        y
    }

    #[test]
    fn conv_matches_direct_loops() {
        for k in [1, 2, 3] {
            let x = tensor(2, 3, 5, 4, k as u64);
            let w = tensor(1, 1, 1, 4 * 3 * k * k, 9).data;
            let b = [0.1, -0.2, 0.3, 0.4];
            let y = conv_forward(&x, &w, Some(&b), 4, k);
            let o = naive_conv(&x, &w, Some(&b), 4, k);
            for (a, b) in y.data.iter().zip(&o.data) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_backward_is_adjoint() {
        // <conv(x), g> = <x, dx(g)> for the bias-free linear map.
        for k in [2, 3] {
            let x = tensor(2, 3, 6, 5, 1);
            let w = tensor(1, 1, 1, 2 * 3 * k * k, 2).data;
            let g = tensor(2, 2, 6, 5, 3);
            let y = conv_forward(&x, &w, None, 2, k);
            let mut dw = vec![0.0; w.len()];
            let dx = conv_backward(&x, &w, &g, k, &mut dw, None, true).unwrap();
            let lhs: f64 = y.data.iter().zip(&g.data).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.data.iter().zip(&dx.data).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-10);
            let rhs_w: f64 = w.iter().zip(&dw).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs_w).abs() < 1e-10);
        }
    }

    #[test]
    fn batch_norm_normalizes_per_channel() {
        let x = tensor(3, 2, 4, 4, 5);
        let (y, cache) = bn_forward_train(&x, &[1.0, 2.0], &[0.0, 0.5], 1e-5);
        for ch in 0..2 {
            let vals: Vec<f64> =
                (0..3).flat_map(|n| (0..16).map(move |j| (n, j))).map(|(n, j)| y.sample(n)[ch * 16 + j]).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((m - [0.0, 0.5][ch]).abs() < 1e-12);
            assert!(cache.var[ch] > 0.0);
        }
        let e = bn_forward_eval(&x, &[1.0, 2.0], &[0.0, 0.5], &cache.mean, &cache.var, 1e-5);
        for (a, b) in e.data.iter().zip(&y.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pooling_and_upsampling_shapes_and_adjoints() {
        let x = tensor(1, 2, 4, 6, 7);
        let (p, idx) = maxpool_forward(&x);
        assert_eq!(p.shape(), [1, 2, 2, 3]);
        assert_eq!(
            p.at(0, 1, 1, 2),
            [x.at(0, 1, 2, 4), x.at(0, 1, 2, 5), x.at(0, 1, 3, 4), x.at(0, 1, 3, 5)]
                .into_iter()
                .fold(f64::MIN, f64::max)
        );
        let g = tensor(1, 2, 2, 3, 8);
        let dx = maxpool_backward(&g, &idx, x.shape());
        assert_eq!(dx.data.iter().filter(|&&v| v != 0.0).count(), 12);
        let u = upsample_forward(&p);
        assert_eq!(u.shape(), [1, 2, 4, 6]);
        assert_eq!(u.at(0, 0, 3, 5), p.at(0, 0, 1, 2));
        let gu = tensor(1, 2, 4, 6, 9);
        let du = upsample_backward(&gu);
        let lhs: f64 = u.data.iter().zip(&gu.data).map(|(a, b)| a * b).sum();
        let rhs: f64 = p.data.iter().zip(&du.data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let x = tensor(2, 10, 3, 3, 4);
        let p = softmax(&x);
        for n in 0..2 {
            for j in 0..9 {
                let s: f64 = (0..10).map(|c| p.sample(n)[c * 9 + j]).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
        let (a, b) = split_channels(&concat(&x, &p), 10);
        assert_eq!((a, b), (x, p));
    }
}
