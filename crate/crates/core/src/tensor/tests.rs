use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn random(dims: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(dims.to_vec(), |_| rng.random_range(-1.0..1.0)).unwrap()
}

/// Direct nested-loop cross-correlation, independent of im2col.
fn naive_conv(x: &Tensor<f64>, w: &Tensor<f64>, b: &[f64], stride: usize, pad: usize) -> Tensor<f64> {
    let (n, ci, h, wd) = (x.dims()[0], x.dims()[1], x.dims()[2], x.dims()[3]);
    let (co, kh, kw) = (w.dims()[0], w.dims()[2], w.dims()[3]);
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (wd + 2 * pad - kw) / stride + 1;
    let mut out = Tensor::zeros([n, co, oh, ow]).unwrap();
    for s in 0..n {
        for o in 0..co {
            for r in 0..oh {
                for c in 0..ow {
                    let mut acc = b[o];
                    for i in 0..ci {
                        for p in 0..kh {
                            for q in 0..kw {
                                let y = (r * stride + p) as isize - pad as isize;
                                let xx = (c * stride + q) as isize - pad as isize;
                                if y >= 0 && xx >= 0 && (y as usize) < h && (xx as usize) < wd {
                                    acc += x.at4(s, i, y as usize, xx as usize)
                                        * w.data()[((o * ci + i) * kh + p) * kw + q];
                                }
                            }
                        }
                    }
                    out.data_mut()[((s * co + o) * oh + r) * ow + c] = acc;
                }
            }
        }
    }
    out
}

/// Scatter definition of the transposed convolution.
fn naive_conv_t(x: &Tensor<f64>, w: &Tensor<f64>, stride: usize, pad: usize, oh: usize, ow: usize) -> Tensor<f64> {
    let (n, ci, h, wd) = (x.dims()[0], x.dims()[1], x.dims()[2], x.dims()[3]);
    let (co, kh, kw) = (w.dims()[1], w.dims()[2], w.dims()[3]);
    let mut out = Tensor::zeros([n, co, oh, ow]).unwrap();
    for s in 0..n {
        for i in 0..ci {
            for r in 0..h {
                for c in 0..wd {
                    for o in 0..co {
                        for p in 0..kh {
                            for q in 0..kw {
                                let y = (r * stride + p) as isize - pad as isize;
                                let xx = (c * stride + q) as isize - pad as isize;
                                if y >= 0 && xx >= 0 && (y as usize) < oh && (xx as usize) < ow {
                                    out.data_mut()[((s * co + o) * oh + y as usize) * ow + xx as usize] +=
                                        x.at4(s, i, r, c) * w.data()[((i * co + o) * kh + p) * kw + q];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn conv_value(x: Tensor<f64>, w: Tensor<f64>, b: Option<Tensor<f64>>, stride: usize, pad: usize) -> Tensor<f64> {
    let mut g = Graph::new();
    let (x, w) = (g.leaf(x, false), g.leaf(w, false));
    let b = b.map(|b| g.leaf(b, false));
    let y = g.conv2d(x, w, b, stride, pad).unwrap();
    g.value(y).clone()
}

#[test]
fn conv2d_identity_kernel() {
    let x = random(&[2, 1, 5, 5], 1);
    let y = conv_value(x.clone(), Tensor::full([1, 1, 1, 1], 1.0).unwrap(), Some(Tensor::zeros([1]).unwrap()), 1, 0);
    assert_eq!(y, x);
}

#[test]
fn conv2d_ones_arithmetic() {
    let y = conv_value(Tensor::full([1, 1, 3, 3], 1.0).unwrap(), Tensor::full([1, 1, 2, 2], 1.0).unwrap(), None, 1, 0);
    assert_eq!(y.dims(), &[1, 1, 2, 2]);
    assert_eq!(y.data(), &[4.0; 4]);
}

#[test]
fn conv2d_stride2_shape_and_naive_oracle() {
    let x = random(&[2, 3, 16, 16], 2);
    let w = random(&[4, 3, 3, 3], 3);
    let b = random(&[4], 4);
    let y = conv_value(x.clone(), w.clone(), Some(b.clone()), 2, 1);
    assert_eq!(y.dims(), &[2, 4, 8, 8]);
    let oracle = naive_conv(&x, &w, b.data(), 2, 1);
    assert!(y.max_abs_diff(&oracle).unwrap() < 1e-12);
}

#[test]
fn conv2d_errors() {
    let mut g = Graph::<f64>::new();
    let x = g.leaf(random(&[1, 2, 4, 4], 0), false);
    let w = g.leaf(random(&[1, 3, 3, 3], 0), false);
    assert!(matches!(g.conv2d(x, w, None, 1, 1), Err(TensorError::ChannelMismatch { .. })));
    let big = g.leaf(random(&[1, 2, 7, 7], 0), false);
    assert!(g.conv2d(x, big, None, 1, 0).is_err());
}

#[test]
fn odd_kernels_preserve_spatial_dims() {
    for k in [1usize, 3, 5, 7] {
        let y = conv_value(random(&[1, 1, 9, 11], 5), random(&[1, 1, k, k], 6), None, 1, (k - 1) / 2);
        assert_eq!(&y.dims()[2..], &[9, 11], "k = {k}");
    }
}

fn conv_t_value(x: Tensor<f64>, w: Tensor<f64>, stride: usize, pad: usize) -> Tensor<f64> {
    let mut g = Graph::new();
    let (x, w) = (g.leaf(x, false), g.leaf(w, false));
    let y = g.conv_transpose2d(x, w, None, stride, pad).unwrap();
    g.value(y).clone()
}

#[test]
fn conv_transpose_doubles_extent() {
    let y = conv_t_value(random(&[1, 2, 8, 8], 7), random(&[2, 3, 3, 3], 8), 2, 1);
    assert_eq!(y.dims(), &[1, 3, 16, 16]);
}

#[test]
fn conv_transpose_ones_arithmetic() {
    let v = 1.75;
    let y = conv_t_value(Tensor::full([1, 1, 1, 1], v).unwrap(), Tensor::full([1, 1, 2, 2], 1.0).unwrap(), 2, 0);
    assert_eq!(y.dims(), &[1, 1, 2, 2]);
    assert_eq!(y.data(), &[v; 4]);
}

#[test]
fn conv_transpose_matches_scatter_oracle() {
    let x = random(&[2, 3, 5, 4], 9);
    let w = random(&[3, 2, 3, 3], 10);
    let y = conv_t_value(x.clone(), w.clone(), 2, 1);
    let oracle = naive_conv_t(&x, &w, 2, 1, 10, 8);
    assert!(y.max_abs_diff(&oracle).unwrap() < 1e-12);
}

#[test]
fn conv_transpose_then_conv_restores_dims() {
    let up = conv_t_value(random(&[1, 2, 6, 6], 11), random(&[2, 2, 3, 3], 12), 2, 1);
    let down = conv_value(up, random(&[2, 2, 3, 3], 13), None, 2, 1);
    assert_eq!(&down.dims()[2..], &[6, 6]);
}

fn norm_value(x: Tensor<f64>, eps: f64) -> Tensor<f64> {
    let c = x.dims()[1];
    let mut g = Graph::new();
    let xv = g.leaf(x, false);
    let gamma = g.leaf(Tensor::full([c], 1.0).unwrap(), false);
    let beta = g.leaf(Tensor::zeros([c]).unwrap(), false);
    let y = g.instance_norm(xv, gamma, beta, eps).unwrap();
    g.value(y).clone()
}

#[test]
fn instance_norm_constant_channel_is_zero() {
    let y = norm_value(Tensor::full([1, 2, 4, 4], 3.5).unwrap(), 1e-5);
    assert!(y.data().iter().all(|v| v.abs() < 1e-2));
}

#[test]
fn instance_norm_two_pixels() {
    let y = norm_value(Tensor::new([1, 1, 1, 2], vec![1.0, 3.0]).unwrap(), 1e-14);
    assert!((y.data()[0] + 1.0).abs() < 1e-9);
    assert!((y.data()[1] - 1.0).abs() < 1e-9);
}

#[test]
fn instance_norm_is_per_instance() {
    let a = random(&[1, 3, 4, 5], 20);
    let b = random(&[1, 3, 4, 5], 21).cast::<f64>();
    let mut both = a.data().to_vec();
    both.extend_from_slice(b.data());
    let joint = norm_value(Tensor::new([2, 3, 4, 5], both).unwrap(), 1e-5);
    let alone = norm_value(a, 1e-5);
    assert_eq!(&joint.data()[..alone.numel()], alone.data());
}

#[test]
fn instance_norm_standardizes() {
    let x = Tensor::from_fn([2, 3, 8, 8], |i| ((i * 7919 % 101) as f64) * 0.3 - 10.0).unwrap();
    let y = norm_value(x, 1e-5);
    for plane in y.data().chunks(64) {
        let mean = plane.iter().sum::<f64>() / 64.0;
        let var = plane.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 64.0;
        assert!(mean.abs() <= 1e-5);
        assert!((var - 1.0).abs() <= 1e-3);
    }
}

#[test]
fn prelu_branches_and_slope_derivative() {
    let mut g = Graph::<f64>::new();
    let x = g.leaf(Tensor::new([1, 1, 1, 2], vec![2.0, -2.0]).unwrap(), true);
    let a = g.leaf(Tensor::full([1], 0.25).unwrap(), true);
    let y = g.prelu(x, a).unwrap();
    assert_eq!(g.value(y).data(), &[2.0, -0.5]);
    g.backward_with_seed(y, &Tensor::new([1, 1, 1, 2], vec![0.0, 1.0]).unwrap()).unwrap();
    assert_eq!(g.grad(a).unwrap(), &[-2.0]);
    assert_eq!(g.grad(x).unwrap(), &[0.0, 0.25]);
}

#[test]
fn sigmoid_values_and_derivative() {
    let mut g = Graph::<f64>::new();
    let x = g.leaf(Tensor::new([3], vec![0.0, 50.0, -50.0]).unwrap(), true);
    let y = g.sigmoid(x);
    let v = g.value(y).data().to_vec();
    assert_eq!(v[0], 0.5);
    assert!((v[1] - 1.0).abs() < 1e-9 && v[1] < 1.0);
    assert!(v[2] > 0.0 && v[2] < 1e-9);
    g.backward_with_seed(y, &Tensor::new([3], vec![1.0, 0.0, 0.0]).unwrap()).unwrap();
    assert_eq!(g.grad(x).unwrap()[0], 0.25);
}

#[test]
fn sigmoid_f32_stays_inside_unit_interval() {
    let mut g = Graph::<f32>::new();
    let x = g.leaf(Tensor::new([4], vec![30.0, -120.0, 1e30, -1e30]).unwrap(), false);
    let y = g.sigmoid(x);
    assert!(g.value(y).data().iter().all(|&p| p > 0.0 && p < 1.0));
}

#[test]
fn concat_then_slice_is_identity() {
    let x = random(&[2, 1, 3, 3], 30);
    let mut g = Graph::new();
    let a = g.leaf(x.clone(), false);
    let z = g.leaf(Tensor::zeros([2, 1, 3, 3]).unwrap(), false);
    let c = g.concat_channels(a, z).unwrap();
    assert_eq!(g.value(c).dims(), &[2, 2, 3, 3]);
    assert_eq!(g.value(c).slice_channels(0..1).unwrap(), x);
    let bad = g.leaf(Tensor::zeros([2, 1, 3, 4]).unwrap(), false);
    assert!(g.concat_channels(a, bad).is_err());
}

#[test]
fn concat_routes_gradients() {
    let mut g = Graph::<f64>::new();
    let a = g.leaf(random(&[1, 2, 2, 2], 31), true);
    let b = g.leaf(random(&[1, 1, 2, 2], 32), true);
    let c = g.concat_channels(a, b).unwrap();
    let seed = Tensor::from_fn([1, 3, 2, 2], |i| i as f64).unwrap();
    g.backward_with_seed(c, &seed).unwrap();
    assert_eq!(g.grad(a).unwrap(), &seed.data()[..8]);
    assert_eq!(g.grad(b).unwrap(), &seed.data()[8..]);
}

#[test]
fn add_values() {
    let mut g = Graph::<f64>::new();
    let a = g.leaf(Tensor::new([2], vec![1.0, 5.0]).unwrap(), false);
    let b = g.leaf(Tensor::new([2], vec![2.0, 0.0]).unwrap(), false);
    let s = g.add(a, b).unwrap();
    assert_eq!(g.value(s).data(), &[3.0, 5.0]);
    let c = g.leaf(Tensor::zeros([3]).unwrap(), false);
    assert!(g.add(a, c).is_err());
}

#[test]
fn backward_twice_is_an_error() {
    let mut g = Graph::<f64>::new();
    let a = g.leaf(Tensor::scalar(2.0), true);
    let b = g.add(a, a).unwrap();
    g.backward(b).unwrap();
    assert_eq!(g.grad(a).unwrap(), &[2.0]);
    assert_eq!(g.backward(b), Err(TensorError::BackwardTwice));
}

#[test]
fn grad_check_reference_thresholds() {
    let prelu = grad_check(
        |g, v| g.prelu(v[0], v[1]),
        &[random(&[2, 3, 3, 3], 40), Tensor::new([3], vec![0.25, 0.1, -0.3]).unwrap()],
        1e-5,
    )
    .unwrap();
    assert!(prelu <= 1e-7, "prelu {prelu}");

    let conv = grad_check(
        |g, v| g.conv2d(v[0], v[1], Some(v[2]), 1, 1),
        &[random(&[1, 2, 4, 4], 41), random(&[2, 2, 3, 3], 42), random(&[2], 43)],
        1e-5,
    )
    .unwrap();
    assert!(conv <= 1e-6, "conv {conv}");

    let norm = grad_check(
        |g, v| g.instance_norm(v[0], v[1], v[2], 1e-5),
        &[random(&[2, 2, 3, 3], 44), random(&[2], 45), random(&[2], 46)],
        1e-5,
    )
    .unwrap();
    assert!(norm <= 1e-5, "instance_norm {norm}");

    let add = grad_check(|g, v| g.add(v[0], v[1]), &[random(&[3, 4], 47), random(&[3, 4], 48)], 1e-5).unwrap();
    assert!(add <= 1e-6, "add {add}");
}

#[test]
fn view_and_crop_gradients() {
    let err = grad_check(
        |g, v| {
            let w = g.view(v[0], 3, &[1, 1, 2, 2])?;
            let c = g.crop2d(v[1], 1, 0, 3, 3)?;
            let y = g.conv2d(c, w, None, 1, 0)?;
            Ok(g.sigmoid(y))
        },
        &[random(&[9], 50), random(&[1, 1, 4, 3], 51)],
        1e-5,
    )
    .unwrap();
    assert!(err <= 1e-7, "{err}");
}

#[test]
fn forward_backward_deterministic() {
    let run = || {
        let mut g = Graph::<f32>::new();
        let x = g.leaf(random(&[2, 2, 6, 6], 60).cast(), true);
        let w = g.leaf(random(&[3, 2, 3, 3], 61).cast(), true);
        let y = g.conv2d(x, w, None, 2, 1).unwrap();
        let s = g.sigmoid(y);
        let t = Tensor::from_fn([2, 3, 3, 3], |i| (i % 2) as f32).unwrap();
        let l = g.dice_loss(s, &t, 1e-5).unwrap();
        g.backward(l).unwrap();
        (g.value(l).data().to_vec(), g.grad(w).unwrap().to_vec(), g.grad(x).unwrap().to_vec())
    };
    assert_eq!(run(), run());
}
