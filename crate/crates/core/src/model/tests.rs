use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::tensor::{grad_check_probes, relative_error};

fn unit_params(cin: usize, cout: usize, stride: usize) -> usize {
    let mut n = cout * cin * 9 + 3 * cout + cout * cout * 9 + 3 * cout;
    if cin != cout || stride != 1 {
        n += cout * cin + cout;
    }
    n
}

/// Independent count for a 3x3, single-input, single-output configuration.
fn expected_param_count(ch: &[usize]) -> usize {
    let levels = ch.len() - 1;
    let mut n = 0;
    let mut prev = 1;
    for &c in &ch[..levels] {
        n += unit_params(prev, c, 2);
        prev = c;
    }
    n += unit_params(prev, ch[levels], 1);
    let mut below = ch[levels];
    for i in (0..levels).rev() {
        n += unit_params(below + ch[i], ch[i], 1);
        let out = if i == 0 { ch[0] } else { ch[i - 1] };
        n += ch[i] * out * 9 + 3 * out;
        below = out;
    }
    n + ch[0] + 1
}

#[test]
fn default_architecture() {
    let (params, arch) = build_seganet(ModelConfig::default(), 0).unwrap();
    assert_eq!(arch.encode_channels(), vec![16, 32, 64, 128, 256]);
    assert_eq!(arch.downsamplings(), 4);
    assert_eq!(arch.upsamplings(), 4);
    let bottom = arch.bottom().unwrap();
    assert_eq!((bottom.residual_units, bottom.stride, bottom.out_channels), (1, 1, 256));
    assert_eq!(params.len(), expected_param_count(&[16, 32, 64, 128, 256]));
    assert_eq!(params.layout().total(), params.len());
}

#[test]
fn layout_partitions_vector() {
    let (params, _) = build_seganet(ModelConfig::with_channels(&[4, 8, 12]), 1).unwrap();
    let mut next = 0;
    for e in params.layout().entries() {
        assert_eq!(e.offset, next, "{}", e.name);
        next += e.len();
    }
    assert_eq!(next, params.len());
    assert_eq!(params.get("enc0.a.act.slope").unwrap(), &[0.25; 4]);
}

#[test]
fn build_is_deterministic() {
    let a = build_seganet(ModelConfig::default(), 7).unwrap().0;
    let b = build_seganet(ModelConfig::default(), 7).unwrap().0;
    let c = build_seganet(ModelConfig::default(), 8).unwrap().0;
    assert_eq!(a.values(), b.values());
    assert_ne!(a.values(), c.values());
}

#[test]
fn invalid_configs() {
    for cfg in [
        ModelConfig::with_channels(&[8]),
        ModelConfig::with_channels(&[8, 8]),
        ModelConfig { down_stride: 3, ..ModelConfig::default() },
        ModelConfig { kernel_size: 4, ..ModelConfig::default() },
        ModelConfig { threshold: 1.0, ..ModelConfig::default() },
    ] {
        assert!(matches!(build_seganet(cfg, 0), Err(ModelError::InvalidConfig(_))));
    }
}

fn small() -> ModelParams<f32> {
    build_seganet(ModelConfig::with_channels(&[4, 8, 16, 24, 32]), 3).unwrap().0
}

fn random_batch(b: usize, h: usize, w: usize, seed: u64) -> Tensor<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn([b, 1, h, w], |_| rng.random_range(0.0..1.0)).unwrap()
}

#[test]
fn zero_weights_give_half_everywhere() {
    let mut p = small();
    p.values_mut().fill(0.0);
    let y = forward(&p, &random_batch(2, 32, 32, 1)).unwrap();
    assert!(y.data().iter().all(|&v| v == 0.5));
}

#[test]
fn output_dims_follow_input() {
    let p = small();
    let y = forward(&p, &random_batch(1, 64, 64, 2)).unwrap();
    assert_eq!(y.dims(), &[1, 1, 64, 64]);
    assert_eq!(ModelConfig::default().padded_dims(70, 70), (80, 80));
    let y = forward(&p, &random_batch(1, 70, 70, 3)).unwrap();
    assert_eq!(y.dims(), &[1, 1, 70, 70]);
    assert!(y.data().iter().all(|&v| v > 0.0 && v < 1.0));
}

#[test]
fn rejects_bad_input() {
    let p = small();
    let mut x = random_batch(1, 32, 32, 4);
    x.data_mut()[5] = f32::NAN;
    assert_eq!(forward(&p, &x), Err(ModelError::NonFiniteInput));
    let two = Tensor::<f32>::zeros([1, 2, 32, 32]).unwrap();
    assert!(matches!(forward(&p, &two), Err(ModelError::InputShape { .. })));
}

#[test]
fn batch_equivariance() {
    let p = small();
    let batch = random_batch(3, 32, 48, 5);
    let joint = forward(&p, &batch).unwrap();
    for s in 0..3 {
        let one = Tensor::new([1, 1, 32, 48], batch.data()[s * 1536..(s + 1) * 1536].to_vec()).unwrap();
        let alone = forward(&p, &one).unwrap();
        for (a, b) in alone.data().iter().zip(&joint.data()[s * 1536..(s + 1) * 1536]) {
            assert!((a - b).abs() <= 1e-6);
        }
    }
}

#[test]
fn segment_stack_tie_rule_and_independence() {
    let mut p = small();
    p.values_mut().fill(0.0);
    let stack = ImageStack::new([2, 32, 32], vec![0.3; 2048], [1.25, 1.25, 10.0]).unwrap();
    let m = segment_stack(&p, &stack, 0.5).unwrap();
    assert!(m.is_empty());
    assert_eq!(m.spacing(), [1.25, 1.25, 10.0]);

    let p = small();
    let slice = random_batch(1, 32, 32, 6).into_data();
    let mut data = slice.clone();
    data.extend(&slice);
    let m = segment_stack(&p, &ImageStack::new([2, 32, 32], data, [1.0; 3]).unwrap(), 0.5).unwrap();
    assert_eq!(m.slice(0), m.slice(1));
}

type E2e = (ModelParams<f64>, Tensor<f64>, Tensor<f64>, Vec<(usize, usize)>);

fn e2e_setup() -> E2e {
    let p32 = build_seganet(ModelConfig::with_channels(&[2, 3, 4, 5, 6]), 11).unwrap().0;
    let params = p32.cast::<f64>();
    let x = random_batch(2, 32, 32, 12).cast::<f64>();
    let target = Tensor::from_fn([2, 1, 32, 32], |i| (((i % 32) as i32 - 16).abs() < 6) as u8 as f64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let probes = (0..6).map(|_| (0, rng.random_range(0..params.len()))).collect();
    (params, x, target, probes)
}

#[test]
fn end_to_end_gradient_f64() {
    let (params, x, target, probes) = e2e_setup();
    let err = grad_check_probes(
        |g, v| {
            let y = params.forward_graph(g, v[0], &x).map_err(|e| match e {
                ModelError::Tensor(t) => t,
                other => panic!("{other}"),
            })?;
            g.dice_loss(y, &target, 1e-5)
        },
        &[Tensor::new(vec![params.len()], params.values().to_vec()).unwrap()],
        1e-5,
        &probes,
    )
    .unwrap();
    assert!(err <= 1e-5, "relative error {err}");
}

#[test]
fn end_to_end_gradient_f32_against_f64_differences() {
    let (params, x, target, probes) = e2e_setup();
    let loss64 = |values: &[f64]| {
        let p = ModelParams::from_values(params.config().clone(), values.to_vec()).unwrap();
        let mut g = Graph::new();
        let v = p.leaf(&mut g, false);
        let y = p.forward_graph(&mut g, v, &x).unwrap();
        let l = g.dice_loss(y, &target, 1e-5).unwrap();
        g.value(l).data()[0]
    };
    let p32 = params.cast::<f32>();
    let mut g = Graph::<f32>::new();
    let v = p32.leaf(&mut g, true);
    let y = p32.forward_graph(&mut g, v, &x.cast()).unwrap();
    let l = g.dice_loss(y, &target.cast(), 1e-5).unwrap();
    g.backward(l).unwrap();
    let grad = g.grad(v).unwrap();
    for &(_, j) in &probes {
        let mut vals = params.values().to_vec();
        vals[j] += 1e-5;
        let plus = loss64(&vals);
        vals[j] -= 2e-5;
        let minus = loss64(&vals);
        let numeric = (plus - minus) / 2e-5;
        let err = relative_error(grad[j] as f64, numeric);
        assert!(err <= 1e-3, "param {j}: analytic {} numeric {numeric}", grad[j]);
    }
}
