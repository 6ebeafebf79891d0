//! Finite-difference gradient cases: each builds one random toy instance
//! (n <= 16, d <= 8) and returns its worst relative error.

use super::{fd_check, fd_check_store, random_tensor};
use scgir_core::augment::ImageBatch;
use scgir_core::encoder::{scgir_graph, EncoderConfig, EncoderModel};
use scgir_core::goai::{GoaiConfig, GoaiModel};
use scgir_core::numeric::{GradTape, Mode, Rng, Tensor, Var};
use scgir_core::Result;

pub const INSTANCES: u64 = 20;
pub const TOL: f64 = 1e-4;

type Case = fn(&mut Rng) -> f64;

fn dims(rng: &mut Rng) -> (usize, usize) {
    (2 + rng.below(15), 1 + rng.below(8))
}

fn unary(rng: &mut Rng, op: fn(&mut GradTape, Var) -> Result<Var>) -> f64 {
    let (n, d) = dims(rng);
    let x = random_tensor(&[n, d], rng);
    fd_check(vec![x], &[0], |t, v| op(t, v[0]), rng)
}

fn binary(rng: &mut Rng, op: fn(&mut GradTape, Var, Var) -> Result<Var>, row: bool) -> f64 {
    let (n, d) = dims(rng);
    let a = random_tensor(&[n, d], rng);
    let b = if row { random_tensor(&[d], rng) } else { random_tensor(&[n, d], rng) };
    fd_check(vec![a, b], &[0, 1], |t, v| op(t, v[0], v[1]), rng)
}

fn matmul(rng: &mut Rng) -> f64 {
    let (n, d) = dims(rng);
    let k = 1 + rng.below(8);
    let a = random_tensor(&[n, d], rng);
    let b = random_tensor(&[d, k], rng);
    fd_check(vec![a, b], &[0, 1], |t, v| t.matmul(v[0], v[1]), rng)
}

fn prelu(rng: &mut Rng) -> f64 {
    let (n, d) = dims(rng);
    let x = random_tensor(&[n, d], rng);
    let slope = Tensor::vector(vec![rng.uniform_range(-0.5, 0.5)]);
    fd_check(vec![x, slope], &[0, 1], |t, v| t.prelu(v[0], v[1]), rng)
}

fn diag(rng: &mut Rng) -> f64 {
    let d = 1 + rng.below(8);
    let x = random_tensor(&[d, d], rng);
    fd_check(vec![x], &[0], |t, v| t.diag(v[0]), rng)
}

fn conv2d(rng: &mut Rng) -> f64 {
    let n = 1 + rng.below(3);
    let c = 1 + rng.below(2);
    let o = 1 + rng.below(3);
    let hw = 3 + rng.below(4);
    let stride = 1 + rng.below(2);
    let x = random_tensor(&[n, c, hw, hw], rng);
    let w = random_tensor(&[o, c, 3, 3], rng);
    let b = random_tensor(&[o], rng);
    fd_check(vec![x, w, b], &[0, 1, 2], |t, v| t.conv2d(v[0], v[1], v[2], stride, 1), rng)
}

fn global_avg_pool(rng: &mut Rng) -> f64 {
    let x = random_tensor(&[1 + rng.below(3), 1 + rng.below(3), 3, 4], rng);
    fd_check(vec![x], &[0], |t, v| t.global_avg_pool(v[0]), rng)
}

fn softmax_cross_entropy(rng: &mut Rng) -> f64 {
    let (n, _) = dims(rng);
    let c = 2 + rng.below(6);
    let labels: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
    let logits = random_tensor(&[n, c], rng);
    fd_check(vec![logits], &[0], move |t, v| t.softmax_cross_entropy(v[0], &labels), rng)
}

fn scgir_loss(rng: &mut Rng) -> f64 {
    let (n, d) = dims(rng);
    let n = n.max(3);
    let z1 = random_tensor(&[n, d], rng);
    let z2 = random_tensor(&[n, d], rng);
    // a large lambda keeps the off-diagonal path visible in the check
    fd_check(vec![z1, z2], &[0, 1], |t, v| Ok(scgir_graph(t, v[0], v[1], 0.3, 1e-5)?.total), rng)
}

fn encoder_end_to_end(rng: &mut Rng) -> f64 {
    let cfg = EncoderConfig {
        in_channels: 1,
        height: 4,
        width: 4,
        conv_channels: vec![2],
        head_dims: vec![4, 3],
        tied: rng.bernoulli(0.5),
    };
    let model = EncoderModel::new(cfg, rng).unwrap();
    let n = 4 + rng.below(4);
    let mut pix = || (0..n * 16).map(|_| rng.uniform()).collect::<Vec<f64>>();
    let v1 = ImageBatch::new(n, 1, 4, 4, pix()).unwrap();
    let v2 = ImageBatch::new(n, 1, 4, 4, pix()).unwrap();
    let second = model.branch_count() - 1;
    fd_check_store(model.store(), |_, tape, params| {
        let (z1, _) = model.forward_on_tape(tape, params, &v1, 0, Mode::Train).unwrap();
        let (z2, _) = model.forward_on_tape(tape, params, &v2, second, Mode::Train).unwrap();
        scgir_graph(tape, z1, z2, 0.05, 1e-5).unwrap().total
    })
}

fn goai_end_to_end(rng: &mut Rng) -> f64 {
    let (n, d) = dims(rng);
    let n = n.max(3);
    let classes = 2 + rng.below(3);
    let cfg = GoaiConfig {
        input_dim: d,
        hidden: vec![5, 4, 3],
        classes,
        prelu_init: 0.25,
    };
    let model = GoaiModel::new(cfg, rng).unwrap();
    let y = random_tensor(&[n, d], rng);
    let labels: Vec<usize> = (0..n).map(|_| rng.below(classes)).collect();
    fd_check_store(model.store(), |_, tape, params| {
        let x = tape.leaf(y.clone());
        let (logits, _) = model.forward_on_tape(tape, params, x, Mode::Train).unwrap();
        tape.softmax_cross_entropy(logits, &labels).unwrap()
    })
}

pub fn cases() -> Vec<(&'static str, Case)> {
    vec![
        ("matmul", matmul),
        ("add", |r| binary(r, GradTape::add, false)),
        ("sub", |r| binary(r, GradTape::sub, false)),
        ("mul", |r| binary(r, GradTape::mul, false)),
        ("add_row", |r| binary(r, GradTape::add_row, true)),
        ("mul_row", |r| binary(r, GradTape::mul_row, true)),
        ("scale", |r| unary(r, |t, v| Ok(t.scale(v, -1.7)))),
        ("add_scalar", |r| unary(r, |t, v| Ok(t.add_scalar(v, 0.3)))),
        ("square", |r| unary(r, |t, v| Ok(t.square(v)))),
        ("gelu", |r| unary(r, |t, v| Ok(t.gelu(v)))),
        ("sum", |r| unary(r, |t, v| Ok(t.sum(v)))),
        ("transpose", |r| unary(r, |t, v| t.transpose(v))),
        ("reshape", |r| {
            unary(r, |t, v| {
                let len = t.value(v).len();
                t.reshape(v, &[len])
            })
        }),
        ("standardize", |r| unary(r, |t, v| t.standardize(v, 1e-5))),
        ("prelu", prelu),
        ("diag", diag),
        ("conv2d", conv2d),
        ("global_avg_pool", global_avg_pool),
        ("softmax_cross_entropy", softmax_cross_entropy),
        ("scgir_loss", scgir_loss),
        ("encoder_end_to_end", encoder_end_to_end),
        ("goai_end_to_end", goai_end_to_end),
    ]
}

/// Worst error of a case over `INSTANCES` seeded instances.
pub fn worst(case: Case) -> f64 {
    (0..INSTANCES)
        .map(|seed| case(&mut Rng::seed(1000 + seed)))
        .fold(0.0, f64::max)
}
