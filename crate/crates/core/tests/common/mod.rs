//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

pub mod channel_checks;
pub mod grad_cases;

use scgir_core::numeric::{BoundParams, GradTape, ParamStore, Rng, Tensor, Var};
use scgir_core::Result;

pub const FD_STEP: f64 = 1e-5;

/// `|a - n| / max(|a|, |n|, 1)`: relative for large gradients, absolute near zero.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1.0)
}

pub fn random_tensor(shape: &[usize], rng: &mut Rng) -> Tensor {
    let len = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..len).map(|_| rng.normal()).collect()).unwrap()
}

/// Scalar probe: non-scalar outputs are contracted with fixed random weights.
fn probe<F>(inputs: &[Tensor], weights: &Option<Tensor>, f: &F) -> Result<(GradTape, Vec<Var>, Var)>
where
    F: Fn(&mut GradTape, &[Var]) -> Result<Var>,
{
    let mut tape = GradTape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let loss = match weights {
        None => out,
        Some(w) => {
            let wv = tape.leaf(w.clone());
            let prod = tape.mul(out, wv)?;
            tape.sum(prod)
        }
    };
    Ok((tape, vars, loss))
}

/// Max relative error between tape gradients and central differences over
/// every element of every input listed in `check`.
pub fn fd_check<F>(inputs: Vec<Tensor>, check: &[usize], f: F, rng: &mut Rng) -> f64
where
    F: Fn(&mut GradTape, &[Var]) -> Result<Var>,
{
    let (tape, _, loss) = probe(&inputs, &None, &f).unwrap();
    let out_shape = tape.value(loss).shape().to_vec();
    let weights = if out_shape.iter().product::<usize>() == 1 && tape.value(loss).is_scalar() {
        None
    } else {
        Some(random_tensor(&out_shape, rng))
    };
    let (mut tape, vars, loss) = probe(&inputs, &weights, &f).unwrap();
    let grads = tape.backward(loss).unwrap();
    let eval = |ins: &[Tensor]| {
        let (t, _, l) = probe(ins, &weights, &f).unwrap();
        t.value(l).item()
    };
    let mut worst = 0.0f64;
    for &k in check {
        let analytic = grads.wrt(vars[k]);
        for j in 0..inputs[k].len() {
            let mut plus = inputs.clone();
            plus[k].data_mut()[j] += FD_STEP;
            let mut minus = inputs.clone();
            minus[k].data_mut()[j] -= FD_STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(analytic.data()[j], numeric));
        }
    }
    worst
}

/// Same check for a loss over every trainable entry of a parameter store.
pub fn fd_check_store<F>(store: &ParamStore, f: F) -> f64
where
    F: Fn(&ParamStore, &mut GradTape, &BoundParams) -> Var,
{
    let mut tape = GradTape::new();
    let params = store.bind(&mut tape);
    let loss = f(store, &mut tape, &params);
    let grads = params.collect(&tape.backward(loss).unwrap());
    let eval = |s: &ParamStore| {
        let mut t = GradTape::new();
        let p = s.bind(&mut t);
        let l = f(s, &mut t, &p);
        t.value(l).item()
    };
    let mut worst = 0.0f64;
    for (k, entry) in store.entries().iter().enumerate() {
        if !entry.trainable {
            continue;
        }
        for j in 0..entry.value.len() {
            let mut plus = store.clone();
            plus.entries_mut()[k].value.data_mut()[j] += FD_STEP;
            let mut minus = store.clone();
            minus.entries_mut()[k].value.data_mut()[j] -= FD_STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(grads[k].data()[j], numeric));
        }
    }
    worst
}

/// Kolmogorov distribution tail `P(K > lambda)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        s += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

/// One-sample KS statistic and asymptotic p-value against `cdf`.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    (d, kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d))
}

/// Confusion-matrix reference: `m[true][pred]`.
pub fn confusion(preds: &[usize], labels: &[usize], classes: usize) -> Vec<Vec<u64>> {
    let mut m = vec![vec![0u64; classes]; classes];
    for (&p, &l) in preds.iter().zip(labels) {
        m[l][p] += 1;
    }
    m
}

pub fn brute_accuracy(preds: &[usize], labels: &[usize], classes: usize) -> f64 {
    let m = confusion(preds, labels, classes);
    let diag: u64 = (0..classes).map(|c| m[c][c]).sum();
    diag as f64 / preds.len() as f64
}

/// Macro F1 via precision and recall, over classes seen in either vector.
pub fn brute_macro_f1(preds: &[usize], labels: &[usize], classes: usize) -> f64 {
    let m = confusion(preds, labels, classes);
    let mut f1s = Vec::new();
    for c in 0..classes {
        let tp = m[c][c] as f64;
        let predicted: u64 = (0..classes).map(|t| m[t][c]).sum();
        let actual: u64 = m[c].iter().sum();
        if predicted == 0 && actual == 0 {
            continue;
        }
        let p = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
        let r = if actual > 0 { tp / actual as f64 } else { 0.0 };
        f1s.push(if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 });
    }
    f1s.iter().sum::<f64>() / f1s.len() as f64
}
