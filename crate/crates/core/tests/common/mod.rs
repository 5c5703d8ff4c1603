#![allow(dead_code)]

use hanst_core::autodiff::{ParamId, ParamStore, Tape, Var};
use hanst_core::models::{Model, ModelConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Largest relative error between analytic and central-difference gradients
/// over every element of every parameter.
pub fn max_gradient_error<F>(store: &mut ParamStore, build: F, step: f64) -> (f64, String)
where
    F: Fn(&mut Tape) -> Var,
{
    let analytic = {
        let mut tape = Tape::new(store);
        let loss = build(&mut tape);
        tape.backward(loss).unwrap()
    };
    let eval = |store: &ParamStore| {
        let mut tape = Tape::new(store);
        let loss = build(&mut tape);
        tape.value(loss).item()
    };
    let mut worst = (0.0, String::new());
    for pid in 0..store.len() {
        let id = ParamId(pid);
        for i in 0..store.tensor(id).numel() {
            let orig = store.tensor(id).data()[i];
            store.get_mut(id).tensor.data_mut()[i] = orig + step;
            let plus = eval(store);
            store.get_mut(id).tensor.data_mut()[i] = orig - step;
            let minus = eval(store);
            store.get_mut(id).tensor.data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let exact = analytic.get(id).map_or(0.0, |g| g[i]);
            let rel = (exact - numeric).abs() / exact.abs().max(numeric.abs()).max(1e-6);
            if rel > worst.0 {
                worst = (rel, format!("{}[{i}] analytic {exact} numeric {numeric}", store.get(id).name));
            }
        }
    }
    worst
}

/// Gradient check of a model's full forward pass plus loss (eval mode).
pub fn model_gradient_error(model: &mut Model, docs: &[Vec<Vec<u32>>], targets: &[f64]) -> (f64, String) {
    let frozen = model.clone();
    let refs: Vec<&[Vec<u32>]> = docs.iter().map(Vec::as_slice).collect();
    max_gradient_error(
        model.params_mut(),
        |tape| {
            let mut r = rng(0);
            let out = frozen.forward(tape, &refs, false, &mut r).unwrap();
            frozen.loss(tape, out.output, targets).unwrap()
        },
        1e-5,
    )
}

// ---- plain-f64 oracles -------------------------------------------------

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One LSTM step with gate rows (i, f, g, o) and weight `[4h × (in + h)]`.
pub fn lstm_step(w: &[f64], b: &[f64], x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hs = h.len();
    let z: Vec<f64> = x.iter().chain(h).copied().collect();
    let gate = |row: usize| -> f64 {
        let wr = &w[row * z.len()..(row + 1) * z.len()];
        wr.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() + b[row]
    };
    let mut h_new = vec![0.0; hs];
    let mut c_new = vec![0.0; hs];
    for j in 0..hs {
        let i = sigmoid(gate(j));
        let f = sigmoid(gate(hs + j));
        let g = gate(2 * hs + j).tanh();
        let o = sigmoid(gate(3 * hs + j));
        c_new[j] = f * c[j] + i * g;
        h_new[j] = o * c_new[j].tanh();
    }
    (h_new, c_new)
}

pub fn lstm_run(w: &[f64], b: &[f64], xs: &[Vec<f64>], hidden: usize, reverse: bool) -> Vec<Vec<f64>> {
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let mut out = vec![Vec::new(); xs.len()];
    let order: Vec<usize> = if reverse { (0..xs.len()).rev().collect() } else { (0..xs.len()).collect() };
    for t in order {
        let (hn, cn) = lstm_step(w, b, &xs[t], &h, &c);
        h = hn;
        c = cn;
        out[t] = h.clone();
    }
    out
}

pub fn param<'a>(model: &'a Model, name: &str) -> &'a [f64] {
    let id = model.params().find(name).unwrap_or_else(|| panic!("no parameter {name}"));
    model.params().tensor(id).data()
}

pub fn bilstm(model: &Model, prefix: &str, xs: &[Vec<f64>], hidden: usize) -> Vec<Vec<f64>> {
    let f = lstm_run(param(model, &format!("{prefix}.fwd.weight")), param(model, &format!("{prefix}.fwd.bias")), xs, hidden, false);
    let b = lstm_run(param(model, &format!("{prefix}.bwd.weight")), param(model, &format!("{prefix}.bwd.bias")), xs, hidden, true);
    f.into_iter().zip(b).map(|(f, b)| f.into_iter().chain(b).collect()).collect()
}

pub fn attention(model: &Model, prefix: &str, hs: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let w = param(model, &format!("{prefix}.weight"));
    let b = param(model, &format!("{prefix}.bias"));
    let u = param(model, &format!("{prefix}.context"));
    let d = u.len();
    let scores: Vec<f64> = hs
        .iter()
        .map(|h| {
            (0..d)
                .map(|r| {
                    let proj: f64 = (0..d).map(|k| w[r * d + k] * h[k]).sum::<f64>() + b[r];
                    proj.tanh() * u[r]
                })
                .sum()
        })
        .collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let alpha: Vec<f64> = exps.iter().map(|e| e / total).collect();
    let mut pooled = vec![0.0; d];
    for (a, h) in alpha.iter().zip(hs) {
        for k in 0..d {
            pooled[k] += a * h[k];
        }
    }
    (pooled, alpha)
}

pub fn embedding_row(model: &Model, id: u32) -> Vec<f64> {
    let d = model.config().embedding_dim;
    param(model, "embedding")[id as usize * d..(id as usize + 1) * d].to_vec()
}

pub fn toy_config(kind: hanst_core::models::ModelKind) -> ModelConfig {
    ModelConfig {
        kind,
        vocab_size: 50,
        embedding_dim: 8,
        hidden: 6,
        dropout: 0.5,
        head: hanst_core::models::HeadKind::Classify,
        tagset: hanst_core::text::TagSet::None,
        freeze_embeddings: false,
    }
}
