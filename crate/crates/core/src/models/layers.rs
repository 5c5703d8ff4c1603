use rand::Rng;

use crate::autodiff::{xavier_init, zeros_init, ParamId, ParamStore, Tape, Tensor, Var, XavierVariant};
use crate::error::Result;

/// Single-bias LSTM cell with gate rows ordered input, forget, cell, output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmCell {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let weight = store.add(
            format!("{name}.weight"),
            xavier_init(&[4 * hidden, input + hidden], XavierVariant::Normal, rng),
        );
        let bias = store.add(format!("{name}.bias"), zeros_init(&[4 * hidden]));
        Self {
            weight,
            bias,
            input,
            hidden,
        }
    }

    /// One step; returns `(h, c)`.
    pub fn step(&self, tape: &mut Tape, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        let hs = self.hidden;
        let (w, b) = (tape.param(self.weight), tape.param(self.bias));
        let z = tape.concat_cols(&[x, h])?;
        let zw = tape.matmul_bt(z, w)?;
        let gates = tape.add_row(zw, b)?;
        let i = tape.slice_cols(gates, 0, hs)?;
        let f = tape.slice_cols(gates, hs, 2 * hs)?;
        let g = tape.slice_cols(gates, 2 * hs, 3 * hs)?;
        let o = tape.slice_cols(gates, 3 * hs, 4 * hs)?;
        let (i, f, o) = (tape.sigmoid(i), tape.sigmoid(f), tape.sigmoid(o));
        let g = tape.tanh(g);
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c_new = tape.add(fc, ig)?;
        let tc = tape.tanh(c_new);
        let h_new = tape.mul(o, tc)?;
        Ok((h_new, c_new))
    }

    /// Runs over `inputs` (each `[rows × input]`). Rows whose mask is false at
    /// a step carry their previous state unchanged, so trailing padding in
    /// either direction never reaches real positions.
    pub fn run(&self, tape: &mut Tape, inputs: &[Var], masks: &[Vec<bool>], reverse: bool) -> Result<Vec<Var>> {
        let rows = tape.value(inputs[0]).rows();
        let mut h = tape.constant(Tensor::zeros(&[rows, self.hidden]));
        let mut c = tape.constant(Tensor::zeros(&[rows, self.hidden]));
        let mut out = vec![h; inputs.len()];
        let order: Vec<usize> = if reverse {
            (0..inputs.len()).rev().collect()
        } else {
            (0..inputs.len()).collect()
        };
        for t in order {
            let (h_new, c_new) = self.step(tape, inputs[t], h, c)?;
            if masks[t].iter().all(|&m| m) {
                h = h_new;
                c = c_new;
            } else {
                h = tape.where_rows(&masks[t], h_new, h)?;
                c = tape.where_rows(&masks[t], c_new, c)?;
            }
            out[t] = h;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiLstmLayer {
    pub forward: LstmCell,
    pub backward: LstmCell,
}

/// Per-step states of both directions.
pub struct BiLstmStates {
    pub forward: Vec<Var>,
    pub backward: Vec<Var>,
}

impl BiLstmLayer {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            forward: LstmCell::new(store, &format!("{name}.fwd"), input, hidden, rng),
            backward: LstmCell::new(store, &format!("{name}.bwd"), input, hidden, rng),
        }
    }

    pub fn run(&self, tape: &mut Tape, inputs: &[Var], masks: &[Vec<bool>]) -> Result<BiLstmStates> {
        Ok(BiLstmStates {
            forward: self.forward.run(tape, inputs, masks, false)?,
            backward: self.backward.run(tape, inputs, masks, true)?,
        })
    }

    /// `[fwd_t ; bwd_t]` at every step.
    pub fn outputs(&self, tape: &mut Tape, inputs: &[Var], masks: &[Vec<bool>]) -> Result<Vec<Var>> {
        let states = self.run(tape, inputs, masks)?;
        states
            .forward
            .iter()
            .zip(&states.backward)
            .map(|(&f, &b)| tape.concat_cols(&[f, b]))
            .collect()
    }
}

/// Additive attention: `u_t = tanh(W h_t + b)`, `α = softmax(u_t · context)`,
/// output `Σ α_t h_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionPool {
    pub weight: ParamId,
    pub bias: ParamId,
    pub context: ParamId,
}

impl AttentionPool {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, dim: usize, rng: &mut R) -> Self {
        Self {
            weight: store.add(
                format!("{name}.weight"),
                xavier_init(&[dim, dim], XavierVariant::Uniform, rng),
            ),
            bias: store.add(format!("{name}.bias"), zeros_init(&[dim])),
            context: store.add(
                format!("{name}.context"),
                xavier_init(&[dim], XavierVariant::Uniform, rng),
            ),
        }
    }

    /// Returns the pooled `[rows × dim]` vectors and the `[rows × steps]` weights.
    pub fn pool(&self, tape: &mut Tape, states: &[Var], masks: &[Vec<bool>]) -> Result<(Var, Var)> {
        let (w, b, u) = (tape.param(self.weight), tape.param(self.bias), tape.param(self.context));
        let mut scores = Vec::with_capacity(states.len());
        for &h in states {
            let proj = tape.matmul_bt(h, w)?;
            let proj = tape.add_row(proj, b)?;
            let act = tape.tanh(proj);
            scores.push(tape.matmul_bt(act, u)?);
        }
        let scores = tape.concat_cols(&scores)?;
        let rows = tape.value(scores).rows();
        let steps = states.len();
        let flat_mask: Vec<bool> = (0..rows)
            .flat_map(|r| (0..steps).map(move |t| (r, t)))
            .map(|(r, t)| masks[t][r])
            .collect();
        let alpha = tape.softmax(scores, Some(&flat_mask))?;
        let mut pooled = None;
        for (t, &h) in states.iter().enumerate() {
            let a_t = tape.slice_cols(alpha, t, t + 1)?;
            let term = tape.mul_col(h, a_t)?;
            pooled = Some(match pooled {
                None => term,
                Some(acc) => tape.add(acc, term)?,
            });
        }
        Ok((pooled.expect("at least one step"), alpha))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut R) -> Self {
        Self {
            weight: store.add(
                format!("{name}.weight"),
                xavier_init(&[output, input], XavierVariant::Uniform, rng),
            ),
            bias: store.add(format!("{name}.bias"), zeros_init(&[output])),
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let (w, b) = (tape.param(self.weight), tape.param(self.bias));
        let y = tape.matmul_bt(x, w)?;
        tape.add_row(y, b)
    }
}
