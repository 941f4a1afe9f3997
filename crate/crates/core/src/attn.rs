//! Causal self-attention sequence encoder with an explicit backward pass.
//!
//! Each layer computes `Z ← Z + softmax_causal(Q Kᵀ / √d_h) V · Wo` with
//! `Q = Z Wq`, `K = Z Wk`, `V = Z Wv`, heads splitting the columns evenly.
//! The input to the first layer is the item embedding matrix plus learned
//! positional rows. Dropout, when enabled, acts on the attention weights
//! (inverted scaling, so evaluation needs no correction).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionLayer {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub wo: Matrix,
}

/// Parameters of one encoder instance. Also used as its gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub heads: usize,
    pub pos: Matrix,
    pub layers: Vec<AttentionLayer>,
}

impl AttentionParams {
    /// Projections uniform in `±1/√dim`, positional rows uniform in `±0.1/√dim`.
    pub fn init<R: Rng + ?Sized>(
        dim: usize,
        max_len: usize,
        layers: usize,
        heads: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if dim == 0 || max_len == 0 || layers == 0 || heads == 0 {
            return Err(Error::invalid("encoder dim, max_len, layers and heads must be >= 1"));
        }
        if !dim.is_multiple_of(heads) {
            return Err(Error::invalid(format!("dim {dim} is not divisible by {heads} heads")));
        }
        let bound = 1.0 / libm::sqrt(dim as f64);
        let mut uniform = |rows: usize, cols: usize, b: f64| {
            let data = (0..rows * cols).map(|_| rng.random_range(-b..=b)).collect();
            Matrix::from_vec(rows, cols, data).expect("sized")
        };
        let pos = uniform(max_len, dim, 0.1 * bound);
        let layers = (0..layers)
            .map(|_| AttentionLayer {
                wq: uniform(dim, dim, bound),
                wk: uniform(dim, dim, bound),
                wv: uniform(dim, dim, bound),
                wo: uniform(dim, dim, bound),
            })
            .collect();
        Ok(AttentionParams { heads, pos, layers })
    }

    pub fn zeros_like(&self) -> Self {
        AttentionParams {
            heads: self.heads,
            pos: self.pos.zeros_like(),
            layers: self
                .layers
                .iter()
                .map(|l| AttentionLayer {
                    wq: l.wq.zeros_like(),
                    wk: l.wk.zeros_like(),
                    wv: l.wv.zeros_like(),
                    wo: l.wo.zeros_like(),
                })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.pos.cols()
    }

    pub fn max_len(&self) -> usize {
        self.pos.rows()
    }

    /// Tensors with their local names (`pos`, `l0.wq`, ...), in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = vec![(String::from("pos"), &self.pos)];
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("l{i}.wq"), &l.wq));
            out.push((format!("l{i}.wk"), &l.wk));
            out.push((format!("l{i}.wv"), &l.wv));
            out.push((format!("l{i}.wo"), &l.wo));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut out = vec![(String::from("pos"), &mut self.pos)];
        for (i, l) in self.layers.iter_mut().enumerate() {
            out.push((format!("l{i}.wq"), &mut l.wq));
            out.push((format!("l{i}.wk"), &mut l.wk));
            out.push((format!("l{i}.wv"), &mut l.wv));
            out.push((format!("l{i}.wo"), &mut l.wo));
        }
        out
    }
}

#[derive(Debug, Clone)]
struct LayerTrace {
    input: Matrix,
    q: Matrix,
    k: Matrix,
    v: Matrix,
    /// per head, row-major `L×L` causal softmax weights (zero above diagonal)
    attn: Vec<Matrix>,
    /// per head, inverted-dropout multipliers
    mask: Option<Vec<Matrix>>,
    ctx: Matrix,
}

/// Encoder output `H` together with what the backward pass needs.
#[derive(Debug, Clone)]
pub struct EncodedSequence {
    h: Matrix,
    traces: Vec<LayerTrace>,
}

impl EncodedSequence {
    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn len(&self) -> usize {
        self.h.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.h.rows() == 0
    }

    /// Attention weights of `layer`/`head` before dropout.
    pub fn attention_weights(&self, layer: usize, head: usize) -> &Matrix {
        &self.traces[layer].attn[head]
    }
}

pub fn last_state(enc: &EncodedSequence) -> &[f64] {
    enc.h.row(enc.h.rows() - 1)
}

pub fn state_at(enc: &EncodedSequence, t: usize) -> Result<&[f64]> {
    if t >= enc.len() {
        return Err(Error::Index { index: t, len: enc.len() });
    }
    Ok(enc.h.row(t))
}

/// Forward pass without dropout.
pub fn attend(params: &AttentionParams, f: &Matrix) -> Result<EncodedSequence> {
    forward(params, f, None::<(f64, &mut rand_chacha::ChaCha8Rng)>)
}

/// Forward pass with inverted dropout of rate `rate` on attention weights.
pub fn attend_with_dropout<R: Rng + ?Sized>(
    params: &AttentionParams,
    f: &Matrix,
    rate: f64,
    rng: &mut R,
) -> Result<EncodedSequence> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate {rate} outside [0, 1)")));
    }
    if rate == 0.0 {
        return attend(params, f);
    }
    forward(params, f, Some((rate, rng)))
}

fn forward<R: Rng + ?Sized>(
    params: &AttentionParams,
    f: &Matrix,
    mut dropout: Option<(f64, &mut R)>,
) -> Result<EncodedSequence> {
    let (len, dim) = f.shape();
    if len == 0 {
        return Err(Error::invalid("cannot encode an empty sequence"));
    }
    if len > params.max_len() {
        return Err(Error::invalid(format!("sequence length {len} exceeds max_len {}", params.max_len())));
    }
    if dim != params.dim() {
        return Err(Error::invalid(format!("input dim {dim} does not match encoder dim {}", params.dim())));
    }
    let heads = params.heads;
    let hd = dim / heads;
    let scale = 1.0 / libm::sqrt(hd as f64);

    let mut z = f.clone();
    for t in 0..len {
        axpy(1.0, params.pos.row(t), z.row_mut(t));
    }

    let mut traces = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let q = z.matmul(&layer.wq);
        let k = z.matmul(&layer.wk);
        let v = z.matmul(&layer.wv);
        let mut ctx = Matrix::zeros(len, dim);
        let mut attn = Vec::with_capacity(heads);
        let mut masks = dropout.as_ref().map(|_| Vec::with_capacity(heads));
        for h in 0..heads {
            let cols = h * hd..(h + 1) * hd;
            let mut a = Matrix::zeros(len, len);
            let mut m = masks.as_ref().map(|_| Matrix::zeros(len, len));
            for i in 0..len {
                let qi = &q.row(i)[cols.clone()];
                let row = &mut a.row_mut(i)[..=i];
                let mut mx = f64::NEG_INFINITY;
                for (j, s) in row.iter_mut().enumerate() {
                    *s = scale * dot(qi, &k.row(j)[cols.clone()]);
                    mx = mx.max(*s);
                }
                let mut sum = 0.0;
                for s in row.iter_mut() {
                    *s = libm::exp(*s - mx);
                    sum += *s;
                }
                row.iter_mut().for_each(|s| *s /= sum);
                if let (Some(m), Some((rate, rng))) = (m.as_mut(), dropout.as_mut()) {
                    let keep = 1.0 / (1.0 - *rate);
                    for j in 0..=i {
                        let mult = if rng.random::<f64>() < *rate { 0.0 } else { keep };
                        m.set(i, j, mult);
                    }
                }
                let crow = &mut ctx.row_mut(i)[cols.clone()];
                for j in 0..=i {
                    let w = a.get(i, j) * m.as_ref().map_or(1.0, |m| m.get(i, j));
                    if w != 0.0 {
                        axpy(w, &v.row(j)[cols.clone()], crow);
                    }
                }
            }
            attn.push(a);
            if let (Some(ms), Some(m)) = (masks.as_mut(), m) {
                ms.push(m);
            }
        }
        let mut out = ctx.matmul(&layer.wo);
        out.add_assign(&z);
        traces.push(LayerTrace { input: z, q, k, v, attn, mask: masks, ctx });
        z = out;
    }
    Ok(EncodedSequence { h: z, traces })
}

/// Backward pass: returns parameter gradients and the gradient on `F`.
pub fn attend_backward(
    params: &AttentionParams,
    enc: &EncodedSequence,
    dh: &Matrix,
) -> Result<(AttentionParams, Matrix)> {
    let mut grads = params.zeros_like();
    let df = attend_backward_into(params, enc, dh, &mut grads)?;
    Ok((grads, df))
}

/// Like [`attend_backward`] but accumulates parameter gradients into `grads`.
pub fn attend_backward_into(
    params: &AttentionParams,
    enc: &EncodedSequence,
    dh: &Matrix,
    grads: &mut AttentionParams,
) -> Result<Matrix> {
    if dh.shape() != enc.h.shape() {
        return Err(Error::invalid(format!(
            "upstream gradient {:?} does not match encoder output {:?}",
            dh.shape(),
            enc.h.shape()
        )));
    }
    if enc.traces.len() != params.layers.len() || grads.layers.len() != params.layers.len() {
        return Err(Error::invalid("layer count mismatch in backward"));
    }
    let (len, dim) = dh.shape();
    let heads = params.heads;
    let hd = dim / heads;
    let scale = 1.0 / libm::sqrt(hd as f64);

    let mut dout = dh.clone();
    for ((layer, trace), g) in params.layers.iter().zip(&enc.traces).zip(grads.layers.iter_mut()).rev() {
        let mut dz = dout.clone();
        trace.ctx.matmul_tn_acc(&dout, &mut g.wo);
        let dctx = dout.matmul_nt(&layer.wo);

        let mut dq = Matrix::zeros(len, dim);
        let mut dk = Matrix::zeros(len, dim);
        let mut dv = Matrix::zeros(len, dim);
        let mut da = vec![0.0; len];
        for h in 0..heads {
            let cols = h * hd..(h + 1) * hd;
            let a = &trace.attn[h];
            let mask = trace.mask.as_ref().map(|m| &m[h]);
            for i in 0..len {
                let dci = &dctx.row(i)[cols.clone()];
                let mut inner = 0.0;
                for (j, daj) in da.iter_mut().enumerate().take(i + 1) {
                    let mult = mask.map_or(1.0, |m| m.get(i, j));
                    let aij = a.get(i, j);
                    if mult != 0.0 {
                        axpy(aij * mult, dci, &mut dv.row_mut(j)[cols.clone()]);
                        *daj = mult * dot(dci, &trace.v.row(j)[cols.clone()]);
                    } else {
                        *daj = 0.0;
                    }
                    inner += aij * *daj;
                }
                for (j, &daj) in da.iter().enumerate().take(i + 1) {
                    let ds = a.get(i, j) * (daj - inner) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    axpy(ds, &trace.k.row(j)[cols.clone()], &mut dq.row_mut(i)[cols.clone()]);
                    axpy(ds, &trace.q.row(i)[cols.clone()], &mut dk.row_mut(j)[cols.clone()]);
                }
            }
        }
        trace.input.matmul_tn_acc(&dq, &mut g.wq);
        trace.input.matmul_tn_acc(&dk, &mut g.wk);
        trace.input.matmul_tn_acc(&dv, &mut g.wv);
        dz.add_assign(&dq.matmul_nt(&layer.wq));
        dz.add_assign(&dk.matmul_nt(&layer.wk));
        dz.add_assign(&dv.matmul_nt(&layer.wv));
        dout = dz;
    }
    for t in 0..len {
        axpy(1.0, dout.row(t), grads.pos.row_mut(t));
    }
    Ok(dout)
}
