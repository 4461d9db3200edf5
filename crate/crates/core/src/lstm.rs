//! Single-layer LSTM classifier with a softmax readout on the last hidden
//! state, trained by backpropagation through time and Adam.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbdt::{argmax, objective::softmax_in_place};
use crate::matrix::Matrix;
use crate::standardize::Standardizer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmConfig {
    pub hidden_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub grad_clip_norm: f64,
    pub rng_seed: u64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            hidden_size: 64,
            epochs: 20,
            batch_size: 64,
            learning_rate: 1e-3,
            grad_clip_norm: 5.0,
            rng_seed: 0,
        }
    }
}

impl LstmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_size < 1 {
            return Err(Error::config("lstm.hidden_size", "must be >= 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::config("lstm.batch_size", "must be >= 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("lstm.learning_rate", "must be > 0"));
        }
        if !(self.grad_clip_norm.is_finite() && self.grad_clip_norm > 0.0) {
            return Err(Error::config("lstm.grad_clip_norm", "must be > 0"));
        }
        Ok(())
    }
}

/// Gate order inside the stacked matrices.
const GATE_I: usize = 0;
const GATE_F: usize = 1;
const GATE_O: usize = 2;
const GATE_C: usize = 3;

/// All parameters in one flat buffer:
/// `W (4H x I) | U (4H x H) | b (4H) | V (K x H) | bv (K)`, gate rows
/// stacked as `[i, f, o, c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    w: usize,
    u: usize,
    b: usize,
    v: usize,
    bv: usize,
    len: usize,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize, classes: usize) -> Self {
        let mut p = LstmParams {
            input,
            hidden,
            classes,
            data: Vec::new(),
        };
        p.data = vec![0.0; p.layout().len];
        p
    }

    /// Uniform in `[-1/sqrt(H), 1/sqrt(H)]`, biases zero except forget +1.
    pub fn init(input: usize, hidden: usize, classes: usize, rng: &mut impl Rng) -> Self {
        let mut p = LstmParams::zeros(input, hidden, classes);
        let l = p.layout();
        let r = 1.0 / (hidden as f64).sqrt();
        for v in &mut p.data[l.w..l.b] {
            *v = rng.random_range(-r..=r);
        }
        for v in &mut p.data[l.v..l.bv] {
            *v = rng.random_range(-r..=r);
        }
        for v in p.bias_mut(GATE_F) {
            *v = 1.0;
        }
        p
    }

    fn layout(&self) -> Layout {
        let (i, h, k) = (self.input, self.hidden, self.classes);
        let w = 0;
        let u = w + 4 * h * i;
        let b = u + 4 * h * h;
        let v = b + 4 * h;
        let bv = v + k * h;
        Layout {
            w,
            u,
            b,
            v,
            bv,
            len: bv + k,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Input matrix of one gate, `H x I` row-major.
    pub fn w_gate(&self, gate: usize) -> &[f64] {
        let (l, h, i) = (self.layout(), self.hidden, self.input);
        &self.data[l.w + gate * h * i..l.w + (gate + 1) * h * i]
    }

    pub fn u_gate(&self, gate: usize) -> &[f64] {
        let (l, h) = (self.layout(), self.hidden);
        &self.data[l.u + gate * h * h..l.u + (gate + 1) * h * h]
    }

    pub fn bias(&self, gate: usize) -> &[f64] {
        let (l, h) = (self.layout(), self.hidden);
        &self.data[l.b + gate * h..l.b + (gate + 1) * h]
    }

    pub fn bias_mut(&mut self, gate: usize) -> &mut [f64] {
        let (l, h) = (self.layout(), self.hidden);
        &mut self.data[l.b + gate * h..l.b + (gate + 1) * h]
    }

    pub fn readout(&self) -> &[f64] {
        let l = self.layout();
        &self.data[l.v..l.bv]
    }

    pub fn readout_bias(&self) -> &[f64] {
        let l = self.layout();
        &self.data[l.bv..l.len]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for k in 0..4 {
            acc[k] += a[4 * c + k] * b[4 * c + k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for j in 4 * chunks..a.len() {
        s += a[j] * b[j];
    }
    s
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Gate activations of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub c_tilde: Vec<f64>,
}

/// One recurrence step.
pub fn step(p: &LstmParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>, StepRecord)> {
    if x.len() != p.input || h_prev.len() != p.hidden || c_prev.len() != p.hidden {
        return Err(Error::Dimension {
            expected: p.input,
            got: x.len(),
        });
    }
    let mut gates = vec![0.0; 4 * p.hidden];
    step_into(p, x, h_prev, &mut gates);
    let h = p.hidden;
    let mut c = vec![0.0; h];
    let mut hn = vec![0.0; h];
    for j in 0..h {
        c[j] = gates[h + j] * c_prev[j] + gates[j] * gates[3 * h + j];
        hn[j] = gates[2 * h + j] * c[j].tanh();
    }
    let rec = StepRecord {
        i: gates[..h].to_vec(),
        f: gates[h..2 * h].to_vec(),
        o: gates[2 * h..3 * h].to_vec(),
        c_tilde: gates[3 * h..].to_vec(),
    };
    Ok((hn, c, rec))
}

/// Activated gates `[i, f, o, c̃]` for input `x` and previous hidden state.
fn step_into(p: &LstmParams, x: &[f64], h_prev: &[f64], gates: &mut [f64]) {
    let l = p.layout();
    let (ni, nh) = (p.input, p.hidden);
    let w = &p.data[l.w..l.u];
    let u = &p.data[l.u..l.b];
    let b = &p.data[l.b..l.v];
    for r in 0..4 * nh {
        let a = dot(&w[r * ni..(r + 1) * ni], x) + dot(&u[r * nh..(r + 1) * nh], h_prev) + b[r];
        gates[r] = if r / nh == GATE_C { a.tanh() } else { sigmoid(a) };
    }
}

/// Everything backward needs from one forward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    steps: usize,
    /// standardized inputs, `T x I`
    x: Vec<f64>,
    /// activated gates, `T x 4H`
    gates: Vec<f64>,
    /// cell states, `(T + 1) x H`, row 0 is c0
    c: Vec<f64>,
    /// hidden states, `(T + 1) x H`, row 0 is h0
    h: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Run the window (already standardized, `T x I` time-major) from zero state.
pub fn forward(p: &LstmParams, window: &[f64]) -> Result<Cache> {
    if p.input == 0 || window.is_empty() || window.len() % p.input != 0 {
        return Err(Error::Dimension {
            expected: p.input,
            got: window.len(),
        });
    }
    let (nh, t_len) = (p.hidden, window.len() / p.input);
    let mut gates = vec![0.0; t_len * 4 * nh];
    let mut c = vec![0.0; (t_len + 1) * nh];
    let mut h = vec![0.0; (t_len + 1) * nh];
    for t in 0..t_len {
        let x = &window[t * p.input..(t + 1) * p.input];
        let g = &mut gates[t * 4 * nh..(t + 1) * 4 * nh];
        let (h_prev, h_next) = h.split_at_mut((t + 1) * nh);
        step_into(p, x, &h_prev[t * nh..], g);
        let (c_prev, c_next) = c.split_at_mut((t + 1) * nh);
        let c_prev = &c_prev[t * nh..];
        for j in 0..nh {
            let cj = g[nh + j] * c_prev[j] + g[j] * g[3 * nh + j];
            c_next[j] = cj;
            h_next[j] = g[2 * nh + j] * cj.tanh();
        }
    }
    let l = p.layout();
    let v = &p.data[l.v..l.bv];
    let h_last = &h[t_len * nh..];
    let mut probs: Vec<f64> = (0..p.classes)
        .map(|k| dot(&v[k * nh..(k + 1) * nh], h_last) + p.data[l.bv + k])
        .collect();
    softmax_in_place(&mut probs);
    Ok(Cache {
        steps: t_len,
        x: window.to_vec(),
        gates,
        c,
        h,
        probs,
    })
}

/// Cross-entropy of the cached forward pass.
pub fn loss(cache: &Cache, class: usize) -> f64 {
    -cache.probs[class].max(1e-300).ln()
}

/// Accumulate the cross-entropy gradient of one sample into `grad`
/// (same layout as `p.data`).
pub fn backward(p: &LstmParams, cache: &Cache, class: usize, grad: &mut [f64]) {
    let l = p.layout();
    let (ni, nh, nk) = (p.input, p.hidden, p.classes);
    let t_len = cache.steps;

    let mut dlogits = cache.probs.clone();
    dlogits[class] -= 1.0;
    let h_last = &cache.h[t_len * nh..];
    let mut dh = vec![0.0; nh];
    for k in 0..nk {
        let dk = dlogits[k];
        grad[l.bv + k] += dk;
        let vrow = &p.data[l.v + k * nh..l.v + (k + 1) * nh];
        let grow = &mut grad[l.v + k * nh..l.v + (k + 1) * nh];
        for j in 0..nh {
            grow[j] += dk * h_last[j];
            dh[j] += dk * vrow[j];
        }
    }

    let mut dc = vec![0.0; nh];
    let mut da = vec![0.0; 4 * nh];
    let mut dh_prev = vec![0.0; nh];
    let u = &p.data[l.u..l.b];
    for t in (0..t_len).rev() {
        let g = &cache.gates[t * 4 * nh..(t + 1) * 4 * nh];
        let c_t = &cache.c[(t + 1) * nh..(t + 2) * nh];
        let c_prev = &cache.c[t * nh..(t + 1) * nh];
        for j in 0..nh {
            let (i, f, o, ct) = (g[j], g[nh + j], g[2 * nh + j], g[3 * nh + j]);
            let tc = c_t[j].tanh();
            let d_o = dh[j] * tc;
            dc[j] += dh[j] * o * (1.0 - tc * tc);
            let d_i = dc[j] * ct;
            let d_ct = dc[j] * i;
            let d_f = dc[j] * c_prev[j];
            da[j] = d_i * i * (1.0 - i);
            da[nh + j] = d_f * f * (1.0 - f);
            da[2 * nh + j] = d_o * o * (1.0 - o);
            da[3 * nh + j] = d_ct * (1.0 - ct * ct);
            dc[j] *= f;
        }
        let x = &cache.x[t * ni..(t + 1) * ni];
        let h_prev = &cache.h[t * nh..(t + 1) * nh];
        dh_prev.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..4 * nh {
            let a = da[r];
            if a == 0.0 {
                continue;
            }
            grad[l.b + r] += a;
            for (gw, xv) in grad[l.w + r * ni..l.w + (r + 1) * ni].iter_mut().zip(x) {
                *gw += a * xv;
            }
            let urow = &u[r * nh..(r + 1) * nh];
            for (j, (gu, hv)) in grad[l.u + r * nh..l.u + (r + 1) * nh].iter_mut().zip(h_prev).enumerate() {
                *gu += a * hv;
                dh_prev[j] += a * urow[j];
            }
        }
        std::mem::swap(&mut dh, &mut dh_prev);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub params: LstmParams,
    pub standardizer: Standardizer,
    pub config: LstmConfig,
}

/// Serialized form with every matrix named and stored row-major.
#[derive(Serialize, Deserialize)]
struct LstmModelRepr {
    input: usize,
    hidden: usize,
    classes: usize,
    w_i: Vec<f64>,
    w_f: Vec<f64>,
    w_o: Vec<f64>,
    w_c: Vec<f64>,
    u_i: Vec<f64>,
    u_f: Vec<f64>,
    u_o: Vec<f64>,
    u_c: Vec<f64>,
    b_i: Vec<f64>,
    b_f: Vec<f64>,
    b_o: Vec<f64>,
    b_c: Vec<f64>,
    readout: Vec<f64>,
    readout_bias: Vec<f64>,
    standardizer: Standardizer,
    config: LstmConfig,
}

impl Serialize for LstmModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let p = &self.params;
        LstmModelRepr {
            input: p.input,
            hidden: p.hidden,
            classes: p.classes,
            w_i: p.w_gate(GATE_I).to_vec(),
            w_f: p.w_gate(GATE_F).to_vec(),
            w_o: p.w_gate(GATE_O).to_vec(),
            w_c: p.w_gate(GATE_C).to_vec(),
            u_i: p.u_gate(GATE_I).to_vec(),
            u_f: p.u_gate(GATE_F).to_vec(),
            u_o: p.u_gate(GATE_O).to_vec(),
            u_c: p.u_gate(GATE_C).to_vec(),
            b_i: p.bias(GATE_I).to_vec(),
            b_f: p.bias(GATE_F).to_vec(),
            b_o: p.bias(GATE_O).to_vec(),
            b_c: p.bias(GATE_C).to_vec(),
            readout: p.readout().to_vec(),
            readout_bias: p.readout_bias().to_vec(),
            standardizer: self.standardizer.clone(),
            config: self.config.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LstmModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = LstmModelRepr::deserialize(d)?;
        let mut data = Vec::new();
        for part in [
            &r.w_i, &r.w_f, &r.w_o, &r.w_c, &r.u_i, &r.u_f, &r.u_o, &r.u_c, &r.b_i, &r.b_f, &r.b_o, &r.b_c,
            &r.readout, &r.readout_bias,
        ] {
            data.extend_from_slice(part);
        }
        let mut params = LstmParams::zeros(r.input, r.hidden, r.classes);
        if params.data.len() != data.len() || r.w_i.len() != r.hidden * r.input || r.u_i.len() != r.hidden * r.hidden {
            return Err(serde::de::Error::custom("LSTM parameter shapes do not match"));
        }
        params.data = data;
        Ok(LstmModel {
            params,
            standardizer: r.standardizer,
            config: r.config,
        })
    }
}

/// Adam state over a flat parameter vector.
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = Self::B1 * *m + (1.0 - Self::B1) * g;
            *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

/// Samples per parallel work unit; partial gradients are summed in chunk
/// order so results do not depend on the thread count.
const CHUNK: usize = 8;

/// Mean loss and summed gradient over `idx`.
fn batch_gradient(p: &LstmParams, z: &Matrix, y: &[usize], idx: &[usize]) -> (f64, Vec<f64>) {
    let partials: Vec<(f64, Vec<f64>)> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = vec![0.0; p.len()];
            let mut total = 0.0;
            for &i in chunk {
                let cache = forward(p, z.row(i)).expect("shape checked before training");
                total += loss(&cache, y[i]);
                backward(p, &cache, y[i], &mut g);
            }
            (total, g)
        })
        .collect();
    let mut grad = vec![0.0; p.len()];
    let mut total = 0.0;
    for (l, g) in partials {
        total += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    (total, grad)
}

pub fn train(
    x: &Matrix,
    y: &[usize],
    channels: usize,
    num_classes: usize,
    config: &LstmConfig,
) -> Result<LstmModel> {
    train_with(x, y, channels, num_classes, config, |_, _| {})
}

/// Train, calling `on_epoch(epoch, mean training loss)` after each epoch.
pub fn train_with(
    x: &Matrix,
    y: &[usize],
    channels: usize,
    num_classes: usize,
    config: &LstmConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<LstmModel> {
    config.validate()?;
    if x.rows() == 0 {
        return Err(Error::InvalidData("empty training set".into()));
    }
    if y.len() != x.rows() {
        return Err(Error::Dimension {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if channels == 0 || x.cols() % channels != 0 {
        return Err(Error::Dimension {
            expected: channels,
            got: x.cols(),
        });
    }
    if num_classes < 2 || y.iter().any(|&c| c >= num_classes) {
        return Err(Error::InvalidData("labels out of range".into()));
    }
    let standardizer = Standardizer::fit_periodic(x, channels)?;
    let z = standardizer.transform(x);
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut params = LstmParams::init(channels, config.hidden_size, num_classes, &mut rng);
    let mut adam = Adam::new(params.len());
    let mut order: Vec<usize> = (0..x.rows()).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let (l, mut grad) = batch_gradient(&params, &z, y, batch);
            epoch_loss += l;
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > config.grad_clip_norm {
                let s = config.grad_clip_norm / norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
            adam.update(&mut params.data, &grad, config.learning_rate);
        }
        on_epoch(epoch, epoch_loss / x.rows() as f64);
    }
    Ok(LstmModel {
        params,
        standardizer,
        config: config.clone(),
    })
}

impl LstmModel {
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.standardizer.check_width(x.len())?;
        if x.len() % self.params.input != 0 {
            return Err(Error::Dimension {
                expected: self.params.input,
                got: x.len(),
            });
        }
        let z = self.standardizer.transform_row(x);
        Ok(forward(&self.params, &z)?.probs)
    }

    pub fn predict(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        let p = self.predict_proba(x)?;
        Ok((argmax(&p), p))
    }
}

/// Largest relative error between the analytic gradient and central finite
/// differences over every parameter, `|a - n| / max(|a|, |n|, floor)`.
pub fn gradient_check(p: &LstmParams, window: &[f64], class: usize, eps: f64, floor: f64) -> Result<f64> {
    let cache = forward(p, window)?;
    let mut analytic = vec![0.0; p.len()];
    backward(p, &cache, class, &mut analytic);
    let mut q = p.clone();
    let mut worst: f64 = 0.0;
    for k in 0..p.len() {
        let orig = q.data[k];
        q.data[k] = orig + eps;
        let lp = loss(&forward(&q, window)?, class);
        q.data[k] = orig - eps;
        let lm = loss(&forward(&q, window)?, class);
        q.data[k] = orig;
        let numeric = (lp - lm) / (2.0 * eps);
        let denom = analytic[k].abs().max(numeric.abs()).max(floor);
        worst = worst.max((analytic[k] - numeric).abs() / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn random_params(input: usize, hidden: usize, classes: usize, seed: u64) -> LstmParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = LstmParams::zeros(input, hidden, classes);
        for v in &mut p.data {
            *v = rng.random_range(-0.8..0.8);
        }
        p
    }

    #[test]
    fn zero_params_step() {
        let p = LstmParams::zeros(3, 2, 3);
        let (h, c, rec) = step(&p, &[1.0, -2.0, 0.5], &[0.0; 2], &[0.0; 2]).unwrap();
        assert_eq!(rec.i, vec![0.5; 2]);
        assert_eq!(rec.f, vec![0.5; 2]);
        assert_eq!(rec.o, vec![0.5; 2]);
        assert_eq!(rec.c_tilde, vec![0.0; 2]);
        assert_eq!((h, c), (vec![0.0; 2], vec![0.0; 2]));

        let (h, c, _) = step(&p, &[0.0; 3], &[0.0; 2], &[2.0; 2]).unwrap();
        assert_eq!(c, vec![1.0; 2]);
        assert_abs_diff_eq!(h[0], 0.5 * 1f64.tanh(), epsilon = 1e-15);
        assert_abs_diff_eq!(h[0], 0.380797, epsilon = 1e-6);
    }

    #[test]
    fn saturated_forget_carries_memory() {
        let mut p = LstmParams::zeros(2, 3, 3);
        p.bias_mut(GATE_F).iter_mut().for_each(|b| *b = 50.0);
        let c0 = [0.3, -1.2, 2.0];
        let (_, c, _) = step(&p, &[1.0, 1.0], &[0.0; 3], &c0).unwrap();
        assert_eq!(c, c0.to_vec());
    }

    #[test]
    fn zero_params_uniform_and_bias_gradient() {
        let p = LstmParams::zeros(4, 3, 3);
        let window = [0.3, -0.1, 2.0, 1.0, 0.5, 0.5, -1.0, 0.0];
        let cache = forward(&p, &window).unwrap();
        assert!(cache.probs.iter().all(|&q| (q - 1.0 / 3.0).abs() < 1e-15));
        let mut g = vec![0.0; p.len()];
        backward(&p, &cache, 1, &mut g);
        let l = p.layout();
        assert_abs_diff_eq!(g[l.bv], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[l.bv + 1], 1.0 / 3.0 - 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[l.bv + 2], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn single_step_window() {
        let p = random_params(3, 2, 3, 1);
        let cache = forward(&p, &[0.1, 0.2, 0.3]).unwrap();
        assert_abs_diff_eq!(cache.probs.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(forward(&p, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..5 {
            let p = random_params(3, 4, 3, seed);
            let window: Vec<f64> = (0..15).map(|_| rng.random_range(-1.5..1.5)).collect();
            let err = gradient_check(&p, &window, (seed % 3) as usize, 1e-5, 1e-4).unwrap();
            assert!(err < 1e-5, "seed {seed}: {err}");
        }
    }

    #[test]
    fn saturated_forget_gate_has_no_w_f_gradient() {
        let mut p = random_params(2, 3, 3, 4);
        p.bias_mut(GATE_F).iter_mut().for_each(|b| *b = 50.0);
        let cache = forward(&p, &[0.5, -0.5, 1.0, 0.2]).unwrap();
        let mut g = vec![0.0; p.len()];
        backward(&p, &cache, 0, &mut g);
        let l = p.layout();
        let wf = &g[l.w + 3 * 2..l.w + 2 * 3 * 2];
        assert!(wf.iter().all(|v| v.abs() < 1e-18));
    }

    #[test]
    fn gates_stay_in_range() {
        let p = random_params(4, 5, 3, 2);
        let window: Vec<f64> = (0..40).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let cache = forward(&p, &window).unwrap();
        let nh = 5;
        for g in cache.gates.chunks(4 * nh) {
            assert!(g[..3 * nh].iter().all(|&v| v > 0.0 && v < 1.0));
            assert!(g[3 * nh..].iter().all(|&v| v > -1.0 && v < 1.0));
        }
    }

    fn sign_task(n: usize, steps: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let channels = 3;
        let mut data = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let s = if c == 0 { -0.5 } else { 0.5 };
            for _ in 0..steps {
                data.push(s + rng.random_range(-1.0..1.0));
                data.push(rng.random_range(-1.0..1.0));
                data.push(rng.random_range(-1.0..1.0));
            }
            y.push(c);
        }
        (Matrix::from_vec(n, steps * channels, data).unwrap(), y)
    }

    #[test]
    fn learns_persistent_sign() {
        let (x, y) = sign_task(400, 10, 1);
        // oracle: the running mean of channel 0 separates the classes
        let mean_rule = (0..x.rows())
            .filter(|&r| {
                let m: f64 = x.row(r).chunks(3).map(|c| c[0]).sum::<f64>();
                usize::from(m > 0.0) == y[r]
            })
            .count() as f64
            / 400.0;
        assert!(mean_rule >= 0.99, "{mean_rule}");
        let cfg = LstmConfig {
            hidden_size: 16,
            epochs: 20,
            batch_size: 16,
            learning_rate: 1e-2,
            ..LstmConfig::default()
        };
        let m = train(&x, &y, 3, 2, &cfg).unwrap();
        let (xt, yt) = sign_task(200, 10, 2);
        let acc = (0..xt.rows())
            .filter(|&r| m.predict(xt.row(r)).unwrap().0 == yt[r])
            .count() as f64
            / 200.0;
        assert!(acc >= 0.95, "{acc}");
    }

    #[test]
    fn zero_epochs_returns_init_and_seed_is_deterministic() {
        let (x, y) = sign_task(40, 4, 3);
        let cfg = LstmConfig {
            hidden_size: 4,
            epochs: 0,
            ..LstmConfig::default()
        };
        let m = train(&x, &y, 3, 2, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        assert_eq!(m.params, LstmParams::init(3, 4, 2, &mut rng));
        let cfg = LstmConfig { epochs: 2, ..cfg };
        assert_eq!(train(&x, &y, 3, 2, &cfg).unwrap(), train(&x, &y, 3, 2, &cfg).unwrap());
    }

    #[test]
    fn loss_falls_early_for_most_seeds() {
        let (x, y) = sign_task(200, 6, 7);
        let mut falling = 0;
        for seed in 0..10 {
            let cfg = LstmConfig {
                hidden_size: 8,
                epochs: 5,
                batch_size: 16,
                learning_rate: 1e-2,
                rng_seed: seed,
                ..LstmConfig::default()
            };
            let mut losses = Vec::new();
            train_with(&x, &y, 3, 2, &cfg, |_, l| losses.push(l)).unwrap();
            if losses.last() < losses.first() {
                falling += 1;
            }
        }
        assert!(falling >= 9, "{falling}");
    }

    #[test]
    fn json_round_trip() {
        let (x, y) = sign_task(20, 3, 5);
        let cfg = LstmConfig {
            hidden_size: 3,
            epochs: 1,
            ..LstmConfig::default()
        };
        let m = train(&x, &y, 3, 2, &cfg).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"w_c\""));
        let back: LstmModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
