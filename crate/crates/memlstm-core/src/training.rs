//! Full-batch BPTT training with projected (clamped) parameter updates, plus
//! a central-difference gradient checker.
//!
//! Each sample is an independent window fed from the zero state; only the
//! prediction after the last step of the window enters the loss.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{mse, Sample, WindowedSeries};
use crate::error::{Error, Result};
use crate::init::{glorot_output, glorot_params};
use crate::lstm::{
    activate, dense_output, gate_preactivation, Dims, Gate, GateActivations, LstmParams,
    LstmState, OutputLayer,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub clamp_low: f64,
    pub clamp_high: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            learning_rate: 0.01,
            optimizer: Optimizer::default(),
            clamp_low: -1.0,
            clamp_high: 1.0,
            seed: 7,
            shuffle: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig("learning_rate must be positive"));
        }
        if !(self.clamp_low < self.clamp_high) {
            return Err(Error::InvalidConfig("clamp range must satisfy low < high"));
        }
        if let Optimizer::Adam {
            beta1,
            beta2,
            epsilon,
        } = self.optimizer
        {
            let unit = |b: f64| (0.0..1.0).contains(&b);
            if !unit(beta1) || !unit(beta2) || !(epsilon > 0.0) {
                return Err(Error::InvalidConfig(
                    "adam needs beta1, beta2 in [0, 1) and epsilon > 0",
                ));
            }
        }
        Ok(())
    }
}

/// Named parameter blocks, in weight-file order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    W(Gate),
    U(Gate),
    B(Gate),
    WOut,
    BOut,
}

impl ParamGroup {
    pub fn all() -> Vec<ParamGroup> {
        let mut v = Vec::with_capacity(14);
        v.extend(Gate::ALL.map(ParamGroup::W));
        v.extend(Gate::ALL.map(ParamGroup::U));
        v.extend(Gate::ALL.map(ParamGroup::B));
        v.push(ParamGroup::WOut);
        v.push(ParamGroup::BOut);
        v
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::W(g) => ["W_i", "W_f", "W_c", "W_o"][g.index()],
            ParamGroup::U(g) => ["U_i", "U_f", "U_c", "U_o"][g.index()],
            ParamGroup::B(g) => ["b_i", "b_f", "b_c", "b_o"][g.index()],
            ParamGroup::WOut => "w_out",
            ParamGroup::BOut => "b_out",
        }
    }
}

/// Gradients (or any other per-parameter quantity) shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub lstm: LstmParams,
    pub out: OutputLayer,
}

impl GradientSet {
    pub fn zeros(dims: Dims) -> Self {
        GradientSet {
            lstm: LstmParams::zeros(dims),
            out: OutputLayer::zeros(dims.n_hidden),
        }
    }

    pub fn group(&self, group: ParamGroup) -> &[f64] {
        group_slice(&self.lstm, &self.out, group)
    }

    pub fn group_mut(&mut self, group: ParamGroup) -> &mut [f64] {
        group_slice_mut(&mut self.lstm, &mut self.out, group)
    }
}

fn group_slice<'a>(p: &'a LstmParams, out: &'a OutputLayer, group: ParamGroup) -> &'a [f64] {
    match group {
        ParamGroup::W(g) => p.gate(g).w.as_slice(),
        ParamGroup::U(g) => p.gate(g).u.as_slice(),
        ParamGroup::B(g) => &p.gate(g).b,
        ParamGroup::WOut => &out.w_out,
        ParamGroup::BOut => core::slice::from_ref(&out.b_out),
    }
}

fn group_slice_mut<'a>(
    p: &'a mut LstmParams,
    out: &'a mut OutputLayer,
    group: ParamGroup,
) -> &'a mut [f64] {
    match group {
        ParamGroup::W(g) => p.gate_mut(g).w.as_mut_slice(),
        ParamGroup::U(g) => p.gate_mut(g).u.as_mut_slice(),
        ParamGroup::B(g) => &mut p.gate_mut(g).b,
        ParamGroup::WOut => &mut out.w_out,
        ParamGroup::BOut => core::slice::from_mut(&mut out.b_out),
    }
}

fn model_values_mut<'a>(
    p: &'a mut LstmParams,
    out: &'a mut OutputLayer,
) -> impl Iterator<Item = &'a mut f64> {
    p.values_mut()
        .chain(out.w_out.iter_mut())
        .chain(core::iter::once(&mut out.b_out))
}

fn model_values<'a>(p: &'a LstmParams, out: &'a OutputLayer) -> impl Iterator<Item = &'a f64> {
    p.values()
        .chain(out.w_out.iter())
        .chain(core::iter::once(&out.b_out))
}

pub fn mse_loss(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    mse(predictions, targets)
}

fn check_model(params: &LstmParams, out: &OutputLayer) -> Result<()> {
    let dims = params.dims();
    if dims.n_inputs != 1 {
        return Err(Error::Dimension {
            operand: "n_inputs (windows are univariate)",
            expected: 1,
            found: dims.n_inputs,
        });
    }
    if out.w_out.len() != dims.n_hidden {
        return Err(Error::Dimension {
            operand: "w_out",
            expected: dims.n_hidden,
            found: out.w_out.len(),
        });
    }
    Ok(())
}

/// Prediction after the final step of one window, starting from the zero state.
pub fn predict_window(params: &LstmParams, out: &OutputLayer, sample: &Sample) -> Result<f64> {
    let mut state = LstmState::zeros(params.dims().n_hidden);
    for x in sample.steps() {
        state = crate::lstm::lstm_step(params, x, &state)?.1;
    }
    dense_output(&state.h, out)
}

pub fn predict(params: &LstmParams, out: &OutputLayer, windows: &WindowedSeries) -> Result<Vec<f64>> {
    check_model(params, out)?;
    windows
        .samples()
        .iter()
        .map(|s| predict_window(params, out, s))
        .collect()
}

struct StepCache {
    x: f64,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: GateActivations,
    tanh_c: Vec<f64>,
}

fn forward_cached(params: &LstmParams, out: &OutputLayer, sample: &Sample) -> (Vec<StepCache>, f64) {
    let n = params.dims().n_hidden;
    let mut h = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut caches = Vec::with_capacity(sample.window.len());
    for &x in &sample.window {
        let [i, f, c_tilde, o] = Gate::ALL.map(|gate| {
            let mut pre = gate_preactivation(params, gate, &[x], &h);
            pre.iter_mut().for_each(|v| *v = activate(gate, *v));
            pre
        });
        let mut c_new = vec![0.0; n];
        let mut h_new = vec![0.0; n];
        let mut tanh_c = vec![0.0; n];
        for m in 0..n {
            c_new[m] = f[m] * c[m] + i[m] * c_tilde[m];
            tanh_c[m] = libm::tanh(c_new[m]);
            h_new[m] = o[m] * tanh_c[m];
        }
        caches.push(StepCache {
            x,
            h_prev: core::mem::replace(&mut h, h_new),
            c_prev: core::mem::replace(&mut c, c_new),
            gates: GateActivations { i, f, c_tilde, o },
            tanh_c,
        });
    }
    let pred = dense_output(&h, out).expect("shape checked by caller");
    (caches, pred)
}

/// Exact reverse-mode gradients of the batch MSE.
pub fn bptt_gradients(
    params: &LstmParams,
    out: &OutputLayer,
    batch: &WindowedSeries,
) -> Result<(GradientSet, f64)> {
    check_model(params, out)?;
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let dims = params.dims();
    let n = dims.n_hidden;
    let scale = 1.0 / batch.len() as f64;
    let mut grads = GradientSet::zeros(dims);
    let mut loss = 0.0;

    let mut d_pre = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for sample in batch.samples() {
        let (caches, pred) = forward_cached(params, out, sample);
        let err = pred - sample.target;
        loss += err * err;
        let d_pred = 2.0 * err * scale;

        // WindowedSeries guarantees look_back >= 1.
        let last = caches.last().expect("non-empty window");
        for m in 0..n {
            grads.out.w_out[m] += d_pred * last.gates.o[m] * last.tanh_c[m];
        }
        grads.out.b_out += d_pred;

        let mut dh: Vec<f64> = out.w_out.iter().map(|w| w * d_pred).collect();
        let mut dc = vec![0.0; n];
        for step in caches.iter().rev() {
            let g = &step.gates;
            for m in 0..n {
                let d_o = dh[m] * step.tanh_c[m];
                dc[m] += dh[m] * g.o[m] * (1.0 - step.tanh_c[m] * step.tanh_c[m]);
                let d_i = dc[m] * g.c_tilde[m];
                let d_ct = dc[m] * g.i[m];
                let d_f = dc[m] * step.c_prev[m];
                d_pre[0][m] = d_i * g.i[m] * (1.0 - g.i[m]);
                d_pre[1][m] = d_f * g.f[m] * (1.0 - g.f[m]);
                d_pre[2][m] = d_ct * (1.0 - g.c_tilde[m] * g.c_tilde[m]);
                d_pre[3][m] = d_o * g.o[m] * (1.0 - g.o[m]);
                dc[m] *= g.f[m];
            }
            let mut dh_prev = vec![0.0; n];
            for gate in Gate::ALL {
                let dp = &d_pre[gate.index()];
                let p = params.gate(gate);
                let gg = grads.lstm.gate_mut(gate);
                for m in 0..n {
                    let w = gg.w.get(0, m);
                    gg.w.set(0, m, w + step.x * dp[m]);
                    gg.b[m] += dp[m];
                }
                for j in 0..n {
                    let hj = step.h_prev[j];
                    let mut acc = 0.0;
                    for m in 0..n {
                        let u = gg.u.get(j, m);
                        gg.u.set(j, m, u + hj * dp[m]);
                        acc += p.u.get(j, m) * dp[m];
                    }
                    dh_prev[j] += acc;
                }
            }
            dh = dh_prev;
        }
    }
    Ok((grads, loss / batch.len() as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: LstmParams,
    pub out: OutputLayer,
    pub loss_history: Vec<f64>,
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

pub fn train(dims: Dims, dataset: &WindowedSeries, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = glorot_params(&mut rng, dims);
    let mut out = glorot_output(&mut rng, dims.n_hidden);
    clamp_model(&mut params, &mut out, cfg);
    check_model(&params, &out)?;

    let n_params = model_values(&params, &out).count();
    let mut adam = AdamState {
        m: vec![0.0; n_params],
        v: vec![0.0; n_params],
        t: 0,
    };
    let mut order = dataset.samples().to_vec();
    let mut loss_history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let batch = WindowedSeries::from_samples(order.clone(), dataset.look_back())?;
        let (grads, loss) = bptt_gradients(&params, &out, &batch)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        loss_history.push(loss);

        let g: Vec<f64> = model_values(&grads.lstm, &grads.out).copied().collect();
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch });
        }
        let lr = cfg.learning_rate;
        match cfg.optimizer {
            Optimizer::Sgd => {
                for (p, gk) in model_values_mut(&mut params, &mut out).zip(&g) {
                    *p -= lr * gk;
                }
            }
            Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                adam.t += 1;
                let bc1 = 1.0 - libm::pow(beta1, adam.t as f64);
                let bc2 = 1.0 - libm::pow(beta2, adam.t as f64);
                for (k, p) in model_values_mut(&mut params, &mut out).enumerate() {
                    adam.m[k] = beta1 * adam.m[k] + (1.0 - beta1) * g[k];
                    adam.v[k] = beta2 * adam.v[k] + (1.0 - beta2) * g[k] * g[k];
                    let m_hat = adam.m[k] / bc1;
                    let v_hat = adam.v[k] / bc2;
                    *p -= lr * m_hat / (libm::sqrt(v_hat) + epsilon);
                }
            }
        }
        clamp_model(&mut params, &mut out, cfg);
    }

    Ok(TrainOutcome {
        params,
        out,
        loss_history,
    })
}

fn clamp_model(params: &mut LstmParams, out: &mut OutputLayer, cfg: &TrainConfig) {
    for v in model_values_mut(params, out) {
        *v = v.clamp(cfg.clamp_low, cfg.clamp_high);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupCheck {
    pub group: ParamGroup,
    /// Largest relative error over entries whose analytic or numeric
    /// magnitude exceeds the significance floor.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub groups: Vec<GroupCheck>,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max)
    }
}

/// Gradients below this magnitude are compared in absolute terms only.
pub const GRADIENT_FLOOR: f64 = 1e-8;

pub fn finite_difference_check(
    params: &LstmParams,
    out: &OutputLayer,
    batch: &WindowedSeries,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let (analytic, _) = bptt_gradients(params, out, batch)?;
    compare_with_finite_differences(&analytic, params, out, batch, step, tolerance)
}

/// Central differences of the batch loss for every parameter, compared
/// against the supplied analytic gradients.
pub fn compare_with_finite_differences(
    analytic: &GradientSet,
    params: &LstmParams,
    out: &OutputLayer,
    batch: &WindowedSeries,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    if !(step > 0.0) {
        return Err(Error::InvalidConfig("finite-difference step must be positive"));
    }
    let targets = batch.targets();
    let loss_at = |p: &LstmParams, o: &OutputLayer| -> Result<f64> {
        mse(&predict(p, o, batch)?, &targets)
    };

    let mut p = params.clone();
    let mut o = out.clone();
    let mut groups = Vec::new();
    let mut passed = true;
    for group in ParamGroup::all() {
        let len = group_slice(&p, &o, group).len();
        let mut check = GroupCheck {
            group,
            max_rel_error: 0.0,
            max_abs_error: 0.0,
        };
        for k in 0..len {
            let orig = group_slice(&p, &o, group)[k];
            group_slice_mut(&mut p, &mut o, group)[k] = orig + step;
            let plus = loss_at(&p, &o)?;
            group_slice_mut(&mut p, &mut o, group)[k] = orig - step;
            let minus = loss_at(&p, &o)?;
            group_slice_mut(&mut p, &mut o, group)[k] = orig;

            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic.group(group)[k];
            let abs = libm::fabs(a - numeric);
            check.max_abs_error = check.max_abs_error.max(abs);
            let mag = libm::fabs(a).max(libm::fabs(numeric));
            if mag > GRADIENT_FLOOR {
                check.max_rel_error = check.max_rel_error.max(abs / mag);
            } else if abs > GRADIENT_FLOOR {
                check.max_rel_error = f64::INFINITY;
            }
        }
        passed &= check.max_rel_error < tolerance;
        groups.push(check);
    }
    Ok(GradCheckReport { groups, passed })
}
