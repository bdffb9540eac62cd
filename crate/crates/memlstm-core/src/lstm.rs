//! Floating-point LSTM cell with forget gate (no peepholes) and an affine
//! readout layer.
//!
//! Gate pre-activations are computed row-vector style, `x·W + h·U + b`, so
//! `W` is `[n_inputs × n_hidden]` and `U` is `[n_hidden × n_hidden]`. Packing
//! the four gates side by side in `(i, f, c, o)` order gives the familiar
//! `[n_inputs, 4·n_hidden]` / `[n_hidden, 4·n_hidden]` / `[1, 4·n_hidden]`
//! matrices used by the weight exchange format.

use alloc::vec;
use alloc::vec::Vec;

use crate::activation::{sigmoid, tanh};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub n_inputs: usize,
    pub n_hidden: usize,
}

impl Dims {
    pub fn new(n_inputs: usize, n_hidden: usize) -> Result<Self> {
        if n_inputs == 0 {
            return Err(Error::InvalidConfig("n_inputs must be at least 1"));
        }
        if n_hidden == 0 {
            return Err(Error::InvalidConfig("n_hidden must be at least 1"));
        }
        Ok(Dims { n_inputs, n_hidden })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gate {
    Input,
    Forget,
    Cell,
    Output,
}

impl Gate {
    /// Packing order of the gates in concatenated matrices and crossbar columns.
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Cell, Gate::Output];

    pub fn index(self) -> usize {
        match self {
            Gate::Input => 0,
            Gate::Forget => 1,
            Gate::Cell => 2,
            Gate::Output => 3,
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Gate::Input => "i",
            Gate::Forget => "f",
            Gate::Cell => "c",
            Gate::Output => "o",
        }
    }

    pub fn from_suffix(s: &str) -> Option<Gate> {
        Gate::ALL.into_iter().find(|g| g.suffix() == s)
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                operand: "matrix data",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Accumulates `v·self` into `acc` (row vector times matrix).
    fn accumulate_vec_mul(&self, v: &[f64], acc: &mut [f64]) {
        for (r, &vr) in v.iter().enumerate() {
            if vr == 0.0 {
                continue;
            }
            for (a, &w) in acc.iter_mut().zip(self.row(r)) {
                *a += vr * w;
            }
        }
    }
}

/// Weights of one gate: input weights, recurrent weights and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Vec<f64>,
}

impl GateParams {
    pub fn zeros(dims: Dims) -> Self {
        GateParams {
            w: Matrix::zeros(dims.n_inputs, dims.n_hidden),
            u: Matrix::zeros(dims.n_hidden, dims.n_hidden),
            b: vec![0.0; dims.n_hidden],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    dims: Dims,
    gates: [GateParams; 4],
}

impl LstmParams {
    pub fn zeros(dims: Dims) -> Self {
        LstmParams {
            dims,
            gates: core::array::from_fn(|_| GateParams::zeros(dims)),
        }
    }

    /// Builds parameters from per-gate blocks given in `(i, f, c, o)` order.
    pub fn from_gates(dims: Dims, gates: [GateParams; 4]) -> Result<Self> {
        for g in &gates {
            check_shape("W", &g.w, dims.n_inputs, dims.n_hidden)?;
            check_shape("U", &g.u, dims.n_hidden, dims.n_hidden)?;
            check_len("b", dims.n_hidden, g.b.len())?;
        }
        Ok(LstmParams { dims, gates })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn gate(&self, gate: Gate) -> &GateParams {
        &self.gates[gate.index()]
    }

    pub fn gate_mut(&mut self, gate: Gate) -> &mut GateParams {
        &mut self.gates[gate.index()]
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.gates.iter().flat_map(|g| {
            g.w.as_slice()
                .iter()
                .chain(g.u.as_slice())
                .chain(g.b.iter())
        })
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.gates.iter_mut().flat_map(|g| {
            g.w.data
                .iter_mut()
                .chain(g.u.data.iter_mut())
                .chain(g.b.iter_mut())
        })
    }

    /// Applies `f` to every entry in place.
    pub fn map_in_place(&mut self, mut f: impl FnMut(f64) -> f64) {
        for v in self.values_mut() {
            *v = f(*v);
        }
    }
}

fn check_shape(operand: &'static str, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
    check_len(operand, rows, m.rows())?;
    check_len(operand, cols, m.cols())
}

fn check_len(operand: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Dimension {
            operand,
            expected,
            found,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(n_hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; n_hidden],
            c: vec![0.0; n_hidden],
        }
    }
}

/// Gate outputs of one step. `c_tilde` is the tanh candidate (the
/// intermediary cell state), not the carried cell state.
#[derive(Debug, Clone, PartialEq)]
pub struct GateActivations {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub c_tilde: Vec<f64>,
    pub o: Vec<f64>,
}

impl GateActivations {
    pub fn get(&self, gate: Gate) -> &[f64] {
        match gate {
            Gate::Input => &self.i,
            Gate::Forget => &self.f,
            Gate::Cell => &self.c_tilde,
            Gate::Output => &self.o,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputLayer {
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

impl OutputLayer {
    pub fn zeros(n_hidden: usize) -> Self {
        OutputLayer {
            w_out: vec![0.0; n_hidden],
            b_out: 0.0,
        }
    }
}

/// Applies the gate nonlinearity to a pre-activation.
#[inline]
pub fn activate(gate: Gate, pre: f64) -> f64 {
    match gate {
        Gate::Cell => tanh(pre),
        _ => sigmoid(pre),
    }
}

/// Cell update for one hidden unit: returns `(C_t, h_t)`.
#[inline]
pub fn cell_update(i: f64, f: f64, c_tilde: f64, o: f64, c_prev: f64) -> (f64, f64) {
    let c = f * c_prev + i * c_tilde;
    (c, o * tanh(c))
}

/// Pre-activations `x·W_g + h·U_g + b_g` of one gate.
pub fn gate_preactivation(params: &LstmParams, gate: Gate, x: &[f64], h: &[f64]) -> Vec<f64> {
    let g = params.gate(gate);
    let mut acc = g.b.clone();
    g.w.accumulate_vec_mul(x, &mut acc);
    g.u.accumulate_vec_mul(h, &mut acc);
    acc
}

pub fn lstm_step(
    params: &LstmParams,
    x_t: &[f64],
    prev: &LstmState,
) -> Result<(GateActivations, LstmState)> {
    let dims = params.dims();
    check_len("x_t", dims.n_inputs, x_t.len())?;
    check_len("prev.h", dims.n_hidden, prev.h.len())?;
    check_len("prev.c", dims.n_hidden, prev.c.len())?;

    let [i, f, c_tilde, o] = Gate::ALL.map(|gate| {
        let mut pre = gate_preactivation(params, gate, x_t, &prev.h);
        pre.iter_mut().for_each(|v| *v = activate(gate, *v));
        pre
    });

    let mut next = LstmState::zeros(dims.n_hidden);
    for m in 0..dims.n_hidden {
        let (c, h) = cell_update(i[m], f[m], c_tilde[m], o[m], prev.c[m]);
        next.c[m] = c;
        next.h[m] = h;
    }
    Ok((GateActivations { i, f, c_tilde, o }, next))
}

pub fn dense_output(h: &[f64], out: &OutputLayer) -> Result<f64> {
    check_len("h", out.w_out.len(), h.len())?;
    Ok(h.iter().zip(&out.w_out).map(|(a, b)| a * b).sum::<f64>() + out.b_out)
}

/// Runs the cell over `inputs`, emitting one prediction per step.
pub fn forward_sequence<X: AsRef<[f64]>>(
    params: &LstmParams,
    out: &OutputLayer,
    inputs: &[X],
    initial: &LstmState,
) -> Result<(Vec<f64>, LstmState)> {
    check_len("w_out", params.dims().n_hidden, out.w_out.len())?;
    let mut state = initial.clone();
    let mut predictions = Vec::with_capacity(inputs.len());
    for x in inputs {
        let (_, next) = lstm_step(params, x.as_ref(), &state)?;
        predictions.push(dense_output(&next.h, out)?);
        state = next;
    }
    Ok((predictions, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::{uniform_output as random_output, uniform_params as random_params};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Independent per-element evaluation of the cell equations.
    fn naive_step(p: &LstmParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = p.dims();
        let mut h_new = vec![0.0; d.n_hidden];
        let mut c_new = vec![0.0; d.n_hidden];
        for m in 0..d.n_hidden {
            let mut pre = [0.0f64; 4];
            for (k, gate) in Gate::ALL.iter().enumerate() {
                let g = p.gate(*gate);
                let mut s = g.b[m];
                for n in 0..d.n_inputs {
                    s += x[n] * g.w.get(n, m);
                }
                for j in 0..d.n_hidden {
                    s += h[j] * g.u.get(j, m);
                }
                pre[k] = s;
            }
            let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
            let i = sig(pre[0]);
            let f = sig(pre[1]);
            let ct = pre[2].tanh();
            let o = sig(pre[3]);
            c_new[m] = f * c[m] + i * ct;
            h_new[m] = o * c_new[m].tanh();
        }
        (h_new, c_new)
    }

    #[test]
    fn zero_params_zero_state_gives_half_gates() {
        let d = Dims::new(1, 4).unwrap();
        let p = LstmParams::zeros(d);
        let (g, s) = lstm_step(&p, &[0.37], &LstmState::zeros(4)).unwrap();
        assert!(g.i.iter().chain(&g.f).chain(&g.o).all(|&v| v == 0.5));
        assert!(g.c_tilde.iter().all(|&v| v == 0.0));
        assert_eq!(s, LstmState::zeros(4));
    }

    #[test]
    fn zero_params_halve_cell_state() {
        let d = Dims::new(1, 4).unwrap();
        let p = LstmParams::zeros(d);
        let prev = LstmState {
            h: vec![0.0; 4],
            c: vec![1.0; 4],
        };
        let (_, s) = lstm_step(&p, &[2.0], &prev).unwrap();
        for m in 0..4 {
            assert_eq!(s.c[m], 0.5);
            assert!((s.h[m] - 0.5 * 0.5f64.tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn step_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n_hidden = rng.random_range(1..=8);
            let n_inputs = rng.random_range(1..=3);
            let p = random_params(&mut rng, Dims::new(n_inputs, n_hidden).unwrap(), 1.5);
            let x: Vec<f64> = (0..n_inputs).map(|_| rng.random_range(-2.0..2.0)).collect();
            let prev = LstmState {
                h: (0..n_hidden).map(|_| rng.random_range(-1.0..1.0)).collect(),
                c: (0..n_hidden).map(|_| rng.random_range(-3.0..3.0)).collect(),
            };
            let (_, s) = lstm_step(&p, &x, &prev).unwrap();
            let (h, c) = naive_step(&p, &x, &prev.h, &prev.c);
            for m in 0..n_hidden {
                assert!((s.h[m] - h[m]).abs() < 1e-12);
                assert!((s.c[m] - c[m]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_errors_name_operand() {
        let p = LstmParams::zeros(Dims::new(1, 4).unwrap());
        let err = lstm_step(&p, &[1.0, 2.0], &LstmState::zeros(4)).unwrap_err();
        assert!(matches!(err, Error::Dimension { operand: "x_t", .. }));
        let err = lstm_step(&p, &[1.0], &LstmState::zeros(3)).unwrap_err();
        assert!(matches!(err, Error::Dimension { operand: "prev.h", .. }));
        let out = OutputLayer::zeros(3);
        assert!(dense_output(&[0.0; 4], &out).is_err());
    }

    #[test]
    fn dense_output_cases() {
        let out = OutputLayer {
            w_out: vec![0.1, 0.2, 0.3, 0.4],
            b_out: 0.7,
        };
        assert_eq!(dense_output(&[0.0; 4], &out).unwrap(), 0.7);
        let sel = OutputLayer {
            w_out: vec![1.0, 0.0, 0.0, 0.0],
            b_out: 0.0,
        };
        assert_eq!(dense_output(&[0.3, 0.9, -0.4, 0.1], &sel).unwrap(), 0.3);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = random_output(&mut rng, 6, 1.0);
        let h: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut expected = out.b_out;
        for k in 0..6 {
            expected += h[k] * out.w_out[k];
        }
        assert!((dense_output(&h, &out).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn forward_sequence_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = Dims::new(1, 4).unwrap();
        let p = random_params(&mut rng, d, 1.0);
        let out = random_output(&mut rng, 4, 1.0);
        let init = LstmState {
            h: vec![0.1, -0.2, 0.3, 0.0],
            c: vec![0.5, 0.0, -1.0, 0.2],
        };

        let empty: [[f64; 1]; 0] = [];
        let (preds, fin) = forward_sequence(&p, &out, &empty, &init).unwrap();
        assert!(preds.is_empty());
        assert_eq!(fin, init);

        let (preds, fin) = forward_sequence(&p, &out, &[[0.4]], &init).unwrap();
        let (_, s1) = lstm_step(&p, &[0.4], &init).unwrap();
        assert_eq!(preds, vec![dense_output(&s1.h, &out).unwrap()]);
        assert_eq!(fin, s1);

        let (preds, _) = forward_sequence(&p, &out, &[[0.4], [-0.3]], &init).unwrap();
        let (_, s2) = lstm_step(&p, &[-0.3], &s1).unwrap();
        assert_eq!(preds[1], dense_output(&s2.h, &out).unwrap());
    }
}
