//! Parameter initialisation.

use rand::Rng;

use crate::lstm::{Dims, Gate, LstmParams, OutputLayer};

/// Every entry drawn uniformly from `[-scale, scale)`.
pub fn uniform_params<R: Rng + ?Sized>(rng: &mut R, dims: Dims, scale: f64) -> LstmParams {
    let mut p = LstmParams::zeros(dims);
    p.map_in_place(|_| rng.random_range(-scale..scale));
    p
}

pub fn uniform_output<R: Rng + ?Sized>(rng: &mut R, n_hidden: usize, scale: f64) -> OutputLayer {
    OutputLayer {
        w_out: (0..n_hidden).map(|_| rng.random_range(-scale..scale)).collect(),
        b_out: rng.random_range(-scale..scale),
    }
}

fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    libm::sqrt(6.0 / (fan_in + fan_out) as f64)
}

/// Glorot-uniform weights over the packed gate matrices, zero biases except
/// the forget gate, which starts at 1.
pub fn glorot_params<R: Rng + ?Sized>(rng: &mut R, dims: Dims) -> LstmParams {
    let packed = 4 * dims.n_hidden;
    let w_lim = glorot_limit(dims.n_inputs, packed);
    let u_lim = glorot_limit(dims.n_hidden, packed);
    let mut p = LstmParams::zeros(dims);
    for gate in Gate::ALL {
        let g = p.gate_mut(gate);
        g.w.as_mut_slice()
            .iter_mut()
            .for_each(|v| *v = rng.random_range(-w_lim..w_lim));
        g.u.as_mut_slice()
            .iter_mut()
            .for_each(|v| *v = rng.random_range(-u_lim..u_lim));
        if gate == Gate::Forget {
            g.b.iter_mut().for_each(|v| *v = 1.0);
        }
    }
    p
}

pub fn glorot_output<R: Rng + ?Sized>(rng: &mut R, n_hidden: usize) -> OutputLayer {
    let lim = glorot_limit(n_hidden, 1);
    OutputLayer {
        w_out: (0..n_hidden).map(|_| rng.random_range(-lim..lim)).collect(),
        b_out: 0.0,
    }
}
