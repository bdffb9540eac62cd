//! Behavioral model of a 1T1M crossbar evaluating an LSTM cell.
//!
//! Rows carry the inputs `x` (one per input), the previous hidden outputs `h`
//! and a constant-1 bias row. Logical columns are grouped by gate, `(i, f, c,
//! o)`, with one column per hidden unit inside each group, so the column for
//! `(gate, unit)` is `gate·M + unit`. Each logical column is a differential
//! pair of physical columns `(G⁺, G⁻)`; a signed weight is stored on one side
//! and the other side is parked at the lowest conductance.
//!
//! Evaluation is time-multiplexed: cycle `m` reads the four columns belonging
//! to hidden unit `m`, passes the currents through ideal σ/tanh stages and
//! updates that unit's cell state. After `M` cycles the full state is known.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lstm::{
    activate, cell_update, dense_output, Dims, Gate, GateActivations, LstmParams, LstmState,
    OutputLayer,
};

pub const LEVEL_COUNT: usize = 16;
pub const R_LOW_OHMS: f64 = 200e3;
pub const R_HIGH_OHMS: f64 = 2000e3;

/// Distances closer than this (in weight units) are treated as ties.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spacing {
    UniformConductance,
    UniformResistance,
}

impl Spacing {
    pub fn name(self) -> &'static str {
        match self {
            Spacing::UniformConductance => "uniform_conductance",
            Spacing::UniformResistance => "uniform_resistance",
        }
    }

    pub fn from_name(s: &str) -> Option<Spacing> {
        match s {
            "uniform_conductance" => Some(Spacing::UniformConductance),
            "uniform_resistance" => Some(Spacing::UniformResistance),
            _ => None,
        }
    }
}

/// The programmable states of one device, ordered by increasing conductance
/// (level 0 is 2000 kΩ, level 15 is 200 kΩ).
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    spacing: Spacing,
    resistances: [f64; LEVEL_COUNT],
    conductances: [f64; LEVEL_COUNT],
}

pub fn build_level_set(spacing: Spacing) -> LevelSet {
    let g_min = 1.0 / R_HIGH_OHMS;
    let g_max = 1.0 / R_LOW_OHMS;
    let last = (LEVEL_COUNT - 1) as f64;
    let mut resistances = [0.0; LEVEL_COUNT];
    let mut conductances = [0.0; LEVEL_COUNT];
    for k in 0..LEVEL_COUNT {
        let t = k as f64 / last;
        match spacing {
            Spacing::UniformConductance => {
                let g = if k == LEVEL_COUNT - 1 {
                    g_max
                } else {
                    g_min + (g_max - g_min) * t
                };
                conductances[k] = g;
                resistances[k] = 1.0 / g;
            }
            Spacing::UniformResistance => {
                let r = R_HIGH_OHMS - (R_HIGH_OHMS - R_LOW_OHMS) * t;
                resistances[k] = r;
                conductances[k] = 1.0 / r;
            }
        }
    }
    LevelSet {
        spacing,
        resistances,
        conductances,
    }
}

impl LevelSet {
    /// Level table as read back from a file. Conductances must increase
    /// strictly and each must be the reciprocal of its resistance.
    pub fn from_table(
        spacing: Spacing,
        resistances: [f64; LEVEL_COUNT],
        conductances: [f64; LEVEL_COUNT],
    ) -> Result<Self> {
        for k in 0..LEVEL_COUNT {
            let (r, g) = (resistances[k], conductances[k]);
            if !(r > 0.0 && g > 0.0) || libm::fabs(r * g - 1.0) > 1e-9 {
                return Err(Error::InvalidConfig("level table entry is not r·g = 1"));
            }
            if k > 0 && !(g > conductances[k - 1]) {
                return Err(Error::InvalidConfig("level conductances must increase strictly"));
            }
        }
        Ok(LevelSet {
            spacing,
            resistances,
            conductances,
        })
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn resistances(&self) -> &[f64; LEVEL_COUNT] {
        &self.resistances
    }

    pub fn conductances(&self) -> &[f64; LEVEL_COUNT] {
        &self.conductances
    }

    pub fn g_min(&self) -> f64 {
        self.conductances[0]
    }

    pub fn g_max(&self) -> f64 {
        self.conductances[LEVEL_COUNT - 1]
    }

    /// Current-to-weight scale `1/(G_max − G_min)`.
    pub fn weight_scale(&self) -> f64 {
        1.0 / (self.g_max() - self.g_min())
    }

    /// Weight magnitude realised by a level against a `G_min` reference.
    pub fn level_weight(&self, level: usize) -> f64 {
        (self.conductances[level] - self.g_min()) * self.weight_scale()
    }

    /// Nearest level to a weight magnitude in `[0, 1]`; ties go to the
    /// higher conductance.
    pub fn nearest_level(&self, magnitude: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for k in 0..LEVEL_COUNT {
            let d = libm::fabs(self.level_weight(k) - magnitude);
            if d < best_d - TIE_EPS || libm::fabs(d - best_d) <= TIE_EPS {
                best = k;
                best_d = best_d.min(d);
            }
        }
        best
    }

    /// Worst-case rounding error in weight units: half the widest gap.
    pub fn half_step(&self) -> f64 {
        (1..LEVEL_COUNT)
            .map(|k| self.level_weight(k) - self.level_weight(k - 1))
            .fold(0.0, f64::max)
            / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LevelPair {
    pub plus: u8,
    pub minus: u8,
}

impl LevelPair {
    pub const ZERO: LevelPair = LevelPair { plus: 0, minus: 0 };

    pub fn weight(self, levels: &LevelSet) -> f64 {
        levels.level_weight(self.plus as usize) - levels.level_weight(self.minus as usize)
    }
}

/// Differential encoding of one weight. Weights outside `[-1, 1]` are
/// clamped first.
pub fn map_weight_to_pair(w: f64, levels: &LevelSet) -> LevelPair {
    let w = w.clamp(-1.0, 1.0);
    let level = levels.nearest_level(libm::fabs(w)) as u8;
    if w >= 0.0 {
        LevelPair { plus: level, minus: 0 }
    } else {
        LevelPair { plus: 0, minus: level }
    }
}

/// The weight actually realised after programming `w`.
pub fn quantize_weight(w: f64, levels: &LevelSet) -> f64 {
    map_weight_to_pair(w, levels).weight(levels)
}

pub fn quantize_params(params: &LstmParams, levels: &LevelSet) -> LstmParams {
    let mut q = params.clone();
    q.map_in_place(|w| quantize_weight(w, levels));
    q
}

pub fn quantize_output(out: &OutputLayer, levels: &LevelSet) -> OutputLayer {
    OutputLayer {
        w_out: out.w_out.iter().map(|&w| quantize_weight(w, levels)).collect(),
        b_out: quantize_weight(out.b_out, levels),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossbarConfig {
    pub levels: LevelSet,
    pub read_noise_sigma: f64,
    pub level_variation_sigma: f64,
    pub seed: u64,
    pub quantize_output_layer: bool,
}

impl CrossbarConfig {
    pub fn ideal(spacing: Spacing) -> Self {
        CrossbarConfig {
            levels: build_level_set(spacing),
            read_noise_sigma: 0.0,
            level_variation_sigma: 0.0,
            seed: 0,
            quantize_output_layer: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |s: f64| s >= 0.0 && s.is_finite();
        if !ok(self.read_noise_sigma) || !ok(self.level_variation_sigma) {
            return Err(Error::InvalidConfig("noise sigmas must be finite and >= 0"));
        }
        Ok(())
    }

    /// Random stream for read noise; distinct from the programming stream.
    pub fn read_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(1);
        rng
    }

    fn program_rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// A weight that had to be clamped into `[-1, 1]` while programming.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampedEntry {
    pub row: usize,
    pub column: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossbarProgram {
    dims: Dims,
    levels: LevelSet,
    /// Row-major `[rows × logical columns]`.
    cells: Vec<LevelPair>,
    /// Row-major `[rows × physical columns]`, present when programmed with
    /// level variation.
    conductances: Option<Vec<f64>>,
    clamped: Vec<ClampedEntry>,
}

impl CrossbarProgram {
    pub fn from_parts(
        dims: Dims,
        levels: LevelSet,
        cells: Vec<LevelPair>,
        conductances: Option<Vec<f64>>,
    ) -> Result<Self> {
        let rows = dims.n_inputs + dims.n_hidden + 1;
        let cols = 4 * dims.n_hidden;
        if cells.len() != rows * cols {
            return Err(Error::Dimension {
                operand: "crossbar cells",
                expected: rows * cols,
                found: cells.len(),
            });
        }
        if let Some(bad) = cells
            .iter()
            .flat_map(|p| [p.plus, p.minus])
            .find(|&l| l as usize >= LEVEL_COUNT)
        {
            return Err(Error::Index {
                what: "level",
                index: bad as usize,
                limit: LEVEL_COUNT,
            });
        }
        if let Some(g) = &conductances {
            if g.len() != rows * 2 * cols {
                return Err(Error::Dimension {
                    operand: "programmed conductances",
                    expected: rows * 2 * cols,
                    found: g.len(),
                });
            }
        }
        Ok(CrossbarProgram {
            dims,
            levels,
            cells,
            conductances,
            clamped: Vec::new(),
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn levels(&self) -> &LevelSet {
        &self.levels
    }

    pub fn rows(&self) -> usize {
        self.dims.n_inputs + self.dims.n_hidden + 1
    }

    pub fn logical_columns(&self) -> usize {
        4 * self.dims.n_hidden
    }

    pub fn physical_columns(&self) -> usize {
        2 * self.logical_columns()
    }

    pub fn bias_row(&self) -> usize {
        self.dims.n_inputs + self.dims.n_hidden
    }

    pub fn column(&self, gate: Gate, unit: usize) -> usize {
        gate.index() * self.dims.n_hidden + unit
    }

    /// Gate and hidden unit served by a logical column.
    pub fn column_role(&self, column: usize) -> (Gate, usize) {
        (
            Gate::ALL[column / self.dims.n_hidden],
            column % self.dims.n_hidden,
        )
    }

    pub fn pair(&self, row: usize, column: usize) -> LevelPair {
        self.cells[row * self.logical_columns() + column]
    }

    pub fn cells(&self) -> &[LevelPair] {
        &self.cells
    }

    pub fn programmed_conductances(&self) -> Option<&[f64]> {
        self.conductances.as_deref()
    }

    pub fn clamped(&self) -> &[ClampedEntry] {
        &self.clamped
    }

    /// Conductance of the physical device; column `2k` is `G⁺` and `2k + 1`
    /// is `G⁻` of logical column `k`.
    pub fn device_conductance(&self, row: usize, physical_column: usize) -> f64 {
        match &self.conductances {
            Some(g) => g[row * self.physical_columns() + physical_column],
            None => {
                let p = self.pair(row, physical_column / 2);
                let level = if physical_column % 2 == 0 { p.plus } else { p.minus };
                self.levels.conductances()[level as usize]
            }
        }
    }

    /// Level index of a physical device.
    pub fn device_level(&self, row: usize, physical_column: usize) -> u8 {
        let p = self.pair(row, physical_column / 2);
        if physical_column % 2 == 0 {
            p.plus
        } else {
            p.minus
        }
    }
}

/// Programs every `W`, `U` and `b` entry into its differential pair.
pub fn program_crossbar(params: &LstmParams, cfg: &CrossbarConfig) -> Result<CrossbarProgram> {
    cfg.validate()?;
    let dims = params.dims();
    let rows = dims.n_inputs + dims.n_hidden + 1;
    let cols = 4 * dims.n_hidden;
    let mut cells = vec![LevelPair::ZERO; rows * cols];
    let mut clamped = Vec::new();

    for gate in Gate::ALL {
        let g = params.gate(gate);
        for m in 0..dims.n_hidden {
            let col = gate.index() * dims.n_hidden + m;
            let weights = (0..dims.n_inputs)
                .map(|n| (n, g.w.get(n, m)))
                .chain((0..dims.n_hidden).map(|j| (dims.n_inputs + j, g.u.get(j, m))))
                .chain(core::iter::once((rows - 1, g.b[m])));
            for (row, w) in weights {
                if !(-1.0..=1.0).contains(&w) {
                    clamped.push(ClampedEntry {
                        row,
                        column: col,
                        value: w,
                    });
                }
                cells[row * cols + col] = map_weight_to_pair(w, &cfg.levels);
            }
        }
    }

    let conductances = if cfg.level_variation_sigma > 0.0 {
        let mut rng = cfg.program_rng();
        let mut g = Vec::with_capacity(rows * 2 * cols);
        for row in 0..rows {
            for col in 0..cols {
                let p = cells[row * cols + col];
                for level in [p.plus, p.minus] {
                    let z: f64 = rng.sample(StandardNormal);
                    let ideal = cfg.levels.conductances()[level as usize];
                    g.push((ideal * (1.0 + cfg.level_variation_sigma * z)).max(0.0));
                }
            }
        }
        Some(g)
    } else {
        None
    };

    let mut program = CrossbarProgram::from_parts(dims, cfg.levels.clone(), cells, conductances)?;
    program.clamped = clamped;
    Ok(program)
}

/// Ideal quantized weights held by a program (perturbations ignored).
pub fn reconstruct_weights(program: &CrossbarProgram) -> LstmParams {
    let dims = program.dims();
    let levels = program.levels();
    let mut p = LstmParams::zeros(dims);
    for gate in Gate::ALL {
        for m in 0..dims.n_hidden {
            let col = program.column(gate, m);
            let g = p.gate_mut(gate);
            for n in 0..dims.n_inputs {
                g.w.set(n, m, program.pair(n, col).weight(levels));
            }
            for j in 0..dims.n_hidden {
                g.u.set(j, m, program.pair(dims.n_inputs + j, col).weight(levels));
            }
            g.b[m] = program.pair(program.bias_row(), col).weight(levels);
        }
    }
    p
}

/// Row input vector `[x, h, 1]` for one step.
pub fn row_inputs(program: &CrossbarProgram, x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    let dims = program.dims();
    if x.len() != dims.n_inputs {
        return Err(Error::Dimension {
            operand: "x_t",
            expected: dims.n_inputs,
            found: x.len(),
        });
    }
    if h.len() != dims.n_hidden {
        return Err(Error::Dimension {
            operand: "prev.h",
            expected: dims.n_hidden,
            found: h.len(),
        });
    }
    let mut v = Vec::with_capacity(program.rows());
    v.extend_from_slice(x);
    v.extend_from_slice(h);
    v.push(1.0);
    Ok(v)
}

/// Differential column current for `(gate, unit)`, scaled to weight units,
/// with optional relative Gaussian read noise.
pub fn crossbar_dot<R: Rng + ?Sized>(
    program: &CrossbarProgram,
    input_voltages: &[f64],
    gate: Gate,
    unit: usize,
    read_noise_sigma: f64,
    rng: &mut R,
) -> Result<f64> {
    if input_voltages.len() != program.rows() {
        return Err(Error::Dimension {
            operand: "input_voltages",
            expected: program.rows(),
            found: input_voltages.len(),
        });
    }
    if unit >= program.dims().n_hidden {
        return Err(Error::Index {
            what: "hidden unit",
            index: unit,
            limit: program.dims().n_hidden,
        });
    }
    let col = program.column(gate, unit);
    let current: f64 = input_voltages
        .iter()
        .enumerate()
        .map(|(row, &v)| {
            v * (program.device_conductance(row, 2 * col)
                - program.device_conductance(row, 2 * col + 1))
        })
        .sum();
    let ideal = current * program.levels().weight_scale();
    if read_noise_sigma > 0.0 {
        let z: f64 = rng.sample(StandardNormal);
        Ok(ideal * (1.0 + read_noise_sigma * z))
    } else {
        Ok(ideal)
    }
}

/// One column read within the per-unit schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleRead {
    pub cycle: usize,
    pub gate: Gate,
    pub column: usize,
    /// Column output in weight units (the gate pre-activation).
    pub current: f64,
    pub activation: f64,
}

pub fn crossbar_lstm_step<R: Rng + ?Sized>(
    program: &CrossbarProgram,
    x_t: &[f64],
    prev: &LstmState,
    read_noise_sigma: f64,
    rng: &mut R,
) -> Result<(GateActivations, LstmState, Vec<CycleRead>)> {
    let n = program.dims().n_hidden;
    if prev.c.len() != n {
        return Err(Error::Dimension {
            operand: "prev.c",
            expected: n,
            found: prev.c.len(),
        });
    }
    // Rows are driven by the previous step's outputs for all M cycles.
    let inputs = row_inputs(program, x_t, &prev.h)?;
    let mut gates = GateActivations {
        i: vec![0.0; n],
        f: vec![0.0; n],
        c_tilde: vec![0.0; n],
        o: vec![0.0; n],
    };
    // Memory units holding each unit's results once its cycle completes.
    let mut memory = LstmState::zeros(n);
    let mut trace = Vec::with_capacity(4 * n);

    for unit in 0..n {
        let mut act = [0.0; 4];
        for gate in Gate::ALL {
            let current = crossbar_dot(program, &inputs, gate, unit, read_noise_sigma, rng)?;
            let a = activate(gate, current);
            act[gate.index()] = a;
            trace.push(CycleRead {
                cycle: unit,
                gate,
                column: program.column(gate, unit),
                current,
                activation: a,
            });
        }
        let [i, f, ct, o] = act;
        let (c, h) = cell_update(i, f, ct, o, prev.c[unit]);
        gates.i[unit] = i;
        gates.f[unit] = f;
        gates.c_tilde[unit] = ct;
        gates.o[unit] = o;
        memory.c[unit] = c;
        memory.h[unit] = h;
    }
    Ok((gates, memory, trace))
}

fn effective_output(out: &OutputLayer, cfg: &CrossbarConfig) -> OutputLayer {
    if cfg.quantize_output_layer {
        quantize_output(out, &cfg.levels)
    } else {
        out.clone()
    }
}

/// Sequence evaluation on the crossbar from the zero state; one prediction
/// per step. Read noise is drawn from `cfg.read_rng()`.
pub fn crossbar_forward<X: AsRef<[f64]>>(
    program: &CrossbarProgram,
    out: &OutputLayer,
    inputs: &[X],
    cfg: &CrossbarConfig,
) -> Result<Vec<f64>> {
    let mut rng = cfg.read_rng();
    let (preds, _) = crossbar_forward_from(
        program,
        out,
        inputs,
        &LstmState::zeros(program.dims().n_hidden),
        cfg,
        &mut rng,
    )?;
    Ok(preds)
}

pub fn crossbar_forward_from<X: AsRef<[f64]>, R: Rng + ?Sized>(
    program: &CrossbarProgram,
    out: &OutputLayer,
    inputs: &[X],
    initial: &LstmState,
    cfg: &CrossbarConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, LstmState)> {
    cfg.validate()?;
    if out.w_out.len() != program.dims().n_hidden {
        return Err(Error::Dimension {
            operand: "w_out",
            expected: program.dims().n_hidden,
            found: out.w_out.len(),
        });
    }
    let out = effective_output(out, cfg);
    let mut state = initial.clone();
    let mut preds = Vec::with_capacity(inputs.len());
    for x in inputs {
        let (_, next, _) = crossbar_lstm_step(program, x.as_ref(), &state, cfg.read_noise_sigma, rng)?;
        preds.push(dense_output(&next.h, &out)?);
        state = next;
    }
    Ok((preds, state))
}

/// Window-by-window predictions (each window starts from the zero state),
/// sharing one read-noise stream across the whole set.
pub fn crossbar_predict(
    program: &CrossbarProgram,
    out: &OutputLayer,
    windows: &crate::data::WindowedSeries,
    cfg: &CrossbarConfig,
) -> Result<Vec<f64>> {
    let mut rng = cfg.read_rng();
    let zero = LstmState::zeros(program.dims().n_hidden);
    windows
        .samples()
        .iter()
        .map(|s| {
            let steps: Vec<&[f64]> = s.steps().collect();
            let (preds, _) = crossbar_forward_from(program, out, &steps, &zero, cfg, &mut rng)?;
            preds.last().copied().ok_or(Error::Empty("window"))
        })
        .collect()
}
