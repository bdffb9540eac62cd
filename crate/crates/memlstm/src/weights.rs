//! Plain-text weight exchange format.
//!
//! ```text
//! # memlstm weights
//! gate_order i f c o
//! W 1 16
//! <1 row of 16 numbers>
//! U 4 16
//! <4 rows>
//! b 1 16
//! w_out 4 1
//! b_out 1 1
//! ```
//!
//! Each block is a header `name rows cols` followed by `rows` lines of `cols`
//! numbers. The packed `W`, `U` and `b` blocks hold the four gates side by
//! side in the order given by `gate_order`, which lets weights exported by
//! other trainers be read without reshuffling them first. Per-gate blocks
//! (`W_i`, `U_f`, `b_o`, ...) are accepted on import as an alternative to the
//! packed ones. Export always writes packed blocks in `i f c o` order with 17
//! significant digits, so export → import → export is byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use memlstm_core::{Dims, Gate, GateParams, LstmParams, Matrix, OutputLayer};

use crate::error::{Error, Result};

pub const HEADER: &str = "# memlstm weights";

/// 17 significant digits; enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_string(params: &LstmParams, out: &OutputLayer) -> String {
    let dims = params.dims();
    let n = dims.n_hidden;
    let mut s = String::new();
    s.push_str(HEADER);
    s.push('\n');
    s.push_str("gate_order i f c o\n");

    let mut block = |name: &str, rows: usize, cols: usize, value: &dyn Fn(usize, usize) -> f64| {
        writeln!(s, "{name} {rows} {cols}").unwrap();
        for r in 0..rows {
            let line: Vec<String> = (0..cols).map(|c| fmt_f64(value(r, c))).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
    };
    block("W", dims.n_inputs, 4 * n, &|r, c| {
        params.gate(Gate::ALL[c / n]).w.get(r, c % n)
    });
    block("U", n, 4 * n, &|r, c| params.gate(Gate::ALL[c / n]).u.get(r, c % n));
    block("b", 1, 4 * n, &|_, c| params.gate(Gate::ALL[c / n]).b[c % n]);
    block("w_out", n, 1, &|r, _| out.w_out[r]);
    block("b_out", 1, 1, &|_, _| out.b_out);
    s
}

pub fn save(path: &Path, params: &LstmParams, out: &OutputLayer) -> Result<()> {
    fs::write(path, to_string(params, out)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<(LstmParams, OutputLayer)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, &path.display().to_string())
}

struct Block {
    line: usize,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

pub fn parse(text: &str, name: &str) -> Result<(LstmParams, OutputLayer)> {
    let err = |line: usize, msg: String| Error::parse(name, line, msg);
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let mut order = Gate::ALL;
    let mut blocks: BTreeMap<String, Block> = BTreeMap::new();
    while let Some((line, header)) = lines.next() {
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts[0] == "gate_order" {
            let gates: Option<Vec<Gate>> = parts[1..].iter().map(|s| Gate::from_suffix(s)).collect();
            match gates {
                Some(g) if g.len() == 4 && Gate::ALL.iter().all(|x| g.contains(x)) => {
                    order = [g[0], g[1], g[2], g[3]];
                }
                _ => return Err(err(line, format!("bad gate_order: {header:?}"))),
            }
            continue;
        }
        if parts.len() != 3 {
            return Err(err(line, format!("expected `name rows cols`, found {header:?}")));
        }
        let dim = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| err(line, format!("bad dimension {s:?}")))
        };
        let (rows, cols) = (dim(parts[1])?, dim(parts[2])?);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (row_line, row) = lines
                .next()
                .ok_or_else(|| err(line, format!("block {} ends early", parts[0])))?;
            let before = data.len();
            for tok in row.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| err(row_line, format!("not a number: {tok:?}")))?;
                data.push(v);
            }
            if data.len() - before != cols {
                return Err(err(
                    row_line,
                    format!("expected {cols} values, found {}", data.len() - before),
                ));
            }
        }
        if blocks
            .insert(parts[0].to_string(), Block { line, rows, cols, data })
            .is_some()
        {
            return Err(err(line, format!("duplicate block {}", parts[0])));
        }
    }

    let take = |blocks: &mut BTreeMap<String, Block>, key: &str| {
        blocks
            .remove(key)
            .ok_or_else(|| err(0, format!("missing block {key}")))
    };
    let w_out = take(&mut blocks, "w_out")?;
    if w_out.cols != 1 || w_out.rows == 0 {
        return Err(err(w_out.line, "w_out must be [n_hidden, 1]".into()));
    }
    let n = w_out.rows;
    let b_out = take(&mut blocks, "b_out")?;
    if (b_out.rows, b_out.cols) != (1, 1) {
        return Err(err(b_out.line, "b_out must be [1, 1]".into()));
    }

    let gates: [GateParams; 4] = if blocks.contains_key("W") {
        let w = take(&mut blocks, "W")?;
        let u = take(&mut blocks, "U")?;
        let b = take(&mut blocks, "b")?;
        for blk in [&w, &u, &b] {
            if blk.cols != 4 * n {
                return Err(err(blk.line, format!("expected {} columns", 4 * n)));
            }
        }
        if u.rows != n || b.rows != 1 || w.rows == 0 {
            return Err(err(u.line, "U must be [n_hidden, 4·n_hidden], b [1, 4·n_hidden]".into()));
        }
        let mut gates: [GateParams; 4] =
            core::array::from_fn(|_| GateParams::zeros(Dims { n_inputs: w.rows, n_hidden: n }));
        for (slot, gate) in order.iter().enumerate() {
            let g = &mut gates[gate.index()];
            for m in 0..n {
                let c = slot * n + m;
                for r in 0..w.rows {
                    g.w.set(r, m, w.data[r * w.cols + c]);
                }
                for r in 0..n {
                    g.u.set(r, m, u.data[r * u.cols + c]);
                }
                g.b[m] = b.data[c];
            }
        }
        gates
    } else {
        let mut per_gate = Vec::with_capacity(4);
        for gate in Gate::ALL {
            let sfx = gate.suffix();
            let w = take(&mut blocks, &format!("W_{sfx}"))?;
            let u = take(&mut blocks, &format!("U_{sfx}"))?;
            let b = take(&mut blocks, &format!("b_{sfx}"))?;
            if w.cols != n || u.rows != n || u.cols != n || b.rows != 1 || b.cols != n {
                return Err(err(w.line, format!("gate {sfx} blocks do not match n_hidden = {n}")));
            }
            per_gate.push(GateParams {
                w: Matrix::from_vec(w.rows, n, w.data)?,
                u: Matrix::from_vec(n, n, u.data)?,
                b: b.data,
            });
        }
        let mut it = per_gate.into_iter();
        core::array::from_fn(|_| it.next().expect("four gates"))
    };

    if let Some((key, blk)) = blocks.iter().next() {
        return Err(err(blk.line, format!("unexpected block {key}")));
    }
    let n_inputs = gates[0].w.rows();
    let dims = Dims::new(n_inputs, n)?;
    let params = LstmParams::from_gates(dims, gates)?;
    let out = OutputLayer {
        w_out: w_out.data,
        b_out: b_out.data[0],
    };
    Ok((params, out))
}
