//! Crossbar program map file.
//!
//! ```text
//! # memlstm crossbar program
//! n_inputs 1
//! n_hidden 4
//! rows 6
//! columns 32
//! spacing uniform_conductance
//! levels 16
//! level 0 <resistance ohms> <conductance siemens>
//! ...
//! col 0 i 0 + <one level index per row>
//! col 1 i 0 - ...
//! ...
//! ```
//!
//! Physical column `2k` is the `G⁺` side of logical column `k`, `2k + 1` the
//! `G⁻` side; `k = gate·n_hidden + unit`. Rows are `x` inputs, then `h`
//! inputs, then the bias row. When the program was written with level
//! variation, a `conductances` section follows with one `g <col> ...` line
//! of programmed siemens values per physical column.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use memlstm_core::crossbar::LEVEL_COUNT;
use memlstm_core::{CrossbarProgram, Dims, LevelPair, LevelSet, Spacing};

use crate::error::{Error, Result};
use crate::weights::fmt_f64;

pub const HEADER: &str = "# memlstm crossbar program";

pub fn to_string(program: &CrossbarProgram) -> String {
    let dims = program.dims();
    let levels = program.levels();
    let mut s = String::new();
    writeln!(s, "{HEADER}").unwrap();
    writeln!(s, "n_inputs {}", dims.n_inputs).unwrap();
    writeln!(s, "n_hidden {}", dims.n_hidden).unwrap();
    writeln!(s, "rows {}", program.rows()).unwrap();
    writeln!(s, "columns {}", program.physical_columns()).unwrap();
    writeln!(s, "spacing {}", levels.spacing().name()).unwrap();
    writeln!(s, "levels {LEVEL_COUNT}").unwrap();
    for k in 0..LEVEL_COUNT {
        writeln!(
            s,
            "level {k} {} {}",
            fmt_f64(levels.resistances()[k]),
            fmt_f64(levels.conductances()[k])
        )
        .unwrap();
    }
    for pc in 0..program.physical_columns() {
        let (gate, unit) = program.column_role(pc / 2);
        let side = if pc % 2 == 0 { '+' } else { '-' };
        let idx: Vec<String> = (0..program.rows())
            .map(|r| program.device_level(r, pc).to_string())
            .collect();
        writeln!(s, "col {pc} {} {unit} {side} {}", gate.suffix(), idx.join(" ")).unwrap();
    }
    if program.programmed_conductances().is_some() {
        writeln!(s, "conductances").unwrap();
        for pc in 0..program.physical_columns() {
            let g: Vec<String> = (0..program.rows())
                .map(|r| fmt_f64(program.device_conductance(r, pc)))
                .collect();
            writeln!(s, "g {pc} {}", g.join(" ")).unwrap();
        }
    }
    s
}

pub fn save(path: &Path, program: &CrossbarProgram) -> Result<()> {
    fs::write(path, to_string(program)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<CrossbarProgram> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, &path.display().to_string())
}

struct Lines<'a> {
    name: &'a str,
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
}

impl<'a> Lines<'a> {
    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::parse(self.name, line, msg)
    }

    fn next_tokens(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        match self.inner.next() {
            Some((line, l)) => Ok((line, l.split_whitespace().collect())),
            None => Err(self.err(0, format!("unexpected end of file, expected {what}"))),
        }
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (line, toks) = self.next_tokens(key)?;
        if toks.len() != 2 || toks[0] != key {
            return Err(self.err(line, format!("expected `{key} <value>`")));
        }
        toks[1]
            .parse()
            .map_err(|_| self.err(line, format!("bad value for {key}: {:?}", toks[1])))
    }
}

fn num<T: std::str::FromStr>(lines: &Lines, line: usize, tok: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| lines.err(line, format!("not a number: {tok:?}")))
}

pub fn parse(text: &str, name: &str) -> Result<CrossbarProgram> {
    let iter: Box<dyn Iterator<Item = (usize, &str)>> = Box::new(
        text.lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#')),
    );
    let mut lines = Lines {
        name,
        inner: iter.peekable(),
    };

    let n_inputs: usize = lines.keyed("n_inputs")?;
    let n_hidden: usize = lines.keyed("n_hidden")?;
    let dims = Dims::new(n_inputs, n_hidden)?;
    let rows: usize = lines.keyed("rows")?;
    let columns: usize = lines.keyed("columns")?;
    if rows != n_inputs + n_hidden + 1 || columns != 8 * n_hidden {
        return Err(lines.err(0, "rows/columns inconsistent with n_inputs/n_hidden"));
    }
    let spacing_name: String = lines.keyed("spacing")?;
    let spacing = Spacing::from_name(&spacing_name)
        .ok_or_else(|| lines.err(0, format!("unknown spacing {spacing_name:?}")))?;
    let count: usize = lines.keyed("levels")?;
    if count != LEVEL_COUNT {
        return Err(lines.err(0, format!("expected {LEVEL_COUNT} levels, found {count}")));
    }
    let mut res = [0.0; LEVEL_COUNT];
    let mut cond = [0.0; LEVEL_COUNT];
    for k in 0..LEVEL_COUNT {
        let (line, t) = lines.next_tokens("level")?;
        if t.len() != 4 || t[0] != "level" || t[1] != k.to_string() {
            return Err(lines.err(line, format!("expected `level {k} <ohms> <siemens>`")));
        }
        res[k] = num(&lines, line, t[2])?;
        cond[k] = num(&lines, line, t[3])?;
    }
    let levels = LevelSet::from_table(spacing, res, cond)?;

    let logical = 4 * n_hidden;
    let mut cells = vec![LevelPair::ZERO; rows * logical];
    for pc in 0..columns {
        let (line, t) = lines.next_tokens("col")?;
        let expect_side = if pc % 2 == 0 { "+" } else { "-" };
        let (gate, unit) = (
            memlstm_core::Gate::ALL[(pc / 2) / n_hidden].suffix(),
            ((pc / 2) % n_hidden).to_string(),
        );
        if t.len() != 5 + rows
            || t[0] != "col"
            || t[1] != pc.to_string()
            || t[2] != gate
            || t[3] != unit
            || t[4] != expect_side
        {
            return Err(lines.err(
                line,
                format!("expected `col {pc} {gate} {unit} {expect_side}` with {rows} levels"),
            ));
        }
        for (r, tok) in t[5..].iter().enumerate() {
            let level: u8 = num(&lines, line, tok)?;
            if level as usize >= LEVEL_COUNT {
                return Err(lines.err(line, format!("level {level} out of range")));
            }
            let cell = &mut cells[r * logical + pc / 2];
            if pc % 2 == 0 {
                cell.plus = level;
            } else {
                cell.minus = level;
            }
        }
    }

    let conductances = match lines.next_tokens("end") {
        Err(_) => None,
        Ok((_, t)) if t == ["conductances"] => {
            let mut g = vec![0.0; rows * columns];
            for pc in 0..columns {
                let (line, t) = lines.next_tokens("g")?;
                if t.len() != 2 + rows || t[0] != "g" || t[1] != pc.to_string() {
                    return Err(lines.err(line, format!("expected `g {pc}` with {rows} values")));
                }
                for (r, tok) in t[2..].iter().enumerate() {
                    g[r * columns + pc] = num(&lines, line, tok)?;
                }
            }
            Some(g)
        }
        Ok((line, _)) => return Err(lines.err(line, "unexpected content after columns")),
    };
    if let Some((line, _)) = lines.inner.next() {
        return Err(lines.err(line, "unexpected trailing content"));
    }

    Ok(CrossbarProgram::from_parts(dims, levels, cells, conductances)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use memlstm_core::{program_crossbar, CrossbarConfig, Gate, LstmParams};

    fn small_program(variation: f64) -> CrossbarProgram {
        let dims = Dims::new(1, 2).unwrap();
        let mut p = LstmParams::zeros(dims);
        p.gate_mut(Gate::Forget).w.set(0, 1, 0.5);
        p.gate_mut(Gate::Output).b[0] = -0.25;
        let mut cfg = CrossbarConfig::ideal(Spacing::UniformConductance);
        cfg.level_variation_sigma = variation;
        program_crossbar(&p, &cfg).unwrap()
    }

    #[test]
    fn layout_lines() {
        let text = to_string(&small_program(0.0));
        assert!(text.contains("rows 4\ncolumns 16\n"));
        // W_f[0][1] = 0.5 sits on row 0 of the forget column for unit 1.
        assert!(text.contains("col 6 f 1 + 8 0 0 0\n"));
        assert!(text.contains("col 13 o 0 - 0 0 0 4\n"));
        assert!(!text.contains("conductances"));
    }

    #[test]
    fn round_trip_with_and_without_variation() {
        for sigma in [0.0, 0.03] {
            let prog = small_program(sigma);
            let text = to_string(&prog);
            let back = parse(&text, "t").unwrap();
            assert_eq!(to_string(&back), text);
            assert_eq!(back.cells(), prog.cells());
            assert_eq!(back.programmed_conductances(), prog.programmed_conductances());
        }
    }

    #[test]
    fn corrupt_files_rejected() {
        let text = to_string(&small_program(0.0));
        assert!(parse(&text.replace("col 6 f 1 + 8", "col 6 f 1 + 16"), "t").is_err());
        assert!(parse(&text.replace("spacing uniform_conductance", "spacing log"), "t").is_err());
        assert!(parse(&text.replace("col 6 f 1 +", "col 6 i 1 +"), "t").is_err());
        assert!(parse(&format!("{text}junk\n"), "t").is_err());
        let cut: String = text.lines().take(30).map(|l| format!("{l}\n")).collect();
        assert!(parse(&cut, "t").is_err());
    }
}
