//! Plain-text field snapshots.
//!
//! ```text
//! harmflow-snapshot 1
//! geometry flat_box dim=1 cells=8 cells_x=0 offset=0.0
//! n 2
//! phase plus 9
//! <n*n row-major entries, one node per line>
//! phase minus 9
//! ...
//! ```
//! Entries are written with 17 significant digits, so reading a snapshot
//! back reproduces every bit.

use std::io::{BufRead, Write};
use std::sync::Arc;

use super::{Geometry, PairedField, Phase, TwoPhaseGrid};
use crate::error::{Error, Result};
use crate::matcore::SquareMatrix;
use crate::scalar::Scalar;

const MAGIC: &str = "harmflow-snapshot 1";

fn geometry_line(g: &Geometry) -> String {
    match g {
        Geometry::FlatBox { dim, cells, cells_x, offset } => {
            format!("geometry flat_box dim={dim} cells={cells} cells_x={cells_x} offset={offset:?}")
        }
        Geometry::PolarDisk { r_core, r_interface, r_outer, nr_in, nr_out, ntheta } => format!(
            "geometry polar_disk r_core={r_core:?} r_interface={r_interface:?} r_outer={r_outer:?} \
             nr_in={nr_in} nr_out={nr_out} ntheta={ntheta}"
        ),
    }
}

pub fn write_snapshot<T: Scalar, W: Write>(field: &PairedField<T>, mut out: W) -> Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "{}", geometry_line(field.grid().geometry()))?;
    writeln!(out, "n {}", field.n())?;
    for phase in Phase::BOTH {
        let values = field.values(phase);
        writeln!(out, "phase {} {}", phase.name(), values.len())?;
        for m in values {
            let mut line = String::with_capacity(25 * m.as_slice().len());
            for (k, v) in m.as_slice().iter().enumerate() {
                if k > 0 {
                    line.push(' ');
                }
                line.push_str(&format!("{:.16e}", v.as_f64()));
            }
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        self.number += 1;
        match self.inner.next() {
            Some(line) => Ok(line?),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Snapshot { line: self.number, message: message.into() }
    }
}

fn parse_geometry<R: BufRead>(lines: &Lines<R>, line: &str) -> Result<Geometry> {
    let mut words = line.split_whitespace();
    if words.next() != Some("geometry") {
        return Err(lines.err("expected `geometry` line"));
    }
    let kind = words.next().ok_or_else(|| lines.err("missing geometry kind"))?;
    let mut kv = std::collections::HashMap::new();
    for w in words {
        let (k, v) = w.split_once('=').ok_or_else(|| lines.err(format!("malformed entry `{w}`")))?;
        kv.insert(k, v);
    }
    let get = |key: &str| kv.get(key).copied().ok_or_else(|| lines.err(format!("missing `{key}`")));
    let int = |key: &str| -> Result<usize> {
        get(key)?.parse().map_err(|_| lines.err(format!("`{key}` is not an integer")))
    };
    let real = |key: &str| -> Result<f64> {
        get(key)?.parse().map_err(|_| lines.err(format!("`{key}` is not a number")))
    };
    match kind {
        "flat_box" => Ok(Geometry::FlatBox {
            dim: int("dim")?,
            cells: int("cells")?,
            cells_x: int("cells_x")?,
            offset: real("offset")?,
        }),
        "polar_disk" => Ok(Geometry::PolarDisk {
            r_core: real("r_core")?,
            r_interface: real("r_interface")?,
            r_outer: real("r_outer")?,
            nr_in: int("nr_in")?,
            nr_out: int("nr_out")?,
            ntheta: int("ntheta")?,
        }),
        other => Err(lines.err(format!("unknown geometry `{other}`"))),
    }
}

/// Reads a snapshot and rebuilds its grid. Interface axes are re-extracted
/// from the stored pairs.
pub fn read_snapshot<T: Scalar, R: BufRead>(input: R) -> Result<PairedField<T>> {
    let mut lines = Lines { inner: input.lines(), number: 0 };
    if lines.next_line()?.trim() != MAGIC {
        return Err(lines.err(format!("expected header `{MAGIC}`")));
    }
    let gline = lines.next_line()?;
    let geometry = parse_geometry(&lines, &gline)?;
    let grid = Arc::new(TwoPhaseGrid::new(geometry).map_err(|e| lines.err(e.to_string()))?);
    let nline = lines.next_line()?;
    let n: usize = nline
        .strip_prefix("n ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| lines.err("expected `n <size>`"))?;
    if n < 2 {
        return Err(lines.err("matrix size must be at least 2"));
    }
    let mut sections: [Vec<SquareMatrix<T>>; 2] = [Vec::new(), Vec::new()];
    for phase in Phase::BOTH {
        let header = lines.next_line()?;
        let mut words = header.split_whitespace();
        let ok = words.next() == Some("phase") && words.next() == Some(phase.name());
        let count: Option<usize> = words.next().and_then(|c| c.parse().ok());
        let expected = grid.phase(phase).len();
        match (ok, count) {
            (true, Some(c)) if c == expected => {}
            (true, Some(c)) => {
                return Err(lines.err(format!("phase {} has {c} nodes, grid needs {expected}", phase.name())))
            }
            _ => return Err(lines.err(format!("expected `phase {} <count>`", phase.name()))),
        }
        for _ in 0..expected {
            let line = lines.next_line()?;
            let entries = line
                .split_whitespace()
                .map(|w| w.parse::<f64>().map(T::lit))
                .collect::<std::result::Result<Vec<T>, _>>()
                .map_err(|e| lines.err(format!("bad number: {e}")))?;
            if entries.len() != n * n {
                return Err(lines.err(format!("expected {} entries, found {}", n * n, entries.len())));
            }
            if entries.iter().any(|v| !v.is_finite()) {
                return Err(lines.err("non-finite entry"));
            }
            sections[phase.index()].push(SquareMatrix::from_row_major(n, &entries)?);
        }
    }
    let [plus, minus] = sections;
    PairedField::from_values(grid, plus, minus)
}
