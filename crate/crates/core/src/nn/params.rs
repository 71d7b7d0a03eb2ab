//! Text serialization of named parameter tensors.
//!
//! ```text
//! chanpred-params 1
//! tensor <name> <rows> <cols>
//! <row values, space separated>
//! ...
//! end
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so a parameter
//! set always serializes to the same bytes and parses back bit-exactly.

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const PARAMS_MAGIC: &str = "chanpred-params";
pub const PARAMS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterSet {
    pub tensors: Vec<NamedTensor>,
}

impl ParameterSet {
    pub fn to_text(&self) -> String {
        let mut s = format!("{PARAMS_MAGIC} {PARAMS_VERSION}\n");
        for t in &self.tensors {
            writeln!(s, "tensor {} {} {}", t.name, t.rows, t.cols).unwrap();
            for row in t.values.chunks(t.cols.max(1)) {
                let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                writeln!(s, "{}", line.join(" ")).unwrap();
            }
        }
        s.push_str("end\n");
        s
    }

    /// Parses a set from `lines`, consuming through the `end` line.
    pub fn parse_lines<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Format(format!("line {line}: {msg}"));
        let (n, header) = lines.next().ok_or_else(|| Error::Format("missing parameter header".into()))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(PARAMS_MAGIC) {
            return Err(bad(n, "not a parameter set"));
        }
        match parts.next().and_then(|v| v.parse::<u32>().ok()) {
            Some(PARAMS_VERSION) => {}
            Some(v) => return Err(bad(n, &format!("unsupported version {v}"))),
            None => return Err(bad(n, "missing version")),
        }
        let mut tensors = Vec::new();
        loop {
            let (n, line) = lines.next().ok_or_else(|| Error::Format("missing `end`".into()))?;
            let line = line.trim();
            if line == "end" {
                break;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let (name, rows, cols) = match f.as_slice() {
                ["tensor", name, r, c] => (
                    name.to_string(),
                    r.parse::<usize>().map_err(|_| bad(n, "bad row count"))?,
                    c.parse::<usize>().map_err(|_| bad(n, "bad column count"))?,
                ),
                _ => return Err(bad(n, "expected `tensor <name> <rows> <cols>`")),
            };
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (n, row) = lines.next().ok_or_else(|| Error::Format(format!("tensor `{name}` is truncated")))?;
                for tok in row.split_whitespace() {
                    values.push(tok.parse::<f64>().map_err(|_| bad(n, &format!("bad value `{tok}`")))?);
                }
            }
            if values.len() != rows * cols {
                return Err(Error::Format(format!("tensor `{name}` has {} values, expected {}", values.len(), rows * cols)));
            }
            tensors.push(NamedTensor { name, rows, cols, values });
        }
        Ok(Self { tensors })
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        Self::parse_lines(&mut lines)
    }
}
