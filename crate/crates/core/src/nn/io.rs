//! Plain-text model files made of named matrix blocks:
//!
//! ```text
//! MODEL rbf
//! CENTERS 25 4
//! <25 rows of 4 values>
//! ...
//! ```
//!
//! Values are written with the shortest decimal form that parses back to
//! the same `f64`, so a save/load cycle is bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::NormStats;
use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatrixFile {
    pub kind: String,
    blocks: Vec<(String, DMatrix<f64>)>,
}

impl MatrixFile {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            blocks: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, m: DMatrix<f64>) -> &mut Self {
        self.blocks.push((name.to_string(), m));
        self
    }

    pub fn push_vector(&mut self, name: &str, v: &DVector<f64>) -> &mut Self {
        self.push(name, DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
    }

    pub fn push_stats(&mut self, stats: &NormStats) -> &mut Self {
        let n = stats.len();
        self.push(
            "STATS",
            DMatrix::from_fn(n, 2, |r, c| if c == 0 { stats.min[r] } else { stats.max[r] }),
        )
    }

    pub fn render(&self) -> String {
        let mut s = format!("MODEL {}\n", self.kind);
        for (name, m) in &self.blocks {
            let _ = writeln!(s, "{name} {} {}", m.nrows(), m.ncols());
            for r in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|c| m[(r, c)].to_string()).collect();
                s.push_str(&row.join(" "));
                s.push('\n');
            }
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let fail = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            message: format!("line {line}: {message}"),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (n, first) = lines.next().ok_or_else(|| fail(1, "empty model file".into()))?;
        let kind = first
            .strip_prefix("MODEL ")
            .ok_or_else(|| fail(n, "expected `MODEL <kind>`".into()))?
            .trim()
            .to_string();
        let mut blocks = Vec::new();
        while let Some((n, header)) = lines.next() {
            let parts: Vec<&str> = header.split_whitespace().collect();
            let [name, rows, cols] = parts[..] else {
                return Err(fail(n, format!("bad block header `{header}`")));
            };
            let parse_dim = |s: &str| s.parse::<usize>().map_err(|e| fail(n, format!("{e}")));
            let (rows, cols) = (parse_dim(rows)?, parse_dim(cols)?);
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (ln, line) = lines
                    .next()
                    .ok_or_else(|| fail(n, format!("block {name} is truncated")))?;
                let before = values.len();
                for tok in line.split_whitespace() {
                    values.push(tok.parse::<f64>().map_err(|e| fail(ln, format!("{e}")))?);
                }
                if values.len() - before != cols {
                    return Err(fail(ln, format!("expected {cols} values in block {name}")));
                }
            }
            blocks.push((name.to_string(), DMatrix::from_row_slice(rows, cols, &values)));
        }
        Ok(Self { kind, blocks })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    pub fn get(&self, name: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        let m = self
            .blocks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::Shape(format!("model file has no {name} block")))?;
        if (m.nrows(), m.ncols()) != (rows, cols) {
            return Err(Error::Shape(format!(
                "block {name} is {}x{}, expected {rows}x{cols}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(m.clone())
    }

    /// Block by name with whatever shape it has.
    pub fn get_any(&self, name: &str) -> Result<DMatrix<f64>> {
        let m = self
            .blocks
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::Shape(format!("model file has no {name} block")))?;
        Ok(m.1.clone())
    }

    pub fn get_vector(&self, name: &str, len: usize) -> Result<DVector<f64>> {
        let m = self.get(name, len, 1)?;
        Ok(DVector::from_column_slice(m.as_slice()))
    }

    pub fn get_stats(&self, len: usize) -> Result<NormStats> {
        let m = self.get("STATS", len, 2)?;
        Ok(NormStats {
            min: m.column(0).iter().copied().collect(),
            max: m.column(1).iter().copied().collect(),
        })
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::Shape(format!("expected a {kind} model, found {}", self.kind)))
        }
    }

    pub fn names(&self) -> BTreeMap<&str, (usize, usize)> {
        self.blocks
            .iter()
            .map(|(n, m)| (n.as_str(), (m.nrows(), m.ncols())))
            .collect()
    }
}
