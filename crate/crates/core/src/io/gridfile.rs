//! Plain-text grid files.
//!
//! ```text
//! nx ny kind
//! v(0,0) v(0,1) ... v(0,ny-1)
//! ...
//! ```
//! One line per x index, `ny` values per line. `kind` is `real` or
//! `complex`; complex values are written `re,im`. Numbers use the shortest
//! exponent form that reads back to the same bits.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::linalg::C64;

use super::write_atomic;

#[derive(Debug, Clone, PartialEq)]
pub enum GridData {
    Real(Vec<f64>),
    Complex(Vec<C64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub nx: usize,
    pub ny: usize,
    pub data: GridData,
}

impl GridFile {
    pub fn real(nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        Self::checked(nx, ny, GridData::Real(values))
    }

    pub fn complex(nx: usize, ny: usize, values: Vec<C64>) -> Result<Self> {
        Self::checked(nx, ny, GridData::Complex(values))
    }

    fn checked(nx: usize, ny: usize, data: GridData) -> Result<Self> {
        let len = match &data {
            GridData::Real(v) => v.len(),
            GridData::Complex(v) => v.len(),
        };
        if len != nx * ny || nx == 0 || ny == 0 {
            return Err(Error::DimensionMismatch(format!("{len} values for a {nx}x{ny} grid")));
        }
        Ok(Self { nx, ny, data })
    }

    pub fn kind(&self) -> &'static str {
        match self.data {
            GridData::Real(_) => "real",
            GridData::Complex(_) => "complex",
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.nx, self.ny, self.kind());
        for i in 0..self.nx {
            let row = i * self.ny..(i + 1) * self.ny;
            for (n, k) in row.enumerate() {
                if n > 0 {
                    out.push(' ');
                }
                let _ = match &self.data {
                    GridData::Real(v) => write!(out, "{:e}", v[k]),
                    GridData::Complex(v) => write!(out, "{:e},{:e}", v[k].re, v[k].im),
                };
            }
            out.push('\n');
        }
        out
    }

    /// Parse grid text; `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let err = |msg: String| Error::Format {
            path: origin.to_string(),
            msg,
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| err("empty file".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let [nx, ny, kind] = h[..] else {
            return Err(err(format!("header must be `nx ny kind`, got `{header}`")));
        };
        let nx: usize = nx.parse().map_err(|_| err(format!("bad nx `{nx}`")))?;
        let ny: usize = ny.parse().map_err(|_| err(format!("bad ny `{ny}`")))?;
        let complex = match kind {
            "real" => false,
            "complex" => true,
            other => return Err(err(format!("kind must be real or complex, got `{other}`"))),
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number `{s}`")));
        let mut real = Vec::new();
        let mut cplx = Vec::new();
        let mut rows = 0;
        for (i, line) in lines.enumerate() {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != ny {
                return Err(err(format!("row {i} has {} values, expected {ny}", tokens.len())));
            }
            for t in tokens {
                if complex {
                    let (re, im) = t.split_once(',').ok_or_else(|| err(format!("complex value `{t}` is not re,im")))?;
                    cplx.push(C64::new(num(re)?, num(im)?));
                } else {
                    real.push(num(t)?);
                }
            }
            rows += 1;
        }
        if rows != nx {
            return Err(err(format!("{rows} rows, header says {nx}")));
        }
        let data = if complex { GridData::Complex(cplx) } else { GridData::Real(real) };
        Self::checked(nx, ny, data)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Format {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Real values, checked against `grid`.
    pub fn real_on(&self, grid: &GridSpec) -> Result<&[f64]> {
        if (self.nx, self.ny) != (grid.nx, grid.ny) {
            return Err(Error::DimensionMismatch(format!(
                "grid file is {}x{}, device grid is {}x{}",
                self.nx, self.ny, grid.nx, grid.ny
            )));
        }
        match &self.data {
            GridData::Real(v) => Ok(v),
            GridData::Complex(_) => Err(Error::DimensionMismatch("expected a real grid file".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn awkward_values_round_trip_exactly() {
        let vals = vec![0.1, -0.0, 1.0 / 3.0, 1e-300, f64::MAX, 5e-324, -2.5, 12.25];
        let g = GridFile::real(2, 4, vals.clone()).unwrap();
        let back = GridFile::parse(&g.to_text(), "mem").unwrap();
        let GridData::Real(r) = back.data else { panic!() };
        for (a, b) in r.iter().zip(&vals) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn complex_layout() {
        let g = GridFile::complex(1, 2, vec![C64::new(1.0, -2.0), C64::new(0.5, 0.0)]).unwrap();
        assert_eq!(g.to_text(), "1 2 complex\n1e0,-2e0 5e-1,0e0\n");
    }

    #[test]
    fn malformed_files_rejected() {
        for text in ["", "2 2\n1 2\n3 4\n", "2 2 real\n1 2\n", "1 2 real\n1 x\n", "1 2 complex\n1 2\n", "1 2 real\n1 2 3\n"] {
            assert!(matches!(GridFile::parse(text, "t"), Err(Error::Format { .. })), "{text:?}");
        }
    }
}
