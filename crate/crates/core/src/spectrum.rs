//! Level lists shared by the diagonalization, grid and spectral routes.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    DenseDiag,
    BandedDiag,
    GridFd,
    Spectral,
    Exact,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::DenseDiag => "dense-diag",
            Method::BandedDiag => "banded-diag",
            Method::GridFd => "grid-fd",
            Method::Spectral => "spectral",
            Method::Exact => "exact",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectrumLevel {
    pub energy: f64,
    pub uncertainty: f64,
    pub method: Method,
    /// Set when the error estimate exceeds the requested tolerance.
    pub flagged: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SpectrumResult {
    pub levels: Vec<SpectrumLevel>,
    /// Coefficient vectors (one per level) when the method produces them.
    #[serde(skip)]
    pub vectors: Option<Vec<Vec<f64>>>,
    pub diagnostics: Vec<String>,
}

impl SpectrumResult {
    pub fn from_energies(energies: &[f64], uncertainty: f64, method: Method) -> Self {
        Self {
            levels: energies
                .iter()
                .map(|&energy| SpectrumLevel {
                    energy,
                    uncertainty,
                    method,
                    flagged: false,
                })
                .collect(),
            vectors: None,
            diagnostics: Vec::new(),
        }
    }

    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.energy).collect()
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// CSV: index, E, error estimate, method tag.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,E,error,method")?;
        for (i, l) in self.levels.iter().enumerate() {
            writeln!(out, "{i},{:.17e},{:.6e},{}", l.energy, l.uncertainty, l.method)?;
        }
        Ok(())
    }
}
