//! The `qpat-field v1` file format.
//!
//! One ASCII header line `qpat-field v1 <nx> <ny> [<nv>]`, then `nx·ny·nv`
//! little-endian f64 values. Multi-direction data are stored one direction
//! block after another, each block row-major with x fastest. Boundary
//! sources are written with `nx = number of boundary faces`, `ny = 1`.

use crate::boundary::{BoundarySource, BoundaryTrace};
use crate::error::{Error, Result};
use crate::field::{PhaseField, ScalarField};
use std::fmt::Write as _;
use std::path::Path;

const MAGIC: &str = "qpat-field v1";

#[derive(Debug, Clone, PartialEq)]
pub struct RawField {
    pub nx: usize,
    pub ny: usize,
    pub nv: Option<usize>,
    pub data: Vec<f64>,
}

impl RawField {
    pub fn expected_len(&self) -> usize {
        self.nx * self.ny * self.nv.unwrap_or(1)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = match self.nv {
            Some(nv) => format!("{MAGIC} {} {} {}\n", self.nx, self.ny, nv),
            None => format!("{MAGIC} {} {}\n", self.nx, self.ny),
        };
        let mut out = Vec::with_capacity(header.len() + 8 * self.data.len());
        out.extend_from_slice(header.as_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|b| *b == b'\n')
            .ok_or_else(|| Error::Format("missing header line".into()))?;
        let header = std::str::from_utf8(&bytes[..nl])
            .map_err(|_| Error::Format("header is not ASCII".into()))?;
        let rest = header
            .strip_prefix(MAGIC)
            .ok_or_else(|| Error::Format(format!("bad magic in header {header:?}")))?;
        let dims: Vec<usize> = rest
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Format(format!("bad dimensions in header {header:?}")))?;
        let (nx, ny, nv) = match dims.as_slice() {
            [nx, ny] => (*nx, *ny, None),
            [nx, ny, nv] => (*nx, *ny, Some(*nv)),
            _ => return Err(Error::Format(format!("expected 2 or 3 dimensions in {header:?}"))),
        };
        let body = &bytes[nl + 1..];
        let mut raw = Self {
            nx,
            ny,
            nv,
            data: Vec::new(),
        };
        if body.len() != 8 * raw.expected_len() {
            return Err(Error::Format(format!(
                "payload has {} bytes, header promises {} values",
                body.len(),
                raw.expected_len()
            )));
        }
        raw.data = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(raw)
    }

    /// CSV in storage order: `k,j,i,value` (or `j,i,value` without directions).
    /// Values use the shortest representation that reads back exactly.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let n = self.nx * self.ny;
        match self.nv {
            Some(_) => s.push_str("k,j,i,value\n"),
            None => s.push_str("j,i,value\n"),
        }
        for (idx, v) in self.data.iter().enumerate() {
            let (k, c) = (idx / n, idx % n);
            let (i, j) = (c % self.nx, c / self.nx);
            match self.nv {
                Some(_) => writeln!(s, "{k},{j},{i},{v:?}").unwrap(),
                None => writeln!(s, "{j},{i},{v:?}").unwrap(),
            }
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn into_scalar(self) -> Result<ScalarField> {
        match self.nv {
            None | Some(1) => ScalarField::from_shape(self.nx, self.ny, self.data),
            Some(nv) => Err(Error::Format(format!("expected a scalar field, file has {nv} directions"))),
        }
    }

    pub fn into_phase(self) -> Result<PhaseField> {
        let nv = self
            .nv
            .ok_or_else(|| Error::Format("expected a phase field, file has no direction count".into()))?;
        PhaseField::from_shape(self.nx, self.ny, nv, self.data)
    }
}

impl From<&ScalarField> for RawField {
    fn from(f: &ScalarField) -> Self {
        Self {
            nx: f.nx(),
            ny: f.ny(),
            nv: None,
            data: f.values().to_vec(),
        }
    }
}

impl From<&PhaseField> for RawField {
    fn from(u: &PhaseField) -> Self {
        Self {
            nx: u.nx(),
            ny: u.ny(),
            nv: Some(u.ndirs()),
            data: u.values().to_vec(),
        }
    }
}

impl From<&BoundarySource> for RawField {
    fn from(g: &BoundarySource) -> Self {
        Self {
            nx: g.nfaces(),
            ny: 1,
            nv: Some(g.ndirs()),
            data: g.values().to_vec(),
        }
    }
}

impl From<&BoundaryTrace> for RawField {
    fn from(g: &BoundaryTrace) -> Self {
        Self {
            nx: g.len(),
            ny: 1,
            nv: None,
            data: g.values().to_vec(),
        }
    }
}
