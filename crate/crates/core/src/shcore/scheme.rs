use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

const UNIT_TOL: f64 = 1e-6;
/// b-values at or below this count as unweighted references.
pub const B0_THRESHOLD: f64 = 1.0;

/// Acquisition directions and b-values (s/mm^2).
#[derive(Clone, Debug, PartialEq)]
pub struct GradientScheme {
    directions: Vec<[f64; 3]>,
    bvalues: Vec<f64>,
}

impl GradientScheme {
    pub fn new(directions: Vec<[f64; 3]>, bvalues: Vec<f64>) -> Result<Self> {
        if directions.len() != bvalues.len() {
            return Err(Error::invalid(format!(
                "{} directions but {} b-values",
                directions.len(),
                bvalues.len()
            )));
        }
        for (i, (d, &b)) in directions.iter().zip(&bvalues).enumerate() {
            if !(b >= 0.0) || !b.is_finite() {
                return Err(Error::invalid(format!("b-value {i} is {b}")));
            }
            if b > B0_THRESHOLD {
                let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                if (n - 1.0).abs() > UNIT_TOL {
                    return Err(Error::invalid(format!("direction {i} has norm {n}")));
                }
            }
        }
        if !bvalues.iter().any(|&b| b <= B0_THRESHOLD) {
            return Err(Error::invalid("scheme has no b0 reference"));
        }
        Ok(Self { directions, bvalues })
    }

    /// One b0 followed by `n` near-uniform directions on the upper
    /// hemisphere (Fibonacci lattice) at a single shell.
    pub fn single_shell(n: usize, bvalue: f64) -> Result<Self> {
        let mut directions = vec![[0.0, 0.0, 1.0]];
        let mut bvalues = vec![0.0];
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        for i in 0..n {
            let z = 1.0 - (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            directions.push([r * phi.cos(), r * phi.sin(), z]);
            bvalues.push(bvalue);
        }
        Self::new(directions, bvalues)
    }

    pub fn len(&self) -> usize {
        self.bvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bvalues.is_empty()
    }

    pub fn directions(&self) -> &[[f64; 3]] {
        &self.directions
    }

    pub fn bvalues(&self) -> &[f64] {
        &self.bvalues
    }

    pub fn is_b0(&self, i: usize) -> bool {
        self.bvalues[i] <= B0_THRESHOLD
    }

    /// Indices of diffusion-weighted (non-b0) measurements.
    pub fn weighted_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.is_b0(i)).collect()
    }

    pub fn b0_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_b0(i)).collect()
    }

    /// Parses whitespace-separated `gx gy gz b` rows; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut directions = Vec::new();
        let mut bvalues = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::invalid(format!("scheme line {}: {e}", lineno + 1)))?;
            if vals.len() != 4 {
                return Err(Error::invalid(format!(
                    "scheme line {}: expected 4 columns, got {}",
                    lineno + 1,
                    vals.len()
                )));
            }
            directions.push([vals[0], vals[1], vals[2]]);
            bvalues.push(vals[3]);
        }
        Self::new(directions, bvalues)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# gx gy gz b\n");
        for (d, b) in self.directions.iter().zip(&self.bvalues) {
            let _ = writeln!(s, "{:.17e} {:.17e} {:.17e} {}", d[0], d[1], d[2], b);
        }
        s
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}
