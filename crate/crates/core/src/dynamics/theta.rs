use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric, entrywise nonnegative, positive semidefinite matrix over the
/// cells of one level.
///
/// The matrix is the operator's representation in the orthonormal basis
/// `chi_a / sqrt(lambda_a)` of piecewise-constant functions. In that basis the
/// square-root density `sqrt(rho)` of a level measure has coordinates
/// `sqrt(m_a)`, so the pairing `(K sqrt(rho), sqrt(sigma))` becomes
/// `sum_ab K_ab sqrt(mu_a) sqrt(nu_b)` for any ratio rows. The identity matrix
/// gives the Bhattacharyya coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Kernel {
    size: usize,
    entries: Vec<f64>,
}

impl Kernel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        if size == 0 {
            return Err(Error::InvalidKernel("empty matrix".into()));
        }
        if let Some(r) = rows.iter().position(|row| row.len() != size) {
            return Err(Error::InvalidKernel(format!(
                "row {} has {} entries, expected {size}",
                r + 1,
                rows[r].len()
            )));
        }
        let entries: Vec<f64> = rows.into_iter().flatten().collect();
        if let Some(v) = entries.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidKernel(format!(
                "entry {v} is negative or not finite"
            )));
        }
        let scale = entries.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..size {
            for j in 0..i {
                let (a, b) = (entries[i * size + j], entries[j * size + i]);
                if (a - b).abs() > 1e-12 * scale {
                    return Err(Error::InvalidKernel(format!(
                        "not symmetric at ({}, {}): {a} vs {b}",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let matrix = DMatrix::from_row_slice(size, size, &entries);
        let eigen = SymmetricEigen::new(matrix);
        let smallest = eigen
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if smallest < -1e-10 * scale {
            return Err(Error::InvalidKernel(format!(
                "not positive semidefinite: smallest eigenvalue {smallest}"
            )));
        }
        Ok(Kernel { size, entries })
    }

    pub fn identity(size: usize) -> Self {
        let mut entries = vec![0.0; size * size];
        for i in 0..size {
            entries[i * size + i] = 1.0;
        }
        Kernel { size, entries }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.size + col]
    }

    fn pairing(&self, mu: &[f64], nu: &[f64]) -> Result<f64> {
        if mu.len() != self.size {
            return Err(Error::InvalidKernel(format!(
                "kernel is {0}x{0} but the level has {1} cells",
                self.size,
                mu.len()
            )));
        }
        let root_nu: Vec<f64> = nu.iter().map(|v| v.sqrt()).collect();
        Ok(mu
            .iter()
            .enumerate()
            .map(|(a, &m)| {
                let row = &self.entries[a * self.size..(a + 1) * self.size];
                let k_nu: f64 = row.iter().zip(&root_nu).map(|(k, r)| k * r).sum();
                m.sqrt() * k_nu
            })
            .sum())
    }
}

impl TryFrom<Vec<Vec<f64>>> for Kernel {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Kernel::new(rows)
    }
}

impl From<Kernel> for Vec<Vec<f64>> {
    fn from(k: Kernel) -> Self {
        k.entries.chunks(k.size).map(|c| c.to_vec()).collect()
    }
}

/// How the conflict exponent pairs the two measures.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaKind {
    /// `sum mu_a nu_a`, the plain vector inner product.
    InnerProduct,
    /// `sum sqrt(mu_a nu_a)`, the identity kernel on square-root densities.
    #[default]
    Bhattacharyya,
    /// `sum K_ab sqrt(mu_a nu_b)`.
    Kernel(Kernel),
}

impl ThetaKind {
    pub fn name(&self) -> &'static str {
        match self {
            ThetaKind::InnerProduct => "inner-product",
            ThetaKind::Bhattacharyya => "bhattacharyya",
            ThetaKind::Kernel(_) => "kernel",
        }
    }
}

/// Conflict exponent of two mass vectors over the same cells.
pub fn theta_of_masses(mu: &[f64], nu: &[f64], kind: &ThetaKind) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(Error::SchemeMismatch);
    }
    match kind {
        ThetaKind::InnerProduct => Ok(mu.iter().zip(nu).map(|(a, b)| a * b).sum()),
        ThetaKind::Bhattacharyya => Ok(mu.iter().zip(nu).map(|(a, b)| (a * b).sqrt()).sum()),
        ThetaKind::Kernel(k) => k.pairing(mu, nu),
    }
}
