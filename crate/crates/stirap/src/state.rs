//! Level-space state vectors.

use num_complex::Complex64 as C64;
use thiserror::Error;

/// A state construction or input whose squared norm is too far from 1.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("state norm² = {norm_sq} deviates from 1 by more than {tol}")]
pub struct NormViolation {
    pub norm_sq: f64,
    pub tol: f64,
}

/// Ordered complex amplitudes of an n-level pure state.
///
/// Construction enforces the unit-norm invariant at the caller's tolerance;
/// the stored entries are kept exactly as given (no silent renormalization).
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeVector {
    entries: Vec<C64>,
}

impl AmplitudeVector {
    /// Wrap amplitudes, requiring |Σ|entry|² − 1| ≤ `tol`.
    pub fn new(entries: Vec<C64>, tol: f64) -> Result<Self, NormViolation> {
        let norm_sq: f64 = entries.iter().map(|z| z.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > tol {
            return Err(NormViolation { norm_sq, tol });
        }
        Ok(Self { entries })
    }

    /// Wrap amplitudes whose norm is already guaranteed by the caller.
    pub(crate) fn new_unchecked(entries: Vec<C64>) -> Self {
        Self { entries }
    }

    /// The canonical initial condition: all population on `index`.
    pub fn basis_state(dim: usize, index: usize) -> Self {
        let mut entries = vec![C64::new(0.0, 0.0); dim];
        entries[index] = C64::new(1.0, 0.0);
        Self { entries }
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Per-level populations |bᵢ|².
    pub fn populations(&self) -> Vec<f64> {
        self.entries.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Euclidean distance ‖self − other‖₂.
    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}
