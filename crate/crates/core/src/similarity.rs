//! Dense per-type similarity state, residuals, and iteration traces.

use std::time::Duration;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::network::{HeteroNetwork, TypeId};

#[derive(Debug, Clone, PartialEq)]
pub struct SimilaritySet {
    blocks: Vec<DMatrix<f64>>,
}

impl SimilaritySet {
    pub fn identity(net: &HeteroNetwork) -> Self {
        SimilaritySet {
            blocks: net
                .sizes()
                .into_iter()
                .map(|n| DMatrix::identity(n, n))
                .collect(),
        }
    }

    pub fn from_blocks(blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        if let Some(b) = blocks.iter().find(|b| !b.is_square()) {
            return Err(Error::Shape(format!(
                "similarity block must be square, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        Ok(SimilaritySet { blocks })
    }

    pub fn block(&self, t: TypeId) -> &DMatrix<f64> {
        &self.blocks[t.0]
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<DMatrix<f64>> {
        self.blocks
    }

    pub fn num_types(&self) -> usize {
        self.blocks.len()
    }

    pub fn diagonal(&self, t: TypeId) -> Vec<f64> {
        self.blocks[t.0].diagonal().iter().copied().collect()
    }

    pub fn check_shapes(&self, net: &HeteroNetwork) -> Result<()> {
        let sizes = net.sizes();
        if sizes.len() != self.blocks.len() {
            return Err(Error::Shape(format!(
                "{} blocks for {} types",
                self.blocks.len(),
                sizes.len()
            )));
        }
        for (t, (b, n)) in self.blocks.iter().zip(sizes).enumerate() {
            if b.nrows() != n || b.ncols() != n {
                return Err(Error::Shape(format!(
                    "block {t} is {}x{}, type has {n} entities",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        Ok(())
    }

    /// Largest |S - S^T| entry over all blocks.
    pub fn max_asymmetry(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| (b - b.transpose()).abs().max())
            .fold(0.0, f64::max)
    }
}

fn check_pair(prev: &SimilaritySet, next: &SimilaritySet) -> Result<()> {
    if prev.blocks.len() != next.blocks.len() {
        return Err(Error::Shape(format!(
            "{} vs {} blocks",
            prev.blocks.len(),
            next.blocks.len()
        )));
    }
    for (t, (a, b)) in prev.blocks.iter().zip(&next.blocks).enumerate() {
        if a.shape() != b.shape() {
            return Err(Error::Shape(format!(
                "block {t}: {:?} vs {:?}",
                a.shape(),
                b.shape()
            )));
        }
    }
    Ok(())
}

/// Per-type Frobenius norms of `next - prev`.
pub fn residual_per_type(prev: &SimilaritySet, next: &SimilaritySet) -> Result<Vec<f64>> {
    check_pair(prev, next)?;
    Ok(prev
        .blocks
        .iter()
        .zip(&next.blocks)
        .map(|(a, b)| (b - a).norm())
        .collect())
}

/// Sum over types of the Frobenius norm of `next - prev`.
pub fn residual(prev: &SimilaritySet, next: &SimilaritySet) -> Result<f64> {
    Ok(residual_per_type(prev, next)?.iter().sum())
}

/// Largest over types of the entrywise max-norm of `next - prev`. The
/// damped iteration contracts in this norm by the damping factor.
pub fn residual_max_norm(prev: &SimilaritySet, next: &SimilaritySet) -> Result<f64> {
    check_pair(prev, next)?;
    Ok(prev
        .blocks
        .iter()
        .zip(&next.blocks)
        .map(|(a, b)| (b - a).abs().max())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub residual: f64,
    pub per_type: Vec<f64>,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub entries: Vec<TraceEntry>,
}

impl SolveTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.residual).collect()
    }

    pub fn last_residual(&self) -> Option<f64> {
        self.entries.last().map(|e| e.residual)
    }

    /// Mean Frobenius residual per type at each iteration.
    pub fn mean_residuals(&self) -> Vec<f64> {
        self.entries
            .iter()
            .map(|e| e.residual / e.per_type.len().max(1) as f64)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_identity_is_zero() {
        let s = SimilaritySet::from_blocks(vec![DMatrix::identity(3, 3)]).unwrap();
        assert_eq!(residual(&s, &s).unwrap(), 0.0);
    }

    #[test]
    fn residual_hand_value() {
        let prev = SimilaritySet::from_blocks(vec![DMatrix::identity(2, 2)]).unwrap();
        let next = SimilaritySet::from_blocks(vec![DMatrix::from_row_slice(
            2,
            2,
            &[1.0, 0.5, 0.5, 1.0],
        )])
        .unwrap();
        let r = residual(&prev, &next).unwrap();
        assert!((r - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(residual_max_norm(&prev, &next).unwrap(), 0.5);
    }

    #[test]
    fn residual_sums_types_in_any_order() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.1, 1.0]);
        let b = DMatrix::from_row_slice(1, 1, &[0.7]);
        let i2 = DMatrix::identity(2, 2);
        let i1 = DMatrix::identity(1, 1);
        let fwd = residual(
            &SimilaritySet::from_blocks(vec![i2.clone(), i1.clone()]).unwrap(),
            &SimilaritySet::from_blocks(vec![a.clone(), b.clone()]).unwrap(),
        )
        .unwrap();
        let rev = residual(
            &SimilaritySet::from_blocks(vec![i1, i2]).unwrap(),
            &SimilaritySet::from_blocks(vec![b, a]).unwrap(),
        )
        .unwrap();
        assert!((fwd - rev).abs() < 1e-15);
    }

    #[test]
    fn residual_shape_mismatch() {
        let a = SimilaritySet::from_blocks(vec![DMatrix::identity(2, 2)]).unwrap();
        let b = SimilaritySet::from_blocks(vec![DMatrix::identity(3, 3)]).unwrap();
        assert!(matches!(residual(&a, &b), Err(Error::Shape(_))));
    }
}
