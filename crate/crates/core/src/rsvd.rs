//! Randomized eigendecomposition of symmetric operators.
//!
//! Gaussian range finding with power iterations and re-orthonormalisation,
//! followed by an exact eigendecomposition of the projected operator
//! `B = Q^T A Q`. Since the operators are self-adjoint this is the
//! symmetric variant of randomized SVD: the factors come out as
//! `A ~ U diag(d) U^T` with orthonormal `U` and signed `d`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A self-adjoint linear map applied to blocks of column vectors.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;

    /// `A x` for `x` of shape dim x m.
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64>;
}

impl SymmetricOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self * x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EigParams {
    pub rank: usize,
    pub oversampling: usize,
    pub power_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowRankEig {
    /// dim x rank, orthonormal columns.
    pub u: DMatrix<f64>,
    /// Eigenvalue estimates, ordered by decreasing magnitude.
    pub d: DVector<f64>,
}

impl LowRankEig {
    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.d) * self.u.transpose()
    }
}

fn orthonormal_basis(y: DMatrix<f64>) -> DMatrix<f64> {
    // Householder QR stays orthonormal even when y is rank deficient.
    y.qr().q()
}

pub fn randomized_eig<R: Rng + ?Sized>(
    op: &dyn SymmetricOperator,
    params: EigParams,
    rng: &mut R,
) -> Result<LowRankEig> {
    let n = op.dim();
    if params.rank == 0 {
        return Err(Error::Config("rank must be >= 1".into()));
    }
    if params.rank > n {
        return Err(Error::Config(format!(
            "rank {} exceeds operator dimension {n}",
            params.rank
        )));
    }
    let samples = (params.rank + params.oversampling).min(n);
    let omega = DMatrix::<f64>::from_fn(n, samples, |_, _| rng.sample(StandardNormal));
    let mut q = orthonormal_basis(op.apply(&omega));
    for _ in 0..params.power_iters {
        let z = orthonormal_basis(op.apply(&q));
        q = orthonormal_basis(op.apply(&z));
    }
    let aq = op.apply(&q);
    let b = q.transpose() * &aq;
    let b = (&b + b.transpose()) * 0.5;
    let eig = SymmetricEigen::new(b);

    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .abs()
            .total_cmp(&eig.eigenvalues[i].abs())
            .then(i.cmp(&j))
    });
    order.truncate(params.rank);

    let mut u = DMatrix::zeros(n, params.rank);
    let mut d = DVector::zeros(params.rank);
    for (k, &i) in order.iter().enumerate() {
        let mut col = &q * eig.eigenvectors.column(i);
        // fix the sign so the largest-magnitude entry is positive
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        u.set_column(k, &col);
        d[k] = eig.eigenvalues[i];
    }
    Ok(LowRankEig { u, d })
}
