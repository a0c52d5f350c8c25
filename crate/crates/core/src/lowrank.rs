//! Low-rank solver. Each type's similarity is kept as `I + U D U^T`; a sweep
//! assembles the update for a type as a matrix-free operator over the
//! sparse relation operators and the partners' factors, removes its
//! diagonal, and projects the result back to rank `a_t` with a randomized
//! eigendecomposition. Nothing of size |t| x |t| is ever formed.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::{HeteroNetwork, TypeId};
use crate::rng::{rng_for, stream};
use crate::rsvd::{randomized_eig, EigParams, SymmetricOperator};
use crate::similarity::{SimilaritySet, SolveTrace, TraceEntry};
use crate::sparse::{CscMatrix, VisitCounter};
use crate::stochastic::Couplings;
use crate::weights::{check_convergence_conditions, WeightMatrix};
use crate::dense::SolverConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct FactoredSimilarity {
    u: DMatrix<f64>,
    d: DVector<f64>,
}

impl FactoredSimilarity {
    /// `S = I`, stored with rank 0.
    pub fn identity(n: usize) -> Self {
        FactoredSimilarity {
            u: DMatrix::zeros(n, 0),
            d: DVector::zeros(0),
        }
    }

    pub fn new(u: DMatrix<f64>, d: DVector<f64>) -> Result<Self> {
        if u.ncols() != d.len() {
            return Err(Error::Shape(format!(
                "U has {} columns but D has {} entries",
                u.ncols(),
                d.len()
            )));
        }
        Ok(FactoredSimilarity { u, d })
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn rank(&self) -> usize {
        self.d.len()
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn d(&self) -> &DVector<f64> {
        &self.d
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.dim() {
            return Err(Error::IndexOutOfRange {
                index: i,
                dim: self.dim(),
            });
        }
        Ok(())
    }

    /// `delta_ab + U_a D U_b^T`. The diagonal is whatever the factors give;
    /// it is not forced to 1.
    pub fn similarity(&self, a: usize, b: usize) -> Result<f64> {
        self.check_index(a)?;
        self.check_index(b)?;
        let low: f64 = (0..self.rank())
            .map(|k| self.u[(a, k)] * self.d[k] * self.u[(b, k)])
            .sum();
        Ok(if a == b { 1.0 + low } else { low })
    }

    /// Scores of every entity against `a`.
    pub fn row(&self, a: usize) -> Result<DVector<f64>> {
        self.check_index(a)?;
        let coeff = DVector::from_fn(self.rank(), |k, _| self.d[k] * self.u[(a, k)]);
        let mut row = &self.u * coeff;
        row[a] += 1.0;
        Ok(row)
    }

    pub fn top_k(&self, a: usize, k: usize) -> Result<Vec<(usize, f64)>> {
        let row = self.row(a)?;
        rank_neighbors(row.as_slice(), a, k)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut s = &self.u * DMatrix::from_diagonal(&self.d) * self.u.transpose();
        for i in 0..self.dim() {
            s[(i, i)] += 1.0;
        }
        s
    }

    /// Largest |S_aa - 1| over the represented matrix.
    pub fn diagonal_drift(&self) -> f64 {
        (0..self.dim())
            .map(|a| {
                (0..self.rank())
                    .map(|k| self.u[(a, k)] * self.u[(a, k)] * self.d[k])
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest |U^T U - I| entry.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.u.transpose() * &self.u - DMatrix::identity(self.rank(), self.rank());
        g.abs().max()
    }
}

/// Indices other than `exclude`, ordered by descending score and then by
/// ascending index; at most `k` of them.
pub fn rank_neighbors(scores: &[f64], exclude: usize, k: usize) -> Result<Vec<(usize, f64)>> {
    if k == 0 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    if exclude >= scores.len() {
        return Err(Error::IndexOutOfRange {
            index: exclude,
            dim: scores.len(),
        });
    }
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&i| i != exclude).collect();
    idx.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    idx.truncate(k);
    Ok(idx.into_iter().map(|i| (i, scores[i])).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactoredSimilaritySet {
    factors: Vec<FactoredSimilarity>,
}

impl FactoredSimilaritySet {
    pub fn identity(net: &HeteroNetwork) -> Self {
        FactoredSimilaritySet {
            factors: net.sizes().into_iter().map(FactoredSimilarity::identity).collect(),
        }
    }

    pub fn from_factors(factors: Vec<FactoredSimilarity>) -> Self {
        FactoredSimilaritySet { factors }
    }

    pub fn factor(&self, t: TypeId) -> &FactoredSimilarity {
        &self.factors[t.0]
    }

    pub fn factors(&self) -> &[FactoredSimilarity] {
        &self.factors
    }

    pub fn to_dense(&self) -> SimilaritySet {
        SimilaritySet::from_blocks(self.factors.iter().map(FactoredSimilarity::to_dense).collect())
            .expect("square blocks")
    }

    fn check_shapes(&self, net: &HeteroNetwork) -> Result<()> {
        let sizes = net.sizes();
        if sizes.len() != self.factors.len()
            || sizes.iter().zip(&self.factors).any(|(&n, f)| f.dim() != n)
        {
            return Err(Error::Shape("factors do not match network types".into()));
        }
        Ok(())
    }
}

/// `|| U1 D1 U1^T - U2 D2 U2^T ||_F` without forming either product: both
/// live in the span of `[U1 U2] = Q R`, so the norm is that of the small
/// matrix `R diag(D1, -D2) R^T`.
pub fn factored_difference_norm(a: &FactoredSimilarity, b: &FactoredSimilarity) -> f64 {
    let (ra, rb) = (a.rank(), b.rank());
    if ra + rb == 0 {
        return 0.0;
    }
    let n = a.dim();
    let mut v = DMatrix::zeros(n, ra + rb);
    v.columns_mut(0, ra).copy_from(&a.u);
    v.columns_mut(ra, rb).copy_from(&b.u);
    let mut m = DVector::zeros(ra + rb);
    m.rows_mut(0, ra).copy_from(&a.d);
    m.rows_mut(ra, rb).copy_from(&(-&b.d));
    let r = v.qr().r();
    let core = &r * DMatrix::from_diagonal(&m) * r.transpose();
    core.norm()
}

/// Per-type factored residuals.
pub fn factored_residual_per_type(prev: &FactoredSimilaritySet, next: &FactoredSimilaritySet) -> Result<Vec<f64>> {
    if prev.factors.len() != next.factors.len()
        || prev.factors.iter().zip(&next.factors).any(|(a, b)| a.dim() != b.dim())
    {
        return Err(Error::Shape("factored states differ in shape".into()));
    }
    Ok(prev
        .factors
        .par_iter()
        .zip(&next.factors)
        .map(|(a, b)| factored_difference_norm(a, b))
        .collect())
}

pub fn factored_residual(prev: &FactoredSimilaritySet, next: &FactoredSimilaritySet) -> Result<f64> {
    Ok(factored_residual_per_type(prev, next)?.iter().sum())
}

struct OperatorTerm<'a> {
    op: &'a CscMatrix,
    weight: f64,
    partner: &'a FactoredSimilarity,
}

/// The update for one type, `x -> sum w G^T (I + U_p D_p U_p^T) G x`, minus
/// its exact diagonal. Applying it costs O(nnz + |p| a_p) per vector.
pub struct UpdateOperator<'a> {
    dim: usize,
    terms: Vec<OperatorTerm<'a>>,
    diagonal: DVector<f64>,
    visits: VisitCounter,
}

impl<'a> UpdateOperator<'a> {
    pub fn new(couplings: &'a Couplings, state: &'a FactoredSimilaritySet, t: TypeId, dim: usize) -> Self {
        let terms: Vec<_> = couplings
            .terms(t)
            .iter()
            .map(|term| OperatorTerm {
                op: &term.op,
                weight: term.weight,
                partner: state.factor(term.partner),
            })
            .collect();
        let mut diagonal = DVector::zeros(dim);
        for term in &terms {
            let p = term.partner;
            for a in 0..dim {
                let (rows, vals) = term.op.column(a);
                let direct: f64 = vals.iter().map(|v| v * v).sum();
                let mut low = 0.0;
                for k in 0..p.rank() {
                    let h: f64 = rows.iter().zip(vals).map(|(&c, &g)| g * p.u[(c, k)]).sum();
                    low += p.d[k] * h * h;
                }
                diagonal[a] += term.weight * (direct + low);
            }
        }
        UpdateOperator {
            dim,
            terms,
            diagonal,
            visits: VisitCounter::default(),
        }
    }

    pub fn diagonal(&self) -> &DVector<f64> {
        &self.diagonal
    }

    /// The update including its diagonal.
    pub fn apply_full(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, x.ncols());
        for term in &self.terms {
            let y = term.op.mul_dense(x);
            let p = term.partner;
            let z = if p.rank() > 0 {
                let mut coeff = p.u.transpose() * &y;
                for (k, mut row) in coeff.row_iter_mut().enumerate() {
                    row *= p.d[k];
                }
                y + &p.u * coeff
            } else {
                y
            };
            out += term.op.tr_mul_dense(&z) * term.weight;
            self.visits.add(2 * term.op.nnz() * x.ncols());
        }
        out
    }

    /// Stored-entry visits across all applications so far.
    pub fn edge_visits(&self) -> u64 {
        self.visits.get()
    }

    pub fn edges(&self) -> usize {
        self.terms.iter().map(|t| t.op.nnz()).sum()
    }
}

impl SymmetricOperator for UpdateOperator<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = self.apply_full(x);
        for (i, mut row) in out.row_iter_mut().enumerate() {
            row -= x.row(i) * self.diagonal[i];
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ranks {
    /// a_t = |t|.
    Full,
    /// The same rank for every type, capped at |t|.
    Uniform(usize),
    /// One rank per type, in type order.
    PerType(Vec<usize>),
}

impl Ranks {
    pub fn resolve(&self, net: &HeteroNetwork) -> Result<Vec<usize>> {
        let sizes = net.sizes();
        match self {
            Ranks::Full => Ok(sizes),
            Ranks::Uniform(0) => Err(Error::Config("rank must be >= 1".into())),
            Ranks::Uniform(k) => Ok(sizes.into_iter().map(|n| n.min(*k)).collect()),
            Ranks::PerType(ks) => {
                if ks.len() != sizes.len() {
                    return Err(Error::Config(format!(
                        "{} ranks given for {} types",
                        ks.len(),
                        sizes.len()
                    )));
                }
                for (t, (&k, &n)) in ks.iter().zip(&sizes).enumerate() {
                    if k == 0 || k > n {
                        return Err(Error::Config(format!(
                            "rank {k} for type `{}` outside [1, {n}]",
                            net.entity_type(TypeId(t)).name()
                        )));
                    }
                }
                Ok(ks.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvdConfig {
    pub ranks: Ranks,
    /// Extra random samples beyond the rank, clipped so rank + samples <= |t|.
    pub oversampling: usize,
    pub power_iters: usize,
    pub seed: u64,
}

impl Default for SvdConfig {
    fn default() -> Self {
        SvdConfig {
            ranks: Ranks::Uniform(20),
            oversampling: 10,
            power_iters: 2,
            seed: 0,
        }
    }
}

pub(crate) fn sweep_lowrank_with(
    couplings: &Couplings,
    state: &FactoredSimilaritySet,
    ranks: &[usize],
    cfg: &SvdConfig,
) -> Result<FactoredSimilaritySet> {
    let factors = (0..state.factors.len())
        .into_par_iter()
        .map(|t| {
            let t = TypeId(t);
            let n = state.factor(t).dim();
            if couplings.terms(t).is_empty() {
                return Ok(FactoredSimilarity::identity(n));
            }
            let op = UpdateOperator::new(couplings, state, t, n);
            let params = EigParams {
                rank: ranks[t.0],
                oversampling: cfg.oversampling,
                power_iters: cfg.power_iters,
            };
            // The same test matrix is drawn for a type at every sweep, which
            // keeps the projected map deterministic between sweeps.
            let mut rng = rng_for(cfg.seed, &[stream::LOWRANK, t.0 as u64]);
            let eig = randomized_eig(&op, params, &mut rng)?;
            FactoredSimilarity::new(eig.u, eig.d)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FactoredSimilaritySet { factors })
}

/// One low-rank sweep from `state`.
pub fn sweep_lowrank(
    net: &HeteroNetwork,
    weights: &WeightMatrix,
    state: &FactoredSimilaritySet,
    cfg: &SvdConfig,
) -> Result<FactoredSimilaritySet> {
    state.check_shapes(net)?;
    let ranks = cfg.ranks.resolve(net)?;
    sweep_lowrank_with(&Couplings::new(net, weights), state, &ranks, cfg)
}

#[derive(Debug, Clone)]
pub struct LowRankSolution {
    pub factors: FactoredSimilaritySet,
    pub trace: SolveTrace,
    pub converged: bool,
    /// Per type, the largest deviation of the represented diagonal from 1.
    pub diagonal_drift: Vec<f64>,
}

pub fn solve_lowrank(
    net: &HeteroNetwork,
    weights: &WeightMatrix,
    solver: &SolverConfig,
    cfg: &SvdConfig,
) -> Result<LowRankSolution> {
    solver.validate()?;
    if solver.enforce_conditions {
        let report = check_convergence_conditions(net, weights);
        if !report.passes() {
            return Err(Error::Conditions(report.summary(net)));
        }
    }
    let ranks = cfg.ranks.resolve(net)?;
    let couplings = Couplings::new(net, weights);
    let start = Instant::now();
    let mut state = FactoredSimilaritySet::identity(net);
    let mut trace = SolveTrace::default();
    let mut converged = false;
    for iteration in 1..=solver.max_iter {
        let next = sweep_lowrank_with(&couplings, &state, &ranks, cfg)?;
        for t in net.type_ids() {
            let f = next.factor(t);
            if f.u.iter().chain(f.d.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    ty: net.entity_type(t).name().to_string(),
                    iteration,
                });
            }
        }
        let per_type = factored_residual_per_type(&state, &next)?;
        let residual: f64 = per_type.iter().sum();
        trace.entries.push(TraceEntry {
            iteration,
            residual,
            per_type,
            elapsed: start.elapsed(),
        });
        state = next;
        if residual <= solver.tol {
            converged = true;
            break;
        }
    }
    let diagonal_drift = state.factors.iter().map(FactoredSimilarity::diagonal_drift).collect();
    Ok(LowRankSolution {
        factors: state,
        trace,
        converged,
        diagonal_drift,
    })
}
