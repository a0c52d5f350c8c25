//! Column-stochastic relation operators and the per-type coupling terms the
//! solvers iterate over.

use crate::network::{HeteroNetwork, RelationId, TypeId};
use crate::sparse::CscMatrix;
use crate::weights::WeightMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Shape |src| x |dst|. Column j holds the sources related to dst entity j,
    /// each weighted 1/in-degree(j).
    Forward,
    /// Shape |dst| x |src|. Column i holds the destinations of src entity i,
    /// each weighted 1/out-degree(i).
    Reverse,
}

#[derive(Debug, Clone)]
pub struct StochasticOperator {
    pub relation: RelationId,
    pub direction: Direction,
    pub matrix: CscMatrix,
}

impl StochasticOperator {
    /// Columns whose sum is neither 0 nor 1 (within `tol`), as (column, sum).
    pub fn non_stochastic_columns(&self, tol: f64) -> Vec<(usize, f64)> {
        self.matrix
            .col_sums()
            .into_iter()
            .enumerate()
            .filter(|&(_, s)| s != 0.0 && (s - 1.0).abs() > tol)
            .collect()
    }
}

pub fn column_stochastic(net: &HeteroNetwork, relation: RelationId, direction: Direction) -> StochasticOperator {
    let rel = net.relation(relation);
    let ns = net.entity_type(rel.src()).size();
    let nd = net.entity_type(rel.dst()).size();
    let (nrows, ncols) = match direction {
        Direction::Forward => (ns, nd),
        Direction::Reverse => (nd, ns),
    };
    let mut degree = vec![0usize; ncols];
    let oriented: Vec<(usize, usize)> = rel
        .edges()
        .iter()
        .map(|&(i, j)| match direction {
            Direction::Forward => (i, j),
            Direction::Reverse => (j, i),
        })
        .collect();
    for &(_, c) in &oriented {
        degree[c] += 1;
    }
    let triplets: Vec<_> = oriented
        .into_iter()
        .map(|(r, c)| (r, c, 1.0 / degree[c] as f64))
        .collect();
    StochasticOperator {
        relation,
        direction,
        matrix: CscMatrix::from_triplets(nrows, ncols, &triplets),
    }
}

/// The operator whose columns are indexed by `t`'s entities, so that
/// `G^T S_p G` averages partner similarities over neighbour pairs. For a
/// self-relation the forward operator is used: neighbours are in-neighbours,
/// as in classical SimRank.
pub fn aggregation_operator(net: &HeteroNetwork, relation: RelationId, t: TypeId) -> StochasticOperator {
    let rel = net.relation(relation);
    let direction = if rel.dst() == t {
        Direction::Forward
    } else {
        assert_eq!(rel.src(), t, "relation does not touch type");
        Direction::Reverse
    };
    column_stochastic(net, relation, direction)
}

#[derive(Debug, Clone)]
pub struct CouplingTerm {
    pub relation: RelationId,
    pub partner: TypeId,
    pub weight: f64,
    /// |partner| x |t|, column-stochastic or zero per column.
    pub op: CscMatrix,
}

/// For every type, the weighted operators feeding its update. Terms with
/// zero weight are dropped.
#[derive(Debug, Clone)]
pub struct Couplings {
    terms: Vec<Vec<CouplingTerm>>,
}

impl Couplings {
    pub fn new(net: &HeteroNetwork, weights: &WeightMatrix) -> Self {
        let terms = net
            .type_ids()
            .map(|t| {
                net.incident(t)
                    .into_iter()
                    .filter_map(|r| {
                        let w = weights.get(t, r);
                        (w != 0.0).then(|| CouplingTerm {
                            relation: r,
                            partner: net.relation(r).partner(t).unwrap(),
                            weight: w,
                            op: aggregation_operator(net, r, t).matrix,
                        })
                    })
                    .collect()
            })
            .collect();
        Couplings { terms }
    }

    pub fn terms(&self, t: TypeId) -> &[CouplingTerm] {
        &self.terms[t.0]
    }
}
