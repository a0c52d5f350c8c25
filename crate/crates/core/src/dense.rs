//! Dense reference solvers.
//!
//! Each sweep is a Jacobi update: every block of the new state is computed
//! from the previous state only, so the per-type work runs in parallel and
//! the result does not depend on scheduling.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::{HeteroNetwork, RelationId, TypeId};
use crate::similarity::{residual_per_type, SimilaritySet, SolveTrace, TraceEntry};
use crate::stochastic::Couplings;
use crate::weights::{check_convergence_conditions, WeightMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Stop once the summed Frobenius residual is at or below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Damping for the Lyapunov variant.
    pub damping: f64,
    /// Refuse to start when the convergence conditions (or, for the damped
    /// variant, the contraction bound) fail.
    pub enforce_conditions: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-9,
            max_iter: 100,
            damping: 0.8,
            enforce_conditions: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be >= 1".into()));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::Config(format!(
                "damping must lie in (0, 1), got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DenseSolution {
    pub similarity: SimilaritySet,
    pub trace: SolveTrace,
    pub converged: bool,
}

/// `sum_terms w * G^T S_p G` for type `t`.
fn coupled_update(couplings: &Couplings, state: &SimilaritySet, t: TypeId, n: usize) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(n, n);
    for term in couplings.terms(t) {
        let m = term.op.congruence(state.block(term.partner));
        acc += m * term.weight;
    }
    acc
}

pub(crate) fn sweep_with(couplings: &Couplings, state: &SimilaritySet) -> SimilaritySet {
    let blocks = (0..state.num_types())
        .into_par_iter()
        .map(|t| {
            let n = state.block(TypeId(t)).nrows();
            let mut next = coupled_update(couplings, state, TypeId(t), n);
            next.fill_diagonal(1.0);
            next
        })
        .collect();
    SimilaritySet::from_blocks(blocks).expect("square blocks")
}

pub(crate) fn lyapunov_sweep_with(couplings: &Couplings, state: &SimilaritySet, c: f64) -> SimilaritySet {
    let blocks = (0..state.num_types())
        .into_par_iter()
        .map(|t| {
            let n = state.block(TypeId(t)).nrows();
            let mut next = coupled_update(couplings, state, TypeId(t), n) * c;
            for i in 0..n {
                next[(i, i)] += 1.0 - c;
            }
            next
        })
        .collect();
    SimilaritySet::from_blocks(blocks).expect("square blocks")
}

/// One Jacobi sweep: `S_t <- sum w G^T S_p G`, then the diagonal is reset to 1.
pub fn sweep(net: &HeteroNetwork, weights: &WeightMatrix, state: &SimilaritySet) -> Result<SimilaritySet> {
    state.check_shapes(net)?;
    Ok(sweep_with(&Couplings::new(net, weights), state))
}

/// One step of the damped map `S_t <- c * sum w G^T S_p G + (1 - c) I`.
pub fn lyapunov_sweep(
    net: &HeteroNetwork,
    weights: &WeightMatrix,
    state: &SimilaritySet,
    c: f64,
) -> Result<SimilaritySet> {
    state.check_shapes(net)?;
    Ok(lyapunov_sweep_with(&Couplings::new(net, weights), state, c))
}

fn ensure_finite(net: &HeteroNetwork, s: &SimilaritySet, iteration: usize) -> Result<()> {
    for t in net.type_ids() {
        if s.block(t).iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                ty: net.entity_type(t).name().to_string(),
                iteration,
            });
        }
    }
    Ok(())
}

fn iterate<F>(net: &HeteroNetwork, cfg: &SolverConfig, step: F) -> Result<DenseSolution>
where
    F: Fn(&SimilaritySet) -> SimilaritySet,
{
    let start = Instant::now();
    let mut state = SimilaritySet::identity(net);
    let mut trace = SolveTrace::default();
    for iteration in 1..=cfg.max_iter {
        let next = step(&state);
        ensure_finite(net, &next, iteration)?;
        let per_type = residual_per_type(&state, &next)?;
        let residual: f64 = per_type.iter().sum();
        trace.entries.push(TraceEntry {
            iteration,
            residual,
            per_type,
            elapsed: start.elapsed(),
        });
        state = next;
        if residual <= cfg.tol {
            return Ok(DenseSolution {
                similarity: state,
                trace,
                converged: true,
            });
        }
    }
    Ok(DenseSolution {
        similarity: state,
        trace,
        converged: false,
    })
}

/// Fixed-point iteration of the tensor SimRank equation from `S = I`.
pub fn solve_dense(net: &HeteroNetwork, weights: &WeightMatrix, cfg: &SolverConfig) -> Result<DenseSolution> {
    cfg.validate()?;
    if cfg.enforce_conditions {
        let report = check_convergence_conditions(net, weights);
        if !report.passes() {
            return Err(Error::Conditions(report.summary(net)));
        }
    }
    let couplings = Couplings::new(net, weights);
    iterate(net, cfg, |s| sweep_with(&couplings, s))
}

/// Fixed-point iteration of the damped (Lyapunov) form. The diagonal is not
/// reset; read it with [`SimilaritySet::diagonal`].
pub fn solve_lyapunov(net: &HeteroNetwork, weights: &WeightMatrix, cfg: &SolverConfig) -> Result<DenseSolution> {
    cfg.validate()?;
    let c = cfg.damping;
    if cfg.enforce_conditions {
        let report = check_convergence_conditions(net, weights);
        for t in net.type_ids() {
            let bound = c * report.lyapunov_bound[t.0];
            if bound > 1.0 + 1e-12 {
                return Err(Error::ContractionBound {
                    ty: net.entity_type(t).name().to_string(),
                    bound,
                });
            }
        }
    }
    let couplings = Couplings::new(net, weights);
    iterate(net, cfg, |s| lyapunov_sweep_with(&couplings, s, c))
}

/// Classical SimRank on a homogeneous relation, in set form: for `a != b`,
/// `s(a, b) = C / (|I(a)| |I(b)|) * sum_{u in I(a), v in I(b)} s(u, v)` where
/// `I(x)` are the in-neighbours of `x`; `s(a, a) = 1`. Runs `iters` rounds
/// from the identity. `c = 1` gives the undamped recurrence.
pub fn classical_simrank(net: &HeteroNetwork, relation: RelationId, c: f64, iters: usize) -> Result<DMatrix<f64>> {
    let rel = net.relation(relation);
    if !rel.is_self_relation() {
        return Err(Error::Config(format!(
            "relation `{}` is not homogeneous",
            rel.name()
        )));
    }
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::Config(format!("decay must lie in (0, 1], got {c}")));
    }
    let n = net.entity_type(rel.src()).size();
    let mut in_nbrs = vec![Vec::new(); n];
    for &(u, v) in rel.edges() {
        in_nbrs[v].push(u);
    }
    let mut s = DMatrix::<f64>::identity(n, n);
    for _ in 0..iters {
        let mut next = DMatrix::<f64>::identity(n, n);
        for a in 0..n {
            for b in 0..n {
                if a == b || in_nbrs[a].is_empty() || in_nbrs[b].is_empty() {
                    continue;
                }
                let mut acc = 0.0;
                for &u in &in_nbrs[a] {
                    for &v in &in_nbrs[b] {
                        acc += s[(u, v)];
                    }
                }
                next[(a, b)] = c * acc / (in_nbrs[a].len() * in_nbrs[b].len()) as f64;
            }
        }
        s = next;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::toy;
    use crate::network::NetworkBuilder;
    use crate::weights::default_weights;

    #[test]
    fn toy_sweep_from_identity() {
        let net = toy();
        let w = default_weights(&net);
        let s = sweep(&net, &w, &SimilaritySet::identity(&net)).unwrap();
        // a1 and a2 share their only neighbour b1
        assert_eq!(s.block(TypeId(0))[(0, 1)], 1.0);
        assert_eq!(s.block(TypeId(1))[(0, 0)], 1.0);
    }

    #[test]
    fn sweep_without_relations_is_identity() {
        let mut b = NetworkBuilder::new();
        b.add_type("A", ["x", "y", "z"]).unwrap();
        let net = b.build();
        let id = SimilaritySet::identity(&net);
        let s = sweep(&net, &default_weights(&net), &id).unwrap();
        assert_eq!(s, id);
    }

    #[test]
    fn sweep_forces_unit_diagonal() {
        let net = toy();
        let w = default_weights(&net);
        let odd = SimilaritySet::from_blocks(vec![
            DMatrix::from_row_slice(2, 2, &[3.0, 0.2, 0.2, -1.0]),
            DMatrix::from_row_slice(1, 1, &[0.4]),
        ])
        .unwrap();
        let s = sweep(&net, &w, &odd).unwrap();
        for t in net.type_ids() {
            assert!(s.diagonal(t).iter().all(|&d| d == 1.0));
        }
    }

    #[test]
    fn sweep_rejects_wrong_shape() {
        let net = toy();
        let bad = SimilaritySet::from_blocks(vec![DMatrix::identity(2, 2)]).unwrap();
        assert!(matches!(
            sweep(&net, &default_weights(&net), &bad),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn permutation_relation_keeps_identity() {
        let mut b = NetworkBuilder::new();
        b.add_type("T", ["0", "1", "2", "3"]).unwrap();
        b.add_relation("p", "T", "T", [("0", "2"), ("2", "1"), ("1", "3"), ("3", "0")])
            .unwrap();
        let net = b.build();
        let sol = solve_dense(&net, &default_weights(&net), &SolverConfig::default()).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.trace.len(), 1);
        assert_eq!(sol.similarity.block(TypeId(0)), &DMatrix::identity(4, 4));
    }

    #[test]
    fn lyapunov_without_relations() {
        let mut b = NetworkBuilder::new();
        b.add_type("A", ["x", "y"]).unwrap();
        let net = b.build();
        let cfg = SolverConfig::default();
        let sol = solve_lyapunov(&net, &default_weights(&net), &cfg).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.trace.len(), 2);
        let expect = DMatrix::identity(2, 2) * (1.0 - cfg.damping);
        assert!((sol.similarity.block(TypeId(0)) - expect).abs().max() < 1e-15);
    }

    #[test]
    fn lyapunov_toy_closed_form() {
        // S_B = y, S_A = [[x, o], [o, x]] with x = c*y + 1 - c, o = c*y and
        // y = c * (x + o) / 2 + 1 - c; eliminating gives y = (1 + c/2) / (1 + c).
        let net = toy();
        let cfg = SolverConfig {
            tol: 1e-14,
            max_iter: 500,
            ..SolverConfig::default()
        };
        let c = cfg.damping;
        let sol = solve_lyapunov(&net, &default_weights(&net), &cfg).unwrap();
        assert!(sol.converged);
        let y = (1.0 + c / 2.0) / (1.0 + c);
        let a = sol.similarity.block(TypeId(0));
        assert!((sol.similarity.block(TypeId(1))[(0, 0)] - y).abs() < 1e-12);
        assert!((a[(0, 1)] - c * y).abs() < 1e-12);
        assert!((a[(0, 0)] - (c * y + 1.0 - c)).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_refuses_violated_bound() {
        let cfg = SolverConfig {
            damping: 0.99,
            ..SolverConfig::default()
        };
        // Doubling the only relation's weight breaks the bound.
        let mut b = NetworkBuilder::new();
        b.add_type("A", ["a1", "a2"]).unwrap();
        b.add_type("B", ["b1"]).unwrap();
        b.add_relation("r1", "A", "B", [("a1", "b1")]).unwrap();
        b.add_relation("r2", "A", "B", [("a2", "b1")]).unwrap();
        let net2 = b.build();
        let mut over = crate::weights::WeightMatrix::new();
        for r in [RelationId(0), RelationId(1)] {
            over.set(&net2, TypeId(0), r, 1.0).unwrap();
        }
        assert!(matches!(
            solve_lyapunov(&net2, &over, &cfg),
            Err(Error::ContractionBound { .. })
        ));
        let lax = SolverConfig {
            enforce_conditions: false,
            max_iter: 5,
            ..cfg
        };
        assert!(solve_lyapunov(&net2, &over, &lax).is_ok());
    }

    #[test]
    fn classical_shared_in_neighbour() {
        let mut b = NetworkBuilder::new();
        b.add_type("V", ["1", "2", "3"]).unwrap();
        b.add_relation("e", "V", "V", [("3", "1"), ("3", "2")]).unwrap();
        let net = b.build();
        for iters in [1, 2, 5] {
            let s = classical_simrank(&net, RelationId(0), 0.8, iters).unwrap();
            assert!((s[(0, 1)] - 0.8).abs() < 1e-15);
            assert_eq!(s[(0, 2)], 0.0);
            assert!(s.diagonal().iter().all(|&d| d == 1.0));
        }
    }

    #[test]
    fn classical_two_cycle() {
        let mut b = NetworkBuilder::new();
        b.add_type("V", ["1", "2"]).unwrap();
        b.add_relation("e", "V", "V", [("1", "2"), ("2", "1")]).unwrap();
        let net = b.build();
        let s = classical_simrank(&net, RelationId(0), 0.8, 10).unwrap();
        assert_eq!(s[(0, 1)], 0.0);
    }

    #[test]
    fn solve_rejects_overweight_unless_overridden() {
        let mut b = NetworkBuilder::new();
        b.add_type("A", ["a1", "a2"]).unwrap();
        b.add_type("B", ["b1"]).unwrap();
        b.add_relation("r1", "A", "B", [("a1", "b1")]).unwrap();
        b.add_relation("r2", "A", "B", [("a2", "b1"), ("a1", "b1")]).unwrap();
        let net = b.build();
        let mut w = WeightMatrix::new();
        for r in [RelationId(0), RelationId(1)] {
            w.set(&net, TypeId(0), r, 0.9).unwrap();
        }
        let cfg = SolverConfig::default();
        assert!(matches!(solve_dense(&net, &w, &cfg), Err(Error::Conditions(_))));
        let lax = SolverConfig {
            enforce_conditions: false,
            ..cfg
        };
        assert!(solve_dense(&net, &w, &lax).is_ok());
    }

    #[test]
    fn config_validation() {
        let bad = [
            SolverConfig { tol: 0.0, ..SolverConfig::default() },
            SolverConfig { max_iter: 0, ..SolverConfig::default() },
            SolverConfig { damping: 1.0, ..SolverConfig::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }
}
