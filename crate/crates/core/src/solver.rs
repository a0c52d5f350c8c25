//! Solver strategies selectable by name at runtime.

use std::collections::BTreeMap;

use crate::dense::{solve_dense, solve_lyapunov, SolverConfig};
use crate::error::{Error, Result};
use crate::lowrank::{solve_lowrank, FactoredSimilaritySet, SvdConfig};
use crate::network::HeteroNetwork;
use crate::similarity::{SimilaritySet, SolveTrace};
use crate::weights::WeightMatrix;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveOptions {
    pub solver: SolverConfig,
    /// Only read by factored solvers.
    pub svd: SvdConfig,
}

#[derive(Debug, Clone)]
pub enum Similarity {
    Dense(SimilaritySet),
    Factored(FactoredSimilaritySet),
}

impl Similarity {
    pub fn to_dense(&self) -> SimilaritySet {
        match self {
            Similarity::Dense(s) => s.clone(),
            Similarity::Factored(f) => f.to_dense(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub similarity: Similarity,
    pub trace: SolveTrace,
    pub converged: bool,
}

pub trait Solver: Send + Sync {
    fn name(&self) -> &'static str;

    fn solve(&self, net: &HeteroNetwork, weights: &WeightMatrix, opts: &SolveOptions) -> Result<Outcome>;
}

pub struct DenseSolver;

impl Solver for DenseSolver {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn solve(&self, net: &HeteroNetwork, weights: &WeightMatrix, opts: &SolveOptions) -> Result<Outcome> {
        let sol = solve_dense(net, weights, &opts.solver)?;
        Ok(Outcome {
            similarity: Similarity::Dense(sol.similarity),
            trace: sol.trace,
            converged: sol.converged,
        })
    }
}

pub struct LowRankSolver;

impl Solver for LowRankSolver {
    fn name(&self) -> &'static str {
        "lowrank"
    }

    fn solve(&self, net: &HeteroNetwork, weights: &WeightMatrix, opts: &SolveOptions) -> Result<Outcome> {
        let sol = solve_lowrank(net, weights, &opts.solver, &opts.svd)?;
        Ok(Outcome {
            similarity: Similarity::Factored(sol.factors),
            trace: sol.trace,
            converged: sol.converged,
        })
    }
}

pub struct LyapunovSolver;

impl Solver for LyapunovSolver {
    fn name(&self) -> &'static str {
        "lyapunov"
    }

    fn solve(&self, net: &HeteroNetwork, weights: &WeightMatrix, opts: &SolveOptions) -> Result<Outcome> {
        let sol = solve_lyapunov(net, weights, &opts.solver)?;
        Ok(Outcome {
            similarity: Similarity::Dense(sol.similarity),
            trace: sol.trace,
            converged: sol.converged,
        })
    }
}

pub struct Registry {
    solvers: BTreeMap<&'static str, Box<dyn Solver>>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            solvers: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, solver: Box<dyn Solver>) -> Result<()> {
        let name = solver.name();
        if self.solvers.contains_key(name) {
            return Err(Error::Config(format!("solver `{name}` registered twice")));
        }
        self.solvers.insert(name, solver);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&dyn Solver> {
        self.solvers.get(name).map(|s| s.as_ref()).ok_or_else(|| {
            Error::Config(format!(
                "unknown solver `{name}` (available: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.solvers.keys().copied().collect()
    }
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Registry::empty();
        for s in [
            Box::new(DenseSolver) as Box<dyn Solver>,
            Box::new(LowRankSolver),
            Box::new(LyapunovSolver),
        ] {
            r.register(s).expect("built-in names are distinct");
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::toy;
    use crate::lowrank::Ranks;
    use crate::network::TypeId;
    use crate::weights::default_weights;

    #[test]
    fn builtins_are_registered() {
        let r = Registry::default();
        assert_eq!(r.names(), vec!["dense", "lowrank", "lyapunov"]);
        assert!(r.get("nope").is_err());
        let mut r = r;
        assert!(r.register(Box::new(DenseSolver)).is_err());
    }

    #[test]
    fn strategies_agree_on_toy() {
        let net = toy();
        let w = default_weights(&net);
        let reg = Registry::default();
        let opts = SolveOptions {
            svd: SvdConfig {
                ranks: Ranks::Full,
                ..SvdConfig::default()
            },
            ..SolveOptions::default()
        };
        let dense = reg.get("dense").unwrap().solve(&net, &w, &opts).unwrap();
        let low = reg.get("lowrank").unwrap().solve(&net, &w, &opts).unwrap();
        assert!(dense.converged && low.converged);
        let (a, b) = (dense.similarity.to_dense(), low.similarity.to_dense());
        for t in [TypeId(0), TypeId(1)] {
            assert!((a.block(t) - b.block(t)).abs().max() < 1e-9);
        }
        let lyap = reg.get("lyapunov").unwrap().solve(&net, &w, &opts).unwrap();
        assert!(lyap.converged);
    }
}
