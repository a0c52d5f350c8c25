//! Relation weights and the convergence-condition report.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::network::{HeteroNetwork, RelationId, TypeId};
use crate::stochastic::{aggregation_operator, column_stochastic, Direction};

pub const COLUMN_TOL: f64 = 1e-12;
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Weight of relation `j` in the update of type `t`. The partner type is
/// implied by the relation. Missing entries are zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightMatrix {
    entries: BTreeMap<(TypeId, RelationId), f64>,
}

impl WeightMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, net: &HeteroNetwork, t: TypeId, r: RelationId, w: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::Config(format!("weight {w} outside [0, 1]")));
        }
        if t.0 >= net.num_types() {
            return Err(Error::UnknownType(t.to_string()));
        }
        if r.0 >= net.relations().len() {
            return Err(Error::UnknownRelation(format!("#{}", r.0)));
        }
        if !net.relation(r).touches(t) {
            return Err(Error::Config(format!(
                "relation `{}` does not touch type `{}`",
                net.relation(r).name(),
                net.entity_type(t).name()
            )));
        }
        self.entries.insert((t, r), w);
        Ok(())
    }

    pub fn get(&self, t: TypeId, r: RelationId) -> f64 {
        self.entries.get(&(t, r)).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (TypeId, RelationId, f64)> + '_ {
        self.entries.iter().map(|(&(t, r), &w)| (t, r, w))
    }

    pub fn incident_sum(&self, t: TypeId) -> f64 {
        self.entries
            .range((t, RelationId(0))..=(t, RelationId(usize::MAX)))
            .map(|(_, w)| w)
            .sum()
    }
}

/// No preference among relations: each relation touching `t` gets
/// 1 / (number of relations touching `t`).
pub fn default_weights(net: &HeteroNetwork) -> WeightMatrix {
    let mut wm = WeightMatrix::new();
    for t in net.type_ids() {
        let inc = net.incident(t);
        let w = 1.0 / inc.len() as f64;
        for r in inc {
            wm.entries.insert((t, r), w);
        }
    }
    wm
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonStochasticColumn {
    pub relation: RelationId,
    pub direction: Direction,
    pub column: usize,
    pub sum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub non_stochastic: Vec<NonStochasticColumn>,
    /// Types whose incident weights sum above 1, with the sum.
    pub overweight: Vec<(TypeId, f64)>,
    /// Per type: sum of w * |G|_1^2 over its coupling operators.
    pub lyapunov_bound: Vec<f64>,
    pub incident_sums: Vec<f64>,
}

impl ConditionReport {
    pub fn passes(&self) -> bool {
        self.non_stochastic.is_empty() && self.overweight.is_empty()
    }

    pub fn summary(&self, net: &HeteroNetwork) -> String {
        let mut parts = Vec::new();
        for c in &self.non_stochastic {
            parts.push(format!(
                "relation `{}` ({:?}) column {} sums to {}",
                net.relation(c.relation).name(),
                c.direction,
                c.column,
                c.sum
            ));
        }
        for &(t, s) in &self.overweight {
            parts.push(format!(
                "type `{}` incident weights sum to {s}",
                net.entity_type(t).name()
            ));
        }
        if parts.is_empty() {
            "ok".to_string()
        } else {
            parts.join("; ")
        }
    }
}

pub fn check_convergence_conditions(net: &HeteroNetwork, weights: &WeightMatrix) -> ConditionReport {
    let mut non_stochastic = Vec::new();
    for r in net.relation_ids() {
        for direction in [Direction::Forward, Direction::Reverse] {
            let op = column_stochastic(net, r, direction);
            for (column, sum) in op.non_stochastic_columns(COLUMN_TOL) {
                non_stochastic.push(NonStochasticColumn {
                    relation: r,
                    direction,
                    column,
                    sum,
                });
            }
        }
    }
    let mut overweight = Vec::new();
    let mut incident_sums = Vec::new();
    let mut lyapunov_bound = Vec::new();
    for t in net.type_ids() {
        let s = weights.incident_sum(t);
        if s > 1.0 + WEIGHT_SUM_TOL {
            overweight.push((t, s));
        }
        incident_sums.push(s);
        let bound = net
            .incident(t)
            .into_iter()
            .map(|r| {
                let norm = aggregation_operator(net, r, t).matrix.norm_1();
                weights.get(t, r) * norm * norm
            })
            .sum();
        lyapunov_bound.push(bound);
    }
    ConditionReport {
        non_stochastic,
        overweight,
        lyapunov_bound,
        incident_sums,
    }
}
