//! Typed, multi-relational network model.
//!
//! Entities carry arbitrary string ids externally and dense 0-based indices
//! internally. Index order is declaration order, so a network loaded from
//! files keeps the row order of its entity files.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TypeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationId(pub usize);

impl fmt::Display for TypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "type#{}", self.0)
    }
}

#[derive(Debug, Clone)]
pub struct EntityType {
    name: String,
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl EntityType {
    pub fn new(name: impl Into<String>, ids: Vec<String>) -> Result<Self> {
        let name = name.into();
        if ids.is_empty() {
            return Err(Error::EmptyType(name));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateEntity {
                    ty: name,
                    id: id.clone(),
                });
            }
        }
        Ok(EntityType { name, ids, index })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn size(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }
}

impl PartialEq for EntityType {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.ids == other.ids
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    name: String,
    src: TypeId,
    dst: TypeId,
    /// Sorted, duplicate-free (src index, dst index) pairs.
    edges: Vec<(usize, usize)>,
}

impl Relation {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn src(&self) -> TypeId {
        self.src
    }

    pub fn dst(&self) -> TypeId {
        self.dst
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_self_relation(&self) -> bool {
        self.src == self.dst
    }

    pub fn touches(&self, t: TypeId) -> bool {
        self.src == t || self.dst == t
    }

    /// The type on the other end of the relation as seen from `t`.
    pub fn partner(&self, t: TypeId) -> Option<TypeId> {
        if self.src == t {
            Some(self.dst)
        } else if self.dst == t {
            Some(self.src)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeteroNetwork {
    types: Vec<EntityType>,
    relations: Vec<Relation>,
}

impl HeteroNetwork {
    pub fn types(&self) -> &[EntityType] {
        &self.types
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn entity_type(&self, t: TypeId) -> &EntityType {
        &self.types[t.0]
    }

    pub fn relation(&self, r: RelationId) -> &Relation {
        &self.relations[r.0]
    }

    pub fn type_ids(&self) -> impl Iterator<Item = TypeId> {
        (0..self.types.len()).map(TypeId)
    }

    pub fn relation_ids(&self) -> impl Iterator<Item = RelationId> {
        (0..self.relations.len()).map(RelationId)
    }

    pub fn type_by_name(&self, name: &str) -> Option<TypeId> {
        self.types.iter().position(|t| t.name == name).map(TypeId)
    }

    pub fn relation_by_name(&self, name: &str) -> Option<RelationId> {
        self.relations
            .iter()
            .position(|r| r.name == name)
            .map(RelationId)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.types.iter().map(EntityType::size).collect()
    }

    pub fn total_entities(&self) -> usize {
        self.types.iter().map(EntityType::size).sum()
    }

    /// Relations with `t` at either end, in relation order. A self-relation
    /// appears once.
    pub fn incident(&self, t: TypeId) -> Vec<RelationId> {
        self.relation_ids()
            .filter(|&r| self.relation(r).touches(t))
            .collect()
    }
}

/// Incremental construction with validation. `build` performs the checks
/// that need the full picture.
#[derive(Debug, Default)]
pub struct NetworkBuilder {
    types: Vec<EntityType>,
    relations: Vec<Relation>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_type<I, S>(&mut self, name: &str, ids: I) -> Result<TypeId>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if self.types.iter().any(|t| t.name == name) {
            return Err(Error::DuplicateType(name.to_string()));
        }
        let ty = EntityType::new(name, ids.into_iter().map(Into::into).collect())?;
        self.types.push(ty);
        Ok(TypeId(self.types.len() - 1))
    }

    fn lookup_type(&self, name: &str) -> Result<TypeId> {
        self.types
            .iter()
            .position(|t| t.name == name)
            .map(TypeId)
            .ok_or_else(|| Error::UnknownType(name.to_string()))
    }

    /// Adds a relation whose edges are given as external id pairs.
    pub fn add_relation<I, A, B>(&mut self, name: &str, src: &str, dst: &str, edges: I) -> Result<RelationId>
    where
        I: IntoIterator<Item = (A, B)>,
        A: AsRef<str>,
        B: AsRef<str>,
    {
        let s = self.lookup_type(src)?;
        let d = self.lookup_type(dst)?;
        let (st, dt) = (&self.types[s.0], &self.types[d.0]);
        let mut indexed = Vec::new();
        for (a, b) in edges {
            let (a, b) = (a.as_ref(), b.as_ref());
            let i = st.index_of(a).ok_or_else(|| Error::UnknownEntity {
                relation: name.to_string(),
                ty: st.name.clone(),
                id: a.to_string(),
            })?;
            let j = dt.index_of(b).ok_or_else(|| Error::UnknownEntity {
                relation: name.to_string(),
                ty: dt.name.clone(),
                id: b.to_string(),
            })?;
            indexed.push((i, j));
        }
        self.add_relation_indexed(name, s, d, indexed)
    }

    /// Adds a relation whose edges are already dense indices.
    pub fn add_relation_indexed(
        &mut self,
        name: &str,
        src: TypeId,
        dst: TypeId,
        edges: Vec<(usize, usize)>,
    ) -> Result<RelationId> {
        if self.relations.iter().any(|r| r.name == name) {
            return Err(Error::DuplicateRelation(name.to_string()));
        }
        let st = self
            .types
            .get(src.0)
            .ok_or_else(|| Error::UnknownType(src.to_string()))?;
        let dt = self
            .types
            .get(dst.0)
            .ok_or_else(|| Error::UnknownType(dst.to_string()))?;
        let mut seen = BTreeSet::new();
        for &(i, j) in &edges {
            if i >= st.size() {
                return Err(Error::UnknownEntity {
                    relation: name.to_string(),
                    ty: st.name.clone(),
                    id: format!("#{i}"),
                });
            }
            if j >= dt.size() {
                return Err(Error::UnknownEntity {
                    relation: name.to_string(),
                    ty: dt.name.clone(),
                    id: format!("#{j}"),
                });
            }
            if !seen.insert((i, j)) {
                return Err(Error::DuplicateEdge {
                    relation: name.to_string(),
                    src: st.id(i).to_string(),
                    dst: dt.id(j).to_string(),
                });
            }
        }
        self.relations.push(Relation {
            name: name.to_string(),
            src,
            dst,
            edges: seen.into_iter().collect(),
        });
        Ok(RelationId(self.relations.len() - 1))
    }

    pub fn build(self) -> HeteroNetwork {
        HeteroNetwork {
            types: self.types,
            relations: self.relations,
        }
    }
}

/// Declarative description of one type: its name and entity ids in order.
#[derive(Debug, Clone)]
pub struct TypeSpec {
    pub name: String,
    pub ids: Vec<String>,
}

/// Declarative description of one relation with edges as id pairs.
#[derive(Debug, Clone)]
pub struct RelationSpec {
    pub name: String,
    pub src: String,
    pub dst: String,
    pub edges: Vec<(String, String)>,
}

pub fn build_network(types: &[TypeSpec], relations: &[RelationSpec]) -> Result<HeteroNetwork> {
    let mut b = NetworkBuilder::new();
    for t in types {
        b.add_type(&t.name, t.ids.iter().cloned())?;
    }
    for r in relations {
        b.add_relation(&r.name, &r.src, &r.dst, r.edges.iter().map(|(a, b)| (a, b)))?;
    }
    Ok(b.build())
}
