//! On-disk formats.
//!
//! A network bundle is a directory holding `schema.json`, one `id` CSV per
//! type and one `src_id,dst_id` CSV per relation. Index order is file order.
//! Similarities are written as `type,row_id,col_id,value` over the upper
//! triangle, factors as `type,field,index,col,value`, traces as
//! `iteration,residual,seconds`. Floats use 17 significant digits.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lowrank::{FactoredSimilarity, FactoredSimilaritySet};
use crate::network::{HeteroNetwork, NetworkBuilder, TypeId};
use crate::similarity::{SimilaritySet, SolveTrace};
use crate::synth::PointCloud;
use crate::weights::{default_weights, WeightMatrix};

pub const SCHEMA_FILE: &str = "schema.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeEntry {
    pub name: String,
    pub entities_csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationEntry {
    pub name: String,
    pub src: String,
    pub dst: String,
    pub edges_csv: String,
}

/// One weight `w_{t,p}^{(j)}`. `partner` must be the other endpoint of
/// `relation` as seen from `type`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    #[serde(rename = "type")]
    pub ty: String,
    pub partner: String,
    pub relation: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub types: Vec<TypeEntry>,
    pub relations: Vec<RelationEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<WeightEntry>>,
}

#[derive(Debug, Clone)]
pub struct Bundle {
    pub network: HeteroNetwork,
    /// Weights from the schema, or the defaults when it lists none.
    pub weights: WeightMatrix,
    pub explicit_weights: bool,
}

/// 17 significant digits: enough to round-trip any f64.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => parse_err(path, line, format!("{kind:?}")),
    }
}

fn open_csv(path: &Path, header: &[&str]) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let found = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if found.iter().collect::<Vec<_>>() != header {
        return Err(parse_err(
            path,
            1,
            format!("expected header `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    Ok(rdr)
}

/// Iterates records as `(line, fields)`, checking the field count.
fn records(path: &Path, rdr: &mut csv::Reader<fs::File>, width: usize) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(parse_err(path, line, format!("expected {width} fields, found {}", rec.len())));
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(path: &Path, line: u64, field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| parse_err(path, line, format!("invalid {what} `{field}`")))
}

fn create(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_row<I, S>(path: &Path, w: &mut csv::Writer<fs::File>, row: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| csv_err(path, e))
}

fn finish(path: &Path, mut w: csv::Writer<fs::File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_ids(path: &Path) -> Result<Vec<String>> {
    let mut rdr = open_csv(path, &["id"])?;
    let mut ids = Vec::new();
    let mut seen = HashMap::new();
    for (line, rec) in records(path, &mut rdr, 1)? {
        let id = rec[0].to_string();
        if let Some(first) = seen.insert(id.clone(), line) {
            return Err(parse_err(path, line, format!("duplicate id `{id}` (first on line {first})")));
        }
        ids.push(id);
    }
    Ok(ids)
}

fn read_schema(dir: &Path) -> Result<Schema> {
    let path = dir.join(SCHEMA_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_err(&path, e.line() as u64, e.to_string()))
}

pub fn load_bundle(dir: &Path) -> Result<Bundle> {
    let schema = read_schema(dir)?;
    let mut b = NetworkBuilder::new();
    for t in &schema.types {
        let path = dir.join(&t.entities_csv);
        let ids = read_ids(&path)?;
        b.add_type(&t.name, ids).map_err(|e| Error::Format {
            path: path.clone(),
            msg: e.to_string(),
        })?;
    }
    let net_types = b.build();
    // Rebuild with relations resolved against the loaded ids so that edge
    // errors can report their line.
    let mut b = NetworkBuilder::new();
    for t in net_types.types() {
        b.add_type(t.name(), t.ids().iter().cloned())?;
    }
    for r in &schema.relations {
        let path = dir.join(&r.edges_csv);
        let src = net_types.type_by_name(&r.src).ok_or_else(|| Error::Format {
            path: dir.join(SCHEMA_FILE),
            msg: format!("relation `{}` names unknown type `{}`", r.name, r.src),
        })?;
        let dst = net_types.type_by_name(&r.dst).ok_or_else(|| Error::Format {
            path: dir.join(SCHEMA_FILE),
            msg: format!("relation `{}` names unknown type `{}`", r.name, r.dst),
        })?;
        let (st, dt) = (net_types.entity_type(src), net_types.entity_type(dst));
        let mut rdr = open_csv(&path, &["src_id", "dst_id"])?;
        let mut edges = Vec::new();
        let mut seen = HashMap::new();
        for (line, rec) in records(&path, &mut rdr, 2)? {
            let i = st.index_of(&rec[0]).ok_or_else(|| {
                parse_err(&path, line, format!("unknown {} id `{}`", st.name(), &rec[0]))
            })?;
            let j = dt.index_of(&rec[1]).ok_or_else(|| {
                parse_err(&path, line, format!("unknown {} id `{}`", dt.name(), &rec[1]))
            })?;
            if let Some(first) = seen.insert((i, j), line) {
                return Err(parse_err(path.as_path(), line, format!("duplicate edge (first on line {first})")));
            }
            edges.push((i, j));
        }
        b.add_relation_indexed(&r.name, src, dst, edges)
            .map_err(|e| Error::Format {
                path: dir.join(SCHEMA_FILE),
                msg: e.to_string(),
            })?;
    }
    let network = b.build();
    let (weights, explicit_weights) = match &schema.weights {
        Some(entries) => (weights_from_entries(&network, entries).map_err(|e| Error::Format {
            path: dir.join(SCHEMA_FILE),
            msg: e.to_string(),
        })?, true),
        None => (default_weights(&network), false),
    };
    Ok(Bundle {
        network,
        weights,
        explicit_weights,
    })
}

pub fn load_network(dir: &Path) -> Result<HeteroNetwork> {
    load_bundle(dir).map(|b| b.network)
}

/// Builds a weight matrix holding exactly the listed entries; unlisted
/// `(type, relation)` pairs get weight 0.
pub fn weights_from_entries(net: &HeteroNetwork, entries: &[WeightEntry]) -> Result<WeightMatrix> {
    let mut w = WeightMatrix::new();
    for e in entries {
        let t = net
            .type_by_name(&e.ty)
            .ok_or_else(|| Error::UnknownType(e.ty.clone()))?;
        let r = net
            .relation_by_name(&e.relation)
            .ok_or_else(|| Error::UnknownRelation(e.relation.clone()))?;
        let partner = net.relation(r).partner(t).ok_or_else(|| {
            Error::Config(format!("relation `{}` does not touch type `{}`", e.relation, e.ty))
        })?;
        if net.entity_type(partner).name() != e.partner {
            return Err(Error::Config(format!(
                "weight for ({}, {}): partner is `{}`, not `{}`",
                e.ty,
                e.relation,
                net.entity_type(partner).name(),
                e.partner
            )));
        }
        w.set(net, t, r, e.weight)?;
    }
    Ok(w)
}

pub fn weight_entries(net: &HeteroNetwork, weights: &WeightMatrix) -> Vec<WeightEntry> {
    weights
        .iter()
        .map(|(t, r, w)| WeightEntry {
            ty: net.entity_type(t).name().to_string(),
            partner: net
                .entity_type(net.relation(r).partner(t).expect("weights are incident"))
                .name()
                .to_string(),
            relation: net.relation(r).name().to_string(),
            weight: w,
        })
        .collect()
}

/// Reads a standalone weights file: a JSON list of weight entries.
pub fn load_weights(path: &Path, net: &HeteroNetwork) -> Result<WeightMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let entries: Vec<WeightEntry> =
        serde_json::from_str(&text).map_err(|e| parse_err(path, e.line() as u64, e.to_string()))?;
    weights_from_entries(net, &entries).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

fn check_file_name(name: &str) -> Result<()> {
    if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
        return Err(Error::Config(format!("name `{name}` cannot be used as a file name")));
    }
    Ok(())
}

pub fn save_bundle(dir: &Path, net: &HeteroNetwork, weights: Option<&WeightMatrix>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut schema = Schema {
        types: Vec::new(),
        relations: Vec::new(),
        weights: weights.map(|w| weight_entries(net, w)),
    };
    for t in net.types() {
        check_file_name(t.name())?;
        let rel = format!("entities/{}.csv", t.name());
        let path = dir.join(&rel);
        let mut w = create(&path)?;
        write_row(&path, &mut w, ["id"])?;
        for id in t.ids() {
            write_row(&path, &mut w, [id])?;
        }
        finish(&path, w)?;
        schema.types.push(TypeEntry {
            name: t.name().to_string(),
            entities_csv: rel,
        });
    }
    for r in net.relations() {
        check_file_name(r.name())?;
        let rel = format!("relations/{}.csv", r.name());
        let path = dir.join(&rel);
        let (st, dt) = (net.entity_type(r.src()), net.entity_type(r.dst()));
        let mut w = create(&path)?;
        write_row(&path, &mut w, ["src_id", "dst_id"])?;
        for &(i, j) in r.edges() {
            write_row(&path, &mut w, [st.id(i), dt.id(j)])?;
        }
        finish(&path, w)?;
        schema.relations.push(RelationEntry {
            name: r.name().to_string(),
            src: st.name().to_string(),
            dst: dt.name().to_string(),
            edges_csv: rel,
        });
    }
    let path = dir.join(SCHEMA_FILE);
    let mut text = serde_json::to_string_pretty(&schema).expect("schema serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn check_finite<'a>(path: &Path, values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    if values.into_iter().any(|v| !v.is_finite()) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: "refusing to write non-finite values".into(),
        });
    }
    Ok(())
}

pub fn save_similarity(path: &Path, net: &HeteroNetwork, s: &SimilaritySet) -> Result<()> {
    s.check_shapes(net)?;
    for b in s.blocks() {
        check_finite(path, b.iter())?;
    }
    let mut w = create(path)?;
    write_row(path, &mut w, ["type", "row_id", "col_id", "value"])?;
    for t in net.type_ids() {
        let ty = net.entity_type(t);
        let m = s.block(t);
        for i in 0..ty.size() {
            for j in i..ty.size() {
                write_row(path, &mut w, [ty.name(), ty.id(i), ty.id(j), &format_f64(m[(i, j)])])?;
            }
        }
    }
    finish(path, w)
}

/// One type's block from a similarity file, with ids in order of first
/// appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityBlock {
    pub ty: String,
    pub ids: Vec<String>,
    pub matrix: DMatrix<f64>,
}

impl SimilarityBlock {
    /// The block reindexed to `ids`, which must be a permutation of the
    /// block's own ids.
    pub fn aligned(&self, ids: &[String]) -> Result<DMatrix<f64>> {
        let index: HashMap<&str, usize> = self.ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        if ids.len() != self.ids.len() {
            return Err(Error::Shape(format!(
                "type `{}` has {} ids in the file but {} expected",
                self.ty,
                self.ids.len(),
                ids.len()
            )));
        }
        let perm = ids
            .iter()
            .map(|id| {
                index.get(id.as_str()).copied().ok_or_else(|| Error::UnknownEntity {
                    relation: "similarity".into(),
                    ty: self.ty.clone(),
                    id: id.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let n = ids.len();
        Ok(DMatrix::from_fn(n, n, |a, b| self.matrix[(perm[a], perm[b])]))
    }
}

pub fn read_similarity_blocks(path: &Path) -> Result<Vec<SimilarityBlock>> {
    let mut rdr = open_csv(path, &["type", "row_id", "col_id", "value"])?;
    struct Acc {
        ids: Vec<String>,
        index: HashMap<String, usize>,
        entries: Vec<(usize, usize, f64, u64)>,
    }
    let mut order: Vec<String> = Vec::new();
    let mut acc: HashMap<String, Acc> = HashMap::new();
    for (line, rec) in records(path, &mut rdr, 4)? {
        let value: f64 = parse_num(path, line, &rec[3], "value")?;
        if !value.is_finite() {
            return Err(parse_err(path, line, "non-finite value"));
        }
        let ty = rec[0].to_string();
        let a = acc.entry(ty.clone()).or_insert_with(|| {
            order.push(ty.clone());
            Acc {
                ids: Vec::new(),
                index: HashMap::new(),
                entries: Vec::new(),
            }
        });
        let mut idx = |id: &str| {
            if let Some(&i) = a.index.get(id) {
                return i;
            }
            a.ids.push(id.to_string());
            a.index.insert(id.to_string(), a.ids.len() - 1);
            a.ids.len() - 1
        };
        let (i, j) = (idx(&rec[1]), idx(&rec[2]));
        a.entries.push((i, j, value, line));
    }
    let mut out = Vec::new();
    for ty in order {
        let a = acc.remove(&ty).expect("type was recorded");
        let n = a.ids.len();
        let mut m = DMatrix::from_element(n, n, f64::NAN);
        for (i, j, v, line) in a.entries {
            if !m[(i, j)].is_nan() {
                return Err(parse_err(path, line, format!("duplicate entry for type `{ty}`")));
            }
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        if m.iter().any(|v| v.is_nan()) {
            return Err(Error::Format {
                path: path.to_path_buf(),
                msg: format!("type `{ty}`: upper triangle is incomplete"),
            });
        }
        out.push(SimilarityBlock { ty, ids: a.ids, matrix: m });
    }
    Ok(out)
}

/// Loads a similarity file and aligns it to the network's index order.
pub fn load_similarity(path: &Path, net: &HeteroNetwork) -> Result<SimilaritySet> {
    let blocks = read_similarity_blocks(path)?;
    let mut by_name: BTreeMap<&str, &SimilarityBlock> = blocks.iter().map(|b| (b.ty.as_str(), b)).collect();
    let mut out = Vec::new();
    for t in net.types() {
        let b = by_name.remove(t.name()).ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            msg: format!("no block for type `{}`", t.name()),
        })?;
        out.push(b.aligned(t.ids())?);
    }
    if let Some(extra) = by_name.keys().next() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: format!("unknown type `{extra}`"),
        });
    }
    SimilaritySet::from_blocks(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FactorMeta {
    pub seed: u64,
    pub iterations: usize,
}

/// A factored similarity together with entity ids, readable without the
/// network it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorFile {
    pub meta: FactorMeta,
    pub types: Vec<(String, Vec<String>, FactoredSimilarity)>,
}

impl FactorFile {
    pub fn get(&self, ty: &str) -> Option<(&[String], &FactoredSimilarity)> {
        self.types
            .iter()
            .find(|(n, _, _)| n == ty)
            .map(|(_, ids, f)| (ids.as_slice(), f))
    }

    pub fn into_set(self, net: &HeteroNetwork) -> Result<FactoredSimilaritySet> {
        if self.types.len() != net.num_types() {
            return Err(Error::Shape("factor file does not match network types".into()));
        }
        let mut out = Vec::new();
        for ((name, ids, f), t) in self.types.into_iter().zip(net.types()) {
            if name != t.name() || ids != t.ids() {
                return Err(Error::Shape(format!("factor block `{name}` does not match type `{}`", t.name())));
            }
            out.push(f);
        }
        Ok(FactoredSimilaritySet::from_factors(out))
    }
}

pub fn save_factors(path: &Path, net: &HeteroNetwork, factors: &FactoredSimilaritySet, meta: FactorMeta) -> Result<()> {
    if factors.factors().len() != net.num_types() {
        return Err(Error::Shape("factors do not match network types".into()));
    }
    for f in factors.factors() {
        check_finite(path, f.u().iter().chain(f.d().iter()))?;
    }
    let mut w = create(path)?;
    write_row(path, &mut w, ["type", "field", "index", "col", "value"])?;
    for t in net.type_ids() {
        let ty = net.entity_type(t);
        let f = factors.factor(t);
        if f.dim() != ty.size() {
            return Err(Error::Shape(format!("factor for `{}` has wrong dimension", ty.name())));
        }
        let name = ty.name();
        write_row(path, &mut w, [name, "rank", "0", "0", &f.rank().to_string()])?;
        write_row(path, &mut w, [name, "seed", "0", "0", &meta.seed.to_string()])?;
        write_row(path, &mut w, [name, "iterations", "0", "0", &meta.iterations.to_string()])?;
        for (i, id) in ty.ids().iter().enumerate() {
            write_row(path, &mut w, [name, "id", &i.to_string(), "0", id])?;
        }
        for (k, v) in f.d().iter().enumerate() {
            write_row(path, &mut w, [name, "d", &k.to_string(), "0", &format_f64(*v)])?;
        }
        for i in 0..f.dim() {
            for k in 0..f.rank() {
                write_row(path, &mut w, [name, "u", &i.to_string(), &k.to_string(), &format_f64(f.u()[(i, k)])])?;
            }
        }
    }
    finish(path, w)
}

pub fn load_factors(path: &Path) -> Result<FactorFile> {
    #[derive(Default)]
    struct Acc {
        rank: Option<usize>,
        ids: BTreeMap<usize, String>,
        d: BTreeMap<usize, f64>,
        u: BTreeMap<(usize, usize), f64>,
    }
    let mut rdr = open_csv(path, &["type", "field", "index", "col", "value"])?;
    let mut order = Vec::new();
    let mut acc: HashMap<String, Acc> = HashMap::new();
    let mut seed = None;
    let mut iterations = None;
    for (line, rec) in records(path, &mut rdr, 5)? {
        let ty = rec[0].to_string();
        if !acc.contains_key(&ty) {
            order.push(ty.clone());
        }
        let a = acc.entry(ty).or_default();
        let index: usize = parse_num(path, line, &rec[2], "index")?;
        let col: usize = parse_num(path, line, &rec[3], "col")?;
        let value = &rec[4];
        let dup = |path: &Path| parse_err(path, line, "duplicate entry");
        match &rec[1] {
            "rank" => a.rank = Some(parse_num(path, line, value, "rank")?),
            "seed" => seed = Some(parse_num(path, line, value, "seed")?),
            "iterations" => iterations = Some(parse_num(path, line, value, "iteration count")?),
            "id" => {
                if a.ids.insert(index, value.to_string()).is_some() {
                    return Err(dup(path));
                }
            }
            "d" => {
                if a.d.insert(index, parse_num(path, line, value, "value")?).is_some() {
                    return Err(dup(path));
                }
            }
            "u" => {
                if a.u.insert((index, col), parse_num(path, line, value, "value")?).is_some() {
                    return Err(dup(path));
                }
            }
            other => return Err(parse_err(path, line, format!("unknown field `{other}`"))),
        }
    }
    let bad = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };
    let mut types = Vec::new();
    for ty in order {
        let a = acc.remove(&ty).expect("type was recorded");
        let rank = a.rank.ok_or_else(|| bad(format!("type `{ty}` has no rank")))?;
        let n = a.ids.len();
        if a.ids.keys().copied().ne(0..n) {
            return Err(bad(format!("type `{ty}`: id indices are not 0..{n}")));
        }
        if a.d.keys().copied().ne(0..rank) || a.u.len() != n * rank {
            return Err(bad(format!("type `{ty}`: factor entries do not match rank {rank}")));
        }
        let mut u = DMatrix::zeros(n, rank);
        for (&(i, k), &v) in &a.u {
            if i >= n || k >= rank {
                return Err(bad(format!("type `{ty}`: entry ({i}, {k}) out of range")));
            }
            u[(i, k)] = v;
        }
        let d = DVector::from_iterator(rank, a.d.values().copied());
        let f = FactoredSimilarity::new(u, d).map_err(|e| bad(e.to_string()))?;
        types.push((ty, a.ids.into_values().collect(), f));
    }
    Ok(FactorFile {
        meta: FactorMeta {
            seed: seed.unwrap_or(0),
            iterations: iterations.unwrap_or(0),
        },
        types,
    })
}

pub fn save_trace(path: &Path, trace: &SolveTrace) -> Result<()> {
    let mut w = create(path)?;
    write_row(path, &mut w, ["iteration", "residual", "seconds"])?;
    for e in &trace.entries {
        write_row(
            path,
            &mut w,
            [
                e.iteration.to_string(),
                format_f64(e.residual),
                format!("{:.6}", e.elapsed.as_secs_f64()),
            ],
        )?;
    }
    finish(path, w)
}

pub fn save_points(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut w = create(path)?;
    write_row(path, &mut w, ["layer", "x", "y"])?;
    for (k, layer) in cloud.layers.iter().enumerate() {
        for p in layer {
            write_row(path, &mut w, [k.to_string(), format_f64(p[0]), format_f64(p[1])])?;
        }
    }
    finish(path, w)
}

/// Points must be grouped by layer; layers are numbered from 0 without gaps.
pub fn load_points(path: &Path) -> Result<PointCloud> {
    let mut rdr = open_csv(path, &["layer", "x", "y"])?;
    let mut layers: Vec<Vec<[f64; 2]>> = Vec::new();
    for (line, rec) in records(path, &mut rdr, 3)? {
        let k: usize = parse_num(path, line, &rec[0], "layer")?;
        let x: f64 = parse_num(path, line, &rec[1], "coordinate")?;
        let y: f64 = parse_num(path, line, &rec[2], "coordinate")?;
        if !x.is_finite() || !y.is_finite() {
            return Err(parse_err(path, line, "non-finite coordinate"));
        }
        if k == layers.len() {
            layers.push(Vec::new());
        } else if k + 1 != layers.len() {
            return Err(parse_err(path, line, format!("layer {k} out of order")));
        }
        layers[k].push([x, y]);
    }
    if layers.is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: "no points".into(),
        });
    }
    Ok(PointCloud { layers })
}

/// Linear ramp from white at the minimum to dark blue (8, 48, 107) at the
/// maximum. A constant matrix maps to the dark end.
pub fn heatmap_color(value: f64, min: f64, max: f64) -> (u8, u8, u8) {
    let x = if max > min { ((value - min) / (max - min)).clamp(0.0, 1.0) } else { 1.0 };
    let lerp = |a: f64, b: f64| (a + (b - a) * x).round() as u8;
    (lerp(255.0, 8.0), lerp(255.0, 48.0), lerp(255.0, 107.0))
}

pub const HEATMAP_CELL: usize = 8;

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// SVG with one square per entry; row `i`, column `j` sits at
/// `(j, i) * HEATMAP_CELL`. Each cell carries its ids and value as a tooltip.
pub fn heatmap_svg(matrix: &DMatrix<f64>, ids: &[String], title: &str) -> Result<String> {
    if !matrix.is_square() || matrix.nrows() != ids.len() {
        return Err(Error::Shape(format!(
            "heatmap needs a square matrix matching {} ids, got {:?}",
            ids.len(),
            matrix.shape()
        )));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("heatmap needs finite entries".into()));
    }
    let n = matrix.nrows();
    let (min, max) = matrix
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let size = n * HEATMAP_CELL;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\" shape-rendering=\"crispEdges\">\n"
    ));
    out.push_str(&format!(
        "<title>{} (min {}, max {})</title>\n",
        xml_escape(title),
        format_f64(min),
        format_f64(max)
    ));
    for i in 0..n {
        for j in 0..n {
            let (r, g, b) = heatmap_color(matrix[(i, j)], min, max);
            out.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{HEATMAP_CELL}\" height=\"{HEATMAP_CELL}\" fill=\"#{r:02x}{g:02x}{b:02x}\"><title>{} / {}: {}</title></rect>\n",
                j * HEATMAP_CELL,
                i * HEATMAP_CELL,
                xml_escape(&ids[i]),
                xml_escape(&ids[j]),
                format_f64(matrix[(i, j)])
            ));
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn export_heatmap(path: &Path, matrix: &DMatrix<f64>, ids: &[String], title: &str) -> Result<()> {
    let svg = heatmap_svg(matrix, ids, title)?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(svg.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Path of a type's entity file inside a bundle written by [`save_bundle`].
pub fn entities_path(dir: &Path, ty: &str) -> PathBuf {
    dir.join("entities").join(format!("{ty}.csv"))
}

/// Path of a relation's edge file inside a bundle written by [`save_bundle`].
pub fn edges_path(dir: &Path, relation: &str) -> PathBuf {
    dir.join("relations").join(format!("{relation}.csv"))
}

/// Type lookup by name with an error naming the available types.
pub fn type_named(net: &HeteroNetwork, name: &str) -> Result<TypeId> {
    net.type_by_name(name).ok_or_else(|| {
        let names: Vec<_> = net.types().iter().map(|t| t.name()).collect();
        Error::Config(format!("unknown type `{name}` (types: {})", names.join(", ")))
    })
}
