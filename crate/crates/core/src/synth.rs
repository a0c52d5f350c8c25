//! Synthetic networks: random fully-coupled networks for convergence tests,
//! layered geometric graphs for similarity reconstruction, and a
//! catalog-shaped network (books, authors, years, publishers) for scale runs.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{HeteroNetwork, NetworkBuilder, TypeId};
use crate::rng::{rng_for, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomNetworkSpec {
    /// Number of types.
    pub classes: usize,
    /// Upper bound on type size; sizes are uniform on [ceil(N/2), N].
    pub max_size: usize,
    pub seed: u64,
}

impl RandomNetworkSpec {
    fn min_size(&self) -> usize {
        self.max_size.div_ceil(2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::Config(format!(
                "need at least 2 classes, got {}",
                self.classes
            )));
        }
        if self.max_size < 2 {
            return Err(Error::Config(format!(
                "size bound must be >= 2, got {}",
                self.max_size
            )));
        }
        // Two types of size 1 would need 2 distinct edges in a 1x1 grid.
        if self.min_size() < 2 {
            return Err(Error::Config(format!(
                "size bound {} admits two single-entity types, which cannot hold 2*min(|t_i|, |t_j|) = 2 distinct edges (pigeonhole)",
                self.max_size
            )));
        }
        Ok(())
    }
}

/// Every pair of types is linked by one relation carrying exactly
/// `2 * min(|t_i|, |t_j|)` distinct edges drawn uniformly without replacement.
pub fn random_network(spec: &RandomNetworkSpec) -> Result<HeteroNetwork> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed, &[stream::RANDOM_NETWORK]);
    let sizes: Vec<usize> = (0..spec.classes)
        .map(|_| rng.random_range(spec.min_size()..=spec.max_size))
        .collect();
    let mut b = NetworkBuilder::new();
    for (i, &n) in sizes.iter().enumerate() {
        b.add_type(&format!("T{i}"), (0..n).map(|e| format!("T{i}_{e}")))?;
    }
    for i in 0..spec.classes {
        for j in i + 1..spec.classes {
            let (ni, nj) = (sizes[i], sizes[j]);
            let m = 2 * ni.min(nj);
            if m > ni * nj {
                return Err(Error::Config(format!(
                    "cannot place {m} distinct edges between types of sizes {ni} and {nj}"
                )));
            }
            let edges = sample(&mut rng, ni * nj, m)
                .into_iter()
                .map(|k| (k / nj, k % nj))
                .collect();
            b.add_relation_indexed(&format!("R{i}_{j}"), TypeId(i), TypeId(j), edges)?;
        }
    }
    Ok(b.build())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredGraphSpec {
    /// Points per layer; the number of layers is `counts.len()`.
    pub counts: Vec<usize>,
    pub radius: f64,
    pub seed: u64,
}

impl LayeredGraphSpec {
    pub fn validate(&self) -> Result<()> {
        if self.counts.len() < 2 {
            return Err(Error::Config("need at least 2 layers".into()));
        }
        if self.counts.contains(&0) {
            return Err(Error::Config("every layer needs at least one point".into()));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::Config(format!("radius must be > 0, got {}", self.radius)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub layers: Vec<Vec<[f64; 2]>>,
}

pub fn layer_type_name(k: usize) -> String {
    format!("layer{k}")
}

fn distance(p: [f64; 2], q: [f64; 2]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Uniform bucket grid over the unit square with cell side >= radius, so
/// all neighbours within the radius sit in the 3x3 block around a cell.
struct Grid {
    cells: usize,
    buckets: Vec<Vec<usize>>,
}

impl Grid {
    fn new(points: &[[f64; 2]], radius: f64) -> Self {
        let cells = ((1.0 / radius).floor() as usize).clamp(1, 1024);
        let mut buckets = vec![Vec::new(); cells * cells];
        for (i, &p) in points.iter().enumerate() {
            let (cx, cy) = Self::cell_of(cells, p);
            buckets[cy * cells + cx].push(i);
        }
        Grid { cells, buckets }
    }

    fn cell_of(cells: usize, p: [f64; 2]) -> (usize, usize) {
        let f = |v: f64| ((v * cells as f64) as usize).min(cells - 1);
        (f(p[0]), f(p[1]))
    }

    fn candidates(&self, p: [f64; 2]) -> impl Iterator<Item = usize> + '_ {
        let (cx, cy) = Self::cell_of(self.cells, p);
        let lo = |c: usize| c.saturating_sub(1);
        let hi = |c: usize| (c + 1).min(self.cells - 1);
        (lo(cy)..=hi(cy)).flat_map(move |y| {
            (lo(cx)..=hi(cx)).flat_map(move |x| self.buckets[y * self.cells + x].iter().copied())
        })
    }
}

/// Connects point i of layer k to point j of layer k-1 when their distance
/// is strictly below `radius`. Relation `near{k}` runs from layer k to k-1.
pub fn layered_graph_from_points(points: &PointCloud, radius: f64) -> Result<HeteroNetwork> {
    let mut b = NetworkBuilder::new();
    for (k, layer) in points.layers.iter().enumerate() {
        b.add_type(&layer_type_name(k), (0..layer.len()).map(|i| format!("p{i}")))?;
    }
    for k in 1..points.layers.len() {
        let (upper, lower) = (&points.layers[k], &points.layers[k - 1]);
        let grid = Grid::new(lower, radius);
        let mut edges = Vec::new();
        for (i, &p) in upper.iter().enumerate() {
            for j in grid.candidates(p) {
                if distance(p, lower[j]) < radius {
                    edges.push((i, j));
                }
            }
        }
        edges.sort_unstable();
        b.add_relation_indexed(&format!("near{k}"), TypeId(k), TypeId(k - 1), edges)?;
    }
    Ok(b.build())
}

pub fn layered_points_graph(spec: &LayeredGraphSpec) -> Result<(HeteroNetwork, PointCloud)> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed, &[stream::LAYERED]);
    let layers = spec
        .counts
        .iter()
        .map(|&n| (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect())
        .collect();
    let cloud = PointCloud { layers };
    let net = layered_graph_from_points(&cloud, spec.radius)?;
    Ok((net, cloud))
}

/// Negative Euclidean distance between the points of one layer. Only the
/// per-row ordering matters downstream.
pub fn geometric_ground_truth(points: &[[f64; 2]]) -> Result<DMatrix<f64>> {
    if points.len() < 2 {
        return Err(Error::Config("ground truth needs at least 2 points".into()));
    }
    let n = points.len();
    Ok(DMatrix::from_fn(n, n, |a, b| -distance(points[a], points[b])))
}

/// A catalog with the shape of a book-crossing extract: every book has one
/// author, one publisher and one year. Authors favour two publishers and a
/// ten-year window, which gives the similarity something to find.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogSpec {
    pub books: usize,
    pub authors: usize,
    pub years: usize,
    pub publishers: usize,
    pub seed: u64,
}

impl Default for CatalogSpec {
    fn default() -> Self {
        CatalogSpec {
            books: 3625,
            authors: 99,
            years: 65,
            publishers: 554,
            seed: 0,
        }
    }
}

pub fn catalog_network(spec: &CatalogSpec) -> Result<HeteroNetwork> {
    let largest = spec.authors.max(spec.years).max(spec.publishers);
    if spec.books < largest || spec.authors == 0 || spec.years == 0 || spec.publishers == 0 {
        return Err(Error::Config(
            "catalog needs at least one entity of each type and at least as many books as authors, years or publishers".into(),
        ));
    }
    const WINDOW: usize = 10;
    let mut rng = rng_for(spec.seed, &[stream::CATALOG]);
    let home_publishers: Vec<[usize; 2]> = (0..spec.authors)
        .map(|_| {
            [
                rng.random_range(0..spec.publishers),
                rng.random_range(0..spec.publishers),
            ]
        })
        .collect();
    let window = WINDOW.min(spec.years);
    let first_year: Vec<usize> = (0..spec.authors)
        .map(|_| rng.random_range(0..=spec.years - window))
        .collect();

    let mut authored = Vec::with_capacity(spec.books);
    let mut published_by = Vec::with_capacity(spec.books);
    let mut published_in = Vec::with_capacity(spec.books);
    for book in 0..spec.books {
        let author = if book < spec.authors {
            book
        } else {
            rng.random_range(0..spec.authors)
        };
        // the first books cover every publisher and year once, so no
        // entity is isolated
        let publisher = if book < spec.publishers {
            book
        } else if rng.random_bool(0.8) {
            home_publishers[author][rng.random_range(0..2)]
        } else {
            rng.random_range(0..spec.publishers)
        };
        let year = if book < spec.years {
            book
        } else if rng.random_bool(0.9) {
            first_year[author] + rng.random_range(0..window)
        } else {
            rng.random_range(0..spec.years)
        };
        authored.push((author, book));
        published_by.push((book, publisher));
        published_in.push((book, year));
    }

    let mut b = NetworkBuilder::new();
    let book = b.add_type("Book", (0..spec.books).map(|i| format!("book{i}")))?;
    let author = b.add_type("Author", (0..spec.authors).map(|i| format!("author{i}")))?;
    let year = b.add_type("Year", (0..spec.years).map(|i| format!("{}", 1950 + i)))?;
    let publisher = b.add_type("Publisher", (0..spec.publishers).map(|i| format!("publisher{i}")))?;
    b.add_relation_indexed("isAuthorOf", author, book, authored)?;
    b.add_relation_indexed("publishedBy", book, publisher, published_by)?;
    b.add_relation_indexed("publishedIn", book, year, published_in)?;
    Ok(b.build())
}
