use std::fs;
use std::path::{Path, PathBuf};

use hetsim_core::io::{self, FactorMeta};
use hetsim_core::lowrank::rank_neighbors;
use hetsim_core::nalgebra::DMatrix;
use hetsim_core::rng::derive_seed;
use hetsim_core::synth::{
    catalog_network, geometric_ground_truth, layer_type_name, layered_points_graph, random_network, CatalogSpec,
    LayeredGraphSpec, RandomNetworkSpec,
};
use hetsim_core::{
    check_convergence_conditions, ordering_quality, HeteroNetwork, Outcome, Ranks, Registry, Similarity, SolveOptions,
    SolverConfig, SvdConfig, TypeId, WeightMatrix,
};
use serde::Deserialize;

use crate::args::{
    CheckArgs, EvalQArgs, HeatmapArgs, QueryArgs, SolveArgs, SolverFlags, SolverKind, SynthKind,
};
use crate::error::{config, CliError, Result};

/// The command line that reproduces a run, with every default spelled out.
pub struct Effective(Vec<String>);

impl Effective {
    pub fn new(threads: usize, seed: u64) -> Self {
        Effective(vec![
            "hetsim".into(),
            "--threads".into(),
            threads.to_string(),
            "--seed".into(),
            seed.to_string(),
        ])
    }

    pub fn word(&mut self, w: &str) -> &mut Self {
        self.0.push(w.into());
        self
    }

    pub fn flag(&mut self, name: &str, value: impl ToString) -> &mut Self {
        self.0.push(format!("--{name}"));
        self.0.push(value.to_string());
        self
    }

    pub fn path(&mut self, name: &str, p: &Path) -> &mut Self {
        self.flag(name, p.display())
    }

    pub fn switch(&mut self, name: &str, on: bool) -> &mut Self {
        if on {
            self.0.push(format!("--{name}"));
        }
        self
    }

    pub fn render(&self) -> String {
        self.0
            .iter()
            .map(|w| {
                if w.is_empty() || w.contains(|c: char| c.is_whitespace() || c == '\'' || c == '"') {
                    format!("'{}'", w.replace('\'', "'\\''"))
                } else {
                    w.clone()
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn announce(eff: &Effective) {
    eprintln!("effective config: {}", eff.render());
}

#[derive(Debug, Clone, PartialEq)]
enum RankSpec {
    Full,
    Uniform(usize),
    Named(Vec<(String, usize)>),
}

impl RankSpec {
    fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "full" {
            return Ok(RankSpec::Full);
        }
        if let Ok(k) = s.parse::<usize>() {
            return Ok(RankSpec::Uniform(k));
        }
        let mut named = Vec::new();
        for part in s.split(',') {
            let (ty, k) = part
                .split_once('=')
                .ok_or_else(|| config(format!("bad --ranks `{s}`: expected `full`, an integer, or `Type=k,...`")))?;
            let k = k
                .trim()
                .parse()
                .map_err(|_| config(format!("bad rank `{k}` for type `{ty}`")))?;
            named.push((ty.trim().to_string(), k));
        }
        Ok(RankSpec::Named(named))
    }

    fn resolve(&self, net: &HeteroNetwork) -> Result<Ranks> {
        Ok(match self {
            RankSpec::Full => Ranks::Full,
            RankSpec::Uniform(k) => Ranks::Uniform(*k),
            RankSpec::Named(named) => {
                let mut ks = vec![None; net.num_types()];
                for (ty, k) in named {
                    let t = io::type_named(net, ty)?;
                    if ks[t.0].replace(*k).is_some() {
                        return Err(config(format!("rank for type `{ty}` given twice")));
                    }
                }
                let ks = ks
                    .into_iter()
                    .enumerate()
                    .map(|(t, k)| {
                        k.ok_or_else(|| {
                            config(format!("no rank for type `{}`", net.entity_type(TypeId(t)).name()))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ranks::PerType(ks)
            }
        })
    }
}

fn ranks_text(flags: &SolverFlags) -> String {
    flags.ranks.clone().unwrap_or_else(|| "20".into())
}

fn check_solver_flags(flags: &SolverFlags) -> Result<Option<RankSpec>> {
    match (flags.solver, &flags.ranks) {
        (SolverKind::Lowrank, r) => Ok(Some(RankSpec::parse(r.as_deref().unwrap_or("20"))?)),
        (other, Some(_)) => Err(config(format!("--ranks only applies to the lowrank solver, not {}", other.name()))),
        (_, None) => Ok(None),
    }
}

fn solve_options(flags: &SolverFlags, ranks: Option<&RankSpec>, net: &HeteroNetwork, seed: u64) -> Result<SolveOptions> {
    let solver = SolverConfig {
        tol: flags.tol,
        max_iter: flags.max_iter,
        damping: flags.c,
        enforce_conditions: !flags.skip_checks,
    };
    solver.validate()?;
    let mut svd = SvdConfig {
        oversampling: flags.oversampling,
        power_iters: flags.power_iters,
        seed,
        ..SvdConfig::default()
    };
    if let Some(r) = ranks {
        svd.ranks = r.resolve(net)?;
        svd.ranks.resolve(net)?;
    }
    Ok(SolveOptions { solver, svd })
}

fn solver_words(eff: &mut Effective, flags: &SolverFlags) {
    eff.flag("solver", flags.solver.name())
        .flag("tol", flags.tol)
        .flag("max-iter", flags.max_iter)
        .flag("c", flags.c);
    if flags.solver == SolverKind::Lowrank {
        eff.flag("ranks", ranks_text(flags))
            .flag("oversampling", flags.oversampling)
            .flag("power-iters", flags.power_iters);
    }
    eff.switch("skip-checks", flags.skip_checks);
}

fn run_solver(net: &HeteroNetwork, weights: &WeightMatrix, kind: SolverKind, opts: &SolveOptions) -> Result<Outcome> {
    let registry = Registry::default();
    Ok(registry.get(kind.name())?.solve(net, weights, opts)?)
}

pub fn solve(mut eff: Effective, seed: u64, a: &SolveArgs) -> Result<()> {
    let ranks = check_solver_flags(&a.solver)?;
    if a.dense_output && a.solver.solver != SolverKind::Lowrank {
        return Err(config("--dense-output only applies to the lowrank solver"));
    }
    eff.word("solve").path("bundle", &a.bundle);
    if let Some(w) = &a.weights {
        eff.path("weights", w);
    }
    solver_words(&mut eff, &a.solver);
    eff.path("out", &a.out).switch("dense-output", a.dense_output);
    announce(&eff);

    let bundle = io::load_bundle(&a.bundle)?;
    let net = bundle.network;
    let weights = match &a.weights {
        Some(p) => io::load_weights(p, &net)?,
        None => bundle.weights,
    };
    let opts = solve_options(&a.solver, ranks.as_ref(), &net, seed)?;
    let outcome = run_solver(&net, &weights, a.solver.solver, &opts)?;
    for e in &outcome.trace.entries {
        eprintln!("iteration {} residual {:.6e}", e.iteration, e.residual);
    }

    fs::create_dir_all(&a.out).map_err(|e| hetsim_core::Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    io::save_trace(&a.out.join("trace.csv"), &outcome.trace)?;
    match &outcome.similarity {
        Similarity::Dense(s) => io::save_similarity(&a.out.join("similarity.csv"), &net, s)?,
        Similarity::Factored(f) => {
            let meta = FactorMeta {
                seed,
                iterations: outcome.trace.len(),
            };
            io::save_factors(&a.out.join("factors.csv"), &net, f, meta)?;
            if a.dense_output {
                io::save_similarity(&a.out.join("similarity.csv"), &net, &f.to_dense())?;
            }
        }
    }
    if !outcome.converged {
        return Err(CliError::NotConverged(format!(
            "no convergence after {} iterations: residual {:.6e} > tol {:e}",
            outcome.trace.len(),
            outcome.trace.last_residual().unwrap_or(f64::NAN),
            a.solver.tol
        )));
    }
    eprintln!("converged after {} iterations", outcome.trace.len());
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum SynthFile {
    Random {
        classes: usize,
        max_size: usize,
        seed: Option<u64>,
    },
    Layered {
        counts: Vec<usize>,
        radius: f64,
        seed: Option<u64>,
    },
    Catalog {
        books: Option<usize>,
        authors: Option<usize>,
        years: Option<usize>,
        publishers: Option<usize>,
        seed: Option<u64>,
    },
}

enum SynthPlan {
    Random(RandomNetworkSpec),
    Layered(LayeredGraphSpec),
    Catalog(CatalogSpec),
}

fn plan_from_file(path: &Path, seed: u64) -> Result<SynthPlan> {
    let text = fs::read_to_string(path).map_err(|e| hetsim_core::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let file: SynthFile = toml::from_str(&text).map_err(|e| hetsim_core::Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    Ok(match file {
        SynthFile::Random { classes, max_size, seed: s } => SynthPlan::Random(RandomNetworkSpec {
            classes,
            max_size,
            seed: s.unwrap_or(seed),
        }),
        SynthFile::Layered { counts, radius, seed: s } => SynthPlan::Layered(LayeredGraphSpec {
            counts,
            radius,
            seed: s.unwrap_or(seed),
        }),
        SynthFile::Catalog {
            books,
            authors,
            years,
            publishers,
            seed: s,
        } => {
            let d = CatalogSpec::default();
            SynthPlan::Catalog(CatalogSpec {
                books: books.unwrap_or(d.books),
                authors: authors.unwrap_or(d.authors),
                years: years.unwrap_or(d.years),
                publishers: publishers.unwrap_or(d.publishers),
                seed: s.unwrap_or(seed),
            })
        }
    })
}

fn layer_counts(layers: usize, counts: &[usize]) -> Result<Vec<usize>> {
    match counts {
        [n] => Ok(vec![*n; layers]),
        _ if counts.len() == layers => Ok(counts.to_vec()),
        _ => Err(config(format!("--counts has {} values for {layers} layers", counts.len()))),
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

pub fn synth(mut eff: Effective, seed: u64, kind: &SynthKind) -> Result<()> {
    eff.word("synth");
    let (plan, out): (SynthPlan, &PathBuf) = match kind {
        SynthKind::Random { k, n, out } => {
            eff.word("random").flag("K", k).flag("N", n);
            (
                SynthPlan::Random(RandomNetworkSpec {
                    classes: *k,
                    max_size: *n,
                    seed,
                }),
                out,
            )
        }
        SynthKind::Layered { layers, counts, r, out } => {
            let counts = layer_counts(*layers, counts)?;
            eff.word("layered").flag("layers", layers).flag("counts", join(&counts)).flag("r", r);
            (
                SynthPlan::Layered(LayeredGraphSpec {
                    counts,
                    radius: *r,
                    seed,
                }),
                out,
            )
        }
        SynthKind::Catalog {
            books,
            authors,
            years,
            publishers,
            out,
        } => {
            eff.word("catalog")
                .flag("books", books)
                .flag("authors", authors)
                .flag("years", years)
                .flag("publishers", publishers);
            (
                SynthPlan::Catalog(CatalogSpec {
                    books: *books,
                    authors: *authors,
                    years: *years,
                    publishers: *publishers,
                    seed,
                }),
                out,
            )
        }
        SynthKind::FromFile { config: path, out } => {
            eff.word("from-file").word(&path.display().to_string());
            (plan_from_file(path, seed)?, out)
        }
    };
    eff.path("out", out);
    announce(&eff);

    let net = match plan {
        SynthPlan::Random(spec) => random_network(&spec)?,
        SynthPlan::Layered(spec) => {
            let (net, cloud) = layered_points_graph(&spec)?;
            io::save_points(&out.join("points.csv"), &cloud)?;
            net
        }
        SynthPlan::Catalog(spec) => catalog_network(&spec)?,
    };
    io::save_bundle(out, &net, None)?;
    let sizes: Vec<String> = net
        .types()
        .iter()
        .map(|t| format!("{}={}", t.name(), t.size()))
        .collect();
    let edges: usize = net.relations().iter().map(|r| r.edges().len()).sum();
    eprintln!("wrote {} ({}; {} relations, {edges} edges)", out.display(), sizes.join(" "), net.relations().len());
    Ok(())
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || config(format!("bad --sweep `{s}`: expected r0:r1:step"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [r0, r1, step] = parts[..] else {
        return Err(bad());
    };
    if !(r0 > 0.0 && r1 >= r0 && step > 0.0) || !r1.is_finite() {
        return Err(config(format!("--sweep needs 0 < r0 <= r1 and step > 0, got `{s}`")));
    }
    let n = ((r1 - r0) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| r0 + i as f64 * step).collect())
}

fn block_by_name<'a>(blocks: &'a [io::SimilarityBlock], ty: &str, path: &Path) -> Result<&'a io::SimilarityBlock> {
    blocks.iter().find(|b| b.ty == ty).ok_or_else(|| {
        config(format!(
            "{}: no block for type `{ty}` (types: {})",
            path.display(),
            blocks.iter().map(|b| b.ty.as_str()).collect::<Vec<_>>().join(", ")
        ))
    })
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn eval_q(mut eff: Effective, seed: u64, a: &EvalQArgs) -> Result<()> {
    eff.word("eval-q");
    if let Some(sweep) = &a.sweep {
        return eval_sweep(eff, seed, a, sweep);
    }
    let estimate_path = a
        .estimate
        .as_ref()
        .ok_or_else(|| config("--estimate is required unless --sweep is given"))?;
    let (truth, ids, ty) = match (&a.points, &a.truth) {
        (Some(points), None) => {
            let ty = a.ty.clone().unwrap_or_else(|| layer_type_name(a.layer));
            eff.path("points", points).flag("layer", a.layer).flag("type", &ty);
            announce(&eff);
            let cloud = io::load_points(points)?;
            let layer = cloud
                .layers
                .get(a.layer)
                .ok_or_else(|| config(format!("layer {} not in {}", a.layer, points.display())))?;
            let ids: Vec<String> = (0..layer.len()).map(|i| format!("p{i}")).collect();
            (geometric_ground_truth(layer)?, ids, ty)
        }
        (None, Some(truth)) => {
            let blocks = io::read_similarity_blocks(truth)?;
            let ty = match &a.ty {
                Some(t) => t.clone(),
                None => blocks
                    .first()
                    .map(|b| b.ty.clone())
                    .ok_or_else(|| config(format!("{} holds no blocks", truth.display())))?,
            };
            eff.path("truth", truth).flag("type", &ty);
            announce(&eff);
            let b = block_by_name(&blocks, &ty, truth)?;
            (b.matrix.clone(), b.ids.clone(), ty)
        }
        _ => return Err(config("give exactly one of --points or --truth, or --sweep")),
    };
    let blocks = io::read_similarity_blocks(estimate_path)?;
    let estimate = block_by_name(&blocks, &ty, estimate_path)?.aligned(&ids)?;
    println!("{}", ordering_quality(&truth, &estimate)?);
    Ok(())
}

fn eval_sweep(mut eff: Effective, seed: u64, a: &EvalQArgs, sweep: &str) -> Result<()> {
    let grid = parse_grid(sweep)?;
    if a.trials == 0 {
        return Err(config("--trials must be >= 1"));
    }
    let ranks = check_solver_flags(&a.solver)?;
    if a.layer >= a.counts.len() {
        return Err(config(format!("--layer {} but only {} layers", a.layer, a.counts.len())));
    }
    let flags = &a.solver;
    eff.flag("sweep", sweep)
        .flag("trials", a.trials)
        .flag("counts", join(&a.counts))
        .flag("layer", a.layer);
    solver_words(&mut eff, flags);
    if let Some(p) = &a.per_trial {
        eff.path("per-trial", p);
    }
    announce(&eff);

    let mut per_trial = Vec::new();
    let mut not_converged = 0usize;
    println!("r,trials,mean_q,std_q");
    for &r in &grid {
        let mut qs = Vec::with_capacity(a.trials);
        for trial in 0..a.trials {
            // The same point clouds are reused at every radius.
            let spec = LayeredGraphSpec {
                counts: a.counts.clone(),
                radius: r,
                seed: derive_seed(seed, &[trial as u64]),
            };
            let (net, cloud) = layered_points_graph(&spec)?;
            let weights = hetsim_core::default_weights(&net);
            let opts = solve_options(flags, ranks.as_ref(), &net, seed)?;
            let outcome = run_solver(&net, &weights, flags.solver, &opts)?;
            not_converged += usize::from(!outcome.converged);
            let s = outcome.similarity.to_dense();
            let truth = geometric_ground_truth(&cloud.layers[a.layer])?;
            let q = ordering_quality(&truth, s.block(TypeId(a.layer)))?;
            per_trial.push((r, trial, q));
            qs.push(q);
        }
        let mean = qs.iter().sum::<f64>() / qs.len() as f64;
        println!("{r},{},{mean},{}", qs.len(), sample_std(&qs));
    }
    if not_converged > 0 {
        eprintln!(
            "note: {not_converged} of {} runs stopped at --max-iter before reaching --tol",
            grid.len() * a.trials
        );
    }
    if let Some(path) = &a.per_trial {
        let mut text = String::from("r,trial,q\n");
        for (r, t, q) in per_trial {
            text.push_str(&format!("{r},{t},{q}\n"));
        }
        fs::write(path, text).map_err(|e| hetsim_core::Error::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    Ok(())
}

pub fn query(mut eff: Effective, a: &QueryArgs) -> Result<()> {
    eff.word("query");
    match (&a.similarity, &a.factors) {
        (Some(p), _) => eff.path("similarity", p),
        (_, Some(p)) => eff.path("factors", p),
        _ => return Err(config("give --similarity or --factors")),
    };
    eff.flag("type", &a.ty).flag("id", &a.id).flag("k", a.k);
    announce(&eff);

    let (ids, scores) = if let Some(p) = &a.similarity {
        let blocks = io::read_similarity_blocks(p)?;
        let b = block_by_name(&blocks, &a.ty, p)?;
        let i = index_of(&b.ids, &a.id, &a.ty)?;
        (b.ids.clone(), b.matrix.row(i).iter().copied().collect::<Vec<_>>())
    } else {
        let p = a.factors.as_ref().expect("checked above");
        let file = io::load_factors(p)?;
        let (ids, f) = file
            .get(&a.ty)
            .ok_or_else(|| config(format!("{}: no factors for type `{}`", p.display(), a.ty)))?;
        let i = index_of(ids, &a.id, &a.ty)?;
        (ids.to_vec(), f.row(i)?.iter().copied().collect())
    };
    let i = index_of(&ids, &a.id, &a.ty)?;
    println!("rank,id,score");
    for (rank, (j, score)) in rank_neighbors(&scores, i, a.k)?.into_iter().enumerate() {
        println!("{},{},{}", rank + 1, ids[j], score);
    }
    Ok(())
}

fn index_of(ids: &[String], id: &str, ty: &str) -> Result<usize> {
    ids.iter()
        .position(|x| x == id)
        .ok_or_else(|| config(format!("unknown id `{id}` for type `{ty}`")))
}

pub fn heatmap(mut eff: Effective, a: &HeatmapArgs) -> Result<()> {
    eff.word("heatmap");
    match (&a.similarity, &a.factors) {
        (Some(p), _) => eff.path("similarity", p),
        (_, Some(p)) => eff.path("factors", p),
        _ => return Err(config("give --similarity or --factors")),
    };
    eff.flag("type", &a.ty);
    if let Some(b) = &a.bundle {
        eff.path("bundle", b);
    }
    eff.path("out", &a.out);
    announce(&eff);

    let (ids, matrix): (Vec<String>, DMatrix<f64>) = if let Some(p) = &a.similarity {
        let blocks = io::read_similarity_blocks(p)?;
        let b = block_by_name(&blocks, &a.ty, p)?;
        match &a.bundle {
            Some(dir) => {
                let net = io::load_network(dir)?;
                let t = io::type_named(&net, &a.ty)?;
                let ids = net.entity_type(t).ids().to_vec();
                let m = b.aligned(&ids)?;
                (ids, m)
            }
            None => (b.ids.clone(), b.matrix.clone()),
        }
    } else {
        let p = a.factors.as_ref().expect("checked above");
        let file = io::load_factors(p)?;
        let (ids, f) = file
            .get(&a.ty)
            .ok_or_else(|| config(format!("{}: no factors for type `{}`", p.display(), a.ty)))?;
        let block = io::SimilarityBlock {
            ty: a.ty.clone(),
            ids: ids.to_vec(),
            matrix: f.to_dense(),
        };
        match &a.bundle {
            Some(dir) => {
                let net = io::load_network(dir)?;
                let t = io::type_named(&net, &a.ty)?;
                let ids = net.entity_type(t).ids().to_vec();
                let m = block.aligned(&ids)?;
                (ids, m)
            }
            None => (block.ids, block.matrix),
        }
    };
    io::export_heatmap(&a.out, &matrix, &ids, &a.ty)?;
    eprintln!("wrote {} ({}x{})", a.out.display(), matrix.nrows(), matrix.ncols());
    Ok(())
}

pub fn check(mut eff: Effective, a: &CheckArgs) -> Result<()> {
    eff.word("check").path("bundle", &a.bundle);
    if let Some(w) = &a.weights {
        eff.path("weights", w);
    }
    eff.flag("c", a.c);
    announce(&eff);

    let bundle = io::load_bundle(&a.bundle)?;
    let net = bundle.network;
    let weights = match &a.weights {
        Some(p) => io::load_weights(p, &net)?,
        None => bundle.weights,
    };
    let report = check_convergence_conditions(&net, &weights);
    println!("type,size,weight_sum,contraction_bound");
    for t in net.type_ids() {
        println!(
            "{},{},{},{}",
            net.entity_type(t).name(),
            net.entity_type(t).size(),
            report.incident_sums[t.0],
            a.c * report.lyapunov_bound[t.0]
        );
    }
    if report.passes() {
        eprintln!("convergence conditions hold");
        Ok(())
    } else {
        Err(config(format!("convergence conditions fail: {}", report.summary(&net))))
    }
}
