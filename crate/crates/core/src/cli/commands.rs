use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{Manifest, Resolver};
use super::{CommonArgs, EngineArgs, LexicalArgs, LinkpredArgs, RetrofitArgs, SampleNegArgs, StatsArgs, SynthArgs};
use crate::embed::{align, load_embeddings, save_embeddings, EmbeddingFormat, EmbeddingSet};
use crate::engine::{retrofit as run_retrofit, RetrofitConfig, RetrofitResult, SgdConfig, UpdateMode};
use crate::error::{Error, Result};
use crate::eval::{
    analogy_eval, eval_linkpred as run_linkpred, format_linkpred_table, load_analogies, load_similarity,
    word_similarity, ClassifierConfig, FeatureMap, LinkPredConfig, LinkPredModel, SynthConfig,
};
use crate::graph::{load_edgelist, KnowledgeGraph};
use crate::negatives::{check_negatives_file, sample_negative_edges, NegativeStrategy};
use crate::penalty::{save_params, RelationKind};
use crate::stats::graph_stats;

/// Settings every subcommand shares.
struct Common {
    graph: Option<String>,
    vertex_classes: Option<String>,
    embeddings: Vec<(Option<String>, String)>,
    format: EmbeddingFormat,
    out_dir: PathBuf,
    seed: u64,
    threads: usize,
}

fn parse_embedding_spec(s: &str) -> (Option<String>, String) {
    match s.split_once('=') {
        Some((class, path)) if !class.is_empty() => (Some(class.to_string()), path.to_string()),
        _ => (None, s.to_string()),
    }
}

fn resolve_common(r: &mut Resolver, c: &CommonArgs) -> Result<Common> {
    let graph = r.opt("graph", c.graph.clone())?;
    let vertex_classes = r.opt("vertex_classes", c.vertex_classes.clone())?;
    let embeddings = r
        .list("embeddings", c.embeddings.clone(), &[])?
        .iter()
        .map(|s| parse_embedding_spec(s))
        .collect();
    let format = r.get("embedding_format", c.embedding_format.as_deref().map(str::parse).transpose()?, EmbeddingFormat::default())?;
    let out_dir: String = r.get("out_dir", c.out_dir.clone(), ".".to_string())?;
    let seed = r.get("seed", c.seed, 0u64)?;
    let threads = r.get("threads", c.threads, 1usize)?;
    if threads == 0 {
        return Err(Error::Config("threads must be >= 1".into()));
    }
    Ok(Common {
        graph,
        vertex_classes,
        embeddings,
        format,
        out_dir: PathBuf::from(out_dir),
        seed,
        threads,
    })
}

fn parse_opt<T: std::str::FromStr<Err = Error>>(s: &Option<String>) -> Result<Option<T>> {
    s.as_deref().map(str::parse).transpose()
}

fn resolve_engine(r: &mut Resolver, e: &EngineArgs, common: &Common) -> Result<RetrofitConfig> {
    let kind: RelationKind = r.get("kind", parse_opt(&e.kind)?, RelationKind::Linear)?;
    let base = RetrofitConfig::for_kind(kind);
    let mut kind_by_relation = BTreeMap::new();
    for spec in r.list("relation_kinds", e.relation_kind.clone(), &[])? {
        let (rel, k) = spec
            .rsplit_once('=')
            .ok_or_else(|| Error::Config(format!("relation kind `{spec}` is not REL=kind")))?;
        kind_by_relation.insert(rel.to_string(), k.parse()?);
    }
    let sgd_default = SgdConfig::default();
    let cfg = RetrofitConfig {
        alpha: r.get("alpha", e.alpha, base.alpha)?,
        beta_pos: r.get("beta_pos", e.beta_pos, base.beta_pos)?,
        beta_neg: r.get("beta_neg", e.beta_neg, base.beta_neg)?,
        lambda: r.get("lambda", e.lambda, base.lambda)?,
        default_kind: kind,
        kind_by_relation,
        max_sweeps: r.get("max_sweeps", e.max_sweeps, base.max_sweeps)?,
        tol: r.get("tol", e.tol, base.tol)?,
        seed: common.seed,
        sgd: SgdConfig {
            learning_rate: r.get("sgd_lr", e.sgd_lr, sgd_default.learning_rate)?,
            epochs: r.get("sgd_epochs", e.sgd_epochs, sgd_default.epochs)?,
            batch_size: r.get("sgd_batch", e.sgd_batch, sgd_default.batch_size)?,
        },
        orthogonalize: r.get("orthogonalize", e.no_orthogonalize.then_some(false), base.orthogonalize)?,
        update_matrices: true,
        update_mode: r.get("update_mode", parse_opt::<UpdateMode>(&e.update_mode)?, base.update_mode)?,
        neg_strategy: r.get("neg_strategy", parse_opt::<NegativeStrategy>(&e.neg_strategy)?, base.neg_strategy)?,
        threads: common.threads,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn require_graph(common: &Common) -> Result<(KnowledgeGraph, String)> {
    let path = common
        .graph
        .clone()
        .ok_or_else(|| Error::Config("missing required setting `graph` (flag or config file)".into()))?;
    let (g, report) = load_edgelist(&path, common.vertex_classes.as_deref().map(Path::new))?;
    if report.duplicates > 0 || report.self_loops > 0 {
        log::warn!(
            "{path}: ignored {} duplicate edges and {} self-loops",
            report.duplicates,
            report.self_loops
        );
    }
    Ok((g, path))
}

fn load_embedding_inputs(common: &Common) -> Result<Vec<(Option<String>, EmbeddingSet)>> {
    if common.embeddings.is_empty() {
        return Err(Error::Config("missing required setting `embeddings` (flag or config file)".into()));
    }
    common
        .embeddings
        .iter()
        .map(|(class, path)| Ok((class.clone(), load_embeddings(path, common.format)?)))
        .collect()
}

fn record_inputs(m: &mut Manifest, common: &Common) -> Result<()> {
    if let Some(p) = &common.graph {
        m.input("graph", Path::new(p))?;
    }
    if let Some(p) = &common.vertex_classes {
        m.input("vertex_classes", Path::new(p))?;
    }
    for (k, (_, p)) in common.embeddings.iter().enumerate() {
        m.input(&format!("embeddings.{k}"), Path::new(p))?;
    }
    Ok(())
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))
}

/// Index of the input set a vertex of `class` draws from, mirroring `align`.
fn source_set(sets: &[(Option<String>, EmbeddingSet)], class: &Option<String>) -> usize {
    sets.iter()
        .position(|(c, _)| c == class)
        .or_else(|| sets.iter().position(|(c, _)| c.is_none()))
        .unwrap_or(0)
}

/// Writes retrofitted vectors per input set, passing through input entities the
/// graph does not mention.
fn write_embeddings(
    dir: &Path,
    suffix: &str,
    format: EmbeddingFormat,
    g: &KnowledgeGraph,
    retro: &EmbeddingSet,
    sets: &[(Option<String>, EmbeddingSet)],
) -> Result<Vec<String>> {
    let mut per_set: Vec<EmbeddingSet> = vec![EmbeddingSet::new(); sets.len()];
    for v in g.vertices() {
        let k = source_set(sets, &v.class);
        let e = retro.entry(&v.id).expect("retrofit covers every vertex");
        per_set[k].insert(v.id.clone(), e.class.clone(), e.vector.clone())?;
    }
    let mut names = Vec::new();
    for ((class, input), mut out) in sets.iter().zip(per_set) {
        out.extend_missing(input)?;
        let name = match class {
            Some(c) => format!("embeddings.{c}{suffix}.txt"),
            None => format!("embeddings{suffix}.txt"),
        };
        save_embeddings(&out, dir.join(&name), format)?;
        names.push(name);
    }
    Ok(names)
}

fn record_result(m: &mut Manifest, res: &RetrofitResult) {
    let f = res.final_objective();
    m.set("result.sweeps", res.sweeps_run);
    m.set("result.converged", res.converged);
    m.set("result.skipped_updates", res.skipped_updates);
    m.set("result.objective.anchor", f.anchor_term);
    m.set("result.objective.positive", f.positive_term);
    m.set("result.objective.negative", f.negative_term);
    m.set("result.objective.regularizer", f.regularizer_term);
    m.set("result.objective.total", f.total);
}

pub fn retrofit(a: &RetrofitArgs) -> Result<bool> {
    let mut r = Resolver::new(a.common.config.as_deref().map(Path::new), "retrofit")?;
    let common = resolve_common(&mut r, &a.common)?;
    let cfg = resolve_engine(&mut r, &a.engine, &common)?;
    let grid_flag: Vec<String> = a.alpha_grid.iter().cloned().collect();
    let grid = r
        .list("alpha_grid", grid_flag, &[])?
        .iter()
        .map(|s| s.parse::<f64>().map_err(|_| Error::Config(format!("bad alpha `{s}` in alpha_grid"))))
        .collect::<Result<Vec<f64>>>()?;
    let suffix: String = r.get("output_suffix", None, String::new())?;
    r.finish()?;

    let (g, _) = require_graph(&common)?;
    let sets = load_embedding_inputs(&common)?;
    let refs: Vec<(Option<String>, &EmbeddingSet)> = sets.iter().map(|(c, s)| (c.clone(), s)).collect();
    let (q_hat, coverage) = align(&g, &refs)?;
    create_out_dir(&common.out_dir)?;

    let runs: Vec<(RetrofitConfig, String, bool)> = if grid.is_empty() {
        vec![(cfg.clone(), suffix.clone(), false)]
    } else {
        grid.iter()
            .map(|&alpha| {
                let run = RetrofitConfig { alpha, ..cfg.clone() };
                (run, format!("{suffix}_alpha-{alpha}"), true)
            })
            .collect()
    };

    let mut all_converged = true;
    println!("alpha\tsweeps\tconverged\tobjective\toutput");
    for (run_cfg, run_suffix, from_grid) in runs {
        let res = run_retrofit(&g, &q_hat, &run_cfg)?;
        let dir = &common.out_dir;
        let mut outputs = write_embeddings(dir, &run_suffix, common.format, &g, &res.embeddings, &sets)?;
        let params_name = format!("params{run_suffix}.txt");
        save_params(res.params.values(), dir.join(&params_name))?;
        let trace_name = format!("trace{run_suffix}.tsv");
        res.save_trace(dir.join(&trace_name))?;
        outputs.push(params_name);
        outputs.push(trace_name);

        let mut m = r.manifest();
        if from_grid {
            m.set("alpha", run_cfg.alpha);
            m.set("alpha_grid", "");
            m.set("output_suffix", &run_suffix);
        }
        record_inputs(&mut m, &common)?;
        for (class, (c, t)) in &coverage.per_class {
            m.set(format!("input.coverage.{class}"), format!("{c}/{t}"));
        }
        m.set("output.files", outputs.join(","));
        record_result(&mut m, &res);
        m.write(&dir.join(format!("manifest{run_suffix}.txt")))?;

        println!(
            "{}\t{}\t{}\t{:.10e}\t{}",
            run_cfg.alpha,
            res.sweeps_run,
            res.converged,
            res.final_objective().total,
            outputs[0]
        );
        all_converged &= res.converged;
    }
    Ok(all_converged)
}

pub fn eval_linkpred(a: &LinkpredArgs) -> Result<bool> {
    let mut r = Resolver::new(a.common.config.as_deref().map(Path::new), "eval-linkpred")?;
    let common = resolve_common(&mut r, &a.common)?;
    let retro = resolve_engine(&mut r, &a.engine, &common)?;
    let relation: String = r.require("relation", a.relation.clone())?;
    let models = r
        .list("models", a.models.clone(), &["none", "identity", "linear"])?
        .iter()
        .map(|s| s.parse::<LinkPredModel>())
        .collect::<Result<Vec<_>>>()?;
    let defaults = ClassifierConfig::default();
    let classifier = ClassifierConfig {
        features: r.get("features", parse_opt::<FeatureMap>(&a.features)?, defaults.features)?,
        l2: r.get("classifier_l2", a.classifier_l2, defaults.l2)?,
        ..defaults
    };
    let n_repeats = r.get("repeats", a.repeats, 3usize)?;
    r.finish()?;

    let (g, _) = require_graph(&common)?;
    let sets = load_embedding_inputs(&common)?;
    let refs: Vec<(Option<String>, &EmbeddingSet)> = sets.iter().map(|(c, s)| (c.clone(), s)).collect();
    let (q_hat, _) = align(&g, &refs)?;
    create_out_dir(&common.out_dir)?;

    let cfg = LinkPredConfig {
        relation: relation.clone(),
        models,
        n_repeats,
        base_seed: common.seed,
        neg_strategy: retro.neg_strategy,
        retrofit: retro,
        classifier,
    };
    let rows = thread_pool(common.threads)?.install(|| run_linkpred(&g, &q_hat, &cfg))?;
    print!("{}", format_linkpred_table(&relation, &rows));

    let mut tsv = String::from("model\tmetric\tmean\tstd\tn_train\tn_test\tseeds\n");
    for row in &rows {
        let rep = &row.report;
        let seeds: Vec<String> = rep.seeds.iter().map(u64::to_string).collect();
        tsv.push_str(&format!(
            "{}\t{}\t{:.16e}\t{:.16e}\t{}\t{}\t{}\n",
            row.model,
            rep.metric,
            rep.value,
            rep.dispersion,
            rep.n_train,
            rep.n_test,
            seeds.join(",")
        ));
    }
    let out = common.out_dir.join("linkpred.tsv");
    fs::write(&out, tsv).map_err(|e| Error::io(&out, e))?;

    let mut m = r.manifest();
    record_inputs(&mut m, &common)?;
    m.set("output.files", "linkpred.tsv");
    for row in &rows {
        m.set(format!("result.{}.mean", row.model), row.report.value);
        m.set(format!("result.{}.std", row.model), row.report.dispersion);
    }
    m.write(&common.out_dir.join("manifest.txt"))?;
    Ok(true)
}

pub fn eval_lexical(a: &LexicalArgs) -> Result<bool> {
    let mut r = Resolver::new(a.common.config.as_deref().map(Path::new), "eval-lexical")?;
    let common = resolve_common(&mut r, &a.common)?;
    let similarity = r.list("similarity", a.similarity.clone(), &[])?;
    let analogies = r.list("analogies", a.analogies.clone(), &[])?;
    r.finish()?;
    if similarity.is_empty() && analogies.is_empty() {
        return Err(Error::Config("give at least one --similarity or --analogies dataset".into()));
    }

    let mut q = EmbeddingSet::new();
    for (_, set) in load_embedding_inputs(&common)? {
        q.extend_missing(&set)?;
    }
    create_out_dir(&common.out_dir)?;

    let mut m = r.manifest();
    record_inputs(&mut m, &common)?;
    let mut tsv = String::from("dataset\tmetric\tvalue\tn\tdropped\n");
    println!("dataset\tmetric\tvalue\tn\tdropped");
    let mut reports = Vec::new();
    for (k, path) in similarity.iter().enumerate() {
        m.input(&format!("similarity.{k}"), Path::new(path))?;
        reports.push((path, word_similarity(&q, &load_similarity(path)?)?));
    }
    for (k, path) in analogies.iter().enumerate() {
        m.input(&format!("analogies.{k}"), Path::new(path))?;
        reports.push((path, analogy_eval(&q, &load_analogies(path)?)?));
    }
    for (path, rep) in &reports {
        tsv.push_str(&format!("{path}\t{}\t{:.16e}\t{}\t{}\n", rep.metric, rep.value, rep.n_test, rep.dropped));
        println!("{path}\t{}\t{:.4}\t{}\t{}", rep.metric, rep.value, rep.n_test, rep.dropped);
    }
    let out = common.out_dir.join("lexical.tsv");
    fs::write(&out, tsv).map_err(|e| Error::io(&out, e))?;
    m.set("output.files", "lexical.tsv");
    m.write(&common.out_dir.join("manifest.txt"))?;
    Ok(true)
}

pub fn synth(a: &SynthArgs) -> Result<bool> {
    let mut r = Resolver::new(a.common.config.as_deref().map(Path::new), "synth")?;
    let common = resolve_common(&mut r, &a.common)?;
    let d = SynthConfig::default();
    let cfg = SynthConfig {
        n_vertices: r.get("n_vertices", a.n_vertices, d.n_vertices)?,
        n_relations: r.get("n_relations", a.n_relations, d.n_relations)?,
        dim: r.get("dim", a.dim, d.dim)?,
        noise_sigma: r.get("noise", a.noise, d.noise_sigma)?,
        seed: common.seed,
        mean_out_degree: r.get("mean_degree", a.mean_degree, d.mean_out_degree)?,
        translation_scale: r.get("translation_scale", a.translation_scale, d.translation_scale)?,
    };
    r.finish()?;

    let s = cfg.generate()?;
    let dir = &common.out_dir;
    create_out_dir(dir)?;
    s.graph.save_edgelist(dir.join("graph.tsv"))?;
    save_embeddings(&s.truth, dir.join("truth.txt"), common.format)?;
    save_embeddings(&s.q_hat, dir.join("q_hat.txt"), common.format)?;
    save_params(s.planted.values(), dir.join("planted_params.txt"))?;

    let mut m = r.manifest();
    m.set("output.files", "graph.tsv,truth.txt,q_hat.txt,planted_params.txt");
    m.set("result.edges", s.graph.n_edges());
    m.write(&dir.join("manifest.txt"))?;
    println!("vertices\t{}\nedges\t{}\nrelations\t{}", s.graph.n_vertices(), s.graph.n_edges(), s.graph.relations().len());
    Ok(true)
}

pub fn stats(a: &StatsArgs) -> Result<bool> {
    let mut r = Resolver::new(a.common.config.as_deref().map(Path::new), "stats")?;
    let common = resolve_common(&mut r, &a.common)?;
    r.finish()?;
    let (g, _) = require_graph(&common)?;
    let report = graph_stats(&g);
    let table = report.to_string();
    print!("{table}");
    create_out_dir(&common.out_dir)?;
    let out = common.out_dir.join("stats.tsv");
    fs::write(&out, &table).map_err(|e| Error::io(&out, e))?;
    let mut m = r.manifest();
    record_inputs(&mut m, &common)?;
    m.set("output.files", "stats.tsv");
    m.write(&common.out_dir.join("manifest.txt"))?;
    Ok(true)
}

pub fn sample_neg(a: &SampleNegArgs) -> Result<bool> {
    let mut r = Resolver::new(a.common.config.as_deref().map(Path::new), "sample-neg")?;
    let common = resolve_common(&mut r, &a.common)?;
    let relations = r.list("relations", a.relations.clone(), &[])?;
    let strategy = r.get("neg_strategy", parse_opt::<NegativeStrategy>(&a.neg_strategy)?, NegativeStrategy::default())?;
    let check: Option<String> = r.opt("check", a.check.clone())?;
    r.finish()?;
    let (g, _) = require_graph(&common)?;

    if let Some(path) = check {
        let clashes = check_negatives_file(&g, &path)?;
        if clashes.is_empty() {
            println!("ok\t{path}\tno negative is an edge of the graph");
            return Ok(true);
        }
        for t in &clashes {
            println!("clash\t{t}");
        }
        return Err(Error::Eval(format!("{path}: {} negatives are edges of the graph", clashes.len())));
    }

    let scope = (!relations.is_empty()).then_some(relations.as_slice());
    let neg = sample_negative_edges(&g, scope, common.seed, strategy)?;
    create_out_dir(&common.out_dir)?;
    neg.save(&g, common.out_dir.join("negatives.tsv"))?;
    let mut m = r.manifest();
    record_inputs(&mut m, &common)?;
    m.set("output.files", "negatives.tsv");
    m.set("result.negatives", neg.len());
    m.set("result.skipped", neg.skipped);
    m.set("result.saturated", neg.saturated.join(","));
    m.write(&common.out_dir.join("manifest.txt"))?;
    println!("negatives\t{}\nskipped\t{}", neg.len(), neg.skipped);
    Ok(true)
}
