use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use botprof::corpus::{load_corpus, split_corpus, summarize, write_corpus, Corpus, CorpusFormat};
use botprof::ensemble::{aggregate_accounts, Prediction, TrainedModel, Unit};
use botprof::evalx::{self, export_error_samples, format_table};
use botprof::features::{build_items, Item};
use botprof::lm_embed::{embed_corpus, TweetEmbedder};
use botprof::numnet::checkpoint::Checkpoint;
use botprof::pipeline::{evaluate, train_model, Evaluation, ModelVariant};
use botprof::profiler::{assign_profiles, HeuristicProfiler, ProfileSource};
use botprof::syngen::{generate_with, write_vectors};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ProfileSourceKind, RunConfig};
use crate::error::CliError;

const EMBEDDER_KIND: &str = "embedder";
const MODEL_KIND: &str = "bot-model";

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

/// Creates `<out>/<run-id>/` with the resolved config and a `checkpoints/`
/// directory. The id hashes the command, the resolved config and the corpus
/// fingerprint.
fn open_run(ctx: &Ctx, command: &str, corpus_fingerprint: &str) -> Result<PathBuf, CliError> {
    let rendered = ctx.cfg.render();
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0]);
    h.update(rendered.as_bytes());
    h.update([0]);
    h.update(corpus_fingerprint.as_bytes());
    let id = hex::encode(&h.finalize()[..8]);
    let dir = ctx.out.join(&id);
    fs::create_dir_all(dir.join("checkpoints")).map_err(|e| CliError::io(&dir.display().to_string(), e))?;
    let header = format!("# command={command}\n# corpus_fingerprint={corpus_fingerprint}\n");
    write(&dir.join("config"), &(header + &rendered))?;
    log::info!("run {id} ({command}), resolved config:\n{rendered}");
    Ok(dir)
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(&path.display().to_string(), e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    text.push('\n');
    write(path, &text)
}

fn load_input_corpus(cfg: &RunConfig) -> Result<Corpus, CliError> {
    let path = cfg.require_path("corpus")?;
    let format = cfg.corpus_format(&path)?;
    Ok(load_corpus(&path, format)?)
}

/// Train and test sides; a zero train fraction uses the whole corpus as test set.
fn split(cfg: &RunConfig, corpus: &Corpus) -> Result<(Corpus, Corpus), CliError> {
    let spec = cfg.split()?;
    if spec.train_fraction == 0.0 {
        return Ok((Corpus::default(), corpus.clone()));
    }
    if spec.train_fraction == 1.0 {
        return Ok((corpus.clone(), Corpus::default()));
    }
    Ok(split_corpus(corpus, &spec)?)
}

fn load_embedder(cfg: &RunConfig) -> Result<TweetEmbedder, CliError> {
    let ck = Checkpoint::load(&cfg.require_path("embedder")?)?;
    Ok(ck.body(EMBEDDER_KIND)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelBundle {
    variant: ModelVariant,
    profile_source: String,
    profiler: Option<HeuristicProfiler>,
    model: TrainedModel,
}

fn load_bundle(cfg: &RunConfig) -> Result<ModelBundle, CliError> {
    let ck = Checkpoint::load(&cfg.require_path("model")?)?;
    Ok(ck.body(MODEL_KIND)?)
}

/// Tweet vectors plus profile-bearing items for `corpus`.
fn prepare_items(
    cfg: &RunConfig,
    embedder: &TweetEmbedder,
    corpus: &Corpus,
    profiler: Option<&HeuristicProfiler>,
) -> Result<Vec<Item>, CliError> {
    let mode = cfg.parallelism()?;
    let vectors = embed_corpus(embedder, corpus, mode)?;
    let profiled = match profiler {
        Some(h) => assign_profiles(corpus, &ProfileSource::Heuristic(h), Some(&vectors))?,
        None => assign_profiles(corpus, &ProfileSource::Oracle, None)?,
    };
    build_items(&profiled, &vectors).map_err(CliError::Data)
}

#[derive(Debug, Serialize)]
struct MetricsFile<'a> {
    model: ModelVariant,
    primary_unit: Unit,
    primary: &'a evalx::MetricsReport,
    tweet: &'a evalx::MetricsReport,
    account: &'a evalx::MetricsReport,
}

fn write_metrics(dir: &Path, variant: ModelVariant, unit: Unit, eval: &Evaluation) -> Result<(), CliError> {
    write_json(
        &dir.join("metrics.json"),
        &MetricsFile {
            model: variant,
            primary_unit: unit,
            primary: eval.report(unit),
            tweet: &eval.tweet,
            account: &eval.account,
        },
    )?;
    print!("{}", format_table(&[eval.tweet.clone(), eval.account.clone()]));
    Ok(())
}

pub fn ingest(ctx: &Ctx) -> Result<PathBuf, CliError> {
    let corpus = load_input_corpus(&ctx.cfg)?;
    let dir = open_run(ctx, "ingest", &corpus.fingerprint())?;
    write_corpus(&corpus, &dir.join("corpus.jsonl"), CorpusFormat::Jsonl)?;
    let summary = summarize(&corpus);
    write_json(&dir.join("summary.json"), &summary)?;
    let total = summary.total();
    println!("accounts={} tweets={}", total.accounts, total.tweets);
    Ok(dir)
}

pub fn synth(ctx: &Ctx) -> Result<PathBuf, CliError> {
    let gen = ctx.cfg.synth()?;
    let format = ctx.cfg.synth_format()?;
    let dir = open_run(ctx, "synth", "")?;
    let corpus = generate_with(&gen, ctx.cfg.parallelism()?)?;
    let name = match format {
        CorpusFormat::Csv => "corpus.csv",
        CorpusFormat::Jsonl => "corpus.jsonl",
    };
    write_corpus(&corpus, &dir.join(name), format)?;
    write_vectors(&gen, ctx.cfg.synth_vectors_dim()?, &dir.join("vectors.txt"))?;
    println!("corpus={}", dir.join(name).display());
    println!("vectors={}", dir.join("vectors.txt").display());
    Ok(dir)
}

pub fn train_lm(ctx: &Ctx) -> Result<PathBuf, CliError> {
    let cfg = &ctx.cfg;
    let lm = cfg.lm()?;
    let mixing = cfg.mixing()?;
    let corpus = load_input_corpus(cfg)?;
    let (train, _) = split(cfg, &corpus)?;
    let dir = open_run(ctx, "train-lm", &corpus.fingerprint())?;
    let (embedder, log) = TweetEmbedder::train(&train, &lm, cfg.path("vectors").as_deref(), mixing, cfg.parallelism()?)?;
    let path = dir.join("checkpoints").join("embedder.json");
    Checkpoint::new(EMBEDDER_KIND, lm.seed, &lm, &embedder)?.save(&path)?;
    write_json(&dir.join("lm_log.json"), &log)?;
    if let Some(last) = log.epoch_nll.last() {
        println!("final_nll={last:.6} perplexity={:.4}", last.exp());
    }
    println!("embedder={}", path.display());
    Ok(dir)
}

pub fn train(ctx: &Ctx, variant: ModelVariant) -> Result<PathBuf, CliError> {
    let cfg = &ctx.cfg;
    let train_cfg = cfg.train()?;
    let source = cfg.profile_source()?;
    let unit = cfg.unit()?;
    let corpus = load_input_corpus(cfg)?;
    let embedder = load_embedder(cfg)?;
    let (train, test) = split(cfg, &corpus)?;
    let dir = open_run(ctx, &format!("train {variant}"), &corpus.fingerprint())?;

    let profiler = match source {
        ProfileSourceKind::Oracle => None,
        ProfileSourceKind::Heuristic => {
            let vectors = embed_corpus(&embedder, &train, train_cfg.parallelism)?;
            Some(HeuristicProfiler::train_on_corpus(&train, &vectors, &cfg.logistic()?, train_cfg.parallelism)?)
        }
    };
    let items = prepare_items(cfg, &embedder, &train, profiler.as_ref())?;
    let model = train_model(variant, &items, &train_cfg)?;
    let bundle = ModelBundle {
        variant,
        profile_source: cfg.raw("profile.source").to_string(),
        profiler,
        model,
    };
    let path = dir.join("checkpoints").join("model.json");
    let hyper: BTreeMap<&str, String> = [("variant", variant.to_string()), ("config", cfg.render())].into();
    Checkpoint::new(MODEL_KIND, train_cfg.seed, &hyper, &bundle)?.save(&path)?;
    println!("model={}", path.display());

    if !test.is_empty() {
        let test_items = prepare_items(cfg, &embedder, &test, bundle.profiler.as_ref())?;
        let (eval, _) = evaluate(&bundle.model, &test_items, &train_cfg)?;
        write_metrics(&dir, variant, unit, &eval)?;
    }
    Ok(dir)
}

fn scored_test_side(ctx: &Ctx) -> Result<(ModelBundle, Corpus, Vec<Item>), CliError> {
    let cfg = &ctx.cfg;
    let corpus = load_input_corpus(cfg)?;
    let embedder = load_embedder(cfg)?;
    let bundle = load_bundle(cfg)?;
    let (_, test) = split(cfg, &corpus)?;
    if test.is_empty() {
        return Err(CliError::Usage("the split leaves no test accounts".into()));
    }
    let items = prepare_items(cfg, &embedder, &test, bundle.profiler.as_ref())?;
    Ok((bundle, test, items))
}

fn with_threshold(cfg: &RunConfig, bundle: &mut ModelBundle) -> Result<(), CliError> {
    let t = cfg.train()?.threshold;
    bundle.model.set_threshold(t);
    Ok(())
}

pub fn evaluate_cmd(ctx: &Ctx) -> Result<PathBuf, CliError> {
    let cfg = &ctx.cfg;
    let unit = cfg.unit()?;
    let train_cfg = cfg.train()?;
    let (mut bundle, test, items) = scored_test_side(ctx)?;
    with_threshold(cfg, &mut bundle)?;
    let dir = open_run(ctx, "evaluate", &test.fingerprint())?;
    let (eval, _) = evaluate(&bundle.model, &items, &train_cfg)?;
    write_metrics(&dir, bundle.variant, unit, &eval)?;
    Ok(dir)
}

pub fn predict(ctx: &Ctx) -> Result<PathBuf, CliError> {
    let cfg = &ctx.cfg;
    let unit = cfg.unit()?;
    let train_cfg = cfg.train()?;
    let corpus = load_input_corpus(cfg)?;
    let embedder = load_embedder(cfg)?;
    let mut bundle = load_bundle(cfg)?;
    with_threshold(cfg, &mut bundle)?;
    let items = prepare_items(cfg, &embedder, &corpus, bundle.profiler.as_ref())?;
    let dir = open_run(ctx, "predict", &corpus.fingerprint())?;
    let mut preds: Vec<Prediction> = bundle.model.predict_items(&items, train_cfg.parallelism)?;
    if unit == Unit::Account {
        preds = aggregate_accounts(&preds, bundle.model.threshold());
    }
    let mut text = String::new();
    for p in &preds {
        text.push_str(&serde_json::to_string(p).map_err(|e| CliError::Data(e.to_string()))?);
        text.push('\n');
    }
    write(&dir.join("predictions.jsonl"), &text)?;
    println!("predictions={}", preds.len());
    Ok(dir)
}

pub fn export_errors(ctx: &Ctx) -> Result<PathBuf, CliError> {
    let cfg = &ctx.cfg;
    let train_cfg = cfg.train()?;
    let (mut bundle, test, items) = scored_test_side(ctx)?;
    with_threshold(cfg, &mut bundle)?;
    let dir = open_run(ctx, "export-errors", &test.fingerprint())?;
    let preds = bundle.model.predict_items(&items, train_cfg.parallelism)?;
    let summary = export_error_samples(bundle.variant.name(), &preds, &test, &dir.join("errors"))?;
    for (name, s) in [("true_positives", summary.true_positives), ("false_positives", summary.false_positives)] {
        println!("{name} count={} rt_count={} rt_fraction={:.4}", s.count, s.rt_count, s.rt_fraction);
    }
    Ok(dir)
}
