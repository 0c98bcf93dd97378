//! Subcommand implementations. Each function owns one verb end to end:
//! load config, build the runtime, run, persist, and print a summary.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use hisum_core::dataset::{self, SourceFormat, UnanswerableRule};
use hisum_core::domain::{DatasetRecord, PipelineAnswer, Question, QuestionId};
use hisum_core::eval::{
    compare, decline_metrics, guessed_question_metrics, highlight_gold_summary, judge,
    BattleOutcome, BattleReport, ComparisonSide, EvalReport, JudgeError, JudgeKind, ScoreEntry,
    ScoreReport,
};
use hisum_core::pipeline::{self, DocumentStore, PipelineSpec, RetrieverKind};
use hisum_core::security::{self, AttackCase};

use crate::config::RunConfig;
use crate::persist;
use crate::{
    AskArgs, DatasetConvertArgs, EvalBattleArgs, EvalJudgeArgs, EvalRunArgs, ReplArgs,
    SecurityRunArgs,
};

fn build_store(records: &[DatasetRecord]) -> Result<DocumentStore> {
    DocumentStore::from_records(records).context("cannot build the document store")
}

fn results_path(out: &Path, pipeline: &str) -> PathBuf {
    out.join(format!("results-{pipeline}.jsonl"))
}

/// FNV-1a over UTF-8 bytes. Used to derive a per-battle seed from the
/// question id and the pair of pipeline names, so adding questions or
/// pipelines never shifts the coins of existing battles.
fn fnv1a(text: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Map items to outputs, in order, on up to `jobs` worker threads.
fn run_parallel<T, O, F>(items: &[T], jobs: usize, f: F) -> Result<Vec<O>>
where
    T: Sync,
    O: Send,
    F: Fn(&T) -> Result<O> + Sync,
{
    if jobs <= 1 {
        items.iter().map(&f).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .context("cannot build the worker pool")?;
        pool.install(|| items.par_iter().map(&f).collect())
    }
}

/// Ad-hoc questions have no dataset association, so passthrough retrieval
/// would come up empty; fall back to lexical retrieval for them.
fn adhoc_spec(base: &PipelineSpec, store: &DocumentStore, id: &QuestionId) -> PipelineSpec {
    let mut spec = base.clone();
    if spec.retriever == RetrieverKind::Passthrough && store.associated(id).is_none() {
        eprintln!(
            "notice: question {id} is not a dataset question; retrieving top-{} documents by overlap instead",
            spec.k
        );
        spec.retriever = RetrieverKind::Lexical;
    }
    spec
}

fn print_debug(answer: &PipelineAnswer, store: &DocumentStore) {
    if let Some(guess) = &answer.guessed_question {
        println!("guessed question: {guess}");
    }
    match answer.highlights.as_deref() {
        Some([]) => println!("highlights: none"),
        Some(spans) => {
            println!("highlights:");
            for span in spans {
                let text = store
                    .get(&span.document_id)
                    .and_then(|doc| span.slice(doc))
                    .unwrap_or("<span does not resolve against the store>");
                println!(
                    "  {} [{}..{}]: {text}",
                    span.document_id, span.start, span.end
                );
            }
        }
        None => {}
    }
    println!("declined: {}", answer.declined);
    println!(
        "tokens: {} prompt, {} completion",
        answer.usage.prompt_tokens, answer.usage.completion_tokens
    );
    println!("elapsed: {:.3}s", answer.elapsed_s);
}

pub fn ask(args: &AskArgs) -> Result<()> {
    let config = RunConfig::load(&args.config)?;
    let rt = config.runtime()?;
    let outcome = config.load_dataset(None, None)?;
    let store = build_store(&outcome.records)?;
    let base = config.pipeline(&args.pipeline)?;
    let id = args.id.clone().unwrap_or_else(|| "ask".to_owned());
    let question = Question::new(id, args.question.clone())?;
    let spec = adhoc_spec(base, &store, &question.id);
    let answer = pipeline::run(&question, &spec, &store, &rt)?;
    println!("{}", answer.answer);
    if args.debug {
        print_debug(&answer, &store);
    }
    Ok(())
}

pub fn repl(args: &ReplArgs) -> Result<()> {
    let config = RunConfig::load(&args.config)?;
    let rt = config.runtime()?;
    let outcome = config.load_dataset(None, None)?;
    let store = build_store(&outcome.records)?;
    let base = config.pipeline(&args.pipeline)?.clone();
    eprintln!(
        "pipeline {} over {} documents; type a question, or \"exit\" to leave",
        base.name,
        store.len()
    );
    let stdin = std::io::stdin();
    let mut line = String::new();
    let mut asked = 0usize;
    loop {
        eprint!("> ");
        std::io::stderr().flush().ok();
        line.clear();
        if stdin.lock().read_line(&mut line)? == 0 {
            eprintln!();
            break;
        }
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if text == "exit" || text == "quit" {
            break;
        }
        asked += 1;
        let question = match Question::new(format!("repl-{asked}"), text) {
            Ok(q) => q,
            Err(e) => {
                eprintln!("error: {e}");
                continue;
            }
        };
        let spec = adhoc_spec(&base, &store, &question.id);
        // Fresh session per line: transcripts and usage never leak
        // between questions.
        match pipeline::run(&question, &spec, &store, &rt.isolated()) {
            Ok(answer) => {
                println!("{}", answer.answer);
                if args.debug {
                    print_debug(&answer, &store);
                }
            }
            Err(e) => eprintln!("error: {e:#}"),
        }
    }
    Ok(())
}

/// The pipelines an eval subcommand operates on: one named via
/// `--pipeline`, or every configured pipeline.
fn selected_pipelines<'c>(
    config: &'c RunConfig,
    pipeline: Option<&str>,
) -> Result<Vec<&'c PipelineSpec>> {
    match pipeline {
        Some(name) => Ok(vec![config.pipeline(name)?]),
        None if config.pipelines.is_empty() => bail!("the config defines no pipelines"),
        None => Ok(config.pipelines.iter().collect()),
    }
}

pub fn eval_run(args: &EvalRunArgs) -> Result<()> {
    let config = RunConfig::load(&args.config)?;
    let rt = config.runtime()?;
    let outcome = config.load_dataset(args.dataset.as_deref(), args.format)?;
    let store = build_store(&outcome.records)?;
    let specs = selected_pipelines(&config, args.pipeline.as_deref())?;
    for spec in specs {
        let results = pipeline::run_batch(&outcome.records, spec, &store, &rt, args.jobs)?;
        let declined = results.iter().filter(|r| r.declined).count();
        let path = results_path(&args.out, &spec.name);
        persist::write_jsonl(&path, &results, args.overwrite)?;
        println!(
            "pipeline {}: {} answers ({declined} declined) -> {}",
            spec.name,
            results.len(),
            path.display()
        );
    }
    Ok(())
}

/// One judge verdict for one persisted answer; rows of verdicts.jsonl.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictRow {
    pub question_id: QuestionId,
    pub pipeline: String,
    pub judge: JudgeKind,
    pub score: i64,
    pub clamped: bool,
    pub explanation: String,
}

pub fn eval_judge(args: &EvalJudgeArgs) -> Result<()> {
    let config = RunConfig::load(&args.config)?;
    let rt = config.runtime()?;
    let outcome = config.load_dataset(None, None)?;
    let by_id: BTreeMap<&QuestionId, &DatasetRecord> =
        outcome.records.iter().map(|r| (&r.id, r)).collect();
    let specs = selected_pipelines(&config, args.pipeline.as_deref())?;

    let mut rows: Vec<VerdictRow> = Vec::new();
    let mut unparseable = 0u64;
    for spec in &specs {
        let path = results_path(&args.out, &spec.name);
        let results: Vec<PipelineAnswer> = persist::read_jsonl(&path).with_context(|| {
            format!(
                "no persisted answers for pipeline {}; run `hisum eval run` into the same --out first",
                spec.name
            )
        })?;
        let judged = run_parallel(&results, args.jobs, |result| {
            let record = by_id.get(&result.question_id).with_context(|| {
                format!(
                    "answer {} does not match any dataset question; results may be stale",
                    result.question_id
                )
            })?;
            let session = rt.isolated();
            let mut rows = Vec::new();
            let mut skipped = 0u64;
            for kind in [JudgeKind::Correctness, JudgeKind::Relevance, JudgeKind::Quality] {
                let reference =
                    (kind == JudgeKind::Correctness).then_some(record.reference_answer.as_str());
                match judge(kind, &record.question, &result.answer, reference, &session.gateway) {
                    Ok(verdict) => rows.push(VerdictRow {
                        question_id: result.question_id.clone(),
                        pipeline: result.pipeline_name.clone(),
                        judge: verdict.judge,
                        score: verdict.score,
                        clamped: verdict.clamped,
                        explanation: verdict.explanation,
                    }),
                    Err(JudgeError::Unparseable { attempts }) => {
                        eprintln!(
                            "notice: {kind:?} judge gave no score for {} ({}) after {attempts} attempts; skipped",
                            result.question_id, result.pipeline_name
                        );
                        skipped += 1;
                    }
                    Err(e) => return Err(e).context("judge request failed"),
                }
            }
            Ok((rows, skipped))
        })?;
        for (mut item_rows, skipped) in judged {
            rows.append(&mut item_rows);
            unparseable += skipped;
        }
    }

    persist::write_jsonl(&args.out.join("verdicts.jsonl"), &rows, args.overwrite)?;
    let entries: Vec<ScoreEntry> = rows
        .iter()
        .map(|row| ScoreEntry {
            question_id: row.question_id.clone(),
            pipeline: row.pipeline.clone(),
            judge: row.judge,
            score: row.score,
        })
        .collect();
    let names: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
    let mut report = EvalReport::new(names.clone(), outcome.records.len() as u64);
    report.scores = Some(ScoreReport::from_entries(&entries, &names));
    persist::write_text(&args.out.join("scores.json"), &report.to_json(), args.overwrite)?;

    if unparseable > 0 {
        eprintln!("notice: {unparseable} verdicts were unparseable and omitted");
    }
    if let Some(scores) = &report.scores {
        for (judge, per_pipeline) in &scores.mean_scores {
            for (name, mean) in per_pipeline {
                println!("{judge:?} {name}: mean {:.3} over {}", mean.mean, mean.n);
            }
        }
    }
    println!(
        "verdicts -> {}; scores -> {}",
        args.out.join("verdicts.jsonl").display(),
        args.out.join("scores.json").display()
    );
    Ok(())
}

pub fn eval_battle(args: &EvalBattleArgs) -> Result<()> {
    let config = RunConfig::load(&args.config)?;
    if config.pipelines.len() < 2 {
        bail!("eval battle needs at least two configured pipelines");
    }
    let run_seed = args.seed.unwrap_or(config.seed);
    let rt = config.runtime()?;
    let outcome = config.load_dataset(args.dataset.as_deref(), args.format)?;
    let records = &outcome.records;
    let store = build_store(records)?;
    let names: Vec<String> = config.pipelines.iter().map(|p| p.name.clone()).collect();

    let mut all_results: BTreeMap<String, Vec<PipelineAnswer>> = BTreeMap::new();
    for spec in &config.pipelines {
        let results = pipeline::run_batch(records, spec, &store, &rt, args.jobs)?;
        persist::write_jsonl(&results_path(&args.out, &spec.name), &results, args.overwrite)?;
        all_results.insert(spec.name.clone(), results);
    }

    // One battle per question per unordered pipeline pair, in dataset
    // order then config order, so two runs list battles identically.
    struct Task<'a> {
        record: &'a DatasetRecord,
        a_name: &'a str,
        b_name: &'a str,
        a: &'a PipelineAnswer,
        b: &'a PipelineAnswer,
    }
    let mut tasks = Vec::new();
    for (idx, record) in records.iter().enumerate() {
        for i in 0..names.len() {
            for j in i + 1..names.len() {
                tasks.push(Task {
                    record,
                    a_name: &names[i],
                    b_name: &names[j],
                    a: &all_results[&names[i]][idx],
                    b: &all_results[&names[j]][idx],
                });
            }
        }
    }
    let outcomes = run_parallel(&tasks, args.jobs, |task| {
        let session = rt.isolated();
        let battle_seed = run_seed
            ^ fnv1a(&format!(
                "{}\u{1f}{}\u{1f}{}",
                task.record.id, task.a_name, task.b_name
            ));
        let a = ComparisonSide {
            pipeline: task.a_name,
            answer: &task.a.answer,
        };
        let b = ComparisonSide {
            pipeline: task.b_name,
            answer: &task.b.answer,
        };
        match compare(
            &task.record.id,
            &task.record.question,
            a,
            b,
            &session.gateway,
            battle_seed,
        ) {
            Ok(outcome) => Ok(Some(outcome)),
            Err(JudgeError::Unparseable { attempts }) => {
                eprintln!(
                    "notice: comparison gave no verdict for {} ({} vs {}) after {attempts} attempts; skipped",
                    task.record.id, task.a_name, task.b_name
                );
                Ok(None)
            }
            Err(e) => Err(e).context("comparison request failed"),
        }
    })?;
    let skipped = outcomes.iter().filter(|o| o.is_none()).count();
    let battles: Vec<BattleOutcome> = outcomes.into_iter().flatten().collect();
    persist::write_jsonl(&args.out.join("battles.jsonl"), &battles, args.overwrite)?;

    let mut elo_params = config.elo_params();
    if args.seed.is_some() && config.elo.is_none() {
        elo_params.seed = run_seed;
    }
    let mut report = EvalReport::new(names.clone(), records.len() as u64);
    report.battles = Some(BattleReport::from_battles(&names, &battles, &elo_params));

    let mut decline = BTreeMap::new();
    let mut guessed = BTreeMap::new();
    let mut gold = BTreeMap::new();
    for name in &names {
        let results = &all_results[name];
        decline.insert(name.clone(), decline_metrics(results, records)?);
        guessed.extend(guessed_question_metrics(results, records)?);
        gold.extend(highlight_gold_summary(results, records, &store)?);
    }
    report.decline = Some(decline);
    report.guessed_question = Some(guessed);
    if gold.is_empty() {
        eprintln!(
            "notice: no record pairs a gold passage with highlights; highlight overlap metrics skipped"
        );
    } else {
        report.highlight_gold = Some(gold);
    }
    persist::write_text(&args.out.join("report.json"), &report.to_json(), args.overwrite)?;

    if skipped > 0 {
        eprintln!("notice: {skipped} battles had no verdict and were omitted");
    }
    println!("{} battles over {} questions", battles.len(), records.len());
    if let Some(battle_report) = &report.battles {
        let mut standings: Vec<(&String, f64)> = battle_report
            .ratings
            .iter()
            .map(|(name, rating)| (name, *rating))
            .collect();
        standings.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(y.0)));
        for (name, rating) in standings {
            let wins = battle_report
                .win_percentages
                .get(name)
                .copied()
                .flatten()
                .map_or("no decisive battles".to_owned(), |w| {
                    format!("{:.1}% of decisive battles won", w * 100.0)
                });
            println!("  {name}: {rating:.1} ({wins})");
        }
    }
    println!(
        "battles -> {}; report -> {}",
        args.out.join("battles.jsonl").display(),
        args.out.join("report.json").display()
    );
    Ok(())
}

pub fn security_run(args: &SecurityRunArgs) -> Result<()> {
    let config = RunConfig::load(&args.config)?;
    let Some(sec) = &config.security else {
        bail!("the config has no security section");
    };
    let rt = config.runtime()?;
    let outcome = config
        .load_dataset(None, None)
        .context("the attack harness needs a dataset to serve as the knowledge base")?;
    let store = build_store(&outcome.records)?;

    let cases: Vec<AttackCase> = match args.dataset.as_deref().or(sec.corpus.as_deref()) {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read attack corpus {}", path.display()))?;
            security::parse_corpus(&text)?
        }
        None => security::bundled_corpus(),
    };

    let report = security::run_attack_corpus(&cases, &sec.configurations, &sec.tool, &store, &rt)?;
    let path = args.out.join("security_report.json");
    let mut body = serde_json::to_string_pretty(&report)?;
    body.push('\n');
    persist::write_text(&path, &body, args.overwrite)?;

    for conf in &report.configurations {
        println!(
            "{}: tool called {}/{} ({:.0}%), valid arguments {}/{} ({:.0}%)",
            conf.configuration,
            conf.tool_called,
            conf.total,
            conf.tool_called_rate * 100.0,
            conf.valid_args,
            conf.total,
            conf.valid_args_rate * 100.0
        );
        if !conf.errors.is_empty() {
            eprintln!(
                "notice: {} cases errored under {} and count as not-called",
                conf.errors.len(),
                conf.configuration
            );
        }
    }
    println!("report -> {}", path.display());
    Ok(())
}

pub fn dataset_convert(args: &DatasetConvertArgs) -> Result<()> {
    let rule = UnanswerableRule::default();
    let outcome = dataset::load_dataset(&args.dataset, args.format, &rule)?;
    for q in &outcome.quarantined {
        eprintln!(
            "notice: quarantined record at line {} ({}): {}",
            q.line,
            q.id.as_deref().unwrap_or("no id"),
            q.reason
        );
    }
    let text = match args.to {
        SourceFormat::Normalized => dataset::write_normalized(&outcome.records),
        SourceFormat::Repliqa => dataset::write_repliqa(&outcome.records),
        SourceFormat::Bioasq => bail!("bioasq is a read-only source shape; convert to normalized or repliqa"),
    };
    persist::write_text(&args.out, &text, args.overwrite)?;
    println!(
        "converted {} records ({} quarantined) -> {}",
        outcome.records.len(),
        outcome.quarantined.len(),
        args.out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv1a_matches_reference_vectors() {
        // Published FNV-1a 64-bit test vectors.
        assert_eq!(fnv1a(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a("a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a("foobar"), 0x8594_4171_f739_67e8);
    }

    #[test]
    fn battle_seed_is_order_sensitive_and_stable() {
        let s1 = fnv1a("q-1\u{1f}alpha\u{1f}beta");
        let s2 = fnv1a("q-1\u{1f}beta\u{1f}alpha");
        assert_ne!(s1, s2);
        assert_eq!(s1, fnv1a("q-1\u{1f}alpha\u{1f}beta"));
    }
}
