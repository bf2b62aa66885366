use std::collections::{BTreeSet, HashSet};
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use dynidx_core::advisor::CSV_HEADER;
use dynidx_core::store::{write_atomic, LockFile};
use dynidx_core::{
    emit_ddl, load_schema, load_workload, run_cycle_at, AdvisorState, CandidateIndex, CycleRecord, DeltaBatch,
    KnowledgeBase, Recommendation, StarSchema,
};
use serde::Serialize;

use crate::config::{AdvisorConfig, ReportFormat};

#[derive(Debug)]
pub enum Failure {
    /// Bad flags, files or inputs: exit status 1.
    Input(anyhow::Error),
    /// A result that breaks the advisor's own invariants: exit status 2.
    Internal(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.into())
    }
}

pub type Outcome = Result<(), Failure>;

fn load_kb(path: &Path) -> anyhow::Result<KnowledgeBase> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read knowledge base {} (run `dynidx init` first)", path.display()))?;
    KnowledgeBase::from_json(&text).with_context(|| format!("rejected knowledge base {}", path.display()))
}

fn load_state(path: &Path) -> anyhow::Result<AdvisorState> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read configuration state {} (run `dynidx init` first)", path.display()))?;
    AdvisorState::from_json(&text).map_err(|e| anyhow!("rejected configuration state {}: {e}", path.display()))
}

fn load_pair(config: &AdvisorConfig) -> anyhow::Result<(KnowledgeBase, AdvisorState)> {
    let kb = load_kb(config.kb_path()?)?;
    let state = load_state(config.state_path()?)?;
    if state.kb_version != kb.version {
        bail!(
            "configuration state was derived from knowledge-base version {} but {} is version {}",
            state.kb_version,
            config.kb_path()?.display(),
            kb.version
        );
    }
    Ok((kb, state))
}

fn checked_schema(config: &AdvisorConfig) -> anyhow::Result<StarSchema> {
    let path = config.schema_path()?;
    load_schema(path).with_context(|| format!("invalid schema {}", path.display()))
}

pub fn init(config: &AdvisorConfig, force: bool) -> Outcome {
    checked_schema(config)?;
    let kb_path = config.kb_path()?;
    let state_path = config.state_path()?;
    let _lock = LockFile::acquire(kb_path)?;
    if !force {
        if let Some(existing) = [kb_path, state_path].into_iter().find(|p| p.exists()) {
            return Err(anyhow!("{} already exists; pass --force to reset it", existing.display()).into());
        }
    }
    let kb = KnowledgeBase::new(config.minsup_or_default());
    write_atomic(kb_path, kb.to_json().as_bytes())?;
    write_atomic(state_path, AdvisorState::default().to_json().as_bytes())?;
    println!(
        "initialized {} (version 0, minsup {}) and {}",
        kb_path.display(),
        kb.parameters.minsup(),
        state_path.display()
    );
    Ok(())
}

fn read_removed_ids(path: &Path) -> anyhow::Result<BTreeSet<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read removed ids {}", path.display()))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(String::from).collect())
}

fn human_bytes(bytes: u64) -> String {
    const UNITS: [&str; 4] = ["B", "KB", "MB", "GB"];
    let mut value = bytes as f64;
    let mut unit = 0;
    while value >= 1024.0 && unit + 1 < UNITS.len() {
        value /= 1024.0;
        unit += 1;
    }
    if unit == 0 {
        format!("{bytes} B")
    } else {
        format!("{value:.1} {}", UNITS[unit])
    }
}

fn report_csv(r: &Recommendation) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["section", "name", "attributes", "support", "size_bytes", "feasible"])?;
    let attrs = |set: &dynidx_core::AttrSet| set.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
    for (section, sets) in [("emerged", &r.emerged), ("declined", &r.declined), ("retained", &r.retained)] {
        for s in sets {
            w.write_record([section, "", &attrs(&s.attributes), &s.support.to_string(), "", ""])?;
        }
    }
    let indexes: [(&str, &[CandidateIndex]); 4] = [
        ("candidate", &r.candidates),
        ("selected", &r.selected.indexes),
        ("create", &r.to_create),
        ("drop", &r.to_drop),
    ];
    for (section, list) in indexes {
        for i in list {
            w.write_record([section, &i.name, &attrs(&i.itemset), "", &i.size.to_string(), &i.feasible.to_string()])?;
        }
    }
    Ok(w.into_inner()?)
}

pub fn recommend(config: &AdvisorConfig, workload: &Path, removed: Option<&Path>) -> Outcome {
    let schema = checked_schema(config)?;
    let budget = config.required_budget()?;
    let out = config.out_dir()?;
    let kb_path = config.kb_path()?;
    let _lock = LockFile::acquire(kb_path)?;
    let (kb, mut state) = load_pair(config)?;
    let cycle = state.next_cycle();

    let minsup = config.minsup.unwrap_or(kb.parameters);
    if minsup != kb.parameters {
        log::warn!(
            "minsup changed from {} to {}; re-mining all stored transactions",
            kb.parameters.minsup(),
            minsup.minsup()
        );
    }

    let mut batch =
        load_workload(workload, &schema).with_context(|| format!("cannot read workload {}", workload.display()))?;
    for q in &mut batch.queries {
        q.id = format!("c{cycle:04}-{}", q.id);
    }
    let mut removed_ids = match removed {
        Some(path) => read_removed_ids(path)?,
        None => BTreeSet::new(),
    };
    if let Some(n) = config.retention_batches {
        removed_ids.extend(kb.database.transactions().iter().filter(|t| t.cycle + n <= cycle).map(|t| t.id.clone()));
    }
    let delta = DeltaBatch::new(&batch, removed_ids)?.with_cycle(cycle);

    let result = run_cycle_at(&kb, minsup, &delta, &state.configuration, &schema, &config.cost, budget)?;
    result
        .knowledge_base
        .validate()
        .map_err(|e| Failure::Internal(anyhow!("updated knowledge base is inconsistent: {e}")))?;
    let r = &result.recommendation;
    if result.configuration.total_size > budget {
        return Err(Failure::Internal(anyhow!(
            "selected configuration uses {} bytes, above the budget of {budget}",
            result.configuration.total_size
        )));
    }

    fs::create_dir_all(out).with_context(|| format!("cannot create output directory {}", out.display()))?;
    let (report_path, report) = match config.report_format.unwrap_or(ReportFormat::Json) {
        ReportFormat::Json => (out.join(format!("cycle-{cycle:04}.json")), r.to_json().into_bytes()),
        ReportFormat::Csv => (out.join(format!("cycle-{cycle:04}.csv")), report_csv(r)?),
    };
    let ddl_path = out.join(format!("cycle-{cycle:04}.sql"));
    write_atomic(&report_path, &report)?;
    write_atomic(&ddl_path, emit_ddl(&r.diff(), &schema).as_bytes())?;

    state.kb_version = result.knowledge_base.version;
    state.configuration = result.configuration.clone();
    state.history.push(CycleRecord::from_recommendation(r));
    write_atomic(kb_path, result.knowledge_base.to_json().as_bytes())?;
    write_atomic(config.state_path()?, state.to_json().as_bytes())?;

    print_summary(r, batch.skipped, budget, &report_path, &ddl_path);
    Ok(())
}

fn print_summary(r: &Recommendation, skipped: usize, budget: u64, report: &Path, ddl: &Path) {
    println!(
        "cycle {}: {} queries in the window ({skipped} skipped), support threshold {}",
        r.cycle, r.queries, r.support_threshold
    );
    println!("emerged {}, declined {}, retained {}", r.emerged.len(), r.declined.len(), r.retained.len());
    println!(
        "selected {} of {} candidates, {} of {} budget",
        r.selected.len(),
        r.candidates.len(),
        human_bytes(r.selected.total_size),
        human_bytes(budget)
    );
    println!("estimated cost {:.1} -> {:.1} pages", r.baseline_cost_pages, r.recommended_cost_pages);
    if r.to_create.is_empty() && r.to_drop.is_empty() {
        println!("no index changes");
    }
    for i in &r.to_drop {
        println!("  drop   {}", i.name);
    }
    for i in &r.to_create {
        println!("  create {} ({})", i.name, human_bytes(i.size));
    }
    for name in &r.declined_but_beneficial {
        println!("  note: {name} is dropped as declined although it still lowers the estimated cost");
    }
    println!("report {}", report.display());
    println!("ddl    {}", ddl.display());
}

fn recorded_cycles(path: &Path) -> anyhow::Result<HashSet<u64>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    if header != CSV_HEADER {
        bail!("{} does not start with the expected header `{}`", path.display(), CSV_HEADER.join(","));
    }
    reader
        .deserialize::<CycleRecord>()
        .map(|r| r.map(|r| r.cycle).with_context(|| format!("malformed row in {}", path.display())))
        .collect()
}

pub fn evaluate(config: &AdvisorConfig) -> Outcome {
    let state = load_state(config.state_path()?)?;
    if state.history.is_empty() {
        return Err(anyhow!("no advisory cycle recorded yet; run `dynidx recommend` first").into());
    }
    let out = config.out_dir()?;
    fs::create_dir_all(out).with_context(|| format!("cannot create output directory {}", out.display()))?;
    let path: PathBuf = out.join("evaluation.csv");
    let fresh = !path.exists() || fs::metadata(&path)?.len() == 0;
    let known = if fresh { HashSet::new() } else { recorded_cycles(&path)? };
    let pending: Vec<&CycleRecord> = state.history.iter().filter(|r| !known.contains(&r.cycle)).collect();

    let file = OpenOptions::new().create(true).append(true).open(&path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if fresh {
        w.write_record(CSV_HEADER)?;
    }
    for r in &pending {
        w.serialize(r)?;
    }
    w.flush()?;
    println!("{}: {} new rows, {} cycles in total", path.display(), pending.len(), known.len() + pending.len());
    Ok(())
}

#[derive(Serialize)]
struct Status {
    kb_version: u64,
    minsup: f64,
    transactions: usize,
    transaction_weight: u64,
    support_threshold: u64,
    items: usize,
    maximal_itemsets: usize,
    indexes: usize,
    configuration_bytes: u64,
    budget_bytes: Option<u64>,
    cycles: usize,
}

pub fn status(config: &AdvisorConfig) -> Outcome {
    let (kb, state) = load_pair(config)?;
    let s = Status {
        kb_version: kb.version,
        minsup: kb.parameters.minsup_f64(),
        transactions: kb.database.len(),
        transaction_weight: kb.transaction_weight(),
        support_threshold: kb.threshold(),
        items: kb.dictionary().len(),
        maximal_itemsets: kb.maximal.len(),
        indexes: state.configuration.len(),
        configuration_bytes: state.configuration.total_size,
        budget_bytes: config.budget,
        cycles: state.history.len(),
    };
    match config.report_format {
        Some(ReportFormat::Json) => println!("{}", serde_json::to_string_pretty(&s)?),
        Some(ReportFormat::Csv) => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            w.serialize(&s)?;
            w.flush()?;
        }
        None => {
            println!("knowledge base version {} (minsup {})", s.kb_version, kb.parameters.minsup());
            println!(
                "transactions {} (total weight {}), support threshold {}",
                s.transactions, s.transaction_weight, s.support_threshold
            );
            println!("items {}, maximal itemsets {}", s.items, s.maximal_itemsets);
            let budget =
                s.budget_bytes.map_or_else(|| "no budget given".to_string(), |b| format!("budget {}", human_bytes(b)));
            println!("configuration {} indexes, {} ({budget})", s.indexes, human_bytes(s.configuration_bytes));
            println!("cycles recorded {}", s.cycles);
        }
    }
    Ok(())
}
