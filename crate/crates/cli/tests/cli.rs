use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dynidx_core::synth::{planted_group, sales_schema, scenario_workloads, ScenarioConfig};
use dynidx_core::{KnowledgeBase, Recommendation};
use tempfile::TempDir;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("schema.json"), sales_schema().to_json()).unwrap();
        for (n, text) in scenario_workloads(&ScenarioConfig::default()).iter().enumerate() {
            fs::write(dir.path().join(format!("q{}.sql", n + 1)), text).unwrap();
        }
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        let p = |n: &str| self.path(n).display().to_string();
        Command::new(env!("CARGO_BIN_EXE_dynidx"))
            .args([
                "--schema",
                &p("schema.json"),
                "--kb",
                &p("kb.json"),
                "--state",
                &p("state.json"),
                "--out",
                &p("out"),
            ])
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    }

    fn fails(&self, args: &[&str], code: i32) -> String {
        let out = self.run(args);
        assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stdout));
        String::from_utf8(out.stderr).unwrap()
    }

    fn recommend(&self, workload: &str, extra: &[&str]) -> Recommendation {
        let w = self.path(workload).display().to_string();
        let mut args = vec!["recommend", w.as_str(), "--budget", "64MB"];
        args.extend(extra);
        self.ok(&args);
        let state: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(self.path("state.json")).unwrap()).unwrap();
        let cycle = state["history"].as_array().unwrap().last().unwrap()["cycle"].as_u64().unwrap();
        self.report(cycle)
    }

    fn report(&self, cycle: u64) -> Recommendation {
        serde_json::from_str(&fs::read_to_string(self.path(&format!("out/cycle-{cycle:04}.json"))).unwrap()).unwrap()
    }
}

fn read(p: &Path) -> Vec<u8> {
    fs::read(p).unwrap()
}

#[test]
fn init_refuses_to_overwrite_without_force() {
    let ws = Workspace::new();
    ws.ok(&["init"]);
    let kb = KnowledgeBase::from_json(&fs::read_to_string(ws.path("kb.json")).unwrap()).unwrap();
    assert_eq!(kb.version, 0);
    assert!(kb.maximal.is_empty());

    ws.recommend("q1.sql", &[]);
    let (kb_before, state_before) = (read(&ws.path("kb.json")), read(&ws.path("state.json")));
    let err = ws.fails(&["init"], 1);
    assert!(err.contains("--force"), "{err}");
    assert_eq!(read(&ws.path("kb.json")), kb_before);
    assert_eq!(read(&ws.path("state.json")), state_before);

    ws.ok(&["init", "--force"]);
    let status = ws.ok(&["status"]);
    assert!(status.contains("version 0") && status.contains("transactions 0"), "{status}");
    assert!(!ws.path("kb.json.lock").exists());
}

#[test]
fn init_rejects_invalid_schema() {
    let ws = Workspace::new();
    fs::write(ws.path("schema.json"), r#"{"fact": 3}"#).unwrap();
    ws.fails(&["init"], 1);
    assert!(!ws.path("kb.json").exists());
}

#[test]
fn cold_start_then_idempotent_rerun() {
    let ws = Workspace::new();
    ws.ok(&["init"]);
    let first = ws.recommend("q1.sql", &[]);
    assert_eq!(first.cycle, 1);
    assert!(!first.selected.is_empty());
    assert!(first.to_drop.is_empty());
    assert_eq!(first.to_create.len(), first.selected.len());
    assert!(first.recommended_cost_pages < first.baseline_cost_pages);
    let ddl = fs::read_to_string(ws.path("out/cycle-0001.sql")).unwrap();
    assert_eq!(ddl.lines().count(), first.selected.len());
    assert!(ddl.lines().all(|l| l.starts_with("CREATE BITMAP INDEX bji_sales_")));

    let status = ws.ok(&["status", "--budget", "64MB"]);
    assert!(status.contains("version 1"), "{status}");
    assert!(status.contains("transactions 30"), "{status}");

    let second = ws.recommend("q1.sql", &[]);
    assert_eq!(second.cycle, 2);
    assert!(second.to_create.is_empty() && second.to_drop.is_empty());
    assert!(second.emerged.is_empty() && second.declined.is_empty());
    assert_eq!(second.selected, first.selected);
    assert_eq!(fs::read_to_string(ws.path("out/cycle-0002.sql")).unwrap(), "");
}

#[test]
fn scenario_with_sliding_window() {
    let ws = Workspace::new();
    ws.ok(&["init", "--minsup", "0.05"]);
    let groups: Vec<_> = (0..3).map(planted_group).collect();
    for cycle in 1..=5u64 {
        let r = ws.recommend(&format!("q{cycle}.sql"), &["--retention-batches", "1"]);
        assert_eq!(r.queries, 30);
        for g in &groups {
            assert_eq!(r.emerged_sets().contains(g), cycle == 2, "cycle {cycle} emerged {g:?}");
            assert_eq!(r.declined_sets().contains(g), cycle == 5, "cycle {cycle} declined {g:?}");
        }
        assert!(r.recommended_cost_pages <= r.baseline_cost_pages);
        if cycle == 5 {
            assert!(groups.iter().any(|g| r.to_drop.iter().any(|i| &i.itemset == g)));
        }
    }

    let csv_path = ws.path("out/evaluation.csv");
    ws.ok(&["evaluate"]);
    let text = fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], dynidx_core::advisor::CSV_HEADER.join(","));
    assert_eq!(lines.len(), 6);
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    for (n, row) in reader.deserialize::<dynidx_core::CycleRecord>().enumerate() {
        let row = row.unwrap();
        assert_eq!(row.cycle, n as u64 + 1);
        assert!(row.recommended_cost_pages <= row.baseline_cost_pages);
    }

    ws.ok(&["evaluate"]);
    assert_eq!(fs::read_to_string(&csv_path).unwrap(), text);
}

#[test]
fn evaluate_appends_only_new_cycles() {
    let ws = Workspace::new();
    ws.ok(&["init"]);
    let err = ws.fails(&["evaluate"], 1);
    assert!(err.contains("no advisory cycle"), "{err}");

    ws.recommend("q1.sql", &[]);
    ws.ok(&["evaluate"]);
    let one = fs::read_to_string(ws.path("out/evaluation.csv")).unwrap();
    assert_eq!(one.lines().count(), 2);

    ws.recommend("q2.sql", &[]);
    ws.ok(&["evaluate"]);
    let two = fs::read_to_string(ws.path("out/evaluation.csv")).unwrap();
    assert!(two.starts_with(&one));
    assert_eq!(two.lines().count(), 3);
    assert!(two.lines().last().unwrap().starts_with("2,60,"));
}

#[test]
fn removed_ids_file_forgets_transactions() {
    let ws = Workspace::new();
    ws.ok(&["init"]);
    ws.recommend("q1.sql", &[]);
    let kb = KnowledgeBase::from_json(&fs::read_to_string(ws.path("kb.json")).unwrap()).unwrap();
    let ids: Vec<String> = kb.database.transactions().iter().map(|t| t.id.clone()).collect();
    assert!(ids.iter().all(|id| id.starts_with("c0001-q")));
    fs::write(ws.path("removed.txt"), format!("# expire cycle 1\n{}\nunknown-id\n", ids.join("\n"))).unwrap();
    let removed = ws.path("removed.txt").display().to_string();
    ws.recommend("q5.sql", &["--removed", &removed]);
    let kb = KnowledgeBase::from_json(&fs::read_to_string(ws.path("kb.json")).unwrap()).unwrap();
    assert_eq!(kb.database.len(), 30);
    assert!(kb.database.transactions().iter().all(|t| t.id.starts_with("c0002-")));
}

#[test]
fn corrupted_knowledge_base_names_the_invariant() {
    let ws = Workspace::new();
    ws.ok(&["init"]);
    ws.recommend("q1.sql", &[]);
    let text = fs::read_to_string(ws.path("kb.json")).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let support = &mut doc["maximal"][0]["support"];
    *support = serde_json::json!(support.as_u64().unwrap() + 1);
    fs::write(ws.path("kb.json"), serde_json::to_string(&doc).unwrap()).unwrap();
    let err = ws.fails(&["status"], 1);
    assert!(err.contains("invariant") && err.contains("support"), "{err}");

    let w = ws.path("q2.sql").display().to_string();
    ws.fails(&["recommend", &w, "--budget", "1MB"], 1);
}

#[test]
fn input_errors_exit_with_status_one() {
    let ws = Workspace::new();
    ws.fails(&["status"], 1);
    ws.fails(&["init", "--minsup", "0"], 1);
    ws.fails(&["init", "--minsup", "1.2"], 1);
    ws.ok(&["init"]);
    let w = ws.path("q1.sql").display().to_string();
    let err = ws.fails(&["recommend", &w], 1);
    assert!(err.contains("--budget"), "{err}");
    ws.fails(&["recommend", &w, "--budget", "ten"], 1);
    ws.fails(&["recommend", &ws.path("missing.sql").display().to_string(), "--budget", "1MB"], 1);
    let removed = ws.path("nope.txt").display().to_string();
    ws.fails(&["recommend", &w, "--budget", "1MB", "--removed", &removed], 1);
    let status = ws.ok(&["status"]);
    assert!(status.contains("version 0"), "{status}");
}

#[test]
fn lock_blocks_a_second_writer() {
    let ws = Workspace::new();
    ws.ok(&["init"]);
    fs::write(ws.path("kb.json.lock"), "1").unwrap();
    let w = ws.path("q1.sql").display().to_string();
    let err = ws.fails(&["recommend", &w, "--budget", "1MB"], 1);
    assert!(err.contains("another advisory cycle"), "{err}");
    ws.ok(&["status"]);
    fs::remove_file(ws.path("kb.json.lock")).unwrap();
    ws.recommend("q1.sql", &[]);
}

#[test]
fn zero_budget_selects_nothing() {
    let ws = Workspace::new();
    ws.ok(&["init"]);
    let w = ws.path("q1.sql").display().to_string();
    ws.ok(&["recommend", &w, "--budget", "0"]);
    let r = ws.report(1);
    assert!(r.selected.is_empty());
    assert_eq!(r.recommended_cost_pages, r.baseline_cost_pages);
}

#[test]
fn config_file_and_csv_report() {
    let ws = Workspace::new();
    let config = ws.path("advisor.json");
    fs::write(
        &config,
        serde_json::json!({
            "schema": ws.path("schema.json"),
            "kb": ws.path("other-kb.json"),
            "state": ws.path("other-state.json"),
            "out": ws.path("reports"),
            "minsup": 0.1,
            "budget": "32MB",
            "report_format": "csv",
        })
        .to_string(),
    )
    .unwrap();
    let c = config.display().to_string();
    let run = |args: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_dynidx")).arg("--config").arg(&c).args(args).output().unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    run(&["init"]);
    run(&["recommend", &ws.path("q2.sql").display().to_string()]);
    let kb = KnowledgeBase::from_json(&fs::read_to_string(ws.path("other-kb.json")).unwrap()).unwrap();
    assert_eq!(kb.parameters.minsup_f64(), 0.1);
    let report = fs::read_to_string(ws.path("reports/cycle-0001.csv")).unwrap();
    assert!(report.starts_with("section,name,attributes,support,size_bytes,feasible\n"));
    assert!(report.lines().any(|l| l.starts_with("create,bji_sales_")));

    let status: serde_json::Value = serde_json::from_str(&run(&["status", "--report-format", "json"])).unwrap();
    assert_eq!(status["kb_version"], 1);
    assert_eq!(status["transactions"], 30);
    assert_eq!(status["budget_bytes"], 32 << 20);
    assert!(status["configuration_bytes"].as_u64().unwrap() <= 32 << 20);
}

#[test]
fn changing_minsup_remines_stored_transactions() {
    let ws = Workspace::new();
    ws.ok(&["init", "--minsup", "0.5"]);
    let first = ws.recommend("q2.sql", &[]);
    assert!(first.selected.is_empty());
    let second = ws.recommend("q2.sql", &["--minsup", "0.05"]);
    assert!(!second.selected.is_empty());
    let kb = KnowledgeBase::from_json(&fs::read_to_string(ws.path("kb.json")).unwrap()).unwrap();
    assert_eq!(kb.parameters.minsup_f64(), 0.05);
    assert_eq!(kb.maximal, dynidx_core::mine_maximal(&kb.database, &kb.parameters));
}
