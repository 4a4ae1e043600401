use std::fs;
use std::path::Path;

use kato_lab::diagnostics::kato_dissipation;
use kato_lab::error::Error;
use kato_lab::foliation::LayerMode;
use kato_lab::harness::{check, resume, run_ladder, store, ExperimentConfig, LADDER_FILE, REPORT_FILE};

fn small(out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::from_toml(
        r#"
viscosities = [2e-2, 1e-2, 5e-3]
[solver]
t_end = 0.1
snapshot_every = 2
[grid]
nx = 16
max_spacing = 0.05
"#,
    )
    .unwrap();
    c.output = out.to_path_buf();
    c
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn ladder_writes_consistent_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(dir.path());
    let r = run_ladder(&c).unwrap();
    assert_eq!(r.rows.len(), 3);
    assert_eq!(r.recomputed.len(), 3);
    assert!(r.failures.is_empty());
    assert!(r.rows[0].next.is_some() && r.rows[1].next.is_some() && r.rows[2].next.is_none());
    assert!(r.flags.all_runs_succeeded && r.flags.energy_inequality && r.flags.balance_closes);
    let ladder = read(&dir.path().join(LADDER_FILE));
    assert!(ladder.starts_with(&format!("# manifest_hash={}\n", r.manifest_hash)));
    assert_eq!(ladder.lines().count(), 2 + 3);
    let run_csv = read(&store::run_dir(dir.path(), 1).join(store::RUN_FILE));
    assert!(run_csv.starts_with(&format!("# manifest_hash={}\n", r.manifest_hash)));
    let chk = check(dir.path()).unwrap();
    assert!(chk.consistent(), "{:?}", chk.violations);
    assert_eq!(chk.flags, Some(r.flags));
}

#[test]
fn single_viscosity_ladder_has_no_pairwise_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(dir.path());
    c.viscosities = vec![1e-2];
    let r = run_ladder(&c).unwrap();
    assert_eq!(r.rows.len(), 1);
    assert!(r.rows[0].next.is_none());
    assert_eq!(r.flags.kato_decreasing, None);
    assert_eq!(r.trends.kato_slope, None);
    assert!(r.flags.passed());
}

#[test]
fn resume_is_idempotent_and_recomputes_only_damaged_runs() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(dir.path());
    let first = run_ladder(&c).unwrap();
    let ladder = read(&dir.path().join(LADDER_FILE));
    let report = read(&dir.path().join(REPORT_FILE));

    let again = resume(dir.path()).unwrap();
    assert!(again.recomputed.is_empty());
    assert_eq!(again, ExperimentReport { recomputed: vec![], ..first.clone() });
    assert_eq!(read(&dir.path().join(LADDER_FILE)), ladder);
    assert_eq!(read(&dir.path().join(REPORT_FILE)), report);

    let rd = store::run_dir(dir.path(), 1);
    let summary = store::load_summary(&rd).unwrap();
    fs::remove_file(rd.join(store::SNAPSHOT_DIR).join(summary.snapshot_files.last().unwrap())).unwrap();
    let fixed = resume(dir.path()).unwrap();
    assert_eq!(fixed.recomputed, vec![1e-2]);
    assert_eq!(read(&dir.path().join(LADDER_FILE)), ladder);
    assert_eq!(read(&dir.path().join(REPORT_FILE)), report);

    let mut via_run = c.clone();
    via_run.resume = true;
    assert!(run_ladder(&via_run).unwrap().recomputed.is_empty());
}

use kato_lab::harness::ExperimentReport;

#[test]
fn changed_config_is_refused_with_a_field_diff() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(dir.path());
    run_ladder(&c).unwrap();
    let mut changed = c.clone();
    changed.resume = true;
    changed.solver.t_end = 0.2;
    changed.alpha = 0.5;
    match run_ladder(&changed) {
        Err(Error::ManifestMismatch(diff)) => {
            assert!(diff.contains("solver.t_end: 0.1 -> 0.2"), "{diff}");
            assert!(diff.contains("alpha: 0.4 -> 0.5"), "{diff}");
        }
        other => panic!("expected a manifest mismatch, got {other:?}"),
    }
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut ca = small(a.path());
    ca.workers = 1;
    let mut cb = small(b.path());
    cb.workers = 3;
    run_ladder(&ca).unwrap();
    run_ladder(&cb).unwrap();
    for f in [LADDER_FILE, REPORT_FILE] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f}");
    }
    for k in 0..3 {
        for f in [store::LEDGER_FILE, store::RUN_FILE, store::DIAGNOSTICS_FILE] {
            let pa = store::run_dir(a.path(), k).join(f);
            let pb = store::run_dir(b.path(), k).join(f);
            assert_eq!(read(&pa), read(&pb), "{}", pa.display());
        }
    }
}

#[test]
fn check_flags_tampered_outputs() {
    let dir = tempfile::tempdir().unwrap();
    run_ladder(&small(dir.path())).unwrap();
    let p = dir.path().join(LADDER_FILE);
    let text = read(&p);
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[2] = lines[2].replacen("2e-2", "3e-2", 1);
    fs::write(&p, lines.join("\n") + "\n").unwrap();
    let chk = check(dir.path()).unwrap();
    assert!(!chk.consistent());
    assert!(chk.violations.iter().any(|v| v.contains(LADDER_FILE)), "{:?}", chk.violations);

    let rd = store::run_dir(dir.path(), 0);
    fs::remove_file(rd.join(store::RUN_FILE)).unwrap();
    let chk = check(dir.path()).unwrap();
    assert!(chk.violations.iter().any(|v| v.contains("missing run.csv")), "{:?}", chk.violations);
}

#[test]
fn smooth_layer_mode_measures_the_thinner_strip() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(dir.path());
    c.mode = kato_lab::harness::ModeKind::Smooth;
    c.alpha = 0.75;
    c.a = Some(1.5);
    c.p = Some(5.0);
    c.viscosities = vec![2e-2, 1e-2];
    let exp = c.resolve().unwrap();
    let r = run_ladder(&c).unwrap();
    assert!(r.failures.is_empty(), "{:?}", r.failures);
    let rd = store::run_dir(dir.path(), 1);
    let s = store::load_summary(&rd).unwrap();
    let traj = store::load_trajectory(&rd, &s, &exp.solver_config(1e-2)).unwrap();
    let thin = kato_dissipation(&traj, 4.0, LayerMode::SmoothLayer { a: 1.5 }).unwrap();
    assert_eq!(r.rows[1].kato_total, thin);
    let kato = kato_dissipation(&traj, 4.0, LayerMode::KatoLayer).unwrap();
    assert!(thin < kato);
}
