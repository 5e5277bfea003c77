use std::path::Path;

use neurometa_core::dataset::{self, Dataset};
use neurometa_core::harness::{self, CellOutcome, ExperimentSpec, Method, ModelEntry, RunReport, SweepPlan};
use neurometa_core::metaheuristics::Algorithm;
use neurometa_core::metrics::reports_from_csv;

fn data() -> Dataset {
    dataset::load_csv(Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/ENB2012_data.csv"))).unwrap()
}

fn small_plan(algorithms: Vec<Algorithm>, sizes: Vec<usize>, seeds: Vec<u64>) -> SweepPlan {
    SweepPlan {
        algorithms,
        population_sizes: sizes,
        iterations: 4,
        seeds,
        ..SweepPlan::default()
    }
}

fn strip_times(report: &mut harness::SweepReport) {
    for c in &mut report.cells {
        if let CellOutcome::Done(s) = &mut c.outcome {
            s.wall_time = 0.0;
        }
    }
}

#[test]
fn experiment_uses_canonical_split_and_replays() {
    let data = data();
    let spec = ExperimentSpec::new(Method::Meta(Algorithm::Iwo), 6, 5, 2);
    let a = harness::run_experiment(&data, &spec).unwrap();
    let b = harness::run_experiment(&data, &spec).unwrap();
    assert_eq!(a.train.n, 538);
    assert_eq!(a.test.n, 230);
    assert!(a.result.same_outcome(&b.result));
    assert_eq!(a.model.to_json(), b.model.to_json());
    assert!(a.result.wall_time > 0.0);

    let prep = harness::prepare(&data, spec.train_fraction, spec.split_seed).unwrap();
    let entry = ModelEntry {
        name: Method::Meta(Algorithm::Iwo).label(),
        model: a.model,
        train: a.train,
        test: a.test,
        result: a.result,
    };
    let report = RunReport::new(&data, &prep, vec![entry]).unwrap();
    assert!(report.rank.is_none());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    harness::write_json(&path, &report).unwrap();
    let back: RunReport = harness::read_json(&path).unwrap();
    back.verify(&data, harness::REPLAY_TOLERANCE).unwrap();
}

#[test]
fn lm_experiment_runs_through_the_same_path() {
    let data = data();
    let spec = ExperimentSpec::new(Method::Lm, 1, 5, 1);
    let e = harness::run_experiment(&data, &spec).unwrap();
    assert_eq!(e.result.curve.len(), e.result.curve.0.len());
    assert!(e.result.curve.len() <= 5);
    assert!(e.test.r2.is_finite());
}

#[test]
fn scaler_ignores_test_rows() {
    let data = data();
    let a = harness::prepare(&data, 0.7, dataset::DEFAULT_SPLIT_SEED).unwrap();
    let mut changed = data.clone();
    for &i in &a.split.test_indices {
        changed.samples[i].heating_load += 1000.0;
        changed.samples[i].overall_height *= 3.0;
    }
    let b = harness::prepare(&changed, 0.7, dataset::DEFAULT_SPLIT_SEED).unwrap();
    assert_eq!(a.scaler, b.scaler);
    assert_eq!(a.train_set, b.train_set);
}

#[test]
fn sweep_two_sizes_one_best() {
    let data = data();
    let plan = small_plan(vec![Algorithm::Es], vec![4, 6], vec![1]);
    let r = harness::run_sweep(&plan, &data, None, 1).unwrap();
    assert_eq!(r.cells.len(), 2);
    assert_eq!(r.best_sizes.len(), 1);
    assert!([4, 6].contains(&r.best_sizes[0].population_size));
    assert_eq!(r.best_sizes[0].published, 500);
}

#[test]
fn sweep_resumes_from_cell_files() {
    let data = data();
    let plan = small_plan(vec![Algorithm::Bbo, Algorithm::Lca], vec![3, 5], vec![1, 2]);
    let dir = tempfile::tempdir().unwrap();
    let mut full = harness::run_sweep(&plan, &data, Some(dir.path()), 1).unwrap();

    // interrupt: lose two finished cells and mark a kept one so reuse is visible
    let ids: Vec<String> = full.cells.iter().map(|c| c.id.clone()).collect();
    std::fs::remove_file(harness::cell_path(dir.path(), &ids[0])).unwrap();
    std::fs::remove_file(harness::cell_path(dir.path(), &ids[5])).unwrap();
    std::fs::remove_file(dir.path().join("sweep.json")).unwrap();
    let kept = harness::cell_path(dir.path(), &ids[3]);
    let mut rec: harness::CellRecord = harness::read_json(&kept).unwrap();
    if let CellOutcome::Done(s) = &mut rec.outcome {
        s.wall_time = 12345.0;
    }
    harness::write_json(&kept, &rec).unwrap();

    let mut resumed = harness::run_sweep(&plan, &data, Some(dir.path()), 2).unwrap();
    assert_eq!(resumed.cells[3].summary().unwrap().wall_time, 12345.0);
    let on_disk: harness::SweepReport = harness::read_json(&dir.path().join("sweep.json")).unwrap();
    assert_eq!(on_disk, resumed);

    strip_times(&mut full);
    strip_times(&mut resumed);
    assert_eq!(full, resumed);
}

#[test]
fn changed_plan_does_not_reuse_cells() {
    let data = data();
    let plan = small_plan(vec![Algorithm::Iwo], vec![4], vec![1]);
    let mut other = plan.clone();
    other.iterations += 1;
    let key = plan.cells()[0];
    assert_ne!(key.id(&plan, data.checksum()), key.id(&other, data.checksum()));
    assert_eq!(key.id(&plan, data.checksum()), key.id(&plan.clone(), data.checksum()));
}

#[test]
fn failed_cells_are_recorded_and_sweep_continues() {
    let data = data();
    // a population of one is rejected by every algorithm
    let plan = small_plan(vec![Algorithm::Da], vec![1, 4], vec![1]);
    let r = harness::run_sweep(&plan, &data, None, 1).unwrap();
    assert!(matches!(r.cells[0].outcome, CellOutcome::Failed { .. }));
    assert!(r.cells[1].summary().is_some());
    assert_eq!(r.best_sizes[0].population_size, 4);
}

#[test]
fn plan_round_trips_through_toml() {
    let plan = small_plan(vec![Algorithm::Alo, Algorithm::Iwo], vec![25, 50], vec![3]);
    let back = SweepPlan::from_toml(&plan.to_toml()).unwrap();
    assert_eq!(plan, back);
    assert!(SweepPlan::from_toml("iterations = 5\nbogus = 1\n").is_err());
    let defaults = SweepPlan::from_toml("").unwrap();
    assert_eq!(defaults.cells().len(), 6 * 11 * 5);
}

#[test]
fn timing_rows_and_evaluation_growth() {
    let data = data();
    let plan = SweepPlan {
        iterations: 2,
        ..small_plan(vec![Algorithm::Bbo, Algorithm::Iwo], vec![25, 500], vec![1])
    };
    let rows = harness::time_algorithms(&plan, &data, 1).unwrap();
    assert_eq!(rows.len(), 4);
    for a in [Algorithm::Bbo, Algorithm::Iwo] {
        let small = rows.iter().find(|r| r.algorithm == a && r.population_size == 25).unwrap();
        let big = rows.iter().find(|r| r.algorithm == a && r.population_size == 500).unwrap();
        assert!(small.median_wall_time.unwrap() > 0.0);
        assert!(big.median_evaluations.unwrap() > small.median_evaluations.unwrap(), "{a}");
    }
    let csv = harness::timing_csv(&rows);
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn ranking_is_order_independent() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/metrics_table.csv")).unwrap();
    let reports = reports_from_csv(&text).unwrap();
    let (table, _) = harness::rank_models(&reports).unwrap();
    let mut reversed = reports.clone();
    reversed.reverse();
    reversed.rotate_left(2);
    let (other, _) = harness::rank_models(&reversed).unwrap();
    for row in &table.rows {
        assert_eq!(Some(row), other.row(&row.model));
    }
    assert!(harness::rank_models(&reports[..1]).is_err());
}

#[test]
fn shipped_config_files_parse() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    let plan = SweepPlan::from_toml(&std::fs::read_to_string(format!("{dir}/quick.toml")).unwrap()).unwrap();
    assert_eq!(plan.cells().len(), 3 * 3 * 3);
    let knobs = neurometa_core::metaheuristics::Knobs::from_toml(&std::fs::read_to_string(format!("{dir}/knobs.toml")).unwrap()).unwrap();
    assert_eq!(knobs, Default::default());
}
