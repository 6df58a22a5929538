use std::process::Command;

use strobe_bench::aggregate::format_table;
use strobe_bench::{aggregate, read_csv, render_2d, run_experiment, write_csv, Cell, ExperimentPlan};
use strobe_core::baselines::Scheme;
use strobe_core::optimize::Algorithm;
use strobe_core::path::FullPathVector;
use strobe_core::pods::split_path;
use strobe_core::scenarios::{initial_path, CircleGridField, ScenarioKind};

fn small_plan() -> ExperimentPlan {
    let cell = Cell {
        scenario: ScenarioKind::CircleGrid,
        waypoints: 20,
        scheme: Scheme::Strobe,
        optimizer: Algorithm::Lbfgs,
        workers: 2,
    };
    let mut plan = ExperimentPlan::single(cell, 3, 5);
    plan.settings.max_epochs = 20;
    plan
}

#[test]
fn one_cell_three_seeds() {
    let records = run_experiment(&small_plan(), |_| {});
    assert_eq!(records.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![5, 6, 7]);
    assert!(records.iter().all(|r| r.error.is_empty() && r.quality.is_finite()));
}

#[test]
fn repeated_plan_gives_identical_results() {
    let mut plan = small_plan();
    plan.schemes = vec![Scheme::Strobe, Scheme::SingleThread, Scheme::Gsgd, Scheme::Prr];
    plan.workers = vec![1];
    plan.settings.serialized_prr = true;
    let strip = |rs: Vec<strobe_bench::RunRecord>| {
        rs.into_iter()
            .map(|r| (r.cell(), r.seed, r.quality.to_bits(), r.final_objective.to_bits(), r.epochs, r.converged))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(run_experiment(&plan, |_| {})), strip(run_experiment(&plan, |_| {})));
}

#[test]
fn waypoint_scaling_plan_has_eight_cells() {
    let plan = ExperimentPlan::from_toml(
        r#"
scenarios = ["circle-grid"]
schemes = ["single", "strobe"]
workers = [4]
waypoints = [25, 50, 100, 200]
"#,
    )
    .unwrap();
    assert_eq!(plan.cells().len(), 8);
    assert_eq!(plan.repetitions, 20);
}

#[test]
fn cells_sharing_scenario_and_length_share_starts() {
    let mut plan = small_plan();
    plan.schemes = vec![Scheme::Strobe, Scheme::Gsgd];
    plan.workers = vec![1, 4];
    plan.optimizers = vec![Algorithm::Lbfgs, Algorithm::NelderMead];
    let cells = plan.cells();
    for seed in plan.seeds() {
        let first = initial_path(&plan.spec(&cells[0], seed)).unwrap();
        for cell in &cells[1..] {
            assert_eq!(initial_path(&plan.spec(cell, seed)).unwrap(), first);
        }
    }
}

#[test]
fn csv_round_trips_into_the_same_summary() {
    let records = run_experiment(&small_plan(), |_| {});
    let mut buf = Vec::new();
    write_csv(&mut buf, &records).unwrap();
    let back = read_csv(buf.as_slice()).unwrap();
    assert_eq!(back, records);
    let summary = aggregate(&back).unwrap();
    assert_eq!(summary.len(), 1);
    assert_eq!(summary[0].runs, 3);
    assert_eq!(summary, aggregate(&records).unwrap());
    assert!(format_table(&summary).contains("circle-grid"));
}

#[test]
fn svg_of_two_waypoints() {
    let path = FullPathVector::new(2, vec![vec![0.1, 0.2], vec![0.8, 0.9]]).unwrap();
    let svg = render_2d(&path, &CircleGridField::default(), None).unwrap();
    assert_eq!(svg.matches(r#"class="waypoint""#).count(), 2);
    assert_eq!(svg.matches("<polyline").count(), 1);
    let points = svg.split(r#"points=""#).nth(1).unwrap().split('"').next().unwrap();
    assert_eq!(points.split(' ').count(), 2);
    assert_eq!(svg, render_2d(&path, &CircleGridField::default(), None).unwrap());
}

#[test]
fn svg_groups_follow_pods() {
    let path = FullPathVector::new(2, (0..100).map(|i| vec![i as f64 / 99.0, 0.5]).collect()).unwrap();
    let partition = split_path(100, 12, 2).unwrap();
    let svg = render_2d(&path, &CircleGridField::default(), Some(&partition)).unwrap();
    let colors: Vec<&str> = svg
        .split(r#"data-color=""#)
        .skip(1)
        .map(|s| s.split('"').next().unwrap())
        .collect();
    assert_eq!(colors.len(), 24);
    assert!(colors.iter().enumerate().all(|(i, c)| *c == if i % 2 == 0 { "B" } else { "R" }));
    assert_eq!(svg.matches(r#"class="waypoint""#).count(), 100);
}

#[test]
fn svg_rejects_non_planar_paths() {
    let path = FullPathVector::new(3, vec![vec![0.0; 3]; 2]).unwrap();
    assert!(render_2d(&path, &CircleGridField::default(), None).is_err());
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_strobe"))
}

#[test]
fn cli_split_prints_partition() {
    let out = cli().args(["split", "--waypoints", "5", "--workers", "4", "--ell", "2"]).output().unwrap();
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap().trim(),
        r#"[{"start":0,"end":2,"color":"B"},{"start":3,"end":4,"color":"R"}]"#
    );
}

#[test]
fn cli_run_writes_outputs_and_rejects_bad_plans() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.toml");
    std::fs::write(
        &plan,
        r#"
scenarios = ["circle-grid"]
schemes = ["strobe"]
workers = [2]
waypoints = [16]
repetitions = 2

[settings]
max_epochs = 10
"#,
    )
    .unwrap();
    let csv = dir.path().join("out.csv");
    let jsonl = dir.path().join("trace.jsonl");
    let status = cli()
        .arg("run")
        .arg(&plan)
        .arg("--out-csv")
        .arg(&csv)
        .arg("--out-jsonl")
        .arg(&jsonl)
        .args(["--optimizer", "l-bfgs"])
        .status()
        .unwrap();
    assert!(status.success());
    let records = read_csv(std::fs::File::open(&csv).unwrap()).unwrap();
    assert_eq!(records.len(), 2);
    assert!(records.iter().all(|r| r.optimizer == Algorithm::Lbfgs));
    let traces = std::fs::read_to_string(&jsonl).unwrap();
    let first: serde_json::Value = serde_json::from_str(traces.lines().next().unwrap()).unwrap();
    assert_eq!(first["epoch"], 1);
    assert_eq!(first["scheme"], "strobe");

    std::fs::write(&plan, "schemes = [\"warp\"]").unwrap();
    assert!(!cli().arg("run").arg(&plan).status().unwrap().success());
}

#[test]
fn cli_render_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    std::fs::write(&path, r#"{"n":2,"waypoints":[[0.1,0.1],[0.5,0.4],[0.9,0.9]],"frozen":[0,2]}"#).unwrap();
    let field = dir.path().join("f.toml");
    std::fs::write(&field, "centers = [[0.5, 0.5]]\nradius = 0.1\nfalloff = 0.2\n").unwrap();
    let out = dir.path().join("o.svg");
    let status = cli()
        .args(["render", "--path"])
        .arg(&path)
        .arg("--field")
        .arg(&field)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let svg = std::fs::read_to_string(out).unwrap();
    assert_eq!(svg.matches(r#"class="waypoint""#).count(), 3);
    assert_eq!(svg.matches("fill-opacity").count(), 2);
}
