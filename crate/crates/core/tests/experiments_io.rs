use std::collections::BTreeMap;

use fmclp::experiments::{
    gap_bucket, gen_instance, grid_instance, instance_to_csv, parse_instance, read_results, run_grid,
    summarize, write_results, write_summary, GridConfig, LoadOptions, ResultRow, RESULT_COLUMNS,
};
use fmclp::solver::Space;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const GEN_45_SEED_7: &str = "65d7d863f03c84df8104869414aaf283b967b217d3f7393b314a6e7d143a8e17";

fn desk_config() -> GridConfig {
    GridConfig::from_toml("n_values = [10]\np_values = [2, 3]\nR_values = [0.15]\nseed = 3\n").unwrap()
}

#[test]
fn generated_instances_are_reproducible() {
    let a = instance_to_csv(&gen_instance(45, 2, 7).unwrap());
    let b = instance_to_csv(&gen_instance(45, 2, 7).unwrap());
    assert_eq!(a, b);
    let hex: String = Sha256::digest(a.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(hex, GEN_45_SEED_7);
    assert_ne!(a, instance_to_csv(&gen_instance(45, 2, 8).unwrap()));

    let f = gen_instance(200, 3, 1).unwrap();
    assert!(f.instance.weights.iter().all(|&w| w > 0.0 && w < 1.0));
    assert!(f.instance.points.iter().all(|p| p.coords().iter().all(|c| (0.0..1.0).contains(c))));
    assert!(gen_instance(0, 2, 1).is_err());
}

#[test]
fn csv_round_trip_and_normalisation() {
    let f = gen_instance(30, 2, 11).unwrap();
    let back = parse_instance(&instance_to_csv(&f), "other", &LoadOptions::default()).unwrap();
    assert_eq!(back, f);

    let raw = "x,y,w\n-2,10,1\n3,20,2\n0.5,15,3\n";
    let opts = LoadOptions {
        normalize: true,
        ..Default::default()
    };
    let g = parse_instance(raw, "raw", &opts).unwrap();
    let coords: Vec<Vec<f64>> = g.instance.points.iter().map(|p| p.coords().to_vec()).collect();
    assert_eq!(coords, vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.5, 0.5]]);
    let cut = parse_instance(raw, "raw", &LoadOptions { truncate: Some(2), ..Default::default() }).unwrap();
    assert_eq!(cut.instance.len(), 2);
}

#[test]
fn grid_cell_counting() {
    let full = GridConfig::from_toml(
        "n_values = [10, 20, 30, 45]\np_values = [2, 3, 4, 5]\nR_values = [0.1, 0.2]\nspaces = [\"disc\"]\n",
    )
    .unwrap();
    assert_eq!(full.cells().unwrap().len(), 21);
    assert_eq!(full.combinations().len(), 32);
    assert_eq!(full.row_count().unwrap(), 672);
    let both = GridConfig { spaces: vec![Space::Discrete, Space::Continuous], ..full };
    assert_eq!(both.row_count().unwrap(), 2 * 672);
    assert!(GridConfig::from_toml("n_values = []\np_values = [2]\nR_values = [0.1]\n").is_err());
    assert!(GridConfig::from_toml("n_values = [5]\np_values = [2]\nR_values = [0.1]\nbogus = 1\n").is_err());
}

#[test]
fn desk_grid_rows() {
    let config = desk_config();
    let base = grid_instance(&config).unwrap();
    let (rows, meta) = run_grid(&config, &base.instance).unwrap();
    assert_eq!(rows.len(), 84);
    assert_eq!(meta.rows, 84);
    assert_eq!(meta.seed, 3);
    assert_eq!(meta.instance_hash, base.instance.content_hash());

    let mut per_combo: BTreeMap<(usize, Space), usize> = BTreeMap::new();
    for r in &rows {
        assert_eq!(r.error, "", "{r:?}");
        assert_eq!(r.n, 10);
        if r.family == "C" {
            assert_eq!(r.alpha.to_string(), "0");
            *per_combo.entry((r.p, r.space)).or_default() += 1;
        }
        if r.family == "W" && r.alpha.to_string() == "0" {
            assert!(r.pof.unwrap().abs() <= 1e-12);
        }
    }
    assert_eq!(per_combo.len(), 4);
    assert!(per_combo.values().all(|&c| c == 1));

    let summary = summarize(&rows);
    for g in &summary.gaps {
        assert_eq!(g.rows, 21);
        assert!((g.gap0 + g.gap1 + g.gap5 + g.gap_plus - 100.0).abs() < 1e-9);
    }
    for m in summary.by_family.iter().filter(|m| m.family == "W" && m.alpha.to_string() == "0") {
        assert!(m.pof.unwrap().abs() <= 1e-12);
    }

    let mut buf = Vec::new();
    write_results(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), RESULT_COLUMNS.join(","));
    let back = read_results(text.as_bytes()).unwrap();
    assert_eq!(back, rows);

    let mut shuffled = rows.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
    assert_eq!(summarize(&shuffled), summary);

    let dir = tempfile::tempdir().unwrap();
    let files = write_summary(&summary, dir.path()).unwrap();
    assert_eq!(files.len(), 4);
    let gaps = std::fs::read_to_string(dir.path().join("gaps.csv")).unwrap();
    assert_eq!(gaps.lines().next().unwrap(), "n,p,space,rows,GAP0,GAP1,GAP5,GAP+");
}

fn row(gap: Option<f64>, status: &str) -> ResultRow {
    ResultRow {
        instance: "t".into(),
        n: 5,
        p: 2,
        r: 0.1,
        space: Space::Discrete,
        family: "W".into(),
        alpha: "0".parse().unwrap(),
        status: status.into(),
        objective: None,
        coverage_pct: None,
        coverage: vec![],
        pof: Some(0.0),
        poe: Some(0.5),
        gini: Some(0.25),
        cpu_seconds: 0.0,
        gap,
        error: String::new(),
    }
}

#[test]
fn gap_buckets() {
    let all: Vec<ResultRow> = (0..5).map(|_| row(Some(0.0), "optimal")).collect();
    let s = summarize(&all);
    assert_eq!(s.gaps.len(), 1);
    assert_eq!(s.gaps[0].gap0, 100.0);
    assert_eq!(gap_bucket(&row(Some(0.03), "feasible")), 2);
    assert_eq!(gap_bucket(&row(Some(0.01), "feasible")), 1);
    assert_eq!(gap_bucket(&row(Some(0.2), "feasible")), 3);
    assert_eq!(gap_bucket(&row(None, "error")), 3);

    let mixed = vec![row(Some(0.0), "optimal"), row(Some(0.03), "feasible"), row(None, "error"), row(Some(0.5), "feasible")];
    let s = summarize(&mixed);
    assert_eq!((s.gaps[0].gap0, s.gaps[0].gap5, s.gaps[0].gap_plus), (25.0, 25.0, 50.0));
    assert_eq!(s.by_family[0].rows, 2);
    assert_eq!(s.by_family[0].gini, Some(0.25));
}

#[test]
fn empty_coverage_column_round_trips() {
    let rows = vec![row(None, "error"), ResultRow { coverage: vec![0.5, 1.25], ..row(Some(0.0), "optimal") }];
    let mut buf = Vec::new();
    write_results(&rows, &mut buf).unwrap();
    assert_eq!(read_results(buf.as_slice()).unwrap(), rows);
    assert!(read_results("instance,n\nx,1\n".as_bytes()).is_err());
}
