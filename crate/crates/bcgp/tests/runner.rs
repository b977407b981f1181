use std::collections::BTreeMap;
use std::path::Path;

use bcgp::config::ExperimentConfig;
use bcgp::formats::read_metrics_csv;
use bcgp::runner::{run_scenarios, Experiment};

fn quick_config(scenarios: &str) -> ExperimentConfig {
    let text = format!(
        r#"
        m = 24
        seed = 5

        [qpso]
        swarm = 6
        iters = 4

        {scenarios}
        "#
    );
    ExperimentConfig::parse(&text, false).unwrap()
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in walk(dir) {
        out.insert(entry.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&entry).unwrap());
    }
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            files.extend(walk(&path));
        } else {
            files.push(path);
        }
    }
    files
}

#[test]
fn two_spacings_two_pairs_give_eight_rows_and_rerun_identically() {
    let config = quick_config(
        r#"
        [[scenario]]
        spacing_mm = 40.0
        boundary_mode = "no_boundary"
        pairs = [1, 15]

        [[scenario]]
        spacing_mm = 60.0
        boundary_mode = "inline_with_grid"
        pairs = [1, 15]
        "#,
    );
    let exp = Experiment::prepare(config.clone(), None).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let outcomes = run_scenarios(&exp, a.path()).unwrap();
    assert_eq!(outcomes.len(), 2);
    assert_ne!(outcomes[0].id, outcomes[1].id);

    let rows = read_metrics_csv(&a.path().join("metrics.csv")).unwrap();
    assert_eq!(rows.len(), 8);
    for o in &outcomes {
        let dir = a.path().join(&o.id);
        assert_eq!(read_metrics_csv(&dir.join("metrics.csv")).unwrap().len(), 4);
        for pair in [1, 15] {
            let text = std::fs::read_to_string(dir.join(format!("pair-{pair}-sqerr-diff.csv"))).unwrap();
            assert_eq!(text.lines().next().unwrap(), "x_mm,y_mm,sqerr_diff");
            assert_eq!(text.lines().count(), 1 + exp.mask.len());
        }
    }
    assert!(rows.iter().all(|r| r.n_test == exp.mask.len() && r.nmse.is_finite() && r.msll.is_finite()));

    let exp_again = Experiment::prepare(config.clone(), None).unwrap();
    run_scenarios(&exp_again, b.path()).unwrap();
    assert_eq!(read_tree(a.path()), read_tree(b.path()));
    assert_eq!(exp_again.config, config);

    // Another seed changes the scenario id.
    let mut reseeded = config;
    reseeded.seed = 6;
    let other = Experiment::prepare(reseeded, None).unwrap();
    let c = tempfile::tempdir().unwrap();
    let ids: Vec<String> = run_scenarios(&other, c.path()).unwrap().into_iter().map(|o| o.id).collect();
    assert!(!ids.contains(&outcomes[0].id));
}

#[test]
fn table_of_all_spacings_and_pairs_gives_504_rows() {
    let mut blocks = String::from(
        r#"
        [kernel]
        sigma_f2 = 1e-10
        lengthscale_mm = 60.0
        noise_var = 1e-16
        optimise = false
        "#,
    );
    for spacing in bcgp_core::synth::TABLE1_SPACINGS {
        blocks.push_str(&format!("\n[[scenario]]\nspacing_mm = {spacing:.1}\nboundary_mode = \"inline_with_grid\"\n"));
    }
    let exp = Experiment::prepare(quick_config(&blocks), None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run_scenarios(&exp, dir.path()).unwrap();
    let rows = read_metrics_csv(&dir.path().join("metrics.csv")).unwrap();
    assert_eq!(rows.len(), 9 * 28 * 2);
}
