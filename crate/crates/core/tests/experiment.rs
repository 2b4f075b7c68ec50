mod common;

use std::fs;

use promptfuse::experiment::{
    read_metrics, run_config, run_experiment, write_outputs, Shots, Task, SWEEP_LENGTHS,
};
use promptfuse::fusion::FusionMethod;

fn saved_pretrained(dir: &std::path::Path) {
    common::tiny_pretrained(16, 1).save(dir).unwrap();
}

#[test]
fn identical_configs_give_byte_identical_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let pre = tmp.path().join("pre");
    saved_pretrained(&pre);
    let mut cfg = common::tiny_config(16, &pre);
    cfg.methods = vec![
        FusionMethod::PromptFuse,
        FusionMethod::Linear,
        FusionMethod::NoPrompt,
    ];
    cfg.seeds = vec![0, 1];
    let path = tmp.path().join("exp.toml");
    fs::write(&path, cfg.to_toml()).unwrap();
    let read = |name: &str| {
        let out = tmp.path().join(name);
        run_experiment(&path, &out).unwrap();
        let files = [
            "metrics.jsonl",
            "metrics.summary.txt",
            "shots.jsonl",
            "config.toml",
        ];
        files.map(|f| fs::read(out.join(f)).unwrap())
    };
    assert_eq!(read("a"), read("b"));
    let ckpt = |name: &str| {
        fs::read(
            tmp.path()
                .join(name)
                .join("checkpoints/vqa2mod-PromptFuse-k8-n20-s1.pfck"),
        )
        .unwrap()
    };
    assert_eq!(ckpt("a"), ckpt("b"));
}

#[test]
fn seeds_give_one_run_each_and_an_aggregate() {
    let p = common::tiny_pretrained(16, 1);
    let mut cfg = common::tiny_config(16, std::path::Path::new("unused"));
    cfg.seeds = vec![0, 1, 2];
    let out = run_config(&cfg, &p).unwrap();
    let ids: Vec<&str> = out.runs.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(
        ids,
        [
            "vqa2mod-PromptFuse-k8-n20-s0",
            "vqa2mod-PromptFuse-k8-n20-s1",
            "vqa2mod-PromptFuse-k8-n20-s2"
        ]
    );
    // two epochs per run, evaluation on the last
    assert_eq!(out.records.len(), 6);
    assert_eq!(out.records.iter().filter(|r| r.eval.is_some()).count(), 3);

    let tmp = tempfile::tempdir().unwrap();
    let rows = write_outputs(&out, &cfg, tmp.path()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].runs, 3);
    let overall: Vec<f64> = out
        .runs
        .iter()
        .map(|r| r.records.last().unwrap().eval.unwrap().headline())
        .collect();
    let mean = overall.iter().sum::<f64>() / 3.0;
    assert!((rows[0].column("Overall").unwrap().mean - mean).abs() < 1e-12);
    assert_eq!(
        read_metrics(&tmp.path().join("metrics.jsonl")).unwrap(),
        out.records
    );
    for id in ids {
        assert!(tmp
            .path()
            .join("checkpoints")
            .join(format!("{id}.pfck"))
            .exists());
    }
}

#[test]
fn sweep_produces_the_prompt_length_grid() {
    let p = common::tiny_pretrained(16, 1);
    let mut cfg = common::tiny_config(16, std::path::Path::new("unused"));
    cfg.sweep = true;
    cfg.train.epochs = 1;
    cfg.methods = vec![FusionMethod::PromptFuse, FusionMethod::NoPrompt];
    let out = run_config(&cfg, &p).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let rows = write_outputs(&out, &cfg, tmp.path()).unwrap();
    let lengths: Vec<usize> = rows
        .iter()
        .filter(|r| r.method == FusionMethod::PromptFuse)
        .map(|r| r.prompt_length)
        .collect();
    assert_eq!(lengths, SWEEP_LENGTHS);
    let grid = fs::read_to_string(tmp.path().join("sweep.txt")).unwrap();
    let header: Vec<&str> = grid.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(
        header[2..],
        ["N=5", "N=10", "N=20", "N=40", "N=60", "N=80", "N=100"]
    );
    let prompt_row = grid.lines().nth(1).unwrap();
    assert!(prompt_row.starts_with("PromptFuse"));
    assert_eq!(prompt_row.matches('±').count(), 7);

    let again = run_config(&cfg, &p).unwrap();
    assert_eq!(again.records, out.records);
}

#[test]
fn trimodal_runs_report_f_scores() {
    let p = common::tiny_pretrained(16, 1);
    let mut cfg = common::tiny_config(16, std::path::Path::new("unused"));
    cfg.task = Task::Trimodal;
    cfg.methods = vec![FusionMethod::BlindPrompt];
    cfg.shots = vec![Shots::Count(6)];
    let out = run_config(&cfg, &p).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let rows = write_outputs(&out, &cfg, tmp.path()).unwrap();
    let names: Vec<&str> = rows[0].columns.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["Precision", "Recall", "F-Score"]);
    assert!(out.runs[0].id.starts_with("trimodal-BlindPrompt-k6"));
}

#[test]
fn failures_have_distinct_categories() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("exp.toml");

    let cfg = common::tiny_config(16, &tmp.path().join("absent"));
    fs::write(&cfg_path, cfg.to_toml()).unwrap();
    let missing = run_experiment(&cfg_path, &tmp.path().join("out")).unwrap_err();

    fs::write(&cfg_path, "bogus_key = 1\n").unwrap();
    let bad = run_experiment(&cfg_path, &tmp.path().join("out")).unwrap_err();

    let mut cfg = common::tiny_config(16, std::path::Path::new("unused"));
    cfg.shots = vec![Shots::Count(1000)];
    let infeasible = run_config(&cfg, &common::tiny_pretrained(16, 1))
        .err()
        .unwrap();

    let io = run_experiment(&tmp.path().join("nope.toml"), tmp.path()).unwrap_err();

    let pre = tmp.path().join("pre");
    common::tiny_pretrained(32, 1).save(&pre).unwrap();
    fs::write(&cfg_path, common::tiny_config(16, &pre).to_toml()).unwrap();
    let fingerprint = run_experiment(&cfg_path, &tmp.path().join("out")).unwrap_err();

    let cats = [missing, bad, infeasible, io, fingerprint].map(|e| e.category());
    assert_eq!(
        cats,
        [
            "missing-checkpoint",
            "config",
            "infeasible-shots",
            "io",
            "fingerprint"
        ]
    );
}
