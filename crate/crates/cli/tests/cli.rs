//! Behavioral tests for the command-line interface: exit codes, defaults,
//! and per-subcommand contracts.

mod common;

use common::{bin, exit_code, run, stdout, write_fixture, write_ladder_records};

use attrkit::conformal::{ThresholdMethod, ThresholdTable};
use attrkit::records::{PromptDumpRecord, PromptKind};

#[test]
fn dict_validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = write_fixture(dir.path(), 2, 1);
    let ok = run(&["dict", "--dict", fixture.dict.to_str().unwrap()]);
    assert_eq!(exit_code(&ok), 0);
    assert!(stdout(&ok).contains("dictionary OK"));

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(
        &bad,
        "{\"category\":\"Plane\",\"dimensions\":[{\"key\":\"k\",\"values\":[\"Jet\",\"Jet\"]}]}\n",
    )
    .unwrap();
    let invalid = run(&["dict", "--dict", bad.to_str().unwrap()]);
    assert_eq!(exit_code(&invalid), 1);
    assert!(stdout(&invalid).contains("duplicate primitive"));

    let missing = run(&["dict", "--dict", dir.path().join("nope.jsonl").to_str().unwrap()]);
    assert_eq!(exit_code(&missing), 2);

    let usage = run(&["dict"]);
    assert_eq!(exit_code(&usage), 2);
}

#[test]
fn prompts_are_deterministic_and_shaped() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = write_fixture(dir.path(), 6, 2);
    let out_a = dir.path().join("a.jsonl");
    let out_b = dir.path().join("b.jsonl");
    for out in [&out_a, &out_b] {
        let result = run(&[
            "prompts",
            "--dict",
            fixture.dict.to_str().unwrap(),
            "--instances",
            fixture.instances.to_str().unwrap(),
            "--output",
            out.to_str().unwrap(),
            "--seed",
            "9",
        ]);
        assert_eq!(exit_code(&result), 0);
    }
    let bytes_a = std::fs::read(&out_a).unwrap();
    assert_eq!(bytes_a, std::fs::read(&out_b).unwrap());

    // Different seed, different bytes.
    let out_c = dir.path().join("c.jsonl");
    run(&[
        "prompts",
        "--dict",
        fixture.dict.to_str().unwrap(),
        "--instances",
        fixture.instances.to_str().unwrap(),
        "--output",
        out_c.to_str().unwrap(),
        "--seed",
        "10",
    ]);
    assert_ne!(bytes_a, std::fs::read(&out_c).unwrap());

    // Shape: per instance one positive followed by k = 3 negatives.
    let text = String::from_utf8(bytes_a).unwrap();
    let records: Vec<PromptDumpRecord> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 6 * 4);
    for group in records.chunks(4) {
        assert_eq!(group[0].kind, PromptKind::Positive);
        assert_eq!(group[0].tokens[0], "Object");
        for negative in &group[1..] {
            assert!(matches!(
                negative.kind,
                PromptKind::Negative | PromptKind::Fallback
            ));
            // Serialized form always starts with the tag token.
            assert!(negative.serialized.starts_with(&negative.tokens[0]));
        }
    }
}

#[test]
fn prompts_for_unannotated_instances_fall_back_to_other_categories() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = write_fixture(dir.path(), 1, 3);
    let bare = dir.path().join("bare.jsonl");
    std::fs::write(
        &bare,
        "{\"instance_id\":\"lonely\",\"category\":\"Object\",\"attributes\":{}}\n",
    )
    .unwrap();
    let out = dir.path().join("out.jsonl");
    let result = run(&[
        "prompts",
        "--dict",
        fixture.dict.to_str().unwrap(),
        "--instances",
        bare.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    assert_eq!(exit_code(&result), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let records: Vec<PromptDumpRecord> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records[0].kind, PromptKind::Positive);
    assert_eq!(records[0].serialized, "Object");
    for negative in &records[1..] {
        assert_eq!(negative.kind, PromptKind::Fallback);
        assert!(["Backdrop", "Clutter"].contains(&negative.serialized.as_str()));
    }
}

#[test]
fn calibrate_fixture_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("records.jsonl");
    write_ladder_records(&records);
    let table_path = dir.path().join("table.jsonl");
    let result = run(&[
        "calibrate",
        "--records",
        records.to_str().unwrap(),
        "--output",
        table_path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&result), 0);

    let table = ThresholdTable::from_file(&table_path).unwrap();
    let rich = table
        .get(&attrkit::AttributeClass::new("Object", "k0", "k0-v0"))
        .unwrap();
    assert_eq!(rich.method, ThresholdMethod::Conformal);
    assert_eq!(rich.q_hat, Some(0.90));
    assert!((rich.tau - 0.10).abs() < 1e-12);
    let sparse = table
        .get(&attrkit::AttributeClass::new("Object", "k0", "k0-v1"))
        .unwrap();
    assert_eq!(sparse.method, ThresholdMethod::Fallback);
    assert_eq!(sparse.tau, 0.2);

    // Empty input: empty table, still success.
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let empty_table = dir.path().join("empty-table.jsonl");
    let result = run(&[
        "calibrate",
        "--records",
        empty.to_str().unwrap(),
        "--output",
        empty_table.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&result), 0);
    assert_eq!(std::fs::read_to_string(&empty_table).unwrap(), "");
}

#[test]
fn train_zero_learning_rate_gives_a_flat_trace() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = write_fixture(dir.path(), 8, 4);
    let ckpt = dir.path().join("ckpt.json");
    let trace = dir.path().join("trace.jsonl");
    let result = run(&[
        "train",
        "--dict",
        fixture.dict.to_str().unwrap(),
        "--features",
        fixture.features.to_str().unwrap(),
        "--output",
        ckpt.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
        "--epochs",
        "6",
        "--learning-rate",
        "0",
        "--seed",
        "5",
    ]);
    assert_eq!(exit_code(&result), 0);
    let text = std::fs::read_to_string(&trace).unwrap();
    let losses: Vec<f64> = text
        .lines()
        .map(|l| {
            serde_json::from_str::<attrkit::records::LossTraceRecord>(l)
                .unwrap()
                .loss
        })
        .collect();
    assert_eq!(losses.len(), 6);
    assert!(losses.iter().all(|&l| l == losses[0]));
}

#[test]
fn eval_atomic_report_shape() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = write_fixture(dir.path(), 24, 6);
    let ckpt = dir.path().join("ckpt.json");
    let trace = dir.path().join("trace.jsonl");
    let trained = run(&[
        "train",
        "--dict",
        fixture.dict.to_str().unwrap(),
        "--features",
        fixture.features.to_str().unwrap(),
        "--output",
        ckpt.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
        "--epochs",
        "60",
        "--seed",
        "6",
    ]);
    assert_eq!(exit_code(&trained), 0);

    let report_path = dir.path().join("report.json");
    let result = run(&[
        "eval",
        "--dict",
        fixture.dict.to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--features",
        fixture.features.to_str().unwrap(),
        "--output",
        report_path.to_str().unwrap(),
        "--mode",
        "atomic",
    ]);
    assert_eq!(exit_code(&result), 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["mode"], "atomic");
    assert_eq!(report["instances"], 24);
    // Atomic prompts read "{Category} + {Attribute Value}".
    let samples = report["per_category"][0]["sample_prompts"].as_array().unwrap();
    assert!(!samples.is_empty());
    for sample in samples {
        let text = sample.as_str().unwrap();
        assert!(text.starts_with("Object + "));
        assert_eq!(text.matches(" + ").count(), 1);
    }
    // One comparison per labeled dimension per instance.
    assert_eq!(report["comparisons"], 24 * 3);

    // Empty benchmark: empty report, still success.
    let empty = dir.path().join("none.jsonl");
    std::fs::write(&empty, "").unwrap();
    let empty_report = dir.path().join("empty-report.json");
    let result = run(&[
        "eval",
        "--dict",
        fixture.dict.to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--features",
        empty.to_str().unwrap(),
        "--output",
        empty_report.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&result), 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&empty_report).unwrap()).unwrap();
    assert_eq!(report["instances"], 0);
    assert_eq!(report["comparisons"], 0);
}

#[test]
fn eval_compositional_count_matches_enumeration_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = write_fixture(dir.path(), 6, 7);
    let ckpt = dir.path().join("ckpt.json");
    let trace = dir.path().join("trace.jsonl");
    run(&[
        "train",
        "--dict",
        fixture.dict.to_str().unwrap(),
        "--features",
        fixture.features.to_str().unwrap(),
        "--output",
        ckpt.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
        "--epochs",
        "5",
        "--seed",
        "7",
    ]);
    let report_path = dir.path().join("report.json");
    let result = run(&[
        "eval",
        "--dict",
        fixture.dict.to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--features",
        fixture.features.to_str().unwrap(),
        "--output",
        report_path.to_str().unwrap(),
        "--mode",
        "compositional",
        "--n-attrs",
        "2",
    ]);
    assert_eq!(exit_code(&result), 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    // Arities {2, 3, 4}: 2*3 + 2*4 + 3*4 = 26.
    assert_eq!(report["per_category"][0]["prompt_count"], 26);
    // Every instance is fully labeled: C(3, 2) = 3 subsets each.
    assert_eq!(report["comparisons"], 6 * 3);
}

#[test]
fn simulate_is_deterministic_and_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let result = run(&[
            "simulate",
            "--output",
            out.to_str().unwrap(),
            "--trials",
            "50",
            "--n-cal",
            "50",
            "--n-test",
            "200",
            "--seed",
            "3",
        ]);
        assert_eq!(exit_code(&result), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&a).unwrap()).unwrap();
    let mean = report["mean_coverage"].as_f64().unwrap();
    assert!(mean > 0.8 && mean <= 1.0);
}

#[test]
fn help_lists_paper_anchored_defaults() {
    let calibrate = run(&["calibrate", "--help"]);
    let text = stdout(&calibrate);
    assert!(text.contains("[default: 0.1]"), "alpha default");
    assert!(text.contains("[default: 10]"), "min-samples default");
    assert!(text.contains("[default: 0.2]"), "fallback-tau default");

    let prompts = run(&["prompts", "--help"]);
    let text = stdout(&prompts);
    assert!(text.contains("[default: 0.5]"), "keep-prob default");
    assert!(text.contains("[default: 1]"), "replacements default");
    assert!(text.contains("[default: 3]"), "num-negatives default");
    assert!(text.contains("ATTRKIT_SEED"), "env override visible");
}

#[test]
fn filter_shards_and_jobs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = write_fixture(dir.path(), 30, 8);

    // Score candidates directly through the library to build shard files.
    let mut rng = attrkit::rng::stream(8, "cli-filter-test");
    let params = attrkit::EncoderParams::init_random(
        fixture
            .dictionary
            .category_names()
            .map(str::to_string)
            .chain(
                fixture
                    .dictionary
                    .category("Object")
                    .unwrap()
                    .dimensions()
                    .iter()
                    .flat_map(|d| d.primitives().iter().cloned()),
            ),
        8,
        attrkit::synth::feature_dim(&fixture.dictionary, "Object"),
        0.5,
        &mut rng,
    );
    let metas: Vec<_> = fixture
        .synthetic
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            (
                inst.instance_meta(&format!("img-{}", i / 3)),
                inst.feature.clone(),
            )
        })
        .collect();
    let candidates = attrkit::score_candidates(&params, &fixture.dictionary, &metas).unwrap();
    let (first, second) = candidates.split_at(17);
    let whole = dir.path().join("whole.jsonl");
    let shard_a = dir.path().join("shard-a.jsonl");
    let shard_b = dir.path().join("shard-b.jsonl");
    for (path, subset) in [
        (&whole, candidates.as_slice()),
        (&shard_a, first),
        (&shard_b, second),
    ] {
        let mut body = String::new();
        for candidate in subset {
            body.push_str(&serde_json::to_string(candidate).unwrap());
            body.push('\n');
        }
        std::fs::write(path, body).unwrap();
    }

    let records = dir.path().join("records.jsonl");
    let mut body = String::new();
    for class in attrkit::AttributeClass::enumerate(&fixture.dictionary) {
        for i in 0..12 {
            body.push_str(
                &serde_json::to_string(&attrkit::CalibrationRecord {
                    instance_id: format!("{}-{i}", class.primitive),
                    category: class.category.clone(),
                    dimension: class.dimension.clone(),
                    primitive: class.primitive.clone(),
                    p_hat: (i as f64 + 0.5) / 12.0,
                })
                .unwrap(),
            );
            body.push('\n');
        }
    }
    std::fs::write(&records, body).unwrap();
    let table = dir.path().join("table.jsonl");
    run(&[
        "calibrate",
        "--records",
        records.to_str().unwrap(),
        "--output",
        table.to_str().unwrap(),
    ]);

    let run_filter = |candidates: &[&std::path::Path], jobs: &str, tag: &str| {
        let out = dir.path().join(format!("filtered-{tag}.jsonl"));
        let stats = dir.path().join(format!("stats-{tag}.json"));
        let mut command = bin();
        command
            .arg("filter")
            .arg("--dict")
            .arg(&fixture.dict)
            .arg("--table")
            .arg(&table)
            .arg("--output")
            .arg(&out)
            .arg("--stats")
            .arg(&stats)
            .arg("--jobs")
            .arg(jobs);
        for path in candidates {
            command.arg("--candidates").arg(path);
        }
        let output = command.output().unwrap();
        assert_eq!(output.status.code(), Some(0));
        (
            std::fs::read(&out).unwrap(),
            std::fs::read(&stats).unwrap(),
        )
    };

    let (whole_out, whole_stats) = run_filter(&[&whole], "1", "whole");
    let (shard_out, shard_stats) = run_filter(&[&shard_a, &shard_b], "2", "shards");
    assert_eq!(whole_out, shard_out, "sharding must not change the output");
    assert_eq!(whole_stats, shard_stats, "stats merge must be exact");

    // Repeat run is byte-identical.
    let (again_out, again_stats) = run_filter(&[&whole], "1", "again");
    assert_eq!(whole_out, again_out);
    assert_eq!(whole_stats, again_stats);
}
