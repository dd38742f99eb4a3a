//! Shared fixtures for driving the binary in tests.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use attrkit::records::{FeatureRecord, InstanceRecord};
use attrkit::synth;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_attrkit"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

pub fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

/// Toy task: one attribute-bearing category plus decoys, written to disk as
/// dictionary + instances + features files.
pub struct Fixture {
    pub dict: PathBuf,
    pub instances: PathBuf,
    pub features: PathBuf,
    pub dictionary: attrkit::AttributeDictionary,
    pub synthetic: Vec<synth::SyntheticInstance>,
}

pub fn write_fixture(dir: &Path, count: usize, seed: u64) -> Fixture {
    let dictionary = synth::toy_dictionary("Object", &[2, 3, 4], &["Backdrop", "Clutter"]);
    let dict = dir.join("dict.jsonl");
    std::fs::write(&dict, dictionary.to_jsonl()).unwrap();

    let mut rng = attrkit::rng::stream(seed, "cli-fixture");
    let synthetic = synth::generate_instances(&dictionary, "Object", count, 0.05, "i", &mut rng);

    let instances = dir.join("instances.jsonl");
    let mut body = String::new();
    for instance in &synthetic {
        let record = InstanceRecord {
            instance_id: instance.instance_id.clone(),
            category: "Object".to_string(),
            attributes: instance.attributes.assignments().iter().cloned().collect(),
        };
        body.push_str(&serde_json::to_string(&record).unwrap());
        body.push('\n');
    }
    std::fs::write(&instances, body).unwrap();

    let features = dir.join("features.jsonl");
    let mut body = String::new();
    for instance in &synthetic {
        let record: FeatureRecord = instance.feature_record();
        body.push_str(&serde_json::to_string(&record).unwrap());
        body.push('\n');
    }
    std::fs::write(&features, body).unwrap();

    Fixture {
        dict,
        instances,
        features,
        dictionary,
        synthetic,
    }
}

/// Calibration records file: the 19-score ladder for one rich class plus a
/// 5-record sparse class.
pub fn write_ladder_records(path: &Path) {
    let mut body = String::new();
    for i in 1..=19 {
        body.push_str(&serde_json::to_string(&attrkit::CalibrationRecord {
            instance_id: format!("rich-{i}"),
            category: "Object".into(),
            dimension: "k0".into(),
            primitive: "k0-v0".into(),
            p_hat: 1.0 - i as f64 * 0.05,
        }).unwrap());
        body.push('\n');
    }
    for i in 0..5 {
        body.push_str(&serde_json::to_string(&attrkit::CalibrationRecord {
            instance_id: format!("sparse-{i}"),
            category: "Object".into(),
            dimension: "k0".into(),
            primitive: "k0-v1".into(),
            p_hat: 0.9,
        }).unwrap());
        body.push('\n');
    }
    std::fs::write(path, body).unwrap();
}
