//! End-to-end pipeline: train a toy scorer, calibrate thresholds on held-out
//! data, filter candidate annotations, and audit the result against ground
//! truth.
//!
//! Run with `cargo run --release -p attrkit --example filtration_pipeline`.

use attrkit::conformal::{calibrate_thresholds, CalibrationConfig, CalibrationRecord};
use attrkit::filtration::{
    dataset_stats, filter_annotations, score_candidates, FilterOptions, FilteredAnnotation,
};
use attrkit::prompts::PromptGenConfig;
use attrkit::synth;
use attrkit::train::{train_toy, ToyTrainConfig};

fn main() {
    let dict = synth::toy_dictionary("Object", &[2, 3, 4], &["Backdrop", "Clutter"]);
    let mut rng = attrkit::rng::stream(99, "pipeline-data");
    let train_set = synth::generate_instances(&dict, "Object", 500, 0.05, "train-", &mut rng);
    let held_out = synth::generate_instances(&dict, "Object", 200, 0.05, "held-", &mut rng);

    // Stage 1: train the scorer on stochastic views of the training split.
    let prompt_config = PromptGenConfig {
        keep_prob: 0.5,
        num_negatives: 3,
        replacements_per_negative: 1,
        rng_seed: 99,
    };
    let mut prompt_rng = attrkit::rng::stream(99, "pipeline-prompts");
    let dataset =
        synth::training_examples(&dict, &train_set, &prompt_config, &mut prompt_rng).unwrap();
    let outcome = train_toy(
        &dataset,
        &ToyTrainConfig {
            learning_rate: 1.0,
            epochs: 200,
            d: 16,
            init_scale: 0.1,
            seed: 99,
        },
    )
    .unwrap();
    println!(
        "trained: loss {:.4} -> {:.6}",
        outcome.loss_trace[0],
        outcome.loss_trace.last().unwrap()
    );

    // Stage 2: score the held-out split and calibrate per-class thresholds
    // from the scorer's probability for each true attribute.
    let metas: Vec<_> = held_out
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            (
                inst.instance_meta(&format!("img-{}", i / 4)),
                inst.feature.clone(),
            )
        })
        .collect();
    let candidates = score_candidates(&outcome.params, &dict, &metas).unwrap();

    let mut records = Vec::new();
    let cat = dict.category("Object").unwrap();
    for (instance, candidate) in held_out.iter().zip(&candidates) {
        for dim in cat.dimensions() {
            let truth = instance.attributes.get(dim.key()).unwrap();
            let index = dim.primitives().iter().position(|p| p == truth).unwrap();
            records.push(CalibrationRecord {
                instance_id: instance.instance_id.clone(),
                category: "Object".to_string(),
                dimension: dim.key().to_string(),
                primitive: truth.to_string(),
                p_hat: candidate.dimension_probs[dim.key()][index],
            });
        }
    }
    let table = calibrate_thresholds(&records, &[], &CalibrationConfig::default()).unwrap();
    println!("calibrated {} classes at alpha 0.1:", table.len());
    for (class, entry) in table.entries() {
        println!(
            "  {class}: tau = {:.4} ({:?}, n_cal = {})",
            entry.tau, entry.method, entry.n_cal
        );
    }

    // Stage 3: filter the candidates under the calibrated thresholds.
    let result = filter_annotations(
        candidates.clone(),
        &dict,
        &table,
        &FilterOptions::default(),
    )
    .unwrap();
    let stats = result.stats.finalize();
    println!(
        "\nfiltered: {} images, {} instances, {} attributes retained, {} multi-pass",
        stats.images, stats.instances, stats.attributes, stats.multi_pass_count
    );
    assert_eq!(stats.instances as usize, held_out.len());

    // Audit against ground truth: per-class retention of the true attribute
    // and the empirical false-discovery rate.
    let truth: Vec<FilteredAnnotation> = held_out
        .iter()
        .zip(&candidates)
        .map(|(inst, cand)| FilteredAnnotation {
            instance_id: inst.instance_id.clone(),
            image_id: cand.image_id.clone(),
            bbox: cand.bbox,
            category: cand.category.clone(),
            attributes: inst
                .attributes
                .assignments()
                .iter()
                .cloned()
                .collect(),
            passing: None,
        })
        .collect();
    let (audited, diagnostics) = dataset_stats(&result.annotations, Some(&truth));
    assert!(diagnostics.is_empty());
    println!("aggregate FDR: {:.4}", audited.fdr.unwrap());
    println!("per-class true-attribute retention:");
    for class in &audited.per_class {
        if let Some(coverage) = class.coverage {
            println!(
                "  {}/{}/{}: {:.3} ({} true instances)",
                class.category,
                class.dimension,
                class.primitive,
                coverage,
                class.true_instances.unwrap()
            );
        }
    }
    let worst = audited
        .per_class
        .iter()
        .filter_map(|c| c.coverage)
        .fold(f64::INFINITY, f64::min);
    println!("worst per-class retention: {worst:.3}");
}
