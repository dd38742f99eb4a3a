//! Verify the analytic gradients against central finite differences.
//!
//! Run with `cargo run -p attrkit --example gradient_check`.

use attrkit::encoder::EncoderParams;
use attrkit::gradcheck;
use attrkit::prompts::{generate_negatives, generate_positive, PromptGenConfig};
use attrkit::synth;
use attrkit::TrainingExample;

fn main() {
    let dict = synth::toy_dictionary("Object", &[3, 4], &["Backdrop"]);
    let config = PromptGenConfig {
        keep_prob: 1.0,
        num_negatives: 3,
        replacements_per_negative: 1,
        rng_seed: 0,
    };

    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let mut rng = attrkit::rng::stream(trial, "gradient-check");
        let instances = synth::generate_instances(&dict, "Object", 3, 0.05, "g", &mut rng);
        let batch: Vec<TrainingExample> = instances
            .iter()
            .map(|inst| {
                let positive = generate_positive(&inst.attributes, &config, &mut rng);
                let negatives =
                    generate_negatives(&dict, &positive, &inst.attributes, &config, &mut rng)
                        .unwrap();
                TrainingExample::new(inst.feature.clone(), positive, negatives).unwrap()
            })
            .collect();

        let vocab: Vec<String> = dict
            .category_names()
            .map(str::to_string)
            .chain(
                dict.category("Object")
                    .unwrap()
                    .dimensions()
                    .iter()
                    .flat_map(|d| d.primitives().iter().cloned()),
            )
            .collect();
        let params = EncoderParams::init_random(
            vocab,
            4,
            synth::feature_dim(&dict, "Object"),
            0.5,
            &mut rng,
        );

        let report = gradcheck::check(&params, &batch, 1e-6).expect("check runs");
        worst = worst.max(report.max_relative_error);
        println!(
            "trial {trial:2}: {} params, max relative error {:.3e}",
            report.checked, report.max_relative_error
        );
        assert!(report.max_relative_error < 1e-5);
    }
    println!("\nworst over 20 trials: {worst:.3e} (tolerance 1e-5)");
}
