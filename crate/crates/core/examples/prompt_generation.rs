//! Stochastic positive prompts, counterfactual hard negatives, and category
//! fallbacks from one seeded stream.
//!
//! Run with `cargo run -p attrkit --example prompt_generation`.

use attrkit::dictionary::InstanceAttributeSet;
use attrkit::prompts::{generate_negatives, generate_positive, PromptGenConfig};

fn main() {
    let dict = attrkit::synth::plane_dictionary();
    let instance = InstanceAttributeSet::with_assignments(
        "Plane",
        [
            ("Propulsion type", "Jet"),
            ("Number of engines", "Four-engine"),
            ("Wing configuration", "Swept wing"),
        ],
    );
    assert!(dict.validate_instance(&instance).is_empty());

    let config = PromptGenConfig {
        keep_prob: 0.5,
        num_negatives: 3,
        replacements_per_negative: 1,
        rng_seed: 42,
    };
    let mut rng = attrkit::rng::stream(config.rng_seed, "prompt-demo");

    for round in 0..5 {
        let positive = generate_positive(&instance, &config, &mut rng);
        let negatives = generate_negatives(&dict, &positive, &instance, &config, &mut rng)
            .expect("negatives generate");
        println!("view {round}:");
        println!("  + {}", positive.serialized());
        for negative in &negatives {
            let marker = if negative.proto_tag() == "Plane" {
                "-"
            } else {
                "~" // category fallback
            };
            println!("  {marker} {}", negative.serialized());
        }
    }

    // An instance with no attribute annotations gets bare-tag negatives
    // drawn from the other categories.
    let unannotated = InstanceAttributeSet::new("Plane");
    let positive = generate_positive(&unannotated, &config, &mut rng);
    let negatives =
        generate_negatives(&dict, &positive, &unannotated, &config, &mut rng).unwrap();
    println!("unannotated instance:");
    println!("  + {}", positive.serialized());
    for negative in &negatives {
        println!("  ~ {}", negative.serialized());
    }

    // Same seed, same stream label: identical output.
    let mut a = attrkit::rng::stream(7, "replay");
    let mut b = attrkit::rng::stream(7, "replay");
    let pa = generate_positive(&instance, &config, &mut a);
    let pb = generate_positive(&instance, &config, &mut b);
    assert_eq!(pa, pb);
    println!("\nreplay with the same seed is identical: {}", pa.serialized());
}
