//! Build, serialize, and validate attribute dictionaries and instance
//! attribute sets.
//!
//! Run with `cargo run -p attrkit --example dictionary_basics`.

use attrkit::dictionary::{AttributeDictionary, CategoryRecord, InstanceAttributeSet};

fn main() {
    let dict = attrkit::synth::plane_dictionary();
    println!("categories: {:?}", dict.category_names().collect::<Vec<_>>());
    for cat in dict.categories() {
        for dim in cat.dimensions() {
            println!(
                "  {} / {}: {:?}",
                cat.name(),
                dim.key(),
                dim.primitives()
            );
        }
    }

    // Every primitive maps back to exactly one dimension, which is what
    // makes counterfactual swaps unambiguous.
    println!(
        "\n\"Swept wing\" belongs to {:?}",
        dict.dimension_of("Plane", "Swept wing").unwrap()
    );
    println!(
        "antagonists of \"Twin-engine\": {:?}",
        dict.antagonists("Plane", "Number of engines", "Twin-engine")
            .unwrap()
    );

    // Instances may cover any subset of their category's dimensions.
    let inst = InstanceAttributeSet::with_assignments(
        "Plane",
        [
            ("Number of engines", "Four-engine"),
            ("Wing configuration", "Swept wing"),
        ],
    );
    println!(
        "\npartial instance valid: {}",
        dict.validate_instance(&inst).is_empty()
    );
    let bad = InstanceAttributeSet::with_assignments("Plane", [("Propulsion type", "Warp-drive")]);
    for violation in dict.validate_instance(&bad) {
        println!("violation: {violation}");
    }

    // The document form round-trips exactly.
    let jsonl = dict.to_jsonl();
    let reparsed = AttributeDictionary::parse_str(&jsonl).unwrap();
    assert_eq!(reparsed.to_jsonl(), jsonl);
    println!("\ndictionary document round-trips ({} bytes)", jsonl.len());

    // Structurally broken documents are rejected with every violation
    // listed, not just the first.
    let broken = AttributeDictionary::from_records(vec![CategoryRecord::new(
        "Plane",
        [
            ("Propulsion type", vec!["Jet", "Jet"]),
            ("Size", vec!["Large"]),
        ],
    )]);
    println!("\nbroken dictionary:\n{}", broken.unwrap_err());
}
