//! Enumerate atomic and compositional verification prompts.
//!
//! Run with `cargo run -p attrkit --example compositional_prompts`.

use attrkit::prompts::generate_compositional_prompts;

fn main() {
    let dict = attrkit::synth::plane_dictionary();
    let cat = dict.category("Plane").unwrap();
    let sizes: Vec<usize> = cat.dimensions().iter().map(|d| d.len()).collect();
    println!("Plane dimension arities: {sizes:?}");

    // Atomic prompts: one per primitive.
    let atomic = generate_compositional_prompts(&dict, "Plane", 1).unwrap();
    println!("\n{} atomic prompts, e.g.:", atomic.len());
    for prompt in atomic.iter().take(4) {
        println!("  {}", prompt.serialized());
    }

    // Pairs: every combination of two distinct dimensions times one
    // primitive each, in dictionary order.
    let pairs = generate_compositional_prompts(&dict, "Plane", 2).unwrap();
    let expected: usize = (0..sizes.len())
        .flat_map(|i| (i + 1..sizes.len()).map(move |j| (i, j)))
        .map(|(i, j)| sizes[i] * sizes[j])
        .sum();
    println!("\n{} two-attribute prompts (oracle: {expected}):", pairs.len());
    assert_eq!(pairs.len(), expected);
    for prompt in pairs.iter().take(4) {
        println!("  {}", prompt.serialized());
    }
    println!("  ...");
    for prompt in pairs.iter().rev().take(2) {
        println!("  {}", prompt.serialized());
    }

    // Full-width prompts use every dimension once.
    let full = generate_compositional_prompts(&dict, "Plane", sizes.len()).unwrap();
    assert_eq!(full.len(), sizes.iter().product::<usize>());
    println!(
        "\n{} full prompts = product of arities {:?}",
        full.len(),
        sizes
    );

    // Asking for more dimensions than exist is an error, not an empty list.
    let err = generate_compositional_prompts(&dict, "Plane", sizes.len() + 1).unwrap_err();
    println!("\nover-wide request: {err}");
}
