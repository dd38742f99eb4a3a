//! Calibrate per-class thresholds from scored calibration records.
//!
//! Run with `cargo run -p attrkit --example conformal_calibration`.

use attrkit::conformal::{
    calibrate_thresholds, conformal_quantile, nonconformity, AttributeClass, CalibrationConfig,
    CalibrationRecord,
};

fn main() {
    // A class with plenty of calibration data: the 19-score ladder
    // 0.05 .. 0.95 of non-conformity scores.
    let rich = AttributeClass::new("Plane", "Number of engines", "Twin-engine");
    let mut records: Vec<CalibrationRecord> = (1..=19)
        .map(|i| CalibrationRecord {
            instance_id: format!("cal-{i}"),
            category: rich.category.clone(),
            dimension: rich.dimension.clone(),
            primitive: rich.primitive.clone(),
            p_hat: 1.0 - i as f64 * 0.05,
        })
        .collect();

    let scores: Vec<f64> = records
        .iter()
        .map(|r| nonconformity(r.p_hat).unwrap())
        .collect();
    let q_hat = conformal_quantile(&scores, 0.1).unwrap();
    println!("ladder of 19 scores at alpha 0.1: q_hat = {q_hat}, tau = {}", 1.0 - q_hat);

    // A long-tail class with too few records for a stable quantile.
    let sparse = AttributeClass::new("Plane", "Number of engines", "Eight-engine");
    for i in 0..5 {
        records.push(CalibrationRecord {
            instance_id: format!("sparse-{i}"),
            category: sparse.category.clone(),
            dimension: sparse.dimension.clone(),
            primitive: sparse.primitive.clone(),
            p_hat: 0.85,
        });
    }

    // Registering the whole dictionary gives classes with no data a
    // conservative fallback entry as well.
    let dict = attrkit::synth::plane_dictionary();
    let registered = AttributeClass::enumerate(&dict);
    let table =
        calibrate_thresholds(&records, &registered, &CalibrationConfig::default()).unwrap();

    println!("\nthreshold table ({} classes):", table.len());
    for (class, entry) in table.entries() {
        println!(
            "  {class}: tau = {:.4}  ({:?}, n_cal = {})",
            entry.tau, entry.method, entry.n_cal
        );
    }

    let rich_entry = table.get(&rich).unwrap();
    assert_eq!(rich_entry.q_hat, Some(0.90));
    let sparse_entry = table.get(&sparse).unwrap();
    assert_eq!(sparse_entry.tau, 0.2);
    println!("\nrich class is conformal, sparse and absent classes fall back to tau = 0.2");

    // The table serializes to one record per line.
    print!("\nfirst two lines of the table document:\n{}",
        table
            .to_jsonl()
            .lines()
            .take(2)
            .map(|l| format!("  {l}\n"))
            .collect::<String>()
    );
}
