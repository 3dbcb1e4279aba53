//! Turn raw co-occurrence counts into unit-length positive-PMI vectors.
//!
//! ```bash
//! cargo run --example ppmi_embeddings
//! ```

use kgretro::embed::CooccurrenceMatrix;
use kgretro::pmi_l2_normalize;

fn main() -> kgretro::Result<()> {
    let counts = [
        ("aspirin", "pain", 40),
        ("aspirin", "heart", 12),
        ("aspirin", "stomach", 5),
        ("ibuprofen", "pain", 35),
        ("ibuprofen", "stomach", 9),
        ("warfarin", "heart", 30),
        ("warfarin", "blood", 44),
        ("heparin", "blood", 38),
        ("heparin", "heart", 10),
    ];
    let m = CooccurrenceMatrix::from_counts(counts);
    let q = pmi_l2_normalize(&m)?;
    println!("{} entities × {} contexts\n", m.rows().len(), m.cols().len());

    let ids: Vec<&str> = q.ids().collect();
    print!("{:>10}", "");
    for b in &ids {
        print!("{b:>10}");
    }
    println!();
    for a in &ids {
        print!("{a:>10}");
        for b in &ids {
            // rows are unit length, so the dot product is the cosine
            print!("{:>10.3}", q.get(a).unwrap().dot(q.get(b).unwrap()));
        }
        println!();
    }
    Ok(())
}
