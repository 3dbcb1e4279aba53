//! Word similarity (Spearman) and vector-offset analogies.
//!
//! ```bash
//! cargo run --example lexical_eval
//! ```

use kgretro::eval::{analogy_eval, word_similarity};
use kgretro::EmbeddingSet;
use nalgebra::dvector;

fn main() -> kgretro::Result<()> {
    let mut q = EmbeddingSet::new();
    q.insert("king", None, dvector![0.9, 0.8, 0.1])?;
    q.insert("queen", None, dvector![0.9, 0.1, 0.8])?;
    q.insert("man", None, dvector![0.2, 0.9, 0.1])?;
    q.insert("woman", None, dvector![0.2, 0.1, 0.9])?;
    q.insert("apple", None, dvector![-0.5, 0.3, 0.3])?;

    let pairs: Vec<(String, String, f64)> = [
        ("king", "queen", 8.6),
        ("man", "woman", 8.3),
        ("king", "man", 5.9),
        ("queen", "apple", 0.9),
        ("king", "unicorn", 5.0), // not in the vocabulary, dropped
    ]
    .iter()
    .map(|(a, b, s)| (a.to_string(), b.to_string(), *s))
    .collect();
    println!("word similarity: {}", word_similarity(&q, &pairs)?);

    let quads = vec![["man", "woman", "king", "queen"].map(String::from)];
    println!("analogy:         {}", analogy_eval(&q, &quads)?);
    Ok(())
}
