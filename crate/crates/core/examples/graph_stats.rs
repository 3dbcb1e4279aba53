//! Build a small typed graph, summarize it and draw negative edges.
//!
//! ```bash
//! cargo run --example graph_stats
//! ```

use kgretro::graph::GraphBuilder;
use kgretro::{graph_stats, sample_negative_edges, NegativeStrategy};

fn main() -> kgretro::Result<()> {
    let mut b = GraphBuilder::new();
    for (id, class) in [("aspirin", "drug"), ("ibuprofen", "drug"), ("warfarin", "drug")] {
        b.vertex(id, Some(class.into()));
    }
    for id in ["headache", "fever", "thrombosis", "bleeding"] {
        b.vertex(id, Some("disease".into()));
    }
    b.edge("aspirin", "treats", "headache")
        .edge("aspirin", "treats", "fever")
        .edge("ibuprofen", "treats", "headache")
        .edge("warfarin", "treats", "thrombosis")
        .edge("warfarin", "causes", "bleeding")
        .edge("aspirin", "causes", "bleeding")
        .edge("aspirin", "treats", "fever"); // duplicate, dropped
    let (g, report) = b.build();
    println!("dropped {} duplicate(s), {} self-loop(s)\n", report.duplicates, report.self_loops);
    print!("{}", graph_stats(&g));

    // same-source negatives may land on another drug; class-restricted ones stay among diseases
    for strategy in [NegativeStrategy::SameSource, NegativeStrategy::ClassRestricted] {
        let neg = sample_negative_edges(&g, None, 7, strategy)?;
        println!("\n{strategy} negatives ({} skipped):", neg.skipped);
        for t in neg.triples(&g) {
            println!("  {t}");
        }
    }
    Ok(())
}
