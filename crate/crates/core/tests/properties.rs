use std::collections::BTreeSet;

use kgretro::engine::converged;
use kgretro::eval::make_linkpred_split;
use kgretro::graph::GraphBuilder;
use kgretro::penalty::penalty_value;
use kgretro::{
    load_edgelist, load_embeddings, retrofit_closed_form, sample_negative_edges, save_embeddings, EmbeddingFormat,
    EmbeddingSet, KnowledgeGraph, NegativeStrategy, RelationKind, RelationParams, RetrofitConfig, Triple,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn graph_from(edges: &[(u8, u8, u8)], n: u8) -> KnowledgeGraph {
    let mut b = GraphBuilder::new();
    for &(s, r, t) in edges {
        b.edge(format!("v{}", s % n), format!("r{}", r % 3), format!("v{}", t % n));
    }
    b.build().0
}

fn edges() -> impl Strategy<Value = Vec<(u8, u8, u8)>> {
    prop::collection::vec((any::<u8>(), any::<u8>(), any::<u8>()), 1..120)
}

fn anchors(g: &KnowledgeGraph, seed: u64, d: usize) -> EmbeddingSet {
    let mut q = EmbeddingSet::new();
    let mut x = seed.wrapping_add(1);
    for v in g.vertices() {
        let vals: Vec<f64> = (0..d)
            .map(|_| {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        q.insert(v.id.clone(), None, DVector::from_vec(vals)).unwrap();
    }
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edge_list_round_trip(es in edges(), n in 2u8..40) {
        let g = graph_from(&es, n);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.tsv");
        g.save_edgelist(&path).unwrap();
        let (h, report) = load_edgelist(&path, None).unwrap();
        prop_assert_eq!(report.duplicates + report.self_loops, 0);
        let a: BTreeSet<Triple> = g.triples().collect();
        let b: BTreeSet<Triple> = h.triples().collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn built_graphs_have_no_loops_or_duplicates(es in edges(), n in 2u8..40) {
        let g = graph_from(&es, n);
        let set: BTreeSet<_> = g.edges().iter().collect();
        prop_assert_eq!(set.len(), g.n_edges());
        prop_assert!(g.edges().iter().all(|e| e.src != e.dst));
    }

    #[test]
    fn negatives_are_true_non_edges(es in edges(), n in 3u8..40, seed in any::<u64>()) {
        let g = graph_from(&es, n);
        let neg = match sample_negative_edges(&g, None, seed, NegativeStrategy::SameSource) {
            Ok(neg) => neg,
            // every source is saturated: nothing legal to draw
            Err(kgretro::Error::Saturated { sources }) => {
                prop_assert!(!sources.is_empty());
                return Ok(());
            }
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let again = sample_negative_edges(&g, None, seed, NegativeStrategy::SameSource).unwrap();
        prop_assert_eq!(&neg.edges, &again.edges);
        prop_assert_eq!(neg.len() + neg.skipped, g.n_edges());
        let sources: BTreeSet<(usize, usize)> = g.edges().iter().map(|e| (e.src, e.rel)).collect();
        for e in &neg.edges {
            prop_assert!(!g.contains(e));
            prop_assert!(e.src != e.dst);
            prop_assert!(sources.contains(&(e.src, e.rel)));
        }
        prop_assert_eq!(neg.edges.iter().collect::<BTreeSet<_>>().len(), neg.len());
    }

    #[test]
    fn split_partitions_relation(es in prop::collection::vec((any::<u8>(), any::<u8>()), 10..150), seed in any::<u64>()) {
        let mut b = GraphBuilder::new();
        for &(s, t) in &es {
            b.edge(format!("v{}", s % 50), "r", format!("v{}", t % 50));
        }
        let (g, _) = b.build();
        match make_linkpred_split(&g, "r", NegativeStrategy::SameSource, seed) {
            Ok(s) => {
                let all: BTreeSet<Triple> = g.triples().collect();
                let train: BTreeSet<_> = s.train_pos.iter().cloned().collect();
                let test: BTreeSet<_> = s.test_pos.iter().cloned().collect();
                prop_assert!(train.is_disjoint(&test));
                prop_assert_eq!(train.union(&test).cloned().collect::<BTreeSet<_>>(), all.clone());
                prop_assert_eq!(s.train_neg.len(), s.train_pos.len());
                prop_assert_eq!(s.test_neg.len(), s.test_pos.len());
                prop_assert!(s.train_vertices.is_disjoint(&s.test_vertices));
                for t in s.train_pos.iter().chain(&s.train_neg) {
                    prop_assert!(s.train_vertices.contains(&t.src));
                }
                for t in s.test_pos.iter().chain(&s.test_neg) {
                    prop_assert!(s.test_vertices.contains(&t.src));
                }
                for t in s.train_neg.iter().chain(&s.test_neg) {
                    prop_assert!(!all.contains(t));
                }
                let again = make_linkpred_split(&g, "r", NegativeStrategy::SameSource, seed).unwrap();
                prop_assert_eq!(s, again);
            }
            // too few edges or sources, or a saturated source
            Err(e) => prop_assert!(matches!(e, kgretro::Error::Eval(_) | kgretro::Error::Saturated { .. }), "{}", e),
        }
    }

    #[test]
    fn converged_matches_rule(prev in -1e6f64..1e6, delta in -10.0f64..10.0, tol in 0.0f64..1e-2) {
        let cur = prev + delta;
        let want = (cur - prev).abs() <= tol * prev.abs().max(1.0);
        prop_assert_eq!(converged(&[prev, cur], tol), want);
        prop_assert!(converged(&[prev, prev], tol));
        prop_assert!(!converged(&[prev], tol));
    }

    #[test]
    fn identity_equals_linear_at_identity(qi in prop::collection::vec(-5.0f64..5.0, 3), qj in prop::collection::vec(-5.0f64..5.0, 3)) {
        let (qi, qj) = (DVector::from_vec(qi), DVector::from_vec(qj));
        let mut p = RelationParams {
            rel: "r".into(),
            kind: RelationKind::Identity,
            a: DMatrix::identity(3, 3),
            b: DVector::zeros(3),
        };
        let id = penalty_value(&p, &qi, &qj).unwrap();
        p.kind = RelationKind::Linear;
        prop_assert_eq!(id.to_bits(), penalty_value(&p, &qi, &qj).unwrap().to_bits());
    }

    #[test]
    fn linear_penalty_rotation_invariant(vals in prop::collection::vec(-2.0f64..2.0, 27), angle in 0.0f64..6.3) {
        let a = DMatrix::from_column_slice(3, 3, &vals[..9]);
        let (qi, qj, b) = (
            DVector::from_column_slice(&vals[9..12]),
            DVector::from_column_slice(&vals[12..15]),
            DVector::from_column_slice(&vals[15..18]),
        );
        let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Vector3::z_axis(), angle);
        let r = DMatrix::from_column_slice(3, 3, r.matrix().as_slice());
        let p = RelationParams { rel: "r".into(), kind: RelationKind::Linear, a: a.clone(), b: b.clone() };
        let rotated = RelationParams { rel: "r".into(), kind: RelationKind::Linear, a: &r * a * r.transpose(), b: &r * b };
        let before = penalty_value(&p, &qi, &qj).unwrap();
        let after = penalty_value(&rotated, &(&r * qi), &(&r * qj)).unwrap();
        prop_assert!((before - after).abs() <= 1e-10 * before.max(1.0));
    }

    #[test]
    fn embeddings_round_trip_exactly(vals in prop::collection::vec(-1e6f64..1e6, 12), tsv in any::<bool>()) {
        let mut e = EmbeddingSet::new();
        for (k, chunk) in vals.chunks(4).enumerate() {
            e.insert(format!("w{k}"), None, DVector::from_column_slice(chunk)).unwrap();
        }
        let format = if tsv { EmbeddingFormat::Tsv } else { EmbeddingFormat::Word2VecText };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        save_embeddings(&e, &path, format).unwrap();
        let back = load_embeddings(&path, format).unwrap();
        for (id, x) in e.iter() {
            prop_assert_eq!(back.get(id), Some(&x.vector));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn anchor_dominance(es in edges(), n in 3u8..30, seed in any::<u64>()) {
        let g = graph_from(&es, n);
        let q_hat = anchors(&g, seed, 3);
        let mut last = f64::INFINITY;
        for alpha in [1.0, 10.0, 1e3, 1e6] {
            let cfg = RetrofitConfig { alpha, max_sweeps: 10, ..RetrofitConfig::for_kind(RelationKind::Translation) };
            let res = retrofit_closed_form(&g, &q_hat, &cfg).unwrap();
            let dev = q_hat
                .iter()
                .map(|(id, e)| (res.embeddings.get(id).unwrap() - &e.vector).amax())
                .fold(0.0, f64::max);
            prop_assert!(dev <= last + 1e-12, "alpha {}: {} after {}", alpha, dev, last);
            last = dev;
        }
        prop_assert!(last < 1e-4);
    }

    #[test]
    fn thread_count_does_not_change_results(es in edges(), n in 3u8..30, seed in any::<u64>(), jacobi in any::<bool>()) {
        let g = graph_from(&es, n);
        let q_hat = anchors(&g, seed, 3);
        let mut cfg = RetrofitConfig { max_sweeps: 5, seed, beta_neg: 0.2, ..RetrofitConfig::for_kind(RelationKind::Linear) };
        if jacobi {
            cfg.update_mode = kgretro::engine::UpdateMode::Jacobi;
        }
        let one = retrofit_closed_form(&g, &q_hat, &RetrofitConfig { threads: 1, ..cfg.clone() });
        let four = retrofit_closed_form(&g, &q_hat, &RetrofitConfig { threads: 4, ..cfg });
        match (one, four) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.trace.iter().map(|t| t.total.to_bits()).collect::<Vec<_>>(), b.trace.iter().map(|t| t.total.to_bits()).collect::<Vec<_>>());
                for (id, x) in a.embeddings.iter() {
                    prop_assert_eq!(b.embeddings.get(id), Some(&x.vector));
                }
            }
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            (a, b) => prop_assert!(false, "outcomes differ: {:?} vs {:?}", a.is_ok(), b.is_ok()),
        }
    }
}
