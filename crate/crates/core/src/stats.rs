use std::collections::BTreeMap;
use std::fmt;

use crate::graph::KnowledgeGraph;

const NO_CLASS: &str = "-";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationStats {
    pub name: String,
    pub count: usize,
    /// `(source class, target class)` pairs observed on this relation's edges,
    /// with how many edges carry each.
    pub signatures: BTreeMap<(String, String), usize>,
}

impl RelationStats {
    /// `src→dst` for every observed class pair, most frequent first.
    pub fn signature(&self) -> String {
        let mut sigs: Vec<_> = self.signatures.iter().collect();
        sigs.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
        sigs.iter()
            .map(|((s, d), _)| format!("{s}→{d}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StatsReport {
    pub n_vertices: usize,
    pub n_edges: usize,
    /// Sorted by count descending, then name.
    pub relations: Vec<RelationStats>,
    /// Vertex count per class label (`-` for unclassed vertices).
    pub classes: BTreeMap<String, usize>,
}

impl StatsReport {
    /// Edge count for `name`; zero when the relation is absent.
    pub fn relation_count(&self, name: &str) -> usize {
        self.relations
            .iter()
            .find(|r| r.name == name)
            .map_or(0, |r| r.count)
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.relations {
            writeln!(f, "{}\t{}\t{}", r.name, r.count, r.signature())?;
        }
        writeln!(f, "# vertices\t{}", self.n_vertices)?;
        writeln!(f, "# edges\t{}", self.n_edges)?;
        let mut classes: Vec<_> = self.classes.iter().collect();
        classes.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
        for (c, n) in classes {
            writeln!(f, "# class\t{c}\t{n}")?;
        }
        Ok(())
    }
}

pub fn graph_stats(g: &KnowledgeGraph) -> StatsReport {
    let class_of = |i: usize| {
        g.vertices()[i]
            .class
            .clone()
            .unwrap_or_else(|| NO_CLASS.to_string())
    };
    let mut relations: Vec<RelationStats> = g
        .relations()
        .iter()
        .enumerate()
        .map(|(r, name)| {
            let mut signatures = BTreeMap::new();
            for e in g.edges_of_relation(r) {
                *signatures.entry((class_of(e.src), class_of(e.dst))).or_insert(0) += 1;
            }
            RelationStats {
                name: name.clone(),
                count: g.relation_edge_count(r),
                signatures,
            }
        })
        .collect();
    relations.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.name.cmp(&b.name)));

    let mut classes = BTreeMap::new();
    for i in 0..g.n_vertices() {
        *classes.entry(class_of(i)).or_insert(0) += 1;
    }
    StatsReport {
        n_vertices: g.n_vertices(),
        n_edges: g.n_edges(),
        relations,
        classes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;

    #[test]
    fn empty_graph_reports_zeros() {
        let (g, _) = GraphBuilder::new().build();
        let s = graph_stats(&g);
        assert_eq!(s.n_vertices, 0);
        assert_eq!(s.n_edges, 0);
        assert!(s.relations.is_empty());
        assert_eq!(s.relation_count("anything"), 0);
    }

    /// The five-entity treatment/disease/person toy graph, with the symmetric
    /// `Is` stored both ways and the unknown `Treats` edge included.
    #[test]
    fn toy_graph_counts() {
        let mut b = GraphBuilder::new();
        b.vertex("Athelas", Some("drug".into()))
            .vertex("Kingsfoil", Some("drug".into()))
            .vertex("BlackBreath", Some("disease".into()))
            .vertex("Aragorn", Some("person".into()))
            .vertex("Nazgul", Some("person".into()));
        b.edge("Kingsfoil", "Is", "Athelas")
            .edge("Athelas", "Is", "Kingsfoil")
            .edge("Athelas", "Treats", "BlackBreath")
            .edge("Kingsfoil", "Treats", "BlackBreath")
            .edge("Aragorn", "Uses", "Athelas")
            .edge("Nazgul", "Causes", "BlackBreath");
        let (g, _) = b.build();
        let s = graph_stats(&g);
        assert_eq!(s.relation_count("Is"), 2);
        assert_eq!(s.relation_count("Treats"), 2);
        assert_eq!(s.relation_count("Uses"), 1);
        assert_eq!(s.relation_count("Causes"), 1);
        let text = s.to_string();
        let lines: Vec<&str> = text.lines().take(4).collect();
        assert_eq!(
            lines,
            vec![
                "Is\t2\tdrug→drug",
                "Treats\t2\tdrug→disease",
                "Causes\t1\tperson→disease",
                "Uses\t1\tperson→drug",
            ]
        );
        assert_eq!(s.classes["person"], 2);
    }
}
