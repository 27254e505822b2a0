use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::clause::{template_of, Clause, ClauseTemplate, ColumnRef, CompareOp};
use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::stats::StatsCatalog;

/// Lower bound applied to a selectivity before taking its logarithm.
pub const SELECTIVITY_EPSILON: f64 = 1e-9;

/// Columns linked by equality join clauses; sorted, at least two members.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EquivalenceClass {
    members: Vec<ColumnRef>,
}

impl EquivalenceClass {
    pub fn new(mut members: Vec<ColumnRef>) -> Option<Self> {
        members.sort();
        members.dedup();
        (members.len() >= 2).then_some(Self { members })
    }

    pub fn members(&self) -> &[ColumnRef] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// The class restricted to columns of the given tables, if it still has
    /// two members.
    pub fn restrict(&self, tables: &[String]) -> Option<Self> {
        Self::new(
            self.members
                .iter()
                .filter(|c| tables.contains(&c.table))
                .cloned()
                .collect(),
        )
    }

    /// Size-two classes are ordinary `x = y` templates.
    pub fn as_template(&self) -> Option<ClauseTemplate> {
        (self.members.len() == 2).then(|| {
            template_of(&Clause::columns(
                self.members[0].clone(),
                CompareOp::Eq,
                self.members[1].clone(),
            ))
        })
    }
}

impl fmt::Display for EquivalenceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.members.iter().map(|c| c.to_string()).collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

/// Connected components of column-equality clauses, in canonical order.
pub fn equivalence_classes_of(join_clauses: &[Clause]) -> Result<Vec<EquivalenceClass>> {
    let mut parent: BTreeMap<ColumnRef, ColumnRef> = BTreeMap::new();
    fn find(parent: &mut BTreeMap<ColumnRef, ColumnRef>, c: &ColumnRef) -> ColumnRef {
        let p = parent.entry(c.clone()).or_insert_with(|| c.clone()).clone();
        if &p == c {
            return p;
        }
        let root = find(parent, &p);
        parent.insert(c.clone(), root.clone());
        root
    }
    for clause in join_clauses {
        let right = match (clause.op, clause.right_column()) {
            (CompareOp::Eq, Some(r)) => r,
            _ => {
                return Err(Error::Unsupported(format!(
                    "`{clause}` is not a column equality"
                )))
            }
        };
        let (a, b) = (find(&mut parent, &clause.left), find(&mut parent, right));
        if a != b {
            // Smaller root wins so the result is independent of clause order.
            let (keep, drop) = if a < b { (a, b) } else { (b, a) };
            parent.insert(drop, keep);
        }
    }
    let cols: Vec<ColumnRef> = parent.keys().cloned().collect();
    let mut groups: BTreeMap<ColumnRef, Vec<ColumnRef>> = BTreeMap::new();
    for c in cols {
        let root = find(&mut parent, &c);
        groups.entry(root).or_default().push(c);
    }
    let mut classes: Vec<EquivalenceClass> = groups
        .into_values()
        .filter_map(EquivalenceClass::new)
        .collect();
    classes.sort();
    Ok(classes)
}

/// Predicates applied when joining two disjoint relation sets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JoinPredicates {
    /// `(left column, right column)` equalities; left columns come from the
    /// left input.
    pub equi: Vec<(ColumnRef, ColumnRef)>,
    /// Non-equality column comparisons spanning both inputs.
    pub theta: Vec<Clause>,
}

impl JoinPredicates {
    pub fn is_empty(&self) -> bool {
        self.equi.is_empty() && self.theta.is_empty()
    }

    pub fn describe(&self) -> String {
        let mut parts: Vec<String> = self
            .equi
            .iter()
            .map(|(l, r)| format!("{l} = {r}"))
            .collect();
        parts.extend(self.theta.iter().map(|c| c.to_string()));
        parts.join(" AND ")
    }
}

/// A conjunctive select-join query over distinct base tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    relations: Vec<String>,
    filters: Vec<Clause>,
    classes: Vec<EquivalenceClass>,
    theta: Vec<Clause>,
}

impl Query {
    /// Splits clauses into constant filters, equality classes and theta
    /// predicates. Column-column clauses must span two different tables, and
    /// no equivalence class may contain two columns of one table.
    pub fn new(relations: Vec<String>, clauses: Vec<Clause>) -> Result<Self> {
        let mut rels = relations;
        rels.sort();
        let before = rels.len();
        rels.dedup();
        if rels.len() != before {
            return Err(Error::Planning(
                "a relation appears twice in the query".into(),
            ));
        }
        if rels.is_empty() {
            return Err(Error::Planning("query has no relations".into()));
        }
        let mut filters = Vec::new();
        let mut equalities = Vec::new();
        let mut theta = Vec::new();
        for c in clauses {
            let mentioned = std::iter::once(&c.left).chain(c.right_column());
            for col in mentioned {
                if !rels.contains(&col.table) {
                    return Err(Error::Planning(format!(
                        "`{c}` references `{}`, which is not in the query",
                        col.table
                    )));
                }
            }
            match c.right_column() {
                None => filters.push(c),
                Some(r) if r.table == c.left.table => {
                    return Err(Error::Unsupported(format!(
                        "`{c}` compares two columns of one table"
                    )))
                }
                Some(_) if c.op == CompareOp::Eq => equalities.push(c),
                Some(_) => theta.push(c),
            }
        }
        let classes = equivalence_classes_of(&equalities)?;
        for class in &classes {
            for w in class.members().windows(2) {
                if w[0].table == w[1].table {
                    return Err(Error::Unsupported(format!(
                        "equivalence class {class} links two columns of `{}`",
                        w[0].table
                    )));
                }
            }
        }
        filters.sort_by(|a, b| a.canonical_cmp(b));
        theta.sort_by(|a, b| a.canonical_cmp(b));
        Ok(Self {
            relations: rels,
            filters,
            classes,
            theta,
        })
    }

    pub fn relations(&self) -> &[String] {
        &self.relations
    }

    pub fn filters(&self) -> &[Clause] {
        &self.filters
    }

    pub fn classes(&self) -> &[EquivalenceClass] {
        &self.classes
    }

    pub fn theta(&self) -> &[Clause] {
        &self.theta
    }

    /// Checks every table and column against the catalog.
    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        let check = |c: &ColumnRef| -> Result<()> {
            let t = catalog.table(&c.table)?;
            t.schema()
                .column_index(&c.column)
                .map(|_| ())
                .ok_or_else(|| Error::Catalog(format!("unknown column `{c}`")))
        };
        for r in &self.relations {
            catalog.table(r)?;
        }
        for c in self.filters.iter().chain(&self.theta) {
            check(&c.left)?;
            if let Some(r) = c.right_column() {
                check(r)?;
            }
        }
        for class in &self.classes {
            class.members().iter().try_for_each(check)?;
        }
        Ok(())
    }

    pub fn relations_of_mask(&self, mask: u32) -> Vec<String> {
        self.relations
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, r)| r.clone())
            .collect()
    }

    pub fn mask_of(&self, relations: &[String]) -> Option<u32> {
        let mut mask = 0;
        for r in relations {
            mask |= 1 << self.relations.iter().position(|x| x == r)?;
        }
        Some(mask)
    }

    /// The logical node computing the join of the given relations with every
    /// query predicate that is local to them.
    pub fn node_for(&self, relations: &[String]) -> LogicalNode {
        let inside = |c: &ColumnRef| relations.contains(&c.table);
        let filters = self
            .filters
            .iter()
            .filter(|c| inside(&c.left))
            .cloned()
            .collect();
        let equalities = self
            .classes
            .iter()
            .filter_map(|c| c.restrict(relations))
            .collect();
        let theta = self
            .theta
            .iter()
            .filter(|c| inside(&c.left) && c.right_column().is_some_and(inside))
            .cloned()
            .collect();
        LogicalNode::new(relations.to_vec(), filters, equalities, theta)
    }

    pub fn node_for_mask(&self, mask: u32) -> LogicalNode {
        self.node_for(&self.relations_of_mask(mask))
    }

    /// Predicates connecting two disjoint relation sets.
    pub fn join_predicates(&self, left: &[String], right: &[String]) -> JoinPredicates {
        let mut out = JoinPredicates::default();
        for class in &self.classes {
            let l = class.members().iter().find(|c| left.contains(&c.table));
            let r = class.members().iter().find(|c| right.contains(&c.table));
            if let (Some(l), Some(r)) = (l, r) {
                out.equi.push((l.clone(), r.clone()));
            }
        }
        for c in &self.theta {
            let Some(rc) = c.right_column() else { continue };
            let spans = (left.contains(&c.left.table) && right.contains(&rc.table))
                || (right.contains(&c.left.table) && left.contains(&rc.table));
            if spans {
                out.theta.push(c.clone());
            }
        }
        out
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut preds: Vec<String> = self.filters.iter().map(|c| c.to_string()).collect();
        for class in &self.classes {
            for w in class.members().windows(2) {
                preds.push(format!("{} = {}", w[0], w[1]));
            }
        }
        preds.extend(self.theta.iter().map(|c| c.to_string()));
        write!(f, "FROM {}", self.relations.join(", "))?;
        if !preds.is_empty() {
            write!(f, " WHERE {}", preds.join(" AND "))?;
        }
        Ok(())
    }
}

/// A plan node described by what it computes rather than how: base
/// relations, constant filters, equality classes and theta predicates, all
/// in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalNode {
    relations: Vec<String>,
    filters: Vec<Clause>,
    equalities: Vec<EquivalenceClass>,
    theta: Vec<Clause>,
}

impl LogicalNode {
    pub fn new(
        mut relations: Vec<String>,
        mut filters: Vec<Clause>,
        mut equalities: Vec<EquivalenceClass>,
        mut theta: Vec<Clause>,
    ) -> Self {
        relations.sort();
        relations.dedup();
        filters.sort_by(|a, b| a.canonical_cmp(b));
        equalities.sort();
        theta.sort_by(|a, b| a.canonical_cmp(b));
        Self {
            relations,
            filters,
            equalities,
            theta,
        }
    }

    pub fn relations(&self) -> &[String] {
        &self.relations
    }

    pub fn filters(&self) -> &[Clause] {
        &self.filters
    }

    pub fn equalities(&self) -> &[EquivalenceClass] {
        &self.equalities
    }

    pub fn theta(&self) -> &[Clause] {
        &self.theta
    }

    pub fn filter_templates(&self) -> Vec<ClauseTemplate> {
        self.filters.iter().map(template_of).collect()
    }

    /// Column-column templates: size-two classes and theta clauses.
    pub fn join_templates(&self) -> Vec<ClauseTemplate> {
        let mut out: Vec<ClauseTemplate> = self
            .equalities
            .iter()
            .filter_map(EquivalenceClass::as_template)
            .chain(self.theta.iter().map(template_of))
            .collect();
        out.sort();
        out
    }

    /// Classes with more than two members; each is a single feature-less
    /// set-equality marker.
    pub fn large_classes(&self) -> Vec<&EquivalenceClass> {
        self.equalities.iter().filter(|c| c.len() > 2).collect()
    }

    pub fn feature_space_key(&self) -> FeatureSpaceKey {
        feature_space_key(self)
    }
}

/// Canonical identity of a feature space: relations, constant-erased
/// clauses and large equivalence classes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureSpaceKey(String);

impl FeatureSpaceKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn from_raw(raw: impl Into<String>) -> Self {
        Self(raw.into())
    }

    /// First 16 hex digits of the SHA-256 of the canonical form.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.0.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Display for FeatureSpaceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn feature_space_key(node: &LogicalNode) -> FeatureSpaceKey {
    let join = |v: Vec<String>| v.join(",");
    let filters = join(
        node.filter_templates()
            .iter()
            .map(|t| t.to_string())
            .collect(),
    );
    let joins = join(
        node.join_templates()
            .iter()
            .map(|t| t.to_string())
            .collect(),
    );
    let classes = join(node.large_classes().iter().map(|c| c.to_string()).collect());
    FeatureSpaceKey(format!(
        "rels=[{}];filters=[{filters}];joins=[{joins}];classes=[{classes}]",
        node.relations.join(",")
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `ln(max(selectivity, ε))` of each constant filter, in canonical order.
pub fn feature_vector(node: &LogicalNode, stats: &StatsCatalog) -> FeatureVector {
    FeatureVector(
        node.filters
            .iter()
            .map(|c| {
                stats
                    .selectivity_or_one(c)
                    .value()
                    .max(SELECTIVITY_EPSILON)
                    .ln()
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{create_table, ColumnKind, TableSchema, Value};

    fn c(s: &str) -> Clause {
        Clause::parse(s).unwrap()
    }

    fn rels(r: &[&str]) -> Vec<String> {
        r.iter().map(|s| s.to_string()).collect()
    }

    fn classes(clauses: &[&str]) -> Vec<String> {
        let cs: Vec<Clause> = clauses.iter().map(|s| c(s)).collect();
        equivalence_classes_of(&cs)
            .unwrap()
            .iter()
            .map(|e| e.to_string())
            .collect()
    }

    #[test]
    fn single_equality_class() {
        assert_eq!(classes(&["x.a = y.b"]), ["{x.a,y.b}"]);
    }

    #[test]
    fn transitive_class() {
        assert_eq!(classes(&["x.a = y.b", "y.b = z.c"]), ["{x.a,y.b,z.c}"]);
        assert_eq!(classes(&["y.b = z.c", "x.a = z.c"]), ["{x.a,y.b,z.c}"]);
    }

    #[test]
    fn disjoint_classes() {
        assert_eq!(
            classes(&["x.a = y.b", "z.c = w.d"]),
            ["{w.d,z.c}", "{x.a,y.b}"]
        );
    }

    #[test]
    fn non_equality_rejected() {
        assert!(equivalence_classes_of(&[c("x.a < y.b")]).is_err());
        assert!(equivalence_classes_of(&[c("x.a = 3")]).is_err());
    }

    fn node(relations: &[&str], filters: &[&str]) -> LogicalNode {
        LogicalNode::new(
            rels(relations),
            filters.iter().map(|s| c(s)).collect(),
            vec![],
            vec![],
        )
    }

    #[test]
    fn key_ignores_clause_order() {
        let a = node(&["t"], &["t.a < 1", "t.b = 2"]);
        let b = node(&["t"], &["t.b = 2", "t.a < 1"]);
        assert_eq!(feature_space_key(&a), feature_space_key(&b));
    }

    #[test]
    fn key_ignores_constants() {
        let a = node(&["t"], &["t.a < 25"]);
        let b = node(&["t"], &["t.a < 30"]);
        assert_eq!(feature_space_key(&a), feature_space_key(&b));
        assert_eq!(
            feature_space_key(&a).fingerprint(),
            feature_space_key(&b).fingerprint()
        );
    }

    #[test]
    fn key_depends_on_relations() {
        let a = node(&["t"], &["t.a < 25"]);
        let b = node(&["t", "u"], &["t.a < 25"]);
        assert_ne!(feature_space_key(&a), feature_space_key(&b));
        assert_ne!(
            feature_space_key(&a).fingerprint(),
            feature_space_key(&b).fingerprint()
        );
    }

    #[test]
    fn large_class_is_a_marker_small_class_a_template() {
        let q = Query::new(
            rels(&["x", "y", "z"]),
            vec![c("x.a = y.b"), c("y.b = z.c"), c("x.k < 4")],
        )
        .unwrap();
        let full = q.node_for(q.relations());
        assert_eq!(full.large_classes().len(), 1);
        assert!(full.join_templates().is_empty());
        let key = feature_space_key(&full);
        assert!(key.as_str().contains("classes=[{x.a,y.b,z.c}]"), "{key}");

        // Restricted to two relations the class is an ordinary x = y template.
        let pair = q.node_for(&rels(&["x", "z"]));
        assert!(pair.large_classes().is_empty());
        assert_eq!(pair.join_templates()[0].to_string(), "x.a = z.c");
    }

    #[test]
    fn join_predicates_pick_one_member_per_side() {
        let q = Query::new(
            rels(&["x", "y", "z"]),
            vec![c("x.a = y.b"), c("y.b = z.c"), c("x.k < z.m")],
        )
        .unwrap();
        let p = q.join_predicates(&rels(&["x", "y"]), &rels(&["z"]));
        assert_eq!(
            p.equi,
            vec![(ColumnRef::new("x", "a"), ColumnRef::new("z", "c"))]
        );
        assert_eq!(p.theta.len(), 1);
        assert!(q
            .join_predicates(&rels(&["x"]), &rels(&["y"]))
            .theta
            .is_empty());
    }

    #[test]
    fn query_rejects_same_table_columns() {
        assert!(Query::new(rels(&["x"]), vec![c("x.a = x.b")]).is_err());
        assert!(Query::new(rels(&["x", "y"]), vec![c("x.a = y.b"), c("y.b = x.c")]).is_err());
        assert!(Query::new(rels(&["x"]), vec![c("y.a = 1")]).is_err());
    }

    fn stats_for_vector() -> StatsCatalog {
        // a: {0,1} half/half, b: 0..4 uniform, each value 5 times
        let s = TableSchema::from_pairs("t", &[("a", ColumnKind::Int), ("b", ColumnKind::Int)])
            .unwrap();
        let rows = (0..20)
            .map(|i| vec![Value::Int(i % 2), Value::Int(i / 5)])
            .collect();
        let mut cat = Catalog::new();
        cat.add(create_table(s, rows).unwrap()).unwrap();
        StatsCatalog::build(&cat, 4).unwrap()
    }

    #[test]
    fn feature_vector_values() {
        let stats = stats_for_vector();
        let v = feature_vector(&node(&["t"], &["t.a = 0"]), &stats);
        assert!((v.coords()[0] - 0.5f64.ln()).abs() < 1e-12);
        assert!((v.coords()[0] + std::f64::consts::LN_2).abs() < 1e-12);

        let zero = feature_vector(&node(&["t"], &["t.a = 9"]), &stats);
        assert_eq!(zero.coords(), &[SELECTIVITY_EPSILON.ln()]);

        // b = 3 has selectivity 1/4; canonical order puts t.a first.
        let two = feature_vector(&node(&["t"], &["t.b = 3", "t.a = 1"]), &stats);
        assert!((two.coords()[0] + std::f64::consts::LN_2).abs() < 1e-12);
        assert!((two.coords()[1] - (-1.3863)).abs() < 1e-4);
    }

    #[test]
    fn equivalence_classes_add_no_coordinates() {
        let stats = stats_for_vector();
        let q = Query::new(
            rels(&["t", "u", "v"]),
            vec![c("t.a = u.a"), c("u.a = v.a"), c("t.b < 2")],
        )
        .unwrap();
        let v = feature_vector(&q.node_for(q.relations()), &stats);
        assert_eq!(v.len(), 1);
        assert!(v.coords().iter().all(|&x| x <= 0.0));
    }

    use proptest::prelude::*;
    proptest! {
        #[test]
        fn key_stable_under_permutation(seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let base = vec![
                c("t.a < 3"), c("t.b = 1"), c("u.c >= 2"), c("t.a = u.c"), c("u.c = v.d"),
                c("t.b < v.e"),
            ];
            let mut shuffled = base.clone();
            shuffled.shuffle(&mut rng);
            let mut r = rels(&["t", "u", "v"]);
            r.shuffle(&mut rng);
            let q1 = Query::new(rels(&["t", "u", "v"]), base).unwrap();
            let q2 = Query::new(r.clone(), shuffled).unwrap();
            let n1 = q1.node_for(q1.relations());
            let n2 = q2.node_for(&r);
            prop_assert_eq!(feature_space_key(&n1), feature_space_key(&n2));
            prop_assert_eq!(n1, n2);
        }
    }
}
