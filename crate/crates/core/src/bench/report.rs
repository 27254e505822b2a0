use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::compare::CurvePoint;
use super::run::{q_error, IterationRecord, NodeRecord};
use crate::error::{Error, Result};
use crate::optimizer::EstimatorMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IterationRow {
    iteration: usize,
    template_id: String,
    template_iteration: usize,
    mode: EstimatorMode,
    plan: String,
    estimated_cost: f64,
    true_cost: f64,
    optimal_cost: f64,
    query: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NodeRow {
    iteration: usize,
    template_id: String,
    path: String,
    relations: String,
    space: String,
    estimated: f64,
    baseline_estimated: f64,
    true_cardinality: u64,
    learned: bool,
}

/// Writes `iterations.csv` and `nodes.csv` style tables.
pub fn write_records<W1: Write, W2: Write>(
    records: &[IterationRecord],
    iterations: W1,
    nodes: W2,
) -> Result<()> {
    let mut it = csv::Writer::from_writer(iterations);
    let mut nd = csv::Writer::from_writer(nodes);
    for r in records {
        it.serialize(IterationRow {
            iteration: r.iteration,
            template_id: r.template_id.clone(),
            template_iteration: r.template_iteration,
            mode: r.mode,
            plan: r.plan.clone(),
            estimated_cost: r.estimated_cost,
            true_cost: r.true_cost,
            optimal_cost: r.optimal_cost,
            query: r.query.clone(),
        })?;
        for n in &r.nodes {
            nd.serialize(NodeRow {
                iteration: r.iteration,
                template_id: r.template_id.clone(),
                path: n.path.clone(),
                relations: n.relations.join(" "),
                space: n.space.clone(),
                estimated: n.estimated,
                baseline_estimated: n.baseline_estimated,
                true_cardinality: n.true_cardinality,
                learned: n.learned,
            })?;
        }
    }
    if records.is_empty() {
        it.write_record(ITERATION_HEADER)?;
        nd.write_record(NODE_HEADER)?;
    }
    it.flush()?;
    nd.flush()?;
    Ok(())
}

const ITERATION_HEADER: [&str; 9] = [
    "iteration",
    "template_id",
    "template_iteration",
    "mode",
    "plan",
    "estimated_cost",
    "true_cost",
    "optimal_cost",
    "query",
];
const NODE_HEADER: [&str; 9] = [
    "iteration",
    "template_id",
    "path",
    "relations",
    "space",
    "estimated",
    "baseline_estimated",
    "true_cardinality",
    "learned",
];

/// Reads tables written by [`write_records`].
pub fn read_records<R1: Read, R2: Read>(iterations: R1, nodes: R2) -> Result<Vec<IterationRecord>> {
    let mut records: Vec<IterationRecord> = Vec::new();
    for row in csv::Reader::from_reader(iterations).deserialize() {
        let r: IterationRow = row?;
        records.push(IterationRecord {
            iteration: r.iteration,
            template_id: r.template_id,
            template_iteration: r.template_iteration,
            mode: r.mode,
            query: r.query,
            plan: r.plan,
            estimated_cost: r.estimated_cost,
            true_cost: r.true_cost,
            optimal_cost: r.optimal_cost,
            nodes: Vec::new(),
        });
    }
    for row in csv::Reader::from_reader(nodes).deserialize() {
        let n: NodeRow = row?;
        let rec = records
            .iter_mut()
            .find(|r| r.iteration == n.iteration)
            .ok_or_else(|| Error::Parse {
                text: n.path.clone(),
                reason: format!("node row for unknown iteration {}", n.iteration),
            })?;
        rec.nodes.push(NodeRecord {
            path: n.path,
            relations: n.relations.split(' ').map(str::to_string).collect(),
            space: n.space,
            estimated: n.estimated,
            baseline_estimated: n.baseline_estimated,
            true_cardinality: n.true_cardinality,
            learned: n.learned,
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardPoint {
    pub iteration: usize,
    pub template_id: String,
    pub path: String,
    pub estimated: f64,
    pub true_cardinality: u64,
    pub q_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostPoint {
    pub iteration: usize,
    pub template_id: String,
    pub true_cost: f64,
    pub estimated_cost: f64,
    pub optimal_cost: f64,
    /// `estimated_cost / true_cost`.
    pub model_ratio: f64,
    /// `true_cost / optimal_cost`.
    pub optimality_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CardCostReport {
    pub cardinalities: Vec<CardPoint>,
    pub costs: Vec<CostPoint>,
}

/// Estimated-versus-true cardinality of every executed node, and model
/// cost versus true-cardinality cost of every chosen plan.
pub fn card_cost_report(records: &[IterationRecord]) -> Result<CardCostReport> {
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    let mut cardinalities = Vec::new();
    let mut costs = Vec::with_capacity(records.len());
    for r in records {
        for n in &r.nodes {
            cardinalities.push(CardPoint {
                iteration: r.iteration,
                template_id: r.template_id.clone(),
                path: n.path.clone(),
                estimated: n.estimated,
                true_cardinality: n.true_cardinality,
                q_error: q_error(n.estimated, n.true_cardinality),
            });
        }
        costs.push(CostPoint {
            iteration: r.iteration,
            template_id: r.template_id.clone(),
            true_cost: r.true_cost,
            estimated_cost: r.estimated_cost,
            optimal_cost: r.optimal_cost,
            model_ratio: r.estimated_cost / r.true_cost,
            optimality_ratio: r.true_cost / r.optimal_cost,
        });
    }
    Ok(CardCostReport {
        cardinalities,
        costs,
    })
}

pub fn write_rows<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 60.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            hi = lo + 1.0;
        }
        Self { lo, hi }
    }

    fn map(&self, v: f64, from: f64, to: f64) -> f64 {
        from + (v - self.lo) / (self.hi - self.lo) * (to - from)
    }
}

fn frame(out: &mut String, title: &str, xlabel: &str, ylabel: &str, x: &Axis, y: &Axis) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{title}</text>"#,
        W / 2.0
    );
    let _ = writeln!(
        out,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#,
        W / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        out,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{ylabel}</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (v, anchor, px, py) in [
        (x.lo, "start", PAD, H - PAD + 15.0),
        (x.hi, "end", W - PAD, H - PAD + 15.0),
        (y.lo, "end", PAD - 4.0, H - PAD),
        (y.hi, "end", PAD - 4.0, PAD + 10.0),
    ] {
        let _ = writeln!(
            out,
            r#"<text x="{px}" y="{py}" text-anchor="{anchor}">{v:.3}</text>"#
        );
    }
}

/// Log-log scatter of `(x, y)` points with the diagonal drawn.
pub fn svg_scatter(points: &[(f64, f64)], title: &str, xlabel: &str, ylabel: &str) -> String {
    let logged: Vec<(f64, f64)> = points
        .iter()
        .map(|(x, y)| (x.max(1e-12).log10(), y.max(1e-12).log10()))
        .collect();
    let both = Axis::fit(logged.iter().flat_map(|(x, y)| [*x, *y]));
    let mut out = String::new();
    frame(
        &mut out,
        title,
        &format!("log10 {xlabel}"),
        &format!("log10 {ylabel}"),
        &both,
        &both,
    );
    let _ = writeln!(
        out,
        r##"<line x1="{PAD}" y1="{}" x2="{}" y2="{PAD}" stroke="#999" stroke-dasharray="4"/>"##,
        H - PAD,
        W - PAD
    );
    for (x, y) in logged {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}" fill-opacity="0.6"/>"#,
            both.map(x, PAD, W - PAD),
            both.map(y, H - PAD, PAD),
            COLORS[0]
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One polyline per learner kind.
pub fn svg_curves(curves: &[CurvePoint], title: &str) -> String {
    let x = Axis::fit(curves.iter().map(|p| p.observations as f64));
    let y = Axis::fit(curves.iter().map(|p| p.error).chain([0.0]));
    let mut kinds: Vec<&str> = Vec::new();
    for p in curves {
        if !kinds.contains(&p.kind.as_str()) {
            kinds.push(&p.kind);
        }
    }
    let mut out = String::new();
    frame(
        &mut out,
        title,
        "observations",
        "mean |ln(estimate/true)|",
        &x,
        &y,
    );
    for (i, kind) in kinds.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = curves
            .iter()
            .filter(|p| p.kind == *kind)
            .map(|p| {
                format!(
                    "{:.2},{:.2}",
                    x.map(p.observations as f64, PAD, W - PAD),
                    y.map(p.error, H - PAD, PAD)
                )
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{kind}</text>"#,
            W - PAD - 80.0,
            PAD + 16.0 * (i + 1) as f64
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> IterationRecord {
        IterationRecord {
            iteration: 1,
            template_id: "q".into(),
            template_iteration: 1,
            mode: EstimatorMode::Baseline,
            query: "FROM t WHERE t.a = 0".into(),
            plan: "Scan(t)".into(),
            estimated_cost: 20000.0,
            true_cost: 20000.0,
            optimal_cost: 20000.0,
            nodes: vec![NodeRecord {
                path: "0".into(),
                relations: vec!["t".into()],
                space: "abc".into(),
                estimated: 5000.0,
                baseline_estimated: 5000.0,
                true_cardinality: 10000,
                learned: false,
            }],
        }
    }

    #[test]
    fn empty_report_fails() {
        assert_eq!(card_cost_report(&[]).unwrap_err().to_string(), "no records");
    }

    #[test]
    fn perfect_estimate_is_on_the_diagonal() {
        let mut r = record();
        r.nodes[0].estimated = 10000.0;
        let rep = card_cost_report(&[r]).unwrap();
        assert_eq!(rep.cardinalities[0].q_error, 1.0);
        assert_eq!(rep.costs[0].model_ratio, 1.0);
    }

    #[test]
    fn records_round_trip_through_csv() {
        let recs = vec![record()];
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_records(&recs, &mut a, &mut b).unwrap();
        assert_eq!(read_records(a.as_slice(), b.as_slice()).unwrap(), recs);
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let s = svg_scatter(&[(1.0, 2.0), (10.0, 10.0)], "t", "x", "y");
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<circle").count(), 2);
    }
}
