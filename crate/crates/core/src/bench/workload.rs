use std::collections::{BTreeMap, HashMap};

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{ColumnKind, Value};
use crate::error::{Error, Result};
use crate::plan::{parse_parts, Clause, ColumnRef, CompareOp, Query, RawOperand};

/// Distribution of one `$slot` parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "lowercase")]
pub enum ParamGen {
    Fixed {
        value: f64,
    },
    /// Integers uniform in `lo..=hi` for int columns, reals in `[lo, hi)`.
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// One of `values`; uniform when `weights` is empty.
    Choice {
        values: Vec<f64>,
        #[serde(default)]
        weights: Vec<f64>,
    },
}

impl ParamGen {
    pub fn validate(&self, field: &str) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("{field}: {msg}")));
        match self {
            ParamGen::Fixed { value } if !value.is_finite() => bad("value must be finite"),
            ParamGen::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo <= hi) => {
                bad("needs finite lo <= hi")
            }
            ParamGen::Choice { values, .. } if values.is_empty() => bad("values is empty"),
            ParamGen::Choice { values, weights } if !weights.is_empty() => {
                if weights.len() != values.len() {
                    return bad("weights and values differ in length");
                }
                if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite()))
                    || weights.iter().sum::<f64>() <= 0.0
                {
                    return bad("weights must be nonnegative with a positive sum");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn draw(&self, kind: ColumnKind, rng: &mut ChaCha8Rng) -> Value {
        let v = match self {
            ParamGen::Fixed { value } => *value,
            ParamGen::Uniform { lo, hi } => match kind {
                ColumnKind::Int => {
                    return Value::Int(rng.gen_range(lo.ceil() as i64..=hi.floor() as i64))
                }
                ColumnKind::Real if lo == hi => *lo,
                ColumnKind::Real => rng.gen_range(*lo..*hi),
            },
            ParamGen::Choice { values, weights } if weights.is_empty() => {
                values[rng.gen_range(0..values.len())]
            }
            ParamGen::Choice { values, weights } => {
                values[WeightedIndex::new(weights)
                    .expect("validated weights")
                    .sample(rng)]
            }
        };
        match kind {
            ColumnKind::Int => Value::Int(v.round() as i64),
            ColumnKind::Real => Value::Real(v),
        }
    }
}

/// A parameterized query. Instances differ only in their constants.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryTemplate {
    pub id: String,
    pub relations: Vec<String>,
    clauses: Vec<(ColumnRef, CompareOp, RawOperand)>,
    params: BTreeMap<String, ParamGen>,
}

impl QueryTemplate {
    pub fn new(
        id: &str,
        relations: Vec<String>,
        clauses: &[String],
        params: BTreeMap<String, ParamGen>,
    ) -> Result<Self> {
        let parsed = clauses
            .iter()
            .map(|c| parse_parts(c))
            .collect::<Result<Vec<_>>>()?;
        let used: Vec<&String> = parsed
            .iter()
            .filter_map(|(_, _, r)| match r {
                RawOperand::Slot(s) => Some(s),
                _ => None,
            })
            .collect();
        for s in &used {
            if !params.contains_key(*s) {
                return Err(Error::Config(format!(
                    "template `{id}`: slot `${s}` has no parameter"
                )));
            }
        }
        for (name, p) in &params {
            if !used.contains(&name) {
                return Err(Error::Config(format!(
                    "template `{id}`: parameter `{name}` is unused"
                )));
            }
            p.validate(&format!("template `{id}` parameter `{name}`"))?;
        }
        Ok(Self {
            id: id.to_string(),
            relations,
            clauses: parsed,
            params,
        })
    }

    /// Draws one instance. Each slot gets one value per instance, typed by
    /// the column it is first compared with.
    pub fn instantiate(
        &self,
        kinds: &HashMap<(String, String), ColumnKind>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Query> {
        let mut values: BTreeMap<&str, Value> = BTreeMap::new();
        for (name, gen) in &self.params {
            let col = self
                .clauses
                .iter()
                .find(|(_, _, r)| matches!(r, RawOperand::Slot(s) if s == name))
                .map(|(c, _, _)| c)
                .expect("every parameter is used");
            let kind = kinds
                .get(&(col.table.clone(), col.column.clone()))
                .copied()
                .ok_or_else(|| Error::Catalog(format!("unknown column `{col}`")))?;
            values.insert(name, gen.draw(kind, rng));
        }
        let clauses = self
            .clauses
            .iter()
            .map(|(left, op, right)| match right {
                RawOperand::Const(v) => Clause::constant(left.clone(), *op, *v),
                RawOperand::Column(c) => Clause::columns(left.clone(), *op, c.clone()),
                RawOperand::Slot(s) => Clause::constant(left.clone(), *op, values[s.as_str()]),
            })
            .collect();
        Query::new(self.relations.clone(), clauses)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateOrder {
    #[default]
    RoundRobin,
    Random,
}

/// One query of a workload.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadItem {
    /// 1-based position in the workload.
    pub iteration: usize,
    pub template_id: String,
    /// 1-based count of instances of this template so far.
    pub template_iteration: usize,
    pub query: Query,
}

/// Draws `count` queries from `templates`, deterministically for a seed.
pub fn generate_workload(
    templates: &[QueryTemplate],
    count: usize,
    order: TemplateOrder,
    seed: u64,
    kinds: &HashMap<(String, String), ColumnKind>,
) -> Result<Vec<WorkloadItem>> {
    if templates.is_empty() && count > 0 {
        return Err(Error::Config("workload has no templates".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashMap<&str, usize> = HashMap::new();
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let t = match order {
            TemplateOrder::RoundRobin => &templates[i % templates.len()],
            TemplateOrder::Random => &templates[rng.gen_range(0..templates.len())],
        };
        let n = seen.entry(&t.id).or_default();
        *n += 1;
        out.push(WorkloadItem {
            iteration: i + 1,
            template_id: t.id.clone(),
            template_iteration: *n,
            query: t.instantiate(kinds, &mut rng)?,
        });
    }
    Ok(out)
}
