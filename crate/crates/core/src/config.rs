//! Experiment configuration, read from a TOML file.
//!
//! See `docs/config.md` for the schema. Missing sections and fields take
//! documented defaults; unknown fields are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::{
    generate_workload, ParamGen, QueryTemplate, TemplateOrder, WorkloadItem, DEFAULT_WINDOW,
};
use crate::catalog::{
    generate_table, read_csv, Catalog, ColumnDef, ColumnKind, CorrelationSpec, DependencyRule,
    Marginal, TableSchema,
};
use crate::error::{Error, Result};
use crate::learner::{KnnParams, LearnerConfig, LearnerKind};
use crate::optimizer::{EstimatorMode, OptimizerConfig};
use crate::stats::DEFAULT_BUCKETS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Output directory; the command line may override it.
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub data: DataConfig,
    #[serde(default)]
    pub workload: WorkloadConfig,
    #[serde(default)]
    pub learner: LearnerSection,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub bench: BenchSection,
    #[serde(default)]
    pub compare: Option<CompareSection>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default = "default_buckets")]
    pub buckets: usize,
    pub tables: Vec<TableConfig>,
}

fn default_buckets() -> usize {
    DEFAULT_BUCKETS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub name: String,
    /// Rows to generate; ignored when `csv` is set.
    #[serde(default)]
    pub rows: usize,
    /// Load the table from this CSV file instead of generating it.
    #[serde(default)]
    pub csv: Option<PathBuf>,
    /// Defaults to the experiment seed plus the table's position.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub columns: Vec<ColumnConfig>,
    #[serde(default)]
    pub rules: Vec<DependencyRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnConfig {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(flatten)]
    pub marginal: Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    /// Total number of queries drawn.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub order: TemplateOrder,
    #[serde(default)]
    pub templates: Vec<TemplateConfig>,
}

fn default_iterations() -> usize {
    50
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            iterations: default_iterations(),
            order: TemplateOrder::default(),
            templates: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateConfig {
    pub id: String,
    pub relations: Vec<String>,
    /// Clauses such as `t.a = $c`, `t.b < 4` or `r.k = s.k`.
    pub clauses: Vec<String>,
    #[serde(default)]
    pub params: BTreeMap<String, ParamGen>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerSection {
    pub kind: LearnerKind,
    pub k: usize,
    pub capacity: usize,
    pub delta: f64,
    pub eta: f64,
    pub linear_eta: f64,
    pub linear_iterations: usize,
}

impl Default for LearnerSection {
    fn default() -> Self {
        let d = LearnerConfig::default();
        Self {
            kind: d.kind,
            k: d.knn.k,
            capacity: d.knn.capacity,
            delta: d.knn.delta,
            eta: d.knn.eta,
            linear_eta: d.linear_eta,
            linear_iterations: d.linear_iterations,
        }
    }
}

impl LearnerSection {
    pub fn to_config(&self) -> LearnerConfig {
        LearnerConfig {
            kind: self.kind,
            knn: KnnParams {
                k: self.k,
                capacity: self.capacity,
                delta: self.delta,
                eta: self.eta,
            },
            linear_eta: self.linear_eta,
            linear_iterations: self.linear_iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub mode: EstimatorMode,
    /// Convergence window.
    pub window: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            mode: EstimatorMode::Adaptive,
            window: DEFAULT_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    #[serde(default = "all_kinds")]
    pub kinds: Vec<LearnerKind>,
    /// Template the training stream is drawn from.
    pub train_template: String,
    /// Template for test queries; defaults to the training template.
    #[serde(default)]
    pub test_template: Option<String>,
    #[serde(default = "default_observations")]
    pub observations: usize,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
}

fn all_kinds() -> Vec<LearnerKind> {
    LearnerKind::ALL.to_vec()
}
fn default_observations() -> usize {
    1000
}
fn default_test_size() -> usize {
    200
}
fn default_eval_every() -> usize {
    50
}

impl ExperimentConfig {
    /// Parses and validates. Relative paths resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text)
            .map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |field: String, msg: &str| Err(Error::Config(format!("{field}: {msg}")));
        if self.data.buckets == 0 {
            return fail("data.buckets".into(), "must be at least 1");
        }
        if self.data.tables.is_empty() {
            return fail("data.tables".into(), "at least one table is required");
        }
        for (i, t) in self.data.tables.iter().enumerate() {
            let at = format!("data.tables[{i}]");
            if self.data.tables[..i].iter().any(|o| o.name == t.name) {
                return fail(format!("{at}.name"), "duplicate table name");
            }
            if t.csv.is_none() && t.columns.is_empty() {
                return fail(format!("{at}.columns"), "needed unless `csv` is given");
            }
            for (j, r) in t.rules.iter().enumerate() {
                if !(0.0..=1.0).contains(&r.p) {
                    return fail(
                        format!("{at}.rules[{j}].p"),
                        &format!("{} is outside [0, 1]", r.p),
                    );
                }
            }
        }
        for (i, t) in self.workload.templates.iter().enumerate() {
            let at = format!("workload.templates[{i}]");
            if self.workload.templates[..i].iter().any(|o| o.id == t.id) {
                return fail(format!("{at}.id"), "duplicate template id");
            }
            for (name, p) in &t.params {
                p.validate(&format!("{at}.params.{name}"))?;
            }
        }
        self.learner.to_config().validate()?;
        self.optimizer.validate()?;
        if self.bench.window == 0 {
            return fail("bench.window".into(), "must be at least 1");
        }
        if let Some(c) = &self.compare {
            for (field, id) in [
                ("compare.train_template", Some(&c.train_template)),
                ("compare.test_template", c.test_template.as_ref()),
            ] {
                if let Some(id) = id {
                    if !self.workload.templates.iter().any(|t| t.id == *id) {
                        return fail(field.into(), &format!("no template `{id}`"));
                    }
                }
            }
            if c.eval_every == 0 {
                return fail("compare.eval_every".into(), "must be at least 1");
            }
        }
        Ok(())
    }

    fn table_seed(&self, index: usize) -> u64 {
        self.data.tables[index]
            .seed
            .unwrap_or(self.seed.wrapping_add(index as u64))
    }

    /// Generates or loads every table.
    pub fn build_catalog(&self) -> Result<Catalog> {
        let mut cat = Catalog::new();
        for (i, t) in self.data.tables.iter().enumerate() {
            let wrap = |e: Error| Error::Config(format!("data.tables[{i}] (`{}`): {e}", t.name));
            let table = match &t.csv {
                Some(path) => {
                    let path = self.base_dir.join(path);
                    let file = std::fs::File::open(&path)
                        .map_err(|e| wrap(Error::Config(format!("{}: {e}", path.display()))))?;
                    read_csv(&t.name, file).map_err(wrap)?
                }
                None => {
                    let columns = t
                        .columns
                        .iter()
                        .map(|c| ColumnDef {
                            name: c.name.clone(),
                            kind: c.kind,
                        })
                        .collect();
                    let schema = TableSchema::new(&t.name, columns).map_err(wrap)?;
                    let mut spec = CorrelationSpec::new(self.table_seed(i));
                    for c in &t.columns {
                        spec = spec.marginal(&c.name, c.marginal.clone());
                    }
                    spec.rules = t.rules.clone();
                    generate_table(schema, t.rows, &spec).map_err(wrap)?
                }
            };
            cat.add(table)?;
        }
        Ok(cat)
    }

    pub fn templates(&self) -> Result<Vec<QueryTemplate>> {
        self.workload
            .templates
            .iter()
            .map(|t| QueryTemplate::new(&t.id, t.relations.clone(), &t.clauses, t.params.clone()))
            .collect()
    }

    pub fn template(&self, id: &str) -> Result<QueryTemplate> {
        self.templates()?
            .into_iter()
            .find(|t| t.id == id)
            .ok_or_else(|| Error::Config(format!("unknown query id `{id}`")))
    }

    /// The configured workload, validated against the catalog.
    pub fn workload(&self, catalog: &Catalog) -> Result<Vec<WorkloadItem>> {
        let items = generate_workload(
            &self.templates()?,
            self.workload.iterations,
            self.workload.order,
            self.seed,
            &catalog.column_kinds(),
        )?;
        for it in &items {
            it.query.validate(catalog).map_err(|e| {
                Error::Config(format!("workload template `{}`: {e}", it.template_id))
            })?;
        }
        Ok(items)
    }

    /// Training and test queries for the learner comparison.
    pub fn compare_workloads(
        &self,
        catalog: &Catalog,
    ) -> Result<(Vec<WorkloadItem>, Vec<WorkloadItem>)> {
        let c = self
            .compare
            .as_ref()
            .ok_or_else(|| Error::Config("the config has no [compare] section".into()))?;
        let kinds = catalog.column_kinds();
        let train_t = self.template(&c.train_template)?;
        let test_t = self.template(c.test_template.as_deref().unwrap_or(&c.train_template))?;
        let train = generate_workload(
            &[train_t],
            c.observations,
            TemplateOrder::RoundRobin,
            self.seed,
            &kinds,
        )?;
        let test = generate_workload(
            &[test_t],
            c.test_size,
            TemplateOrder::RoundRobin,
            self.seed.wrapping_add(0x5eed),
            &kinds,
        )?;
        Ok((train, test))
    }

    pub fn learner_config(&self) -> LearnerConfig {
        self.learner.to_config()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        seed = 3
        [[data.tables]]
        name = "t"
        rows = 100
        columns = [
            { name = "a", kind = "int", dist = "cycle", values = [0, 1] },
            { name = "b", kind = "int", dist = "uniform", lo = 0, hi = 1 },
        ]
        rules = [{ target = "b", source = "a", fn = "identity", p = 1.0 }]

        [[workload.templates]]
        id = "q"
        relations = ["t"]
        clauses = ["t.a = $c", "t.b = 0"]
        params = { c = { dist = "fixed", value = 0 } }
    "#;

    #[test]
    fn minimal_config_with_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(cfg.learner.k, 3);
        assert_eq!(cfg.learner.capacity, 500);
        assert_eq!(cfg.bench.window, 5);
        assert_eq!(cfg.optimizer.max_relations, 12);
        let cat = cfg.build_catalog().unwrap();
        assert_eq!(cat.table("t").unwrap().row_count(), 100);
        let items = cfg.workload(&cat).unwrap();
        assert_eq!(items.len(), 50);
        assert_eq!(
            items[0].query.to_string(),
            "FROM t WHERE t.a = 0 AND t.b = 0"
        );
    }

    #[test]
    fn bad_probability_names_the_field() {
        let text = MINIMAL.replace("p = 1.0", "p = 1.5");
        let err = ExperimentConfig::from_toml(&text, Path::new("."))
            .unwrap_err()
            .to_string();
        assert!(err.contains("data.tables[0].rules[0].p"), "{err}");
    }

    #[test]
    fn unknown_field_is_reported_with_line() {
        let text = MINIMAL.replace("seed = 3", "seed = 3\nsede = 4");
        let err = ExperimentConfig::from_toml(&text, Path::new("."))
            .unwrap_err()
            .to_string();
        assert!(err.contains("sede") && err.contains("line"), "{err}");
    }

    #[test]
    fn bad_learner_parameter() {
        let text = format!("{MINIMAL}\n[learner]\nk = 0\n");
        let err = ExperimentConfig::from_toml(&text, Path::new("."))
            .unwrap_err()
            .to_string();
        assert!(err.contains("learner.k"), "{err}");
    }
}
