//! Non-learning reference policies behind a common trait, looked up by name.
//!
//! Built-in strategies are `uniform`, `congestion_aware`, `fixed_icw` and
//! `analytic_grid`. Experiment files select them with `[[baselines]]` tables:
//!
//! ```toml
//! [[baselines]]
//! kind = "analytic_grid"
//! params = { beta_step = 0.1, w0 = [16, 32, 64, 128, 256] }
//! ```

use crate::bianchi::solve_fixed_point;
use crate::mac::{IcwMatrix, NetworkConfig, PolicyError, PolicyMatrix};
use crate::matrix::Matrix;
use crate::sim::Observation;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use std::cmp::Ordering;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSpec {
    pub kind: String,
    #[serde(default)]
    pub params: toml::Table,
}

impl BaselineSpec {
    pub fn new(kind: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            params: toml::Table::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<toml::Value>) -> Self {
        self.params.insert(key.to_owned(), value.into());
        self
    }
}

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("unknown baseline {kind:?}; registered: {known}")]
    UnknownKind { kind: String, known: String },
    #[error("baseline {kind}: {message}")]
    Param { kind: String, message: String },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("observation is {found:?}, network is {expected:?}")]
    Shape {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("no grid point converged ({skipped} skipped)")]
    NoConvergedPoint { skipped: usize },
}

/// What a strategy may look at when deciding a step's policy.
#[derive(Clone, Copy, Debug)]
pub struct DecisionContext<'a> {
    pub cfg: &'a NetworkConfig,
    /// Rates in force for the step.
    pub rates: &'a Matrix<f64>,
    /// Observation returned by the previous step, if any.
    pub prev_obs: Option<&'a Observation>,
}

pub trait AllocationStrategy: Send + Sync {
    fn name(&self) -> &str;

    fn decide(&self, ctx: &DecisionContext) -> Result<(PolicyMatrix, IcwMatrix), BaselineError>;
}

/// Builds a strategy from its `params` table.
pub type StrategyFactory =
    fn(&toml::Table, &NetworkConfig) -> Result<Box<dyn AllocationStrategy>, BaselineError>;

pub struct StrategyRegistry {
    factories: BTreeMap<String, StrategyFactory>,
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        let mut reg = Self::empty();
        reg.register("uniform", |p, cfg| {
            parse_params::<NoParams>("uniform", p)?;
            Ok(Box::new(Uniform::new(cfg)))
        });
        reg.register("congestion_aware", |p, _| {
            let params: CongestionParams = parse_params("congestion_aware", p)?;
            Ok(Box::new(CongestionAware::new(params.epsilon_floor)?))
        });
        reg.register("fixed_icw", |p, cfg| {
            let params: FixedIcwParams = parse_params("fixed_icw", p)?;
            Ok(Box::new(FixedIcw::new(cfg, params.w0, params.beta)?))
        });
        reg.register("analytic_grid", |p, cfg| {
            let spec: GridSpec = parse_params("analytic_grid", p)?;
            spec.validate(cfg)?;
            Ok(Box::new(AnalyticGrid { spec }))
        });
        reg
    }
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// Adds or replaces a strategy under `name`.
    pub fn register(&mut self, name: &str, factory: StrategyFactory) {
        self.factories.insert(name.to_owned(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(
        &self,
        spec: &BaselineSpec,
        cfg: &NetworkConfig,
    ) -> Result<Box<dyn AllocationStrategy>, BaselineError> {
        let factory = self
            .factories
            .get(&spec.kind)
            .ok_or_else(|| BaselineError::UnknownKind {
                kind: spec.kind.clone(),
                known: self.names().collect::<Vec<_>>().join(", "),
            })?;
        factory(&spec.params, cfg)
    }
}

fn parse_params<T: DeserializeOwned>(kind: &str, params: &toml::Table) -> Result<T, BaselineError> {
    toml::Value::Table(params.clone())
        .try_into()
        .map_err(|e: toml::de::Error| BaselineError::Param {
            kind: kind.to_owned(),
            message: e.message().to_owned(),
        })
}

fn param_error(kind: &str, message: impl Into<String>) -> BaselineError {
    BaselineError::Param {
        kind: kind.to_owned(),
        message: message.into(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

/// `beta = 1/L` and `w0 = w_min` everywhere.
pub fn uniform_policy(cfg: &NetworkConfig) -> (PolicyMatrix, IcwMatrix) {
    (
        PolicyMatrix::uniform(cfg.num_stas, cfg.num_links()),
        IcwMatrix::constant(cfg, cfg.w_min).expect("w_min lies inside its own bounds"),
    )
}

pub struct Uniform {
    policy: (PolicyMatrix, IcwMatrix),
}

impl Uniform {
    pub fn new(cfg: &NetworkConfig) -> Self {
        Self {
            policy: uniform_policy(cfg),
        }
    }
}

impl AllocationStrategy for Uniform {
    fn name(&self) -> &str {
        "uniform"
    }

    fn decide(&self, _: &DecisionContext) -> Result<(PolicyMatrix, IcwMatrix), BaselineError> {
        Ok(self.policy.clone())
    }
}

pub const DEFAULT_EPSILON_FLOOR: f64 = 0.01;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CongestionParams {
    #[serde(default = "default_floor")]
    epsilon_floor: f64,
}

fn default_floor() -> f64 {
    DEFAULT_EPSILON_FLOOR
}

/// Rows proportional to `1 - u + floor`; every station sees the same occupancy.
pub fn congestion_aware_policy(obs: &Observation, epsilon_floor: f64) -> PolicyMatrix {
    let beta = obs.u.map(|&u| (1.0 - u.clamp(0.0, 1.0)) + epsilon_floor);
    let rows: Vec<Vec<f64>> = beta
        .iter_rows()
        .map(|row| {
            let sum: f64 = row.iter().sum();
            row.iter().map(|v| v / sum).collect()
        })
        .collect();
    PolicyMatrix::new(Matrix::from_rows(&rows).expect("rectangular"))
        .expect("positive entries normalise to a valid policy")
}

pub struct CongestionAware {
    epsilon_floor: f64,
}

impl CongestionAware {
    pub fn new(epsilon_floor: f64) -> Result<Self, BaselineError> {
        if !(epsilon_floor.is_finite() && epsilon_floor > 0.0) {
            return Err(param_error(
                "congestion_aware",
                format!("epsilon_floor must be positive, got {epsilon_floor}"),
            ));
        }
        Ok(Self { epsilon_floor })
    }
}

impl AllocationStrategy for CongestionAware {
    fn name(&self) -> &str {
        "congestion_aware"
    }

    fn decide(&self, ctx: &DecisionContext) -> Result<(PolicyMatrix, IcwMatrix), BaselineError> {
        let (uniform, icw) = uniform_policy(ctx.cfg);
        let Some(obs) = ctx.prev_obs else {
            return Ok((uniform, icw));
        };
        let expected = (ctx.cfg.num_stas, ctx.cfg.num_links());
        if obs.u.shape() != expected {
            return Err(BaselineError::Shape {
                expected,
                found: obs.u.shape(),
            });
        }
        Ok((congestion_aware_policy(obs, self.epsilon_floor), icw))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FixedIcwParams {
    w0: Option<u32>,
    beta: Option<Vec<f64>>,
}

/// A constant ICW with a fixed shared allocation row.
pub struct FixedIcw {
    policy: (PolicyMatrix, IcwMatrix),
}

impl FixedIcw {
    /// `w0` defaults to `w_min`, `beta` to the uniform row.
    pub fn new(cfg: &NetworkConfig, w0: Option<u32>, beta: Option<Vec<f64>>) -> Result<Self, BaselineError> {
        let w0 = w0.unwrap_or(cfg.w_min);
        let icw = IcwMatrix::constant(cfg, w0)
            .map_err(|e| param_error("fixed_icw", e.to_string()))?;
        let policy = match beta {
            Some(row) if row.len() != cfg.num_links() => {
                return Err(param_error(
                    "fixed_icw",
                    format!("beta has {} entries for {} links", row.len(), cfg.num_links()),
                ))
            }
            Some(row) => PolicyMatrix::symmetric(cfg.num_stas, &row)
                .map_err(|e| param_error("fixed_icw", e.to_string()))?,
            None => PolicyMatrix::uniform(cfg.num_stas, cfg.num_links()),
        };
        Ok(Self {
            policy: (policy, icw),
        })
    }
}

impl AllocationStrategy for FixedIcw {
    fn name(&self) -> &str {
        "fixed_icw"
    }

    fn decide(&self, _: &DecisionContext) -> Result<(PolicyMatrix, IcwMatrix), BaselineError> {
        Ok(self.policy.clone())
    }
}

/// Candidate set for [`analytic_grid_search`].
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    /// Allocation rows are all compositions of one into multiples of this step,
    /// with every link getting at least one step.
    pub beta_step: f64,
    /// Shared ICW candidates.
    pub w0: Vec<u32>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            beta_step: 0.1,
            w0: vec![16, 32, 64, 128, 256],
        }
    }
}

impl GridSpec {
    pub fn validate(&self, cfg: &NetworkConfig) -> Result<(), BaselineError> {
        let steps = (1.0 / self.beta_step).round();
        if !(self.beta_step > 0.0 && self.beta_step <= 1.0)
            || (steps * self.beta_step - 1.0).abs() > 1e-9
        {
            return Err(param_error(
                "analytic_grid",
                format!("beta_step must divide 1, got {}", self.beta_step),
            ));
        }
        if let Some(&w) = self.w0.iter().find(|&&w| w < cfg.w_min || w > cfg.w_max) {
            return Err(param_error(
                "analytic_grid",
                format!("w0 {w} outside [{}, {}]", cfg.w_min, cfg.w_max),
            ));
        }
        Ok(())
    }

    /// Distinct symmetric rows, always including the uniform one.
    pub fn beta_rows(&self, num_links: usize) -> Vec<Vec<f64>> {
        let total = (1.0 / self.beta_step).round() as usize;
        let mut rows = Vec::new();
        let mut parts = vec![0usize; num_links];
        compositions(total, 0, &mut parts, &mut rows);
        let mut rows: Vec<Vec<f64>> = rows
            .into_iter()
            .map(|p| p.iter().map(|&k| k as f64 / total as f64).collect())
            .collect();
        let uniform = vec![1.0 / num_links as f64; num_links];
        if !rows.contains(&uniform) {
            rows.push(uniform);
        }
        rows
    }

    /// Distinct ICW candidates, always including `w_min`.
    pub fn windows(&self, cfg: &NetworkConfig) -> Vec<u32> {
        let mut w = self.w0.clone();
        w.push(cfg.w_min);
        w.sort_unstable();
        w.dedup();
        w
    }
}

/// Every split of `left` steps over the remaining links, each link taking at least one.
fn compositions(left: usize, idx: usize, parts: &mut [usize], out: &mut Vec<Vec<usize>>) {
    let remaining = parts.len() - idx;
    if remaining == 1 {
        if left >= 1 {
            parts[idx] = left;
            out.push(parts.to_vec());
        }
        return;
    }
    for k in 1..=left.saturating_sub(remaining - 1) {
        parts[idx] = k;
        compositions(left - k, idx + 1, parts, out);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub beta_row: Vec<f64>,
    pub w0: u32,
    pub r_total: f64,
}

#[derive(Clone, Debug)]
pub struct GridSearchResult {
    pub policy: PolicyMatrix,
    pub icw: IcwMatrix,
    pub best: GridPoint,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Higher throughput first; ties go to the smaller ICW, then to the row that
/// puts more weight on lower-indexed links.
fn rank(a: &GridPoint, b: &GridPoint) -> Ordering {
    b.r_total
        .total_cmp(&a.r_total)
        .then(a.w0.cmp(&b.w0))
        .then_with(|| {
            b.beta_row
                .iter()
                .zip(&a.beta_row)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// Exhaustive search over symmetric policies, every station sharing the row and ICW.
pub fn analytic_grid_search(
    cfg: &NetworkConfig,
    rates: &Matrix<f64>,
    spec: &GridSpec,
) -> Result<GridSearchResult, BaselineError> {
    spec.validate(cfg)?;
    let rows = spec.beta_rows(cfg.num_links());
    let windows = spec.windows(cfg);
    let candidates: Vec<(&Vec<f64>, u32)> = rows
        .iter()
        .flat_map(|r| windows.iter().map(move |&w| (r, w)))
        .collect();

    let evaluated: Vec<Option<GridPoint>> = candidates
        .par_iter()
        .map(|&(row, w0)| {
            let policy = PolicyMatrix::symmetric(cfg.num_stas, row).ok()?;
            let icw = IcwMatrix::constant(cfg, w0).ok()?;
            match solve_fixed_point(cfg, &policy, &icw, rates) {
                Ok(sol) => Some(GridPoint {
                    beta_row: row.clone(),
                    w0,
                    r_total: sol.r_total,
                }),
                Err(err) => {
                    tracing::warn!(?row, w0, %err, "grid point skipped");
                    None
                }
            }
        })
        .collect();

    let skipped = evaluated.iter().filter(|p| p.is_none()).count();
    let best = evaluated
        .into_iter()
        .flatten()
        .min_by(rank)
        .ok_or(BaselineError::NoConvergedPoint { skipped })?;
    Ok(GridSearchResult {
        policy: PolicyMatrix::symmetric(cfg.num_stas, &best.beta_row)?,
        icw: IcwMatrix::constant(cfg, best.w0)?,
        evaluated: candidates.len() - skipped,
        skipped,
        best,
    })
}

pub struct AnalyticGrid {
    spec: GridSpec,
}

impl AnalyticGrid {
    pub fn new(cfg: &NetworkConfig, spec: GridSpec) -> Result<Self, BaselineError> {
        spec.validate(cfg)?;
        Ok(Self { spec })
    }
}

impl AllocationStrategy for AnalyticGrid {
    fn name(&self) -> &str {
        "analytic_grid"
    }

    fn decide(&self, ctx: &DecisionContext) -> Result<(PolicyMatrix, IcwMatrix), BaselineError> {
        let res = analytic_grid_search(ctx.cfg, ctx.rates, &self.spec)?;
        Ok((res.policy, res.icw))
    }
}
