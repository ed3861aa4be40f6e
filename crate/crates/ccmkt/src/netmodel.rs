//! Network, participant and uncertainty data for a single-period market,
//! with JSON ingestion, validation and parameter variants.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub from: String,
    pub to: String,
    /// Per-unit susceptance, strictly positive.
    pub susceptance: f64,
    /// MW limit applied in both directions.
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub id: String,
    pub bus: String,
    /// Energy cost, $/MWh.
    pub cost: f64,
    /// Upward reserve cost, $/MWh.
    pub up_cost: f64,
    /// Saving per MWh of downward reserve.
    pub down_saving: f64,
    pub capacity: f64,
    pub up_reserve_cap: f64,
    pub down_reserve_cap: f64,
}

/// Aggregate variable renewable source at one bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vres {
    pub bus: String,
    pub cost: f64,
    pub schedule_cap: f64,
    pub forecast: f64,
    /// Standard deviation of the forecast error.
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionFamily>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Load {
    pub id: String,
    pub bus: String,
    pub demand: f64,
    pub curtailment_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    #[default]
    Normal,
    UniformSymmetric,
}

/// A point of a standardized quantile table: `value` is the `prob` quantile
/// of the unit-variance error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantilePoint {
    pub prob: f64,
    pub value: f64,
}

/// Zero-mean, unit-variance symmetric error law. A quantile table, when
/// present, overrides the closed form of the family for upper-tail
/// probabilities and is mirrored for the lower tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DistributionFamily {
    #[serde(default)]
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantile_table: Option<Vec<QuantilePoint>>,
}

impl DistributionFamily {
    pub fn normal() -> Self {
        Self::default()
    }

    pub fn uniform() -> Self {
        Self { family: Family::UniformSymmetric, quantile_table: None }
    }
}

/// A validated market description. Build with [`parse_network`] or
/// [`MarketCase::from_parts`]; fields are read-only by convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketCase {
    pub buses: Vec<String>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub vres: Vec<Vres>,
    pub loads: Vec<Load>,
    pub epsilon: f64,
    pub reference_bus: String,
    #[serde(default)]
    pub distribution: DistributionFamily,
}

/// VRES parameters resolved for a bus; zero everywhere when none is declared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusVres {
    pub cost: f64,
    pub schedule_cap: f64,
    pub forecast: f64,
    pub sigma: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum CaseError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid case:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

impl MarketCase {
    pub fn from_parts(mut case: MarketCase) -> Result<MarketCase, CaseError> {
        case.canonicalize();
        case.validate()?;
        Ok(case)
    }

    fn canonicalize(&mut self) {
        for v in &mut self.vres {
            if v.distribution.as_ref() == Some(&self.distribution) {
                v.distribution = None;
            }
        }
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b == id)
    }

    pub fn generator_index(&self, id: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.id == id)
    }

    pub fn reference_index(&self) -> usize {
        self.bus_index(&self.reference_bus).expect("validated reference bus")
    }

    pub fn generator_bus(&self, i: usize) -> usize {
        self.bus_index(&self.generators[i].bus).expect("validated generator bus")
    }

    pub fn load_bus(&self, j: usize) -> usize {
        self.bus_index(&self.loads[j].bus).expect("validated load bus")
    }

    pub fn line_ends(&self, k: usize) -> (usize, usize) {
        let l = &self.lines[k];
        (
            self.bus_index(&l.from).expect("validated line end"),
            self.bus_index(&l.to).expect("validated line end"),
        )
    }

    pub fn vres_at(&self, n: usize) -> BusVres {
        let id = &self.buses[n];
        match self.vres.iter().find(|v| &v.bus == id) {
            Some(v) => BusVres { cost: v.cost, schedule_cap: v.schedule_cap, forecast: v.forecast, sigma: v.sigma },
            None => BusVres { cost: 0.0, schedule_cap: 0.0, forecast: 0.0, sigma: 0.0 },
        }
    }

    /// Error law at a bus: its own override or the case-wide default.
    pub fn distribution_at(&self, n: usize) -> &DistributionFamily {
        let id = &self.buses[n];
        self.vres
            .iter()
            .find(|v| &v.bus == id)
            .and_then(|v| v.distribution.as_ref())
            .unwrap_or(&self.distribution)
    }

    pub fn total_demand(&self) -> f64 {
        self.loads.iter().map(|l| l.demand).sum()
    }

    /// Checks every invariant and reports all failures at once.
    pub fn validate(&self) -> Result<(), CaseError> {
        let mut errs = Vec::new();
        if self.buses.is_empty() {
            errs.push("buses: list is empty".to_string());
        }
        let mut seen = HashSet::new();
        for b in &self.buses {
            if !seen.insert(b) {
                errs.push(format!("buses: duplicate bus `{b}`"));
            }
        }
        let known = |b: &str| self.buses.iter().any(|x| x == b);
        if !known(&self.reference_bus) {
            errs.push(format!("reference_bus: unknown bus `{}`", self.reference_bus));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            errs.push(format!("epsilon: {} is outside (0, 0.5)", self.epsilon));
        }
        let mut pairs = HashSet::new();
        for (k, l) in self.lines.iter().enumerate() {
            let at = format!("lines[{k}]");
            for end in [&l.from, &l.to] {
                if !known(end) {
                    errs.push(format!("{at}: unknown bus `{end}`"));
                }
            }
            if l.from == l.to {
                errs.push(format!("{at}: both ends at bus `{}`", l.from));
            }
            let key = if l.from < l.to { (l.from.clone(), l.to.clone()) } else { (l.to.clone(), l.from.clone()) };
            if !pairs.insert(key) {
                errs.push(format!("{at}: duplicate line between `{}` and `{}`", l.from, l.to));
            }
            if !(l.susceptance.is_finite() && l.susceptance > 0.0) {
                errs.push(format!("{at}.susceptance: must be finite and > 0"));
            }
            nonneg(&mut errs, &format!("{at}.capacity"), l.capacity);
        }
        let mut ids = HashSet::new();
        for (i, g) in self.generators.iter().enumerate() {
            let at = format!("generators[{i}] `{}`", g.id);
            if !ids.insert(&g.id) {
                errs.push(format!("{at}: duplicate generator id"));
            }
            if !known(&g.bus) {
                errs.push(format!("{at}: unknown bus `{}`", g.bus));
            }
            for (name, v) in [
                ("cost", g.cost),
                ("up_cost", g.up_cost),
                ("down_saving", g.down_saving),
                ("capacity", g.capacity),
                ("up_reserve_cap", g.up_reserve_cap),
                ("down_reserve_cap", g.down_reserve_cap),
            ] {
                nonneg(&mut errs, &format!("{at}.{name}"), v);
            }
        }
        let mut vres_buses = HashSet::new();
        for (k, v) in self.vres.iter().enumerate() {
            let at = format!("vres[{k}]");
            if !known(&v.bus) {
                errs.push(format!("{at}: unknown bus `{}`", v.bus));
            }
            if !vres_buses.insert(&v.bus) {
                errs.push(format!("{at}: second VRES aggregate at bus `{}`", v.bus));
            }
            for (name, x) in [
                ("cost", v.cost),
                ("schedule_cap", v.schedule_cap),
                ("forecast", v.forecast),
                ("sigma", v.sigma),
            ] {
                nonneg(&mut errs, &format!("{at}.{name}"), x);
            }
            if let Some(d) = &v.distribution {
                check_distribution(&mut errs, &format!("{at}.distribution"), d);
            }
        }
        check_distribution(&mut errs, "distribution", &self.distribution);
        let mut load_ids = HashSet::new();
        for (j, l) in self.loads.iter().enumerate() {
            let at = format!("loads[{j}] `{}`", l.id);
            if !load_ids.insert(&l.id) {
                errs.push(format!("{at}: duplicate load id"));
            }
            if !known(&l.bus) {
                errs.push(format!("{at}: unknown bus `{}`", l.bus));
            }
            nonneg(&mut errs, &format!("{at}.demand"), l.demand);
            nonneg(&mut errs, &format!("{at}.curtailment_cost"), l.curtailment_cost);
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CaseError::Invalid(errs))
        }
    }

    /// Non-fatal observations, e.g. a forecast above the schedule cap.
    pub fn warnings(&self) -> Vec<String> {
        self.vres
            .iter()
            .filter(|v| v.forecast > v.schedule_cap)
            .map(|v| format!("vres at bus `{}`: forecast {} exceeds schedule cap {}", v.bus, v.forecast, v.schedule_cap))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("case serializes")
    }
}

fn nonneg(errs: &mut Vec<String>, at: &str, v: f64) {
    if !(v.is_finite() && v >= 0.0) {
        errs.push(format!("{at}: {v} must be finite and >= 0"));
    }
}

fn check_distribution(errs: &mut Vec<String>, at: &str, d: &DistributionFamily) {
    if let Some(table) = &d.quantile_table {
        if table.is_empty() {
            errs.push(format!("{at}.quantile_table: empty"));
        }
        let mut last = (0.5, 0.0);
        for (k, pt) in table.iter().enumerate() {
            if !(pt.prob > last.0 && pt.prob < 1.0 && pt.value.is_finite() && pt.value >= last.1) {
                errs.push(format!(
                    "{at}.quantile_table[{k}]: points need increasing prob in (0.5, 1) and nondecreasing values"
                ));
                break;
            }
            last = (pt.prob, pt.value);
        }
    }
}

/// Parses and validates a JSON case document.
pub fn parse_network(document: &str) -> Result<MarketCase, CaseError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let case: MarketCase = serde_path_to_error::deserialize(de).map_err(|e| CaseError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    MarketCase::from_parts(case)
}

pub fn load_case(path: impl AsRef<Path>) -> Result<MarketCase, CaseError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CaseError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_network(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorField {
    UpReserveCap,
    DownReserveCap,
    UpCost,
    DownSaving,
}

/// Per-generator override of one field: either absolute values (`set`) or
/// multipliers (`scale`), keyed by generator id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Override {
    pub field: GeneratorField,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub set: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub scale: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CaseVariant {
    #[serde(default)]
    pub name: String,
    /// Base case file, relative to the variant file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
    #[serde(default)]
    pub overrides: Vec<Override>,
}

pub fn parse_variant(document: &str) -> Result<CaseVariant, CaseError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    serde_path_to_error::deserialize(de).map_err(|e| CaseError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

/// Returns a new case with the overrides applied; `base` is left untouched.
pub fn apply_case_variant(base: &MarketCase, variant: &CaseVariant) -> Result<MarketCase, CaseError> {
    let mut out = base.clone();
    let mut errs = Vec::new();
    for (k, ov) in variant.overrides.iter().enumerate() {
        for (id, _) in ov.set.iter().chain(ov.scale.iter()) {
            if base.generator_index(id).is_none() {
                errs.push(format!("overrides[{k}]: unknown generator `{id}`"));
            }
        }
        for g in out.generators.iter_mut() {
            let slot = match ov.field {
                GeneratorField::UpReserveCap => &mut g.up_reserve_cap,
                GeneratorField::DownReserveCap => &mut g.down_reserve_cap,
                GeneratorField::UpCost => &mut g.up_cost,
                GeneratorField::DownSaving => &mut g.down_saving,
            };
            if let Some(v) = ov.set.get(&g.id) {
                *slot = *v;
            }
            if let Some(f) = ov.scale.get(&g.id) {
                *slot *= *f;
            }
        }
    }
    if !errs.is_empty() {
        return Err(CaseError::Invalid(errs));
    }
    out.validate()?;
    Ok(out)
}

/// Loads a variant file and its base case, returning the derived case.
pub fn load_variant_case(path: impl AsRef<Path>) -> Result<MarketCase, CaseError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CaseError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let variant = parse_variant(&text)?;
    let base_rel = variant.base.clone().ok_or_else(|| CaseError::Invalid(vec!["base: missing".into()]))?;
    let base_path = path.parent().unwrap_or(Path::new(".")).join(base_rel);
    let base = if base_path.to_string_lossy().ends_with(".variant.json") {
        load_variant_case(&base_path)?
    } else {
        load_case(&base_path)?
    };
    apply_case_variant(&base, &variant)
}

/// Loads either a case file or a `*.variant.json` file.
pub fn load_any_case(path: impl AsRef<Path>) -> Result<MarketCase, CaseError> {
    let path = path.as_ref();
    if path.to_string_lossy().ends_with(".variant.json") {
        load_variant_case(path)
    } else {
        load_case(path)
    }
}
