//! Strict TOML scenario configuration. Parsing validates every field and
//! reports the complete list of violations, each naming the offending key,
//! rather than stopping at the first problem.

use std::collections::BTreeSet;
use std::fmt;

use toml::{Table, Value};

/// One named configuration problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub key: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn as_str(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationParams {
    pub epsilon: f64,
    pub n_sites: usize,
    pub sigma: f64,
    pub center: f64,
    pub ell_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseParams {
    pub probs: Vec<f64>,
    pub n_constituents: usize,
    pub distance: f64,
    pub resolution: f64,
    pub t_rise: f64,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverScenarioParams {
    pub p0: f64,
    pub slope: f64,
    pub delta_re: f64,
    pub delta_im: f64,
    pub t0: f64,
    pub n_points: usize,
    /// Half-width of the emitted time range, in crossover windows.
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitBlockParams {
    pub weights: Vec<f64>,
    pub env_overlap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitParams {
    pub outer_probs: Vec<f64>,
    pub blocks: Vec<SplitBlockParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceParams {
    pub probs: Vec<f64>,
    /// Fraction of each label's weight spread uniformly across clusters.
    pub leak: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeigerParams {
    pub gamma: f64,
    pub eta: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleParams {
    pub gaussian_ratios: Vec<f64>,
    pub gaussian_sites: usize,
    pub gaussian_levels: usize,
    pub box_a: f64,
    pub box_width: f64,
    pub box_sites: usize,
    pub box_levels: usize,
    pub tolerance: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            gaussian_ratios: vec![0.1, 1.0, 4.0, 100.0],
            gaussian_sites: 600,
            gaussian_levels: 11,
            box_a: 200.0,
            box_width: 1.0,
            box_sites: 400,
            box_levels: 20,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioParams {
    Localization(LocalizationParams),
    MeasurementCollapse(CollapseParams),
    Crossover(CrossoverScenarioParams),
    DegeneracySplit(SplitParams),
    ImperfectDevice(DeviceParams),
    DecayGeiger(GeigerParams),
    OracleCheck(OracleParams),
}

impl ScenarioParams {
    pub fn scenario_name(&self) -> &'static str {
        match self {
            ScenarioParams::Localization(_) => "localization",
            ScenarioParams::MeasurementCollapse(_) => "measurement_collapse",
            ScenarioParams::Crossover(_) => "crossover",
            ScenarioParams::DegeneracySplit(_) => "degeneracy_split",
            ScenarioParams::ImperfectDevice(_) => "imperfect_device",
            ScenarioParams::DecayGeiger(_) => "decay_geiger",
            ScenarioParams::OracleCheck(_) => "oracle_check",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub params: ScenarioParams,
    pub seed: u64,
    pub n_trajectories: usize,
    pub output_dir: String,
    pub output_format: OutputFormat,
}

// ---------------------------------------------------------------------------
// parsing helpers

struct Reader<'a> {
    table: &'a Table,
    prefix: &'a str,
    used: BTreeSet<String>,
    violations: Vec<Violation>,
}

impl<'a> Reader<'a> {
    fn new(table: &'a Table, prefix: &'a str) -> Self {
        Self { table, prefix, used: BTreeSet::new(), violations: Vec::new() }
    }

    fn qualify(&self, key: &str) -> String {
        if self.prefix.is_empty() {
            key.to_string()
        } else {
            format!("{}.{}", self.prefix, key)
        }
    }

    fn bad(&mut self, key: &str, message: impl Into<String>) {
        self.violations.push(Violation { key: self.qualify(key), message: message.into() });
    }

    fn raw(&mut self, key: &str) -> Option<&'a Value> {
        self.used.insert(key.to_string());
        self.table.get(key)
    }

    fn f64(&mut self, key: &str) -> Option<f64> {
        match self.raw(key) {
            Some(Value::Float(x)) => Some(*x),
            Some(Value::Integer(x)) => Some(*x as f64),
            Some(_) => {
                self.bad(key, "expected a number");
                None
            }
            None => {
                self.bad(key, "missing required key");
                None
            }
        }
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Option<f64> {
        match self.raw(key) {
            Some(Value::Float(x)) => Some(*x),
            Some(Value::Integer(x)) => Some(*x as f64),
            Some(_) => {
                self.bad(key, "expected a number");
                None
            }
            None => Some(default),
        }
    }

    fn usize_field(&mut self, key: &str, default: Option<usize>) -> Option<usize> {
        match self.raw(key) {
            Some(Value::Integer(x)) if *x >= 0 => Some(*x as usize),
            Some(Value::Integer(_)) => {
                self.bad(key, "expected a nonnegative integer");
                None
            }
            Some(_) => {
                self.bad(key, "expected an integer");
                None
            }
            None => match default {
                Some(d) => Some(d),
                None => {
                    self.bad(key, "missing required key");
                    None
                }
            },
        }
    }

    fn u64_or(&mut self, key: &str, default: u64) -> Option<u64> {
        match self.raw(key) {
            Some(Value::Integer(x)) if *x >= 0 => Some(*x as u64),
            Some(Value::Integer(_)) => {
                self.bad(key, "expected a nonnegative integer");
                None
            }
            Some(_) => {
                self.bad(key, "expected an integer");
                None
            }
            None => Some(default),
        }
    }

    fn string_or(&mut self, key: &str, default: &str) -> Option<String> {
        match self.raw(key) {
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.bad(key, "expected a string");
                None
            }
            None => Some(default.to_string()),
        }
    }

    fn f64_array(&mut self, key: &str, default: Option<Vec<f64>>) -> Option<Vec<f64>> {
        match self.raw(key) {
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    match item {
                        Value::Float(x) => out.push(*x),
                        Value::Integer(x) => out.push(*x as f64),
                        _ => {
                            self.bad(key, format!("element {i} is not a number"));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            Some(_) => {
                self.bad(key, "expected an array of numbers");
                None
            }
            None => match default {
                Some(d) => Some(d),
                None => {
                    self.bad(key, "missing required key");
                    None
                }
            },
        }
    }

    /// Every key in the table must have been consumed.
    fn finish_unknown(&mut self) {
        let keys: Vec<String> = self
            .table
            .keys()
            .filter(|k| !self.used.contains(*k))
            .cloned()
            .collect();
        for k in keys {
            self.bad(&k, "unknown key");
        }
    }
}

fn check_distribution(r: &mut Reader<'_>, key: &str, probs: &[f64]) -> bool {
    if probs.is_empty() {
        r.bad(key, "must not be empty");
        return false;
    }
    let mut ok = true;
    for (i, p) in probs.iter().enumerate() {
        if *p < 0.0 || !p.is_finite() {
            r.bad(key, format!("element {i} = {p} is not a probability"));
            ok = false;
        }
    }
    let sum: f64 = probs.iter().sum();
    if ok && (sum - 1.0).abs() > 1e-9 {
        r.bad(key, format!("must sum to 1 within 1e-9, got {sum}"));
        ok = false;
    }
    ok
}

fn positive(r: &mut Reader<'_>, key: &str, x: f64) -> bool {
    if x > 0.0 && x.is_finite() {
        true
    } else {
        r.bad(key, format!("must be positive and finite, got {x}"));
        false
    }
}

// ---------------------------------------------------------------------------
// per-scenario parameter parsing

fn parse_localization(r: &mut Reader<'_>) -> Option<LocalizationParams> {
    let epsilon = r.f64("epsilon")?;
    positive(r, "epsilon", epsilon);
    let n_sites = r.usize_field("n_sites", None)?;
    if n_sites < 2 {
        r.bad("n_sites", format!("need at least 2 sites, got {n_sites}"));
    }
    let sigma = r.f64("sigma")?;
    positive(r, "sigma", sigma);
    let center = r.f64_or("center", 0.0)?;
    let ell_values = r.f64_array("ell_values", None)?;
    if ell_values.is_empty() {
        r.bad("ell_values", "must not be empty");
    }
    for (i, ell) in ell_values.iter().enumerate() {
        if *ell <= 0.0 {
            r.bad("ell_values", format!("element {i} = {ell} must be positive"));
        }
    }
    Some(LocalizationParams { epsilon, n_sites, sigma, center, ell_values })
}

fn parse_collapse(r: &mut Reader<'_>) -> Option<CollapseParams> {
    let probs = r.f64_array("probs", None)?;
    check_distribution(r, "probs", &probs);
    if probs.len() < 2 {
        r.bad("probs", "need at least 2 outcomes");
    }
    let n_constituents = r.usize_field("n_constituents", None)?;
    if n_constituents == 0 {
        r.bad("n_constituents", "must be at least 1");
    }
    let distance = r.f64("distance")?;
    positive(r, "distance", distance);
    let resolution = r.f64("resolution")?;
    positive(r, "resolution", resolution);
    let t_rise = r.f64("t_rise")?;
    positive(r, "t_rise", t_rise);
    let times = r.f64_array("times", None)?;
    if times.is_empty() {
        r.bad("times", "must not be empty");
    }
    for (i, t) in times.iter().enumerate() {
        if *t < 0.0 {
            r.bad("times", format!("element {i} = {t} must be nonnegative"));
        }
    }
    Some(CollapseParams { probs, n_constituents, distance, resolution, t_rise, times })
}

fn parse_crossover(r: &mut Reader<'_>) -> Option<CrossoverScenarioParams> {
    let p0 = r.f64("p0")?;
    if !(p0 > 0.0 && p0 < 1.0) {
        r.bad("p0", format!("must lie strictly between 0 and 1, got {p0}"));
    }
    let slope = r.f64("slope")?;
    if slope == 0.0 || !slope.is_finite() {
        r.bad("slope", format!("must be nonzero and finite, got {slope}"));
    }
    let delta_re = r.f64_or("delta_re", 0.0)?;
    let delta_im = r.f64_or("delta_im", 0.0)?;
    let t0 = r.f64_or("t0", 0.0)?;
    let n_points = r.usize_field("n_points", Some(41))?;
    if n_points < 2 {
        r.bad("n_points", format!("need at least 2 points, got {n_points}"));
    }
    let half_width = r.f64_or("half_width", 5.0)?;
    positive(r, "half_width", half_width);
    Some(CrossoverScenarioParams { p0, slope, delta_re, delta_im, t0, n_points, half_width })
}

fn parse_split(r: &mut Reader<'_>) -> Option<SplitParams> {
    let outer_probs = r.f64_array("outer_probs", None)?;
    check_distribution(r, "outer_probs", &outer_probs);
    let blocks_raw = match r.raw("blocks") {
        Some(Value::Array(items)) => items.clone(),
        Some(_) => {
            r.bad("blocks", "expected an array of tables");
            return None;
        }
        None => {
            r.bad("blocks", "missing required key");
            return None;
        }
    };
    if blocks_raw.len() != outer_probs.len() {
        r.bad(
            "blocks",
            format!("{} blocks for {} outer probabilities", blocks_raw.len(), outer_probs.len()),
        );
    }
    let mut blocks = Vec::with_capacity(blocks_raw.len());
    for (i, raw) in blocks_raw.iter().enumerate() {
        let Value::Table(t) = raw else {
            r.bad("blocks", format!("element {i} is not a table"));
            continue;
        };
        let prefix = format!("{}.blocks[{i}]", r.prefix);
        let mut br = Reader::new(t, &prefix);
        let weights = br.f64_array("weights", None);
        let env_overlap = br.f64_or("env_overlap", 0.0);
        if let Some(w) = &weights {
            if w.is_empty() {
                br.bad("weights", "must not be empty");
            }
            let norm: f64 = w.iter().map(|x| x * x).sum();
            if !w.is_empty() && (norm - 1.0).abs() > 1e-9 {
                br.bad("weights", format!("squared weights must sum to 1 within 1e-9, got {norm}"));
            }
        }
        if let Some(o) = env_overlap {
            if !(0.0..=1.0).contains(&o) {
                br.bad("env_overlap", format!("must lie in [0, 1], got {o}"));
            }
        }
        br.finish_unknown();
        r.violations.extend(br.violations);
        if let (Some(weights), Some(env_overlap)) = (weights, env_overlap) {
            blocks.push(SplitBlockParams { weights, env_overlap });
        }
    }
    Some(SplitParams { outer_probs, blocks })
}

fn parse_device(r: &mut Reader<'_>) -> Option<DeviceParams> {
    let probs = r.f64_array("probs", None)?;
    check_distribution(r, "probs", &probs);
    let leak = r.f64_or("leak", 0.05)?;
    if !(0.0..1.0).contains(&leak) {
        r.bad("leak", format!("must lie in [0, 1), got {leak}"));
    }
    Some(DeviceParams { probs, leak })
}

fn parse_geiger(r: &mut Reader<'_>) -> Option<GeigerParams> {
    let gamma = r.f64("gamma")?;
    if gamma < 0.0 || !gamma.is_finite() {
        r.bad("gamma", format!("must be nonnegative and finite, got {gamma}"));
    }
    let eta = r.f64("eta")?;
    positive(r, "eta", eta);
    let n_steps = r.usize_field("n_steps", None)?;
    if n_steps == 0 {
        r.bad("n_steps", "must be at least 1");
    }
    if gamma * eta >= 0.1 {
        r.bad(
            "eta",
            format!("gamma * eta = {} violates the validity bound gamma * eta < 0.1", gamma * eta),
        );
    }
    Some(GeigerParams { gamma, eta, n_steps })
}

fn parse_oracle(r: &mut Reader<'_>) -> Option<OracleParams> {
    let d = OracleParams::default();
    let gaussian_ratios = r.f64_array("gaussian_ratios", Some(d.gaussian_ratios))?;
    for (i, x) in gaussian_ratios.iter().enumerate() {
        if *x <= 0.0 {
            r.bad("gaussian_ratios", format!("element {i} = {x} must be positive"));
        }
    }
    let gaussian_sites = r.usize_field("gaussian_sites", Some(d.gaussian_sites))?;
    let gaussian_levels = r.usize_field("gaussian_levels", Some(d.gaussian_levels))?;
    let box_a = r.f64_or("box_a", d.box_a)?;
    positive(r, "box_a", box_a);
    let box_width = r.f64_or("box_width", d.box_width)?;
    positive(r, "box_width", box_width);
    let box_sites = r.usize_field("box_sites", Some(d.box_sites))?;
    let box_levels = r.usize_field("box_levels", Some(d.box_levels))?;
    let tolerance = r.f64_or("tolerance", d.tolerance)?;
    positive(r, "tolerance", tolerance);
    if box_levels == 0 || box_levels > box_sites {
        r.bad("box_levels", format!("must lie in 1..={box_sites}, got {box_levels}"));
    }
    if gaussian_levels == 0 {
        r.bad("gaussian_levels", "must be at least 1");
    }
    Some(OracleParams {
        gaussian_ratios,
        gaussian_sites,
        gaussian_levels,
        box_a,
        box_width,
        box_sites,
        box_levels,
        tolerance,
    })
}

/// Parses and fully validates a scenario config, returning either the config
/// or the complete list of violations.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, Vec<Violation>> {
    let table: Table = match toml::from_str(text) {
        Ok(t) => t,
        Err(e) => {
            return Err(vec![Violation {
                key: "(document)".into(),
                message: format!("not well-formed TOML: {e}"),
            }])
        }
    };
    let mut r = Reader::new(&table, "");
    let scenario = r.string_or("scenario", "");
    let seed = r.u64_or("seed", 0);
    let n_trajectories = r.usize_field("n_trajectories", Some(10_000));
    let output_dir = r.string_or("output_dir", "out");
    let output_format = match r.raw("output_format") {
        Some(Value::String(s)) => match s.as_str() {
            "csv" => Some(OutputFormat::Csv),
            "json" => Some(OutputFormat::Json),
            other => {
                r.bad("output_format", format!("expected \"csv\" or \"json\", got \"{other}\""));
                None
            }
        },
        Some(_) => {
            r.bad("output_format", "expected a string");
            None
        }
        None => Some(OutputFormat::Csv),
    };

    let params_value = r.raw("parameters").cloned();
    r.finish_unknown();
    let mut violations = std::mem::take(&mut r.violations);

    let empty = Table::new();
    let params_table: &Table = match &params_value {
        Some(Value::Table(t)) => t,
        Some(_) => {
            violations.push(Violation {
                key: "parameters".into(),
                message: "expected a table".into(),
            });
            &empty
        }
        None => &empty,
    };

    let params = match scenario.as_deref() {
        Some("") | None => {
            violations.push(Violation {
                key: "scenario".into(),
                message: "missing required key".into(),
            });
            None
        }
        Some(name) => {
            let mut pr = Reader::new(params_table, "parameters");
            let parsed = match name {
                "localization" => parse_localization(&mut pr).map(ScenarioParams::Localization),
                "measurement_collapse" => {
                    parse_collapse(&mut pr).map(ScenarioParams::MeasurementCollapse)
                }
                "crossover" => parse_crossover(&mut pr).map(ScenarioParams::Crossover),
                "degeneracy_split" => parse_split(&mut pr).map(ScenarioParams::DegeneracySplit),
                "imperfect_device" => parse_device(&mut pr).map(ScenarioParams::ImperfectDevice),
                "decay_geiger" => parse_geiger(&mut pr).map(ScenarioParams::DecayGeiger),
                "oracle_check" => parse_oracle(&mut pr).map(ScenarioParams::OracleCheck),
                other => {
                    violations.push(Violation {
                        key: "scenario".into(),
                        message: format!(
                            "unknown scenario \"{other}\" (expected one of localization, \
                             measurement_collapse, crossover, degeneracy_split, \
                             imperfect_device, decay_geiger, oracle_check)"
                        ),
                    });
                    None
                }
            };
            pr.finish_unknown();
            violations.extend(pr.violations);
            parsed
        }
    };

    match (params, seed, n_trajectories, output_dir, output_format, violations.is_empty()) {
        (Some(params), Some(seed), Some(n_trajectories), Some(output_dir), Some(output_format), true) => {
            Ok(ScenarioConfig { params, seed, n_trajectories, output_dir, output_format })
        }
        (_, _, _, _, _, _) => {
            if violations.is_empty() {
                violations.push(Violation {
                    key: "(document)".into(),
                    message: "configuration incomplete".into(),
                });
            }
            Err(violations)
        }
    }
}

// ---------------------------------------------------------------------------
// canonical emission

fn num(x: f64) -> Value {
    Value::Float(x)
}

fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|x| num(*x)).collect())
}

/// Canonical TOML form: fixed key order, every default materialized.
/// `parse_config(canonical_toml(c))` reproduces `c` exactly.
pub fn canonical_toml(config: &ScenarioConfig) -> String {
    let mut top = Table::new();
    top.insert("scenario".into(), Value::String(config.params.scenario_name().into()));
    top.insert("seed".into(), Value::Integer(config.seed as i64));
    top.insert("n_trajectories".into(), Value::Integer(config.n_trajectories as i64));
    top.insert("output_dir".into(), Value::String(config.output_dir.clone()));
    top.insert("output_format".into(), Value::String(config.output_format.as_str().into()));

    let mut p = Table::new();
    match &config.params {
        ScenarioParams::Localization(l) => {
            p.insert("epsilon".into(), num(l.epsilon));
            p.insert("n_sites".into(), Value::Integer(l.n_sites as i64));
            p.insert("sigma".into(), num(l.sigma));
            p.insert("center".into(), num(l.center));
            p.insert("ell_values".into(), nums(&l.ell_values));
        }
        ScenarioParams::MeasurementCollapse(c) => {
            p.insert("probs".into(), nums(&c.probs));
            p.insert("n_constituents".into(), Value::Integer(c.n_constituents as i64));
            p.insert("distance".into(), num(c.distance));
            p.insert("resolution".into(), num(c.resolution));
            p.insert("t_rise".into(), num(c.t_rise));
            p.insert("times".into(), nums(&c.times));
        }
        ScenarioParams::Crossover(c) => {
            p.insert("p0".into(), num(c.p0));
            p.insert("slope".into(), num(c.slope));
            p.insert("delta_re".into(), num(c.delta_re));
            p.insert("delta_im".into(), num(c.delta_im));
            p.insert("t0".into(), num(c.t0));
            p.insert("n_points".into(), Value::Integer(c.n_points as i64));
            p.insert("half_width".into(), num(c.half_width));
        }
        ScenarioParams::DegeneracySplit(s) => {
            p.insert("outer_probs".into(), nums(&s.outer_probs));
            let blocks: Vec<Value> = s
                .blocks
                .iter()
                .map(|b| {
                    let mut t = Table::new();
                    t.insert("weights".into(), nums(&b.weights));
                    t.insert("env_overlap".into(), num(b.env_overlap));
                    Value::Table(t)
                })
                .collect();
            p.insert("blocks".into(), Value::Array(blocks));
        }
        ScenarioParams::ImperfectDevice(d) => {
            p.insert("probs".into(), nums(&d.probs));
            p.insert("leak".into(), num(d.leak));
        }
        ScenarioParams::DecayGeiger(g) => {
            p.insert("gamma".into(), num(g.gamma));
            p.insert("eta".into(), num(g.eta));
            p.insert("n_steps".into(), Value::Integer(g.n_steps as i64));
        }
        ScenarioParams::OracleCheck(o) => {
            p.insert("gaussian_ratios".into(), nums(&o.gaussian_ratios));
            p.insert("gaussian_sites".into(), Value::Integer(o.gaussian_sites as i64));
            p.insert("gaussian_levels".into(), Value::Integer(o.gaussian_levels as i64));
            p.insert("box_a".into(), num(o.box_a));
            p.insert("box_width".into(), num(o.box_width));
            p.insert("box_sites".into(), Value::Integer(o.box_sites as i64));
            p.insert("box_levels".into(), Value::Integer(o.box_levels as i64));
            p.insert("tolerance".into(), num(o.tolerance));
        }
    }
    top.insert("parameters".into(), Value::Table(p));
    toml::to_string(&Value::Table(top)).expect("canonical config serializes")
}
