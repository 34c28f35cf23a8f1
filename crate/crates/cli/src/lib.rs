//! Config loading and report generation behind the `fundcost` binary.

use std::fmt;
use std::path::{Path, PathBuf};

use fundcost::alm::{self, AlmParams};
use fundcost::brownian::{self, BrownianParams};
use fundcost::laplace_ode::{self, SolverConfig};
use fundcost::model::{classify_fund, DiffusionSpec, FundClass, FundParams};
use fundcost::montecarlo::{self, SimConfig};
use fundcost::renewal::{self, CostCurve, FirstPassageLaw, Method, TimeGrid};
use fundcost::Error;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub mod validate;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
pub const EXIT_PRECONDITION: i32 = 4;
pub const EXIT_VALIDATION: i32 = 5;

#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Config(String),
    Precondition(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Precondition(_) => EXIT_PRECONDITION,
            Failure::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Precondition(m) => write!(f, "{m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::Parse { .. } => Failure::Config(e.to_string()),
            e if e.is_precondition() => Failure::Precondition(e.to_string()),
            e => Failure::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// e.g. `brownian(mu=-0.5, sigma=1)` or `affine(c0=-0.2, c1=-0.3, sigma=1)`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffusion_sq: Option<String>,
}

impl ModelSection {
    pub fn spec(&self) -> CliResult<DiffusionSpec> {
        match (&self.preset, &self.drift, &self.diffusion_sq) {
            (Some(p), None, None) => Ok(DiffusionSpec::from_preset(p)?),
            (None, Some(d), Some(s)) => Ok(DiffusionSpec::from_exprs(d, s)?),
            (None, Some(_), None) => Err(Failure::Config("model: missing field `diffusion_sq`".into())),
            (None, None, Some(_)) => Err(Failure::Config("model: missing field `drift`".into())),
            (None, None, None) => Err(Failure::Config(
                "model: give either `preset` or both `drift` and `diffusion_sq`".into(),
            )),
            _ => Err(Failure::Config("model: `preset` excludes `drift`/`diffusion_sq`".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FundSection {
    pub a: f64,
    pub theta: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlmSection {
    pub b: f64,
    pub a: f64,
    pub rho: f64,
    pub mu: f64,
    pub sigma: f64,
    pub theta: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Report times for finite-horizon modes.
    pub times: Vec<f64>,
    /// Step of the uniform grid used by the series and renewal solvers.
    pub step: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            times: Vec::new(),
            step: 0.01,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

/// Everything a run depends on. Reports echo it after defaults and flag
/// overrides are applied.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fund: Option<FundSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alm: Option<AlmSection>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub times: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Failure::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn apply(&mut self, o: &Overrides) -> CliResult<()> {
        if let Some(s) = o.seed {
            self.sim.seed = s;
        }
        if let Some(f) = o.format {
            self.output.format = Some(f);
        }
        if let Some(p) = &o.out {
            self.output.path = Some(p.clone());
        }
        if let Some(t) = &o.times {
            self.grid.times = t.clone();
        }
        self.check()
    }

    fn check(&self) -> CliResult<()> {
        if self.model.is_some() && self.alm.is_some() {
            return Err(Failure::Config("give exactly one of [model] and [alm]".into()));
        }
        if let Some(m) = &self.model {
            m.spec()?;
        }
        if let Some(f) = &self.fund {
            FundParams::new(f.a, f.theta, f.r)?;
        }
        if let Some(a) = &self.alm {
            a.params()?;
        }
        self.solver.validate()?;
        self.sim.validate()?;
        let g = &self.grid;
        if !(g.step > 0.0) {
            return Err(Failure::Config("grid: `step` must be positive".into()));
        }
        if g.times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Failure::Config("grid: `times` must be non-negative".into()));
        }
        Ok(())
    }

    pub fn spec(&self) -> CliResult<DiffusionSpec> {
        self.model
            .as_ref()
            .ok_or_else(|| Failure::Config("this command needs a [model] section".into()))?
            .spec()
    }

    pub fn fund(&self) -> CliResult<FundParams> {
        let f = self
            .fund
            .ok_or_else(|| Failure::Config("this command needs a [fund] section".into()))?;
        Ok(FundParams::new(f.a, f.theta, f.r)?)
    }

    pub fn alm(&self) -> CliResult<AlmParams> {
        self.alm
            .ok_or_else(|| Failure::Config("this command needs an [alm] section".into()))?
            .params()
    }

    fn times(&self) -> CliResult<Vec<f64>> {
        if self.grid.times.is_empty() {
            return Err(Failure::Config(
                "finite-horizon modes need report times ([grid] times or --t)".into(),
            ));
        }
        let mut t = self.grid.times.clone();
        t.sort_by(f64::total_cmp);
        t.dedup();
        Ok(t)
    }
}

impl AlmSection {
    fn params(&self) -> CliResult<AlmParams> {
        Ok(AlmParams::new(self.b, self.a, self.rho, self.mu, self.sigma, self.theta, self.r)?)
    }
}

/// A finished report and the exit code it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    pub code: i32,
}

fn json_report(command: &str, mode: Option<&str>, result: Value, cfg: &RunConfig) -> String {
    #[derive(Serialize)]
    struct Out<'a> {
        command: &'a str,
        #[serde(skip_serializing_if = "Option::is_none")]
        mode: Option<&'a str>,
        result: Value,
        config: &'a RunConfig,
    }
    let mut s = serde_json::to_string_pretty(&Out {
        command,
        mode,
        result,
        config: cfg,
    })
    .expect("reports are plain data");
    s.push('\n');
    s
}

fn curve_report(command: &str, mode: &str, curve: &CostCurve, extra: Value, cfg: &RunConfig) -> String {
    match cfg.output.format.unwrap_or(Format::Csv) {
        Format::Csv => curve.to_csv(),
        Format::Json => {
            let mut v = serde_json::to_value(curve).expect("plain data");
            if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
                m.extend(e);
            }
            json_report(command, Some(mode), v, cfg)
        }
    }
}

fn scalar_report(command: &str, mode: &str, result: Value, cfg: &RunConfig) -> CliResult<String> {
    match cfg.output.format.unwrap_or(Format::Json) {
        Format::Json => Ok(json_report(command, Some(mode), result, cfg)),
        Format::Csv => Err(Failure::Config(format!("mode `{mode}` produces a scalar; use --format json"))),
    }
}

pub fn cmd_classify(cfg: &RunConfig, strict: bool) -> CliResult<Report> {
    let spec = cfg.spec()?;
    let c = classify_fund(&spec);
    let result = json!({
        "classification": c.class,
        "scale": c.scale,
        "speed": c.speed,
    });
    let code = if strict && c.class == FundClass::Inconclusive {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_OK
    };
    Ok(Report {
        text: json_report("classify", None, result, cfg),
        code,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CostMode {
    Perpetual,
    Finite,
    Asymptotic,
    Series,
    Renewal,
    Montecarlo,
}

impl CostMode {
    fn name(self) -> &'static str {
        match self {
            CostMode::Perpetual => "perpetual",
            CostMode::Finite => "finite",
            CostMode::Asymptotic => "asymptotic",
            CostMode::Series => "series",
            CostMode::Renewal => "renewal",
            CostMode::Montecarlo => "montecarlo",
        }
    }
}

/// Closed-form parameters when the model is a Brownian reserve and the
/// general solver was not requested.
fn closed_form(spec: &DiffusionSpec, force_general: bool) -> Option<BrownianParams> {
    if force_general {
        return None;
    }
    let (mu, sigma) = spec.constant_params()?;
    BrownianParams::new(mu, sigma).ok()
}

fn passage_laws(
    spec: &DiffusionSpec,
    f: &FundParams,
    closed: Option<BrownianParams>,
    sim: &SimConfig,
) -> CliResult<(FirstPassageLaw, FirstPassageLaw)> {
    Ok(match closed {
        Some(p) => (
            FirstPassageLaw::brownian(&p, f.a, f.r)?,
            FirstPassageLaw::brownian(&p, f.theta, f.r)?,
        ),
        None => (
            montecarlo::empirical_passage_law(spec, f.a, f.r, sim)?,
            montecarlo::empirical_passage_law(spec, f.theta, f.r, sim)?,
        ),
    })
}

fn sample_curve(full: &CostCurve, times: &[f64]) -> CostCurve {
    let (w, err) = times.iter().map(|t| full.at(*t)).unzip();
    CostCurve {
        t: times.to_vec(),
        w,
        err,
        method: full.method,
    }
}

pub fn cmd_cost(cfg: &RunConfig, mode: CostMode, force_general: bool) -> CliResult<Report> {
    let spec = cfg.spec()?;
    let f = cfg.fund()?;
    let closed = closed_form(&spec, force_general);
    let route = if closed.is_some() { "closed_form" } else { "general" };
    let name = mode.name();
    let text = match mode {
        CostMode::Perpetual => {
            let (value, limit, err) = match closed {
                Some(p) => (brownian::perpetual_cost(&p, &f), brownian::perpetual_cost_limit(&p, f.a, f.r)?, 0.0),
                None => {
                    let v = laplace_ode::perpetual_cost_general(&spec, &f, &cfg.solver)?;
                    let l = laplace_ode::perpetual_cost_general_limit(&spec, f.a, f.r, &cfg.solver)?;
                    (v, l, 10.0 * cfg.solver.rel_tol * v)
                }
            };
            scalar_report(
                "cost",
                name,
                json!({"method": route, "value": value, "err": err, "small_injection_limit": limit}),
                cfg,
            )?
        }
        CostMode::Asymptotic => {
            let times = cfg.times()?;
            let first = match closed {
                Some(p) => brownian::finite_cost_approx(&p, &f, times[0])?,
                None => laplace_ode::finite_cost_asymptotic_general(&spec, &f, times[0], &cfg.solver)?,
            };
            let curve = CostCurve {
                w: times
                    .iter()
                    .map(|t| first.perpetual - first.coefficient * (-first.decay_rate * t).exp())
                    .collect(),
                err: vec![0.0; times.len()],
                t: times,
                method: Method::Asymptotic,
            };
            let extra = json!({
                "route": route,
                "perpetual": first.perpetual,
                "coefficient": first.coefficient,
                "decay_rate": first.decay_rate,
                // earlier times are outside the regime the expansion targets
                "regime_start": 1.0 / first.decay_rate,
            });
            curve_report("cost", name, &curve, extra, cfg)
        }
        CostMode::Finite | CostMode::Renewal | CostMode::Series => {
            let times = cfg.times()?;
            let t_max = times[times.len() - 1].max(cfg.grid.step);
            let grid = TimeGrid::new(t_max, cfg.grid.step)?;
            let (first, step) = passage_laws(&spec, &f, closed, &cfg.sim)?;
            let full = if mode == CostMode::Series {
                let n = renewal::required_terms(&first, &step, &f, renewal::SERIES_TOL);
                renewal::series_curve(&first, &step, &f, &grid, n)?
            } else {
                renewal::solve_renewal_equation(&first, &step, &f, &grid)?
            };
            let curve = sample_curve(&full, &times);
            curve_report("cost", name, &curve, json!({"route": route}), cfg)
        }
        CostMode::Montecarlo => {
            if cfg.grid.times.is_empty() {
                let e = montecarlo::estimate_perpetual(&spec, &f, &cfg.sim)?;
                scalar_report("cost", name, serde_json::to_value(e).expect("plain data"), cfg)?
            } else {
                let times = cfg.times()?;
                let curve = montecarlo::estimate_finite(&spec, &f, &times, &cfg.sim)?;
                curve_report("cost", name, &curve, json!({}), cfg)
            }
        }
    };
    Ok(Report { text, code: EXIT_OK })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AlmMode {
    Perpetual,
    Finite,
    Simulate,
}

pub fn cmd_alm(cfg: &RunConfig, mode: AlmMode) -> CliResult<Report> {
    let p = cfg.alm()?;
    let text = match mode {
        AlmMode::Perpetual => scalar_report(
            "alm",
            "perpetual",
            json!({
                "value": alm::perpetual_cost_alm(&p),
                "small_injection_limit": alm::perpetual_cost_alm_limit(&p)?,
                "injection_multiplier": p.injection_multiplier(),
                "net_rate": p.net_rate(),
                "sign_diagnostic": p.sign_diagnostic(),
            }),
            cfg,
        )?,
        AlmMode::Finite => {
            let times = cfg.times()?;
            let pts = times
                .iter()
                .map(|t| alm::finite_cost_alm(&p, *t))
                .collect::<Result<Vec<_>, _>>()?;
            let curve = CostCurve {
                w: pts.iter().map(|c| c.value).collect(),
                err: vec![0.0; times.len()],
                t: times,
                method: Method::Asymptotic,
            };
            let extra = json!({
                "perpetual": pts[0].perpetual,
                "coefficient": pts[0].coefficient,
                "decay_rate": pts[0].decay_rate,
            });
            curve_report("alm", "finite", &curve, extra, cfg)
        }
        AlmMode::Simulate => {
            let e = montecarlo::simulate_alm(&p, &cfg.sim)?;
            scalar_report("alm", "simulate", serde_json::to_value(e).expect("plain data"), cfg)?
        }
    };
    Ok(Report { text, code: EXIT_OK })
}

pub fn cmd_validate(cfg: &RunConfig) -> CliResult<Report> {
    let checks = validate::run_checks(cfg)?;
    let passed = checks.iter().all(|c| c.status != validate::Status::Fail);
    let result = json!({"passed": passed, "bridge_correction": true, "checks": checks});
    Ok(Report {
        text: json_report("validate", None, result, cfg),
        code: if passed { EXIT_OK } else { EXIT_VALIDATION },
    })
}
