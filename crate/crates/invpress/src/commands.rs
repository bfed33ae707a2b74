//! One function per subcommand. Each returns the JSON report, an optional
//! CSV table and, for runs that finish but fail a check, the error that
//! decides the exit code.

use invpress_core::controlset::{
    estimate_control_set, shrink_hull, ControlSetApprox, ControlSetOptions,
};
use invpress_core::model::{CompactSet, LinearSystem, System};
use invpress_core::pressure::{
    estimate_pressure, outer_pressure_series, theorem_bounds, PressureReport,
};
use invpress_core::simulate::{floquet_exponents, ExponentSpectrum, FloquetOptions};
use invpress_core::spectral::{formula_pressure, FormulaOptions};
use serde::Serialize;

use crate::config::{literal_set, ConfigError, RunConfig, SetSpec};
use crate::error::CliError;
use crate::report::{hull_csv, read_control, series_csv, spectrum_csv, Envelope};
use crate::verify::{run_verify_example, table, VerifyCase, VerifyOptions};

#[derive(Debug, Default)]
pub struct CommandOutput {
    pub json: String,
    pub csv: Option<String>,
    /// Human-readable summary for stdout when JSON goes to a file.
    pub text: Option<String>,
    pub status: Option<CliError>,
}

fn linear<'a>(sys: &'a System, what: &str) -> Result<&'a LinearSystem, CliError> {
    sys.as_linear().ok_or_else(|| {
        ConfigError {
            path: "system.kind".into(),
            message: format!("{what} needs a linear system"),
        }
        .into()
    })
}

fn control_set_options(cfg: &RunConfig) -> ControlSetOptions {
    ControlSetOptions {
        samples: cfg.controlset.samples,
        horizon: cfg.controlset.horizon,
        dt: cfg.controlset.dt,
        seed: cfg.controlset.seed,
    }
}

/// `K`, `Q` and, when either is derived from it, the control set estimate.
pub fn resolve_sets(
    cfg: &RunConfig,
    sys: &System,
) -> Result<(CompactSet, CompactSet, Option<ControlSetApprox>), CliError> {
    let sets = cfg.sets.as_ref().ok_or_else(|| ConfigError {
        path: "sets".into(),
        message: "missing section".into(),
    })?;
    let approx = if sets.k.uses_controlset() || sets.q.uses_controlset() {
        let lin = linear(sys, "a from-controlset set")?;
        Some(
            estimate_control_set(lin, control_set_options(cfg))
                .map_err(CliError::core("estimate_control_set"))?,
        )
    } else {
        None
    };
    let resolve = |spec: &SetSpec, path: &str| -> Result<CompactSet, CliError> {
        if let Some(s) = literal_set(spec, path)? {
            return Ok(s);
        }
        let SetSpec::FromControlset { shrink, tol } = spec else {
            unreachable!()
        };
        let approx = approx.as_ref().expect("estimated above");
        Ok(shrink_hull(approx, *shrink)
            .map_err(CliError::core("shrink_hull"))?
            .with_tol(*tol))
    };
    let k = resolve(&sets.k, "sets.K")?;
    let q = resolve(&sets.q, "sets.Q")?;
    Ok((k, q, approx))
}

pub fn formula(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let sys = cfg.build_system()?;
    let lin = linear(&sys, "formula")?;
    let f = cfg.build_potential();
    let result = formula_pressure(lin, &f, FormulaOptions::default())
        .map_err(CliError::core("formula_pressure"))?;
    let text = format!("formula pressure: {}\n", result.value);
    Ok(CommandOutput {
        json: Envelope::new("formula", Some(cfg), &result).to_json(),
        text: Some(text),
        ..Default::default()
    })
}

pub fn bounds(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let sys = cfg.build_system()?;
    let (k, q, _) = resolve_sets(cfg, &sys)?;
    let f = cfg.build_potential();
    let report = theorem_bounds(&sys, &k, &q, &f, &cfg.pressure_options());
    let mut text = String::new();
    let mut line = |name: &str, v: &Option<f64>, e: &Option<String>| match (v, e) {
        (Some(v), _) => text.push_str(&format!("{name}: {v}\n")),
        (None, Some(e)) => text.push_str(&format!("{name}: unavailable ({e})\n")),
        (None, None) => text.push_str(&format!("{name}: unavailable\n")),
    };
    line(
        "lower bound",
        &report.lower_bound.as_ref().map(|b| b.value),
        &report.lower_bound_error,
    );
    line("formula", &report.formula, &report.formula_error);
    line(
        "upper bound",
        &report.upper_bound.as_ref().map(|b| b.value),
        &report.upper_bound_error,
    );
    let status =
        (report.formula.is_none() && report.lower_bound.is_none() && report.upper_bound.is_none())
            .then(|| CliError::Failed("no bound could be computed".into()));
    Ok(CommandOutput {
        json: Envelope::new("bounds", Some(cfg), &report).to_json(),
        text: Some(text),
        status,
        ..Default::default()
    })
}

#[derive(Debug, Serialize)]
struct OuterLevel<'a> {
    eps: f64,
    report: &'a PressureReport,
}

#[derive(Debug, Serialize)]
struct EstimateResult<'a> {
    #[serde(flatten)]
    inner: &'a PressureReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    outer: Vec<OuterLevel<'a>>,
}

pub fn estimate(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let sys = cfg.build_system()?;
    let (k, q, _) = resolve_sets(cfg, &sys)?;
    let f = cfg.build_potential();
    let opts = cfg.pressure_options();
    let report =
        estimate_pressure(&sys, &k, &q, &f, &opts).map_err(CliError::core("estimate_pressure"))?;
    let ladder = cfg.discretization.eps_ladder.clone().unwrap_or_default();
    let outer_reports = if ladder.is_empty() {
        Vec::new()
    } else {
        let norm = cfg
            .sets
            .as_ref()
            .map_or(invpress_core::PNorm::Two, |s| s.p.0);
        outer_pressure_series(&sys, &k, &q, &f, &ladder, norm, &opts)
            .map_err(CliError::core("outer_pressure_series"))?
    };
    let outer = ladder
        .iter()
        .zip(&outer_reports)
        .map(|(&eps, report)| OuterLevel { eps, report })
        .collect();
    let mut text = format!(
        "slope: {}\nlast ratio: {}\n",
        report.slope, report.last_ratio
    );
    if let Some(lb) = &report.lower_bound {
        text.push_str(&format!("lower bound: {}\n", lb.value));
    }
    if let Some(v) = report.formula {
        text.push_str(&format!("formula: {v}\n"));
    }
    if let Some(ub) = &report.upper_bound {
        text.push_str(&format!("upper bound: {}\n", ub.value));
    }
    Ok(CommandOutput {
        csv: Some(series_csv(&report)?),
        json: Envelope::new(
            "estimate",
            Some(cfg),
            EstimateResult {
                inner: &report,
                outer,
            },
        )
        .to_json(),
        text: Some(text),
        status: None,
    })
}

#[derive(Debug, Clone, Default)]
pub struct ControlSetOverrides {
    pub samples: Option<usize>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct ControlSetResult {
    dim: usize,
    samples: usize,
    horizon: f64,
    dt: f64,
    seed: u64,
    discarded: usize,
    interior_margin: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
    vertices: Vec<Vec<f64>>,
}

pub fn controlset(cfg: &RunConfig, over: &ControlSetOverrides) -> Result<CommandOutput, CliError> {
    let mut cfg = cfg.clone();
    if let Some(s) = over.samples {
        cfg.controlset.samples = s;
    }
    if let Some(h) = over.horizon {
        cfg.controlset.horizon = h;
    }
    if let Some(s) = over.seed {
        cfg.controlset.seed = s;
    }
    let sys = cfg.build_system()?;
    let lin = linear(&sys, "controlset")?;
    let opts = control_set_options(&cfg);
    let approx = estimate_control_set(lin, opts).map_err(CliError::core("estimate_control_set"))?;
    let (lo, hi) = approx.hull.bounding_box();
    let result = ControlSetResult {
        dim: approx.dim(),
        samples: opts.samples,
        horizon: opts.horizon,
        dt: opts.dt,
        seed: opts.seed,
        discarded: approx.discarded,
        interior_margin: approx.interior_margin,
        lo,
        hi,
        vertices: approx.hull.vertices().map(|v| v.to_vec()).collect(),
    };
    let text = format!(
        "{} vertices, box {:?} .. {:?}, margin of 0: {}\n",
        result.vertices.len(),
        result.lo,
        result.hi,
        result.interior_margin
    );
    Ok(CommandOutput {
        csv: Some(hull_csv(&approx.hull)?),
        json: Envelope::new("controlset", Some(&cfg), &result).to_json(),
        text: Some(text),
        status: None,
    })
}

pub fn lyapunov(
    cfg: &RunConfig,
    period: f64,
    control: &str,
    x0: Option<Vec<f64>>,
) -> Result<CommandOutput, CliError> {
    let sys = cfg.build_system()?;
    let omega = read_control(control, sys.input_dim())?;
    let x0 = x0
        .or_else(|| cfg.bounds.as_ref().map(|b| b.x0.clone()))
        .unwrap_or_else(|| vec![0.0; sys.dim()]);
    if x0.len() != sys.dim() {
        return Err(CliError::Usage(format!(
            "x0 has {} entries, system has dimension {}",
            x0.len(),
            sys.dim()
        )));
    }
    let opts = FloquetOptions {
        dt: cfg.discretization.dt,
        ..FloquetOptions::default()
    };
    let spec: ExponentSpectrum = floquet_exponents(&sys, &x0, &omega, period, opts)
        .map_err(CliError::core("floquet_exponents"))?;
    let mut text = String::new();
    for e in &spec.exponents {
        text.push_str(&format!(
            "rho = {} (multiplicity {})\n",
            e.rho, e.multiplicity
        ));
    }
    Ok(CommandOutput {
        csv: Some(spectrum_csv(&spec)?),
        json: Envelope::new("lyapunov", Some(cfg), &spec).to_json(),
        text: Some(text),
        status: None,
    })
}

pub fn verify(u0s: &[f64], opts: &VerifyOptions) -> Result<CommandOutput, CliError> {
    let cases: Vec<VerifyCase> = u0s
        .iter()
        .map(|&u| run_verify_example(u, opts))
        .collect::<Result<_, _>>()?;
    let failed = cases
        .iter()
        .flat_map(|c| c.checks.iter())
        .filter(|k| !k.passed)
        .count();
    let status = (failed > 0).then(|| CliError::Failed(format!("{failed} check(s) failed")));
    #[derive(Serialize)]
    struct VerifyResult<'a> {
        options: &'a VerifyOptions,
        cases: &'a [VerifyCase],
    }
    Ok(CommandOutput {
        json: Envelope::new(
            "verify",
            None,
            VerifyResult {
                options: opts,
                cases: &cases,
            },
        )
        .to_json(),
        text: Some(table(&cases)),
        csv: None,
        status,
    })
}
