//! JSON scenario files: a small declarative schema that compiles into
//! either a generic scalar inclusion problem or an eddy-current run.
//! Validation failures are reported as schema errors that name the
//! offending field, so a broken file maps to the schema exit code, not
//! a solver failure.

use crate::error::{Error, Result};
use crate::graph::{Corner, PlGraph};
use crate::material::{ConvKernel, MaterialLaw, Multiplier, OperatorKind};
use crate::maxwell::{
    self, build_operators, MaxwellProblem, StaggeredGrid2D,
};
use crate::monotone::ScalarGraph;
use crate::solver::Problem;
use crate::weighted_time::{Signal, TimeGrid, Weight};
use nalgebra::DVector;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeDoc {
    t0: f64,
    n: usize,
    h: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum CoefficientDoc {
    /// Constant-in-time scalar coefficient.
    Const { value: f64 },
    /// `base + amp * sin(freq * t + phase)`, with the closed-form
    /// derivative used for the commutator part.
    Sinusoid {
        base: f64,
        amp: f64,
        freq: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Sampled coefficient; a matching derivative table is required
    /// when used as the differentiated part.
    Table {
        values: Vec<f64>,
        #[serde(default)]
        mprime: Option<Vec<f64>>,
    },
    /// Causal convolution kernel `mass * u + tail`, with an
    /// exponential tail sampled at the grid lags.
    Kernel {
        mass: f64,
        #[serde(default)]
        tail_amp: f64,
        #[serde(default)]
        tail_decay: f64,
        #[serde(default)]
        tail_lags: usize,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct LawDoc {
    m: CoefficientDoc,
    #[serde(default)]
    n: Option<CoefficientDoc>,
    #[serde(default)]
    rho0: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CornerDoc {
    x: f64,
    y_lo: f64,
    y_hi: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RelationDoc {
    Linear { slope: f64 },
    Sign,
    SoftGraph {
        corners: Vec<CornerDoc>,
        slope_left: f64,
        slope_right: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SourceDoc {
    /// `height` from `onset` on, zero before.
    Step {
        height: f64,
        #[serde(default)]
        onset: f64,
    },
    /// One smooth arch of `height * sin^2` over `[start, start + width]`.
    Pulse { height: f64, start: f64, width: f64 },
    /// `height * (1 - exp(-rate * t))` for `t >= 0`.
    Ramp { height: f64, rate: f64 },
    /// Explicit samples, one per grid point.
    Table { values: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenericDoc {
    #[serde(default)]
    name: Option<String>,
    time: TimeDoc,
    rho: f64,
    law: LawDoc,
    relation: RelationDoc,
    source: SourceDoc,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridDoc {
    nx: usize,
    ny: usize,
    #[serde(default = "default_extent")]
    lx: f64,
    #[serde(default = "default_extent")]
    ly: f64,
}

fn default_extent() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum CurveDoc {
    Linear { slope: f64 },
    Saturation { kappa: f64, knee: f64, kappa_sat: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum PatternDoc {
    /// `curl^T` of a Gaussian cell bump: a compatible source with a
    /// purely magnetic steady response.
    CurlBump {
        cx: f64,
        cy: f64,
        width: f64,
        #[serde(default = "default_extent")]
        amp: f64,
    },
    /// Gaussian on y-directed edges: excites a conduction steady
    /// state as well.
    EdgeBump {
        cx: f64,
        cy: f64,
        width: f64,
        #[serde(default = "default_extent")]
        amp: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaxwellSourceDoc {
    profile: SourceDoc,
    pattern: PatternDoc,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaxwellDoc {
    #[serde(default)]
    name: Option<String>,
    time: TimeDoc,
    rho: f64,
    grid: GridDoc,
    sigma: f64,
    curve: CurveDoc,
    source: MaxwellSourceDoc,
    #[serde(default)]
    b0: Option<Vec<f64>>,
}

/// A scenario ready to solve.
#[derive(Debug, Clone)]
pub enum LoadedScenario {
    Generic(Problem),
    Maxwell(MaxwellProblem),
}

/// Parsed scenario plus its display name.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub name: String,
    pub body: LoadedScenario,
}

fn schema<T>(field: &str, message: impl std::fmt::Display) -> Result<T> {
    Err(Error::Schema { field: field.to_string(), message: message.to_string() })
}

fn in_field<T>(field: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Schema { field: inner, message } => {
            Error::Schema { field: format!("{field}.{inner}"), message }
        }
        other => Error::Schema { field: field.to_string(), message: other.to_string() },
    })
}

fn build_time(doc: &TimeDoc) -> Result<TimeGrid> {
    in_field("time", TimeGrid::new(doc.t0, doc.n, doc.h))
}

fn build_profile(doc: &SourceDoc, grid: &TimeGrid, field: &str) -> Result<Vec<f64>> {
    let sample = |t: f64| -> f64 {
        match doc {
            SourceDoc::Step { height, onset } => {
                if t >= *onset {
                    *height
                } else {
                    0.0
                }
            }
            SourceDoc::Pulse { height, start, width } => {
                if t > *start && t < start + width {
                    let phase = (t - start) / width * std::f64::consts::PI;
                    height * phase.sin().powi(2)
                } else {
                    0.0
                }
            }
            SourceDoc::Ramp { height, rate } => {
                if t >= 0.0 {
                    height * (1.0 - (-rate * t).exp())
                } else {
                    0.0
                }
            }
            SourceDoc::Table { .. } => unreachable!("tables are handled before sampling"),
        }
    };
    match doc {
        SourceDoc::Table { values } => {
            if values.len() != grid.len() {
                return schema(
                    &format!("{field}.values"),
                    format!("expected {} samples, got {}", grid.len(), values.len()),
                );
            }
            if values.iter().any(|v| !v.is_finite()) {
                return schema(&format!("{field}.values"), "samples must be finite");
            }
            Ok(values.clone())
        }
        SourceDoc::Pulse { width, .. } if !width.is_finite() || *width <= 0.0 => {
            schema(&format!("{field}.width"), "pulse width must be positive")
        }
        SourceDoc::Ramp { rate, .. } if !rate.is_finite() || *rate <= 0.0 => {
            schema(&format!("{field}.rate"), "ramp rate must be positive")
        }
        _ => Ok(grid.times().map(sample).collect()),
    }
}

fn build_source(doc: &SourceDoc, grid: &TimeGrid) -> Result<Signal> {
    let profile = build_profile(doc, grid, "source")?;
    Signal::from_samples(*grid, 1, profile)
}

fn build_relation(doc: &RelationDoc) -> Result<ScalarGraph> {
    match doc {
        RelationDoc::Linear { slope } => in_field("relation.slope", ScalarGraph::linear(*slope)),
        RelationDoc::Sign => Ok(ScalarGraph::soft(PlGraph::sign())),
        RelationDoc::SoftGraph { corners, slope_left, slope_right } => {
            let corners: Vec<Corner> = corners
                .iter()
                .map(|c| Corner { x: c.x, y_lo: c.y_lo, y_hi: c.y_hi })
                .collect();
            let graph =
                in_field("relation.corners", PlGraph::new(corners, *slope_left, *slope_right))?;
            Ok(ScalarGraph::soft(graph))
        }
    }
}

fn build_coefficient_pair(
    doc: &CoefficientDoc,
    grid: &TimeGrid,
    field: &str,
    differentiated: bool,
) -> Result<(OperatorKind, OperatorKind)> {
    let zero = OperatorKind::zero(1);
    match doc {
        CoefficientDoc::Const { value } => {
            if !value.is_finite() {
                return schema(&format!("{field}.value"), "coefficient must be finite");
            }
            Ok((OperatorKind::Multiplier(Multiplier::scalar(*value)), zero))
        }
        CoefficientDoc::Sinusoid { base, amp, freq, phase } => {
            for (name, v) in [("base", base), ("amp", amp), ("freq", freq), ("phase", phase)] {
                if !v.is_finite() {
                    return schema(&format!("{field}.{name}"), "coefficient must be finite");
                }
            }
            let (b, a, f, p) = (*base, *amp, *freq, *phase);
            let m = in_field(
                field,
                Multiplier::varying_diag(grid, 1, |t| {
                    DVector::from_element(1, b + a * (f * t + p).sin())
                }),
            )?;
            let mp = in_field(
                field,
                Multiplier::varying_diag(grid, 1, |t| {
                    DVector::from_element(1, a * f * (f * t + p).cos())
                }),
            )?;
            let mp = if differentiated { OperatorKind::Multiplier(mp) } else { zero };
            Ok((OperatorKind::Multiplier(m), mp))
        }
        CoefficientDoc::Table { values, mprime } => {
            if values.len() != grid.len() {
                return schema(
                    &format!("{field}.values"),
                    format!("expected {} samples, got {}", grid.len(), values.len()),
                );
            }
            let m = in_field(
                field,
                Multiplier::varying_diag(grid, 1, {
                    let mut it = values.iter();
                    move |_| DVector::from_element(1, *it.next().expect("length checked"))
                }),
            )?;
            let mp = match (differentiated, mprime) {
                (false, _) => zero,
                (true, Some(mp_values)) => {
                    if mp_values.len() != grid.len() {
                        return schema(
                            &format!("{field}.mprime"),
                            format!("expected {} samples, got {}", grid.len(), mp_values.len()),
                        );
                    }
                    let mp = in_field(
                        field,
                        Multiplier::varying_diag(grid, 1, {
                            let mut it = mp_values.iter();
                            move |_| DVector::from_element(1, *it.next().expect("length checked"))
                        }),
                    )?;
                    OperatorKind::Multiplier(mp)
                }
                (true, None) => {
                    return schema(
                        &format!("{field}.mprime"),
                        "a sampled differentiated coefficient needs its derivative table",
                    );
                }
            };
            Ok((OperatorKind::Multiplier(m), mp))
        }
        CoefficientDoc::Kernel { mass, tail_amp, tail_decay, tail_lags } => {
            if !differentiated {
                return schema(field, "kernels are only supported in the differentiated part");
            }
            if !mass.is_finite() {
                return schema(&format!("{field}.mass"), "kernel mass must be finite");
            }
            let mut lags = vec![mass / grid.step()];
            for l in 1..=*tail_lags {
                lags.push(tail_amp * (-tail_decay * l as f64 * grid.step()).exp());
            }
            let kernel = in_field(field, ConvKernel::scalar(lags))?;
            Ok((OperatorKind::Convolution(kernel), zero))
        }
    }
}

fn build_generic(doc: &GenericDoc) -> Result<Problem> {
    let grid = build_time(&doc.time)?;
    let weight = in_field("rho", Weight::new(doc.rho))?;
    let (m, mprime) = build_coefficient_pair(&doc.law.m, &grid, "law.m", true)?;
    let n = match &doc.law.n {
        None => OperatorKind::zero(1),
        Some(nd) => build_coefficient_pair(nd, &grid, "law.n", false)?.0,
    };
    if !doc.law.rho0.is_finite() || doc.law.rho0 < 0.0 {
        return schema("law.rho0", "minimal rate must be finite and nonnegative");
    }
    let law = in_field("law", MaterialLaw::new(m, mprime, n, doc.law.rho0))?;
    let relation = build_relation(&doc.relation)?;
    let f = build_source(&doc.source, &grid)?;
    in_field("scenario", Problem::new(law, relation, weight, grid, f))
}

fn build_maxwell(doc: &MaxwellDoc) -> Result<MaxwellProblem> {
    let time = build_time(&doc.time)?;
    let weight = in_field("rho", Weight::new(doc.rho))?;
    let grid = in_field(
        "grid",
        StaggeredGrid2D::new(doc.grid.nx, doc.grid.ny, doc.grid.lx, doc.grid.ly),
    )?;
    let ops = build_operators(&grid);
    if !doc.sigma.is_finite() || doc.sigma <= 0.0 {
        return schema("sigma", "conductivity must be positive");
    }
    let sigma = DVector::from_element(grid.edge_count(), doc.sigma);
    let curve = match &doc.curve {
        CurveDoc::Linear { slope } => in_field("curve.slope", PlGraph::linear(*slope))?,
        CurveDoc::Saturation { kappa, knee, kappa_sat } => in_field(
            "curve",
            maxwell::saturation_curve(*kappa, *knee, *kappa_sat),
        )?,
    };
    let pattern = match &doc.source.pattern {
        PatternDoc::CurlBump { cx, cy, width, amp } => {
            if !width.is_finite() || *width <= 0.0 {
                return schema("source.pattern.width", "bump width must be positive");
            }
            maxwell::curl_pattern(&ops, &(maxwell::cell_bump(&grid, *cx, *cy, *width) * *amp))
        }
        PatternDoc::EdgeBump { cx, cy, width, amp } => {
            if !width.is_finite() || *width <= 0.0 {
                return schema("source.pattern.width", "bump width must be positive");
            }
            maxwell::edge_bump(&grid, *cx, *cy, *width) * *amp
        }
    };
    let profile = build_profile(&doc.source.profile, &time, "source.profile")?;
    let b0 = match &doc.b0 {
        None => DVector::zeros(grid.cell_count()),
        Some(values) => {
            if values.len() != grid.cell_count() {
                return schema(
                    "b0",
                    format!("expected {} cells, got {}", grid.cell_count(), values.len()),
                );
            }
            DVector::from_column_slice(values)
        }
    };
    in_field(
        "scenario",
        MaxwellProblem::new(ops, time, weight, sigma, curve, pattern, profile, b0),
    )
}

/// Parses a scenario document. The top-level `kind` field selects the
/// schema; everything else is validated with field-qualified errors.
pub fn load_scenario(json: &str) -> Result<Loaded> {
    let mut value: serde_json::Value = serde_json::from_str(json)
        .map_err(|e| Error::Schema { field: "document".to_string(), message: e.to_string() })?;
    let obj = match value.as_object_mut() {
        Some(o) => o,
        None => return schema("document", "scenario must be a JSON object"),
    };
    let kind = match obj.remove("kind") {
        Some(serde_json::Value::String(s)) => s,
        Some(_) => return schema("kind", "must be a string"),
        None => return schema("kind", "missing scenario kind"),
    };
    match kind.as_str() {
        "generic" => {
            let doc: GenericDoc = serde_json::from_value(value).map_err(|e| Error::Schema {
                field: "scenario".to_string(),
                message: e.to_string(),
            })?;
            let name = doc.name.clone().unwrap_or_else(|| "generic".to_string());
            Ok(Loaded { name, body: LoadedScenario::Generic(build_generic(&doc)?) })
        }
        "maxwell" => {
            let doc: MaxwellDoc = serde_json::from_value(value).map_err(|e| Error::Schema {
                field: "scenario".to_string(),
                message: e.to_string(),
            })?;
            let name = doc.name.clone().unwrap_or_else(|| "maxwell".to_string());
            Ok(Loaded { name, body: LoadedScenario::Maxwell(build_maxwell(&doc)?) })
        }
        other => schema("kind", format!("unknown scenario kind '{other}'")),
    }
}
