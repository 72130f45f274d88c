//! Run-configuration schema and its translation into engine objects.
//!
//! The config is hand-editable JSON. Complex entries are `[re, im]` pairs.
//! Every block accepts exactly one of its alternative keys; unknown keys
//! are rejected by serde with line/column positions so typos fail loudly.

use ndarray::Array2;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nambu_core::{
    dirac, kron_metric, CasimirPoly, CasimirTerm, DensityState, IndexSpace, IntegratorConfig,
    Metric, Observable, Scheme, C64,
};

use crate::CliError;

/// `[re, im]` pair.
type ComplexEntry = [f64; 2];
/// Row-major complex matrix with `[re, im]` entries.
type MatrixSpec = Vec<Vec<ComplexEntry>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct RunConfig {
    /// Metric of the run; omit only when `particles` defines a composite.
    metric: Option<MetricSpec>,
    /// Per-particle metrics of a composite run; the run metric becomes
    /// their Kronecker product and `subsystem` observables become legal.
    particles: Option<Vec<MetricSpec>>,
    state: StateSpec,
    hamiltonian: ObservableSpec,
    /// Second generator; defaults to `C₂/2` (the linear regime).
    s_functional: Option<ObservableSpec>,
    integrator: IntegratorSpec,
    /// Default CSV path; `--out` takes precedence.
    output: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct MetricSpec {
    /// Diagonal of ±1 entries.
    signature: Option<Vec<i32>>,
    /// Explicit Hermitian matrix.
    matrix: Option<MatrixSpec>,
    /// The lattice metric `I ⊗ g₄` of a `nt × nz` bispinor lattice.
    dirac1p1: Option<LatticeSpecBody>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LatticeSpecBody {
    nt: usize,
    nz: usize,
    /// Lattice spacing; defaults to 1.
    spacing: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct StateSpec {
    /// Explicit Hermitian coordinate matrix `ρ[α][α']`.
    matrix: Option<MatrixSpec>,
    /// Seeded random Hermitian matrix.
    random_hermitian: Option<RandomStateBody>,
    /// Amplitudes `ψ[α]`; the state is the outer product `ψ ψ†`.
    pure_state: Option<Vec<ComplexEntry>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RandomStateBody {
    seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct ObservableSpec {
    linear: Option<LinearBody>,
    casimir_poly: Option<PolyBody>,
    /// `"halfC2"`, or `"dirac1p1"` together with sibling `nt`/`nz` keys.
    preset: Option<String>,
    nt: Option<usize>,
    nz: Option<usize>,
    spacing: Option<f64>,
    /// Real-weighted sum `[[weight, spec], ...]`.
    sum: Option<Vec<(f64, ObservableSpec)>>,
    /// Observable of a reduced subsystem of a `particles` run.
    subsystem: Option<SubsystemBody>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearBody {
    matrix: MatrixSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyBody {
    terms: Vec<TermSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TermSpec {
    coeff: f64,
    /// Exponent map keyed by `"C1"`..`"C4"`; omitted Casimirs get 0.
    powers: BTreeMap<String, u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SubsystemBody {
    keep: Vec<usize>,
    inner: Box<ObservableSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct IntegratorSpec {
    /// `"rk4"` (default) or `"midpoint"`.
    scheme: Option<String>,
    step: f64,
    steps: usize,
    /// Record every k-th step; defaults to 1.
    sample_every: Option<usize>,
}

/// Everything `simulate` needs, fully validated.
pub struct BuiltRun {
    pub metric: Metric,
    pub state: DensityState,
    pub hamiltonian: Observable,
    pub s_functional: Observable,
    pub integrator: IntegratorConfig,
    pub output: Option<PathBuf>,
}

fn config_err(msg: impl std::fmt::Display) -> CliError {
    CliError::Config(msg.to_string())
}

/// Read and fully validate a run configuration.
pub fn load(path: &Path) -> Result<BuiltRun, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    let parsed: RunConfig = serde_json::from_str(&text).map_err(|e| {
        config_err(format!(
            "{} at line {}, column {}",
            e, // serde names missing/unknown fields in the message
            e.line(),
            e.column()
        ))
    })?;
    build(parsed)
}

fn build(config: RunConfig) -> Result<BuiltRun, CliError> {
    let particle_metrics = match &config.particles {
        Some(specs) => {
            if specs.is_empty() {
                return Err(config_err("`particles` must list at least one metric"));
            }
            let mut out = Vec::with_capacity(specs.len());
            for (j, spec) in specs.iter().enumerate() {
                out.push(build_metric(spec, &format!("p{j}"), &format!("particles[{j}]"))?);
            }
            Some(out)
        }
        None => None,
    };

    let metric = match (&config.metric, &particle_metrics) {
        (Some(spec), None) => build_metric(spec, "a", "metric")?,
        (None, Some(parts)) => kron_metric(parts)
            .map_err(|e| config_err(format!("`particles` composite metric: {e}")))?,
        (Some(_), Some(_)) => {
            return Err(config_err(
                "give either `metric` or `particles`, not both (the composite \
                 metric is the Kronecker product of the particle metrics)",
            ));
        }
        (None, None) => {
            return Err(config_err("missing field `metric` (or `particles`) in config"));
        }
    };

    let state = build_state(&config.state, &metric)?;
    let hamiltonian = build_observable(
        &config.hamiltonian,
        &metric,
        particle_metrics.as_deref(),
        "hamiltonian",
    )?;
    let s_functional = match &config.s_functional {
        Some(spec) => build_observable(spec, &metric, particle_metrics.as_deref(), "sFunctional")?,
        None => Observable::half_c2(),
    };
    let integrator = build_integrator(&config.integrator)?;

    Ok(BuiltRun {
        metric,
        state,
        hamiltonian,
        s_functional,
        integrator,
        output: config.output,
    })
}

fn exactly_one(path: &str, present: &[(&str, bool)]) -> Result<usize, CliError> {
    let chosen: Vec<usize> = present
        .iter()
        .enumerate()
        .filter(|(_, (_, is))| *is)
        .map(|(k, _)| k)
        .collect();
    match chosen.as_slice() {
        [one] => Ok(*one),
        [] => Err(config_err(format!(
            "`{path}` needs exactly one of {}",
            present
                .iter()
                .map(|(name, _)| format!("`{name}`"))
                .collect::<Vec<_>>()
                .join(", ")
        ))),
        many => Err(config_err(format!(
            "`{path}` sets {} but exactly one is allowed",
            many.iter()
                .map(|&k| format!("`{}`", present[k].0))
                .collect::<Vec<_>>()
                .join(" and ")
        ))),
    }
}

fn parse_matrix(rows: &MatrixSpec, path: &str) -> Result<Array2<C64>, CliError> {
    let n = rows.len();
    if n == 0 {
        return Err(config_err(format!("`{path}` matrix is empty")));
    }
    let mut out = Array2::<C64>::zeros((n, n));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(config_err(format!(
                "`{path}` matrix must be square: row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        for (j, &[re, im]) in row.iter().enumerate() {
            out[(i, j)] = C64::new(re, im);
        }
    }
    Ok(out)
}

fn lattice_spec(body: &LatticeSpecBody, path: &str) -> Result<dirac::LatticeSpec, CliError> {
    dirac::LatticeSpec::new(body.nt, body.nz, body.spacing.unwrap_or(1.0))
        .map_err(|e| config_err(format!("`{path}`: {e}")))
}

fn build_metric(spec: &MetricSpec, label: &str, path: &str) -> Result<Metric, CliError> {
    let choice = exactly_one(
        path,
        &[
            ("signature", spec.signature.is_some()),
            ("matrix", spec.matrix.is_some()),
            ("dirac1p1", spec.dirac1p1.is_some()),
        ],
    )?;
    match choice {
        0 => Metric::from_signature(label, spec.signature.as_ref().expect("checked"))
            .map_err(|e| config_err(format!("`{path}.signature`: {e}"))),
        1 => {
            let g = parse_matrix(spec.matrix.as_ref().expect("checked"), path)?;
            let space = IndexSpace::new(label, g.nrows())
                .map_err(|e| config_err(format!("`{path}.matrix`: {e}")))?;
            Metric::from_matrix(space, g).map_err(|e| config_err(format!("`{path}.matrix`: {e}")))
        }
        _ => {
            let lattice = lattice_spec(spec.dirac1p1.as_ref().expect("checked"), path)?;
            dirac::lattice_metric(&lattice).map_err(|e| config_err(format!("`{path}`: {e}")))
        }
    }
}

fn build_state(spec: &StateSpec, metric: &Metric) -> Result<DensityState, CliError> {
    let choice = exactly_one(
        "state",
        &[
            ("matrix", spec.matrix.is_some()),
            ("randomHermitian", spec.random_hermitian.is_some()),
            ("pureState", spec.pure_state.is_some()),
        ],
    )?;
    match choice {
        0 => {
            let m = parse_matrix(spec.matrix.as_ref().expect("checked"), "state")?;
            if m.nrows() != metric.dim() {
                return Err(config_err(format!(
                    "`state.matrix` is {}-dimensional but the metric is {}-dimensional",
                    m.nrows(),
                    metric.dim()
                )));
            }
            DensityState::new(metric.space().clone(), m)
                .map_err(|e| config_err(format!("`state.matrix`: {e}")))
        }
        1 => Ok(DensityState::random(
            metric.space().clone(),
            spec.random_hermitian.as_ref().expect("checked").seed,
        )),
        _ => {
            let amplitudes: Vec<C64> = spec
                .pure_state
                .as_ref()
                .expect("checked")
                .iter()
                .map(|&[re, im]| C64::new(re, im))
                .collect();
            DensityState::pure(metric.space().clone(), &amplitudes)
                .map_err(|e| config_err(format!("`state.pureState`: {e}")))
        }
    }
}

fn build_poly(body: &PolyBody, path: &str) -> Result<CasimirPoly, CliError> {
    let mut terms = Vec::with_capacity(body.terms.len());
    for (k, term) in body.terms.iter().enumerate() {
        let mut powers = [0u32; 4];
        for (name, &power) in &term.powers {
            let slot = match name.as_str() {
                "C1" => 0,
                "C2" => 1,
                "C3" => 2,
                "C4" => 3,
                other => {
                    return Err(config_err(format!(
                        "`{path}.terms[{k}].powers` has unknown Casimir `{other}` \
                         (use C1..C4)"
                    )));
                }
            };
            powers[slot] = power;
        }
        terms.push(CasimirTerm {
            coefficient: term.coeff,
            powers,
        });
    }
    Ok(CasimirPoly::new(terms))
}

fn build_observable(
    spec: &ObservableSpec,
    metric: &Metric,
    particles: Option<&[Metric]>,
    path: &str,
) -> Result<Observable, CliError> {
    let choice = exactly_one(
        path,
        &[
            ("linear", spec.linear.is_some()),
            ("casimirPoly", spec.casimir_poly.is_some()),
            ("preset", spec.preset.is_some()),
            ("sum", spec.sum.is_some()),
            ("subsystem", spec.subsystem.is_some()),
        ],
    )?;
    if spec.preset.is_none() && (spec.nt.is_some() || spec.nz.is_some() || spec.spacing.is_some()) {
        return Err(config_err(format!(
            "`{path}` has lattice keys (`nt`/`nz`/`spacing`) without `\"preset\": \"dirac1p1\"`"
        )));
    }
    match choice {
        0 => {
            let h = parse_matrix(&spec.linear.as_ref().expect("checked").matrix, path)?;
            if h.nrows() != metric.dim() {
                return Err(config_err(format!(
                    "`{path}.linear.matrix` is {}-dimensional but the metric is \
                     {}-dimensional",
                    h.nrows(),
                    metric.dim()
                )));
            }
            Observable::linear(h).map_err(|e| config_err(format!("`{path}.linear`: {e}")))
        }
        1 => Ok(Observable::CasimirPoly(build_poly(
            spec.casimir_poly.as_ref().expect("checked"),
            path,
        )?)),
        2 => match spec.preset.as_ref().expect("checked").as_str() {
            "halfC2" => Ok(Observable::half_c2()),
            "dirac1p1" => {
                let (nt, nz) = match (spec.nt, spec.nz) {
                    (Some(nt), Some(nz)) => (nt, nz),
                    _ => {
                        return Err(config_err(format!(
                            "`{path}` preset \"dirac1p1\" needs `nt` and `nz`"
                        )));
                    }
                };
                let lattice = dirac::LatticeSpec::new(nt, nz, spec.spacing.unwrap_or(1.0))
                    .map_err(|e| config_err(format!("`{path}`: {e}")))?;
                if lattice.dim() != metric.dim() {
                    return Err(config_err(format!(
                        "`{path}` dirac1p1 lattice is {}-dimensional but the metric is \
                         {}-dimensional (use a matching `metric.dirac1p1` block)",
                        lattice.dim(),
                        metric.dim()
                    )));
                }
                let h = dirac::dirac_hamiltonian(&lattice)
                    .map_err(|e| config_err(format!("`{path}`: {e}")))?;
                Observable::linear(h).map_err(|e| config_err(format!("`{path}`: {e}")))
            }
            other => Err(config_err(format!(
                "`{path}.preset` unknown preset `{other}` (use \"halfC2\" or \"dirac1p1\")"
            ))),
        },
        3 => {
            let mut parts = Vec::new();
            for (k, (weight, part)) in spec.sum.as_ref().expect("checked").iter().enumerate() {
                parts.push((
                    *weight,
                    build_observable(part, metric, particles, &format!("{path}.sum[{k}]"))?,
                ));
            }
            Ok(Observable::Sum(parts))
        }
        _ => {
            let body = spec.subsystem.as_ref().expect("checked");
            let particles = particles.ok_or_else(|| {
                config_err(format!(
                    "`{path}.subsystem` requires a `particles` list in the config"
                ))
            })?;
            if body.inner.subsystem.is_some() {
                return Err(config_err(format!(
                    "`{path}.subsystem.inner` must not itself be a subsystem"
                )));
            }
            let kept: Vec<Metric> = body
                .keep
                .iter()
                .map(|&j| {
                    particles.get(j).cloned().ok_or_else(|| {
                        config_err(format!(
                            "`{path}.subsystem.keep` index {j} is out of range for \
                             {} particles",
                            particles.len()
                        ))
                    })
                })
                .collect::<Result<_, _>>()?;
            let inner_metric = kron_metric(&kept)
                .map_err(|e| config_err(format!("`{path}.subsystem`: {e}")))?;
            let inner = build_observable(
                &body.inner,
                &inner_metric,
                None,
                &format!("{path}.subsystem.inner"),
            )?;
            Ok(Observable::Subsystem {
                metrics: particles.to_vec(),
                keep: body.keep.clone(),
                inner: Box::new(inner),
            })
        }
    }
}

fn build_integrator(spec: &IntegratorSpec) -> Result<IntegratorConfig, CliError> {
    let scheme = match spec.scheme.as_deref() {
        None | Some("rk4") => Scheme::Rk4,
        Some("midpoint") => Scheme::Midpoint,
        Some(other) => {
            return Err(config_err(format!(
                "`integrator.scheme` unknown scheme `{other}` (use \"rk4\" or \"midpoint\")"
            )));
        }
    };
    IntegratorConfig::new(scheme, spec.step, spec.steps, spec.sample_every.unwrap_or(1))
        .map_err(|e| config_err(format!("`integrator`: {e}")))
}
