//! Fixed-step integration of the bracket flow, conservation monitoring,
//! spectral tracking, and the closed-form oracle for linear flows.
//!
//! The equation of motion is `∂ₛρ = −i·[S̃, H̃]·G` (see [`crate::bracket`]).
//! Two explicit fixed-step schemes are provided — classical RK4 and the
//! explicit midpoint rule — both of which preserve Hermiticity of `ρ` to
//! roundoff because the flow direction itself is Hermitian at every stage.
//!
//! For linear Hamiltonians and `S = C₂/2` the flow has the closed form
//!
//! ```text
//! ρ(s) = e^{isK} · ρ(0) · G⁻¹ · e^{−isK} · G,      K = H̃ = G·hᵀ,
//! ```
//!
//! implemented by [`linear_oracle`] via the scaled-and-squared Padé matrix
//! exponential; the integrators are tested against it.
//!
//! Trajectories carry per-sample Casimirs `C₁..C₄`, Hermiticity residuals,
//! and the spectrum of the raised state `P = ρ·G⁻¹`, which is an invariant
//! of the exact flow for any Casimir-polynomial generator `S`.

use ndarray::Array2;
use thiserror::Error;

use crate::bracket::{vector_field_from_gradients, BracketError};
use crate::linalg::{self, LinalgError};
use crate::metric::{Metric, MetricError};
use crate::observable::{
    casimir_chain, gradient_matrix, DensityState, Observable, ObservableError,
};
use crate::C64;

/// Largest dimension [`evolve`] accepts.
pub const EVOLVE_DIM_CAP: usize = 64;
/// Entry-magnitude ceiling; any state entry beyond this aborts the run.
pub const DIVERGENCE_CAP: f64 = 1e12;
/// Two spectral-matching candidates closer than this are flagged ambiguous.
pub const TRACK_AMBIGUITY_TOL: f64 = 1e-12;
/// Eigenvector-matrix condition number above which a sample is flagged as
/// numerically non-diagonalizable.
pub const DEFECTIVE_CONDITION_CAP: f64 = 1e10;

/// Errors from integration and trajectory analysis.
#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("integrator step must be positive and finite, got {step}")]
    BadStep { step: f64 },
    #[error("integrator needs at least one step")]
    NoSteps,
    #[error("sample_every must be at least 1")]
    BadSampleEvery,
    #[error("dimension {dim} exceeds the evolution cap of {cap}")]
    DimensionTooLarge { dim: usize, cap: usize },
    #[error(
        "state diverged at step {step} (s = {s:.6}): max |entry| = {max_abs:.3e} \
         exceeds the cap of {cap:.1e}"
    )]
    Diverged {
        step: usize,
        s: f64,
        max_abs: f64,
        cap: f64,
    },
    #[error("trajectory has no samples")]
    EmptyTrajectory,
    #[error(transparent)]
    Bracket(#[from] BracketError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Explicit fixed-step scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Classical fourth-order Runge—Kutta.
    Rk4,
    /// Explicit midpoint (second order).
    Midpoint,
}

/// Validated integrator configuration.
#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    /// Step size in the evolution parameter `s`.
    pub step: f64,
    /// Number of steps to take.
    pub steps: usize,
    /// Record a sample every this many steps (the initial state and the
    /// final state are always recorded).
    pub sample_every: usize,
}

impl IntegratorConfig {
    pub fn new(
        scheme: Scheme,
        step: f64,
        steps: usize,
        sample_every: usize,
    ) -> Result<Self, DynamicsError> {
        if !(step.is_finite() && step > 0.0) {
            return Err(DynamicsError::BadStep { step });
        }
        if steps == 0 {
            return Err(DynamicsError::NoSteps);
        }
        if sample_every == 0 {
            return Err(DynamicsError::BadSampleEvery);
        }
        Ok(IntegratorConfig {
            scheme,
            step,
            steps,
            sample_every,
        })
    }
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone)]
pub struct Sample {
    /// Step index (0 is the initial state).
    pub index: usize,
    /// Evolution parameter `s = index · step`.
    pub s: f64,
    pub state: DensityState,
    /// Casimirs `C₁..C₄` at this sample.
    pub casimirs: [C64; 4],
    /// Absolute Hermiticity residual `max |ρ − ρ†|`.
    pub hermiticity_residual: f64,
    /// Spectrum of `P = ρ·G⁻¹`, sorted lexicographically by (re, im).
    pub eigenvalues: Vec<C64>,
}

/// A recorded bracket-flow trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub config: IntegratorConfig,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn initial(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectories are non-empty")
    }
}

fn record_sample(
    metric: &Metric,
    state: &DensityState,
    index: usize,
    s: f64,
) -> Result<Sample, DynamicsError> {
    let cas = casimir_chain(metric, state, 4)?;
    let p = metric.raised_state(state.matrix())?;
    let eigenvalues = linalg::eigenvalues_sorted(&p)?;
    Ok(Sample {
        index,
        s,
        state: state.clone(),
        casimirs: [cas[0], cas[1], cas[2], cas[3]],
        hermiticity_residual: state.hermiticity_residual(),
        eigenvalues,
    })
}

/// Integrate `∂ₛρ = −i·[S̃, H̃]·G` from `state0`.
///
/// `h` is the Hamiltonian observable and `s_gen` the second generator
/// (usually a Casimir polynomial; `S = C₂/2` gives the linear flow). The
/// run aborts with [`DynamicsError::Diverged`] naming the offending step if
/// any entry exceeds [`DIVERGENCE_CAP`] or stops being finite.
pub fn evolve(
    metric: &Metric,
    state0: &DensityState,
    h: &Observable,
    s_gen: &Observable,
    config: IntegratorConfig,
) -> Result<Trajectory, DynamicsError> {
    if metric.dim() > EVOLVE_DIM_CAP {
        return Err(DynamicsError::DimensionTooLarge {
            dim: metric.dim(),
            cap: EVOLVE_DIM_CAP,
        });
    }
    let space = metric.space().clone();
    // Derivative of the coordinate array: −i·[S̃, H̃]·G at the stage state.
    let deriv = |r: &Array2<C64>| -> Result<Array2<C64>, DynamicsError> {
        let stage = DensityState::new_unchecked(space.clone(), r.clone());
        let dh = gradient_matrix(h, metric, &stage)?;
        let ds = gradient_matrix(s_gen, metric, &stage)?;
        let v = vector_field_from_gradients(metric, &dh, &ds)?;
        Ok(v.mapv(|z| z * C64::new(0.0, -1.0)))
    };

    let ds = config.step;
    let mut r = state0.matrix().clone();
    let mut samples = Vec::new();
    samples.push(record_sample(metric, state0, 0, 0.0)?);

    for k in 1..=config.steps {
        r = match config.scheme {
            Scheme::Rk4 => {
                let k1 = deriv(&r)?;
                let k2 = deriv(&(&r + &k1.mapv(|z| z * (0.5 * ds))))?;
                let k3 = deriv(&(&r + &k2.mapv(|z| z * (0.5 * ds))))?;
                let k4 = deriv(&(&r + &k3.mapv(|z| z * ds)))?;
                &r + &(k1 + k2.mapv(|z| z * 2.0) + k3.mapv(|z| z * 2.0) + k4)
                    .mapv(|z| z * (ds / 6.0))
            }
            Scheme::Midpoint => {
                let k1 = deriv(&r)?;
                let k2 = deriv(&(&r + &k1.mapv(|z| z * (0.5 * ds))))?;
                &r + &k2.mapv(|z| z * ds)
            }
        };
        let max_abs = linalg::max_abs(&r);
        if !max_abs.is_finite() || max_abs > DIVERGENCE_CAP {
            return Err(DynamicsError::Diverged {
                step: k,
                s: k as f64 * ds,
                max_abs,
                cap: DIVERGENCE_CAP,
            });
        }
        if k % config.sample_every == 0 || k == config.steps {
            let state = DensityState::new_unchecked(space.clone(), r.clone());
            samples.push(record_sample(metric, &state, k, k as f64 * ds)?);
        }
    }

    Ok(Trajectory { config, samples })
}

/// Conservation summary of a trajectory, everything measured against the
/// initial sample.
#[derive(Debug, Clone)]
pub struct DriftReport {
    /// `max_t |C_n(s_t) − C_n(0)|` for `n = 1..4`.
    pub max_casimir_drift: [f64; 4],
    /// Largest Hermiticity residual seen at any sample.
    pub max_hermiticity_residual: f64,
    /// Largest drift of any greedily tracked eigenvalue of `P`.
    pub max_spectral_drift: f64,
    /// Final value of the evolution parameter.
    pub final_s: f64,
    /// Number of recorded samples.
    pub samples: usize,
}

/// Summarize conservation behavior over a trajectory.
pub fn drift_report(trajectory: &Trajectory) -> Result<DriftReport, DynamicsError> {
    if trajectory.samples.is_empty() {
        return Err(DynamicsError::EmptyTrajectory);
    }
    let first = &trajectory.samples[0];
    let mut max_casimir_drift = [0.0f64; 4];
    let mut max_herm = 0.0f64;
    for sample in &trajectory.samples {
        for n in 0..4 {
            max_casimir_drift[n] =
                max_casimir_drift[n].max((sample.casimirs[n] - first.casimirs[n]).norm());
        }
        max_herm = max_herm.max(sample.hermiticity_residual);
    }
    let tracks = greedy_tracks(trajectory)?;
    let mut max_spectral_drift = 0.0f64;
    for track in &tracks.0 {
        for v in track.iter() {
            max_spectral_drift = max_spectral_drift.max((v - track[0]).norm());
        }
    }
    Ok(DriftReport {
        max_casimir_drift,
        max_hermiticity_residual: max_herm,
        max_spectral_drift,
        final_s: trajectory.last().s,
        samples: trajectory.samples.len(),
    })
}

/// Eigenvalue branches of `P = ρ·G⁻¹` followed through a trajectory.
#[derive(Debug, Clone)]
pub struct SpectralTrack {
    /// Sampled values of the evolution parameter.
    pub s: Vec<f64>,
    /// `tracks[k][t]` is branch `k` at sample `t`; branch order is the
    /// lexicographic eigenvalue order of the initial sample.
    pub tracks: Vec<Vec<C64>>,
    /// Sample indices where greedy matching had two candidates closer than
    /// [`TRACK_AMBIGUITY_TOL`]; branch identities may be swapped there.
    pub ambiguous: Vec<usize>,
    /// Sample indices where the eigenvector matrix of `P` had condition
    /// number above [`DEFECTIVE_CONDITION_CAP`] (numerically defective;
    /// eigenvalues may lose accuracy near such points).
    pub near_defective: Vec<usize>,
}

fn greedy_tracks(trajectory: &Trajectory) -> Result<(Vec<Vec<C64>>, Vec<usize>), DynamicsError> {
    if trajectory.samples.is_empty() {
        return Err(DynamicsError::EmptyTrajectory);
    }
    let n = trajectory.samples[0].eigenvalues.len();
    let mut tracks: Vec<Vec<C64>> = trajectory.samples[0]
        .eigenvalues
        .iter()
        .map(|&v| vec![v])
        .collect();
    let mut ambiguous = Vec::new();
    for (t, sample) in trajectory.samples.iter().enumerate().skip(1) {
        let mut used = vec![false; n];
        let mut step_ambiguous = false;
        for track in tracks.iter_mut() {
            let prev = *track.last().expect("tracks start non-empty");
            let mut best: Option<(usize, f64)> = None;
            let mut second = f64::INFINITY;
            for (j, cand) in sample.eigenvalues.iter().enumerate() {
                if used[j] {
                    continue;
                }
                let dist = (cand - prev).norm();
                match best {
                    None => best = Some((j, dist)),
                    Some((_, bd)) if dist < bd => {
                        second = bd;
                        best = Some((j, dist));
                    }
                    Some(_) => second = second.min(dist),
                }
            }
            let (j, bd) = best.expect("sample eigenvalue counts match");
            if second.is_finite() && (second - bd).abs() < TRACK_AMBIGUITY_TOL {
                step_ambiguous = true;
            }
            used[j] = true;
            track.push(sample.eigenvalues[j]);
        }
        if step_ambiguous {
            ambiguous.push(t);
        }
    }
    Ok((tracks, ambiguous))
}

/// Follow the eigenvalue branches of `P` through a trajectory with greedy
/// nearest-neighbor matching, flagging ambiguous matches and numerically
/// defective samples.
pub fn spectral_track(
    metric: &Metric,
    trajectory: &Trajectory,
) -> Result<SpectralTrack, DynamicsError> {
    let (tracks, ambiguous) = greedy_tracks(trajectory)?;
    let mut near_defective = Vec::new();
    for (t, sample) in trajectory.samples.iter().enumerate() {
        let p = metric.raised_state(sample.state.matrix())?;
        let (_, vecs) = linalg::eig(&p)?;
        let cond = linalg::condition_number(&vecs)?;
        if !cond.is_finite() || cond > DEFECTIVE_CONDITION_CAP {
            near_defective.push(t);
        }
    }
    Ok(SpectralTrack {
        s: trajectory.samples.iter().map(|smp| smp.s).collect(),
        tracks,
        ambiguous,
        near_defective,
    })
}

/// Closed-form solution of the linear flow (`H` linear with Hermitian
/// coefficients `h`, `S = C₂/2`) at parameter value `s`:
/// `ρ(s) = e^{isK}·ρ(0)·G⁻¹·e^{−isK}·G` with `K = G·hᵀ`.
pub fn linear_oracle(
    metric: &Metric,
    h: &Array2<C64>,
    state0: &DensityState,
    s: f64,
) -> Result<DensityState, DynamicsError> {
    // Route through the validated constructor so non-Hermitian coefficient
    // arrays are rejected with the same diagnostics as everywhere else.
    let _ = Observable::linear(h.clone())?;
    let k = metric.tilde(h)?;
    let u_plus = linalg::expm(&k.mapv(|z| z * C64::new(0.0, s)))?;
    let u_minus = linalg::expm(&k.mapv(|z| z * C64::new(0.0, -s)))?;
    let r = u_plus
        .dot(state0.matrix())
        .dot(metric.ginv())
        .dot(&u_minus)
        .dot(metric.g());
    Ok(DensityState::new_unchecked(metric.space().clone(), r))
}
