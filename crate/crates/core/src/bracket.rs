//! The metric Lie—Poisson bracket and the Lie—Nambu triple bracket.
//!
//! Everything reduces to the tilde map `X̃ = G·Xᵀ`. With `F̃ = G·(DF)ᵀ`
//! built from the gradient `DF` of an observable, the triple bracket is the
//! trace form
//!
//! ```text
//! {F, H, S} = Tr( [S̃, H̃] · F̃ )
//! ```
//!
//! which is totally antisymmetric because the trace of a product of three
//! matrices changes sign under the commutator swap and is cyclic. The
//! binary Lie—Poisson bracket is the special case `S = C₂/2` (whose tilde
//! is the raised state `P` itself):
//!
//! ```text
//! {F, H} = Tr( [P, H̃] · F̃ ) = {F, H, C₂/2}.
//! ```
//!
//! Each bracket has two paths: the `Chain` path above (matrix products,
//! runs to dimension 64), and an `Oracle` path that materializes the rank-6
//! structure constants and contracts them index by index (capped at
//! dimension 8). The oracle exists to keep the fast path honest; the two
//! must agree to roundoff, and tests plus the acceptance suite enforce it.
//!
//! The bracket vector field, in the same notation, is
//!
//! ```text
//! i ∂ₛρ = {ρ, H, S}   with   {ρ, H, S}[α][α'] = ([S̃, H̃]·G)[α][α'],
//! ```
//!
//! so `∂ₛρ = −i·[S̃,H̃]·G`; the integrators in [`crate::dynamics`] consume
//! exactly this matrix.

use ndarray::Array2;
use thiserror::Error;

use crate::metric::{structure_constants, Metric, MetricError};
use crate::observable::{gradient, gradient_matrix, DensityState, Observable, ObservableError};
use crate::tensor::TensorError;
use crate::C64;

/// Which evaluation route a bracket should take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BracketPath {
    /// Trace-form matrix products; fast, runs at any supported dimension.
    Chain,
    /// Materialized structure constants contracted index by index; slow,
    /// capped at dimension 8, used to cross-check the chain path.
    Oracle,
}

/// A bracket value together with the path that produced it.
#[derive(Debug, Clone, Copy)]
pub struct BracketResult {
    pub value: C64,
    pub path: BracketPath,
}

/// Errors from bracket evaluation.
#[derive(Debug, Error)]
pub enum BracketError {
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

fn trace(m: &Array2<C64>) -> C64 {
    let mut tr = C64::new(0.0, 0.0);
    for k in 0..m.nrows() {
        tr += m[(k, k)];
    }
    tr
}

fn commutator(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    a.dot(b) - b.dot(a)
}

/// Chain-path triple bracket straight from gradient matrices. The
/// `Observable`-level entry points below all funnel through this; tests use
/// it directly to probe non-Hermitian coordinate directions.
pub fn lie_nambu_from_gradients(
    metric: &Metric,
    df: &Array2<C64>,
    dh: &Array2<C64>,
    ds: &Array2<C64>,
) -> Result<C64, MetricError> {
    let tf = metric.tilde(df)?;
    let th = metric.tilde(dh)?;
    let ts = metric.tilde(ds)?;
    Ok(trace(&commutator(&ts, &th).dot(&tf)))
}

/// Triple bracket `{F, H, S}` at a state.
pub fn lie_nambu(
    metric: &Metric,
    state: &DensityState,
    f: &Observable,
    h: &Observable,
    s: &Observable,
    path: BracketPath,
) -> Result<BracketResult, BracketError> {
    let value = match path {
        BracketPath::Chain => {
            let df = gradient_matrix(f, metric, state)?;
            let dh = gradient_matrix(h, metric, state)?;
            let ds = gradient_matrix(s, metric, state)?;
            lie_nambu_from_gradients(metric, &df, &dh, &ds)?
        }
        BracketPath::Oracle => {
            let sc = structure_constants(metric)?;
            let df = gradient(f, metric, state)?;
            let dh = gradient(h, metric, state)?;
            let ds = gradient(s, metric, state)?;
            // Ω_{abc} (DF)^a (DH)^b (DS)^c, one composite pair at a time;
            // after each contraction the leading slots shift down by two.
            let t = sc
                .lowered
                .contract(&df, &[(0, 0), (1, 1)])?
                .contract(&dh, &[(0, 0), (1, 1)])?
                .contract(&ds, &[(0, 0), (1, 1)])?;
            debug_assert_eq!(t.rank(), 0);
            t.data()[0]
        }
    };
    Ok(BracketResult { value, path })
}

/// Binary Lie—Poisson bracket `{F, H}` at a state.
pub fn lie_poisson(
    metric: &Metric,
    state: &DensityState,
    f: &Observable,
    h: &Observable,
    path: BracketPath,
) -> Result<BracketResult, BracketError> {
    let value = match path {
        BracketPath::Chain => {
            let df = gradient_matrix(f, metric, state)?;
            let dh = gradient_matrix(h, metric, state)?;
            let tf = metric.tilde(&df)?;
            let th = metric.tilde(&dh)?;
            let p = metric.raised_state(state.matrix())?;
            trace(&commutator(&p, &th).dot(&tf))
        }
        BracketPath::Oracle => {
            // ρ_a Ω^a_{bc} (DF)^b (DH)^c with the mixed-placement tensor.
            let sc = structure_constants(metric)?;
            let rho = state.to_tensor();
            let df = gradient(f, metric, state)?;
            let dh = gradient(h, metric, state)?;
            let t = sc
                .mixed
                .contract(&rho, &[(0, 0), (1, 1)])?
                .contract(&df, &[(0, 0), (1, 1)])?
                .contract(&dh, &[(0, 0), (1, 1)])?;
            debug_assert_eq!(t.rank(), 0);
            t.data()[0]
        }
    };
    Ok(BracketResult { value, path })
}

/// The bracket vector field as a plain matrix: `V = [S̃, H̃]·G`, so that the
/// equation of motion reads `∂ₛρ = −i·V`. Row/column are the two lower
/// coordinate indices of `ρ`.
pub fn vector_field_matrix(
    metric: &Metric,
    state: &DensityState,
    h: &Observable,
    s: &Observable,
) -> Result<Array2<C64>, BracketError> {
    let dh = gradient_matrix(h, metric, state)?;
    let ds = gradient_matrix(s, metric, state)?;
    Ok(vector_field_from_gradients(metric, &dh, &ds)?)
}

/// [`vector_field_matrix`] from raw gradient matrices; the integrator's
/// inner loop uses this to avoid tensor wrappers.
pub fn vector_field_from_gradients(
    metric: &Metric,
    dh: &Array2<C64>,
    ds: &Array2<C64>,
) -> Result<Array2<C64>, MetricError> {
    let th = metric.tilde(dh)?;
    let ts = metric.tilde(ds)?;
    Ok(commutator(&ts, &th).dot(metric.g()))
}

/// The bracket vector field as a rank-2 tensor with two lower slots.
pub fn vector_field(
    metric: &Metric,
    state: &DensityState,
    h: &Observable,
    s: &Observable,
) -> Result<crate::tensor::Tensor, BracketError> {
    let v = vector_field_matrix(metric, state, h, s)?;
    Ok(crate::tensor::Tensor::from_matrix(
        &v,
        crate::tensor::Slot::lower(metric.space().clone()),
        crate::tensor::Slot::lower(metric.space().clone()),
    )?)
}
