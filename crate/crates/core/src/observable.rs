//! States, observables, evaluation, and gradients.
//!
//! A [`DensityState`] is a Hermitian coordinate array `ρ[α][α']` (both
//! indices low). Observables are functions of `ρ`:
//!
//! * [`Observable::Linear`] — `F(ρ) = Σ_{αα'} h[α][α'] ρ[α][α']`, the
//!   elementwise (unconjugated) pairing of a Hermitian coefficient array
//!   with the state. Hermiticity of `h` is exactly the condition for `F` to
//!   be real on Hermitian states.
//! * [`Observable::CasimirPoly`] — a real-coefficient polynomial in the
//!   Casimir invariants `C_n = Tr[Pⁿ]`, where `P = ρ·G⁻¹` is the state with
//!   its second index raised.
//! * [`Observable::Sum`] — real-weighted sums of the above.
//! * [`Observable::Subsystem`] — an observable of a reduced state of a
//!   composite system, pulled back to the full space (see [`crate::multi`]).
//!
//! Gradients are taken with respect to the independent complex coordinates
//! `ρ[α][α']` and returned with both composite indices up, ready for the
//! bracket machinery. Every analytic gradient can be cross-checked against
//! central finite differences with [`fd_gradient_check`]; all observables
//! here are polynomials in the state entries, so the two agree to a few
//! parts in 1e10 at the default step.

use ndarray::Array2;
use thiserror::Error;

use crate::linalg::{self, identity};
use crate::metric::{higher_metric, Metric, MetricError};
use crate::tensor::{IndexSpace, Slot, Tensor, TensorError, Variance};
use crate::C64;

/// Relative Hermiticity tolerance for density states.
pub const STATE_HERMITICITY_TOL: f64 = 1e-12;
/// Relative Hermiticity tolerance for linear observable coefficients.
pub const COEFFICIENT_HERMITICITY_TOL: f64 = 1e-10;
/// Largest Casimir order the fast trace path will compute.
pub const CASIMIR_ORDER_CAP: usize = 12;

/// Errors from state construction, evaluation, and gradients.
#[derive(Debug, Error)]
pub enum ObservableError {
    #[error(
        "state is not Hermitian: residual {residual:.3e} exceeds {tol:.1e} relative \
         to the state scale"
    )]
    StateNotHermitian { residual: f64, tol: f64 },
    #[error("state matrix must be square, got {rows} x {cols}")]
    StateNotSquare { rows: usize, cols: usize },
    #[error(
        "linear coefficient array is not Hermitian: residual {residual:.3e} exceeds \
         {tol:.1e}; non-Hermitian coefficients give complex expectation values"
    )]
    CoefficientNotHermitian { residual: f64, tol: f64 },
    #[error("pure state needs at least one amplitude")]
    EmptyPureState,
    #[error(
        "object over space `{got_label}` (dim {got_dim}) used with space \
         `{want_label}` (dim {want_dim})"
    )]
    SpaceMismatch {
        got_label: String,
        got_dim: usize,
        want_label: String,
        want_dim: usize,
    },
    #[error("Casimir order must lie in 1..={cap}, got {order}")]
    BadCasimirOrder { order: usize, cap: usize },
    #[error("subsystem observable: {0}")]
    Subsystem(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// A Hermitian coordinate array `ρ[α][α']` over one index space.
#[derive(Debug, Clone)]
pub struct DensityState {
    space: IndexSpace,
    matrix: Array2<C64>,
}

impl DensityState {
    /// Validate and wrap a state matrix: must be square, match the space's
    /// dimension, and be Hermitian to [`STATE_HERMITICITY_TOL`] relative to
    /// its own scale.
    pub fn new(space: IndexSpace, matrix: Array2<C64>) -> Result<Self, ObservableError> {
        if matrix.nrows() != matrix.ncols() {
            return Err(ObservableError::StateNotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        if matrix.nrows() != space.dim() {
            return Err(ObservableError::SpaceMismatch {
                got_label: space.label().to_string(),
                got_dim: matrix.nrows(),
                want_label: space.label().to_string(),
                want_dim: space.dim(),
            });
        }
        let scale = linalg::max_abs(&matrix).max(1.0);
        let residual = linalg::hermiticity_residual(&matrix) / scale;
        if residual > STATE_HERMITICITY_TOL {
            return Err(ObservableError::StateNotHermitian {
                residual,
                tol: STATE_HERMITICITY_TOL,
            });
        }
        Ok(DensityState { space, matrix })
    }

    /// Wrap without the Hermiticity check. Integrator internals use this on
    /// matrices whose Hermiticity they monitor themselves.
    pub(crate) fn new_unchecked(space: IndexSpace, matrix: Array2<C64>) -> Self {
        DensityState { space, matrix }
    }

    /// Deterministic random Hermitian state (entries bounded by 1 in
    /// modulus), seeded through ChaCha8.
    pub fn random(space: IndexSpace, seed: u64) -> Self {
        let matrix = crate::tensor::random_hermitian_matrix(space.dim(), seed);
        DensityState { space, matrix }
    }

    /// Rank-one state `ρ[α][α'] = ψ[α] · conj(ψ[α'])` built from amplitudes.
    pub fn pure(space: IndexSpace, psi: &[C64]) -> Result<Self, ObservableError> {
        if psi.is_empty() {
            return Err(ObservableError::EmptyPureState);
        }
        if psi.len() != space.dim() {
            return Err(ObservableError::SpaceMismatch {
                got_label: space.label().to_string(),
                got_dim: psi.len(),
                want_label: space.label().to_string(),
                want_dim: space.dim(),
            });
        }
        let d = psi.len();
        let mut m = Array2::<C64>::zeros((d, d));
        for a in 0..d {
            for ap in 0..d {
                m[(a, ap)] = psi[a] * psi[ap].conj();
            }
        }
        Ok(DensityState { space, matrix: m })
    }

    pub fn space(&self) -> &IndexSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    /// The state as a rank-2 tensor with two lower slots.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_matrix(
            &self.matrix,
            Slot::lower(self.space.clone()),
            Slot::lower(self.space.clone()),
        )
        .expect("state matrix fits its own space")
    }

    /// Absolute Hermiticity residual `max |ρ − ρ†|`.
    pub fn hermiticity_residual(&self) -> f64 {
        linalg::hermiticity_residual(&self.matrix)
    }
}

/// One monomial `coefficient · Π_n C_n^{powers[n-1]}` in the Casimirs
/// `C₁..C₄`.
#[derive(Debug, Clone, PartialEq)]
pub struct CasimirTerm {
    pub coefficient: f64,
    /// Exponents of `C₁, C₂, C₃, C₄`.
    pub powers: [u32; 4],
}

/// A real-coefficient polynomial in the first four Casimir invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct CasimirPoly {
    terms: Vec<CasimirTerm>,
}

impl CasimirPoly {
    pub fn new(terms: Vec<CasimirTerm>) -> Self {
        CasimirPoly { terms }
    }

    /// The single Casimir `C_n`, `n` in `1..=4`.
    pub fn casimir(n: usize) -> Result<Self, ObservableError> {
        if n == 0 || n > 4 {
            return Err(ObservableError::BadCasimirOrder { order: n, cap: 4 });
        }
        let mut powers = [0u32; 4];
        powers[n - 1] = 1;
        Ok(CasimirPoly {
            terms: vec![CasimirTerm {
                coefficient: 1.0,
                powers,
            }],
        })
    }

    /// The distinguished generator `C₂ / 2`; with this as the second
    /// generator the triple bracket reduces to the Lie—Poisson bracket.
    pub fn half_c2() -> Self {
        CasimirPoly {
            terms: vec![CasimirTerm {
                coefficient: 0.5,
                powers: [0, 1, 0, 0],
            }],
        }
    }

    pub fn terms(&self) -> &[CasimirTerm] {
        &self.terms
    }

    /// Highest Casimir order appearing with a nonzero exponent and nonzero
    /// coefficient (0 for a constant polynomial).
    pub fn max_casimir_order(&self) -> usize {
        let mut order = 0usize;
        for t in &self.terms {
            if t.coefficient == 0.0 {
                continue;
            }
            for (k, &p) in t.powers.iter().enumerate() {
                if p > 0 {
                    order = order.max(k + 1);
                }
            }
        }
        order
    }

    /// Whether the polynomial involves only `C₁` and `C₂`. Subsystem
    /// trajectories stay autonomous exactly for such generators; `C₃`- or
    /// `C₄`-dependent generators couple subsystems at the trajectory level.
    pub fn depends_only_on_c1_c2(&self) -> bool {
        self.max_casimir_order() <= 2
    }

    fn eval_from_casimirs(&self, c: &[C64; 4]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for t in &self.terms {
            let mut term = C64::new(t.coefficient, 0.0);
            for (k, &p) in t.powers.iter().enumerate() {
                for _ in 0..p {
                    term *= c[k];
                }
            }
            acc += term;
        }
        acc
    }

    /// Partial derivatives `∂(poly)/∂C_n` at the given Casimir values.
    fn partials(&self, c: &[C64; 4]) -> [C64; 4] {
        let mut out = [C64::new(0.0, 0.0); 4];
        for t in &self.terms {
            for n in 0..4 {
                if t.powers[n] == 0 {
                    continue;
                }
                let mut term = C64::new(t.coefficient * t.powers[n] as f64, 0.0);
                for (k, &p) in t.powers.iter().enumerate() {
                    let reps = if k == n { p - 1 } else { p };
                    for _ in 0..reps {
                        term *= c[k];
                    }
                }
                out[n] += term;
            }
        }
        out
    }
}

/// An observable: a (real-valued on Hermitian states) function of the state
/// coordinates.
#[derive(Debug, Clone)]
pub enum Observable {
    /// `F(ρ) = Σ_{αα'} h[α][α'] ρ[α][α']` with Hermitian `h`.
    Linear { h: Array2<C64> },
    /// A real polynomial in the Casimirs `C₁..C₄`.
    CasimirPoly(CasimirPoly),
    /// A real-weighted sum of observables.
    Sum(Vec<(f64, Observable)>),
    /// An observable of the reduction of a composite state to the particles
    /// listed in `keep` (see [`crate::multi::reduce_state`]). The
    /// per-particle metrics are stored so the reduction is well defined;
    /// [`evaluate`] checks them against the metric it is handed.
    Subsystem {
        metrics: Vec<Metric>,
        keep: Vec<usize>,
        inner: Box<Observable>,
    },
}

impl Observable {
    /// Validated linear observable; `h` must be Hermitian to
    /// [`COEFFICIENT_HERMITICITY_TOL`].
    pub fn linear(h: Array2<C64>) -> Result<Self, ObservableError> {
        check_coefficient(&h)?;
        Ok(Observable::Linear { h })
    }

    /// The Casimir `C_n` as an observable.
    pub fn casimir(n: usize) -> Result<Self, ObservableError> {
        Ok(Observable::CasimirPoly(CasimirPoly::casimir(n)?))
    }

    /// The distinguished generator `C₂ / 2`.
    pub fn half_c2() -> Self {
        Observable::CasimirPoly(CasimirPoly::half_c2())
    }
}

fn check_coefficient(h: &Array2<C64>) -> Result<(), ObservableError> {
    let scale = linalg::max_abs(h).max(1.0);
    let residual = linalg::hermiticity_residual(h) / scale;
    if residual > COEFFICIENT_HERMITICITY_TOL {
        return Err(ObservableError::CoefficientNotHermitian {
            residual,
            tol: COEFFICIENT_HERMITICITY_TOL,
        });
    }
    Ok(())
}

fn check_space(metric: &Metric, state: &DensityState) -> Result<(), ObservableError> {
    if metric.space() != state.space() {
        return Err(ObservableError::SpaceMismatch {
            got_label: state.space().label().to_string(),
            got_dim: state.space().dim(),
            want_label: metric.space().label().to_string(),
            want_dim: metric.space().dim(),
        });
    }
    Ok(())
}

/// Casimir invariant `C_n = Tr[Pⁿ]` with `P = ρ·G⁻¹` — the fast trace path.
pub fn casimir(metric: &Metric, state: &DensityState, n: usize) -> Result<C64, ObservableError> {
    check_space(metric, state)?;
    if n == 0 || n > CASIMIR_ORDER_CAP {
        return Err(ObservableError::BadCasimirOrder {
            order: n,
            cap: CASIMIR_ORDER_CAP,
        });
    }
    let p = metric.raised_state(state.matrix())?;
    let mut pow = p.clone();
    for _ in 1..n {
        pow = pow.dot(&p);
    }
    let mut tr = C64::new(0.0, 0.0);
    for k in 0..p.nrows() {
        tr += pow[(k, k)];
    }
    Ok(tr)
}

/// Casimir invariant computed the slow way: the rank-2n chain metric fully
/// contracted with `n` copies of the state tensor. Exists purely as an
/// independent oracle for [`casimir`]; capped at chain length 4 by
/// [`crate::metric::HIGHER_METRIC_MAX_CHAIN`].
pub fn casimir_materialized(
    metric: &Metric,
    state: &DensityState,
    n: usize,
) -> Result<C64, ObservableError> {
    check_space(metric, state)?;
    if n == 0 {
        return Err(ObservableError::BadCasimirOrder {
            order: n,
            cap: crate::metric::HIGHER_METRIC_MAX_CHAIN,
        });
    }
    let chain = higher_metric(metric, n, Variance::Upper)?;
    let rho = state.to_tensor();
    let mut t = chain;
    for _ in 0..n {
        // Slots of the remaining chain shift down by two after each
        // contraction, so the leading pair is always (0, 1).
        t = t.contract(&rho, &[(0, 0), (1, 1)])?;
    }
    debug_assert_eq!(t.rank(), 0);
    Ok(t.data()[0])
}

/// All Casimirs `C₁..C_max` in one pass over powers of `P`.
pub fn casimir_chain(
    metric: &Metric,
    state: &DensityState,
    max: usize,
) -> Result<Vec<C64>, ObservableError> {
    check_space(metric, state)?;
    if max == 0 || max > CASIMIR_ORDER_CAP {
        return Err(ObservableError::BadCasimirOrder {
            order: max,
            cap: CASIMIR_ORDER_CAP,
        });
    }
    let p = metric.raised_state(state.matrix())?;
    let mut out = Vec::with_capacity(max);
    let mut pow = identity(p.nrows());
    for _ in 0..max {
        pow = pow.dot(&p);
        let mut tr = C64::new(0.0, 0.0);
        for k in 0..p.nrows() {
            tr += pow[(k, k)];
        }
        out.push(tr);
    }
    Ok(out)
}

fn casimir_quadruple(metric: &Metric, state: &DensityState) -> Result<[C64; 4], ObservableError> {
    let v = casimir_chain(metric, state, 4)?;
    Ok([v[0], v[1], v[2], v[3]])
}

/// Evaluate an observable on a state. Real-valued up to roundoff for
/// Hermitian states and validated observables; the complex value is
/// returned so callers can monitor the imaginary part as a health check.
pub fn evaluate(
    f: &Observable,
    metric: &Metric,
    state: &DensityState,
) -> Result<C64, ObservableError> {
    check_space(metric, state)?;
    match f {
        Observable::Linear { h } => {
            check_coefficient(h)?;
            if h.nrows() != state.dim() || h.ncols() != state.dim() {
                return Err(ObservableError::SpaceMismatch {
                    got_label: "coefficient".to_string(),
                    got_dim: h.nrows(),
                    want_label: metric.space().label().to_string(),
                    want_dim: metric.dim(),
                });
            }
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..state.dim() {
                for ap in 0..state.dim() {
                    acc += h[(a, ap)] * state.matrix()[(a, ap)];
                }
            }
            Ok(acc)
        }
        Observable::CasimirPoly(poly) => {
            let c = casimir_quadruple(metric, state)?;
            Ok(poly.eval_from_casimirs(&c))
        }
        Observable::Sum(parts) => {
            let mut acc = C64::new(0.0, 0.0);
            for (w, f) in parts {
                acc += evaluate(f, metric, state)? * C64::new(*w, 0.0);
            }
            Ok(acc)
        }
        Observable::Subsystem {
            metrics,
            keep,
            inner,
        } => {
            let (inner_metric, reduced) =
                crate::multi::subsystem_restriction(metrics, keep, metric, state)?;
            evaluate(inner, &inner_metric, &reduced)
        }
    }
}

/// Gradient `∂F/∂ρ[α][α']` as a plain matrix with the composite index up.
pub fn gradient_matrix(
    f: &Observable,
    metric: &Metric,
    state: &DensityState,
) -> Result<Array2<C64>, ObservableError> {
    check_space(metric, state)?;
    match f {
        Observable::Linear { h } => {
            check_coefficient(h)?;
            if h.nrows() != state.dim() || h.ncols() != state.dim() {
                return Err(ObservableError::SpaceMismatch {
                    got_label: "coefficient".to_string(),
                    got_dim: h.nrows(),
                    want_label: metric.space().label().to_string(),
                    want_dim: metric.dim(),
                });
            }
            Ok(h.clone())
        }
        Observable::CasimirPoly(poly) => {
            let c = casimir_quadruple(metric, state)?;
            let partials = poly.partials(&c);
            let d = state.dim();
            let p = metric.raised_state(state.matrix())?;
            // D C_n = n · (G⁻¹ · Pⁿ⁻¹)ᵀ; accumulate Σ_n ∂poly/∂C_n · D C_n.
            let mut grad = Array2::<C64>::zeros((d, d));
            let mut pow = identity(d); // P⁰
            for n in 1..=4usize {
                if partials[n - 1] != C64::new(0.0, 0.0) {
                    let dcn = metric.ginv().dot(&pow).t().to_owned();
                    grad = grad + dcn.mapv(|z| z * partials[n - 1] * n as f64);
                }
                pow = pow.dot(&p);
            }
            Ok(grad)
        }
        Observable::Sum(parts) => {
            let d = state.dim();
            let mut grad = Array2::<C64>::zeros((d, d));
            for (w, f) in parts {
                let g = gradient_matrix(f, metric, state)?;
                grad = grad + g.mapv(|z| z * *w);
            }
            Ok(grad)
        }
        Observable::Subsystem {
            metrics,
            keep,
            inner,
        } => {
            let (inner_metric, reduced) =
                crate::multi::subsystem_restriction(metrics, keep, metric, state)?;
            let inner_grad = gradient_matrix(inner, &inner_metric, &reduced)?;
            crate::multi::lift_gradient(metrics, keep, &inner_grad)
                .map_err(|e| ObservableError::Subsystem(e.to_string()))
        }
    }
}

/// Gradient as a rank-2 tensor with both slots up.
pub fn gradient(
    f: &Observable,
    metric: &Metric,
    state: &DensityState,
) -> Result<Tensor, ObservableError> {
    let m = gradient_matrix(f, metric, state)?;
    Ok(Tensor::from_matrix(
        &m,
        Slot::upper(metric.space().clone()),
        Slot::upper(metric.space().clone()),
    )?)
}

/// Report from a finite-difference gradient cross-check.
#[derive(Debug, Clone, Copy)]
pub struct FdCheck {
    /// Largest deviation between the analytic directional derivative and a
    /// central finite difference, over all Hermitian basis directions,
    /// relative to `max(1, scale of the derivatives)`.
    pub max_relative_error: f64,
    /// Number of directions probed (`d²` for dimension `d`).
    pub directions: usize,
    /// Step used for the central differences.
    pub step: f64,
}

/// Cross-check [`gradient_matrix`] against central finite differences.
///
/// Every observable in this crate is a polynomial in the complex
/// coordinates `ρ[α][α']`, so along any Hermitian direction `V` the exact
/// directional derivative is `Σ_{αα'} D[α][α'] V[α][α']`. The check probes
/// the full Hermitian basis: diagonal directions, symmetric real pairs, and
/// antisymmetric imaginary pairs.
pub fn fd_gradient_check(
    f: &Observable,
    metric: &Metric,
    state: &DensityState,
) -> Result<FdCheck, ObservableError> {
    let d = state.dim();
    let grad = gradient_matrix(f, metric, state)?;
    let step = 1e-6 * linalg::max_abs(state.matrix()).max(1.0);

    let mut dirs: Vec<Array2<C64>> = Vec::with_capacity(d * d);
    for i in 0..d {
        let mut v = Array2::<C64>::zeros((d, d));
        v[(i, i)] = C64::new(1.0, 0.0);
        dirs.push(v);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let mut v = Array2::<C64>::zeros((d, d));
            v[(i, j)] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            v[(j, i)] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            dirs.push(v);
            let mut w = Array2::<C64>::zeros((d, d));
            w[(i, j)] = C64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
            w[(j, i)] = C64::new(0.0, -std::f64::consts::FRAC_1_SQRT_2);
            dirs.push(w);
        }
    }

    let mut denom: f64 = 1.0;
    let mut max_err = 0.0f64;
    for v in &dirs {
        let plus = DensityState::new_unchecked(
            state.space().clone(),
            state.matrix() + &v.mapv(|z| z * step),
        );
        let minus = DensityState::new_unchecked(
            state.space().clone(),
            state.matrix() - &v.mapv(|z| z * step),
        );
        let fp = evaluate(f, metric, &plus)?;
        let fm = evaluate(f, metric, &minus)?;
        let fd = (fp - fm) / C64::new(2.0 * step, 0.0);
        let mut analytic = C64::new(0.0, 0.0);
        for a in 0..d {
            for ap in 0..d {
                analytic += grad[(a, ap)] * v[(a, ap)];
            }
        }
        denom = denom.max(analytic.norm());
        max_err = max_err.max((fd - analytic).norm());
    }
    Ok(FdCheck {
        max_relative_error: max_err / denom,
        directions: dirs.len(),
        step,
    })
}
