//! Core engine for triple-bracket dynamics of density matrices over
//! indefinite metrics.
//!
//! The crate evolves Hermitian coordinate arrays `ρ[α][α']` under the
//! Lie—Nambu triple bracket `i ∂ₛF = {F, H, S}` built from a Hermitian,
//! generally indefinite metric `g[α][α']`. Choosing the second generator
//! `S = C₂/2` (half the quadratic Casimir) collapses the triple bracket to
//! the metric Lie—Poisson bracket and the evolution to the familiar linear
//! von Neumann equation; other Casimir polynomials give genuinely nonlinear
//! flows that still preserve every Casimir and the spectrum of the raised
//! state.
//!
//! Module map:
//!
//! * [`tensor`] — labeled dense tensors with structural contraction.
//! * [`metric`] — indefinite metrics, pair/chain metrics, structure
//!   constants, raise/lower maps.
//! * [`observable`] — states, observables (linear and Casimir-polynomial),
//!   evaluation, gradients, finite-difference gradient checks.
//! * [`bracket`] — Lie—Poisson and Lie—Nambu brackets, fast trace-form
//!   paths and materialized-tensor oracles, the bracket vector field.
//! * [`dynamics`] — fixed-step integrators, conservation reports, spectral
//!   tracking, and the closed-form linear oracle.
//! * [`multi`] — composite systems: Kronecker metrics, per-particle
//!   reduction, observable embedding, N-particle brackets.
//! * [`dirac`] — the 1+1 lattice Dirac sector: bispinor index machinery,
//!   the lattice metric, the induced Hamiltonian observable, and pure-state
//!   evolution.
//! * [`linalg`] — small dense helpers (matrix exponential, eigenvalues,
//!   inverses, norms) shared by everything above.
//!
//! Everything is desk-scale by design: dimensions are capped by explicit
//! guards, all randomness flows through seeded ChaCha8 streams, and every
//! fast path has a slow, independently written oracle twin used in tests.

pub mod bracket;
pub mod dirac;
pub mod dynamics;
pub mod linalg;
pub mod metric;
pub mod multi;
pub mod observable;
pub mod tensor;

/// Complex double, the scalar type of the whole crate.
pub type C64 = num_complex::Complex64;

pub use bracket::{
    lie_nambu, lie_poisson, vector_field, BracketError, BracketPath, BracketResult,
};
pub use dirac::{
    apply_generator, bispinor_blocks, charge_form, dirac_hamiltonian, dirac_metric,
    dirac_system, lattice_metric, pack_index, pure_state_evolve, spinor_derivative,
    unpack_index, BispinorBlocks, DiracError, LatticeSpec, PureSample, PureTrajectory,
};
pub use dynamics::{
    drift_report, evolve, linear_oracle, spectral_track, DriftReport, DynamicsError,
    IntegratorConfig, Sample, Scheme, SpectralTrack, Trajectory,
};
pub use metric::{
    higher_metric, pair_metric, structure_constants, Metric, MetricError, PairMetric,
    StructureConstants,
};
pub use multi::{
    casimir_n, embed_observable, kron_metric, lie_nambu_n, lift_gradient, product_state,
    reduce_state, tensor_pair_metric, MultiError,
};
pub use observable::{
    casimir, casimir_chain, casimir_materialized, evaluate, fd_gradient_check, gradient,
    gradient_matrix, CasimirPoly, CasimirTerm, DensityState, FdCheck, Observable,
    ObservableError,
};
pub use tensor::{random_hermitian, IndexSpace, Slot, Tensor, TensorError, Variance};
