//! Composite (N-particle) systems.
//!
//! A composite system is described by the Kronecker metric `G = ⊗ G_j` over
//! the product index space; every one-particle construction (brackets,
//! Casimirs, integrators) then applies verbatim at the composite dimension.
//! What this module adds is the traffic between the composite system and
//! its subsystems:
//!
//! * [`reduce_state`] — the generalized partial trace. Each dropped
//!   particle's index pair `(β_j, β'_j)` is contracted with that particle's
//!   inverse metric `G_j⁻¹[β'_j][β_j]`, one particle at a time. On product
//!   states this multiplies the kept factor by `Π C₁` of the dropped
//!   factors, and it is the unique per-particle convention under which
//!   subsystem observables of disjoint particles are mutually central for
//!   the triple bracket (the separability theorems exercised in the tests).
//! * [`lift_gradient`] — the adjoint map: a gradient on the kept factor is
//!   extended to the full space by tensoring the dropped slots with
//!   `G_j⁻¹[α'_j][α_j]` factors. The tilde of a lifted gradient is
//!   `F̃_inner ⊗ I` on the dropped factors, which is what makes the
//!   separability results exact.
//! * [`embed_observable`] — pulls a subsystem observable back to the full
//!   space: linear observables embed in closed form (their coefficient
//!   array is lifted), nonlinear ones become [`Observable::Subsystem`].
//!
//! Subsystem trajectories are autonomous (the reduced state evolves under
//! the subsystem's own Hamiltonian alone) when the second generator `S` is
//! a polynomial in `C₁` and `C₂` only; `C₃`- or `C₄`-dependent generators
//! couple subsystems at the trajectory level even though the pointwise
//! separability identities still hold. The tests pin both sides of this.

use ndarray::Array2;
use thiserror::Error;

use crate::bracket::{lie_nambu, BracketError, BracketPath, BracketResult};
use crate::linalg;
use crate::metric::{Metric, MetricError};
use crate::observable::{casimir, DensityState, Observable, ObservableError};
use crate::tensor::{IndexSpace, TensorError};
use crate::C64;

/// Largest composite dimension for Kronecker metrics and composite states.
pub const KRON_DIM_CAP: usize = 64;
/// Largest composite dimension for materialized composite pair metrics.
pub const TENSOR_PAIR_METRIC_DIM_CAP: usize = 8;
/// Largest composite dimension for chain-path composite brackets.
pub const MULTI_BRACKET_CHAIN_DIM_CAP: usize = 16;
/// Largest composite dimension for oracle-path composite brackets.
pub const MULTI_BRACKET_ORACLE_DIM_CAP: usize = 8;

/// Errors from composite-system operations.
#[derive(Debug, Error)]
pub enum MultiError {
    #[error("composite system needs at least one particle")]
    NoParticles,
    #[error("particle index {index} out of range for {count} particles")]
    BadParticleIndex { index: usize, count: usize },
    #[error("keep list must be strictly increasing, offending entry {index}")]
    KeepNotSorted { index: usize },
    #[error("keep list must name at least one particle")]
    EmptyKeep,
    #[error("composite dimension {dim} exceeds the {what} cap of {cap}")]
    DimensionTooLarge {
        dim: usize,
        cap: usize,
        what: &'static str,
    },
    #[error("state/gradient is {rows} x {cols} but the composite dimension is {want}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        want: usize,
    },
    #[error(
        "state lives on space `{got}` but the composite of the given factors \
         is `{want}`"
    )]
    SpaceMismatch { got: String, want: String },
    #[error(
        "supplied metric differs from the Kronecker product of the factors: \
         residual {residual:.3e}"
    )]
    MetricMismatch { residual: f64 },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Bracket(#[from] BracketError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

fn check_particles(metrics: &[Metric]) -> Result<(), MultiError> {
    if metrics.is_empty() {
        return Err(MultiError::NoParticles);
    }
    Ok(())
}

fn check_keep(metrics: &[Metric], keep: &[usize]) -> Result<(), MultiError> {
    check_particles(metrics)?;
    if keep.is_empty() {
        return Err(MultiError::EmptyKeep);
    }
    for (pos, &j) in keep.iter().enumerate() {
        if j >= metrics.len() {
            return Err(MultiError::BadParticleIndex {
                index: j,
                count: metrics.len(),
            });
        }
        if pos > 0 && keep[pos - 1] >= j {
            return Err(MultiError::KeepNotSorted { index: j });
        }
    }
    Ok(())
}

fn total_dim(metrics: &[Metric]) -> usize {
    metrics.iter().map(|m| m.dim()).product()
}

/// The label of the composite index space: factor labels joined with `*`.
pub fn composite_label(metrics: &[Metric]) -> String {
    metrics
        .iter()
        .map(|m| m.space().label())
        .collect::<Vec<_>>()
        .join("*")
}

/// The Kronecker-product metric `⊗ G_j` over the composite index space.
/// Validated like any other metric; note that condition numbers multiply
/// across factors.
pub fn kron_metric(metrics: &[Metric]) -> Result<Metric, MultiError> {
    check_particles(metrics)?;
    let dim = total_dim(metrics);
    if dim > KRON_DIM_CAP {
        return Err(MultiError::DimensionTooLarge {
            dim,
            cap: KRON_DIM_CAP,
            what: "composite metric",
        });
    }
    let mut g = metrics[0].g().clone();
    for m in &metrics[1..] {
        g = linalg::kron(&g, m.g());
    }
    let space = IndexSpace::new(composite_label(metrics), dim)?;
    Ok(Metric::from_matrix(space, g)?)
}

/// Kronecker product of one-particle states over the composite space.
pub fn product_state(states: &[DensityState]) -> Result<DensityState, MultiError> {
    if states.is_empty() {
        return Err(MultiError::NoParticles);
    }
    let dim: usize = states.iter().map(|s| s.dim()).product();
    if dim > KRON_DIM_CAP {
        return Err(MultiError::DimensionTooLarge {
            dim,
            cap: KRON_DIM_CAP,
            what: "composite state",
        });
    }
    let mut r = states[0].matrix().clone();
    for s in &states[1..] {
        r = linalg::kron(&r, s.matrix());
    }
    let label = states
        .iter()
        .map(|s| s.space().label())
        .collect::<Vec<_>>()
        .join("*");
    let space = IndexSpace::new(label, dim)?;
    Ok(DensityState::new(space, r)?)
}

/// The composite pair metric (rank-4 over the composite space) — a thin
/// wrapper over [`crate::metric::pair_metric`] with a tight dimension cap,
/// since the materialized object grows as the fourth power.
pub fn tensor_pair_metric(metrics: &[Metric]) -> Result<crate::metric::PairMetric, MultiError> {
    check_particles(metrics)?;
    let dim = total_dim(metrics);
    if dim > TENSOR_PAIR_METRIC_DIM_CAP {
        return Err(MultiError::DimensionTooLarge {
            dim,
            cap: TENSOR_PAIR_METRIC_DIM_CAP,
            what: "composite pair metric",
        });
    }
    Ok(crate::metric::pair_metric(&kron_metric(metrics)?)?)
}

/// Per-particle index decoding: particle strides of the composite index.
fn particle_strides(metrics: &[Metric]) -> Vec<usize> {
    let n = metrics.len();
    let mut st = vec![1usize; n];
    for j in (0..n.saturating_sub(1)).rev() {
        st[j] = st[j + 1] * metrics[j + 1].dim();
    }
    st
}

fn decode(mut idx: usize, metrics: &[Metric], out: &mut [usize]) {
    for j in (0..metrics.len()).rev() {
        out[j] = idx % metrics[j].dim();
        idx /= metrics[j].dim();
    }
}

/// Reduce a composite state to the particles in `keep` (strictly
/// increasing), contracting every dropped pair `(β_j, β'_j)` with
/// `G_j⁻¹[β'_j][β_j]`. Returns the subsystem metric (the Kronecker product
/// of the kept factors) together with the reduced state.
pub fn reduce_state(
    metrics: &[Metric],
    keep: &[usize],
    state: &DensityState,
) -> Result<(Metric, DensityState), MultiError> {
    check_keep(metrics, keep)?;
    let dtot = total_dim(metrics);
    if state.dim() != dtot {
        return Err(MultiError::ShapeMismatch {
            rows: state.dim(),
            cols: state.dim(),
            want: dtot,
        });
    }
    let want_label = composite_label(metrics);
    if state.space().label() != want_label {
        return Err(MultiError::SpaceMismatch {
            got: state.space().label().to_string(),
            want: want_label,
        });
    }
    let kept: Vec<Metric> = keep.iter().map(|&j| metrics[j].clone()).collect();
    let reduced_metric = kron_metric(&kept)?;
    let dropped: Vec<usize> = (0..metrics.len()).filter(|j| !keep.contains(j)).collect();

    let n = metrics.len();
    let kept_strides = particle_strides(&kept);
    let dk = reduced_metric.dim();
    let mut out = Array2::<C64>::zeros((dk, dk));
    let r = state.matrix();
    let mut a = vec![0usize; n];
    let mut ap = vec![0usize; n];
    for row in 0..dtot {
        decode(row, metrics, &mut a);
        let krow: usize = keep
            .iter()
            .enumerate()
            .map(|(pos, &j)| a[j] * kept_strides[pos])
            .sum();
        for col in 0..dtot {
            decode(col, metrics, &mut ap);
            let mut w = C64::new(1.0, 0.0);
            for &j in &dropped {
                w *= metrics[j].ginv()[(ap[j], a[j])];
            }
            let kcol: usize = keep
                .iter()
                .enumerate()
                .map(|(pos, &j)| ap[j] * kept_strides[pos])
                .sum();
            out[(krow, kcol)] += r[(row, col)] * w;
        }
    }
    // The reduction of a Hermitian state is Hermitian (the weights conjugate
    // into each other under row/column exchange); keep the validation on.
    let reduced = DensityState::new(reduced_metric.space().clone(), out)?;
    Ok((reduced_metric, reduced))
}

/// Lift a subsystem gradient (or linear coefficient array) to the composite
/// space: `D_full[(ā)(ā')] = D_in[kept part] · Π_{j dropped}
/// G_j⁻¹[α'_j][α_j]`. This is the adjoint of [`reduce_state`]: pairing a
/// lifted array with a full state equals pairing the inner array with the
/// reduced state.
pub fn lift_gradient(
    metrics: &[Metric],
    keep: &[usize],
    inner: &Array2<C64>,
) -> Result<Array2<C64>, MultiError> {
    check_keep(metrics, keep)?;
    let dtot = total_dim(metrics);
    let kept: Vec<Metric> = keep.iter().map(|&j| metrics[j].clone()).collect();
    let dk = total_dim(&kept);
    if inner.nrows() != dk || inner.ncols() != dk {
        return Err(MultiError::ShapeMismatch {
            rows: inner.nrows(),
            cols: inner.ncols(),
            want: dk,
        });
    }
    let dropped: Vec<usize> = (0..metrics.len()).filter(|j| !keep.contains(j)).collect();
    let n = metrics.len();
    let kept_strides = particle_strides(&kept);
    let mut out = Array2::<C64>::zeros((dtot, dtot));
    let mut a = vec![0usize; n];
    let mut ap = vec![0usize; n];
    for row in 0..dtot {
        decode(row, metrics, &mut a);
        let krow: usize = keep
            .iter()
            .enumerate()
            .map(|(pos, &j)| a[j] * kept_strides[pos])
            .sum();
        for col in 0..dtot {
            decode(col, metrics, &mut ap);
            let kcol: usize = keep
                .iter()
                .enumerate()
                .map(|(pos, &j)| ap[j] * kept_strides[pos])
                .sum();
            let mut w = inner[(krow, kcol)];
            for &j in &dropped {
                w *= metrics[j].ginv()[(ap[j], a[j])];
            }
            out[(row, col)] = w;
        }
    }
    Ok(out)
}

/// Validate that `full_metric` really is the Kronecker product of the
/// factors, then reduce the state. Used by [`Observable::Subsystem`]
/// evaluation, hence the error type.
pub fn subsystem_restriction(
    metrics: &[Metric],
    keep: &[usize],
    full_metric: &Metric,
    state: &DensityState,
) -> Result<(Metric, DensityState), ObservableError> {
    let check = || -> Result<(Metric, DensityState), MultiError> {
        let kron = kron_metric(metrics)?;
        if kron.space() != full_metric.space() {
            return Err(MultiError::SpaceMismatch {
                got: full_metric.space().label().to_string(),
                want: kron.space().label().to_string(),
            });
        }
        let diff = kron.g() - full_metric.g();
        let residual =
            linalg::max_abs(&diff.to_owned()) / linalg::max_abs(full_metric.g()).max(1.0);
        if residual > 1e-10 {
            return Err(MultiError::MetricMismatch { residual });
        }
        reduce_state(metrics, keep, state)
    };
    check().map_err(|e| ObservableError::Subsystem(e.to_string()))
}

/// Pull a subsystem observable back to the composite space. Linear
/// observables embed in closed form (their coefficient array is lifted);
/// sums embed term by term; everything else becomes
/// [`Observable::Subsystem`], evaluated by reduce-then-evaluate with the
/// chain-rule gradient.
pub fn embed_observable(
    metrics: &[Metric],
    keep: &[usize],
    inner: &Observable,
) -> Result<Observable, MultiError> {
    check_keep(metrics, keep)?;
    match inner {
        Observable::Linear { h } => {
            let lifted = lift_gradient(metrics, keep, h)?;
            Ok(Observable::linear(lifted)?)
        }
        Observable::Sum(parts) => {
            let mut out = Vec::with_capacity(parts.len());
            for (w, f) in parts {
                out.push((*w, embed_observable(metrics, keep, f)?));
            }
            Ok(Observable::Sum(out))
        }
        other => Ok(Observable::Subsystem {
            metrics: metrics.to_vec(),
            keep: keep.to_vec(),
            inner: Box::new(other.clone()),
        }),
    }
}

/// Composite-system triple bracket: builds the Kronecker metric and
/// delegates to [`crate::bracket::lie_nambu`], with tighter caps (chain
/// path 16, oracle path 8) because composite dimensions grow fast.
pub fn lie_nambu_n(
    metrics: &[Metric],
    state: &DensityState,
    f: &Observable,
    h: &Observable,
    s: &Observable,
    path: BracketPath,
) -> Result<BracketResult, MultiError> {
    check_particles(metrics)?;
    let dim = total_dim(metrics);
    let (cap, what) = match path {
        BracketPath::Chain => (MULTI_BRACKET_CHAIN_DIM_CAP, "composite chain bracket"),
        BracketPath::Oracle => (MULTI_BRACKET_ORACLE_DIM_CAP, "composite oracle bracket"),
    };
    if dim > cap {
        return Err(MultiError::DimensionTooLarge { dim, cap, what });
    }
    let metric = kron_metric(metrics)?;
    Ok(lie_nambu(&metric, state, f, h, s, path)?)
}

/// Composite-system Casimir `C_n` over the Kronecker metric.
pub fn casimir_n(
    metrics: &[Metric],
    state: &DensityState,
    n: usize,
) -> Result<C64, MultiError> {
    let metric = kron_metric(metrics)?;
    Ok(casimir(&metric, state, n)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bracket::lie_nambu_from_gradients;
    use crate::dynamics::{evolve, IntegratorConfig, Scheme};
    use crate::observable::{
        evaluate, fd_gradient_check, gradient_matrix, CasimirPoly, CasimirTerm,
    };
    use crate::tensor::random_hermitian_matrix;

    fn sample_metric(label: &str, dim: usize, seed: u64) -> Metric {
        let mut g = random_hermitian_matrix(dim, seed).mapv(|z| z * 0.2);
        for k in 0..dim {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            g[(k, k)] += C64::new(s, 0.0);
        }
        Metric::from_matrix(IndexSpace::new(label, dim).unwrap(), g).unwrap()
    }

    fn three_particles(seed: u64) -> Vec<Metric> {
        vec![
            sample_metric("p0", 2, seed),
            sample_metric("p1", 2, seed + 1),
            sample_metric("p2", 2, seed + 2),
        ]
    }

    #[test]
    fn kron_of_signatures_is_a_signature() {
        let a = Metric::from_signature("a", &[1, -1]).unwrap();
        let b = Metric::from_signature("b", &[1, 1]).unwrap();
        let ab = kron_metric(&[a, b]).unwrap();
        assert_eq!(ab.space().label(), "a*b");
        assert_eq!(ab.dim(), 4);
        for k in 0..4 {
            let want = if k < 2 { 1.0 } else { -1.0 };
            assert!((ab.g()[(k, k)] - C64::new(want, 0.0)).norm() < 1e-15);
        }
        assert!((ab.condition_number() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn product_state_reduction_scales_by_dropped_c1() {
        let metrics = three_particles(500);
        let states: Vec<DensityState> = (0..3)
            .map(|j| DensityState::random(metrics[j].space().clone(), 510 + j as u64))
            .collect();
        let full = product_state(&states).unwrap();
        let (m1, reduced) = reduce_state(&metrics, &[1], &full).unwrap();
        assert_eq!(m1.space(), metrics[1].space());
        let c1_0 = casimir(&metrics[0], &states[0], 1).unwrap();
        let c1_2 = casimir(&metrics[2], &states[2], 1).unwrap();
        let want = states[1].matrix().mapv(|z| z * c1_0 * c1_2);
        let diff = reduced.matrix() - &want;
        assert!(
            linalg::max_abs(&diff.to_owned()) < 1e-12 * linalg::max_abs(&want).max(1.0),
            "reduction must scale the kept factor by the dropped C₁ product"
        );
    }

    #[test]
    fn reduction_preserves_the_first_casimir() {
        let metrics = three_particles(520);
        let kron = kron_metric(&metrics).unwrap();
        let full = DensityState::random(kron.space().clone(), 521);
        let c1_full = casimir(&kron, &full, 1).unwrap();
        for keep in [vec![0], vec![1], vec![2], vec![0, 2], vec![1, 2]] {
            let (m, red) = reduce_state(&metrics, &keep, &full).unwrap();
            let c1_red = casimir(&m, &red, 1).unwrap();
            assert!(
                (c1_full - c1_red).norm() < 1e-12 * c1_full.norm().max(1.0),
                "keep {keep:?}"
            );
        }
    }

    #[test]
    fn lift_is_adjoint_to_reduce() {
        // Σ lift(D)∘R_full == Σ D∘reduce(R_full).
        let metrics = three_particles(530);
        let kron = kron_metric(&metrics).unwrap();
        let full = DensityState::random(kron.space().clone(), 531);
        let d_in = random_hermitian_matrix(2, 532);
        let lifted = lift_gradient(&metrics, &[1], &d_in).unwrap();
        let mut lhs = C64::new(0.0, 0.0);
        for a in 0..8 {
            for ap in 0..8 {
                lhs += lifted[(a, ap)] * full.matrix()[(a, ap)];
            }
        }
        let (_, red) = reduce_state(&metrics, &[1], &full).unwrap();
        let mut rhs = C64::new(0.0, 0.0);
        for a in 0..2 {
            for ap in 0..2 {
                rhs += d_in[(a, ap)] * red.matrix()[(a, ap)];
            }
        }
        assert!((lhs - rhs).norm() < 1e-12 * rhs.norm().max(1.0));
    }

    #[test]
    fn disjoint_coordinate_observables_are_mutually_central() {
        // Coordinate functionals of the particle-0 reduction and the
        // particle-2 reduction have vanishing triple bracket with *any*
        // third observable: the separability backbone.
        let metrics = three_particles(540);
        let kron = kron_metric(&metrics).unwrap();
        let mut e01 = Array2::<C64>::zeros((2, 2));
        e01[(0, 1)] = C64::new(1.0, 0.0);
        let mut e10 = Array2::<C64>::zeros((2, 2));
        e10[(1, 0)] = C64::new(1.0, 0.0);
        let df = lift_gradient(&metrics, &[0], &e01).unwrap();
        let dg = lift_gradient(&metrics, &[2], &e10).unwrap();
        for seed in 0..3u64 {
            let x = random_hermitian_matrix(8, 550 + seed);
            let v = lie_nambu_from_gradients(&kron, &df, &dg, &x).unwrap();
            let scale = linalg::max_abs(&kron.tilde(&df).unwrap())
                * linalg::max_abs(&kron.tilde(&dg).unwrap())
                * linalg::max_abs(&kron.tilde(&x).unwrap());
            assert!(
                v.norm() < 1e-12 * scale.max(1.0),
                "seed {seed}: residual {}",
                v.norm()
            );
        }
    }

    #[test]
    fn disjoint_nonlinear_subsystem_observables_are_mutually_central() {
        // Same statement with genuinely nonlinear subsystem observables:
        // C₂ of the particle-0 reduction and C₁² of the particle-2
        // reduction, with gradients produced by the Subsystem chain rule.
        let metrics = three_particles(560);
        let kron = kron_metric(&metrics).unwrap();
        let full = DensityState::random(kron.space().clone(), 561);
        let f = embed_observable(&metrics, &[0], &Observable::casimir(2).unwrap()).unwrap();
        let g = embed_observable(
            &metrics,
            &[2],
            &Observable::CasimirPoly(CasimirPoly::new(vec![CasimirTerm {
                coefficient: 1.0,
                powers: [2, 0, 0, 0],
            }])),
        )
        .unwrap();
        assert!(matches!(f, Observable::Subsystem { .. }));
        let df = gradient_matrix(&f, &kron, &full).unwrap();
        let dg = gradient_matrix(&g, &kron, &full).unwrap();
        for seed in 0..3u64 {
            let x = random_hermitian_matrix(8, 570 + seed);
            let v = lie_nambu_from_gradients(&kron, &df, &dg, &x).unwrap();
            let scale = linalg::max_abs(&kron.tilde(&df).unwrap())
                * linalg::max_abs(&kron.tilde(&dg).unwrap())
                * linalg::max_abs(&kron.tilde(&x).unwrap());
            assert!(
                v.norm() < 1e-11 * scale.max(1.0),
                "seed {seed}: residual {}",
                v.norm()
            );
        }
    }

    #[test]
    fn embedded_evaluation_equals_reduce_then_evaluate() {
        let metrics = three_particles(580);
        let kron = kron_metric(&metrics).unwrap();
        let full = DensityState::random(kron.space().clone(), 581);
        // Nonlinear inner.
        let inner = Observable::casimir(2).unwrap();
        let embedded = embed_observable(&metrics, &[0], &inner).unwrap();
        let via_embed = evaluate(&embedded, &kron, &full).unwrap();
        let (m0, red) = reduce_state(&metrics, &[0], &full).unwrap();
        let direct = evaluate(&inner, &m0, &red).unwrap();
        assert!((via_embed - direct).norm() < 1e-12 * direct.norm().max(1.0));
        // Linear inner embeds in closed form.
        let h_in = random_hermitian_matrix(2, 582);
        let lin = Observable::linear(h_in.clone()).unwrap();
        let emb_lin = embed_observable(&metrics, &[1], &lin).unwrap();
        assert!(matches!(emb_lin, Observable::Linear { .. }));
        let via = evaluate(&emb_lin, &kron, &full).unwrap();
        let (m1, red1) = reduce_state(&metrics, &[1], &full).unwrap();
        let direct = evaluate(&lin, &m1, &red1).unwrap();
        assert!((via - direct).norm() < 1e-12 * direct.norm().max(1.0));
    }

    #[test]
    fn subsystem_gradient_passes_finite_difference_check() {
        let metrics = three_particles(590);
        let kron = kron_metric(&metrics).unwrap();
        let full = DensityState::random(kron.space().clone(), 591);
        let inner = Observable::CasimirPoly(CasimirPoly::new(vec![
            CasimirTerm {
                coefficient: 1.0,
                powers: [0, 1, 0, 0],
            },
            CasimirTerm {
                coefficient: -0.4,
                powers: [2, 0, 0, 0],
            },
        ]));
        let embedded = embed_observable(&metrics, &[0, 2], &inner).unwrap();
        let report = fd_gradient_check(&embedded, &kron, &full).unwrap();
        assert!(
            report.max_relative_error < 1e-6,
            "subsystem chain-rule gradient off: {:.3e}",
            report.max_relative_error
        );
    }

    #[test]
    fn subsystem_trajectories_are_autonomous_for_c1_c2_generators() {
        let metrics = three_particles(600);
        let kron = kron_metric(&metrics).unwrap();
        let full0 = DensityState::random(kron.space().clone(), 601);
        let h1 = embed_observable(
            &metrics,
            &[0],
            &Observable::linear(random_hermitian_matrix(2, 602)).unwrap(),
        )
        .unwrap();
        let h2 = embed_observable(
            &metrics,
            &[2],
            &Observable::linear(random_hermitian_matrix(2, 603)).unwrap(),
        )
        .unwrap();
        let h_both = Observable::Sum(vec![(1.0, h1.clone()), (1.0, h2)]);
        let f1 = embed_observable(
            &metrics,
            &[0],
            &Observable::linear(random_hermitian_matrix(2, 604)).unwrap(),
        )
        .unwrap();

        let s_good = Observable::CasimirPoly(CasimirPoly::new(vec![
            CasimirTerm {
                coefficient: 1.0,
                powers: [2, 0, 0, 0],
            },
            CasimirTerm {
                coefficient: 0.5,
                powers: [0, 1, 0, 0],
            },
        ]));
        let s_bad = Observable::CasimirPoly(CasimirPoly::new(vec![
            CasimirTerm {
                coefficient: 1.0 / 3.0,
                powers: [0, 0, 1, 0],
            },
            CasimirTerm {
                coefficient: 0.5,
                powers: [0, 1, 0, 0],
            },
        ]));

        let run = |h: &Observable, s: &Observable| -> Vec<C64> {
            let cfg = IntegratorConfig::new(Scheme::Rk4, 1e-2, 100, 10).unwrap();
            let traj = evolve(&kron, &full0, h, s, cfg).unwrap();
            traj.samples
                .iter()
                .map(|smp| evaluate(&f1, &kron, &smp.state).unwrap())
                .collect()
        };

        // S built from C₁, C₂ only: the particle-0 observable cannot see
        // the particle-2 Hamiltonian.
        let with_both = run(&h_both, &s_good);
        let with_one = run(&h1, &s_good);
        let max_dev = with_both
            .iter()
            .zip(&with_one)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(max_dev < 1e-8, "autonomy violated: {max_dev:.3e}");

        // A C₃-dependent generator couples the subsystems at the
        // trajectory level: the same comparison must now fail visibly.
        let with_both = run(&h_both, &s_bad);
        let with_one = run(&h1, &s_bad);
        let max_dev = with_both
            .iter()
            .zip(&with_one)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(
            max_dev > 1e-4,
            "C₃ generator unexpectedly left subsystems decoupled: {max_dev:.3e}"
        );
    }

    #[test]
    fn composite_bracket_wrappers_enforce_caps() {
        let metrics: Vec<Metric> = (0..5)
            .map(|j| Metric::euclidean(format!("q{j}"), 2).unwrap())
            .collect();
        let kron = kron_metric(&metrics).unwrap(); // 32 ≤ 64: fine
        let state = DensityState::random(kron.space().clone(), 610);
        let f = Observable::casimir(1).unwrap();
        let h = Observable::casimir(2).unwrap();
        let s = Observable::half_c2();
        assert!(matches!(
            lie_nambu_n(&metrics, &state, &f, &h, &s, BracketPath::Chain),
            Err(MultiError::DimensionTooLarge { dim: 32, cap: 16, .. })
        ));
        assert!(matches!(
            lie_nambu_n(&metrics, &state, &f, &h, &s, BracketPath::Oracle),
            Err(MultiError::DimensionTooLarge { dim: 32, cap: 8, .. })
        ));
        let too_many: Vec<Metric> = (0..7)
            .map(|j| Metric::euclidean(format!("r{j}"), 2).unwrap())
            .collect();
        assert!(matches!(
            kron_metric(&too_many),
            Err(MultiError::DimensionTooLarge { dim: 128, .. })
        ));
    }

    #[test]
    fn keep_list_validation() {
        let metrics = three_particles(620);
        let kron = kron_metric(&metrics).unwrap();
        let full = DensityState::random(kron.space().clone(), 621);
        assert!(matches!(
            reduce_state(&metrics, &[], &full),
            Err(MultiError::EmptyKeep)
        ));
        assert!(matches!(
            reduce_state(&metrics, &[0, 0], &full),
            Err(MultiError::KeepNotSorted { .. })
        ));
        assert!(matches!(
            reduce_state(&metrics, &[2, 1], &full),
            Err(MultiError::KeepNotSorted { .. })
        ));
        assert!(matches!(
            reduce_state(&metrics, &[3], &full),
            Err(MultiError::BadParticleIndex { index: 3, count: 3 })
        ));
    }

    #[test]
    fn composite_pair_metric_up_down_invert() {
        let metrics = vec![
            sample_metric("p0", 2, 630),
            sample_metric("p1", 2, 631),
        ];
        let pm = tensor_pair_metric(&metrics).unwrap();
        let prod = pm.composite_up().dot(&pm.composite_down());
        let diff = &prod - &linalg::identity(16);
        assert!(linalg::max_abs(&diff.to_owned()) < 1e-11);
        let three = three_particles(632);
        assert!(matches!(
            tensor_pair_metric(&[three[0].clone(), three[1].clone(), three[2].clone(),
                sample_metric("p3", 2, 633)]),
            Err(MultiError::DimensionTooLarge { dim: 16, cap: 8, .. })
        ));
    }

    #[test]
    fn casimir_n_multiplies_over_product_states() {
        // On a product state the composite P is ⊗P_j, so C_n factorizes
        // into the product of one-particle C_n.
        let metrics = three_particles(640);
        let states: Vec<DensityState> = (0..3)
            .map(|j| DensityState::random(metrics[j].space().clone(), 650 + j as u64))
            .collect();
        let full = product_state(&states).unwrap();
        for n in 1..=3usize {
            let full_cn = casimir_n(&metrics, &full, n).unwrap();
            let mut want = C64::new(1.0, 0.0);
            for j in 0..3 {
                want *= casimir(&metrics[j], &states[j], n).unwrap();
            }
            assert!(
                (full_cn - want).norm() < 1e-11 * want.norm().max(1.0),
                "C{n}: {full_cn} vs {want}"
            );
        }
    }
}
