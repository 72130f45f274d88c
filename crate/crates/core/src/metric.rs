//! Indefinite metrics on the one-particle index space, and everything built
//! from them: pair metrics on composite indices, rank-2n chain metrics,
//! structure constants, and the raise/lower maps.
//!
//! A [`Metric`] wraps a Hermitian, invertible matrix `G` together with its
//! inverse. Conventions used throughout the crate:
//!
//! * `g[α][α']` is stored as the matrix entry `G[(α, α')]` — rows are
//!   unprimed, columns primed.
//! * The inverse object with two upper indices has entries
//!   `up[α][α'] = Ginv[(α', α)]`, i.e. the transpose layout of `G⁻¹`;
//!   with this choice raising and lowering compose to the identity exactly.
//! * A composite (pair) index `a = (α, α')` flattens as `a = α·d + α'`.
//!
//! The tilde map `X ↦ G·Xᵀ` is the workhorse of the bracket module: it turns
//! index juggling into plain matrix algebra and makes total antisymmetry of
//! the triple bracket manifest.

use ndarray::Array2;
use thiserror::Error;

use crate::linalg::{self, LinalgError};
use crate::tensor::{IndexSpace, Slot, Tensor, TensorError};
use crate::C64;

/// Relative Hermiticity tolerance for accepted metric matrices.
pub const METRIC_HERMITICITY_TOL: f64 = 1e-10;
/// Condition-number ceiling; metrics at or above this are refused.
pub const METRIC_CONDITION_CAP: f64 = 1e8;
/// Largest one-particle dimension for which rank-6 structure constants are
/// materialized.
pub const STRUCTURE_CONSTANTS_DIM_CAP: usize = 8;
/// Largest chain length for rank-2n metrics.
pub const HIGHER_METRIC_MAX_CHAIN: usize = 4;

/// Errors from metric construction and metric-derived objects.
#[derive(Debug, Error)]
pub enum MetricError {
    #[error("metric matrix must be square, got {rows} x {cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error(
        "metric matrix is not Hermitian: residual {residual:.3e} exceeds {tol:.1e} \
         relative to the matrix scale"
    )]
    NotHermitian { residual: f64, tol: f64 },
    #[error("metric is numerically singular or ill-conditioned: cond = {cond:.3e} >= {cap:.1e}")]
    IllConditioned { cond: f64, cap: f64 },
    #[error("signature entries must be +1 or -1, got {value} at position {position}")]
    BadSignature { value: i32, position: usize },
    #[error("chain length n must lie in 1..={max}, got {n}")]
    BadChainLength { n: usize, max: usize },
    #[error(
        "structure constants for dimension {dim} would materialize {entries} complex \
         entries; the guard refuses dimensions above {cap}"
    )]
    StructureConstantsTooLarge { dim: usize, entries: usize, cap: usize },
    #[error("matrix shape {rows} x {cols} does not match the metric dimension {dim}")]
    ShapeMismatch { rows: usize, cols: usize, dim: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A Hermitian indefinite metric and its inverse over one index space.
#[derive(Debug, Clone)]
pub struct Metric {
    space: IndexSpace,
    g: Array2<C64>,
    ginv: Array2<C64>,
    cond: f64,
}

impl Metric {
    /// Validate and wrap a metric matrix. Rejects non-square, non-Hermitian
    /// (relative residual above [`METRIC_HERMITICITY_TOL`]) and
    /// ill-conditioned (condition number at or above
    /// [`METRIC_CONDITION_CAP`]) inputs.
    pub fn from_matrix(space: IndexSpace, g: Array2<C64>) -> Result<Self, MetricError> {
        if g.nrows() != g.ncols() {
            return Err(MetricError::NotSquare {
                rows: g.nrows(),
                cols: g.ncols(),
            });
        }
        if g.nrows() != space.dim() {
            return Err(MetricError::ShapeMismatch {
                rows: g.nrows(),
                cols: g.ncols(),
                dim: space.dim(),
            });
        }
        let scale = linalg::max_abs(&g).max(1.0);
        let residual = linalg::hermiticity_residual(&g) / scale;
        if residual > METRIC_HERMITICITY_TOL {
            return Err(MetricError::NotHermitian {
                residual,
                tol: METRIC_HERMITICITY_TOL,
            });
        }
        let cond = linalg::condition_number(&g)?;
        if !cond.is_finite() || cond >= METRIC_CONDITION_CAP {
            return Err(MetricError::IllConditioned {
                cond,
                cap: METRIC_CONDITION_CAP,
            });
        }
        let ginv = linalg::inverse(&g)?;
        // Defensive: the inverse must actually invert at working precision.
        let mut err = 0.0f64;
        let d = g.nrows();
        let prod = g.dot(&ginv);
        for i in 0..d {
            for j in 0..d {
                let want = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                err = err.max((prod[(i, j)] - want).norm());
            }
        }
        if err > 1e-10 * cond.max(1.0) {
            return Err(MetricError::IllConditioned {
                cond,
                cap: METRIC_CONDITION_CAP,
            });
        }
        Ok(Metric { space, g, ginv, cond })
    }

    /// Diagonal ±1 metric. The signature list fixes the dimension.
    pub fn from_signature(label: impl Into<String>, signs: &[i32]) -> Result<Self, MetricError> {
        for (k, &s) in signs.iter().enumerate() {
            if s != 1 && s != -1 {
                return Err(MetricError::BadSignature {
                    value: s,
                    position: k,
                });
            }
        }
        let space = IndexSpace::new(label, signs.len())?;
        let mut g = Array2::<C64>::zeros((signs.len(), signs.len()));
        for (k, &s) in signs.iter().enumerate() {
            g[(k, k)] = C64::new(s as f64, 0.0);
        }
        Metric::from_matrix(space, g)
    }

    /// Identity metric: the ordinary quantum-mechanical special case.
    pub fn euclidean(label: impl Into<String>, dim: usize) -> Result<Self, MetricError> {
        Metric::from_signature(label, &vec![1; dim])
    }

    pub fn space(&self) -> &IndexSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// The metric matrix `G` with `G[(α, α')] = g[α][α']`.
    pub fn g(&self) -> &Array2<C64> {
        &self.g
    }

    /// The plain matrix inverse `G⁻¹` (note: the two-upper-index object is
    /// its transpose; see [`Metric::up_tensor`]).
    pub fn ginv(&self) -> &Array2<C64> {
        &self.ginv
    }

    /// Condition number measured at construction.
    pub fn condition_number(&self) -> f64 {
        self.cond
    }

    /// The metric as a rank-2 tensor with two lower slots.
    pub fn down_tensor(&self) -> Tensor {
        Tensor::from_matrix(
            &self.g,
            Slot::lower(self.space.clone()),
            Slot::lower(self.space.clone()),
        )
        .expect("metric matrix fits its own space")
    }

    /// The inverse metric as a rank-2 tensor with two upper slots; entries
    /// are `Ginv` transposed so that raising then lowering is the identity.
    pub fn up_tensor(&self) -> Tensor {
        let up = self.ginv.t().to_owned();
        Tensor::from_matrix(
            &up,
            Slot::upper(self.space.clone()),
            Slot::upper(self.space.clone()),
        )
        .expect("metric matrix fits its own space")
    }

    /// Raise both members of a composite pair index: for a matrix `X`
    /// holding `X[(α, α')]` with both indices low, returns the matrix of
    /// `X` with both indices raised, `(G⁻¹ · X · G⁻¹)ᵀ`.
    pub fn raise_pair(&self, x: &Array2<C64>) -> Result<Array2<C64>, MetricError> {
        self.check_shape(x)?;
        Ok(self.ginv.dot(x).dot(&self.ginv).t().to_owned())
    }

    /// Lower both members of a composite pair index: exact inverse of
    /// [`Metric::raise_pair`], `G · Xᵀ · G`.
    pub fn lower_pair(&self, x: &Array2<C64>) -> Result<Array2<C64>, MetricError> {
        self.check_shape(x)?;
        Ok(self.g.dot(&x.t()).dot(&self.g))
    }

    /// The tilde map `X̃ = G · Xᵀ`, which converts a two-lower-index
    /// coordinate array into the operator that acts on raised states. All
    /// trace-form brackets are built from it.
    pub fn tilde(&self, x: &Array2<C64>) -> Result<Array2<C64>, MetricError> {
        self.check_shape(x)?;
        Ok(self.g.dot(&x.t()))
    }

    /// The raised state `P = R · G⁻¹`, the matrix of `ρ` with its second
    /// index raised; Casimir fast paths are traces of its powers.
    pub fn raised_state(&self, r: &Array2<C64>) -> Result<Array2<C64>, MetricError> {
        self.check_shape(r)?;
        Ok(r.dot(&self.ginv))
    }

    fn check_shape(&self, x: &Array2<C64>) -> Result<(), MetricError> {
        if x.nrows() != self.dim() || x.ncols() != self.dim() {
            return Err(MetricError::ShapeMismatch {
                rows: x.nrows(),
                cols: x.ncols(),
                dim: self.dim(),
            });
        }
        Ok(())
    }
}

/// The rank-4 metric on composite pair indices, in both variances, plus the
/// flattened matrix views used for sanity checks.
#[derive(Debug, Clone)]
pub struct PairMetric {
    /// Rank-4 tensor, all slots upper: `up[α, α', β, β'] = Gi[β'][α]·Gi[α'][β]`.
    pub up: Tensor,
    /// Rank-4 tensor, all slots lower: `down[α, α', β, β'] = G[α][β']·G[β][α']`.
    pub down: Tensor,
    dim: usize,
}

impl PairMetric {
    /// Flatten the up tensor to a `d² × d²` matrix over composite indices
    /// `a = α·d + α'`.
    pub fn composite_up(&self) -> Array2<C64> {
        flatten_rank4(&self.up, self.dim)
    }

    /// Flatten the down tensor to a `d² × d²` matrix over composite indices.
    pub fn composite_down(&self) -> Array2<C64> {
        flatten_rank4(&self.down, self.dim)
    }
}

fn flatten_rank4(t: &Tensor, d: usize) -> Array2<C64> {
    let mut m = Array2::<C64>::zeros((d * d, d * d));
    for a in 0..d {
        for ap in 0..d {
            for b in 0..d {
                for bp in 0..d {
                    m[(a * d + ap, b * d + bp)] = t.get(&[a, ap, b, bp]);
                }
            }
        }
    }
    m
}

/// Build the composite pair metric for `metric`. The up and down flattened
/// matrices are exact mutual inverses by construction; the acceptance suite
/// verifies the product numerically.
pub fn pair_metric(metric: &Metric) -> Result<PairMetric, MetricError> {
    let up = higher_metric(metric, 2, crate::tensor::Variance::Upper)?;
    let down = higher_metric(metric, 2, crate::tensor::Variance::Lower)?;
    Ok(PairMetric {
        up,
        down,
        dim: metric.dim(),
    })
}

/// The rank-2n chain metric with slot order `[α₁, α'₁, …, αₙ, α'ₙ]`.
///
/// * `Variance::Upper`: entries `Π_i Gi[α'_{i-1}][α_i]` with the cyclic
///   convention `α'₀ ≡ α'ₙ`; for `n = 1` this is the two-upper-index inverse
///   metric, for `n = 2` the pair metric.
/// * `Variance::Lower`: entries `Π_i G[α_i][α'_{i-1}]`, the exact flattened
///   inverse of the upper chain.
///
/// `n` is capped at [`HIGHER_METRIC_MAX_CHAIN`]; the dense size is further
/// limited by the tensor capacity guard.
pub fn higher_metric(
    metric: &Metric,
    n: usize,
    variance: crate::tensor::Variance,
) -> Result<Tensor, MetricError> {
    if n == 0 || n > HIGHER_METRIC_MAX_CHAIN {
        return Err(MetricError::BadChainLength {
            n,
            max: HIGHER_METRIC_MAX_CHAIN,
        });
    }
    let space = metric.space().clone();
    let slots: Vec<Slot> = (0..2 * n)
        .map(|_| Slot::new(space.clone(), variance))
        .collect();
    let g = metric.g().clone();
    let gi = metric.ginv().clone();
    let t = Tensor::from_fn(slots, |idx| {
        // idx = [α₁, α'₁, …, αₙ, α'ₙ]; link i uses α'_{i-1} with α'₀ ≡ α'ₙ.
        let mut acc = C64::new(1.0, 0.0);
        for i in 0..n {
            let alpha_i = idx[2 * i];
            let prev_primed = if i == 0 { idx[2 * n - 1] } else { idx[2 * i - 1] };
            acc *= match variance {
                crate::tensor::Variance::Upper => gi[(prev_primed, alpha_i)],
                crate::tensor::Variance::Lower => g[(alpha_i, prev_primed)],
            };
        }
        acc
    })?;
    Ok(t)
}

/// Structure constants of the metric's operator algebra in all three index
/// placements, materialized as rank-6 tensors over the one-particle space.
#[derive(Debug, Clone)]
pub struct StructureConstants {
    /// `Ω^a_{bc}`: first composite index up, the other two down. Slot order
    /// `[α, α', β, β', γ, γ']` with the first pair upper.
    pub mixed: Tensor,
    /// `Ω_{abc}`: all six slots lower; totally antisymmetric under composite
    /// index exchange.
    pub lowered: Tensor,
    /// `Ω^{abc}`: all six slots upper.
    pub raised: Tensor,
}

/// Materialize the structure constants for `metric`. Refused above
/// [`STRUCTURE_CONSTANTS_DIM_CAP`]; rank-6 storage grows as `d⁶`.
pub fn structure_constants(metric: &Metric) -> Result<StructureConstants, MetricError> {
    let d = metric.dim();
    if d > STRUCTURE_CONSTANTS_DIM_CAP {
        return Err(MetricError::StructureConstantsTooLarge {
            dim: d,
            entries: d.saturating_pow(6),
            cap: STRUCTURE_CONSTANTS_DIM_CAP,
        });
    }
    let space = metric.space().clone();
    let g = metric.g().clone();
    let gi = metric.ginv().clone();

    let mixed_slots = vec![
        Slot::upper(space.clone()),
        Slot::upper(space.clone()),
        Slot::lower(space.clone()),
        Slot::lower(space.clone()),
        Slot::lower(space.clone()),
        Slot::lower(space.clone()),
    ];
    let mixed = Tensor::from_fn(mixed_slots, |i| {
        let (a, ap, b, bp, c, cp) = (i[0], i[1], i[2], i[3], i[4], i[5]);
        let mut v = C64::new(0.0, 0.0);
        if a == b && ap == cp {
            v += g[(c, bp)];
        }
        if a == c && ap == bp {
            v -= g[(b, cp)];
        }
        v
    })?;

    let lowered_slots: Vec<Slot> = (0..6).map(|_| Slot::lower(space.clone())).collect();
    let lowered = Tensor::from_fn(lowered_slots, |i| {
        let (a, ap, b, bp, c, cp) = (i[0], i[1], i[2], i[3], i[4], i[5]);
        -g[(a, bp)] * g[(b, cp)] * g[(c, ap)] + g[(a, cp)] * g[(b, ap)] * g[(c, bp)]
    })?;

    let raised_slots: Vec<Slot> = (0..6).map(|_| Slot::upper(space.clone())).collect();
    let raised = Tensor::from_fn(raised_slots, |i| {
        let (a, ap, b, bp, c, cp) = (i[0], i[1], i[2], i[3], i[4], i[5]);
        gi[(bp, a)] * gi[(cp, b)] * gi[(ap, c)] - gi[(cp, a)] * gi[(ap, b)] * gi[(bp, c)]
    })?;

    Ok(StructureConstants {
        mixed,
        lowered,
        raised,
    })
}
