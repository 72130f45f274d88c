//! Labeled dense tensors: the universal value carrier for the engine.
//!
//! A [`Tensor`] is a dense, row-major array of complex doubles whose axes are
//! [`Slot`]s: an [`IndexSpace`] (a label plus a dimension) together with a
//! [`Variance`] (upper or lower). Contraction is purely structural — a pair
//! of slots may be summed only when the spaces agree and the variances are
//! opposite — which catches index-bookkeeping mistakes long before they turn
//! into silently wrong numbers.
//!
//! Contraction sums in a fixed left-to-right order over the contracted
//! multi-index, so repeated runs are bit-identical; the unit tests pin the
//! result against an independently written index-loop oracle.
//!
//! Shapes are desk-scale by contract: any constructor or contraction whose
//! dense size would exceed [`MAX_DENSE_ENTRIES`] is refused.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::C64;

/// Refuse dense tensors with more entries than this (64 MiB of complex
/// doubles); desk-scale work never needs more, and anything larger is a sign
/// that a fast path should be used instead of a materialized tensor.
pub const MAX_DENSE_ENTRIES: usize = 1 << 22;

/// Errors from tensor construction and structural operations.
#[derive(Debug, Error)]
pub enum TensorError {
    /// Index spaces must have at least one basis element.
    #[error("index space `{label}` must have dimension >= 1")]
    EmptySpace { label: String },
    /// The flat data buffer does not match the product of slot dimensions.
    #[error("data length {got} does not match the shape size {want}")]
    DataLength { got: usize, want: usize },
    /// A requested dense shape exceeds [`MAX_DENSE_ENTRIES`].
    #[error("dense tensor with {entries} entries exceeds the capacity guard of {cap}")]
    CapacityExceeded { entries: usize, cap: usize },
    /// A contraction pair referenced a slot outside the tensor's rank.
    #[error("contraction pair {pair}: slot {slot} is out of range for a rank-{rank} tensor")]
    SlotOutOfRange { pair: usize, slot: usize, rank: usize },
    /// The same slot appeared in two contraction pairs.
    #[error("slot {slot} of the {side} tensor appears in more than one contraction pair")]
    DuplicateSlot { slot: usize, side: &'static str },
    /// The paired slots live in different index spaces.
    #[error(
        "contraction pair {pair} joins space `{left_label}` (dim {left_dim}) with \
         space `{right_label}` (dim {right_dim}): index spaces differ"
    )]
    SpaceMismatch {
        pair: usize,
        left_label: String,
        left_dim: usize,
        right_label: String,
        right_dim: usize,
    },
    /// The paired slots have equal variance; contraction needs one upper and
    /// one lower slot.
    #[error("contraction pair {pair}: both slots are {variance:?}; contraction pairs one upper with one lower slot")]
    VarianceMismatch { pair: usize, variance: Variance },
    /// Adjoint is defined for rank-2 tensors over a single index space.
    #[error("adjoint requires a rank-2 tensor over one index space, got rank {rank}")]
    AdjointShape { rank: usize },
    /// Elementwise binary operations require identical slot lists.
    #[error("tensors have incompatible slot lists for an elementwise operation")]
    SlotListMismatch,
    /// Matrix conversion requires rank 2.
    #[error("matrix conversion requires a rank-2 tensor, got rank {rank}")]
    NotMatrix { rank: usize },
}

/// A named index space: a label and a dimension. Two spaces are the same
/// exactly when both agree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSpace {
    label: String,
    dim: usize,
}

impl IndexSpace {
    /// Create a new index space; `dim` must be at least 1.
    pub fn new(label: impl Into<String>, dim: usize) -> Result<Self, TensorError> {
        let label = label.into();
        if dim == 0 {
            return Err(TensorError::EmptySpace { label });
        }
        Ok(IndexSpace { label, dim })
    }

    /// The space's label.
    pub fn label(&self) -> &str {
        &self.label
    }

    /// The space's dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Index variance: upper (contravariant) or lower (covariant).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variance {
    Upper,
    Lower,
}

impl Variance {
    /// The opposite variance.
    pub fn flipped(self) -> Self {
        match self {
            Variance::Upper => Variance::Lower,
            Variance::Lower => Variance::Upper,
        }
    }
}

/// One tensor axis: an index space together with a variance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub space: IndexSpace,
    pub variance: Variance,
}

impl Slot {
    pub fn new(space: IndexSpace, variance: Variance) -> Self {
        Slot { space, variance }
    }

    pub fn upper(space: IndexSpace) -> Self {
        Slot::new(space, Variance::Upper)
    }

    pub fn lower(space: IndexSpace) -> Self {
        Slot::new(space, Variance::Lower)
    }
}

/// Dense, row-major labeled tensor over complex doubles.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    slots: Vec<Slot>,
    data: Vec<C64>,
}

fn shape_size(slots: &[Slot]) -> Result<usize, TensorError> {
    let mut size: usize = 1;
    for s in slots {
        size = size.saturating_mul(s.space.dim());
    }
    if size > MAX_DENSE_ENTRIES {
        return Err(TensorError::CapacityExceeded {
            entries: size,
            cap: MAX_DENSE_ENTRIES,
        });
    }
    Ok(size)
}

fn strides(slots: &[Slot]) -> Vec<usize> {
    let mut st = vec![1usize; slots.len()];
    for k in (0..slots.len().saturating_sub(1)).rev() {
        st[k] = st[k + 1] * slots[k + 1].space.dim();
    }
    st
}

impl Tensor {
    /// All-zero tensor with the given slots.
    pub fn zeros(slots: Vec<Slot>) -> Result<Self, TensorError> {
        let size = shape_size(&slots)?;
        Ok(Tensor {
            slots,
            data: vec![C64::new(0.0, 0.0); size],
        })
    }

    /// Tensor filled entry by entry from a multi-index function.
    pub fn from_fn(
        slots: Vec<Slot>,
        mut f: impl FnMut(&[usize]) -> C64,
    ) -> Result<Self, TensorError> {
        let size = shape_size(&slots)?;
        let dims: Vec<usize> = slots.iter().map(|s| s.space.dim()).collect();
        let mut data = Vec::with_capacity(size);
        let mut idx = vec![0usize; slots.len()];
        for flat in 0..size {
            unravel(flat, &dims, &mut idx);
            data.push(f(&idx));
        }
        Ok(Tensor { slots, data })
    }

    /// Tensor from a flat row-major buffer.
    pub fn from_data(slots: Vec<Slot>, data: Vec<C64>) -> Result<Self, TensorError> {
        let size = shape_size(&slots)?;
        if data.len() != size {
            return Err(TensorError::DataLength {
                got: data.len(),
                want: size,
            });
        }
        Ok(Tensor { slots, data })
    }

    /// Rank-2 tensor from a matrix; row index becomes slot 0.
    pub fn from_matrix(
        m: &Array2<C64>,
        row: Slot,
        col: Slot,
    ) -> Result<Self, TensorError> {
        let slots = vec![row, col];
        let size = shape_size(&slots)?;
        if m.nrows() != slots[0].space.dim() || m.ncols() != slots[1].space.dim() {
            return Err(TensorError::DataLength {
                got: m.len(),
                want: size,
            });
        }
        let data = m.iter().cloned().collect();
        Ok(Tensor { slots, data })
    }

    /// View a rank-2 tensor as a matrix (slot 0 rows, slot 1 columns).
    pub fn to_matrix(&self) -> Result<Array2<C64>, TensorError> {
        if self.rank() != 2 {
            return Err(TensorError::NotMatrix { rank: self.rank() });
        }
        let (r, c) = (self.slots[0].space.dim(), self.slots[1].space.dim());
        Ok(Array2::from_shape_vec((r, c), self.data.clone()).expect("shape checked"))
    }

    /// The slot list.
    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// Number of slots.
    pub fn rank(&self) -> usize {
        self.slots.len()
    }

    /// Dimensions, slot by slot.
    pub fn dims(&self) -> Vec<usize> {
        self.slots.iter().map(|s| s.space.dim()).collect()
    }

    /// Flat row-major data.
    pub fn data(&self) -> &[C64] {
        &self.data
    }

    /// Entry at a multi-index; panics on a wrong-length or out-of-range index.
    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.flat(idx)]
    }

    /// Overwrite the entry at a multi-index.
    pub fn set(&mut self, idx: &[usize], value: C64) {
        let k = self.flat(idx);
        self.data[k] = value;
    }

    fn flat(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.rank(), "multi-index rank mismatch");
        let st = strides(&self.slots);
        let mut flat = 0usize;
        for (k, &i) in idx.iter().enumerate() {
            assert!(i < self.slots[k].space.dim(), "index out of range");
            flat += i * st[k];
        }
        flat
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Entrywise scaling by a complex factor.
    pub fn scaled(&self, factor: C64) -> Tensor {
        Tensor {
            slots: self.slots.clone(),
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    /// Entrywise sum; slot lists must match exactly.
    pub fn add(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        if self.slots != other.slots {
            return Err(TensorError::SlotListMismatch);
        }
        Ok(Tensor {
            slots: self.slots.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// Conjugate transpose of a rank-2 tensor. The two slots swap positions,
    /// recording that the primed and unprimed roles have been exchanged.
    pub fn adjoint(&self) -> Result<Tensor, TensorError> {
        if self.rank() != 2 || self.slots[0].space != self.slots[1].space {
            return Err(TensorError::AdjointShape { rank: self.rank() });
        }
        let d = self.slots[0].space.dim();
        let mut data = vec![C64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for j in 0..d {
                data[i * d + j] = self.data[j * d + i].conj();
            }
        }
        Ok(Tensor {
            slots: vec![self.slots[1].clone(), self.slots[0].clone()],
            data,
        })
    }

    /// Structural contraction. Each `(left, right)` pair names a slot of
    /// `self` and a slot of `other`; the spaces must agree and the variances
    /// must be opposite. Remaining slots keep their order, `self`'s first.
    ///
    /// The contracted multi-index is summed in fixed row-major order (pair 0
    /// outermost), so results are bit-reproducible run to run.
    pub fn contract(
        &self,
        other: &Tensor,
        pairs: &[(usize, usize)],
    ) -> Result<Tensor, TensorError> {
        // --- validate ---
        for (p, &(l, r)) in pairs.iter().enumerate() {
            if l >= self.rank() {
                return Err(TensorError::SlotOutOfRange {
                    pair: p,
                    slot: l,
                    rank: self.rank(),
                });
            }
            if r >= other.rank() {
                return Err(TensorError::SlotOutOfRange {
                    pair: p,
                    slot: r,
                    rank: other.rank(),
                });
            }
            let (sl, sr) = (&self.slots[l], &other.slots[r]);
            if sl.space != sr.space {
                return Err(TensorError::SpaceMismatch {
                    pair: p,
                    left_label: sl.space.label().to_string(),
                    left_dim: sl.space.dim(),
                    right_label: sr.space.label().to_string(),
                    right_dim: sr.space.dim(),
                });
            }
            if sl.variance == sr.variance {
                return Err(TensorError::VarianceMismatch {
                    pair: p,
                    variance: sl.variance,
                });
            }
        }
        for (p, &(l, _)) in pairs.iter().enumerate() {
            if pairs[..p].iter().any(|&(l2, _)| l2 == l) {
                return Err(TensorError::DuplicateSlot {
                    slot: l,
                    side: "left",
                });
            }
        }
        for (p, &(_, r)) in pairs.iter().enumerate() {
            if pairs[..p].iter().any(|&(_, r2)| r2 == r) {
                return Err(TensorError::DuplicateSlot {
                    slot: r,
                    side: "right",
                });
            }
        }

        // --- shape bookkeeping ---
        let left_keep: Vec<usize> = (0..self.rank())
            .filter(|k| !pairs.iter().any(|&(l, _)| l == *k))
            .collect();
        let right_keep: Vec<usize> = (0..other.rank())
            .filter(|k| !pairs.iter().any(|&(_, r)| r == *k))
            .collect();
        let mut out_slots: Vec<Slot> = left_keep.iter().map(|&k| self.slots[k].clone()).collect();
        out_slots.extend(right_keep.iter().map(|&k| other.slots[k].clone()));
        let out_size = shape_size(&out_slots)?;

        let sum_dims: Vec<usize> = pairs
            .iter()
            .map(|&(l, _)| self.slots[l].space.dim())
            .collect();
        let sum_size: usize = sum_dims.iter().product();

        let lst = strides(&self.slots);
        let rst = strides(&other.slots);
        let out_dims: Vec<usize> = out_slots.iter().map(|s| s.space.dim()).collect();

        // Base offsets contributed by the kept slots.
        let mut out_idx = vec![0usize; out_slots.len()];
        let mut sum_idx = vec![0usize; pairs.len()];
        let mut data = Vec::with_capacity(out_size);
        for flat in 0..out_size {
            unravel(flat, &out_dims, &mut out_idx);
            let mut lbase = 0usize;
            let mut rbase = 0usize;
            for (pos, &k) in left_keep.iter().enumerate() {
                lbase += out_idx[pos] * lst[k];
            }
            for (pos, &k) in right_keep.iter().enumerate() {
                rbase += out_idx[left_keep.len() + pos] * rst[k];
            }
            let mut acc = C64::new(0.0, 0.0);
            for sflat in 0..sum_size {
                unravel(sflat, &sum_dims, &mut sum_idx);
                let mut loff = lbase;
                let mut roff = rbase;
                for (p, &(l, r)) in pairs.iter().enumerate() {
                    loff += sum_idx[p] * lst[l];
                    roff += sum_idx[p] * rst[r];
                }
                acc += self.data[loff] * other.data[roff];
            }
            data.push(acc);
        }
        Ok(Tensor {
            slots: out_slots,
            data,
        })
    }
}

fn unravel(mut flat: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = flat % dims[k];
        flat /= dims[k];
    }
}

/// Deterministic random Hermitian matrix over `space`, entries bounded by 1
/// in modulus. All randomness flows through a ChaCha8 stream seeded by
/// `seed`, so results are identical across runs and platforms.
pub fn random_hermitian(space: &IndexSpace, seed: u64) -> Tensor {
    let m = random_hermitian_matrix(space.dim(), seed);
    Tensor::from_matrix(
        &m,
        Slot::lower(space.clone()),
        Slot::lower(space.clone()),
    )
    .expect("square matrix always fits its slots")
}

/// Matrix-valued twin of [`random_hermitian`] for callers that want a plain
/// `Array2`.
pub fn random_hermitian_matrix(dim: usize, seed: u64) -> Array2<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let mut a = Array2::<C64>::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            let re: f64 = rng.gen_range(-half..half);
            let im: f64 = rng.gen_range(-half..half);
            a[(i, j)] = C64::new(re, im);
        }
    }
    let mut h = Array2::<C64>::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            h[(i, j)] = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
        }
    }
    h
}
