//! The 1+1-dimensional lattice Dirac sector.
//!
//! A bispinor field with four components per site lives on a periodic
//! `nt × nz` lattice. Component order within a site follows the packed
//! bispinor index of [`pack_index`]: the two Latin components first, the
//! two primed components after them. Sites are indexed `site = t·nz + z`
//! and the global index is `site·4 + α` (site-major).
//!
//! The first-order evolution generator is
//!
//! ```text
//! 𝒟 = Δ₊ ⊗ M₊ + Δ₋ ⊗ M₋,      Δ± = Δt ± Δz,
//! ```
//!
//! where `Δt`, `Δz` are periodic central differences (real, antisymmetric)
//! and `M₊`, `M₋` are the constant 4×4 spinor mixers (entries `(3,2)=+1`,
//! `(1,4)=−1` and `(2,3)=+1`, `(4,1)=−1` in 1-based notation). The
//! pure-state equation of motion is simply `∂ₛψ = 𝒟ψ`.
//!
//! The same dynamics embeds in the density-matrix engine: with the site
//! metric `g₄ = antidiag(−1, 1, 1, −1)` (real, symmetric, `g₄² = I`,
//! signature `(2,2)`) extended by `G = I ⊗ g₄`, the coefficient array
//! `h = −i·𝒟ᵀ·G` is exactly Hermitian, and its tilde is `H̃ = −i𝒟`, so the
//! linear bracket flow of `ρ = ψψ†` reproduces the pure-state evolution.
//! The metric choice is what makes `h` Hermitian: an ordinary Euclidean
//! metric does not (a test pins this).
//!
//! On plane waves `ψ[t,z] = e^{i(2πk_t t/nt + 2πk_z z/nz)} u` the generator
//! acts through the 4×4 symbol `i(w₊M₊ + w₋M₋)` with frequencies
//! `w_{t,z} = sin(2πk/n)/spacing`; its square is `−(w_t² − w_z²)·I`, so
//! eigenmodes of `H̃` come in `±√(w_t² − w_z²)` pairs — real for
//! `|w_t| ≥ |w_z|` (these keep a frozen modulus pattern under evolution),
//! imaginary for off-shell modes.
//!
//! Note the degenerate corner: on a periodic two-point axis the central
//! difference cancels exactly, so the `2 × 2` lattice has `𝒟 ≡ 0` and a
//! vanishing Hamiltonian — dynamically trivial but still a valid system.

use ndarray::Array2;
use thiserror::Error;

use crate::dynamics::{DynamicsError, IntegratorConfig, DIVERGENCE_CAP};
use crate::linalg;
use crate::metric::{Metric, MetricError};
use crate::observable::{Observable, ObservableError};
use crate::tensor::IndexSpace;
use crate::C64;

/// Components of a bispinor at one site.
pub const SPINOR_DIM: usize = 4;
/// Largest global dimension (`4·nt·nz`) for pure-state evolution.
pub const PURE_STATE_DIM_CAP: usize = 4096;
/// Largest global dimension for materializing dense lattice operators
/// (`𝒟`, the lattice metric, the Hamiltonian coefficient array).
pub const DENSE_LATTICE_DIM_CAP: usize = 1024;

/// Errors from the lattice Dirac sector.
#[derive(Debug, Error)]
pub enum DiracError {
    #[error("lattice must be at least 2 x 2, got {nt} x {nz}")]
    BadLattice { nt: usize, nz: usize },
    #[error("lattice spacing must be positive and finite, got {spacing}")]
    BadSpacing { spacing: f64 },
    #[error("lattice dimension {dim} exceeds the {what} cap of {cap}")]
    DimensionTooLarge {
        dim: usize,
        cap: usize,
        what: &'static str,
    },
    #[error("state vector has {got} amplitudes but the lattice needs {want}")]
    PsiLength { got: usize, want: usize },
    #[error(
        "pure state diverged at step {step} (s = {s:.6}): max |amplitude| = \
         {max_abs:.3e} exceeds the cap of {cap:.1e}"
    )]
    Diverged {
        step: usize,
        s: f64,
        max_abs: f64,
        cap: f64,
    },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// A periodic 1+1 lattice: `nt` temporal sites, `nz` spatial sites, one
/// common spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    pub nt: usize,
    pub nz: usize,
    pub spacing: f64,
}

impl LatticeSpec {
    pub fn new(nt: usize, nz: usize, spacing: f64) -> Result<Self, DiracError> {
        if nt < 2 || nz < 2 {
            return Err(DiracError::BadLattice { nt, nz });
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(DiracError::BadSpacing { spacing });
        }
        Ok(LatticeSpec { nt, nz, spacing })
    }

    /// Number of lattice sites.
    pub fn sites(&self) -> usize {
        self.nt * self.nz
    }

    /// Global state dimension `4·nt·nz`.
    pub fn dim(&self) -> usize {
        SPINOR_DIM * self.sites()
    }

    /// Global index of component `alpha` at site `(t, z)`.
    pub fn global_index(&self, t: usize, z: usize, alpha: usize) -> usize {
        (t * self.nz + z) * SPINOR_DIM + alpha
    }

    /// Whether both periodic central differences vanish identically
    /// (`nt == nz == 2`), making the generator zero.
    pub fn is_degenerate(&self) -> bool {
        self.nt == 2 && self.nz == 2
    }

    fn check_dense(&self, what: &'static str) -> Result<(), DiracError> {
        if self.dim() > DENSE_LATTICE_DIM_CAP {
            return Err(DiracError::DimensionTooLarge {
                dim: self.dim(),
                cap: DENSE_LATTICE_DIM_CAP,
                what,
            });
        }
        Ok(())
    }
}

/// Pack a bispinor index: Latin components `0, 1` map to `0, 1`; primed
/// components `0', 1'` map to `2, 3`.
pub fn pack_index(latin: usize, primed: bool) -> usize {
    debug_assert!(latin < 2, "bispinor halves are two-dimensional");
    if primed {
        2 + latin
    } else {
        latin
    }
}

/// Inverse of [`pack_index`].
pub fn unpack_index(alpha: usize) -> (usize, bool) {
    debug_assert!(alpha < SPINOR_DIM);
    (alpha % 2, alpha >= 2)
}

/// The constant index-juggling blocks of the bispinor formalism, written as
/// 4×4 arrays over the packed index (Latin half first, primed half second).
/// Rows carry the first index of each symbol, columns the second.
#[derive(Debug, Clone)]
pub struct BispinorBlocks {
    /// `ε_α^{β'}`: exchanges the Latin and primed halves, `[[0, I], [I, 0]]`.
    pub eps: Array2<f64>,
    /// `g_α^{β'} = [[0, −I], [I, 0]]`.
    pub g_low_primed: Array2<f64>,
    /// `g_{α'}^β = [[0, I], [−I, 0]]`, the inverse of `g_α^{β'}`.
    pub g_primed_low: Array2<f64>,
    /// `g_α^β = diag(−1, −1, 1, 1)`.
    pub g_latin: Array2<f64>,
    /// `g_{α'}^{β'} = diag(1, 1, −1, −1)`.
    pub g_primed: Array2<f64>,
}

/// Build the constant bispinor blocks.
pub fn bispinor_blocks() -> BispinorBlocks {
    let mut eps = Array2::<f64>::zeros((4, 4));
    for k in 0..2 {
        eps[(k, 2 + k)] = 1.0;
        eps[(2 + k, k)] = 1.0;
    }
    let mut g_low_primed = Array2::<f64>::zeros((4, 4));
    for k in 0..2 {
        g_low_primed[(k, 2 + k)] = -1.0;
        g_low_primed[(2 + k, k)] = 1.0;
    }
    let mut g_primed_low = Array2::<f64>::zeros((4, 4));
    for k in 0..2 {
        g_primed_low[(k, 2 + k)] = 1.0;
        g_primed_low[(2 + k, k)] = -1.0;
    }
    let mut g_latin = Array2::<f64>::zeros((4, 4));
    let mut g_primed = Array2::<f64>::zeros((4, 4));
    for k in 0..2 {
        g_latin[(k, k)] = -1.0;
        g_latin[(2 + k, 2 + k)] = 1.0;
        g_primed[(k, k)] = 1.0;
        g_primed[(2 + k, 2 + k)] = -1.0;
    }
    BispinorBlocks {
        eps,
        g_low_primed,
        g_primed_low,
        g_latin,
        g_primed,
    }
}

/// The 4×4 site metric `g₄ = antidiag(−1, 1, 1, −1)` as a validated
/// [`Metric`] over the index space `spinor`. Real, symmetric, involutive
/// (`g₄² = I`), signature `(2, 2)`.
pub fn dirac_metric() -> Metric {
    let mut g = Array2::<C64>::zeros((4, 4));
    g[(0, 3)] = C64::new(-1.0, 0.0);
    g[(1, 2)] = C64::new(1.0, 0.0);
    g[(2, 1)] = C64::new(1.0, 0.0);
    g[(3, 0)] = C64::new(-1.0, 0.0);
    let space = IndexSpace::new("spinor", 4).expect("static dimension");
    Metric::from_matrix(space, g).expect("g4 is Hermitian and involutive")
}

/// The lattice metric `G = I_sites ⊗ g₄` over the space
/// `dirac{nt}x{nz}`.
pub fn lattice_metric(spec: &LatticeSpec) -> Result<Metric, DiracError> {
    spec.check_dense("lattice metric")?;
    let g4 = dirac_metric();
    let g = linalg::kron(&linalg::identity(spec.sites()), g4.g());
    let space = IndexSpace::new(format!("dirac{}x{}", spec.nt, spec.nz), spec.dim())
        .expect("dimension is positive");
    Ok(Metric::from_matrix(space, g)?)
}

/// Periodic central difference on `n` points: antisymmetric, real, entries
/// `±1/(2·spacing)` on the cyclic neighbors. Identically zero for `n = 2`.
fn central_difference(n: usize, spacing: f64) -> Array2<C64> {
    let mut d = Array2::<C64>::zeros((n, n));
    let w = 1.0 / (2.0 * spacing);
    for i in 0..n {
        d[(i, (i + 1) % n)] += C64::new(w, 0.0);
        d[(i, (i + n - 1) % n)] -= C64::new(w, 0.0);
    }
    d
}

/// The spinor mixers `M₊` (entries `(3,2)=+1`, `(1,4)=−1`, 1-based) and
/// `M₋` (entries `(2,3)=+1`, `(4,1)=−1`).
fn spinor_mixers() -> (Array2<C64>, Array2<C64>) {
    let mut m_plus = Array2::<C64>::zeros((4, 4));
    m_plus[(2, 1)] = C64::new(1.0, 0.0);
    m_plus[(0, 3)] = C64::new(-1.0, 0.0);
    let mut m_minus = Array2::<C64>::zeros((4, 4));
    m_minus[(1, 2)] = C64::new(1.0, 0.0);
    m_minus[(3, 0)] = C64::new(-1.0, 0.0);
    (m_plus, m_minus)
}

/// The dense evolution generator `𝒟 = Δ₊ ⊗ M₊ + Δ₋ ⊗ M₋` (site-major,
/// matching [`LatticeSpec::global_index`]).
pub fn spinor_derivative(spec: &LatticeSpec) -> Result<Array2<C64>, DiracError> {
    spec.check_dense("spinor derivative")?;
    let dt = central_difference(spec.nt, spec.spacing);
    let dz = central_difference(spec.nz, spec.spacing);
    let dt_sites = linalg::kron(&dt, &linalg::identity(spec.nz));
    let dz_sites = linalg::kron(&linalg::identity(spec.nt), &dz);
    let d_plus = &dt_sites + &dz_sites;
    let d_minus = &dt_sites - &dz_sites;
    let (m_plus, m_minus) = spinor_mixers();
    Ok(linalg::kron(&d_plus, &m_plus) + linalg::kron(&d_minus, &m_minus))
}

/// Apply the generator `𝒟` to a state vector without materializing it:
/// periodic central differences along both axes followed by the constant
/// spinor mixing. Works up to [`PURE_STATE_DIM_CAP`].
pub fn apply_generator(spec: &LatticeSpec, psi: &[C64]) -> Result<Vec<C64>, DiracError> {
    if psi.len() != spec.dim() {
        return Err(DiracError::PsiLength {
            got: psi.len(),
            want: spec.dim(),
        });
    }
    let (nt, nz) = (spec.nt, spec.nz);
    let w = 1.0 / (2.0 * spec.spacing);
    let mut out = vec![C64::new(0.0, 0.0); psi.len()];
    for t in 0..nt {
        let tp = (t + 1) % nt;
        let tm = (t + nt - 1) % nt;
        for z in 0..nz {
            let zp = (z + 1) % nz;
            let zm = (z + nz - 1) % nz;
            for alpha in 0..SPINOR_DIM {
                // Central differences of component alpha at (t, z).
                let ddt = (psi[spec.global_index(tp, z, alpha)]
                    - psi[spec.global_index(tm, z, alpha)])
                    * w;
                let ddz = (psi[spec.global_index(t, zp, alpha)]
                    - psi[spec.global_index(t, zm, alpha)])
                    * w;
                let plus = ddt + ddz;
                let minus = ddt - ddz;
                // M₊ routes (Δ₊ψ): out[2] += in[1], out[0] -= in[3];
                // M₋ routes (Δ₋ψ): out[1] += in[2], out[3] -= in[0].
                match alpha {
                    1 => out[spec.global_index(t, z, 2)] += plus,
                    3 => out[spec.global_index(t, z, 0)] -= plus,
                    _ => {}
                }
                match alpha {
                    2 => out[spec.global_index(t, z, 1)] += minus,
                    0 => out[spec.global_index(t, z, 3)] -= minus,
                    _ => {}
                }
            }
        }
    }
    Ok(out)
}

/// The Hermitian coefficient array `h = −i·𝒟ᵀ·G` of the lattice
/// Hamiltonian observable `H(ρ) = Σ h∘ρ`. Its tilde is `H̃ = −i𝒟`.
pub fn dirac_hamiltonian(spec: &LatticeSpec) -> Result<Array2<C64>, DiracError> {
    let d = spinor_derivative(spec)?;
    let metric = lattice_metric(spec)?;
    let h = d.t().dot(metric.g()).mapv(|z| z * C64::new(0.0, -1.0));
    Ok(h)
}

/// The full density-matrix description of a lattice: the lattice metric and
/// the Hamiltonian as a validated linear observable.
pub fn dirac_system(spec: &LatticeSpec) -> Result<(Metric, Observable), DiracError> {
    let metric = lattice_metric(spec)?;
    let h = dirac_hamiltonian(spec)?;
    Ok((metric, Observable::linear(h)?))
}

/// The conserved sesquilinear form `Q = ψ†·G⁻¹·ψ = ψ†·G·ψ` (the lattice
/// metric is an involution). Real for every ψ; conserved along `∂ₛψ = 𝒟ψ`.
pub fn charge_form(spec: &LatticeSpec, psi: &[C64]) -> Result<f64, DiracError> {
    if psi.len() != spec.dim() {
        return Err(DiracError::PsiLength {
            got: psi.len(),
            want: spec.dim(),
        });
    }
    // Per site: ψ†g₄ψ with g₄ = antidiag(−1,1,1,−1).
    let mut q = C64::new(0.0, 0.0);
    for site in 0..spec.sites() {
        let b = site * SPINOR_DIM;
        q += psi[b].conj() * psi[b + 3] * -1.0;
        q += psi[b + 1].conj() * psi[b + 2];
        q += psi[b + 2].conj() * psi[b + 1];
        q += psi[b + 3].conj() * psi[b] * -1.0;
    }
    Ok(q.re)
}

/// One recorded point of a pure-state trajectory.
#[derive(Debug, Clone)]
pub struct PureSample {
    pub index: usize,
    pub s: f64,
    pub psi: Vec<C64>,
    /// The conserved form `ψ†·G⁻¹·ψ`.
    pub q: f64,
}

/// A recorded pure-state trajectory.
#[derive(Debug, Clone)]
pub struct PureTrajectory {
    pub config: IntegratorConfig,
    pub samples: Vec<PureSample>,
}

impl PureTrajectory {
    pub fn last(&self) -> &PureSample {
        self.samples.last().expect("trajectories are non-empty")
    }
}

/// Integrate the pure-state equation `∂ₛψ = 𝒟ψ` with the scheme in
/// `config`, matrix-free. Dimension capped at [`PURE_STATE_DIM_CAP`].
pub fn pure_state_evolve(
    spec: &LatticeSpec,
    psi0: &[C64],
    config: IntegratorConfig,
) -> Result<PureTrajectory, DiracError> {
    if spec.dim() > PURE_STATE_DIM_CAP {
        return Err(DiracError::DimensionTooLarge {
            dim: spec.dim(),
            cap: PURE_STATE_DIM_CAP,
            what: "pure-state evolution",
        });
    }
    if psi0.len() != spec.dim() {
        return Err(DiracError::PsiLength {
            got: psi0.len(),
            want: spec.dim(),
        });
    }

    let ds = config.step;
    let axpy = |y: &[C64], a: f64, x: &[C64]| -> Vec<C64> {
        y.iter().zip(x).map(|(u, v)| u + v * a).collect()
    };
    let mut psi: Vec<C64> = psi0.to_vec();
    let mut samples = Vec::new();
    samples.push(PureSample {
        index: 0,
        s: 0.0,
        psi: psi.clone(),
        q: charge_form(spec, &psi)?,
    });

    for k in 1..=config.steps {
        psi = match config.scheme {
            crate::dynamics::Scheme::Rk4 => {
                let k1 = apply_generator(spec, &psi)?;
                let k2 = apply_generator(spec, &axpy(&psi, 0.5 * ds, &k1))?;
                let k3 = apply_generator(spec, &axpy(&psi, 0.5 * ds, &k2))?;
                let k4 = apply_generator(spec, &axpy(&psi, ds, &k3))?;
                psi.iter()
                    .enumerate()
                    .map(|(i, v)| {
                        v + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (ds / 6.0)
                    })
                    .collect()
            }
            crate::dynamics::Scheme::Midpoint => {
                let k1 = apply_generator(spec, &psi)?;
                let k2 = apply_generator(spec, &axpy(&psi, 0.5 * ds, &k1))?;
                axpy(&psi, ds, &k2)
            }
        };
        let max_abs = psi.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !max_abs.is_finite() || max_abs > DIVERGENCE_CAP {
            return Err(DiracError::Diverged {
                step: k,
                s: k as f64 * ds,
                max_abs,
                cap: DIVERGENCE_CAP,
            });
        }
        if k % config.sample_every == 0 || k == config.steps {
            samples.push(PureSample {
                index: k,
                s: k as f64 * ds,
                psi: psi.clone(),
                q: charge_form(spec, &psi)?,
            });
        }
    }

    Ok(PureTrajectory { config, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve, Scheme};
    use crate::observable::DensityState;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_psi(dim: usize, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..dim)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn bispinor_blocks_satisfy_their_algebra() {
        let b = bispinor_blocks();
        // Pinned entries.
        let want_eps = [
            [0., 0., 1., 0.],
            [0., 0., 0., 1.],
            [1., 0., 0., 0.],
            [0., 1., 0., 0.],
        ];
        let want_glp = [
            [0., 0., -1., 0.],
            [0., 0., 0., -1.],
            [1., 0., 0., 0.],
            [0., 1., 0., 0.],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(b.eps[(i, j)], want_eps[i][j]);
                assert_eq!(b.g_low_primed[(i, j)], want_glp[i][j]);
                assert_eq!(b.g_primed_low[(i, j)], -want_glp[i][j]);
            }
        }
        // ε is an involution; the mixed metrics invert each other; the two
        // diagonal blocks multiply to −I.
        let prod = b.g_low_primed.dot(&b.g_primed_low);
        let eps2 = b.eps.dot(&b.eps);
        let diag = b.g_latin.dot(&b.g_primed);
        for i in 0..4 {
            for j in 0..4 {
                let id = if i == j { 1.0 } else { 0.0 };
                assert_eq!(prod[(i, j)], id);
                assert_eq!(eps2[(i, j)], id);
                assert_eq!(diag[(i, j)], -id);
            }
        }
    }

    #[test]
    fn pack_unpack_roundtrip() {
        assert_eq!(pack_index(0, false), 0);
        assert_eq!(pack_index(1, false), 1);
        assert_eq!(pack_index(0, true), 2);
        assert_eq!(pack_index(1, true), 3);
        for alpha in 0..4 {
            let (latin, primed) = unpack_index(alpha);
            assert_eq!(pack_index(latin, primed), alpha);
        }
    }

    #[test]
    fn dirac_metric_is_an_involution_with_split_signature() {
        let m = dirac_metric();
        assert!((m.condition_number() - 1.0).abs() < 1e-12);
        let g2 = m.g().dot(m.g());
        let diff = &g2 - &linalg::identity(4);
        assert!(linalg::max_abs(&diff.to_owned()) < 1e-15);
        // Signature (2, 2): eigenvalues are ±1, two of each.
        let evs = linalg::eigenvalues_sorted(m.g()).unwrap();
        let signs: Vec<i32> = evs.iter().map(|v| v.re.signum() as i32).collect();
        assert_eq!(signs, vec![-1, -1, 1, 1]);
        // Block form [[0, −ε₂], [ε₂, 0]] with ε₂ = [[0, 1], [−1, 0]].
        assert_eq!(m.g()[(0, 3)], C64::new(-1.0, 0.0));
        assert_eq!(m.g()[(1, 2)], C64::new(1.0, 0.0));
        assert_eq!(m.g()[(2, 1)], C64::new(1.0, 0.0));
        assert_eq!(m.g()[(3, 0)], C64::new(-1.0, 0.0));
    }

    #[test]
    fn two_by_two_lattice_is_degenerate() {
        let spec = LatticeSpec::new(2, 2, 1.0).unwrap();
        assert!(spec.is_degenerate());
        let d = spinor_derivative(&spec).unwrap();
        assert_eq!(linalg::max_abs(&d), 0.0);
        let h = dirac_hamiltonian(&spec).unwrap();
        assert_eq!(linalg::max_abs(&h), 0.0);
    }

    #[test]
    fn hamiltonian_is_hermitian_and_real_valued() {
        for (nt, nz) in [(3, 2), (3, 3), (4, 4)] {
            let spec = LatticeSpec::new(nt, nz, 0.7).unwrap();
            let h = dirac_hamiltonian(&spec).unwrap();
            assert!(
                linalg::hermiticity_residual(&h) < 1e-14 * linalg::max_abs(&h).max(1.0),
                "{nt}x{nz}"
            );
            assert!(linalg::max_abs(&h) > 0.0, "{nt}x{nz} must be nontrivial");
            // Real expectation on a random Hermitian state.
            let rho = crate::tensor::random_hermitian_matrix(spec.dim(), 700);
            let mut val = C64::new(0.0, 0.0);
            for a in 0..spec.dim() {
                for ap in 0..spec.dim() {
                    val += h[(a, ap)] * rho[(a, ap)];
                }
            }
            assert!(val.im.abs() < 1e-12 * val.norm().max(1.0));
        }
    }

    #[test]
    fn euclidean_metric_would_not_make_h_hermitian() {
        // Negative control: the indefinite site metric is load-bearing.
        // Both axes need a nonvanishing difference (nz = 2 would make 𝒟
        // antisymmetric, and −i𝒟ᵀ accidentally Hermitian).
        let spec = LatticeSpec::new(3, 3, 1.0).unwrap();
        let d = spinor_derivative(&spec).unwrap();
        let h_wrong = d.t().to_owned().mapv(|z| z * C64::new(0.0, -1.0));
        assert!(
            linalg::hermiticity_residual(&h_wrong)
                > 1e-2 * linalg::max_abs(&h_wrong).max(1e-30)
        );
    }

    #[test]
    fn stencil_matches_dense_generator() {
        for (nt, nz) in [(3, 2), (4, 3)] {
            let spec = LatticeSpec::new(nt, nz, 0.9).unwrap();
            let d = spinor_derivative(&spec).unwrap();
            let psi = random_psi(spec.dim(), 710);
            let fast = apply_generator(&spec, &psi).unwrap();
            for g in 0..spec.dim() {
                let mut want = C64::new(0.0, 0.0);
                for gp in 0..spec.dim() {
                    want += d[(g, gp)] * psi[gp];
                }
                assert!((fast[g] - want).norm() < 1e-13, "{nt}x{nz} index {g}");
            }
        }
    }

    #[test]
    fn plane_waves_diagonalize_the_generator_blockwise() {
        // ψ[t,z] = e^{i(2πk_t t/nt + 2πk_z z/nz)}·u turns 𝒟 into the 4×4
        // symbol i(w₊M₊ + w₋M₋); also (w₊M₊ + w₋M₋)² = (w_t² − w_z²)·I.
        let spec = LatticeSpec::new(5, 4, 0.8).unwrap();
        let (kt, kz) = (2usize, 1usize);
        let wt = (2.0 * std::f64::consts::PI * kt as f64 / spec.nt as f64).sin() / spec.spacing;
        let wz = (2.0 * std::f64::consts::PI * kz as f64 / spec.nz as f64).sin() / spec.spacing;
        let u = [
            C64::new(0.3, -0.2),
            C64::new(-0.8, 0.5),
            C64::new(0.1, 0.9),
            C64::new(0.4, 0.4),
        ];
        let mut psi = vec![C64::new(0.0, 0.0); spec.dim()];
        for t in 0..spec.nt {
            for z in 0..spec.nz {
                let phase = C64::from_polar(
                    1.0,
                    2.0 * std::f64::consts::PI
                        * (kt as f64 * t as f64 / spec.nt as f64
                            + kz as f64 * z as f64 / spec.nz as f64),
                );
                for alpha in 0..4 {
                    psi[spec.global_index(t, z, alpha)] = phase * u[alpha];
                }
            }
        }
        let out = apply_generator(&spec, &psi).unwrap();
        let (m_plus, m_minus) = spinor_mixers();
        let symbol = m_plus.mapv(|z| z * C64::new(0.0, wt + wz))
            + m_minus.mapv(|z| z * C64::new(0.0, wt - wz));
        for t in 0..spec.nt {
            for z in 0..spec.nz {
                let phase = C64::from_polar(
                    1.0,
                    2.0 * std::f64::consts::PI
                        * (kt as f64 * t as f64 / spec.nt as f64
                            + kz as f64 * z as f64 / spec.nz as f64),
                );
                for alpha in 0..4 {
                    let mut want = C64::new(0.0, 0.0);
                    for beta in 0..4 {
                        want += symbol[(alpha, beta)] * u[beta];
                    }
                    want *= phase;
                    let got = out[spec.global_index(t, z, alpha)];
                    assert!((got - want).norm() < 1e-12, "site ({t},{z}) α={alpha}");
                }
            }
        }
        // Squared symbol over i² = −1: (w₊M₊ + w₋M₋)² = (w_t²−w_z²)·I.
        let real_symbol = m_plus.mapv(|z| z * (wt + wz)) + m_minus.mapv(|z| z * (wt - wz));
        let sq = real_symbol.dot(&real_symbol);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { wt * wt - wz * wz } else { 0.0 };
                assert!((sq[(i, j)] - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn pure_and_density_formalisms_agree() {
        let spec = LatticeSpec::new(3, 2, 1.0).unwrap();
        let psi0 = random_psi(spec.dim(), 720);
        let cfg = IntegratorConfig::new(Scheme::Rk4, 1e-3, 500, 250).unwrap();
        let pure = pure_state_evolve(&spec, &psi0, cfg).unwrap();

        let (metric, hamiltonian) = dirac_system(&spec).unwrap();
        let mut r0 = Array2::<C64>::zeros((spec.dim(), spec.dim()));
        for a in 0..spec.dim() {
            for ap in 0..spec.dim() {
                r0[(a, ap)] = psi0[a] * psi0[ap].conj();
            }
        }
        let state0 = DensityState::new(metric.space().clone(), r0).unwrap();
        let traj = evolve(
            &metric,
            &state0,
            &hamiltonian,
            &Observable::half_c2(),
            cfg,
        )
        .unwrap();

        let psi_end = &pure.last().psi;
        let r_end = traj.last().state.matrix();
        let mut max_diff = 0.0f64;
        for a in 0..spec.dim() {
            for ap in 0..spec.dim() {
                let want = psi_end[a] * psi_end[ap].conj();
                max_diff = max_diff.max((r_end[(a, ap)] - want).norm());
            }
        }
        assert!(
            max_diff < 1e-10,
            "density flow must track the outer product of the pure flow: {max_diff:.3e}"
        );
    }

    #[test]
    fn charge_form_is_real_and_conserved() {
        let spec = LatticeSpec::new(3, 3, 1.0).unwrap();
        let psi0 = random_psi(spec.dim(), 730);
        let cfg = IntegratorConfig::new(Scheme::Rk4, 1e-3, 400, 100).unwrap();
        let traj = pure_state_evolve(&spec, &psi0, cfg).unwrap();
        let q0 = traj.samples[0].q;
        for s in &traj.samples {
            assert!((s.q - q0).abs() < 1e-11 * q0.abs().max(1.0));
        }
        // Cross-check the per-site fast path against the dense form.
        let metric = lattice_metric(&spec).unwrap();
        let mut want = C64::new(0.0, 0.0);
        for a in 0..spec.dim() {
            for b in 0..spec.dim() {
                want += psi0[a].conj() * metric.ginv()[(a, b)] * psi0[b];
            }
        }
        assert!((charge_form(&spec, &psi0).unwrap() - want.re).abs() < 1e-12);
        assert!(want.im.abs() < 1e-12);
    }

    #[test]
    fn real_eigenmodes_keep_their_modulus_pattern() {
        let spec = LatticeSpec::new(3, 2, 1.0).unwrap();
        let d = spinor_derivative(&spec).unwrap();
        let h_tilde = d.mapv(|z| z * C64::new(0.0, -1.0));
        let (vals, vecs) = linalg::eig(&h_tilde).unwrap();
        // The spectrum splits into real (propagating) and imaginary
        // (off-shell) eigenvalues; pick a real, nonzero one.
        let mut pick = None;
        for (k, v) in vals.iter().enumerate() {
            if v.im.abs() < 1e-10 && v.re.abs() > 1e-6 {
                pick = Some(k);
                break;
            }
        }
        let k = pick.expect("a 3x2 lattice has propagating modes");
        let psi0: Vec<C64> = vecs.column(k).iter().cloned().collect();
        let cfg = IntegratorConfig::new(Scheme::Rk4, 1e-3, 500, 500).unwrap();
        let traj = pure_state_evolve(&spec, &psi0, cfg).unwrap();
        let psi_end = &traj.last().psi;
        let mut drift = 0.0f64;
        for (a, b) in psi0.iter().zip(psi_end) {
            drift = drift.max((a.norm() - b.norm()).abs());
        }
        assert!(
            drift < 1e-9,
            "eigenmode modulus pattern drifted by {drift:.3e}"
        );
    }

    #[test]
    fn spectrum_has_plus_minus_symmetry() {
        let spec = LatticeSpec::new(3, 2, 1.0).unwrap();
        let d = spinor_derivative(&spec).unwrap();
        let h_tilde = d.mapv(|z| z * C64::new(0.0, -1.0));
        let evs = linalg::eigenvalues_sorted(&h_tilde).unwrap();
        let negated: Vec<C64> = {
            let mut v: Vec<C64> = evs.iter().map(|z| -z).collect();
            v.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
            v
        };
        for (a, b) in evs.iter().zip(&negated) {
            assert!((a - b).norm() < 1e-10, "spectrum must be symmetric about 0");
        }
    }

    #[test]
    fn validation_and_guards() {
        assert!(matches!(
            LatticeSpec::new(1, 3, 1.0),
            Err(DiracError::BadLattice { nt: 1, nz: 3 })
        ));
        assert!(matches!(
            LatticeSpec::new(3, 3, 0.0),
            Err(DiracError::BadSpacing { .. })
        ));
        let big = LatticeSpec::new(40, 30, 1.0).unwrap(); // dim 4800
        assert!(matches!(
            pure_state_evolve(
                &big,
                &vec![C64::new(0.0, 0.0); big.dim()],
                IntegratorConfig::new(Scheme::Rk4, 1e-3, 1, 1).unwrap()
            ),
            Err(DiracError::DimensionTooLarge { dim: 4800, .. })
        ));
        assert!(matches!(
            spinor_derivative(&big),
            Err(DiracError::DimensionTooLarge { .. })
        ));
        let spec = LatticeSpec::new(3, 2, 1.0).unwrap();
        assert!(matches!(
            apply_generator(&spec, &vec![C64::new(0.0, 0.0); 5]),
            Err(DiracError::PsiLength { got: 5, want: 24 })
        ));
    }
}
