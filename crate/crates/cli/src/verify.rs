//! `verify`: seeded property suites over the engine, printed as a fixed
//! pass/fail table. All randomness derives from the one `--seed`, so two
//! runs with the same arguments print byte-identical output.

use ndarray::Array2;

use nambu_core::{
    dirac, drift_report, evaluate, evolve, gradient_matrix, kron_metric, lie_nambu,
    lie_poisson, linalg, linear_oracle, BracketPath, CasimirPoly, CasimirTerm, DensityState,
    IndexSpace, IntegratorConfig, Metric, Observable, Scheme, C64,
};

use crate::{CliError, Suite};

struct Row {
    name: String,
    residual: f64,
    tol: f64,
}

impl Row {
    fn passed(&self) -> bool {
        self.residual <= self.tol
    }
}

pub fn run(suite: Suite, seed: u64, dim: Option<usize>) -> Result<bool, CliError> {
    if let Some(d) = dim {
        if !(2..=6).contains(&d) {
            return Err(CliError::Config(format!(
                "--dim must be between 2 and 6, got {d}"
            )));
        }
    }
    let suites: Vec<Suite> = match suite {
        Suite::All => vec![
            Suite::Casimir,
            Suite::Antisymmetry,
            Suite::Separation,
            Suite::Spectral,
            Suite::Dirac,
        ],
        one => vec![one],
    };

    println!("{:<60} {:>12} {:>9}  verdict", "check", "residual", "tol");
    let mut all_passed = true;
    for s in suites {
        let (label, rows) = match s {
            Suite::Casimir => ("casimir", casimir_suite(seed, dim)),
            Suite::Antisymmetry => ("antisymmetry", antisymmetry_suite(seed, dim)),
            Suite::Separation => ("separation", separation_suite(seed)),
            Suite::Spectral => ("spectral", spectral_suite(seed)),
            Suite::Dirac => ("dirac", dirac_suite(seed)),
            Suite::All => unreachable!("flattened above"),
        };
        let mut suite_passed = true;
        for row in &rows {
            let verdict = if row.passed() { "PASS" } else { "FAIL" };
            suite_passed &= row.passed();
            println!(
                "{:<60} {:>12} {:>9}     {verdict}",
                row.name,
                format!("{:.3e}", row.residual),
                format!("{:.1e}", row.tol)
            );
        }
        println!(
            "suite {label}: {}",
            if suite_passed { "PASS" } else { "FAIL" }
        );
        all_passed &= suite_passed;
    }
    Ok(all_passed)
}

/// Deterministic sub-seed for the k-th draw of a suite.
fn sub_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_mul(1009).wrapping_add(k)
}

/// A random Hermitian metric that passes the conditioning guard.
fn random_metric(dim: usize, seed: u64) -> Metric {
    let space = IndexSpace::new("a", dim).expect("positive dimension");
    for attempt in 0..64 {
        let g = nambu_core::tensor::random_hermitian_matrix(dim, seed + 1_000_000 * attempt);
        if let Ok(m) = Metric::from_matrix(space.clone(), g) {
            return m;
        }
    }
    panic!("no well-conditioned metric near seed {seed}");
}

fn random_linear(dim: usize, seed: u64) -> Observable {
    Observable::linear(nambu_core::tensor::random_hermitian_matrix(dim, seed))
        .expect("random Hermitian coefficients are valid")
}

/// Scale for near-zero bracket residuals: product of the Frobenius norms of
/// the tilde matrices entering `Tr([S̃, H̃] F̃)`.
fn bracket_scale(
    metric: &Metric,
    state: &DensityState,
    obs: [&Observable; 3],
) -> f64 {
    let mut scale = 1.0;
    for o in obs {
        let d = gradient_matrix(o, metric, state).expect("gradient");
        scale *= linalg::fro_norm(&metric.tilde(&d).expect("tilde"));
    }
    scale.max(1e-30)
}

fn nonlinear_s() -> Observable {
    Observable::CasimirPoly(CasimirPoly::new(vec![
        CasimirTerm {
            coefficient: 1.0,
            powers: [2, 0, 0, 0],
        },
        CasimirTerm {
            coefficient: 0.5,
            powers: [0, 1, 0, 0],
        },
        CasimirTerm {
            coefficient: 0.2,
            powers: [0, 0, 1, 0],
        },
    ]))
}

fn casimir_suite(seed: u64, dim: Option<usize>) -> Vec<Row> {
    let dims: Vec<usize> = dim.map(|d| vec![d]).unwrap_or_else(|| vec![2, 3, 4]);
    let mut rows = Vec::new();
    for d in dims {
        let metric = random_metric(d, sub_seed(seed, 10 + d as u64));
        let state = DensityState::random(metric.space().clone(), sub_seed(seed, 20 + d as u64));
        let f = random_linear(d, sub_seed(seed, 30 + d as u64));

        let mut pair_resid = 0.0f64;
        for n in 1..=4usize {
            for m in 1..=4usize {
                let cn = Observable::casimir(n).expect("order in range");
                let cm = Observable::casimir(m).expect("order in range");
                let v = lie_nambu(&metric, &state, &cn, &cm, &f, BracketPath::Chain)
                    .expect("bracket")
                    .value;
                pair_resid = pair_resid
                    .max(v.norm() / bracket_scale(&metric, &state, [&cn, &cm, &f]));
            }
        }
        rows.push(Row {
            name: format!("casimir d={d}: {{C_n,C_m,F}} = 0 for n,m <= 4"),
            residual: pair_resid,
            tol: 1e-9,
        });

        let s_poly = nonlinear_s();
        let mut poly_resid = 0.0f64;
        for n in 1..=4usize {
            let cn = Observable::casimir(n).expect("order in range");
            let v = lie_nambu(&metric, &state, &cn, &f, &s_poly, BracketPath::Chain)
                .expect("bracket")
                .value;
            poly_resid =
                poly_resid.max(v.norm() / bracket_scale(&metric, &state, [&cn, &f, &s_poly]));
        }
        rows.push(Row {
            name: format!("casimir d={d}: {{C_n,F,S}} = 0 for polynomial S"),
            residual: poly_resid,
            tol: 1e-9,
        });

        // Step chosen so rk4 truncation error sits far below the tolerance
        // even when the drawn metric is only moderately conditioned.
        let config = IntegratorConfig::new(Scheme::Rk4, 2e-4, 250, 25).expect("valid");
        let trajectory = evolve(&metric, &state, &f, &s_poly, config).expect("evolution");
        let report = drift_report(&trajectory).expect("report");
        rows.push(Row {
            name: format!("casimir d={d}: C_1..C_4 drift over nonlinear flow"),
            residual: report
                .max_casimir_drift
                .iter()
                .fold(0.0f64, |acc, v| acc.max(*v)),
            tol: 1e-8,
        });
    }
    rows
}

fn antisymmetry_suite(seed: u64, dim: Option<usize>) -> Vec<Row> {
    let d = dim.unwrap_or(4);
    let mut perm_resid = 0.0f64;
    let mut poisson_resid = 0.0f64;
    let mut oracle_resid = 0.0f64;
    for k in 0..10u64 {
        let metric = random_metric(d, sub_seed(seed, 100 + k));
        let state = DensityState::random(metric.space().clone(), sub_seed(seed, 120 + k));
        let f = random_linear(d, sub_seed(seed, 140 + 3 * k));
        let h = random_linear(d, sub_seed(seed, 141 + 3 * k));
        let s = random_linear(d, sub_seed(seed, 142 + 3 * k));
        let v = |a: &Observable, b: &Observable, c: &Observable| {
            lie_nambu(&metric, &state, a, b, c, BracketPath::Chain)
                .expect("bracket")
                .value
        };
        let base = v(&f, &h, &s);
        let perms: [(C64, f64); 5] = [
            (v(&f, &s, &h), -1.0),
            (v(&h, &f, &s), -1.0),
            (v(&h, &s, &f), 1.0),
            (v(&s, &f, &h), 1.0),
            (v(&s, &h, &f), -1.0),
        ];
        let scale = perms
            .iter()
            .map(|(p, _)| p.norm())
            .fold(base.norm(), f64::max)
            .max(1e-30);
        for (value, sign) in perms {
            perm_resid = perm_resid.max((value - base * sign).norm() / scale);
        }

        let fh = lie_poisson(&metric, &state, &f, &h, BracketPath::Chain)
            .expect("bracket")
            .value;
        let hf = lie_poisson(&metric, &state, &h, &f, BracketPath::Chain)
            .expect("bracket")
            .value;
        poisson_resid = poisson_resid.max((fh + hf).norm() / fh.norm().max(1e-30));

        let oracle = lie_nambu(&metric, &state, &f, &h, &s, BracketPath::Oracle)
            .expect("bracket")
            .value;
        oracle_resid = oracle_resid.max((oracle - base).norm() / base.norm().max(1e-30));
    }
    vec![
        Row {
            name: format!("antisymmetry d={d}: all six slot permutations"),
            residual: perm_resid,
            tol: 1e-10,
        },
        Row {
            name: format!("antisymmetry d={d}: {{F,H}} = -{{H,F}}"),
            residual: poisson_resid,
            tol: 1e-10,
        },
        Row {
            name: format!("antisymmetry d={d}: chain vs materialized oracle"),
            residual: oracle_resid,
            tol: 1e-10,
        },
    ]
}

fn separation_suite(seed: u64) -> Vec<Row> {
    let metrics: Vec<Metric> = (0..3)
        .map(|j| random_metric(2, sub_seed(seed, 200 + j)))
        .collect();
    let full = kron_metric(&metrics).expect("composite metric");
    let state = DensityState::random(full.space().clone(), sub_seed(seed, 210));
    let x = random_linear(8, sub_seed(seed, 211));

    let f_lin = Observable::Subsystem {
        metrics: metrics.clone(),
        keep: vec![0],
        inner: Box::new(random_linear(2, sub_seed(seed, 220))),
    };
    let g_lin = Observable::Subsystem {
        metrics: metrics.clone(),
        keep: vec![2],
        inner: Box::new(random_linear(2, sub_seed(seed, 221))),
    };
    let v3 = lie_nambu(&full, &state, &f_lin, &g_lin, &x, BracketPath::Chain)
        .expect("bracket")
        .value;
    let r3 = v3.norm() / bracket_scale(&full, &state, [&f_lin, &g_lin, &x]);

    let f_nl = Observable::Subsystem {
        metrics: metrics.clone(),
        keep: vec![0],
        inner: Box::new(Observable::casimir(2).expect("order in range")),
    };
    let g_nl = Observable::Subsystem {
        metrics: metrics.clone(),
        keep: vec![2],
        inner: Box::new(Observable::CasimirPoly(CasimirPoly::new(vec![CasimirTerm {
            coefficient: 1.0,
            powers: [2, 0, 0, 0],
        }]))),
    };
    let v4 = lie_nambu(&full, &state, &f_nl, &g_nl, &x, BracketPath::Chain)
        .expect("bracket")
        .value;
    let r4 = v4.norm() / bracket_scale(&full, &state, [&f_nl, &g_nl, &x]);

    let h1 = nambu_core::embed_observable(&metrics, &[0], &random_linear(2, sub_seed(seed, 230)))
        .expect("embedding");
    let h2 = nambu_core::embed_observable(&metrics, &[2], &random_linear(2, sub_seed(seed, 231)))
        .expect("embedding");
    let h_sum = Observable::Sum(vec![(1.0, h1.clone()), (1.0, h2)]);
    let s_gen = Observable::CasimirPoly(CasimirPoly::new(vec![
        CasimirTerm {
            coefficient: 0.5,
            powers: [0, 1, 0, 0],
        },
        CasimirTerm {
            coefficient: 0.3,
            powers: [2, 0, 0, 0],
        },
    ]));
    let f_watch = Observable::Subsystem {
        metrics: metrics.clone(),
        keep: vec![0],
        inner: Box::new(random_linear(2, sub_seed(seed, 232))),
    };
    let config = IntegratorConfig::new(Scheme::Rk4, 1e-2, 100, 10).expect("valid");
    let both = evolve(&full, &state, &h_sum, &s_gen, config).expect("evolution");
    let alone = evolve(&full, &state, &h1, &s_gen, config).expect("evolution");
    let mut autonomy = 0.0f64;
    for (a, b) in both.samples.iter().zip(&alone.samples) {
        let fa = evaluate(&f_watch, &full, &a.state).expect("evaluate");
        let fb = evaluate(&f_watch, &full, &b.state).expect("evaluate");
        autonomy = autonomy.max((fa - fb).norm());
    }

    vec![
        Row {
            name: "separation N=3: {F^I, G^II, X} = 0, linear reduced".into(),
            residual: r3,
            tol: 1e-9,
        },
        Row {
            name: "separation N=3: {F^I, G^II, X} = 0, nonlinear reduced".into(),
            residual: r4,
            tol: 1e-9,
        },
        Row {
            name: "separation N=3: particle-0 trajectory autonomous".into(),
            residual: autonomy,
            tol: 1e-8,
        },
    ]
}

fn spectral_suite(seed: u64) -> Vec<Row> {
    // Real-spectrum construction: T = exp(i·sig·A) preserves sig, so
    // ρ₀ = T·diag(p)·sig·T† is Hermitian with ρ₀·G⁻¹ = T·diag(p)·T⁻¹.
    let metric = Metric::from_signature("a", &[1, 1, -1, -1]).expect("signature metric");
    let sig = metric.g().clone();
    let spectrum = [0.9, 0.3, -0.2, -0.6];
    let a = nambu_core::tensor::random_hermitian_matrix(4, sub_seed(seed, 300));
    let t = linalg::expm(&sig.dot(&a).mapv(|z| z * C64::new(0.0, 1.0))).expect("expm");
    let mut d_sig = Array2::<C64>::zeros((4, 4));
    for k in 0..4 {
        d_sig[(k, k)] = C64::new(spectrum[k], 0.0) * sig[(k, k)];
    }
    let r0 = t.dot(&d_sig).dot(&linalg::adjoint(&t));
    let state0 = DensityState::new(metric.space().clone(), r0).expect("Hermitian");

    let h = random_linear(4, sub_seed(seed, 310));
    let config = IntegratorConfig::new(Scheme::Rk4, 1e-3, 500, 50).expect("valid");
    let trajectory = evolve(&metric, &state0, &h, &nonlinear_s(), config).expect("evolution");
    let mut sorted = spectrum;
    sorted.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    let mut frozen = 0.0f64;
    for sample in &trajectory.samples {
        for (ev, want) in sample.eigenvalues.iter().zip(&sorted) {
            frozen = frozen.max((ev - C64::new(*want, 0.0)).norm());
        }
    }

    // General random state under nonlinear S: tracked spectral drift.
    let metric2 = random_metric(4, sub_seed(seed, 320));
    let state2 = DensityState::random(metric2.space().clone(), sub_seed(seed, 321));
    let h2 = random_linear(4, sub_seed(seed, 322));
    let traj2 = evolve(&metric2, &state2, &h2, &nonlinear_s(), config).expect("evolution");
    let drift2 = drift_report(&traj2).expect("report").max_spectral_drift;

    // Linear regime against the closed-form exponential oracle.
    let metric3 = Metric::euclidean("a", 4).expect("identity metric");
    let state3 = DensityState::random(metric3.space().clone(), sub_seed(seed, 330));
    let h3_matrix = nambu_core::tensor::random_hermitian_matrix(4, sub_seed(seed, 331));
    let h3 = Observable::linear(h3_matrix.clone()).expect("Hermitian");
    let traj3 = evolve(&metric3, &state3, &h3, &Observable::half_c2(), config)
        .expect("evolution");
    let oracle = linear_oracle(&metric3, &h3_matrix, &state3, traj3.last().s).expect("oracle");
    let diff = traj3.last().state.matrix() - oracle.matrix();
    let linear_resid = linalg::max_abs(&diff.to_owned());

    vec![
        Row {
            name: "spectral: real eigenvalue paths frozen (nonlinear S)".into(),
            residual: frozen,
            tol: 1e-6,
        },
        Row {
            name: "spectral: tracked eigenvalue drift, random state".into(),
            residual: drift2,
            tol: 1e-8,
        },
        Row {
            name: "spectral: linear regime matches exponential oracle".into(),
            residual: linear_resid,
            tol: 1e-8,
        },
    ]
}

fn dirac_suite(seed: u64) -> Vec<Row> {
    let blocks = dirac::bispinor_blocks();
    let mut block_resid = 0.0f64;
    let eps2 = blocks.eps.dot(&blocks.eps);
    let mixed = blocks.g_low_primed.dot(&blocks.g_primed_low);
    let diag = blocks.g_latin.dot(&blocks.g_primed);
    for i in 0..4 {
        for j in 0..4 {
            let id = if i == j { 1.0 } else { 0.0 };
            block_resid = block_resid
                .max((eps2[(i, j)] - id).abs())
                .max((mixed[(i, j)] - id).abs())
                .max((diag[(i, j)] + id).abs());
        }
    }

    let spec = dirac::LatticeSpec::new(3, 3, 1.0).expect("valid lattice");
    let h = dirac::dirac_hamiltonian(&spec).expect("hamiltonian");
    let herm_resid = linalg::hermiticity_residual(&h) / linalg::max_abs(&h).max(1.0);

    let d = dirac::spinor_derivative(&spec).expect("generator");
    let psi: Vec<C64> = {
        let probe = nambu_core::tensor::random_hermitian_matrix(spec.dim(), sub_seed(seed, 400));
        (0..spec.dim()).map(|k| probe[(k, 0)]).collect()
    };
    let fast = dirac::apply_generator(&spec, &psi).expect("stencil");
    let mut stencil_resid = 0.0f64;
    for g in 0..spec.dim() {
        let mut want = C64::new(0.0, 0.0);
        for gp in 0..spec.dim() {
            want += d[(g, gp)] * psi[gp];
        }
        stencil_resid = stencil_resid.max((fast[g] - want).norm());
    }

    let small = dirac::LatticeSpec::new(3, 2, 1.0).expect("valid lattice");
    let psi0: Vec<C64> = {
        let probe =
            nambu_core::tensor::random_hermitian_matrix(small.dim(), sub_seed(seed, 410));
        (0..small.dim()).map(|k| probe[(k, 0)]).collect()
    };
    let config = IntegratorConfig::new(Scheme::Rk4, 1e-3, 200, 100).expect("valid");
    let pure = dirac::pure_state_evolve(&small, &psi0, config).expect("pure evolution");
    let (metric, hamiltonian) = dirac::dirac_system(&small).expect("lattice system");
    let state0 = DensityState::pure(metric.space().clone(), &psi0).expect("pure state");
    let traj = evolve(&metric, &state0, &hamiltonian, &Observable::half_c2(), config)
        .expect("density evolution");
    let psi_end = &pure.last().psi;
    let r_end = traj.last().state.matrix();
    let mut cross = 0.0f64;
    for a in 0..small.dim() {
        for ap in 0..small.dim() {
            cross = cross.max((r_end[(a, ap)] - psi_end[a] * psi_end[ap].conj()).norm());
        }
    }

    let q0 = pure.samples[0].q;
    let mut q_drift = 0.0f64;
    for s in &pure.samples {
        q_drift = q_drift.max((s.q - q0).abs() / q0.abs().max(1.0));
    }

    vec![
        Row {
            name: "dirac: bispinor block identities".into(),
            residual: block_resid,
            tol: 1e-12,
        },
        Row {
            name: "dirac: lattice hamiltonian Hermitian (3x3)".into(),
            residual: herm_resid,
            tol: 1e-12,
        },
        Row {
            name: "dirac: stencil matches dense generator".into(),
            residual: stencil_resid,
            tol: 1e-12,
        },
        Row {
            name: "dirac: pure-state vs density evolution (3x2)".into(),
            residual: cross,
            tol: 1e-8,
        },
        Row {
            name: "dirac: charge form conserved".into(),
            residual: q_drift,
            tol: 1e-10,
        },
    ]
}
