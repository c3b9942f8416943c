use hodge_core::complex::{build_periodic_grid, GridSpec};
use hodge_core::eigensolve::{
    dense_eigen, dense_eigenvalues, eig_pencil, inertia_count_below, nonzero, rayleigh_quotient, resolvent_apply,
    zero_threshold, Method, Pencil, Selection, SolverOptions,
};
use hodge_core::metric::{assemble_masses, assemble_pencil, epsilon_closeness, MetricSpec};
use hodge_core::CellComplex;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn torus(dim: usize, n: usize, h: f64) -> CellComplex {
    build_periodic_grid(&GridSpec::torus(dim, n, h)).unwrap()
}

fn pencil(c: &CellComplex, metric: &MetricSpec, k: usize) -> Pencil {
    let masses = assemble_masses(c, metric).unwrap();
    assemble_pencil(c, &masses, k).unwrap().full().clone()
}

fn sorted_symmetric_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

// second difference on a ring of n points with spacing h
fn ring_laplacian(n: usize, h: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] += 2.0 / (h * h);
        m[(i, (i + 1) % n)] -= 1.0 / (h * h);
        m[((i + 1) % n, i)] -= 1.0 / (h * h);
    }
    m
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol * (1.0 + y.abs()), "{x} vs {y}");
    }
}

#[test]
fn circle_of_four() {
    let c = torus(1, 4, 1.0);
    let values = dense_eigenvalues(&pencil(&c, &MetricSpec::native(), 0)).unwrap();
    assert_close(&values, &[0.0, 2.0, 2.0, 4.0], 1e-12);
    let edges = dense_eigenvalues(&pencil(&c, &MetricSpec::native(), 1)).unwrap();
    assert_close(&edges, &[0.0, 2.0, 2.0, 4.0], 1e-12);
}

#[test]
fn circle_matches_second_difference() {
    for (n, h) in [(5, 1.0), (12, 0.3), (17, 2.5)] {
        let c = torus(1, n, h);
        let values = dense_eigenvalues(&pencil(&c, &MetricSpec::native(), 0)).unwrap();
        assert_close(&values, &sorted_symmetric_eigenvalues(ring_laplacian(n, h)), 1e-10);
    }
}

#[test]
fn two_torus_functions_match_kronecker_sum() {
    let (nx, ny, hx, hy) = (5, 6, 0.7, 1.3);
    let spec = GridSpec::periodic_with(&[nx, ny], &[hx, hy]);
    let c = build_periodic_grid(&spec).unwrap();
    let values = dense_eigenvalues(&pencil(&c, &MetricSpec::native(), 0)).unwrap();
    let lx = ring_laplacian(nx, hx);
    let ly = ring_laplacian(ny, hy);
    let oracle = lx.kronecker(&DMatrix::identity(ny, ny)) + DMatrix::identity(nx, nx).kronecker(&ly);
    assert_close(&values, &sorted_symmetric_eigenvalues(oracle), 1e-10);
}

#[test]
fn harmonic_one_forms_on_the_two_torus() {
    let c = torus(2, 8, 1.0);
    let set = eig_pencil(&pencil(&c, &MetricSpec::native(), 1), Selection::All, &SolverOptions::default()).unwrap();
    assert_eq!(set.kernel_dimension(), 2);
}

#[test]
fn iterative_and_dense_agree() {
    let c = torus(2, 20, 1.0);
    let p = pencil(&c, &MetricSpec::per_axis(vec![1.0, 0.8]), 1);
    let dense = SolverOptions {
        method: Method::Dense,
        ..SolverOptions::default()
    };
    let iterative = SolverOptions {
        method: Method::ShiftInvert,
        ..SolverOptions::default()
    };
    let a = eig_pencil(&p, Selection::Window(0.6), &dense).unwrap();
    let b = eig_pencil(&p, Selection::Window(0.6), &iterative).unwrap();
    assert!(!a.is_empty());
    assert_close(&b.values, &a.values, 1e-7);
    let s = eig_pencil(&p, Selection::Smallest(7), &iterative).unwrap();
    assert_close(&s.values, &a.values[..7], 1e-7);
}

#[test]
fn inertia_counts_eigenvalues_below_a_shift() {
    let c = torus(2, 6, 1.0);
    let p = pencil(&c, &MetricSpec::native(), 1);
    let values = dense_eigenvalues(&p).unwrap();
    for shift in [0.5, 1.7, 3.1, 5.5] {
        let below = values.iter().filter(|&&v| v < shift).count();
        assert_eq!(inertia_count_below(&p, shift).unwrap(), below, "shift {shift}");
    }
}

#[test]
fn resolvent_matches_spectral_calculus() {
    let c = torus(2, 4, 1.0);
    let p = pencil(&c, &MetricSpec::per_axis(vec![0.9, 1.2]), 1);
    let (values, vectors) = dense_eigen(&p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v: Vec<f64> = (0..p.size()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let alpha = 0.7;
    for power in [1u32, 2] {
        let got = resolvent_apply(&p, alpha, power, &v).unwrap();
        // Σ_j (λ_j + α)^-m <v, e_j>_M e_j with M-orthonormal e_j
        let mut expect = vec![0.0; p.size()];
        for (j, &l) in values.iter().enumerate() {
            let e: Vec<f64> = vectors.column(j).iter().copied().collect();
            let coeff = p.m_inner(&v, &e) / p.m_inner(&e, &e) / (l + alpha).powi(power as i32);
            for (x, y) in expect.iter_mut().zip(&e) {
                *x += coeff * y;
            }
        }
        assert_close(&got, &expect, 1e-9);
    }
    let once = resolvent_apply(&p, alpha, 1, &v).unwrap();
    let twice = resolvent_apply(&p, alpha, 1, &once).unwrap();
    assert_close(&resolvent_apply(&p, alpha, 2, &v).unwrap(), &twice, 1e-10);
}

#[test]
fn rayleigh_quotient_bounds() {
    let c = torus(2, 5, 1.0);
    let p = pencil(&c, &MetricSpec::native(), 0);
    let values = dense_eigenvalues(&p).unwrap();
    let (lo, hi) = (values[0], *values.last().unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let v: Vec<f64> = (0..p.size()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let q = rayleigh_quotient(&p, &v).unwrap();
        assert!(q >= lo - 1e-12 && q <= hi + 1e-12);
    }
    assert!(rayleigh_quotient(&p, &vec![0.0; p.size()]).is_err());
}

#[test]
fn closeness_of_a_scaled_metric() {
    // metric tensor times 1.01: on a 2-torus the function and top-form stars move by 1%
    let c = torus(2, 4, 1.0);
    let m0 = assemble_masses(&c, &MetricSpec::native()).unwrap();
    let m1 = assemble_masses(&c, &MetricSpec::uniform_scaling(1.01)).unwrap();
    let r = epsilon_closeness(&c, &m0, &m1).unwrap();
    assert!((r.eps_norm[0] - 0.01).abs() < 1e-12, "{:?}", r.eps_norm);
    assert!(r.eps_norm[1].abs() < 1e-12);
    assert!(r.eps_form[0].abs() < 1e-12, "{:?}", r.eps_form);
    assert!((r.eps - 0.01).abs() < 1e-9);
    let same = epsilon_closeness(&c, &m0, &m0).unwrap();
    assert!(same.eps.abs() < 1e-12);
}

#[test]
fn degenerate_metrics_are_rejected() {
    let c = torus(1, 4, 1.0);
    assert!(assemble_masses(&c, &MetricSpec::uniform_scaling(0.0)).is_err());
    assert!(assemble_masses(&c, &MetricSpec::per_axis(vec![-1.0])).is_err());
    assert!(assemble_masses(&c, &MetricSpec::per_cell(vec![vec![1.0; 4], vec![1.0; 3]])).is_err());
    assert!(assemble_masses(&c, &MetricSpec::per_cell(vec![vec![1.0; 4], vec![0.0, 1.0, 1.0, 1.0]])).is_err());
}

fn random_case() -> impl Strategy<Value = (usize, usize, u64)> {
    (1usize..=3).prop_flat_map(|dim| {
        let max = if dim == 3 { 4 } else { 7 };
        (Just(dim), 3usize..=max, any::<u64>())
    })
}

fn random_metric(c: &CellComplex, seed: u64) -> MetricSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MetricSpec::random_per_cell(c, 0.5, 2.0, &mut rng).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn kernel_dimension_is_betti((dim, n, seed) in random_case()) {
        let c = torus(dim, n, 1.0);
        let metric = random_metric(&c, seed);
        let betti = c.validate().betti;
        for k in 0..=dim {
            let values = dense_eigenvalues(&pencil(&c, &metric, k)).unwrap();
            let zero = zero_threshold(&values);
            prop_assert!(values.iter().all(|&v| v >= -zero));
            let kernel = values.iter().filter(|v| v.abs() <= zero).count();
            prop_assert_eq!(kernel, betti[k], "degree {}", k);
        }
    }

    #[test]
    fn up_and_down_parts_share_nonzero_spectra((dim, n, seed) in random_case()) {
        let c = torus(dim, n, 1.0);
        let masses = assemble_masses(&c, &random_metric(&c, seed)).unwrap();
        for k in 0..dim {
            let (up, _) = assemble_pencil(&c, &masses, k).unwrap().partial_pencils();
            let (_, down) = assemble_pencil(&c, &masses, k + 1).unwrap().partial_pencils();
            let a = dense_eigenvalues(&up).unwrap();
            let b = dense_eigenvalues(&down).unwrap();
            let t = zero_threshold(&a).max(zero_threshold(&b));
            let (a, b) = (nonzero(&a, t), nonzero(&b, t));
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-8 * (1.0 + x.abs()), "{} vs {}", x, y);
            }
        }
    }

    #[test]
    fn up_and_down_operators_annihilate((dim, n, seed) in random_case()) {
        let c = torus(dim, n, 1.0);
        let masses = assemble_masses(&c, &random_metric(&c, seed)).unwrap();
        for k in 1..dim {
            let p = assemble_pencil(&c, &masses, k).unwrap();
            let inv = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                p.size(),
                p.mass().iter().map(|m| 1.0 / m),
            ));
            let up = &inv * p.k_up.to_dense();
            let down = &inv * p.k_down.to_dense();
            let scale = up.amax().max(down.amax()).max(1.0);
            prop_assert!((&up * &down).amax() <= 1e-10 * scale * scale);
            prop_assert!((&down * &up).amax() <= 1e-10 * scale * scale);
        }
    }

    #[test]
    fn scaling_divides_eigenvalues((dim, n, seed) in random_case(), factor in 0.2f64..5.0) {
        let c = torus(dim, n, 1.0);
        let base = random_metric(&c, seed);
        let scaled = MetricSpec { factor, ..base.clone() };
        for k in 0..=dim {
            let a = dense_eigenvalues(&pencil(&c, &base, k)).unwrap();
            let b = dense_eigenvalues(&pencil(&c, &scaled, k)).unwrap();
            let top = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x / factor - y).abs() <= 1e-9 * top);
            }
        }
    }

    #[test]
    fn closeness_shrinks_toward_identity((dim, n, seed) in random_case(), eps in 0.001f64..0.4) {
        let c = torus(dim, n, 1.0);
        let base = random_metric(&c, seed);
        let m0 = assemble_masses(&c, &base).unwrap();
        let half = MetricSpec { factor: 1.0 + eps / 2.0, ..base.clone() };
        let full = MetricSpec { factor: 1.0 + eps, ..base };
        let r_half = epsilon_closeness(&c, &m0, &assemble_masses(&c, &half).unwrap()).unwrap();
        let r_full = epsilon_closeness(&c, &m0, &assemble_masses(&c, &full).unwrap()).unwrap();
        prop_assert!(r_half.eps <= r_full.eps + 1e-12);
        prop_assert!(r_full.eps > 0.0);
    }
}
