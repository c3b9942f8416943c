use std::fs;

use hodge_core::analytic::discrete_torus_oracle;
use hodge_core::complex::{build_grid, build_periodic_grid, GridSpec};
use hodge_core::eigensolve::{dense_eigen, SolverOptions, SpectrumSet};
use hodge_core::experiments::{
    build_gromov_cover, check_adjacent_degree, check_duality, check_partial_relations, deformation_experiment,
    dirichlet_ball_eigenvalue, localization_experiment, partition_localization_check, run, spectra_distance,
    DeformationFamily, DeformationReport, RunConfig, RunRecord,
};
use hodge_core::metric::{assemble_masses, assemble_pencil, MetricSpec};
use hodge_core::{CellComplex, Error};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn torus(dim: usize, n: usize) -> CellComplex {
    build_periodic_grid(&GridSpec::torus(dim, n, 1.0)).unwrap()
}

fn set(values: &[f64]) -> SpectrumSet {
    SpectrumSet::new(values.to_vec(), None, 1e-12)
}

#[test]
fn structural_checks_on_tori() {
    let c = torus(2, 6);
    let native = MetricSpec::native();
    assert!(check_partial_relations(&c, &native, Some(1), 1e-8).unwrap().passed);
    assert!(check_partial_relations(&c, &native, Some(0), 1e-8).unwrap().passed);
    assert!(check_adjacent_degree(&c, &native, 1e-8).unwrap().passed);
    assert!(check_duality(&c, &native, 1e-8).unwrap().passed);
    let c3 = torus(3, 3);
    assert!(check_adjacent_degree(&c3, &native, 1e-8).unwrap().passed);
    assert!(check_duality(&c3, &MetricSpec::uniform_scaling(0.37), 1e-8).unwrap().passed);
}

#[test]
fn partial_relations_under_random_metrics() {
    let c = torus(2, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        let metric = MetricSpec::random_per_cell(&c, 0.3, 3.0, &mut rng).unwrap();
        let report = check_partial_relations(&c, &metric, None, 1e-7).unwrap();
        assert!(report.passed, "{report:?}");
        assert!(check_adjacent_degree(&c, &metric, 1e-7).unwrap().passed);
    }
}

#[test]
fn function_spectrum_sits_inside_one_form_spectrum() {
    // checked against the closed-form oracle rather than through the library check
    let spec = GridSpec::periodic_with(&[5, 7], &[1.0, 0.6]);
    let f = discrete_torus_oracle(&spec, 0, None).unwrap();
    let one = discrete_torus_oracle(&spec, 1, None).unwrap();
    for &l in f.values.iter().filter(|&&l| l > 1e-12) {
        assert!(one.values.iter().any(|&m| (m - l).abs() < 1e-12));
    }
}

#[test]
fn duality_needs_a_closed_complex() {
    let spec = GridSpec {
        dim: 2,
        extents: vec![4, 4],
        spacing: vec![1.0, 1.0],
        periodic: vec![true, false],
    };
    let c = build_grid(&spec).unwrap();
    assert!(check_duality(&c, &MetricSpec::native(), 1e-8).is_err());
}

#[test]
fn distance_examples() {
    assert!((spectra_distance(&set(&[0.0, 1.0, 2.0]), &set(&[0.0, 1.1, 2.0]), 3.0) - 0.1).abs() < 1e-12);
    assert_eq!(spectra_distance(&set(&[0.0, 1.0]), &set(&[0.0, 1.0]), 3.0), 0.0);
    let d = spectra_distance(&set(&[0.0, 2.0, 2.0, 4.0]), &set(&[0.0, 0.5, 0.5, 1.0]), 4.0);
    assert!((d - 3.0).abs() < 1e-12);
    // only basepoints left in both windows
    assert_eq!(spectra_distance(&set(&[5.0]), &set(&[7.0]), 3.0), 0.0);
}

#[test]
fn circle_scaling_deformation() {
    let c = torus(1, 4);
    let r = deformation_experiment(&c, &MetricSpec::native(), DeformationFamily::UniformScaling, &[0.1], 4.0, 1e-12)
        .unwrap();
    assert!((r.points[0].distance - 4.0 * (1.0 - 1.0 / 1.1)).abs() < 1e-12);
    assert!(r.points[0].closeness_ok);
}

#[test]
fn halving_the_deformation_halves_the_distance() {
    let c = torus(1, 16);
    let r = deformation_experiment(
        &c,
        &MetricSpec::native(),
        DeformationFamily::UniformScaling,
        &[0.2, 0.1, 0.05, 0.025],
        4.0,
        1e-12,
    )
    .unwrap();
    assert!(r.passed());
    let slope = r.trend_slope.unwrap();
    assert!((slope - 1.0).abs() < 0.1, "{slope}");
    for p in &r.points {
        assert!(p.distance <= p.scaling_bound.unwrap() + 1e-12);
    }
}

#[test]
fn per_axis_deformation_stays_within_bounds() {
    let c = torus(2, 6);
    let r = deformation_experiment(
        &c,
        &MetricSpec::native(),
        DeformationFamily::PerAxis { axis: 0 },
        &[0.4, 0.2, 0.1, 0.05],
        5.0,
        1e-12,
    )
    .unwrap();
    assert!(r.passed(), "{r:?}");
    for p in &r.points {
        assert!(p.degree_distances[1] <= p.first_order_bound + 1e-12);
        assert!(p.distance <= p.min_max_bound);
    }
}

#[test]
fn cover_on_a_circle() {
    let c = torus(1, 16);
    let pou = build_gromov_cover(&c, 4).unwrap();
    assert!((2..=4).contains(&pou.centers.len()), "{:?}", pou.centers);
    let nv = c.cell_count(0);
    for (i, &a) in pou.centers.iter().enumerate() {
        let dist = c.vertex_distances(a);
        for &b in &pou.centers[i + 1..] {
            assert!(dist[b] >= 4);
        }
    }
    let mut sum = vec![0.0; nv];
    for i in 0..pou.centers.len() {
        for (s, r) in sum.iter_mut().zip(pou.dense_rho(i, nv)) {
            *s += r * r;
        }
    }
    assert!(sum.iter().all(|s| (s - 1.0).abs() < 1e-12));
}

#[test]
fn cover_of_a_two_torus() {
    let c = torus(2, 16);
    let pou = build_gromov_cover(&c, 4).unwrap();
    assert!(pou.cover_multiplicity <= 9);
    assert!(pou.normalization_error < 1e-12);
    let nv = c.cell_count(0);
    let reach: Vec<Vec<usize>> = pou.centers.iter().map(|&x| c.vertex_distances(x)).collect();
    for v in 0..nv {
        assert!(reach.iter().any(|d| d[v] <= 4), "vertex {v} uncovered");
    }
    let one = build_gromov_cover(&c, 100).unwrap();
    assert_eq!(one.centers.len(), 1);
    assert!(one.dense_rho(0, nv).iter().all(|&r| (r - 1.0).abs() < 1e-15));
    assert!(build_gromov_cover(&c, 1).is_err());
}

// Q(u) = Σ_edges w_e (u_b − u_a)², built straight from the coboundary
fn energy(c: &CellComplex, w: &[f64], u: &[f64]) -> f64 {
    let d = c.coboundary(0).unwrap().to_f64();
    d.mul_vec(u).iter().zip(w).map(|(g, w)| w * g * g).sum()
}

#[test]
fn partition_margins_match_direct_energies() {
    let c = torus(2, 24);
    let metric = MetricSpec::native();
    let masses = assemble_masses(&c, &metric).unwrap();
    let (w, m) = (masses.diag(1).to_vec(), masses.diag(0).to_vec());
    let nv = c.cell_count(0);
    let pou = build_gromov_cover(&c, 4).unwrap();
    let pencil = assemble_pencil(&c, &masses, 0).unwrap();
    let (_, vectors) = dense_eigen(pencil.full()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let probes = vec![
        vec![1.0; nv],
        vectors.column(5).iter().copied().collect(),
        (0..nv).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>(),
    ];
    let report = partition_localization_check(&c, &metric, &pou, &probes, 0).unwrap();
    assert!(report.within_bound, "{report:?}");
    assert!(report.max_constant <= report.constant_bound);
    for (u, &margin) in probes.iter().zip(&report.margins) {
        let mut total = 0.0;
        for i in 0..pou.centers.len() {
            let rho = pou.dense_rho(i, nv);
            let local: Vec<f64> = rho.iter().zip(u).map(|(r, x)| r * x).collect();
            total += energy(&c, &w, &local);
        }
        let direct = total - energy(&c, &w, u);
        assert!((direct - margin).abs() < 1e-9 * (1.0 + direct.abs()), "{direct} vs {margin}");
        let norm: f64 = u.iter().zip(&m).map(|(x, m)| m * x * x).sum();
        assert!(margin <= report.constant_bound * norm / 16.0 * (1.0 + 1e-9));
    }
    assert!(partition_localization_check(&c, &metric, &pou, &probes, 1).is_err());
}

#[test]
fn dirichlet_interval_matches_tridiagonal_oracle() {
    let c = torus(1, 50);
    for r in [4.0, 7.0, 11.0] {
        let got = dirichlet_ball_eigenvalue(&c, &MetricSpec::native(), 0, r, 0, &SolverOptions::default()).unwrap();
        // the 2R + 1 kept vertices carry the path Laplacian with both ends pinned
        let size = 2 * r as usize + 1;
        let t = DMatrix::from_fn(size, size, |i, j| match i.abs_diff(j) {
            0 => 2.0,
            1 => -1.0,
            _ => 0.0,
        });
        let lo = t.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((got - lo).abs() < 1e-10, "{got} vs {lo}");
        assert!(got > 0.0);
    }
}

#[test]
fn localization_follows_inverse_square() {
    let r = localization_experiment(&GridSpec::torus(2, 40, 1.0), &[4.0, 8.0, 16.0], 0, &SolverOptions::default())
        .unwrap();
    assert!(r.within_range, "{r:?}");
    assert!(r.eigenvalues.windows(2).all(|w| w[1] < w[0]));
    assert!(localization_experiment(&GridSpec::torus(1, 20, 1.0), &[12.0], 0, &SolverOptions::default()).is_err());
}

fn write_config(dir: &std::path::Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn duality_run_writes_spectra_and_record() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        "duality.json",
        r#"{
            "schema_version": 1,
            "experiment": {"kind": "duality"},
            "complex": {"grid": {"dim": 2, "extents": [5, 5], "spacing": [1, 1], "periodic": [true, true]}},
            "output_dir": "out"
        }"#,
    );
    let config = RunConfig::load(&path).unwrap();
    assert_eq!(config.output_dir, dir.path().join("out"));
    let record = run(&config).unwrap();
    assert_eq!(record.passed, Some(true));
    let out = dir.path().join("out");
    for k in 0..=2 {
        let csv = fs::read_to_string(out.join(format!("spectrum_k{k}.csv"))).unwrap();
        assert!(csv.starts_with("value,multiplicity\n"));
    }
    let a = fs::read_to_string(out.join("spectrum_k0.csv")).unwrap();
    let b = fs::read_to_string(out.join("spectrum_k2.csv")).unwrap();
    let (a, b) = (SpectrumSet::from_csv(&a, 1e-9).unwrap(), SpectrumSet::from_csv(&b, 1e-9).unwrap());
    assert_eq!(a.len(), 25);
    assert!(spectra_distance(&a, &b, 10.0) < 1e-12);
    let saved: RunRecord = serde_json::from_str(&fs::read_to_string(out.join("record.json")).unwrap()).unwrap();
    assert_eq!(saved.config, config);
    assert!(!out.read_dir().unwrap().any(|e| e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
}

#[test]
fn deformation_run_reports_shrinking_distances() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"{{
            "schema_version": 1,
            "experiment": {{"kind": "deformation", "family": {{"kind": "uniform_scaling"}},
                            "sweep": [0.2, 0.1, 0.05], "window": 4.0}},
            "complex": {{"grid": {{"dim": 1, "extents": [12], "spacing": [1], "periodic": [true]}}}},
            "output_dir": {:?}
        }}"#,
        dir.path().join("deform")
    );
    let record = run(&RunConfig::from_json(&text).unwrap()).unwrap();
    assert_eq!(record.passed, Some(true));
    let report: DeformationReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("deform/report.json")).unwrap()).unwrap();
    assert!(report.monotone);
    let d: Vec<f64> = report.points.iter().map(|p| p.distance).collect();
    assert!(d[0] > d[1] && d[1] > d[2]);
    let csv = fs::read_to_string(dir.path().join("deform/deformation.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "eps,distance,ratio,closeness,min_max_bound");
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn file_sources_resolve_against_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let complex = build_periodic_grid(&GridSpec::torus(1, 6, 1.0)).unwrap();
    fs::write(dir.path().join("ring.json"), serde_json::to_string(&complex.to_document()).unwrap()).unwrap();
    let path = write_config(
        dir.path(),
        "spectrum.json",
        r#"{"schema_version": 1, "experiment": {"kind": "spectrum", "degree": 0},
            "complex": {"file": "ring.json"}, "output_dir": "s"}"#,
    );
    run(&RunConfig::load(&path).unwrap()).unwrap();
    let csv = fs::read_to_string(dir.path().join("s/spectrum_k0.csv")).unwrap();
    let got = SpectrumSet::from_csv(&csv, 1e-9).unwrap();
    assert_eq!(got.len(), 6);
    assert_eq!(got.kernel_dimension(), 1);
}

#[test]
fn malformed_configs_name_the_problem() {
    let base = r#""complex": {"grid": {"dim": 1, "extents": [4], "spacing": [1], "periodic": [true]}}, "output_dir": "x""#;
    let typo = format!(r#"{{"schema_version": 1, "experiment": {{"kind": "duality"}}, "sede": 3, {base}}}"#);
    let err = RunConfig::from_json(&typo).unwrap_err().to_string();
    assert!(err.contains("sede"), "{err}");
    let kind = format!(r#"{{"schema_version": 1, "experiment": {{"kind": "telepathy"}}, {base}}}"#);
    let err = RunConfig::from_json(&kind).unwrap_err().to_string();
    assert!(err.contains("telepathy"), "{err}");
    let version = format!(r#"{{"schema_version": 9, "experiment": {{"kind": "duality"}}, {base}}}"#);
    assert!(matches!(RunConfig::from_json(&version), Err(Error::Config(_))));
    let missing = std::path::Path::new("/nonexistent/config.json");
    let err = RunConfig::load(missing).unwrap_err().to_string();
    assert!(err.contains("/nonexistent/config.json"), "{err}");
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let make = |sub: &str| {
        format!(
            r#"{{"schema_version": 1, "experiment": {{"kind": "spectrum"}},
                "complex": {{"grid": {{"dim": 2, "extents": [4, 5], "spacing": [1, 1], "periodic": [true, true]}}}},
                "random_weights": {{"low": 0.5, "high": 2.0}}, "seed": 99, "output_dir": {:?}}}"#,
            dir.path().join(sub)
        )
    };
    run(&RunConfig::from_json(&make("a")).unwrap()).unwrap();
    run(&RunConfig::from_json(&make("b")).unwrap()).unwrap();
    for k in 0..=2 {
        let name = format!("spectrum_k{k}.csv");
        assert_eq!(
            fs::read(dir.path().join("a").join(&name)).unwrap(),
            fs::read(dir.path().join("b").join(&name)).unwrap()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn checks_hold_for_random_stars(seed in any::<u64>(), dim in 1usize..=3) {
        let n = if dim == 3 { 3 } else { 5 };
        let c = torus(dim, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let metric = MetricSpec::random_per_cell(&c, 0.4, 2.5, &mut rng).unwrap();
        prop_assert!(check_partial_relations(&c, &metric, None, 1e-7).unwrap().passed);
        prop_assert!(check_adjacent_degree(&c, &metric, 1e-7).unwrap().passed);
    }

    #[test]
    fn distance_is_a_pseudometric(
        a in prop::collection::vec(0.0f64..5.0, 0..8),
        b in prop::collection::vec(0.0f64..5.0, 0..8),
        c in prop::collection::vec(0.0f64..5.0, 0..8),
    ) {
        let (a, b, c) = (set(&a), set(&b), set(&c));
        let ab = spectra_distance(&a, &b, 4.0);
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, spectra_distance(&b, &a, 4.0));
        prop_assert_eq!(spectra_distance(&a, &a, 4.0), 0.0);
        prop_assert!(ab <= spectra_distance(&a, &c, 4.0) + spectra_distance(&c, &b, 4.0) + 1e-12);
    }

    #[test]
    fn partitions_square_sum_to_one(n in 8usize..20, radius in 2usize..6) {
        let c = torus(2, n);
        let pou = build_gromov_cover(&c, radius).unwrap();
        prop_assert!(pou.normalization_error < 1e-12);
        prop_assert!(pou.gradient_constant.is_finite());
    }
}
