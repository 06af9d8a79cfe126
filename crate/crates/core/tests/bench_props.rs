use idfom::bench::{self, random_qp, RandomQpConfig, ScalingConfig, SensitivityConfig};
use idfom::linalg::{self, Bounds, DenseMatrix};
use idfom::outer::{Recovery, Variant};
use idfom::{constants, normalize, QpProblem};

#[test]
fn generator_is_deterministic_and_slater() {
    let cfg = RandomQpConfig::new(20, 30, 42);
    let a = random_qp(&cfg).unwrap();
    assert_eq!(a, random_qp(&cfg).unwrap());
    assert_ne!(a, random_qp(&RandomQpConfig::new(20, 30, 43)).unwrap());
    let np = normalize(&a).unwrap();
    let gu = np.constraint_value(&np.bounds.center());
    assert!(gu.iter().all(|v| *v <= -0.1 + 1e-12));
    let c = constants(&np).unwrap();
    assert!((c.sigma_f - 1.0).abs() < 1e-9);
    assert!((c.l_f - 10.0).abs() < 1e-8);
}

#[test]
fn scalar_kkt_example() {
    let p = QpProblem::with_inequalities(
        DenseMatrix::diag(&[1.0]),
        vec![0.0],
        Bounds::uniform(1, -10.0, 10.0).unwrap(),
        DenseMatrix::diag(&[-1.0]),
        vec![1.0],
    )
    .unwrap();
    let s = bench::oracle_solve(&normalize(&p).unwrap()).unwrap();
    assert!((s.u_star[0] - 1.0).abs() < 1e-12);
    assert!((s.f_star - 0.5).abs() < 1e-12);
    assert!((s.x_star[0] - 1.0).abs() < 1e-12);
}

#[test]
fn oracle_kkt_and_complementarity() {
    for seed in 0..30 {
        let np = normalize(&random_qp(&RandomQpConfig::new(6, 5, seed)).unwrap()).unwrap();
        let s = bench::oracle_solve(&np).unwrap();
        assert!(s.kkt_residual <= 1e-9, "seed {seed}: {:e}", s.kkt_residual);
        let g = np.constraint_value(&s.u_star);
        for (x, gi) in s.x_star.iter().zip(&g) {
            assert!(*x >= 0.0);
            assert!((x * gi).abs() <= 1e-9);
            assert!(*gi <= 1e-9);
        }
    }
}

#[test]
fn oracle_refuses_large_instances() {
    let np = normalize(&random_qp(&RandomQpConfig::new(30, 40, 0)).unwrap()).unwrap();
    let err = bench::oracle_solve(&np).unwrap_err();
    assert!(err.to_string().contains("use high-accuracy reference mode"));
}

#[test]
fn reference_agrees_with_oracle() {
    for seed in 0..10 {
        let np = normalize(&random_qp(&RandomQpConfig::new(7, 5, seed)).unwrap()).unwrap();
        let c = constants(&np).unwrap();
        let o = bench::oracle_solve(&np).unwrap();
        let r = bench::reference_solve(&np, &c).unwrap();
        assert!((o.f_star - r.f_star).abs() <= 1e-8);
        assert!(linalg::norm_inf(&o.u_star.iter().zip(&r.u_star).map(|(a, b)| a - b).collect::<Vec<_>>()) <= 1e-6);
    }
}

#[test]
fn sensitivity_csv_schema() {
    let rows = bench::run_sensitivity(&SensitivityConfig {
        qp: RandomQpConfig::new(8, 10, 1),
        eps: 1e-2,
        deltas: vec![1e-3, 1e-5],
        iterations: 25,
    })
    .unwrap();
    assert_eq!(rows.len(), 2 * 2 * 25);
    let mut buf = Vec::new();
    bench::write_sensitivity_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("variant,delta,k,subopt,infeas\n"));
    assert_eq!(text.lines().count(), rows.len() + 1);
    assert!(rows.iter().all(|r| r.subopt.is_finite() && r.infeas >= 0.0));
}

fn scaling(dims: Vec<usize>, trials: usize, jobs: usize) -> Vec<bench::ScalingRow> {
    let mut cfg = ScalingConfig::new(dims, trials, 1e-2);
    cfg.jobs = jobs;
    bench::run_scaling(&cfg).unwrap()
}

#[test]
fn scaling_rows_are_ordered_and_complete() {
    let a = scaling(vec![5, 8], 3, 2);
    assert_eq!(a.len(), 2 * 3 * 4);
    let keys: Vec<(usize, u64)> = a.iter().map(|r| (r.n, r.seed)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    for cell in a.chunks(4) {
        let pairs: Vec<_> = cell.iter().map(|r| (r.variant, r.recovery)).collect();
        assert_eq!(
            pairs,
            vec![
                (Variant::Idgm, Recovery::LastIterate),
                (Variant::Idgm, Recovery::Average),
                (Variant::Idfgm, Recovery::LastIterate),
                (Variant::Idfgm, Recovery::Average),
            ]
        );
        assert_eq!(cell[0].p, (1.5 * cell[0].n as f64).ceil() as usize);
    }
    // counts do not depend on the worker count
    let b = scaling(vec![5, 8], 3, 1);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!((x.outer_iters, x.total_inner_iters), (y.outer_iters, y.total_inner_iters));
    }
}

#[test]
fn majority_properties_on_small_suite() {
    let rows = scaling(vec![10, 20, 30], 5, 1);
    let (mut fast_wins, mut fast_total) = (0, 0);
    let (mut last_wins, mut last_total) = (0, 0);
    for cell in rows.chunks(4) {
        assert!(cell.iter().all(|r| r.converged));
        for (g, f) in [(0, 2), (1, 3)] {
            fast_total += 1;
            if cell[f].outer_iters <= cell[g].outer_iters {
                fast_wins += 1;
            }
        }
        for (l, a) in [(0, 1), (2, 3)] {
            last_total += 1;
            if cell[l].outer_iters <= cell[a].outer_iters {
                last_wins += 1;
            }
        }
    }
    assert!(fast_wins as f64 >= 0.8 * fast_total as f64, "{fast_wins}/{fast_total}");
    assert!(last_wins as f64 >= 0.6 * last_total as f64, "{last_wins}/{last_total}");
}
