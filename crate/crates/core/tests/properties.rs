use entquasi::linalg::{kron_vec, CVector, C64};
use entquasi::oracle::partial_transpose;
use entquasi::optimize::{optimize_weights, project_out_kernel, solve_quasi};
use entquasi::sep_eigen::sep_residual;
use entquasi::{
    interference_expansion, partial_collapse, random, reconstruct_quasi, schmidt_decompose, solve_sep_eigen,
    verify_decomposition, Dims, GramSystem, HermitianOperator, Ket, ProductState, QuasiDistribution, Side,
    SolverConfig,
};
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = Dims> {
    (1usize..=3, 1usize..=3).prop_map(|(a, b)| Dims::new(a, b).unwrap())
}

fn mixture(dims: Dims, seed: u64, k: usize) -> QuasiDistribution {
    let mut rng = random::rng(seed);
    let mut qd = QuasiDistribution::new(dims);
    for i in 0..k {
        let w = (i as f64 + 1.0) * if i % 2 == 0 { 0.3 } else { -0.2 };
        qd.push(w, random::product_state(dims, &mut rng)).unwrap();
    }
    qd
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn assemble_is_linear(d in dims(), s1 in any::<u64>(), s2 in any::<u64>(), c in -2.0f64..2.0) {
        let (x, y) = (mixture(d, s1, 3), mixture(d, s2, 4));
        let mut joint = x.clone();
        joint.extend_scaled(&y, c).unwrap();
        let expected = x.assemble().add(&y.assemble().scale(c)).unwrap();
        prop_assert!(joint.assemble().max_abs_diff(&expected).unwrap() < 1e-12);
    }

    #[test]
    fn trace_is_total_weight(d in dims(), s in any::<u64>(), k in 1usize..8) {
        let qd = mixture(d, s, k);
        prop_assert!((qd.assemble().trace() - qd.total_weight()).abs() < 1e-12);
    }

    #[test]
    fn merging_preserves_the_operator(d in dims(), s in any::<u64>()) {
        let mut qd = mixture(d, s, 3);
        let dup = qd.clone();
        qd.extend_scaled(&dup, 0.5).unwrap();
        let merged = qd.merged();
        prop_assert!(merged.len() <= 3);
        prop_assert!(merged.assemble().max_abs_diff(&qd.assemble()).unwrap() < 1e-12);
    }

    #[test]
    fn collapse_gives_expectation(d in dims(), s in any::<u64>()) {
        let mut rng = random::rng(s);
        let l = random::hermitian(d, &mut rng);
        let p = random::product_state(d, &mut rng);
        let g = l.expectation(&p);
        let lb = partial_collapse(&l, Side::B, &p.b).unwrap();
        let la = partial_collapse(&l, Side::A, &p.a).unwrap();
        let a = p.a.amplitudes();
        let b = p.b.amplitudes();
        prop_assert!((a.dotc(&(&lb * a)).re - g).abs() < 1e-12);
        prop_assert!((b.dotc(&(&la * b)).re - g).abs() < 1e-12);
        prop_assert!((l.matrix() * kron_vec(a, b)).dotc(&kron_vec(a, b)).im.abs() < 1e-12);
    }

    #[test]
    fn canonical_phase_ignores_global_phase(n in 1usize..5, s in any::<u64>(), theta in 0.0f64..std::f64::consts::TAU) {
        let k = random::ket(n, &mut random::rng(s));
        let rotated = Ket::new(k.amplitudes() * C64::from_polar(1.7, theta)).unwrap();
        prop_assert!((rotated.amplitudes() - k.amplitudes()).norm() < 1e-12);
        let again = Ket::new(k.amplitudes().clone()).unwrap();
        prop_assert_eq!(again, k);
    }

    #[test]
    fn schmidt_form_rebuilds_the_ket(d in dims(), s in any::<u64>()) {
        let psi = random::ket(d.total(), &mut random::rng(s));
        let sf = schmidt_decompose(&psi, d).unwrap();
        prop_assert!((sf.joint() - psi.amplitudes()).norm() < 1e-12);
        prop_assert!(sf.coefficients.windows(2).all(|w| w[0] >= w[1]));
        let norm: f64 = sf.coefficients.iter().map(|c| c * c).sum();
        prop_assert!((norm - 1.0).abs() < 1e-12);
        prop_assert_eq!(sf.rank, sf.coefficients.len());
    }

    #[test]
    fn interference_terms_rebuild_the_coherence(s in any::<u64>()) {
        let d = Dims::new(2, 3).unwrap();
        let mut rng = random::rng(s);
        let u = random::product_state(d, &mut rng);
        // Orthogonal to u on both factors, as Schmidt products are.
        let orth = |k: &Ket, dim: usize, rng: &mut random::Rng64| {
            let mut w = random::ket(dim, rng).amplitudes().clone();
            w -= k.amplitudes() * k.amplitudes().dotc(&w);
            Ket::new(w).unwrap()
        };
        let v = ProductState::new(orth(&u.a, 2, &mut rng), orth(&u.b, 3, &mut rng));
        let qd = interference_expansion(&u, &v).unwrap();
        prop_assert_eq!(qd.len(), 4);
        let (ju, jv) = (u.joint(), v.joint());
        let target = &ju * jv.adjoint() + &jv * ju.adjoint();
        prop_assert!((qd.assemble().matrix() - target).norm() < 1e-12);
    }

    #[test]
    fn reconstruction_round_trips(d in dims(), s in any::<u64>(), rank in 1usize..4) {
        let rho = random::density_of_rank(d, rank, &mut random::rng(s));
        let qd = reconstruct_quasi(&rho).unwrap();
        prop_assert!(verify_decomposition(&rho, &qd).unwrap() < 1e-10);
        prop_assert!((qd.total_weight() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn partial_transpose_is_an_involution(d in dims(), s in any::<u64>()) {
        let rho = random::density(d, &mut random::rng(s));
        let twice = partial_transpose(&partial_transpose(rho.matrix(), d), d);
        prop_assert_eq!(&twice, rho.matrix());
    }

    #[test]
    fn gram_of_random_products_is_psd(s in any::<u64>(), n in 1usize..10) {
        let d = Dims::new(2, 3).unwrap();
        let mut rng = random::rng(s);
        let pairs: Vec<_> = (0..n).map(|k| (k as f64 * 0.1, random::product_state(d, &mut rng))).collect();
        let sys = solve_quasi(&GramSystem::from_states(&pairs).unwrap()).unwrap();
        prop_assert!(sys.gram_eigenvalues.iter().all(|&e| e >= -1e-10));
        prop_assert!((0..n).all(|k| (sys.gram[(k, k)] - 1.0).abs() < 1e-12));
        prop_assert_eq!(&sys.gram, &sys.gram.transpose());
        let opt = optimize_weights(&sys);
        let p = opt.p_opt.unwrap();
        prop_assert!(opt.kernel.iter().all(|k| k.dot(&p).abs() < 1e-10));
        prop_assert!((project_out_kernel(&p, &opt.kernel) - &p).amax() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solver_output_solves_the_equations(d in dims(), s in any::<u64>()) {
        let l: HermitianOperator = random::hermitian(d, &mut random::rng(s));
        let cfg = SolverConfig { restarts: 20, ..SolverConfig::default() };
        let set = solve_sep_eigen(&l, &cfg).unwrap();
        prop_assert!(!set.solutions.is_empty());
        for sol in &set.solutions {
            let (g, res) = sep_residual(&l, &sol.state);
            prop_assert!(res <= 1e-8);
            prop_assert!((g - sol.g).abs() < 1e-9);
            prop_assert!((l.expectation(&sol.state) - sol.g).abs() < 1e-9);
        }
        let gmax = set.max_g().unwrap();
        let gmin = set.min_g().unwrap();
        // Extremes of the expectation over product states bound every random product.
        let mut rng = random::rng(s ^ 1);
        for _ in 0..50 {
            let e = l.expectation(&random::product_state(d, &mut rng));
            prop_assert!(e <= gmax + 1e-9 && e >= gmin - 1e-9);
        }
    }
}

#[test]
fn kron_matches_index_convention() {
    let a = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(2.0, 0.0)]);
    let b = CVector::from_vec(vec![C64::new(3.0, 0.0), C64::new(4.0, 0.0), C64::new(5.0, 0.0)]);
    let v = kron_vec(&a, &b);
    for i in 0..2 {
        for j in 0..3 {
            assert_eq!(v[i * 3 + j], a[i] * b[j]);
        }
    }
}
