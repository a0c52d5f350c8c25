use hetsim_core::nalgebra::{DMatrix, DVector, SymmetricEigen};
use hetsim_core::quality::{ordering_quality, ordering_quality_brute_force};
use hetsim_core::rng::rng_for;
use hetsim_core::rsvd::{randomized_eig, EigParams};
use hetsim_core::synth::{geometric_ground_truth, layered_points_graph, LayeredGraphSpec};
use hetsim_core::{default_weights, solve_dense, SolverConfig, TypeId};
use rand::Rng;
use rand_distr::StandardNormal;

fn planted(n: usize, spectrum: &[f64], seed: u64) -> DMatrix<f64> {
    let mut rng = rng_for(seed, &[99]);
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let q = g.qr().q();
    &q * DMatrix::from_diagonal(&DVector::from_column_slice(spectrum)) * q.transpose()
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.abs().max()
}

#[test]
fn planted_spectrum_error_is_near_optimal() {
    let n = 60;
    for seed in 0..20u64 {
        let mut rng = rng_for(seed, &[7]);
        let spectrum: Vec<f64> = (0..n)
            .map(|i| {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                sign * 0.8f64.powi(i as i32)
            })
            .collect();
        let a = planted(n, &spectrum, seed);
        let k = 3 + (seed as usize % 8);
        let params = EigParams {
            rank: k,
            oversampling: 10,
            power_iters: 2,
        };
        let e = randomized_eig(&a, params, &mut rng_for(seed, &[8])).unwrap();
        let err = spectral_norm(&(&a - e.to_dense()));
        assert!(err <= 2.0 * spectrum[k].abs(), "seed {seed}, k {k}: {err}");
        assert!((e.u.transpose() * &e.u - DMatrix::identity(k, k)).abs().max() < 1e-10);
    }
}

#[test]
fn optimized_q_matches_brute_force_on_random_matrices() {
    let mut rng = rng_for(1, &[]);
    for _ in 0..50 {
        let s = DMatrix::from_fn(9, 9, |_, _| (rng.random::<f64>() * 4.0).floor());
        let h = DMatrix::from_fn(9, 9, |_, _| rng.random::<f64>());
        assert_eq!(
            ordering_quality(&s, &h).unwrap(),
            ordering_quality_brute_force(&s, &h).unwrap()
        );
    }
}

#[test]
fn layered_similarity_beats_chance() {
    let spec = LayeredGraphSpec {
        counts: vec![40, 40, 40],
        radius: 0.3,
        seed: 4,
    };
    let (net, cloud) = layered_points_graph(&spec).unwrap();
    let sol = solve_dense(&net, &default_weights(&net), &SolverConfig::default()).unwrap();
    let truth = geometric_ground_truth(&cloud.layers[0]).unwrap();
    let q = ordering_quality(&truth, sol.similarity.block(TypeId(0))).unwrap();
    // a constant estimate scores 0; perfect agreement scores about 1/2
    assert!(q > 0.3, "Q = {q}");
    assert!(q <= ordering_quality(&truth, &truth).unwrap());
}
