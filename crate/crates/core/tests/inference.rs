use misinfo_core::inference::{
    build_knn, classify, fabp, homophily_bound, knn_indices, priors_from_labels, write_beliefs_csv,
    Edge, EdgeWeight, FabpOptions, KnnGraph,
};
use misinfo_core::linalg::DenseMatrix;
use misinfo_core::seed::rng_for;
use misinfo_core::Label;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0))
}

fn dense_solve(g: &KnnGraph, priors: &[f64], h: f64) -> Vec<f64> {
    let n = g.n();
    let denom = 1.0 - 4.0 * h * h;
    let (a, c) = (4.0 * h * h / denom, 2.0 * h / denom);
    let mut m = DMatrix::<f64>::identity(n, n);
    for e in g.edges() {
        m[(e.u, e.v)] -= c * e.weight;
        m[(e.v, e.u)] -= c * e.weight;
        m[(e.u, e.u)] += a * e.weight;
        m[(e.v, e.v)] += a * e.weight;
    }
    m.lu()
        .solve(&DVector::from_column_slice(priors))
        .unwrap()
        .as_slice()
        .to_vec()
}

fn unguarded() -> FabpOptions {
    FabpOptions {
        guard_convergence: false,
        ..Default::default()
    }
}

fn random_priors(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| match rng.random_range(0..4) {
            0 => 0.05,
            1 => -0.05,
            _ => 0.0,
        })
        .collect()
}

#[test]
fn matches_dense_solve_on_random_graphs() {
    for seed in 0..30 {
        let mut rng = rng_for(seed, 0);
        let n = rng.random_range(5..=60);
        let k = rng.random_range(1..=10usize.min(n - 1));
        let weighting = if seed % 2 == 0 {
            EdgeWeight::Inverse
        } else {
            EdgeWeight::Gaussian
        };
        let g = build_knn(&points(&mut rng, n, 3), k, weighting).unwrap();
        let priors = random_priors(&mut rng, n);
        let got = fabp(&g, &priors, &unguarded()).unwrap();
        let want = dense_solve(&g, &priors, 0.05);
        let err = got
            .beliefs
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-8, "seed {seed}: {err}");
        assert!(got.converged);
    }
}

#[test]
fn guard_only_shrinks_when_needed() {
    let mut rng = rng_for(1, 0);
    let g = build_knn(&points(&mut rng, 40, 2), 3, EdgeWeight::Gaussian).unwrap();
    let max_deg = g.degrees().into_iter().fold(0.0, f64::max);
    let priors = random_priors(&mut rng, 40);
    let s = fabp(&g, &priors, &FabpOptions::default()).unwrap();
    if homophily_bound(max_deg) > 0.05 / 0.9 {
        assert_eq!(s.homophily, 0.05);
    } else {
        assert!(s.homophily < homophily_bound(max_deg));
    }
    let want = dense_solve(&g, &priors, s.homophily);
    assert!(s
        .beliefs
        .iter()
        .zip(&want)
        .all(|(a, b)| (a - b).abs() <= 1e-8));
}

#[test]
fn isolated_nodes_keep_their_prior() {
    let g = KnnGraph::from_edges(
        4,
        1,
        [Edge {
            u: 0,
            v: 1,
            weight: 0.5,
        }],
    )
    .unwrap();
    let s = fabp(&g, &[0.05, 0.0, -0.05, 0.0], &unguarded()).unwrap();
    assert_eq!(s.beliefs[2], -0.05);
    assert_eq!(s.beliefs[3], 0.0);
    assert!(s.beliefs[1] > 0.0);
}

#[test]
fn permutation_and_sign_equivariance() {
    let mut rng = rng_for(2, 0);
    let x = points(&mut rng, 30, 2);
    let priors = random_priors(&mut rng, 30);
    let base = fabp(
        &build_knn(&x, 4, EdgeWeight::Inverse).unwrap(),
        &priors,
        &unguarded(),
    )
    .unwrap();

    let perm: Vec<usize> = (0..30).rev().collect();
    let px = x.select_rows(&perm);
    let pp: Vec<f64> = perm.iter().map(|&i| priors[i]).collect();
    let permuted = fabp(
        &build_knn(&px, 4, EdgeWeight::Inverse).unwrap(),
        &pp,
        &unguarded(),
    )
    .unwrap();
    for (slot, &i) in perm.iter().enumerate() {
        assert!((permuted.beliefs[slot] - base.beliefs[i]).abs() <= 1e-10);
    }

    let g = build_knn(&x, 4, EdgeWeight::Inverse).unwrap();
    let neg: Vec<f64> = priors.iter().map(|p| -p).collect();
    let flipped = fabp(&g, &neg, &unguarded()).unwrap();
    assert!(flipped
        .beliefs
        .iter()
        .zip(&base.beliefs)
        .all(|(a, b)| (a + b).abs() <= 1e-12));
    let doubled: Vec<f64> = priors.iter().map(|p| 2.0 * p).collect();
    let scaled = fabp(&g, &doubled, &unguarded()).unwrap();
    assert!(scaled
        .beliefs
        .iter()
        .zip(&base.beliefs)
        .all(|(a, b)| (a - 2.0 * b).abs() <= 1e-11));
}

#[test]
fn knn_matches_brute_force() {
    for seed in 0..20 {
        let mut rng = rng_for(seed, 7);
        let n = rng.random_range(3..40);
        // a coarse grid makes distance ties common
        let x = DenseMatrix::from_fn(n, 2, |_, _| rng.random_range(0..4) as f64);
        let k = rng.random_range(1..n);
        let got = knn_indices(&x, k).unwrap();
        for i in 0..n {
            let mut all: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d =
                        ((x[(i, 0)] - x[(j, 0)]).powi(2) + (x[(i, 1)] - x[(j, 1)]).powi(2)).sqrt();
                    (d, j)
                })
                .collect();
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let want: Vec<usize> = all[..k].iter().map(|p| p.1).collect();
            let have: Vec<usize> = got[i].iter().map(|p| p.0).collect();
            assert_eq!(have, want);
        }
        let g = build_knn(&x, k, EdgeWeight::Inverse).unwrap();
        for e in g.edges() {
            assert!(e.u < e.v);
            let linked = got[e.u].iter().any(|p| p.0 == e.v) || got[e.v].iter().any(|p| p.0 == e.u);
            assert!(linked);
        }
        let directed: usize = (0..n).map(|i| got[i].len()).sum();
        assert!(g.edges().len() <= directed && g.edges().len() * 2 >= directed);
    }
}

#[test]
fn gaussian_weights_use_median_distance() {
    let x = DenseMatrix::from_rows(&[[0.0], [1.0], [3.0]]);
    // pairwise distances 1, 2, 3: median 2
    let g = build_knn(&x, 1, EdgeWeight::Gaussian).unwrap();
    assert_eq!(g.edges().len(), 2);
    assert!((g.edges()[0].weight - (-0.25f64).exp()).abs() <= 1e-15);
    assert!((g.edges()[1].weight - (-1.0f64).exp()).abs() <= 1e-15);
}

#[test]
fn beliefs_csv_layout() {
    let g = KnnGraph::from_edges(
        2,
        1,
        [Edge {
            u: 0,
            v: 1,
            weight: 1.0,
        }],
    )
    .unwrap();
    let priors = priors_from_labels(&[Some(Label::Fake), None], 0.05);
    let s = fabp(&g, &priors, &unguarded()).unwrap();
    let cls = classify(&s.beliefs);
    assert_eq!(cls.labels, vec![Label::Fake, Label::Fake]);
    let mut buf = Vec::new();
    write_beliefs_csv(&["a".into(), "b".into()], &s, &cls.labels, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "article_id,belief,predicted_label,was_labeled");
    assert!(lines[1].starts_with("a,-") && lines[1].ends_with(",fake,true"));
    assert!(lines[2].ends_with(",fake,false"));
}
