use asttrans_core::search::{
    build_sim_matrix, combine, concat_embeddings, cosine_similarity, pca_reduce, rank, rank_all, CombineConfig,
    EmbeddingSet, EmbeddingSource, SimKind, SimMatrix,
};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_set(rng: &mut ChaCha8Rng, prefix: &str, n: usize, dim: usize) -> EmbeddingSet {
    let v = Array2::from_shape_fn((n, dim), |_| rng.gen_range(-1.0..1.0));
    EmbeddingSet::new(
        (0..n).map(|i| format!("{prefix}{i:03}")).collect(),
        v,
        EmbeddingSource::ExternalOriginal,
    )
    .unwrap()
}

#[test]
fn cosine_long_form() {
    // dot = 4 + 10 + 18 = 32, |u|^2 = 14, |v|^2 = 77, 32 / sqrt(1078)
    let c = cosine_similarity(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
    assert!((c - 0.974631846).abs() < 1e-9);
}

#[test]
fn matrix_matches_scalar_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let q = random_set(&mut rng, "q", 3, 7);
    let c = random_set(&mut rng, "c", 4, 7);
    let m = build_sim_matrix(&q, &c, SimKind::Original).unwrap();
    assert_eq!(m.values.dim(), (3, 4));
    for i in 0..3 {
        for j in 0..4 {
            let u = q.row(i).to_vec();
            let v = c.row(j).to_vec();
            let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
            let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!((m.values[[i, j]] - dot / (nu * nv)).abs() < 1e-12);
        }
    }
    let one = random_set(&mut rng, "x", 1, 5);
    assert_eq!(
        build_sim_matrix(&one, &one, SimKind::Original).unwrap().values[[0, 0]],
        1.0
    );
    let other = random_set(&mut rng, "y", 1, 6);
    assert!(build_sim_matrix(&one, &other, SimKind::Original).is_err());
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, kind: SimKind) -> SimMatrix {
    SimMatrix {
        query_ids: (0..rows).map(|i| format!("q{i}")).collect(),
        candidate_ids: (0..cols).map(|i| format!("c{i}")).collect(),
        values: Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0)),
        kind,
        zero_vector_pairs: 0,
    }
}

#[test]
fn zero_weight_ranking_equals_original() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let org = random_matrix(&mut rng, 6, 9, SimKind::Original);
    let aug = random_matrix(&mut rng, 6, 9, SimKind::Augmented);
    let com = combine(&org, &aug, CombineConfig::new(0.0).unwrap()).unwrap();
    assert_eq!(rank_all(&com), rank_all(&org));
}

#[test]
fn concatenation_differs_from_matrix_fusion() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let qo = random_set(&mut rng, "q", 1, 4);
    let co = random_set(&mut rng, "c", 3, 4);
    let qa = random_set(&mut rng, "q", 1, 3);
    let ca = random_set(&mut rng, "c", 3, 3);
    let fused = combine(
        &build_sim_matrix(&qo, &co, SimKind::Original).unwrap(),
        &build_sim_matrix(&qa, &ca, SimKind::Augmented).unwrap(),
        CombineConfig::default(),
    )
    .unwrap();
    let joined = build_sim_matrix(
        &concat_embeddings(&qo, &qa).unwrap(),
        &concat_embeddings(&co, &ca).unwrap(),
        SimKind::Combined,
    )
    .unwrap();
    assert!((fused.values[[0, 0]] - joined.values[[0, 0]]).abs() > 1e-6);
}

#[test]
fn embedding_file_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = random_set(&mut rng, "id", 5, 3);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("v.txt");
    s.write(&p).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.starts_with("5 3\n"));
    assert_eq!(EmbeddingSet::read(&p, EmbeddingSource::ExternalOriginal).unwrap(), s);
}

/// Leading eigenpairs by power iteration with deflation.
fn power_iteration(cov: &Array2<f64>, count: usize) -> Vec<(f64, Array1<f64>)> {
    let d = cov.nrows();
    let mut m = cov.clone();
    let mut out = Vec::new();
    for k in 0..count {
        let mut v = Array1::from_shape_fn(d, |i| 1.0 + ((i * 7 + k * 13) % 11) as f64 / 11.0);
        v /= v.dot(&v).sqrt();
        let mut lambda = 0.0;
        for _ in 0..2000 {
            let w = m.dot(&v);
            let norm = w.dot(&w).sqrt();
            let next = &w / norm;
            let delta = (&next - &v).mapv(f64::abs).sum();
            v = next;
            lambda = norm;
            if delta < 1e-14 {
                break;
            }
        }
        let outer = v
            .view()
            .insert_axis(ndarray::Axis(1))
            .dot(&v.view().insert_axis(ndarray::Axis(0)));
        m = &m - &(outer * lambda);
        out.push((lambda, v));
    }
    out
}

#[test]
fn pca_agrees_with_power_iteration() {
    let (n, d, k) = (300, 768, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    // Planted spectrum: 20 strong directions with well separated scales plus
    // small isotropic noise.
    let basis = Array2::from_shape_fn((k, d), |_| rng.gen_range(-1.0..1.0));
    let mut data = Array2::from_shape_fn((n, d), |_| rng.gen_range(-0.01..0.01));
    for i in 0..n {
        for j in 0..k {
            let scale = 10.0 * 0.8f64.powi(j as i32);
            let z: f64 = rng.gen_range(-1.0..1.0) * scale;
            data.row_mut(i).scaled_add(z, &basis.row(j));
        }
    }
    let set = EmbeddingSet::new(
        (0..n).map(|i| format!("c{i}")).collect(),
        data.clone(),
        EmbeddingSource::ExternalOriginal,
    )
    .unwrap();
    let (reduced, model) = pca_reduce(&set, k).unwrap();
    assert_eq!(reduced.dim(), k);
    for w in model.explained_variance_ratio.to_vec().windows(2) {
        assert!(w[0] >= w[1]);
    }

    let mean = data.mean_axis(ndarray::Axis(0)).unwrap();
    let centered = &data - &mean;
    let cov = centered.t().dot(&centered) / (n - 1) as f64;
    let oracle = power_iteration(&cov, k);
    for (j, (lambda, v)) in oracle.iter().enumerate() {
        let got = model.explained_variance[j];
        assert!(
            (got - lambda).abs() <= 1e-6 * lambda,
            "eigenvalue {j}: {got} vs {lambda}"
        );
        let comp = model.components.row(j);
        let sign = if comp.dot(v) < 0.0 { -1.0 } else { 1.0 };
        let diff = (&comp.mapv(|x| x * sign) - v)
            .mapv(f64::abs)
            .fold(0.0f64, |a, &b| a.max(b));
        assert!(diff < 1e-6, "component {j} differs by {diff}");
    }
}

#[test]
fn full_dimension_pca_keeps_rankings() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cands = random_set(&mut rng, "c", 40, 16);
    let queries = random_set(&mut rng, "q", 6, 16);
    let (rc, model) = pca_reduce(&cands, 16).unwrap();
    let rq = model.transform(&queries).unwrap();
    let before = build_sim_matrix(&queries, &cands, SimKind::Original).unwrap();
    let after = build_sim_matrix(&rq, &rc, SimKind::Original).unwrap();
    for (a, b) in before.values.iter().zip(after.values.iter()) {
        assert!((a - b).abs() < 1e-8);
    }
    let order = |m: &SimMatrix| {
        rank_all(m)
            .into_iter()
            .map(|r| r.candidates().to_vec())
            .collect::<Vec<_>>()
    };
    assert_eq!(order(&before), order(&after));
}

proptest! {
    #[test]
    fn combine_is_convex_and_monotone(seed in any::<u64>(), w in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let org = random_matrix(&mut rng, 3, 5, SimKind::Original);
        let mut aug = random_matrix(&mut rng, 3, 5, SimKind::Augmented);
        aug.values[[0, 1]] = aug.values[[0, 0]];
        let com = combine(&org, &aug, CombineConfig::new(w).unwrap()).unwrap();
        for ((c, o), a) in com.values.iter().zip(org.values.iter()).zip(aug.values.iter()) {
            prop_assert!(*c >= o.min(*a) - 1e-15 && *c <= o.max(*a) + 1e-15);
        }
        let org_first = org.values[[0, 0]] > org.values[[0, 1]];
        let com_first = com.values[[0, 0]] > com.values[[0, 1]];
        if org.values[[0, 0]] != org.values[[0, 1]] {
            prop_assert_eq!(org_first, com_first);
        }
    }

    #[test]
    fn ranking_ignores_positive_scaling(seed in any::<u64>(), s in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_matrix(&mut rng, 2, 6, SimKind::Original);
        let mut scaled = m.clone();
        scaled.values.mapv_inplace(|x| x * s);
        for q in &m.query_ids {
            let (a, b) = (rank(&m, q).unwrap(), rank(&scaled, q).unwrap());
            prop_assert_eq!(a.candidates(), b.candidates());
        }
    }

    #[test]
    fn ranking_is_a_permutation(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = random_matrix(&mut rng, 1, 8, SimKind::Original);
        m.values[[0, 3]] = m.values[[0, 5]];
        let r = rank(&m, "q0").unwrap();
        let mut sorted = r.candidates().to_vec();
        sorted.sort();
        let mut ids = m.candidate_ids.clone();
        ids.sort();
        prop_assert_eq!(sorted, ids);
        for w in r.scores().windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        prop_assert!(r.rank_of("c3").unwrap() < r.rank_of("c5").unwrap());
    }
}
