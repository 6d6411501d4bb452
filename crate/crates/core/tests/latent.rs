use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use stardr::latent::{
    coefficient_of_variation, knn_mean_radius, knn_radii, mahalanobis_centroid_distance, mahalanobis_detail, pca_fit,
    AnalysisTable, EmbeddingStats,
};
use stardr::nn::Matrix;
use stardr::rng::StreamRng;

fn m(rows: &[&[f64]]) -> Matrix<f64> {
    Matrix::from_rows(rows).unwrap()
}

fn random(n: usize, d: usize, seed: u64) -> Matrix<f64> {
    let mut rng = StreamRng::new(seed);
    Matrix::from_vec(n, d, (0..n * d).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

#[test]
fn collinear_points_have_one_component() {
    let x = m(&[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0], &[5.0, 5.0]]);
    let p = pca_fit(&x, 2).unwrap();
    let s = 1.0 / 2f64.sqrt();
    assert!((p.components[0][0] - s).abs() < 1e-12 && (p.components[0][1] - s).abs() < 1e-12);
    assert_eq!(p.explained_variance[1], 0.0);
    let mean = m(&[&[2.0, 2.0]]);
    let proj = p.project(&mean).unwrap();
    assert!(proj[0].iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn components_are_orthonormal_and_sorted() {
    for (n, d) in [(30, 5), (6, 40)] {
        let p = pca_fit(&random(n, d, n as u64), 2).unwrap();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        assert!((dot(&p.components[0], &p.components[0]) - 1.0).abs() < 1e-10);
        assert!((dot(&p.components[1], &p.components[1]) - 1.0).abs() < 1e-10);
        assert!(dot(&p.components[0], &p.components[1]).abs() < 1e-10);
        assert!(p.explained_variance[0] >= p.explained_variance[1]);
    }
}

#[test]
fn gram_and_covariance_routes_agree() {
    // 6 x 8 takes the Gram route; the oracle decomposes the 8 x 8 covariance.
    let x = random(6, 8, 99);
    let p = pca_fit(&x, 2).unwrap();
    let xm = DMatrix::from_row_slice(6, 8, x.as_slice());
    let mean = xm.row_mean();
    let xc = DMatrix::from_fn(6, 8, |i, j| xm[(i, j)] - mean[j]);
    let cov = xc.transpose() * &xc / 5.0;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..8).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    for (c, &j) in order.iter().take(2).enumerate() {
        assert!((p.explained_variance[c] - eig.eigenvalues[j]).abs() < 1e-9);
        let v = eig.eigenvectors.column(j);
        let dot: f64 = v.iter().zip(&p.components[c]).map(|(a, b)| a * b).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn projections_preserve_distances_within_the_top_subspace() {
    // With 3 features, the top-2 projection differs from the data only along
    // the third eigenvector of the 3 x 3 covariance.
    let x = random(5, 3, 4);
    let p = pca_fit(&x, 2).unwrap();
    let proj = p.project(&x).unwrap();
    let xm = DMatrix::from_row_slice(5, 3, x.as_slice());
    let mean = xm.row_mean();
    let xc = DMatrix::from_fn(5, 3, |i, j| xm[(i, j)] - mean[j]);
    let eig = SymmetricEigen::new(xc.transpose() * &xc / 4.0);
    let smallest = (0..3)
        .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
        .unwrap();
    let u = eig.eigenvectors.column(smallest);
    for i in 0..5 {
        for j in 0..5 {
            let diff: Vec<f64> = (0..3).map(|k| xm[(i, k)] - xm[(j, k)]).collect();
            let along: f64 = diff.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
            let full: f64 = diff.iter().map(|v| v * v).sum();
            let expected = (full - along * along).max(0.0).sqrt();
            let got = ((proj[i][0] - proj[j][0]).powi(2) + (proj[i][1] - proj[j][1]).powi(2)).sqrt();
            assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
        }
    }
}

#[test]
fn projection_is_invariant_to_row_order() {
    let x = random(20, 4, 5);
    let rev: Vec<usize> = (0..20).rev().collect();
    let a = pca_fit(&x, 2).unwrap();
    let b = pca_fit(&x.select_rows(&rev), 2).unwrap();
    let pa = a.project(&x).unwrap();
    let pb = b.project(&x).unwrap();
    for (u, v) in pa.iter().zip(&pb) {
        assert!((u[0] - v[0]).abs() < 1e-9 && (u[1] - v[1]).abs() < 1e-9);
    }
}

#[test]
fn identical_rows_are_degenerate() {
    assert!(pca_fit(&m(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]]), 2).is_err());
}

fn cloud(n: usize, center: [f64; 2], seed: u64) -> Vec<[f64; 2]> {
    let mut rng = StreamRng::new(seed);
    (0..n)
        .map(|_| {
            [
                center[0] + rng.sample::<f64, _>(StandardNormal),
                center[1] + rng.sample::<f64, _>(StandardNormal),
            ]
        })
        .collect()
}

#[test]
fn mahalanobis_oracle_cases() {
    let a = cloud(20_000, [0.0, 0.0], 1);
    let b = cloud(20_000, [3.0, 0.0], 2);
    let d = mahalanobis_centroid_distance(&a, &b).unwrap();
    assert!((d - 3.0).abs() < 0.05, "{d}");
    assert_eq!(mahalanobis_centroid_distance(&a, &a).unwrap(), 0.0);
}

#[test]
fn mahalanobis_is_symmetric_and_affine_invariant() {
    let mut rng = StreamRng::new(8);
    for t in 0..20 {
        let a = cloud(50, [0.0, 0.0], 100 + t);
        let b = cloud(40, [1.5, -0.5], 200 + t);
        let d = mahalanobis_centroid_distance(&a, &b).unwrap();
        assert!((d - mahalanobis_centroid_distance(&b, &a).unwrap()).abs() < 1e-12);
        let mut mat = [[0.0f64; 2]; 2];
        loop {
            for r in mat.iter_mut() {
                for v in r.iter_mut() {
                    *v = rng.random_range(-2.0..2.0);
                }
            }
            if (mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0]).abs() > 0.2 {
                break;
            }
        }
        let shift = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let f = |p: &[f64; 2]| {
            [
                mat[0][0] * p[0] + mat[0][1] * p[1] + shift[0],
                mat[1][0] * p[0] + mat[1][1] * p[1] + shift[1],
            ]
        };
        let fa: Vec<[f64; 2]> = a.iter().map(f).collect();
        let fb: Vec<[f64; 2]> = b.iter().map(f).collect();
        let df = mahalanobis_centroid_distance(&fa, &fb).unwrap();
        assert!((d - df).abs() < 1e-8, "{d} vs {df}");
    }
}

#[test]
fn singular_pooled_covariance_uses_ridge() {
    let a = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
    let b = [[0.0, 1.0], [1.0, 1.0], [2.0, 1.0]];
    let r = mahalanobis_detail(&a, &b).unwrap();
    assert!(r.ridged);
    assert!(r.distance.is_finite() && r.distance > 1e3);
    assert!(mahalanobis_detail(&a[..1], &b).is_err());
}

#[test]
fn knn_radius_hand_cases() {
    let x = m(&[&[0.0], &[1.0], &[3.0]]);
    assert!((knn_mean_radius(&x, 1).unwrap() - 4.0 / 3.0).abs() < 1e-12);
    assert_eq!(knn_radii(&x, 2).unwrap(), vec![3.0, 2.0, 3.0]);
    let dup = m(&[&[1.0, 1.0], &[1.0, 1.0], &[2.0, 2.0], &[2.0, 2.0]]);
    assert_eq!(knn_mean_radius(&dup, 1).unwrap(), 0.0);
    assert!(knn_mean_radius(&x, 3).is_err());
}

#[test]
fn knn_radius_is_euclidean_invariant_and_homogeneous() {
    let x = random(40, 2, 3);
    let r = knn_mean_radius(&x, 5).unwrap();
    let (c, s) = (0.6f64, 0.8f64);
    let moved = x.map(|v| v);
    let moved = Matrix::from_rows(
        &(0..40)
            .map(|i| {
                let p = moved.row(i);
                vec![c * p[0] - s * p[1] + 7.0, s * p[0] + c * p[1] - 2.0]
            })
            .collect::<Vec<_>>(),
    )
    .unwrap();
    assert!((knn_mean_radius(&moved, 5).unwrap() - r).abs() < 1e-10);
    assert!((knn_mean_radius(&x.map(|v| 2.5 * v), 5).unwrap() - 2.5 * r).abs() < 1e-10);
}

#[test]
fn coefficient_of_variation_cases() {
    assert_eq!(coefficient_of_variation(&[2.0, 2.0, 2.0]).unwrap(), 0.0);
    assert!((coefficient_of_variation(&[1.0, 3.0]).unwrap() - 0.5).abs() < 1e-15);
    let v = [0.3, 1.7, 2.2, 0.9];
    let scaled: Vec<f64> = v.iter().map(|x| x * 4.0).collect();
    assert!((coefficient_of_variation(&v).unwrap() - coefficient_of_variation(&scaled).unwrap()).abs() < 1e-12);
    assert!(coefficient_of_variation(&[0.0, 0.0]).is_err());
}

#[test]
fn embedding_stats_and_table() {
    let s = EmbeddingStats::compute(&random(30, 3, 6), 10).unwrap();
    assert!(s.mean_knn_radius > 0.0 && s.coefficient_of_variation >= 0.0);
    let mut t = AnalysisTable::default();
    t.push("source", "mean_knn_radius", s.mean_knn_radius);
    assert!(t.to_table().starts_with("group,metric,value\nsource,mean_knn_radius,"));
}

#[test]
fn scatter_plot_marks_groups() {
    let svg = stardr::plot::scatter_svg(
        "pca",
        &[
            ("a".into(), cloud(10, [0.0, 0.0], 1)),
            ("b<c".into(), cloud(10, [3.0, 0.0], 2)),
        ],
        &[(0, 1, 2.9)],
    );
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains("b&lt;c") && svg.contains("2.900"));
}
