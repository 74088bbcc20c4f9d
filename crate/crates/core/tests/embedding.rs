use bearingmap::embed::*;
use bearingmap::similarity::{distance_matrix_values, DistanceMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn pairwise(points: &[[f64; 2]]) -> DistanceMatrix {
    DistanceMatrix::from_fn(points.len(), |i, j| {
        (points[i][0] - points[j][0]).hypot(points[i][1] - points[j][1])
    })
    .unwrap()
}

/// RMS residual after the best rigid motion (reflection allowed) of `a` onto `b`.
fn procrustes_rms(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let n = a.len() as f64;
    let centre = |p: &[[f64; 2]]| {
        let c = p
            .iter()
            .fold([0.0; 2], |m, q| [m[0] + q[0] / n, m[1] + q[1] / n]);
        p.iter()
            .map(|q| [q[0] - c[0], q[1] - c[1]])
            .collect::<Vec<_>>()
    };
    let (a, b) = (centre(a), centre(b));
    let mut best = f64::INFINITY;
    for flip in [1.0, -1.0] {
        let a: Vec<[f64; 2]> = a.iter().map(|p| [p[0], flip * p[1]]).collect();
        let (mut s, mut c) = (0.0, 0.0);
        for (p, q) in a.iter().zip(&b) {
            c += p[0] * q[0] + p[1] * q[1];
            s += p[0] * q[1] - p[1] * q[0];
        }
        let (sin, cos) = s.atan2(c).sin_cos();
        let ss: f64 = a
            .iter()
            .zip(&b)
            .map(|(p, q)| {
                (cos * p[0] - sin * p[1] - q[0]).powi(2) + (sin * p[0] + cos * p[1] - q[1]).powi(2)
            })
            .sum();
        best = best.min((ss / n).sqrt());
    }
    best
}

#[test]
fn mds_recovers_planar_configurations() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pts: Vec<[f64; 2]> = (0..30)
        .map(|_| [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)])
        .collect();
    let e = mds_embed(&pairwise(&pts)).unwrap();
    assert!(procrustes_rms(&e.points, &pts) < 1e-6);
    match e.diagnostics {
        Diagnostics::Mds {
            eigenvalues,
            ref solver,
            ..
        } => {
            assert!(eigenvalues[0] >= eigenvalues[1]);
            assert_eq!(solver, "jacobi");
        }
        _ => panic!("wrong diagnostics"),
    }
}

#[test]
fn large_inputs_use_the_iterative_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pts: Vec<[f64; 2]> = (0..400)
        .map(|_| [rng.gen_range(-5.0..5.0), rng.gen_range(-1.0..1.0)])
        .collect();
    let e = mds_embed(&pairwise(&pts)).unwrap();
    assert!(matches!(e.diagnostics, Diagnostics::Mds { ref solver, .. } if solver == "subspace"));
    assert!(procrustes_rms(&e.points, &pts) < 1e-6);
}

#[test]
fn mds_projects_higher_dimensions_onto_the_leading_plane() {
    // Anisotropic cloud in 5-D: the plane spanned by the two widest axes.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let widths = [10.0, 5.0, 0.1, 0.1, 0.1];
    let rows: Vec<Vec<f64>> = (0..60)
        .map(|_| {
            widths
                .iter()
                .map(|w| w * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let e = mds_embed(&distance_matrix_values(&refs).unwrap()).unwrap();
    let truth: Vec<[f64; 2]> = rows.iter().map(|r| [r[0], r[1]]).collect();
    let spread = (rows.iter().map(|r| r[0] * r[0] + r[1] * r[1]).sum::<f64>() / 60.0).sqrt();
    assert!(procrustes_rms(&e.points, &truth) < 0.05 * spread);
}

#[test]
fn tsne_separates_gaussian_clusters() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let centres = [
        [0.0; 6],
        [8.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 8.0, 0.0, 0.0, 0.0, 0.0],
    ];
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (label, c) in centres.iter().enumerate() {
        for _ in 0..30 {
            rows.push(
                c.iter()
                    .map(|m| m + rng.sample::<f64, _>(StandardNormal))
                    .collect::<Vec<f64>>(),
            );
            labels.push(label);
        }
    }
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let d = distance_matrix_values(&refs).unwrap();
    let e = tsne_embed(&d, &TsneConfig::with_perplexity(10.0)).unwrap();

    let centroid = |l: usize| {
        let pts: Vec<&[f64; 2]> = e
            .points
            .iter()
            .zip(&labels)
            .filter(|(_, &k)| k == l)
            .map(|(p, _)| p)
            .collect();
        let n = pts.len() as f64;
        pts.iter()
            .fold([0.0; 2], |m, p| [m[0] + p[0] / n, m[1] + p[1] / n])
    };
    let cs: Vec<[f64; 2]> = (0..3).map(centroid).collect();
    let correct = e
        .points
        .iter()
        .zip(&labels)
        .filter(|(p, &l)| {
            let near = (0..3).min_by(|&a, &b| {
                let da = (p[0] - cs[a][0]).hypot(p[1] - cs[a][1]);
                let db = (p[0] - cs[b][0]).hypot(p[1] - cs[b][1]);
                da.total_cmp(&db)
            });
            near == Some(l)
        })
        .count();
    assert!(correct as f64 / 90.0 >= 0.95);
    match e.diagnostics {
        Diagnostics::Tsne {
            kl_after_exaggeration,
            kl_final,
            ..
        } => assert!(kl_final <= kl_after_exaggeration),
        _ => panic!("wrong diagnostics"),
    }
}

#[test]
fn embedding_csv_and_diagnostics() {
    let pts = [[0.0, 0.0], [3.0, 0.0], [0.0, 4.0]];
    let e = mds_embed(&pairwise(&pts)).unwrap();
    let t0 = chrono::NaiveDate::from_ymd_opt(2004, 2, 12)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let ts: Vec<_> = (0..3).map(|i| t0 + chrono::TimeDelta::minutes(i)).collect();
    let mut buf = Vec::new();
    e.write_csv(&mut buf, &ts).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("index,timestamp,x,y,method"));
    assert!(text.lines().nth(2).unwrap().ends_with(",mds"));
    assert!(e.write_csv(Vec::new(), &ts[..2]).is_err());
    let json: serde_json::Value = serde_json::from_str(&e.diagnostics_json().unwrap()).unwrap();
    assert_eq!(json["method"], "mds");
}
