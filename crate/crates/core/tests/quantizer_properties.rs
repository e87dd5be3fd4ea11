use proptest::prelude::*;
use vqp_core::driver::frequency_profile;
use vqp_core::quantizer::{
    empirical_distortion, grid_codebook, kmeans, Codebook, KMeansOptions, MapKind, Method, T2Map,
};
use vqp_core::rng::standard_normals;

fn sample(seed: u64, n: u64, m: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| standard_normals(seed, i, m)).collect()
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut k = 0;
    while k < order.len() {
        let mut end = k;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[k]] {
            end += 1;
        }
        let avg = (k + end) as f64 / 2.0;
        for &i in &order[k..=end] {
            ranks[i] = avg;
        }
        k = end + 1;
    }
    ranks
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn codebook_m2(map: MapKind) -> Codebook {
    let t2 = T2Map::new(map, vec![0.9, 0.6]).unwrap();
    kmeans(&sample(1, 20_000, 2), &t2, 100, &KMeansOptions { init_seed: 1, ..Default::default() }).unwrap().codebook
}

#[test]
fn scaled_cdf_cells_are_balanced() {
    let rows = frequency_profile(&codebook_m2(MapKind::ScaledCdf), 100_000, 77).unwrap();
    for r in &rows {
        assert!((0.005..=0.02).contains(&r.frequency), "cell {}: {}", r.p, r.frequency);
    }
}

#[test]
fn scale_frequencies_fall_with_distance() {
    let rows = frequency_profile(&codebook_m2(MapKind::Scale), 100_000, 77).unwrap();
    let norms: Vec<f64> = rows.iter().map(|r| r.centroid_norm).collect();
    let freqs: Vec<f64> = rows.iter().map(|r| r.frequency).collect();
    assert!(norms.windows(2).all(|w| w[0] <= w[1]));
    assert!((freqs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let rho = spearman(&norms, &freqs);
    assert!(rho < 0.0, "spearman {rho}");
}

#[test]
fn distortion_improves_with_rate() {
    let t2 = T2Map::new(MapKind::Scale, vec![1.0, 0.5, 0.25]).unwrap();
    let train = sample(4, 10_000, 3);
    let d = |p| {
        let cb = kmeans(&train, &t2, p, &KMeansOptions::default()).unwrap().codebook;
        empirical_distortion(&cb, &train).unwrap().total
    };
    let (d10, d100) = (d(10), d(100));
    assert!(d100 <= d10, "{d100} > {d10}");
}

#[test]
fn grid_codebook_is_symmetric() {
    let t2 = T2Map::new(MapKind::ScaledCdf, vec![1.0, 2.0, 0.5]).unwrap();
    let grid = grid_codebook(&t2).unwrap();
    assert_eq!(grid.len(), 9);
    let rows = frequency_profile(&grid, 200_000, 3).unwrap();
    let corners: Vec<f64> = rows.iter().filter(|r| r.p > 0).map(|r| r.frequency).collect();
    let mean = corners.iter().sum::<f64>() / 8.0;
    for f in corners {
        assert!((f - mean).abs() < 5.0 * (mean / 200_000.0).sqrt());
    }
}

fn centroid_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (1usize..4).prop_flat_map(|m| {
        (prop::collection::vec(prop::collection::vec(-3.0f64..3.0, m), 1..12), prop::collection::vec(-4.0f64..4.0, m))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn assignment_is_the_nearest_centroid((centroids, xi) in centroid_strategy()) {
        let m = xi.len();
        let lambdas: Vec<f64> = (0..m).map(|k| 1.0 / (k + 1) as f64).collect();
        let t2 = T2Map::new(MapKind::Scale, lambdas).unwrap();
        let Ok(codebook) = Codebook::new(centroids.clone(), t2.clone(), Method::KMeans, 0) else {
            return Ok(());
        };
        let eta = t2.to_quantization_space(&xi).unwrap();
        let d = |c: &[f64]| c.iter().zip(&eta).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let p = codebook.assign(&xi).unwrap();
        let best = centroids.iter().map(|c| d(c)).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(d(&centroids[p]), best);
        prop_assert!(centroids[..p].iter().all(|c| d(c) > best));
    }

    #[test]
    fn cdf_map_round_trips(xi in prop::collection::vec(-6.0f64..6.0, 1..6)) {
        let lambdas: Vec<f64> = (0..xi.len()).map(|k| 0.5 + k as f64).collect();
        let t2 = T2Map::new(MapKind::ScaledCdf, lambdas.clone()).unwrap();
        let eta = t2.to_quantization_space(&xi).unwrap();
        for (e, l) in eta.iter().zip(&lambdas) {
            prop_assert!(*e > 0.0 && *e < l.sqrt());
        }
        let back = t2.to_latent(&eta).unwrap();
        for (a, b) in back.iter().zip(&xi) {
            prop_assert!((a - b).abs() < 1e-7 * b.abs().max(1.0));
        }
    }

    #[test]
    fn codebook_files_round_trip((centroids, _) in centroid_strategy(), cdf in any::<bool>(), seed in any::<u64>()) {
        let m = centroids[0].len();
        let map = if cdf { MapKind::ScaledCdf } else { MapKind::Scale };
        let lambdas: Vec<f64> = (0..m).map(|k| 9.0 / (k + 1) as f64).collect();
        let t2 = T2Map::new(map, lambdas).unwrap();
        let Ok(codebook) = Codebook::new(centroids, t2, Method::Clvq, seed) else {
            return Ok(());
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.qnt");
        codebook.save(&path).unwrap();
        let back = Codebook::load(&path).unwrap();
        prop_assert_eq!(back.len(), codebook.len());
        prop_assert_eq!(back.seed(), seed);
        prop_assert_eq!(back.t2(), codebook.t2());
        for p in 0..codebook.len() {
            prop_assert_eq!(back.centroid(p), codebook.centroid(p));
        }
    }

    #[test]
    fn lloyd_history_never_increases(seed in 0u64..500, p in 1usize..15) {
        let t2 = T2Map::new(MapKind::ScaledCdf, vec![1.0, 0.3]).unwrap();
        let fit = kmeans(&sample(seed, 600, 2), &t2, p, &KMeansOptions { init_seed: seed, max_iter: 50, rel_tol: 0.0 }).unwrap();
        for w in fit.history.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }
}
