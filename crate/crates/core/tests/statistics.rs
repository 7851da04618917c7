use rand::Rng;
use sse_core::eval::{chi_square_sf, friedman_rank};
use sse_core::rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn chi_square_tail_matches_statrs() {
    for df in [1.0, 2.0, 3.0, 5.0, 12.0, 30.0] {
        for x in [0.01, 0.5, 1.0, 2.5, 6.0, 12.0, 25.0, 60.0] {
            let ours = chi_square_sf(x, df);
            let reference = 1.0 - ChiSquared::new(df).unwrap().cdf(x);
            let tol = 1e-9 * reference.abs().max(1e-6);
            assert!(
                (ours - reference).abs() <= tol.max(1e-12),
                "df {df} x {x}: {ours} vs {reference}"
            );
        }
    }
}

#[test]
fn ranks_survive_monotone_transforms() {
    let mut r = rng::seeded(21);
    for _ in 0..50 {
        let scores: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..5).map(|_| (r.gen_range(0..6) as f64) / 5.0).collect())
            .collect();
        let squashed: Vec<Vec<f64>> = scores
            .iter()
            .map(|row| row.iter().map(|v| (3.0 * v).exp() - 7.0).collect())
            .collect();
        let a = friedman_rank(&scores).unwrap();
        let b = friedman_rank(&squashed).unwrap();
        assert_eq!(a.mean_ranks, b.mean_ranks);
        assert_eq!(a.statistic, b.statistic);
        let total: f64 = a.mean_ranks.iter().sum();
        assert!((total - 15.0).abs() < 1e-9);
    }
}
