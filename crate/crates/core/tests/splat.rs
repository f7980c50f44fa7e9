use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use brepsplat_core::splat::{render_channels, sort_front_to_back, Channels};
use brepsplat_core::splat::{sample_gaussians_to_points, SamplingConfig};
use brepsplat_core::splat::verify::gradient_scene;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn render_is_order_independent_after_sorting(seed in 0u64..10_000, n in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (gs, cam) = gradient_scene(&mut rng, n, 3, 12);
        let want = render_channels(&gs, &cam, Channels::all()).unwrap();
        let mut shuffled = gs.clone();
        shuffled.shuffle(&mut rng);
        sort_front_to_back(&mut shuffled, &cam);
        prop_assert_eq!(render_channels(&shuffled, &cam, Channels::all()).unwrap(), want);
    }

    #[test]
    fn compositing_stays_in_range(seed in 0u64..10_000, n in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (gs, cam) = gradient_scene(&mut rng, n, 2, 12);
        let out = render_channels(&gs, &cam, Channels::all()).unwrap();
        let max_color = gs.iter().map(|g| g.color.max()).fold(0.0, f64::max);
        let max_edge = gs.iter().map(|g| g.edge).fold(0.0, f64::max);
        for (p, &a) in out.alpha.data.iter().enumerate() {
            prop_assert!((0.0..=1.0).contains(&a));
            // weights sum to the accumulated alpha
            for c in 0..3 {
                prop_assert!(out.color.data[3 * p + c] <= a * max_color + 1e-12);
            }
            prop_assert!(out.edge.data[p] <= a * max_edge + 1e-12);
        }
    }

    #[test]
    fn sampling_point_count(seed in 0u64..10_000, n in 1usize..30, rho in 1.0..6.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (gs, _) = gradient_scene(&mut rng, n, 2, 4);
        let cfg = SamplingConfig { elongation_threshold: rho, ..SamplingConfig::default() };
        let cloud = sample_gaussians_to_points(&gs, &cfg);
        let compact = gs.iter().filter(|g| g.scale[0].max(g.scale[1]) / g.scale[0].min(g.scale[1]) <= rho).count();
        prop_assert_eq!(cloud.len(), n + 4 * compact);
        prop_assert!(cloud.validate().is_ok());
        for g in &gs {
            prop_assert!(cloud.points.contains(&g.center));
        }
    }
}
