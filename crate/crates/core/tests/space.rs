use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surrogate_core::latent::{ComponentSpec, LatentError, LatentSpec, SeedSet};
use surrogate_core::space::SpaceError;
use surrogate_core::{ChartKind, SurrogateSpace, UPoint};

const CHARTS: [ChartKind; 2] = [ChartKind::Angular, ChartKind::KnotheRosenblatt];

fn specs() -> Vec<LatentSpec> {
    vec![
        LatentSpec::gaussian(24).unwrap(),
        LatentSpec::sphere(24).unwrap(),
        LatentSpec::new(vec![ComponentSpec::standard_gaussian(12), ComponentSpec::Sphere { dim: 4 }]).unwrap(),
    ]
}

fn random_u(rng: &mut ChaCha8Rng, dim: usize) -> UPoint {
    UPoint::new((0..dim).map(|_| rng.random_range(0.02..0.98)).collect()).unwrap()
}

fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / norm
}

#[test]
fn end_to_end_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for spec in specs() {
        for chart in CHARTS {
            let space = SurrogateSpace::new(SeedSet::sample(spec.clone(), 5, rng.random()).unwrap(), chart).unwrap();
            for _ in 0..50 {
                let u = random_u(&mut rng, space.dim());
                let z = space.u_to_latent(&u).unwrap();
                let back = space.latent_to_u(&z).unwrap().strict().unwrap();
                for (a, b) in back.as_slice().iter().zip(u.as_slice()) {
                    assert!((a - b).abs() < 1e-7, "{chart}: {a} vs {b}");
                }
                let again = space.u_to_latent(&back).unwrap();
                assert!(relative_gap(&again, &z) < 1e-6);
            }
        }
    }
}

#[test]
fn corners_hold_the_seeds() {
    for spec in specs() {
        for chart in CHARTS {
            let space = SurrogateSpace::new(SeedSet::sample(spec.clone(), 4, 2).unwrap(), chart).unwrap();
            for k in 0..4 {
                let corner = space.corner(k).unwrap();
                let z = space.u_to_latent(&corner).unwrap();
                assert!(relative_gap(&z, &space.seeds().seed(k)) < 1e-6, "{chart} corner {k}");
                let back = space.latent_to_u(&space.seeds().seed(k)).unwrap();
                assert!(back.u.as_slice().iter().zip(corner.as_slice()).all(|(a, b)| (a - b).abs() < 1e-12));
            }
        }
    }
}

#[test]
fn dense_grid_corners_map_to_seeds() {
    let space = SurrogateSpace::new(SeedSet::sample(LatentSpec::gaussian(16).unwrap(), 3, 3).unwrap(), ChartKind::KnotheRosenblatt)
        .unwrap();
    let grid = space.grid(&[256], &[]).unwrap();
    assert_eq!(grid.len(), 65_536);
    let corners: Vec<UPoint> = (0..3).map(|k| space.corner(k).unwrap()).collect();
    for corner in &corners {
        let hit = grid.iter().find(|p| &p.u == corner).expect("corner on the grid");
        let k = corners.iter().position(|c| c == corner).unwrap();
        assert!(relative_gap(&hit.latent, &space.seeds().seed(k)) < 1e-6);
    }
}

#[test]
fn grid_is_row_major_with_last_free_axis_fastest() {
    let space = SurrogateSpace::new(SeedSet::sample(LatentSpec::gaussian(16).unwrap(), 8, 4).unwrap(), ChartKind::Angular).unwrap();
    assert_eq!(space.dim(), 7);
    let fixed = [(0, 0.1), (2, 0.2), (3, 0.3), (5, 0.5), (6, 0.6)];
    let points = space.grid_points(&[3], &fixed).unwrap();
    assert_eq!(points.len(), 9);
    let expected = [0.0, 0.5, 1.0];
    for (i, p) in points.iter().enumerate() {
        let u = p.as_slice();
        assert_eq!((u[0], u[2], u[3], u[5], u[6]), (0.1, 0.2, 0.3, 0.5, 0.6));
        assert_eq!(u[1], expected[i / 3]);
        assert_eq!(u[4], expected[i % 3]);
    }
    assert!(matches!(space.grid_points(&[4000], &[]), Err(SpaceError::TooLarge { .. })));
}

#[test]
fn sphere_grid_points_are_valid_latents() {
    let space = SurrogateSpace::new(SeedSet::sample(LatentSpec::sphere(32).unwrap(), 3, 5).unwrap(), ChartKind::KnotheRosenblatt)
        .unwrap();
    for p in space.grid(&[33], &[]).unwrap() {
        let norm = p.latent.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        space.seeds().spec().check_support(&p.latent).unwrap();
    }
}

#[test]
fn distinct_points_give_distinct_latents() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let space = SurrogateSpace::new(SeedSet::sample(LatentSpec::gaussian(16).unwrap(), 4, 6).unwrap(), ChartKind::KnotheRosenblatt)
        .unwrap();
    let mut latents: Vec<Vec<u64>> = (0..10_000)
        .map(|_| space.u_to_latent(&random_u(&mut rng, 3)).unwrap().iter().map(|x| x.to_bits()).collect())
        .collect();
    latents.sort();
    let before = latents.len();
    latents.dedup();
    assert_eq!(latents.len(), before);
}

#[test]
fn orthogonal_seed_corners_have_zero_similarity() {
    let spec = LatentSpec::gaussian(3).unwrap();
    let seeds = SeedSet::from_inner_matrix(spec, DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 3.0]))
        .unwrap();
    for chart in CHARTS {
        let space = SurrogateSpace::new(seeds.clone(), chart).unwrap();
        let s = space.similarity(&space.corner(0).unwrap(), &space.corner(1).unwrap()).unwrap();
        assert!(s.approx.abs() < 1e-15 && s.exact.abs() < 1e-15, "{chart}: {s:?}");
        let u = space.corner(2).unwrap();
        let same = space.similarity(&u, &u).unwrap();
        assert!((same.approx - 1.0).abs() < 1e-15 && (same.exact - 1.0).abs() < 1e-15);
    }
}

#[test]
fn weight_similarity_approximates_latent_cosine_in_high_dimension() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let space = SurrogateSpace::new(
        SeedSet::sample(LatentSpec::gaussian(10_000).unwrap(), 10, 7).unwrap(),
        ChartKind::KnotheRosenblatt,
    )
    .unwrap();
    let close = (0..1000)
        .filter(|_| {
            let s = space.similarity(&random_u(&mut rng, 9), &random_u(&mut rng, 9)).unwrap();
            (s.approx - s.exact).abs() < 0.05
        })
        .count();
    assert!(close >= 990, "{close}");
}

#[test]
fn fresh_latents_are_outside_the_space() {
    let mut rng = ChaCha8Rng::seed_from_u64(80);
    let spec = LatentSpec::gaussian(32).unwrap();
    let space = SurrogateSpace::new(SeedSet::sample(spec.clone(), 4, 8).unwrap(), ChartKind::Angular).unwrap();
    for _ in 0..20 {
        let err = space.latent_to_u(&spec.sample(&mut rng)).unwrap_err();
        assert!(matches!(err, SpaceError::Latent(LatentError::NotInSpan { .. })), "{err:?}");
    }
}
