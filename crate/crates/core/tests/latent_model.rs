use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};
use statrs::distribution::{Beta, ContinuousCDF, Normal as NormalLaw};
use surrogate_core::latent::{ComponentSpec, LatentError, LatentSpec, ScalarCdf, SeedSet};
use surrogate_core::stats::{ks_one_sample, ks_two_sample};
use surrogate_core::WeightVector;

const DRAWS: usize = 10_000;
const PROJECTIONS: usize = 8;
const ALPHA: f64 = 1e-3;

fn unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

fn orthant_weights(rng: &mut ChaCha8Rng, k: usize) -> WeightVector {
    WeightVector::from_clamped(unit(rng, k).into_iter().map(f64::abs).collect())
}

fn project(a: &[f64], z: &[f64]) -> f64 {
    a.iter().zip(z).map(|(x, y)| x * y).sum()
}

/// `DRAWS` outputs of the LOL map at one fixed `w`, each from fresh i.i.d. seeds.
fn combined_draws(spec: &LatentSpec, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let w = orthant_weights(rng, k);
    (0..DRAWS)
        .map(|_| {
            let seeds: Vec<Vec<f64>> = (0..k).map(|_| spec.sample(rng)).collect();
            SeedSet::from_latents(spec.clone(), &seeds).unwrap().lol_combine(&w).unwrap()
        })
        .collect()
}

/// Uniform unit quaternion (Shoemake), independent of the Gaussian-normalisation sampler.
fn shoemake(rng: &mut ChaCha8Rng) -> [f64; 4] {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    [a * (tau * u2).sin(), a * (tau * u2).cos(), b * (tau * u3).sin(), b * (tau * u3).cos()]
}

#[test]
fn gaussian_closure_matches_projected_normal_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let d = 8;
    let mean: Vec<f64> = (0..d).map(|i| 0.5 * i as f64 - 1.0).collect();
    let scale: Vec<f64> = (0..d).map(|i| 0.5 + 0.25 * i as f64).collect();
    let spec = LatentSpec::new(vec![ComponentSpec::Gaussian { dim: d, mean: mean.clone(), scale: scale.clone() }]).unwrap();
    let draws = combined_draws(&spec, 3, &mut rng);
    for _ in 0..PROJECTIONS {
        let a = unit(&mut rng, d);
        let m = project(&a, &mean);
        let s = a.iter().zip(&scale).map(|(x, s)| x * x * s * s).sum::<f64>().sqrt();
        let law = NormalLaw::new(m, s).unwrap();
        let sample: Vec<f64> = draws.iter().map(|z| project(&a, z)).collect();
        let ks = ks_one_sample(&sample, |x| law.cdf(x)).unwrap();
        assert!(ks.passes(ALPHA), "{ks:?}");
    }
}

#[test]
fn sphere_closure_matches_projected_beta_law_and_norms_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let d = 8;
    let spec = LatentSpec::sphere(d).unwrap();
    let draws = combined_draws(&spec, 4, &mut rng);
    for z in &draws {
        assert!((project(z, z).sqrt() - 1.0).abs() < 1e-12);
    }
    // (1 + a·z) / 2 ~ Beta((d−1)/2, (d−1)/2) for z uniform on the sphere.
    let half = (d as f64 - 1.0) / 2.0;
    let law = Beta::new(half, half).unwrap();
    for _ in 0..PROJECTIONS {
        let a = unit(&mut rng, d);
        let sample: Vec<f64> = draws.iter().map(|z| (1.0 + project(&a, z)) / 2.0).collect();
        let ks = ks_one_sample(&sample, |x| law.cdf(x)).unwrap();
        assert!(ks.passes(ALPHA), "{ks:?}");
    }
}

#[test]
fn composite_positions_and_rotations_close_under_combination() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let spec = LatentSpec::new(vec![
        ComponentSpec::Gaussian { dim: 4, mean: vec![1.0; 4], scale: vec![2.0; 4] },
        ComponentSpec::Sphere { dim: 4 },
    ])
    .unwrap();
    let draws = combined_draws(&spec, 3, &mut rng);
    for z in &draws {
        assert!((project(&z[4..], &z[4..]).sqrt() - 1.0).abs() < 1e-12);
    }
    let position = Normal::new(1.0, 2.0).unwrap();
    let reference: Vec<Vec<f64>> = (0..DRAWS)
        .map(|_| {
            let mut z: Vec<f64> = (0..4).map(|_| position.sample(&mut rng)).collect();
            z.extend(shoemake(&mut rng));
            z
        })
        .collect();
    for _ in 0..PROJECTIONS {
        let a = unit(&mut rng, 8);
        let x: Vec<f64> = draws.iter().map(|z| project(&a, z)).collect();
        let y: Vec<f64> = reference.iter().map(|z| project(&a, z)).collect();
        let ks = ks_two_sample(&x, &y).unwrap();
        assert!(ks.passes(ALPHA), "{ks:?}");
    }
}

#[test]
fn scalar_cdf_closure_matches_direct_exponential_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let d = 6;
    let spec = LatentSpec::new(vec![ComponentSpec::ScalarCdf { dim: d, cdf: ScalarCdf::Exponential { rate: 2.0 } }]).unwrap();
    let draws = combined_draws(&spec, 3, &mut rng);
    let first: Vec<f64> = draws.iter().map(|z| z[0]).collect();
    let ks = ks_one_sample(&first, |x| if x <= 0.0 { 0.0 } else { -(-2.0 * x).exp_m1() }).unwrap();
    assert!(ks.passes(ALPHA), "{ks:?}");
    let exp = Exp::new(2.0).unwrap();
    let reference: Vec<Vec<f64>> = (0..DRAWS).map(|_| (0..d).map(|_| exp.sample(&mut rng)).collect()).collect();
    for _ in 0..PROJECTIONS {
        let a = unit(&mut rng, d);
        let x: Vec<f64> = draws.iter().map(|z| project(&a, z)).collect();
        let y: Vec<f64> = reference.iter().map(|z| project(&a, z)).collect();
        let ks = ks_two_sample(&x, &y).unwrap();
        assert!(ks.passes(ALPHA), "{ks:?}");
    }
}

#[test]
fn equal_weight_gaussian_pairs_keep_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let d = 64;
    let spec = LatentSpec::gaussian(d).unwrap();
    let h = 0.5_f64.sqrt();
    let w = WeightVector::new(vec![h, h]).unwrap();
    let mut sum = vec![0.0; d];
    let mut sq = vec![0.0; d];
    for _ in 0..DRAWS {
        let seeds = vec![spec.sample(&mut rng), spec.sample(&mut rng)];
        let z = SeedSet::from_latents(spec.clone(), &seeds).unwrap().lol_combine(&w).unwrap();
        for i in 0..d {
            sum[i] += z[i];
            sq[i] += z[i] * z[i];
        }
    }
    let n = DRAWS as f64;
    for i in 0..d {
        let mean = sum[i] / n;
        let var = (sq[i] - n * mean * mean) / (n - 1.0);
        assert!(mean.abs() < 4.0 / n.sqrt(), "coordinate {i}: mean {mean}");
        assert!((0.94..=1.06).contains(&var), "coordinate {i}: var {var}");
    }
}

fn families(d: usize) -> Vec<(&'static str, LatentSpec)> {
    let half = d / 2;
    vec![
        (
            "gaussian",
            LatentSpec::new(vec![ComponentSpec::Gaussian { dim: d, mean: vec![0.3; d], scale: vec![1.7; d] }]).unwrap(),
        ),
        ("sphere", LatentSpec::sphere(d).unwrap()),
        (
            "composite",
            LatentSpec::new(vec![ComponentSpec::standard_gaussian(half), ComponentSpec::Sphere { dim: d - half }]).unwrap(),
        ),
        (
            "scalar_cdf",
            LatentSpec::new(vec![ComponentSpec::ScalarCdf { dim: d, cdf: ScalarCdf::Logistic { loc: 0.5, scale: 2.0 } }])
                .unwrap(),
        ),
    ]
}

/// 1,024 cases over families × K ∈ {2,5,24} × D ∈ {8,64,512}. K = 24 needs
/// D ≥ 24 for a full-rank ξ, so (24, 8) is skipped.
#[test]
fn inversion_round_trips_across_families_and_sizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    for d in [8, 64, 512] {
        for k in [2, 5, 24] {
            if k > d {
                continue;
            }
            for (name, spec) in families(d) {
                let set = SeedSet::sample(spec, k, rng.random()).unwrap();
                for _ in 0..32 {
                    let w = orthant_weights(&mut rng, k);
                    let z = set.lol_combine(&w).unwrap();
                    let back = set.lol_invert(&z).unwrap_or_else(|e| panic!("{name} K={k} D={d}: {e}"));
                    for (a, b) in back.as_slice().iter().zip(w.as_slice()) {
                        worst = worst.max((a - b).abs());
                    }
                    cases += 1;
                }
            }
        }
    }
    assert!(cases >= 1000);
    assert!(worst < 1e-8, "worst deviation {worst:e}");
}

#[test]
fn sphere_inversion_without_normalisation_fails() {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let set = SeedSet::sample(LatentSpec::sphere(64).unwrap(), 5, 7).unwrap();
    let mut failed = 0;
    for _ in 0..200 {
        let w = orthant_weights(&mut rng, 5);
        let z = set.lol_combine(&w).unwrap();
        let raw = set.raw_inverse(&z).unwrap();
        if raw.weights.iter().zip(w.as_slice()).any(|(a, b)| (a - b).abs() > 1e-8) {
            failed += 1;
        }
        let normalised = set.lol_invert(&z).unwrap();
        assert!(normalised.as_slice().iter().zip(w.as_slice()).all(|(a, b)| (a - b).abs() < 1e-8));
    }
    assert_eq!(failed, 200);
}

#[test]
fn gaussian_and_cdf_inversion_needs_no_normalisation() {
    for (name, spec) in families(32) {
        if name == "sphere" || name == "composite" {
            continue;
        }
        let set = SeedSet::sample(spec, 5, 3).unwrap();
        let w = WeightVector::from_clamped(vec![0.1, 0.4, 0.4, 0.7, 0.2]);
        let raw = set.raw_inverse(&set.lol_combine(&w).unwrap()).unwrap();
        let norm = raw.weights.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6, "{name}: {norm}");
    }
}

#[test]
fn composite_combination_equals_blockwise_combination() {
    let d = 12;
    let parts = [
        LatentSpec::new(vec![ComponentSpec::Gaussian { dim: 5, mean: vec![2.0; 5], scale: vec![0.5; 5] }]).unwrap(),
        LatentSpec::sphere(4).unwrap(),
        LatentSpec::new(vec![ComponentSpec::ScalarCdf { dim: 3, cdf: ScalarCdf::Uniform { low: -1.0, high: 3.0 } }]).unwrap(),
    ];
    let whole = LatentSpec::new(parts.iter().flat_map(|p| p.components().to_vec()).collect()).unwrap();
    assert_eq!(whole.total_dim(), d);
    let set = SeedSet::sample(whole, 3, 21).unwrap();
    let w = WeightVector::from_clamped(vec![0.2, 0.9, 0.4]);
    let z = set.lol_combine(&w).unwrap();

    let mut offset = 0;
    let mut pieces = Vec::new();
    for part in &parts {
        let n = part.total_dim();
        let seeds: Vec<Vec<f64>> = set.seeds().iter().map(|s| s[offset..offset + n].to_vec()).collect();
        pieces.extend(SeedSet::from_latents(part.clone(), &seeds).unwrap().lol_combine(&w).unwrap());
        offset += n;
    }
    assert_eq!(z, pieces);
}

#[test]
fn out_of_span_latents_are_detected() {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    for (_, spec) in families(16) {
        let set = SeedSet::sample(spec.clone(), 3, 5).unwrap();
        let z = spec.sample(&mut rng);
        assert!(matches!(set.lol_invert(&z), Err(LatentError::NotInSpan { .. })));
    }
}
