use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surrogate_core::structure::{
    diversity_count, diversity_count_with, kabsch, kabsch_rmsd, tm_d0, tm_score, StructureError, DIVERSITY_TM, SUCCESS_RMSD,
};
use surrogate_core::{DesignResult, Structure};

fn transform(s: &Structure, r: &Matrix3<f64>, t: Vector3<f64>) -> Structure {
    let coords = s
        .coords
        .iter()
        .map(|p| {
            let q = r * Vector3::from(*p) + t;
            [q.x, q.y, q.z]
        })
        .collect();
    Structure::new(format!("{}'", s.label), coords).unwrap()
}

fn random_structure(rng: &mut ChaCha8Rng, len: usize) -> Structure {
    Structure::new("r", (0..len).map(|_| [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)]).collect())
        .unwrap()
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let axis = Unit::new_normalize(Vector3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    *Rotation3::from_axis_angle(&axis, rng.random_range(0.0..std::f64::consts::TAU)).matrix()
}

fn zyz(a: f64, b: f64, c: f64) -> Matrix3<f64> {
    let z = Vector3::z_axis();
    let y = Vector3::y_axis();
    (Rotation3::from_axis_angle(&z, a) * Rotation3::from_axis_angle(&y, b) * Rotation3::from_axis_angle(&z, c)).into_inner()
}

/// RMSD after centring both sets and rotating `a` by `r`; no SVD involved.
fn centred_rmsd(a: &[Vector3<f64>], b: &[Vector3<f64>], r: &Matrix3<f64>) -> f64 {
    let ca = a.iter().sum::<Vector3<f64>>() / a.len() as f64;
    let cb = b.iter().sum::<Vector3<f64>>() / b.len() as f64;
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (r * (x - ca) - (y - cb)).norm_squared()).sum();
    (ss / a.len() as f64).sqrt()
}

/// Coarse Euler-angle grid followed by a shrinking compass search.
fn brute_force_rmsd(a: &Structure, b: &Structure) -> f64 {
    let pa: Vec<Vector3<f64>> = a.coords.iter().map(|p| Vector3::from(*p)).collect();
    let pb: Vec<Vector3<f64>> = b.coords.iter().map(|p| Vector3::from(*p)).collect();
    let f = |x: &[f64; 3]| centred_rmsd(&pa, &pb, &zyz(x[0], x[1], x[2]));
    let steps = 36;
    let mut best = ([0.0; 3], f64::INFINITY);
    for i in 0..steps {
        for j in 0..=steps / 2 {
            for k in 0..steps {
                let tau = std::f64::consts::TAU / steps as f64;
                let x = [i as f64 * tau, j as f64 * tau, k as f64 * tau];
                let v = f(&x);
                if v < best.1 {
                    best = (x, v);
                }
            }
        }
    }
    let mut h = 0.2;
    while h > 1e-10 {
        let mut improved = false;
        for axis in 0..3 {
            for sign in [-1.0, 1.0] {
                let mut x = best.0;
                x[axis] += sign * h;
                let v = f(&x);
                if v < best.1 {
                    best = (x, v);
                    improved = true;
                }
            }
        }
        if !improved {
            h /= 2.0;
        }
    }
    best.1
}

#[test]
fn kabsch_matches_brute_force_on_displaced_square() {
    let a = Structure::new("square", vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
    let b = Structure::new("bent", vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 1.0], [0.0, 1.0, 0.0]]).unwrap();
    let expected = brute_force_rmsd(&a, &b);
    let got = kabsch_rmsd(&a, &b).unwrap();
    assert!((got - expected).abs() < 1e-6, "{got} vs {expected}");
    assert!(got > 0.1);
}

#[test]
fn kabsch_matches_brute_force_on_random_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..3 {
        let a = random_structure(&mut rng, 7);
        let b = random_structure(&mut rng, 7);
        let expected = brute_force_rmsd(&a, &b);
        assert!((kabsch_rmsd(&a, &b).unwrap() - expected).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rmsd_and_tm_are_rigid_invariant_and_symmetric(seed in any::<u64>(), len in 3usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_structure(&mut rng, len);
        let b = random_structure(&mut rng, len);
        let moved = transform(&a, &random_rotation(&mut rng), Vector3::new(3.0, -7.0, 11.0));
        prop_assert!(kabsch_rmsd(&a, &moved).unwrap() < 1e-9);
        let base = kabsch_rmsd(&a, &b).unwrap();
        let b_moved = transform(&b, &random_rotation(&mut rng), Vector3::new(-5.0, 2.0, 0.5));
        prop_assert!((kabsch_rmsd(&moved, &b_moved).unwrap() - base).abs() < 1e-9);
        prop_assert!((kabsch_rmsd(&b, &a).unwrap() - base).abs() < 1e-9);
        let tm = tm_score(&a, &b).unwrap();
        prop_assert!(tm > 0.0 && tm <= 1.0);
        prop_assert!((tm_score(&b, &a).unwrap() - tm).abs() < 1e-9);
        prop_assert!((tm_score(&moved, &b_moved).unwrap() - tm).abs() < 1e-9);
    }
}

#[test]
fn superposition_is_a_proper_rotation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random_structure(&mut rng, 12);
    let mirrored = Structure::new("m", a.coords.iter().map(|p| [p[0], p[1], -p[2]]).collect()).unwrap();
    let sup = kabsch(&a, &mirrored).unwrap();
    assert!((sup.rotation.determinant() - 1.0).abs() < 1e-12);
    assert!(sup.rmsd > 0.0);
}

#[test]
fn tm_identity_and_reference_length_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_structure(&mut rng, 126);
    assert_eq!(tm_score(&a, &a).unwrap(), 1.0);
    // 111^(1/3) = 4.805895533...; 1.24 · 4.805895533 − 1.8 = 4.159310461
    assert!((tm_d0(126) - 4.1593).abs() < 1e-3);
    assert!((tm_d0(126) - 4.159_310_461).abs() < 1e-8);
    assert_eq!(tm_d0(10), 0.5);
    assert!(matches!(tm_score(&a, &random_structure(&mut rng, 125)), Err(StructureError::LengthMismatch(126, 125))));
}

/// Independent greedy: repeatedly take the lowest-RMSD remaining success and
/// drop it if it is too similar to anything already kept.
fn reference_greedy(rmsd: &[f64], tm: &dyn Fn(usize, usize) -> f64) -> usize {
    let mut remaining: Vec<usize> = (0..rmsd.len()).filter(|&i| rmsd[i] < SUCCESS_RMSD).collect();
    let mut kept: Vec<usize> = Vec::new();
    while !remaining.is_empty() {
        let pos = (0..remaining.len()).min_by(|&x, &y| rmsd[remaining[x]].total_cmp(&rmsd[remaining[y]]).then(x.cmp(&y))).unwrap();
        let i = remaining.remove(pos);
        if kept.iter().all(|&j| tm(i, j) <= DIVERSITY_TM) {
            kept.push(i);
        }
    }
    kept.len()
}

#[test]
fn hand_worked_diversity_example() {
    let tm = |i: usize, j: usize| match (i.min(j), i.max(j)) {
        (0, 1) => 0.3,
        (0, 2) => 0.7,
        (1, 2) => 0.4,
        _ => 1.0,
    };
    let rmsd = [0.5, 1.0, 1.5];
    let count = diversity_count_with(&rmsd, SUCCESS_RMSD, DIVERSITY_TM, |i, j| Ok(tm(i, j))).unwrap();
    assert_eq!(count, 2);
    assert_eq!(reference_greedy(&rmsd, &tm), 2);
    assert_eq!(diversity_count_with(&[], SUCCESS_RMSD, DIVERSITY_TM, |_, _| Ok(0.0)).unwrap(), 0);
}

#[test]
fn diversity_agrees_with_reference_greedy_on_random_tables() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..500 {
        let n = rng.random_range(0..9);
        let rmsd: Vec<f64> = (0..n).map(|_| (rng.random_range(0..8) as f64) * 0.5).collect();
        let mut table = vec![vec![1.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let v = rng.random_range(0.0..1.0);
                table[i][j] = v;
                table[j][i] = v;
            }
        }
        let tm = |i: usize, j: usize| table[i][j];
        let got = diversity_count_with(&rmsd, SUCCESS_RMSD, DIVERSITY_TM, |i, j| Ok(tm(i, j))).unwrap();
        assert_eq!(got, reference_greedy(&rmsd, &tm));
        assert!(got <= rmsd.iter().filter(|&&r| r < SUCCESS_RMSD).count());
    }
}

#[test]
fn duplicates_never_increase_the_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let reference = random_structure(&mut rng, 30);
    let designs: Vec<DesignResult> = (0..6)
        .map(|i| {
            let noise = if i % 2 == 0 { 0.3 } else { 3.0 };
            let coords = reference
                .coords
                .iter()
                .map(|p| [p[0] + rng.random_range(-noise..noise), p[1] + rng.random_range(-noise..noise), p[2]])
                .collect();
            DesignResult::evaluate(Structure::new(format!("d{i}"), coords).unwrap(), reference.clone(), SUCCESS_RMSD).unwrap()
        })
        .collect();
    let base = diversity_count(&designs, DIVERSITY_TM, SUCCESS_RMSD).unwrap();
    assert!(base <= designs.iter().filter(|d| d.success).count());
    for d in &designs {
        let mut more = designs.clone();
        more.push(d.clone());
        assert!(diversity_count(&more, DIVERSITY_TM, SUCCESS_RMSD).unwrap() <= base);
    }
    let copies = vec![designs[0].clone(); 5];
    assert_eq!(diversity_count(&copies, DIVERSITY_TM, SUCCESS_RMSD).unwrap(), 1);
}
