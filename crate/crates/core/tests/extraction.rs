use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voromesh_core::extract::{assign_occupancy, check_watertight, extract_voromesh, repair_nonmanifold};
use voromesh_core::optim::init_generators;
use voromesh_core::sampling::{default_sample_count, sample_surface, winding_number};
use voromesh_core::shapes;
use voromesh_core::voroloss::GeneratorSet;
use voromesh_core::selfcheck::mismatched_faces;
use voromesh_core::voronoi::{compute_diagram, ClipBox, Site};
use voromesh_core::DVec3;

fn random_set(rng: &mut ChaCha8Rng, n: usize) -> GeneratorSet {
    GeneratorSet::new(
        (0..n)
            .map(|_| DVec3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)))
            .collect(),
    )
}

fn lattice(g: i32) -> GeneratorSet {
    let mut p = vec![];
    for i in 0..=g {
        for j in 0..=g {
            for k in 0..=g {
                p.push(DVec3::new(i as f64, j as f64, k as f64) / g as f64 - 0.5);
            }
        }
    }
    GeneratorSet::new(p)
}

fn check(q: &GeneratorSet, rng: &mut ChaCha8Rng, p_inside: f64) {
    let d = compute_diagram(q, &ClipBox::around_unit_box()).unwrap();
    let occ: Vec<bool> = d.cells.iter().map(|c| !c.clipped && rng.gen_bool(p_inside)).collect();
    assert_eq!(mismatched_faces(&d), 0);
    let s = extract_voromesh(&d, &occ).unwrap();
    let expected: usize = d
        .cells
        .iter()
        .enumerate()
        .filter(|(i, _)| occ[*i])
        .map(|(_, c)| c.faces.iter().filter(|f| matches!(f.site, Site::Generator(j) if !occ[j as usize])).count())
        .sum();
    assert_eq!(s.faces.len(), expected);
    let (r, _) = repair_nonmanifold(&s);
    let w = check_watertight(&r);
    let inside_volume: f64 = d.cells.iter().zip(&occ).filter(|(_, &o)| o).map(|(c, _)| c.volume()).sum();
    assert!(w.is_watertight(), "{w:?}");
    assert!((r.signed_volume() - inside_volume).abs() <= 1e-6 * inside_volume.max(1e-12));
}

#[test]
fn random_generators_are_watertight() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let n = rng.gen_range(10..300);
        let q = random_set(&mut rng, n);
        check(&q, &mut rng, 0.5);
    }
}

#[test]
fn lattice_generators_are_watertight() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for g in [3, 5, 8] {
        let q = lattice(g);
        check(&q, &mut rng, 0.5);
    }
}

#[test]
fn near_lattice_generators_are_watertight() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (i, amp) in [1e-13, 1e-11, 1e-10, 1e-9, 1e-8, 1e-6, 1e-4].into_iter().enumerate() {
        for g in [6, 9] {
            let q = lattice(g).perturbed(amp, i as u64 * 10 + g as u64);
            check(&q, &mut rng, 0.5);
        }
    }
}

/// Pairs mirrored across a plane, as fitting produces on flat surfaces:
/// any two pairs are cospherical up to the noise.
#[test]
fn mirrored_pairs_are_watertight() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for amp in [0.0, 1e-15, 1e-13, 1e-12, 1e-10, 1e-8] {
        let mut p = vec![];
        for _ in 0..150 {
            let a = DVec3::new(rng.gen_range(-0.5..-0.01), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let noise = DVec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * amp;
            p.push(a);
            p.push(DVec3::new(-a.x, a.y, a.z) + noise);
        }
        let q = GeneratorSet::new(p);
        let d = compute_diagram(&q, &ClipBox::around_unit_box()).unwrap();
        assert_eq!(mismatched_faces(&d), 0, "amp {amp}");
        let occ: Vec<bool> = d.cells.iter().zip(&q.positions).map(|(c, x)| !c.clipped && x.x < 0.0).collect();
        let (r, _) = repair_nonmanifold(&extract_voromesh(&d, &occ).unwrap());
        let w = check_watertight(&r);
        assert!(w.is_watertight(), "amp {amp}: {w:?}");
    }
}

/// Occupancy is the ground-truth membership of each unclipped cell's
/// barycenter, re-queried here cell by cell.
#[test]
fn sphere_occupancy_matches_barycenter_queries() {
    let sphere = shapes::icosphere(3, 0.5);
    let samples = sample_surface(&sphere, default_sample_count(32), 0).unwrap();
    let q = init_generators(&samples, 32).unwrap().generators;
    let d = compute_diagram(&q, &ClipBox::around_unit_box()).unwrap();
    let occ = assign_occupancy(&d, &sphere);
    let mut expected = 0;
    for (c, &o) in d.cells.iter().zip(&occ) {
        let inside = !c.clipped && winding_number(&sphere, c.barycenter.point) > 0.5;
        assert_eq!(o, inside);
        expected += usize::from(inside);
    }
    assert!(expected > 100);
    let (r, _) = repair_nonmanifold(&extract_voromesh(&d, &occ).unwrap());
    assert!(check_watertight(&r).is_watertight());
}

mod props {
    use super::*;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn any_occupancy_gives_a_watertight_surface(n in 5usize..80, seed in 0u64..10_000, p in 0.1f64..0.9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_set(&mut rng, n);
            let d = compute_diagram(&q, &ClipBox::around_unit_box()).unwrap();
            let occ: Vec<bool> = d.cells.iter().map(|c| !c.clipped && rng.gen_bool(p)).collect();
            let (r, _) = repair_nonmanifold(&extract_voromesh(&d, &occ).unwrap());
            let w = check_watertight(&r);
            prop_assert!(w.is_watertight(), "{:?}", w);
            let inside: f64 = d.cells.iter().zip(&occ).filter(|(_, &o)| o).map(|(c, _)| c.volume()).sum();
            prop_assert!((r.signed_volume() - inside).abs() <= 1e-9_f64.max(1e-6 * inside));
        }
    }
}
