use num::traits::Zero;
use padic_manifold::analysis::EllipticSystem;
use padic_manifold::manifold::{BuiltinOptions, ManifoldModel, BUILTIN_NAMES};
use padic_manifold::operators::{
    adjoint_l2, assemble_knn, assemble_vt, EllipticCoefficients, FrameField, KernelSpec, OperatorMatrix,
};
use padic_manifold::padic::BallAddress;
use padic_manifold::spectral::HeatSemigroup;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model(name: &str, p: u32, depth: usize) -> ManifoldModel {
    ManifoldModel::builtin(
        name,
        &BuiltinOptions {
            p: Some(p),
            depth: Some(depth),
            ..Default::default()
        },
    )
    .unwrap()
}

fn any_model() -> impl Strategy<Value = ManifoldModel> {
    (0..BUILTIN_NAMES.len(), prop::sample::select(vec![2u32, 3]), 1usize..=2)
        .prop_map(|(i, p, m)| model(BUILTIN_NAMES[i], p, m))
}

fn operator(m: &ManifoldModel, knn: bool, alpha: f64, k: usize) -> OperatorMatrix {
    if knn {
        assemble_knn(m, alpha, k)
    } else {
        assemble_vt(m, alpha)
    }
}

fn vector(len: usize, seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn distance_is_a_metric(m in any_model(), picks in prop::collection::vec(any::<prop::sample::Index>(), 3)) {
        let n = m.cell_count();
        let [x, y, z] = [picks[0].index(n), picks[1].index(n), picks[2].index(n)];
        let d = |a: usize, b: usize| if a == b { 0.0 } else { m.cell_distance(a, b) };
        prop_assert_eq!(d(x, y), d(y, x));
        if x != y {
            prop_assert!(d(x, y) > 0.0);
        }
        prop_assert!(d(x, z) <= (d(x, y) + d(y, z)) * (1.0 + 1e-12));
        if m.cell_root(x) == m.cell_root(y) && m.cell_root(y) == m.cell_root(z) {
            prop_assert!(d(x, z) <= d(x, y).max(d(y, z)));
        }
    }

    #[test]
    fn distance_to_a_ball_is_constant_outside(m in any_model(), root_pick in any::<prop::sample::Index>(), code in 0u32..2) {
        // every cell outside a depth-1 ball sees its cells at one distance
        let root = root_pick.index(m.roots().len());
        let ball: Vec<usize> = m.cells_in_ball(root, &BallAddress::from_codes(vec![code])).collect();
        for y in 0..m.cell_count() {
            if ball.contains(&y) {
                continue;
            }
            let d0 = m.cell_distance(ball[0], y);
            for &x in &ball {
                prop_assert_eq!(m.cell_distance(x, y), d0);
            }
        }
    }

    #[test]
    fn cells_partition_the_measure(m in any_model()) {
        let mut total = num::rational::BigRational::zero();
        for c in 0..m.cell_count() {
            total += m.cell_measure(c);
        }
        prop_assert_eq!(total, m.total_measure());
        let b = m.ctx().branching() as u32;
        for root in 0..m.roots().len() {
            let top = m.cells_in_ball(root, &BallAddress::root());
            let mut next = top.start;
            for c in 0..b {
                let child = m.cells_in_ball(root, &BallAddress::from_codes(vec![c]));
                prop_assert_eq!(child.start, next);
                next = child.end;
            }
            prop_assert_eq!(next, top.end);
        }
    }

    #[test]
    fn adjoint_identity(m in any_model(), knn: bool, alpha in 0.25f64..2.5, k in 0usize..4, seed: u64) {
        let l = operator(&m, knn, alpha, k);
        let adj = adjoint_l2(&l);
        let u = vector(l.dim(), seed);
        let v = vector(l.dim(), seed ^ 0x5a5a);
        let lhs = l.inner_mu(&l.apply(&u), &v);
        let rhs = l.inner_mu(&u, &adj.apply(&v));
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn generators_are_conservative_metzler(m in any_model(), knn: bool, alpha in 0.25f64..2.5, k in 0usize..4) {
        let l = operator(&m, knn, alpha, k);
        let scale = l.entries.max_abs().max(1.0);
        for (i, s) in l.row_sums().iter().enumerate() {
            prop_assert!(s.abs() <= 1e-12 * scale);
            for j in 0..l.dim() {
                if i != j {
                    prop_assert!(l.entries[(i, j)] <= 0.0);
                }
            }
        }
    }

    #[test]
    fn heat_semigroup_law(m in any_model(), knn: bool, s in 0.0f64..3.0, t in 0.0f64..3.0) {
        let l = operator(&m, knn, 1.0, 1);
        let h = HeatSemigroup::new(&l).unwrap();
        let composed = h.at(s).unwrap().matmul(&h.at(t).unwrap());
        let direct = h.at(s + t).unwrap();
        prop_assert!(composed.sub(&direct).max_abs() <= 1e-10);
    }

    #[test]
    fn heat_kernel_is_stochastic(m in any_model(), knn: bool, alpha in 0.25f64..2.5, t in 0.0f64..10.0) {
        let l = operator(&m, knn, alpha, 1);
        let p = HeatSemigroup::new(&l).unwrap().at(t).unwrap();
        for i in 0..p.rows() {
            let mut sum = 0.0;
            for j in 0..p.cols() {
                prop_assert!(p[(i, j)] >= -1e-12);
                sum += p[(i, j)];
            }
            prop_assert!((sum - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn energy_form_matches_strong_form(seed: u64, theta in 0.1f64..2.0) {
        let m = model("p1_q2", 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = EllipticCoefficients::random_spd(&m, theta, &mut rng).unwrap();
        let frame = FrameField::identity(&m);
        let sys = EllipticSystem::new(&m, &frame, &coeffs, &KernelSpec::Knn { alpha: 1.0, k: 1 }).unwrap();
        let u = vector(m.cell_count(), seed);
        let phi = vector(m.cell_count(), !seed);
        let b = sys.energy(&u, &phi);
        let s = sys.strong_form(&u, &phi);
        prop_assert!((b - s).abs() <= 1e-10 * s.abs().max(1.0));
    }
}
