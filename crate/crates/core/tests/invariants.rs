use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skdv_core::bourgain::{running_norms, BourgainWeight};
use skdv_core::cutoffs::{TruncationFamily, Which};
use skdv_core::functionals::{mass, mixed_norm, NormOrder};
use skdv_core::noise::NoiseStream;
use skdv_core::rng::{Channel, SeedLineage};
use skdv_core::spectral::{project_high, project_low, sobolev_norm, ComplexField, Grid1D, SpaceTimeField};

fn field(seed: u64, grid: &Grid1D) -> ComplexField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.points()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    ComplexField::new(grid, values).unwrap()
}

fn windowed(seed: u64, grid: &Grid1D, steps: usize, dt: f64) -> SpaceTimeField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, k, c, om) = (rng.gen_range(0.5..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-3.0..3.0), rng.gen_range(-4.0..4.0));
    let span = (steps - 1) as f64 * dt;
    SpaceTimeField::from_fn(grid, dt, steps, |x, t| {
        let s = t / span;
        let window = if (0.1..0.9).contains(&s) { (PI * (s - 0.1) / 0.8).sin().powi(4) } else { 0.0 };
        Complex64::from_polar(a * (-(x - c).powi(2)).exp() * window, k * x + om * t)
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn low_and_high_projections_split_orthogonally(seed in 0u64..10_000, m in 0.1f64..6.0) {
        let g = Grid1D::new(8.0 * PI, 64).unwrap();
        let f = field(seed, &g);
        let (lo, hi) = (project_low(&f, m).unwrap(), project_high(&f, m).unwrap());
        let inner = lo.inner(&hi).unwrap().norm();
        prop_assert!(inner < 1e-12 * mass(&f));
        prop_assert!(lo.add(&hi).unwrap().sub(&f).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn mass_is_squared_l2_norm(seed in 0u64..10_000, log_n in 4u32..9) {
        let g = Grid1D::new(10.0, 1 << log_n).unwrap();
        let f = field(seed, &g);
        let l2 = sobolev_norm(&f, 0.0, None).unwrap();
        prop_assert!((mass(&f) - l2 * l2).abs() < 1e-12 * mass(&f));
    }

    #[test]
    fn equal_exponents_make_nesting_irrelevant(seed in 0u64..10_000, p in 1.0f64..8.0) {
        let g = Grid1D::new(8.0 * PI, 32).unwrap();
        let f = windowed(seed, &g, 24, 0.05);
        let a = mixed_norm(&f, p, p, NormOrder::SpaceOuter).unwrap();
        let b = mixed_norm(&f, p, p, NormOrder::TimeOuter).unwrap();
        prop_assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn noise_path_is_a_function_of_seed_and_path(master in any::<u64>(), path in 0u64..1000, step in 0u64..10_000) {
        let lineage = SeedLineage::new(master, path, Channel::Schrodinger);
        let stream = NoiseStream { lineage, dt: 1e-3, basis_size: 9, active: true };
        let a = stream.increment(step).unwrap();
        prop_assert_eq!(&a, &stream.increment(step).unwrap());
        let other = NoiseStream { lineage: SeedLineage::new(master, path + 1, Channel::Schrodinger), ..stream };
        prop_assert_ne!(&a, &other.increment(step).unwrap());
    }

    #[test]
    fn truncations_settle_past_the_radius(x in -5.0f64..5.0, k in 5.0f64..50.0) {
        let fam = TruncationFamily::new(k).unwrap();
        let bigger = TruncationFamily::new(2.0 * k).unwrap();
        for which in [Which::Phi, Which::Psi, Which::Psi1, Which::Psi2] {
            let limit = TruncationFamily::inactive().eval(which, x);
            prop_assert!((fam.eval(which, x) - limit).abs() <= 1e-12 * limit.abs().max(1.0));
            prop_assert!((bigger.eval(which, x) - limit).abs() <= 1e-12 * limit.abs().max(1.0));
        }
    }

    #[test]
    fn running_envelope_is_nondecreasing(seed in 0u64..10_000, b in 0.0f64..0.49) {
        let g = Grid1D::new(8.0 * PI, 32).unwrap();
        let f = windowed(seed, &g, 20, 0.05);
        let (values, envelope) = running_norms(&f, &BourgainWeight::x(b, 1.0).unwrap()).unwrap();
        prop_assert!(envelope.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(values.iter().zip(&envelope).all(|(v, e)| v <= e));
    }
}
