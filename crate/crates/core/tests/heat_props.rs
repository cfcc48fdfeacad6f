use std::collections::BTreeMap;

use dirac_bvp::harness::generate_structure;
use dirac_bvp::heat::{circle_supertrace, lim_extract, oracle_check, sommerfeld_kernel, CutoffFunction, FdGrid, HeatTraceSamples, Provenance, TGrid};
use dirac_bvp::linalg::{self, ComplexMatrix};
use dirac_bvp::quad::gauss_legendre_on;
use dirac_bvp::{aps_projection, DiracStructure, OrthoProjection, C64};
use proptest::prelude::*;

fn setup(seed: u64, m: usize) -> (DiracStructure, OrthoProjection) {
    let s = generate_structure(seed, m, m, 0, false).unwrap();
    let p = aps_projection(&s).unwrap();
    (s, p)
}

fn scaled(m: &ComplexMatrix) -> f64 {
    linalg::max_norm(m).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kernel_is_hermitian_in_its_arguments(seed in any::<u64>(), m in 1usize..4, x in 0.0f64..3.0, y in 0.0f64..3.0, t in 0.05f64..2.0) {
        let (s, p) = setup(seed, m);
        let kxy = sommerfeld_kernel(&s, &p, x, y, t).unwrap();
        let kyx = sommerfeld_kernel(&s, &p, y, x, t).unwrap();
        prop_assert!(linalg::max_norm(&(&kxy - kyx.adjoint())) <= 1e-10 * scaled(&kxy));
    }

    #[test]
    fn kernel_satisfies_the_boundary_condition(seed in any::<u64>(), m in 1usize..4, y in 0.0f64..3.0, t in 0.05f64..2.0) {
        let (s, p) = setup(seed, m);
        let k0 = sommerfeld_kernel(&s, &p, 0.0, y, t).unwrap();
        prop_assert!(linalg::max_norm(&(p.matrix() * &k0)) <= 1e-10 * scaled(&k0));
    }

    #[test]
    fn kernel_solves_the_heat_equation(seed in any::<u64>(), m in 1usize..3, x in 0.3f64..2.0, y in 0.0f64..2.0, t in 0.2f64..1.0) {
        let (s, p) = setup(seed, m);
        let k = |x: f64, t: f64| sommerfeld_kernel(&s, &p, x, y, t).unwrap();
        let (hx, ht) = (2e-3, 1e-3);
        let five = |f: &dyn Fn(f64) -> ComplexMatrix, c: f64, h: f64, second: bool| -> ComplexMatrix {
            let (m2, m1, z, p1, p2) = (f(c - 2.0 * h), f(c - h), f(c), f(c + h), f(c + 2.0 * h));
            if second {
                (-&m2 + &m1 * C64::new(16.0, 0.0) - &z * C64::new(30.0, 0.0) + &p1 * C64::new(16.0, 0.0) - &p2) * C64::new(1.0 / (12.0 * h * h), 0.0)
            } else {
                (&m2 - &m1 * C64::new(8.0, 0.0) + &p1 * C64::new(8.0, 0.0) - &p2) * C64::new(1.0 / (12.0 * h), 0.0)
            }
        };
        let kt = five(&|tt| k(x, tt), t, ht, false);
        let kxx = five(&|xx| k(xx, t), x, hx, true);
        let a = s.a_matrix();
        let residual = kt - kxx + a * a * k(x, t);
        prop_assert!(linalg::max_norm(&residual) <= 1e-6, "{}", linalg::max_norm(&residual));
    }

    #[test]
    fn kernel_has_the_semigroup_property(seed in any::<u64>(), m in 1usize..3, x in 0.0f64..1.5, y in 0.0f64..1.5, t1 in 0.2f64..0.8, t2 in 0.2f64..0.8) {
        let (s, p) = setup(seed, m);
        let n = s.dim();
        let mut sum = ComplexMatrix::zeros(n, n);
        // Gaussians of width sqrt(t) at most; the far end is negligible past z = 30.
        for panel in 0..120 {
            let (z, w) = gauss_legendre_on(16, panel as f64 * 0.25, (panel + 1) as f64 * 0.25);
            for (zi, wi) in z.iter().zip(&w) {
                let left = sommerfeld_kernel(&s, &p, x, *zi, t1).unwrap();
                let right = sommerfeld_kernel(&s, &p, *zi, y, t2).unwrap();
                sum += left * right * C64::new(*wi, 0.0);
            }
        }
        let direct = sommerfeld_kernel(&s, &p, x, y, t1 + t2).unwrap();
        prop_assert!(linalg::max_norm(&(&sum - &direct)) <= 1e-6, "{}", linalg::max_norm(&(&sum - &direct)));
    }

    #[test]
    fn circle_supertrace_is_constant_in_time(seed in any::<u64>(), m in 1usize..4, k in 0usize..2, t1 in 0.1f64..2.0, t2 in 0.1f64..2.0) {
        let s = generate_structure(seed, m, m, k.min(m), true).unwrap();
        let a = circle_supertrace(&s, 2.0 * std::f64::consts::PI, t1, 400, 1e-12).unwrap();
        let b = circle_supertrace(&s, 2.0 * std::f64::consts::PI, t2, 400, 1e-12).unwrap();
        prop_assert!((a - b).abs() <= 1e-10, "{} vs {}", a, b);
    }

    #[test]
    fn fit_recovers_planted_coefficients(c in prop::collection::vec(-3.0f64..3.0, 4), logs in any::<bool>(), l in prop::collection::vec(-1.0f64..1.0, 4)) {
        let order = 3;
        let grid = TGrid::new(0.5, 0.7, 16).unwrap();
        let ts = grid.values();
        let p = 0.5;
        let values: Vec<f64> = ts.iter().map(|&t| {
            (0..=order).map(|j| {
                let base = t.powf(j as f64 / 2.0 - p);
                c[j] * base + if logs { l[j] * base * t.ln() } else { 0.0 }
            }).sum()
        }).collect();
        let samples = HeatTraceSamples::new(ts.clone(), values, vec![0.0; ts.len()], Provenance::ExactBlock).unwrap();
        let fit = lim_extract(&samples, p, order, logs).unwrap();
        let mut planted = BTreeMap::new();
        for j in 0..=order {
            planted.insert((j, 0), c[j]);
            if logs {
                planted.insert((j, 1), l[j]);
            }
        }
        for ((j, k), v) in planted {
            prop_assert!((fit.coeff(j, k) - v).abs() <= 1e-7 * (1.0 + v.abs()), "a_{}{} = {} vs {}", j, k, fit.coeff(j, k), v);
        }
        prop_assert!((fit.lim - c[1]).abs() <= 1e-7 * (1.0 + c[1].abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn exact_trace_agrees_with_the_discretization(seed in any::<u64>(), m in 1usize..3) {
        let (s, p) = setup(seed, m);
        let phi = CutoffFunction::smooth_bump(1.0, 2.0).unwrap();
        let t = 0.5;
        let grid = FdGrid::for_time(t, phi.support, None, 100);
        let r = oracle_check(&s, &p, &phi, false, t, &grid).unwrap();
        prop_assert!(r.agrees, "exact {} numeric {} est {}", r.exact, r.numeric.value, r.numeric.error_estimate);
    }
}
