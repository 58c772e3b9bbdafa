use nls_core::evolution::{free_propagate, rescale_from_unit, rescale_to_unit, split_step};
use nls_core::functionals::gaussian_field;
use nls_core::profiles::ScaleExpr;
use nls_core::{Field, Grid, Nonlinearity, SemiclassicalSetup};
use num_complex::Complex64;
use proptest::prelude::*;

fn packet(width: f64, center: f64, freq: f64, amp: f64) -> Field {
    let g = Grid::new(1, 256, 16.0).unwrap();
    gaussian_field(g, width, &[center], &[freq]).unwrap().scaled(Complex64::new(amp, 0.0))
}

fn nonlinearity(focusing: bool) -> Nonlinearity {
    if focusing {
        Nonlinearity::Focusing
    } else {
        Nonlinearity::Defocusing
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn free_flow_is_unitary_and_a_group(
        width in 0.5f64..2.0, center in -3.0f64..3.0, freq in -4.0f64..4.0,
        eps in 0.05f64..1.0, s in -2.0f64..2.0, t in -2.0f64..2.0,
    ) {
        let u = packet(width, center, freq, 1.0);
        let lin = SemiclassicalSetup::new(eps, Nonlinearity::Defocusing, 1).unwrap().linear();
        let a = free_propagate(&free_propagate(&u, s, &lin).unwrap(), t, &lin).unwrap();
        let b = free_propagate(&u, s + t, &lin).unwrap();
        prop_assert!((a.l2_norm() - u.l2_norm()).abs() < 1e-12);
        prop_assert!(a.sub(&b).unwrap().l2_norm() < 1e-12);
    }

    #[test]
    fn split_step_preserves_mass(
        width in 0.5f64..2.0, amp in 0.1f64..1.5, freq in -3.0f64..3.0,
        dt in 1e-4f64..1e-2, focusing in any::<bool>(),
    ) {
        let u = packet(width, 0.0, freq, amp);
        let st = SemiclassicalSetup::new(1.0, nonlinearity(focusing), 1).unwrap();
        let mut v = u.clone();
        for _ in 0..10 {
            v = split_step(&v, dt, &st).unwrap();
        }
        prop_assert!((v.l2_norm() - u.l2_norm()).abs() < 1e-12 * u.l2_norm());
    }

    #[test]
    fn rescaling_is_invertible_and_preserves_mass(
        width in 0.5f64..2.0, center in -2.0f64..2.0, eps in 0.01f64..1.0,
    ) {
        let u = packet(width, center, 0.0, 1.0);
        let small = rescale_from_unit(&u, eps).unwrap();
        let back = rescale_to_unit(&small, eps).unwrap();
        prop_assert!((small.l2_norm() - u.l2_norm()).abs() < 1e-12);
        prop_assert!(back.sub(&u).unwrap().l2_norm() < 1e-12);
        // ε∫|u^ε|^γ is the unit-scale value
        let gamma = 6.0;
        let rel = (eps * small.lp_integral(gamma) - u.lp_integral(gamma)).abs() / u.lp_integral(gamma);
        prop_assert!(rel < 1e-12);
    }

    #[test]
    fn field_bytes_round_trip(width in 0.5f64..2.0, freq in -4.0f64..4.0) {
        let u = packet(width, 0.5, freq, 1.0);
        let mut buf = Vec::new();
        u.write_to(&mut buf).unwrap();
        let v = Field::read_from(buf.as_slice()).unwrap();
        prop_assert_eq!(v.samples(), u.samples());
        prop_assert_eq!(v.grid(), u.grid());
    }

    #[test]
    fn scale_expr_display_round_trip(
        coeffs in proptest::collection::vec(-4i32..=4, 5),
        eps in 0.001f64..1.0,
    ) {
        let text = coeffs
            .iter()
            .zip(-2..=2)
            .filter(|(c, _)| **c != 0)
            .map(|(c, k)| format!("({c})*eps^({k}/2)"))
            .collect::<Vec<_>>()
            .join(" + ");
        let text = if text.is_empty() { "0".to_string() } else { text };
        let e: ScaleExpr = text.parse().unwrap();
        let again: ScaleExpr = e.to_string().parse().unwrap();
        prop_assert_eq!(&again, &e);
        let direct: f64 = coeffs.iter().zip(-2..=2).map(|(c, k)| *c as f64 * eps.powf(k as f64 / 2.0)).sum();
        prop_assert!((e.eval(eps) - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
    }
}
