//! End-to-end paths through synthesis, evolution, extraction and diagnostics.

use nls_core::diagnostics::{linearizability_experiment, EpsilonLadder, RunOptions, Verdict, VerdictThresholds};
use nls_core::evolution::{evolve_guarded, BlowUpGuard};
use nls_core::extraction::{decompose, ExtractionConfig};
use nls_core::functionals::{conserved_ledger, gaussian_field};
use nls_core::profiles::{orthogonality_gap, synthesize_data, ProfileSpec, ScaleExpr, Waveform};
use nls_core::{Grid, NlsError, Nonlinearity, SemiclassicalSetup};
use num_complex::Complex64;

fn spec(h: f64, x0: f64) -> ProfileSpec {
    let mut s = ProfileSpec::centered(1);
    s.h = ScaleExpr::constant(h);
    s.x0 = vec![ScaleExpr::constant(x0)];
    s
}

#[test]
fn synthesized_profiles_are_recovered_by_extraction() {
    let grid = Grid::new(1, 4096, 20.0).unwrap();
    let phi = Waveform::Gaussian.reference_field(1).unwrap();
    let items = vec![(spec(1.0, -5.0), phi.clone()), (spec(0.125, 5.0), phi)];
    let (data, ledger) = synthesize_data(&items, None, 1.0, grid).unwrap();
    assert!(ledger.relative_defect() < 1e-6);
    let result = decompose(&data, &ExtractionConfig::default()).unwrap();
    assert_eq!(result.bubbles.len(), 2);
    let mut scales: Vec<f64> = result.bubbles.iter().map(|b| b.h).collect();
    scales.sort_by(f64::total_cmp);
    assert!((scales[0] / 0.125).log2().abs() <= 1.0, "{scales:?}");
    assert!(scales[1].log2().abs() <= 1.0, "{scales:?}");
    let rebuilt = result.reconstruction().unwrap();
    assert!(rebuilt.sub(&data).unwrap().l2_norm() < 1e-10 * data.l2_norm());
}

#[test]
fn sqrt_scale_profiles_are_orthogonal_to_unit_scale() {
    let mut small = ProfileSpec::centered(1);
    small.h = "sqrt(eps)".parse().unwrap();
    let ladder = EpsilonLadder::default();
    let gap = orthogonality_gap(&ProfileSpec::centered(1), &small, ladder.values()).unwrap();
    assert!(gap.orthogonal);
    assert!(gap.values.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn supercritical_mass_blows_up_and_subcritical_does_not() {
    let grid = Grid::new(2, 128, 8.0).unwrap();
    let st = SemiclassicalSetup::new(1.0, Nonlinearity::Focusing, 2).unwrap();
    let q = nls_core::analytic::ground_state(2, grid).unwrap().into_field();
    let big = q.scaled(Complex64::new(1.2, 0.0));
    match evolve_guarded(&big, 2.0, 4000, &st, &[2.0], BlowUpGuard::default()) {
        Err(NlsError::BlowUp { time, .. }) => assert!(time > 0.0 && time < 2.0),
        other => panic!("expected blow-up, got {other:?}"),
    }
    let small = gaussian_field(grid, 1.0, &[0.0, 0.0], &[0.0, 0.0]).unwrap().scaled(Complex64::new(0.5, 0.0));
    let traj = evolve_guarded(&small, 1.0, 1000, &st, &[1.0], BlowUpGuard::default()).unwrap();
    let e0 = conserved_ledger(&small, &st).unwrap();
    let e1 = conserved_ledger(&traj.snapshots[0].field, &st).unwrap();
    assert!((e1.mass - e0.mass).abs() < 1e-12);
}

#[test]
fn small_defocusing_data_linearize() {
    let grid = Grid::new(1, 256, 10.0).unwrap();
    let u = gaussian_field(grid, 1.0, &[0.0], &[0.0]).unwrap().scaled(Complex64::new(0.5, 0.0));
    let template = SemiclassicalSetup::new(1.0, Nonlinearity::Defocusing, 1).unwrap();
    let opts = RunOptions {
        dt: Some(2e-3),
        snapshots: 17,
        ..RunOptions::default()
    };
    let data = move |_: f64| Ok(u.clone());
    let report = linearizability_experiment(
        "small",
        &data,
        0.5,
        &template,
        &EpsilonLadder::geometric(0.1, 0.5, 4).unwrap(),
        &opts,
        &VerdictThresholds::default(),
    )
    .unwrap();
    assert_eq!(report.verdict, Verdict::LinearizableTrend);
    assert!(report.to_csv().lines().count() == 5);
}
