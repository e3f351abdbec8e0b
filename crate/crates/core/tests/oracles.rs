use num_complex::Complex64;

use dispcomp_core::compensator::{compensate, matched_subsystem, residual_max, CompensatorSpec};
use dispcomp_core::convergence::band_edge;
use dispcomp_core::fiber::{propagate, FiberParams};
use dispcomp_core::signal::{make_gaussian_pulse, make_sinc_pulse, sinc_width_for_bandwidth, FrequencyGrid};

#[test]
fn gaussian_field_matches_analytic_solution() {
    let t0 = 50e-12;
    let beta2 = -21e-27;
    let z = 80e3;
    let grid = FrequencyGrid::new(4096, 0.5e-12).unwrap();
    let tx = make_gaussian_pulse(&grid, t0, 1.0).unwrap();
    let rx = propagate(&tx, &FiberParams::with_beta2(beta2, z, "smf").unwrap()).unwrap();

    // a(z,t) = t0/sqrt(t0² + jβ₂z)·exp(−t²/(2(t0² + jβ₂z)))
    let q = Complex64::new(t0 * t0, beta2 * z);
    let tc = grid.center_time();
    let mut worst: f64 = 0.0;
    for (i, s) in rx.samples().iter().enumerate() {
        let t = grid.time(i) - tc;
        let expected = t0 / q.sqrt() * (-(t * t) / (2.0 * q)).exp();
        worst = worst.max((s - expected).norm());
    }
    assert!(worst < 1e-9, "max deviation {worst:e}");
}

#[test]
fn many_stages_undo_the_fiber() {
    let b = 3e9;
    let grid = FrequencyGrid::new(8192, sinc_width_for_bandwidth(b) * 64.0 / 8192.0).unwrap();
    let tx = make_sinc_pulse(&grid, sinc_width_for_bandwidth(b), 1.0).unwrap();
    let fiber = FiberParams::from_beta2_ps2_km(-21.0, 130.0, "smf").unwrap();
    let rx = propagate(&tx, &fiber).unwrap();
    let sub = matched_subsystem(&fiber, -2806e-27, 1.0, false).unwrap();

    let mut prev = f64::INFINITY;
    for k in [1, 2, 4, 8, 16] {
        let spec = CompensatorSpec::new(sub.clone(), k);
        let out = compensate(&rx, &spec).unwrap();
        let err = out.relative_energy_error(&tx).unwrap();
        let bound = residual_max(&spec, &grid, band_edge(b)).unwrap();
        // in-band error is bounded by the worst residual
        assert!(err <= bound * bound * (1.0 + 1e-9) + 1e-20, "K={k}: {err:e} > {:e}", bound * bound);
        assert!(err <= prev);
        prev = err;
    }
    assert!(prev < 1e-20);
}
