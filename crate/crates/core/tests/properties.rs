use num_complex::Complex64;
use proptest::prelude::*;

use dispcomp_core::compensator::{e_d_tf, matched_subsystem};
use dispcomp_core::convergence::{z_max, StabilityModel};
use dispcomp_core::fiber::{dispersion_tf, FiberParams};
use dispcomp_core::iterative::{inversion_residual, partial_sum_tf, IterationSpec};
use dispcomp_core::signal::{apply_tf, fwhm, make_gaussian_pulse, Envelope, FrequencyGrid, TransferFunction};

const LAMBDA: f64 = 1550e-9;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn envelope(grid: FrequencyGrid, parts: &[(f64, f64)]) -> Envelope {
    let samples = parts.iter().map(|&(re, im)| c(re, im)).collect();
    Envelope::new(grid, samples, LAMBDA).unwrap()
}

fn samples(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n)
}

fn max_diff(a: &Envelope, b: &Envelope) -> f64 {
    a.samples()
        .iter()
        .zip(b.samples())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval(parts in samples(256), dt in 1e-13..1e-10f64) {
        let e = envelope(FrequencyGrid::new(256, dt).unwrap(), &parts);
        let (et, ef) = (e.energy(), e.to_spectrum().energy());
        prop_assert!((et - ef).abs() <= 1e-12 * et);
    }

    #[test]
    fn dispersion_is_linear(
        x in samples(128),
        y in samples(128),
        a in (-2.0..2.0f64, -2.0..2.0f64),
        b in (-2.0..2.0f64, -2.0..2.0f64),
        beta2 in -3e-26..3e-26f64,
    ) {
        let grid = FrequencyGrid::new(128, 10e-12).unwrap();
        let (x, y) = (envelope(grid, &x), envelope(grid, &y));
        let (a, b) = (c(a.0, a.1), c(b.0, b.1));
        let h = dispersion_tf(&FiberParams::with_beta2(beta2, 50e3, "f").unwrap(), &grid, false);
        let lhs = apply_tf(&x.linear_combination(a, &y, b).unwrap(), &h).unwrap();
        let rhs = apply_tf(&x, &h).unwrap().linear_combination(a, &apply_tf(&y, &h).unwrap(), b).unwrap();
        prop_assert!(max_diff(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn dispersion_composes(z1 in 0.0..80e3f64, z2 in 0.0..80e3f64, beta3 in -1e-40..1e-40f64) {
        let grid = FrequencyGrid::new(256, 20e-12).unwrap();
        let fiber = FiberParams::new(vec![0.0, 0.0, -21e-27, beta3], 1.0, "f").unwrap();
        let h = |z: f64| dispersion_tf(&fiber.with_length(z).unwrap(), &grid, false);
        let both = h(z1).cascade(&h(z2)).unwrap();
        let once = h(z1 + z2);
        let w = grid.max_delta_omega();
        // phase rounding grows with the largest phase on the grid
        let tol = 1e-14 * (1.0 + 21e-27 * (z1 + z2) * w * w);
        for (p, q) in both.values().iter().zip(once.values()) {
            prop_assert!((p - q).norm() <= tol);
        }
    }

    #[test]
    fn width_ignores_scale_and_delay(
        t0_ps in 20.0..80.0f64,
        gain in 0.01..100.0f64,
        shift in -300isize..300,
    ) {
        let grid = FrequencyGrid::new(2048, 1e-12).unwrap();
        let e = make_gaussian_pulse(&grid, t0_ps * 1e-12, 1.0).unwrap();
        let w = fwhm(&e).unwrap().fwhm;
        let scaled = fwhm(&e.scaled(c(gain, 0.0))).unwrap().fwhm;
        let delayed = fwhm(&e.rotated(shift)).unwrap().fwhm;
        prop_assert!((scaled - w).abs() <= 1e-12 * w);
        prop_assert!((delayed - w).abs() <= 1e-12 * w);
    }

    #[test]
    fn partial_sum_closed_form(re in -0.99..0.99f64, im in -0.99..0.99f64, k in 0usize..=64) {
        let e = c(re, im);
        prop_assume!(e.norm() < 0.99);
        let grid = FrequencyGrid::new(2, 1.0).unwrap();
        let s = partial_sum_tf(&TransferFunction::constant(grid, e), k).values()[0];
        let closed = (c(1.0, 0.0) - e.powu(k as u32 + 1)) / (c(1.0, 0.0) - e);
        prop_assert!((s - closed).norm() <= 1e-12 * closed.norm().max(1.0));
    }

    #[test]
    fn residual_shrinks_with_terms(parts in prop::collection::vec((0.05..1.0f64, -1.0..1.0f64), 64), mu in 0.2..1.0f64) {
        // |1 − μh| < 1 for h = r·e^{jφ} with μr <= 1 < 2cos φ
        let grid = FrequencyGrid::new(64, 1.0).unwrap();
        let h = TransferFunction::new(grid, parts.iter().map(|&(r, p)| Complex64::from_polar(r, p)).collect()).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..=32 {
            let r = inversion_residual(&h, IterationSpec::new(k, mu).unwrap());
            prop_assert!(r <= prev * (1.0 + 1e-12));
            prev = r;
        }
    }

    #[test]
    fn stable_is_monotone(
        alpha in 0.01..=1.0f64,
        delta in 0.0..0.5f64,
        b in 0.5e9..20e9f64,
        z1 in 0.0..2e6f64,
        z2 in 0.0..2e6f64,
    ) {
        let beta2 = -21e-27;
        let (near, far) = if z1 < z2 { (z1, z2) } else { (z2, z1) };
        let m = StabilityModel::beta2_only(alpha, beta2).unwrap();
        if m.stable(b, far).unwrap() {
            prop_assert!(m.stable(b, near).unwrap());
        }
        // larger α never enlarges the region
        let weaker = StabilityModel::beta2_only((alpha - delta).max(1e-3), beta2).unwrap();
        if m.stable(b, far).unwrap() {
            prop_assert!(weaker.stable(b, far).unwrap());
        }
    }

    #[test]
    fn boundary_scales_as_inverse_square(alpha in 0.01..=1.0f64, b in 0.1e9..50e9f64, s in 0.1..10.0f64) {
        let beta2 = -21e-27;
        let c1 = z_max(b, alpha, beta2).unwrap() * b * b;
        let c2 = z_max(s * b, alpha, beta2).unwrap() * (s * b) * (s * b);
        prop_assert!((c1 - c2).abs() <= 1e-12 * c1);
    }

    #[test]
    fn e_d_follows_branch_phase(
        alpha in 0.25..=1.0f64,
        beta2_ps2 in -40.0..-5.0f64,
        z_km in 10.0..200.0f64,
        pcf_ps2 in -4000.0..-500.0f64,
    ) {
        let grid = FrequencyGrid::new(512, 20e-12).unwrap();
        let smf = FiberParams::from_beta2_ps2_km(beta2_ps2, z_km, "smf").unwrap();
        let sub = matched_subsystem(&smf, pcf_ps2 * 1e-27, alpha, false).unwrap();
        let e_d = e_d_tf(&sub, &grid);
        for (k, v) in e_d.values().iter().enumerate() {
            let w = grid.delta_omega(k);
            // matched branch carries the fiber's own β₂z phase
            let phi = 0.5 * beta2_ps2 * 1e-27 * z_km * 1e3 * w * w;
            let expected = c(1.0, 0.0) - alpha.sqrt() * Complex64::from_polar(1.0, -phi);
            prop_assert!((v - expected).norm() <= 8.0 * f64::EPSILON * (1.0 + phi.abs()));
        }
    }
}
