use std::f64::consts::PI;

use proptest::prelude::*;
use saa_memory::dispersion::decompose_window;
use saa_memory::params::{AtomParams, RateConvention};
use saa_memory::scattering::ScatteringModel;
use saa_memory::scattering::{
    chain_product_periodic, closed_form_m11, reflection_coeff, transmission, ArrayGeometry,
    DriveConfig,
};
use saa_memory::spectra::{sweep_transmission, DetuningGrid};

fn atom(gamma_sg: f64, eg: f64, es: f64) -> AtomParams {
    AtomParams::new(
        gamma_sg * eg,
        gamma_sg * es,
        gamma_sg,
        2.0 * PI * 10.4e9,
        2.0 * PI * 6.99e9,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn lossy_atoms_never_amplify(
        gamma_sg in 0.05e6..2e6, eg in 5.0..300.0, es in 1.0..100.0,
        rabi in 0.0..6e8, detuning in -3e8..3e8, n in 1usize..60, l in 0.0..5e-3,
    ) {
        let atom = atom(gamma_sg, eg, es);
        let geom = ArrayGeometry::new(n, l, 1.2e8).unwrap();
        let t = transmission(&atom, &DriveConfig::new(rabi, detuning).unwrap(), &geom).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&t));
    }

    #[test]
    fn reflection_is_conjugate_symmetric(
        gamma_sg in 0.05e6..2e6, eg in 5.0..300.0, es in 1.0..100.0, rabi in 0.0..6e8, detuning in 0.0..3e8,
    ) {
        let atom = atom(gamma_sg, eg, es);
        let plus = reflection_coeff(&atom, &DriveConfig::new(rabi, detuning).unwrap());
        let minus = reflection_coeff(&atom, &DriveConfig::new(rabi, -detuning).unwrap());
        prop_assert!((plus - minus.conj()).norm() < 1e-14);
    }

    #[test]
    fn closed_form_agrees_with_chain(
        gamma_sg in 0.05e6..2e6, eg in 5.0..300.0, es in 1.0..100.0,
        rabi in 0.0..6e8, detuning in -3e8..3e8, phi in 0.01..(2.0 * PI - 0.01), n in 1usize..120,
    ) {
        let r = reflection_coeff(&atom(gamma_sg, eg, es), &DriveConfig::new(rabi, detuning).unwrap());
        let chain = chain_product_periodic(r, phi, n).unwrap().m11;
        let closed = closed_form_m11(r, phi, n).unwrap();
        prop_assert!((closed - chain).norm() / chain.norm() < 1e-9);
    }

    #[test]
    fn decomposition_identities(rabi in 5e7..6e8, l in 0.2e-3..3e-3) {
        let atom = AtomParams::fluxonium(RateConvention::Angular);
        let geom = ArrayGeometry::new(2, l, 1.2e8).unwrap();
        if let Ok(d) = decompose_window(&atom, rabi, &geom) {
            prop_assert!(d.coeffs.product_defect() < 1e-10);
            let [a, b] = d.coeffs.square_defects();
            prop_assert!(a < 1e-10 && b < 1e-10);
        }
    }
}

#[test]
fn parallel_sweep_matches_sequential_evaluation() {
    let atom = AtomParams::fluxonium(RateConvention::Angular);
    let geom = ArrayGeometry::new(40, 0.9e-3, 1.2e8).unwrap();
    let grid = DetuningGrid::new(2.0 * PI * 200e6, 1001).unwrap();
    let sweep = sweep_transmission(&atom, &grid, 2e8, &geom, ScatteringModel::Full).unwrap();
    for (d, a) in sweep.grid.points() {
        let direct = ScatteringModel::Full
            .amplitude(&atom, 2e8, &geom, d)
            .unwrap();
        assert_eq!(a, direct);
    }
}
