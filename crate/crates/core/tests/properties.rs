mod common;

use proptest::prelude::*;
use rand::Rng;

use steersim::linalg::{hermitian_eig, kron, partial_trace, psd_sqrt};
use steersim::measurement::{embed, luders_update, make_instrument, UnsharpSetting};
use steersim::scenario::{scan_region, simulate, Mode, Protocol, ScenarioConfig};
use steersim::state::{bloch_form, ghz, DensityMatrix};
use steersim::steering::{
    closed_form_local, closed_form_nonlocal, coherence_factor, effect_from_bloch, ellipsoid, steered_bloch_vector,
    steering_parameter, SettingStrength, SteeredParty, StrengthHistory,
};
use steersim::{ComplexMatrix, Pauli};

use common::{pauli_strings_commute, random_density, random_history, random_pauli_string, rng};

fn random_matrix(seed: u64, dim: usize) -> ComplexMatrix {
    let mut r = rng(seed);
    let rows: Vec<Vec<num_complex::Complex64>> = (0..dim)
        .map(|_| {
            (0..dim)
                .map(|_| num_complex::Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
                .collect()
        })
        .collect();
    ComplexMatrix::from_rows(&rows).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn kron_is_associative(a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let (a, b, c) = (random_matrix(a, 2), random_matrix(b, 2), random_matrix(c, 4));
        let left = kron(&kron(&a, &b).unwrap(), &c).unwrap();
        let right = kron(&a, &kron(&b, &c).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right) < 1e-12);
    }

    #[test]
    fn partial_trace_keeps_trace(seed in any::<u64>(), keep in 0usize..3) {
        let rho = random_density(&mut rng(seed), 3);
        let reduced = partial_trace(rho.matrix(), &[keep], &[2, 2, 2]).unwrap();
        prop_assert!((reduced.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(reduced.trace().im.abs() < 1e-12);
    }

    #[test]
    fn eigendecomposition_reconstructs(seed in any::<u64>(), dim in prop::sample::select(vec![2usize, 4, 8])) {
        let h = random_matrix(seed, dim).hermitian_part();
        let eig = hermitian_eig(&h).unwrap();
        let v = &eig.vectors;
        prop_assert!(v.adjoint().matmul(v).max_abs_diff(&ComplexMatrix::identity(dim)) < 1e-10);
        let back = v.matmul(&ComplexMatrix::diag(&eig.values)).matmul(&v.adjoint());
        prop_assert!(back.max_abs_diff(&h) < 1e-10);
        prop_assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn psd_root_squares_back(seed in any::<u64>()) {
        let rho = random_density(&mut rng(seed), 2);
        let root = psd_sqrt(rho.matrix()).unwrap();
        prop_assert!(root.matmul(&root).max_abs_diff(rho.matrix()) < 1e-10);
        prop_assert!(root.is_hermitian(1e-12));
    }

    #[test]
    fn bloch_form_round_trips(seed in any::<u64>()) {
        let rho = random_density(&mut rng(seed), 2);
        let b = bloch_form(&rho).unwrap();
        prop_assert!(b.reconstruct().max_abs_diff(rho.matrix()) < 1e-12);
        let swapped = b.swapped().swapped();
        prop_assert_eq!(swapped, b);
    }

    #[test]
    fn instruments_are_complete_and_trace_preserving(seed in any::<u64>(), lambda in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let (_, direction) = random_pauli_string(&mut r, 2);
        let setting = UnsharpSetting::new(direction, lambda, vec![0, 1]).unwrap();
        let inst = make_instrument(&setting, 3).unwrap();
        let sum = &inst.kraus[0].adjoint().matmul(&inst.kraus[0]) + &inst.kraus[1].adjoint().matmul(&inst.kraus[1]);
        prop_assert!(sum.max_abs_diff(&ComplexMatrix::identity(8)) < 1e-10);
        let effects = &inst.effects[0] + &inst.effects[1];
        prop_assert!(effects.max_abs_diff(&ComplexMatrix::identity(8)) < 1e-12);
        let rho = random_density(&mut r, 3);
        let post = luders_update(&rho, &[setting]).unwrap();
        prop_assert!((post.trace() - 1.0).abs() < 1e-10);
        prop_assert!(post.min_eigenvalue().unwrap() > -1e-10);
    }

    #[test]
    fn sharp_instrument_is_projective(seed in any::<u64>(), q in 0usize..3) {
        let mut r = rng(seed);
        let (_, direction) = random_pauli_string(&mut r, 1);
        let setting = UnsharpSetting::new(direction.clone(), 1.0, vec![q]).unwrap();
        let inst = make_instrument(&setting, 3).unwrap();
        let d = embed(&direction, &[q], 3).unwrap();
        let id = ComplexMatrix::identity(8);
        prop_assert!(inst.kraus[0].max_abs_diff(&(&id + &d).scale_real(0.5)) < 1e-10);
        prop_assert!(inst.kraus[1].max_abs_diff(&(&id - &d).scale_real(0.5)) < 1e-10);
        prop_assert!(inst.kraus[0].matmul(&inst.kraus[0]).max_abs_diff(&inst.kraus[0]) < 1e-10);
    }

    #[test]
    fn damping_follows_commutation(seed in any::<u64>(), lambda in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let (dir, direction) = random_pauli_string(&mut r, 2);
        let (obs, observable) = random_pauli_string(&mut r, 3);
        let rho = random_density(&mut r, 3);
        let post = luders_update(&rho, &[UnsharpSetting::new(direction, lambda, vec![0, 1]).unwrap()]).unwrap();
        let factor = if pauli_strings_commute(&[dir[0], dir[1], Pauli::I], &obs) { 1.0 } else { coherence_factor(lambda) };
        let before = rho.expectation(&observable).unwrap();
        prop_assert!((post.expectation(&observable).unwrap() - factor * before).abs() < 1e-10);
    }

    #[test]
    fn conditional_states_stay_inside_ellipsoids(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rho = random_density(&mut r, 2);
        let w: f64 = r.gen_range(0.0..=1.0);
        let radius = w.min(1.0 - w) * r.gen_range(0.0f64..=1.0);
        let u = [r.gen_range(-1.0f64..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
        let norm = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt().max(1e-12);
        let effect = effect_from_bloch(w, [radius * u[0] / norm, radius * u[1] / norm, radius * u[2] / norm]);
        let (point, p) = steered_bloch_vector(&rho, &effect).unwrap();
        prop_assume!(p > 1e-9);
        let b = bloch_form(&rho).unwrap();
        let e = ellipsoid(&b, SteeredParty::Charlie).unwrap();
        prop_assert!(e.contains(point, 1e-6));
        // Same check with the roles exchanged.
        let swapped = DensityMatrix::new(b.swapped().reconstruct()).unwrap();
        let (point, p) = steered_bloch_vector(&swapped, &effect).unwrap();
        prop_assume!(p > 1e-9);
        prop_assert!(ellipsoid(&b, SteeredParty::Ab).unwrap().contains(point, 1e-6));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simulation_matches_closed_forms(seed in any::<u64>(), pairs in 1usize..=3, general in any::<bool>()) {
        let h = random_history(&mut rng(seed), pairs, general);
        let initial = ghz();
        let protocol = Protocol::derive(&initial, &ScenarioConfig::default()).unwrap();
        for step in simulate(&initial, &protocol, &h, false).unwrap() {
            prop_assert!((step.steering - closed_form_nonlocal(&h, step.pair).unwrap()).abs() <= 1e-10);
        }
        for step in simulate(&initial, &protocol, &h, true).unwrap() {
            prop_assert!((step.steering - closed_form_local(&h, step.pair).unwrap()).abs() <= 1e-10);
        }
    }

    #[test]
    fn nonlocal_beats_local_after_the_first_pair(seed in any::<u64>(), pairs in 2usize..=3) {
        let mut r = rng(seed);
        let lambdas: Vec<Vec<f64>> = (0..pairs)
            .map(|_| vec![r.gen_range(0.01..0.99), r.gen_range(0.01..0.99)])
            .collect();
        let h = StrengthHistory::from_lambdas(&lambdas).unwrap();
        for i in 2..=pairs {
            prop_assert!(closed_form_nonlocal(&h, i).unwrap() > closed_form_local(&h, i).unwrap());
        }
        prop_assert_eq!(closed_form_nonlocal(&h, 1).unwrap(), closed_form_local(&h, 1).unwrap());
    }

    #[test]
    fn flipping_paired_signs_leaves_s_unchanged(seed in any::<u64>(), k in 0usize..2) {
        let mut r = rng(seed);
        let rho = random_density(&mut r, 3);
        let protocol = Protocol::derive(&ghz(), &ScenarioConfig::default()).unwrap();
        let mut dirs: Vec<ComplexMatrix> = protocol.pair_directions.iter().map(|d| d.matrix()).collect();
        let mut charlie = protocol.charlie.clone();
        let lambdas = [r.gen_range(0.0..=1.0), r.gen_range(0.0..=1.0)];
        let before = steering_parameter(&rho, &dirs, &lambdas, &charlie).unwrap();
        dirs[k] = dirs[k].scale_real(-1.0);
        charlie[k] = charlie[k].scale_real(-1.0);
        let after = steering_parameter(&rho, &dirs, &lambdas, &charlie).unwrap();
        prop_assert_eq!(before, after);
    }
}

#[test]
fn earlier_strengths_monotonically_damp_later_pairs() {
    let grid: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    let step = 1e-3;
    for &later in &[0.3, 0.8, 1.0] {
        for &l1 in &grid {
            for &l2 in &grid {
                for setting in 0..2 {
                    let mut bumped = [l1, l2];
                    if bumped[setting] + step > 1.0 {
                        continue;
                    }
                    bumped[setting] += step;
                    let base = StrengthHistory::from_lambdas(&[vec![l1, l2], vec![later, later]]).unwrap();
                    let up = StrengthHistory::from_lambdas(&[bumped.to_vec(), vec![later, later]]).unwrap();
                    let (a, b) = (closed_form_nonlocal(&base, 2).unwrap(), closed_form_nonlocal(&up, 2).unwrap());
                    assert!(b < a, "S2 did not drop at {l1}, {l2}, setting {setting}: {a} -> {b}");
                }
            }
        }
    }
}

#[test]
fn third_pair_damped_by_both_earlier_pairs() {
    let base = StrengthHistory::equal(&[0.4, 0.6, 0.9]).unwrap();
    let up1 = StrengthHistory::equal(&[0.5, 0.6, 0.9]).unwrap();
    let up2 = StrengthHistory::equal(&[0.4, 0.7, 0.9]).unwrap();
    let s = closed_form_nonlocal(&base, 3).unwrap();
    assert!(closed_form_nonlocal(&up1, 3).unwrap() < s);
    assert!(closed_form_nonlocal(&up2, 3).unwrap() < s);
}

#[test]
fn local_success_implies_nonlocal_success_and_regions_are_nonempty() {
    for pairs in [2usize, 3] {
        let strengths: Vec<f64> = if pairs == 3 { vec![0.0, 0.0, 1.0] } else { vec![0.0, 0.0] };
        let records = scan_region(&ScenarioConfig::equal(Mode::Compare, &strengths), 61).unwrap();
        let mut activated = vec![0usize; pairs];
        for r in &records {
            assert_eq!(r.s[0], r.st[0], "first pair differs at {:?}", r.params);
            for i in 1..pairs {
                let (s, st) = (r.s[i].unwrap(), r.st[i].unwrap());
                if st > r.bound {
                    assert!(s > r.bound, "local-only success at {:?}, pair {}", r.params, i + 1);
                }
                if s > r.bound && st <= r.bound {
                    activated[i] += 1;
                    assert!(r.region.contains(["I", "II"][i - 1]));
                }
            }
        }
        assert!(activated[1] > 0, "region I empty");
        if pairs == 3 {
            assert!(activated[2] > 0, "region II empty");
        }
    }
}

#[test]
fn ellipsoid_volume_shrinks_slower_with_first_strength_fixed() {
    let cfg = ScenarioConfig::default();
    let fixed = std::f64::consts::FRAC_1_SQRT_2;
    let samples: Vec<f64> = (0..=10).map(|k| fixed + (1.0 - fixed) * k as f64 / 10.0).collect();
    let vol = |l: [f64; 2]| steersim::scenario::post_pair1_ellipsoids(&cfg, l).unwrap().charlie.volume;
    for w in samples.windows(2) {
        assert!(vol([fixed, w[1]]) >= vol([w[1], w[1]]) - 1e-12);
    }
    let drop_unequal = vol([fixed, fixed]) - vol([fixed, 1.0]);
    let drop_equal = vol([fixed, fixed]) - vol([1.0, 1.0]);
    assert!(drop_unequal < drop_equal);
    assert!((vol([0.0, 0.0]) - 1.0).abs() < 1e-10);
}

#[test]
fn local_history_with_unit_gamma_damps_nothing() {
    let pairs = vec![
        vec![SettingStrength::local(0.4, 1.0).unwrap(), SettingStrength::local(0.9, 1.0).unwrap()],
        vec![SettingStrength::symmetric(0.8).unwrap(), SettingStrength::symmetric(0.8).unwrap()],
    ];
    let h = StrengthHistory::new(pairs).unwrap();
    assert!((closed_form_local(&h, 2).unwrap() - 0.8 / 4.0 * 2.0).abs() < 1e-12);
}
