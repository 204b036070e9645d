use proptest::prelude::*;
use qdarwin::darwinism::{fraction_grid, mutual_information, redundancy_trace, FragmentOrderings};
use qdarwin::{ModeSet, ModelParams, Simulation, SpectralDensityParams};

fn sim(omega_s: f64, r: f64, kappa: f64, n: usize) -> Simulation {
    let spectral = SpectralDensityParams::new(kappa, 0.3, 0.7).unwrap();
    Simulation::new(ModelParams::new(omega_s, r, spectral, n).unwrap()).unwrap()
}

fn system_entropy(omega_s: f64, n: usize, t: f64) -> f64 {
    sim(omega_s, 3.0, 0.05, n).state_at(t).entropy_of(&ModeSet::single(0)).unwrap()
}

#[test]
fn system_entropy_converges_as_the_bath_is_refined() {
    for omega_s in [0.45, 0.5, 0.55] {
        let h: Vec<f64> = [75, 150, 300].iter().map(|&n| system_entropy(omega_s, n, 40.0)).collect();
        let (d1, d2) = ((h[1] - h[0]).abs(), (h[2] - h[1]).abs());
        assert!(d2 < d1, "omega_s = {omega_s}: H_S = {h:?}");
    }
}

#[test]
fn redundancy_trace_is_consistent() {
    let s = sim(0.5, 10.0, 0.05, 60);
    let orderings = FragmentOrderings::new(60, 4, 3).unwrap();
    let grid = fraction_grid(0.05).unwrap();
    let times: Vec<f64> = (0..=10).map(|i| i as f64 * 5.0).collect();
    let tr = redundancy_trace(&s, &times, 0.05, &grid, &orderings).unwrap();
    assert_eq!(tr.f_delta[0], 1.0);
    for (f, r) in tr.f_delta.iter().zip(&tr.r_delta) {
        assert!(*f > 0.0 && *f <= 1.0);
        assert!((f * r - 1.0).abs() < 1e-12);
    }
    assert!(tr.non_monotonicity() >= 0.0);
}

#[test]
fn decoherence_grows_with_the_fragment_at_resonance() {
    let s = sim(0.5, 10.0, 0.05, 40);
    let state = s.state_at(30.0);
    let mut prev: f64 = 0.0;
    for k in 1..=40 {
        let frag = ModeSet::new((1..=k).collect()).unwrap();
        let d = s.decoherence(&state, &frag, 30.0).unwrap().d_value;
        assert!(d >= prev - 1e-9 * prev.max(1.0), "k = {k}: {d} < {prev}");
        prev = d;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn information_bounds_hold_on_random_fragments(
        omega_s in 0.35f64..0.9,
        t in 0.0f64..80.0,
        picks in proptest::collection::btree_set(1usize..=30, 1..30),
    ) {
        let s = sim(omega_s, 3.0, 0.05, 30);
        let state = s.state_at(t);
        let h_s = state.entropy_of(&ModeSet::single(0)).unwrap();
        let frag = ModeSet::new(picks.into_iter().collect()).unwrap();
        let i = mutual_information(&state, &frag).unwrap();
        prop_assert!(i >= -1e-9);
        prop_assert!(i <= 2.0 * h_s + 1e-8);
        let rest = frag.complement(31);
        let rest: Vec<usize> = rest.modes().iter().copied().filter(|&m| m != 0).collect();
        if !rest.is_empty() {
            let j = mutual_information(&state, &ModeSet::new(rest).unwrap()).unwrap();
            prop_assert!((i + j - 2.0 * h_s).abs() < 1e-7 * h_s.max(1.0));
        }
    }

    #[test]
    fn decoupled_bath_learns_nothing(omega_s in 0.1f64..1.5, t in 0.0f64..100.0, k in 1usize..=8) {
        let s = sim(omega_s, 2.0, 0.0, 8);
        let state = s.state_at(t);
        let i = mutual_information(&state, &ModeSet::single(k)).unwrap();
        prop_assert!(i.abs() < 1e-9);
        prop_assert!(s.decoherence(&state, &ModeSet::single(k), t).unwrap().d_value.abs() < 1e-12);
    }
}
