use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use hyperconc::analysis::{entropy, fidelity, reduce_photon, Dof};
use hyperconc::circuits::{parse, print, run, CircuitSpec, Selection};
use hyperconc::elements::{apply, DetectorSpec, Element};
use hyperconc::fock::{apply_unitary, FockState, ModeRegister, ModeUnitary, Occupation, Polarization};
use hyperconc::measurement::{measure, Side};
use hyperconc::montecarlo::{sample, AcceptRule};
use hyperconc::protocols::states::PairPaths;
use hyperconc::protocols::{closed_form, run_protocol, ProtocolKind, ProtocolParams};

const PATHS: [&str; 3] = ["p", "q", "r"];

fn register() -> Arc<ModeRegister> {
    Arc::new(ModeRegister::with_paths(&PATHS).unwrap())
}

/// Unitary from the QR factor of a random complex matrix.
fn unitary_from(entries: &[f64], n: usize) -> DMatrix<Complex64> {
    let m = DMatrix::from_fn(n, n, |i, j| Complex64::new(entries[2 * (i * n + j)], entries[2 * (i * n + j) + 1]));
    m.qr().q()
}

fn arb_unitary(n: usize) -> impl Strategy<Value = DMatrix<Complex64>> {
    prop::collection::vec(-1.0..1.0f64, 2 * n * n)
        .prop_filter("full rank", move |v| v.iter().map(|x| x * x).sum::<f64>() > 0.1)
        .prop_map(move |v| unitary_from(&v, n))
}

/// Random state of up to three photons over the six modes of `register()`.
fn arb_state() -> impl Strategy<Value = FockState> {
    prop::collection::vec((prop::collection::vec(0usize..6, 1..=3), -1.0..1.0f64, -1.0..1.0f64), 1..6)
        .prop_filter_map("nonzero", |terms| {
            let reg = register();
            let mut amps = BTreeMap::new();
            for (modes, re, im) in terms {
                let mut counts = BTreeMap::new();
                for m in modes {
                    *counts.entry(m).or_insert(0u32) += 1;
                }
                *amps.entry(Occupation::from_counts(counts)).or_insert(Complex64::new(0.0, 0.0)) += Complex64::new(re, im);
            }
            let s = FockState::from_map(reg, amps);
            s.normalize().ok().map(|(s, _)| s)
        })
}

fn fixed_photon_state() -> impl Strategy<Value = FockState> {
    (prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 4), 0usize..6, 0usize..6).prop_filter_map("nonzero", |(c, m1, m2)| {
        let reg = register();
        let configs = [
            Occupation::from_counts([(m1, 1), (m2, 1)].into_iter().fold(BTreeMap::new(), |mut acc, (m, n)| {
                *acc.entry(m).or_insert(0) += n;
                acc
            })),
            Occupation::from_counts([(0, 1), (3, 1)]),
            Occupation::from_counts([(1, 2)]),
            Occupation::from_counts([(2, 1), (5, 1)]),
        ];
        let amps: BTreeMap<_, _> = configs.into_iter().zip(c).map(|(k, (a, b))| (k, Complex64::new(a, b))).collect();
        FockState::from_map(reg, amps).normalize().ok().map(|(s, _)| s)
    })
}

fn photon_counts(s: &FockState) -> Vec<(u32, f64)> {
    let mut by_n: BTreeMap<u32, f64> = BTreeMap::new();
    for (c, a) in s.amplitudes() {
        *by_n.entry(c.total()).or_default() += a.norm_sqr();
    }
    by_n.into_iter().collect()
}

fn arb_element() -> impl Strategy<Value = Element> {
    let path = || prop::sample::select(PATHS.to_vec());
    let pair = || prop::sample::subsequence(PATHS.to_vec(), 2).prop_map(|v| (v[0], v[1]));
    prop_oneof![
        pair().prop_map(|(a, b)| Element::bs(a, b)),
        (pair(), 0.0..=1.0f64).prop_map(|((a, b), r)| Element::ubs(a, b, r)),
        pair().prop_map(|(a, b)| Element::pbs(a, b)),
        (path(), -6.3..6.3f64).prop_map(|(p, t)| Element::wp(p, t)),
        path().prop_map(Element::hwp45),
        path().prop_map(Element::hwp90),
        path().prop_map(Element::pflip),
        path().prop_map(Element::delay),
        pair().prop_map(|(a, b)| Element::sflip(a, b)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unitaries_preserve_norm_and_photon_number(u in arb_unitary(6), s in arb_state()) {
        let op = ModeUnitary::new((0..6).collect(), u).unwrap();
        let out = apply_unitary(&s, &op).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
        let (before, after) = (photon_counts(&s), photon_counts(&out));
        prop_assert_eq!(before.len(), after.len());
        for ((n1, p1), (n2, p2)) in before.iter().zip(&after) {
            prop_assert_eq!(n1, n2);
            prop_assert!((p1 - p2).abs() < 1e-10);
        }
    }

    #[test]
    fn unitaries_compose(u in arb_unitary(4), v in arb_unitary(4), s in arb_state()) {
        let modes = vec![0, 1, 2, 3];
        let stepwise = apply_unitary(&apply_unitary(&s, &ModeUnitary::new(modes.clone(), u.clone()).unwrap()).unwrap(),
            &ModeUnitary::new(modes.clone(), v.clone()).unwrap()).unwrap();
        let composed = apply_unitary(&s, &ModeUnitary::new(modes, &v * &u).unwrap()).unwrap();
        prop_assert!((stepwise.inner(&composed).unwrap().norm() - 1.0).abs() < 1e-9);
        prop_assert!((stepwise.inner(&composed).unwrap().re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn inner_product_is_preserved(u in arb_unitary(6), s in fixed_photon_state(), t in fixed_photon_state()) {
        let op = ModeUnitary::new((0..6).collect(), u).unwrap();
        let before = s.inner(&t).unwrap();
        let after = apply_unitary(&s, &op).unwrap().inner(&apply_unitary(&t, &op).unwrap()).unwrap();
        prop_assert!((before - after).norm() < 1e-10);
    }

    #[test]
    fn element_sequences_preserve_norm(els in prop::collection::vec(arb_element(), 0..8), s in arb_state()) {
        let mut x = s.clone();
        for e in &els {
            x = apply(&x, e).unwrap();
        }
        prop_assert!((x.norm_sqr() - 1.0).abs() < 1e-10);
        prop_assert_eq!(x.photon_numbers(), s.photon_numbers());
    }

    #[test]
    fn pbs_conserves_each_polarization(pair in prop::sample::subsequence(PATHS.to_vec(), 2), s in arb_state()) {
        let out = apply(&s, &Element::pbs(pair[0], pair[1])).unwrap();
        let reg = s.register().clone();
        let count = |st: &FockState, pol: Polarization| -> Vec<(u32, u64)> {
            let mut m: BTreeMap<u32, f64> = BTreeMap::new();
            for (c, a) in st.amplitudes() {
                let n: u32 = c.entries().iter().filter(|(i, _)| reg.label(*i).unwrap().pol == pol).map(|(_, n)| n).sum();
                *m.entry(n).or_default() += a.norm_sqr();
            }
            m.into_iter().map(|(k, p)| (k, (p * 1e9).round() as u64)).collect()
        };
        prop_assert_eq!(count(&s, Polarization::H), count(&out, Polarization::H));
        prop_assert_eq!(count(&s, Polarization::V), count(&out, Polarization::V));
    }

    #[test]
    fn elements_square_to_identity(e in arb_element().prop_filter("involutions", |e| matches!(e,
        Element::Pbs{..} | Element::Hwp45{..} | Element::Hwp90{..} | Element::PolPhaseFlip{..} | Element::SpatialPhaseFlip{..} | Element::WavePlate{..} | Element::BalancedBs{..})),
        s in arb_state()) {
        let twice = apply(&apply(&s, &e).unwrap(), &e).unwrap();
        prop_assert!((twice.inner(&s).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn branch_probabilities_sum_to_one(els in prop::collection::vec(arb_element(), 0..5), s in arb_state(), eta in 0.0..=1.0f64, pnr in any::<bool>()) {
        let mut x = s;
        for e in &els {
            x = apply(&x, e).unwrap();
        }
        let d = if pnr { DetectorSpec::pnr("D1", "p") } else { DetectorSpec::threshold("D1", "p") };
        let branches = measure(&x, &[d.with_efficiency(eta), DetectorSpec::threshold("D2", "q")]).unwrap();
        let total: f64 = branches.iter().map(|b| b.probability).sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        for b in &branches {
            prop_assert!(b.probability >= 0.0);
            prop_assert!((b.state.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn measure_free_circuits_concatenate(x in prop::collection::vec(arb_element(), 0..5), y in prop::collection::vec(arb_element(), 0..5), s in arb_state()) {
        let mut a = CircuitSpec::on(register());
        x.iter().for_each(|e| { a.element(e.clone()); });
        let mut b = CircuitSpec::on(register());
        y.iter().for_each(|e| { b.element(e.clone()); });
        let mid = run(&a, &s).unwrap().remove(0).state;
        let two = run(&b, &mid).unwrap();
        let one = run(&a.then(&b).unwrap(), &s).unwrap();
        prop_assert_eq!(one.len(), 1);
        prop_assert!((one[0].state.inner(&two[0].state).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn print_parse_round_trip(els in prop::collection::vec(arb_element(), 0..10), eta in 0.0..=1.0f64, detect in any::<bool>()) {
        let mut spec = CircuitSpec::on(register());
        spec.notes = vec!["generated".into(), String::new()];
        for e in els {
            spec.element(e);
        }
        if detect {
            spec.detect(DetectorSpec::threshold("D1", "r").with_efficiency(eta));
            spec.detect(DetectorSpec::pnr("D2", "q"));
            spec.measure().select(Selection::NoClicks);
            spec.element(Element::pbs("p", "q"));
        }
        let text = print(&spec);
        let back = parse(&text).unwrap();
        prop_assert_eq!(&back, &spec);
        prop_assert_eq!(print(&back), text);
    }
}

fn two_pair() -> impl Strategy<Value = ProtocolParams> {
    (0.05..1.5f64, 0.05..1.5f64, any::<bool>(), any::<bool>()).prop_map(|(u, v, s1, s2)| {
        let sg = |b: bool| if b { -1.0 } else { 1.0 };
        ProtocolParams::new(u.cos(), sg(s1) * u.sin(), v.cos(), sg(s2) * v.sin())
    })
}

fn four_terms() -> impl Strategy<Value = ProtocolParams> {
    (0.1..1.47f64, 0.1..1.47f64, 0.1..1.47f64).prop_map(|(w, u, v)| {
        let (c, s) = (w.cos(), w.sin());
        ProtocolParams::new(c * u.cos(), c * u.sin(), s * v.cos(), s * v.sin())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bell_kinds_match_closed_form(p in two_pair()) {
        for kind in [ProtocolKind::PsBell, ProtocolKind::SpBell, ProtocolKind::SpClusterBellType] {
            let r = run_protocol(kind, &p).unwrap();
            prop_assert!((r.success_probability - closed_form(kind, &p).unwrap()).abs() < 1e-10);
            for b in &r.branches {
                prop_assert!((b.fidelity - 1.0).abs() < 1e-10, "{} {:?}", kind, b);
            }
        }
    }

    #[test]
    fn cluster_kinds_match_closed_form(p in four_terms()) {
        for kind in [ProtocolKind::PsCluster, ProtocolKind::SpClusterArbitrary] {
            let r = run_protocol(kind, &p).unwrap();
            prop_assert!((r.success_probability - closed_form(kind, &p).unwrap()).abs() < 1e-10);
            prop_assert!((r.target_fidelity - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn outputs_are_maximally_entangled_in_each_dof(p in two_pair()) {
        let rails = PairPaths::ab();
        for kind in [ProtocolKind::PsBell, ProtocolKind::SpBell, ProtocolKind::SpClusterBellType] {
            let r = run_protocol(kind, &p).unwrap();
            for (_, s) in r.output.members() {
                for dof in [Dof::Polarization, Dof::Spatial] {
                    let rd = reduce_photon(s, &rails, Side::Bob, dof).unwrap();
                    prop_assert!((entropy(&rd) - 1.0).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn purification_map(f in 0.0..=1.0f64) {
        let r = run_protocol(ProtocolKind::HyperEpp, &ProtocolParams::fidelity(f)).unwrap();
        let expect = f * f / (f * f + (1.0 - f) * (1.0 - f));
        prop_assert!((r.target_fidelity - expect).abs() < 1e-10);
        prop_assert!((r.success_probability - (f * f + (1.0 - f) * (1.0 - f)) / 2.0).abs() < 1e-10);
    }

    #[test]
    fn entropy_is_bounded(p in two_pair()) {
        let reg = Arc::new(ModeRegister::with_paths(&["a1", "a2", "b1", "b2"]).unwrap());
        let ab = PairPaths::ab();
        let s = hyperconc::protocols::states::on(&reg, &hyperconc::protocols::states::bell_class(&ab, p.alpha, p.beta, p.gamma, p.delta)).unwrap();
        let both = reduce_photon(&s, &ab, Side::Alice, Dof::Both).unwrap();
        let e = entropy(&both);
        prop_assert!((-1e-12..=2.0 + 1e-12).contains(&e));
        prop_assert!((both.trace() - 1.0).abs() < 1e-10);
        prop_assert!(both.hermitian_deviation() < 1e-12);
        prop_assert!(both.eigenvalues().iter().all(|&l| l >= -1e-12));
        let t = hyperconc::protocols::states::on(&reg, &hyperconc::protocols::states::phi_f(&ab)).unwrap();
        prop_assert!((fidelity(&s, &t).unwrap() - fidelity(&t, &s).unwrap()).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>(), eta in 0.0..=1.0f64) {
        let p = ProtocolParams::new(0.8, 0.6, 0.6, 0.8);
        let a = sample(ProtocolKind::PsBell, &p, eta, 5000, seed, AcceptRule::Pattern).unwrap();
        let b = sample(ProtocolKind::PsBell, &p, eta, 5000, seed, AcceptRule::Pattern).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.accepted <= a.shots);
    }
}
