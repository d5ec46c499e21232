//! Unknown-parameter concentration and purification with two-copy parity checks.

use crate::circuits::{CircuitSpec, Selection, Step};
use crate::elements::{DetectorSpec, Element};
use crate::error::{Error, Result};
use crate::fock::FockState;
use crate::measurement::{OutcomeBranch, ParityLayout, ParityPort, Side};
use crate::protocols::states::PairPaths;

/// Correction rule: flip B's polarization (spatial) phase when the two sides' polarization
/// (spatial) bits differ, each XORed with a fixed base flag.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward {
    pub layout: ParityLayout,
    pub base_pol: bool,
    pub base_spatial: bool,
    /// Photon B's rails once the stage is done.
    pub b: [String; 2],
}

impl FeedForward {
    pub fn corrections(&self, branch: &OutcomeBranch) -> Result<Vec<Element>> {
        let alice = self.layout.single_click(&branch.pattern, Side::Alice)?;
        let bob = self.layout.single_click(&branch.pattern, Side::Bob)?;
        let (Some(a), Some(b)) = (alice, bob) else {
            return Err(Error::RejectedBranch);
        };
        let mut ops = Vec::new();
        if (a.pol_bit ^ b.pol_bit) ^ self.base_pol {
            ops.push(Element::pflip(&self.b[0]));
            ops.push(Element::pflip(&self.b[1]));
        }
        if (a.spatial_bit ^ b.spatial_bit) ^ self.base_spatial {
            ops.push(Element::sflip(&self.b[0], &self.b[1]));
        }
        Ok(ops)
    }

    pub fn apply(&self, branch: &OutcomeBranch) -> Result<(FockState, Vec<Element>)> {
        let ops = self.corrections(branch)?;
        let mut s = branch.state.clone();
        for e in &ops {
            s = crate::elements::apply(&s, e)?;
        }
        Ok((s, ops))
    }
}

fn port(detector: String, pol_bit: bool, spatial_bit: bool) -> ParityPort {
    ParityPort { detector, pol_bit, spatial_bit }
}

/// Names for one parity-check block acting on pairs `keep` (AB) and `probe` (CD).
pub struct BlockNames<'a> {
    pub keep: &'a PairPaths,
    pub probe: &'a PairPaths,
    /// Suffix for the extra polarization-split paths.
    pub split: &'a str,
    /// First detector number (detectors are `DA<n>` / `DB<n>`).
    pub first: usize,
}

impl BlockNames<'_> {
    /// Paths this block adds to the register.
    pub fn extra_paths(&self) -> Vec<String> {
        let s = self.split;
        vec![
            format!("{}{s}", self.probe.a[0]),
            format!("{}{s}", self.probe.a[1]),
            format!("{}{s}", self.keep.b[0]),
            format!("{}{s}", self.probe.b[0]),
        ]
    }
}

/// Appends the polarization check on Alice's pair (A, C) and the spatial check on Bob's
/// pair (B, D), measures, selects one click per side and moves B's surviving rail from
/// D's second path onto B's first path.
pub fn bell_parity_block(spec: &mut CircuitSpec, n: &BlockNames, flip_probe: bool, eta: f64) -> ParityLayout {
    let (a, c, b, d) = (&n.keep.a, &n.probe.a, &n.keep.b, &n.probe.b);
    let sp = |p: &String| format!("{p}{}", n.split);
    if flip_probe {
        for p in c.iter().chain(d.iter()) {
            spec.element(Element::hwp90(p));
        }
    }
    spec.element(Element::pbs(&a[0], &c[1]));
    spec.element(Element::pbs(&a[1], &c[0]));
    spec.element(Element::bs(&c[0], &c[1]));
    for p in c {
        spec.element(Element::hwp45(p));
        spec.element(Element::pbs(p, &sp(p)));
    }
    spec.element(Element::bs(&b[0], &d[0]));
    for p in [&b[0], &d[0]] {
        spec.element(Element::hwp45(p));
        spec.element(Element::pbs(p, &sp(p)));
    }
    let alice_paths = [(&c[0], false, false), (&c[0], true, false), (&c[1], false, true), (&c[1], true, true)];
    let bob_paths = [(&b[0], false, false), (&b[0], true, false), (&d[0], false, true), (&d[0], true, true)];
    let layout = add_detectors(spec, &alice_paths, &bob_paths, n, eta);
    spec.element(Element::ubs(&d[1], &b[0], 0.0));
    layout
}

/// Purification block: both sides run the polarization check on their own pair.
pub fn purification_block(spec: &mut CircuitSpec, n: &BlockNames, eta: f64) -> ParityLayout {
    let sp = |p: &String| format!("{p}{}", n.split);
    for (x, y) in [(&n.keep.a, &n.probe.a), (&n.keep.b, &n.probe.b)] {
        spec.element(Element::pbs(&x[0], &y[1]));
        spec.element(Element::pbs(&x[1], &y[0]));
        spec.element(Element::bs(&y[0], &y[1]));
        for p in y {
            spec.element(Element::hwp45(p));
            spec.element(Element::pbs(p, &sp(p)));
        }
    }
    let (c, d) = (&n.probe.a, &n.probe.b);
    let alice_paths = [(&c[0], false, false), (&c[0], true, false), (&c[1], false, true), (&c[1], true, true)];
    let bob_paths = [(&d[0], false, false), (&d[0], true, false), (&d[1], false, true), (&d[1], true, true)];
    add_detectors(spec, &alice_paths, &bob_paths, n, eta)
}

pub fn purification_extra_paths(n: &BlockNames) -> Vec<String> {
    let s = n.split;
    n.probe.a.iter().chain(n.probe.b.iter()).map(|p| format!("{p}{s}")).collect()
}

fn add_detectors(
    spec: &mut CircuitSpec,
    alice: &[(&String, bool, bool); 4],
    bob: &[(&String, bool, bool); 4],
    n: &BlockNames,
    eta: f64,
) -> ParityLayout {
    let mut layout = ParityLayout { alice: Vec::new(), bob: Vec::new() };
    for (side, list, out) in [("DA", alice, &mut layout.alice), ("DB", bob, &mut layout.bob)] {
        for (i, (path, pol, spatial)) in list.iter().enumerate() {
            let name = format!("{side}{}", n.first + i);
            let watched = if *pol { format!("{path}{}", n.split) } else { path.to_string() };
            spec.push(Step::Detect(DetectorSpec::pnr(&name, &watched).with_efficiency(eta)));
            out.push(port(name, *pol, *spatial));
        }
    }
    spec.measure();
    spec.select(Selection::OnePerSide {
        alice: layout.detector_names(Side::Alice),
        bob: layout.detector_names(Side::Bob),
    });
    layout
}
