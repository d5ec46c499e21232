//! Photon detection, branch enumeration and post-selection.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::elements::{DetectorModel, DetectorSpec};
use crate::ensemble::WeightedEnsemble;
use crate::error::{Error, Result};
use crate::fock::{FockState, Occupation, Polarization};

/// Registered count per detector name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DetectionPattern(pub BTreeMap<String, u32>);

impl DetectionPattern {
    pub fn count(&self, name: &str) -> u32 {
        self.0.get(name).copied().unwrap_or(0)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn total(&self) -> u32 {
        self.0.values().sum()
    }

    pub fn is_dark(&self) -> bool {
        self.total() == 0
    }

    pub fn clicked(&self) -> impl Iterator<Item = &str> {
        self.0.iter().filter(|(_, &n)| n > 0).map(|(k, _)| k.as_str())
    }

    pub fn merge(&mut self, other: &DetectionPattern) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), *v);
        }
    }
}

impl fmt::Display for DetectionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("-");
        }
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(" "))
    }
}

#[derive(Debug, Clone)]
pub struct OutcomeBranch {
    /// What the detectors registered.
    pub pattern: DetectionPattern,
    /// Photons actually present at each detector.
    pub actual: DetectionPattern,
    pub probability: f64,
    /// Normalized conditional state; watched modes are left in vacuum.
    pub state: FockState,
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Probability that exactly `r` of `n` photons register at efficiency `eta`.
pub fn thinning_weight(n: u32, r: u32, eta: f64) -> f64 {
    binomial(n, r) * eta.powi(r as i32) * (1.0 - eta).powi((n - r) as i32)
}

pub fn registered(model: DetectorModel, count: u32) -> u32 {
    match model {
        DetectorModel::Threshold => count.min(1),
        DetectorModel::NumberResolving => count,
    }
}

pub fn measure(state: &FockState, detectors: &[DetectorSpec]) -> Result<Vec<OutcomeBranch>> {
    let reg = state.register();
    let mut names = BTreeSet::new();
    let mut owner: HashMap<usize, usize> = HashMap::new();
    for (i, d) in detectors.iter().enumerate() {
        d.validate()?;
        if !names.insert(d.name.as_str()) {
            return Err(Error::DuplicateDetector(d.name.clone()));
        }
        for pol in Polarization::BOTH {
            let m = reg.mode(&d.path, pol)?;
            if owner.insert(m, i).is_some() {
                return Err(Error::Shape(format!("path {} watched by two detectors", d.path)));
            }
        }
    }
    let watched: BTreeSet<usize> = owner.keys().copied().collect();
    let total = state.norm_sqr();
    if total < 1e-300 {
        return Err(Error::ZeroState);
    }

    let mut groups: BTreeMap<Occupation, BTreeMap<Occupation, Complex64>> = BTreeMap::new();
    for (config, amp) in state.amplitudes() {
        let (seen, rest) = config.split(&watched);
        *groups.entry(seen).or_default().entry(rest).or_default() += amp;
    }

    let mut out = Vec::new();
    for (seen, rest) in groups {
        let cond = FockState::from_map(reg.clone(), rest);
        let p = cond.norm_sqr() / total;
        if p == 0.0 {
            continue;
        }
        let (cond, _) = cond.normalize()?;
        let mut counts = vec![0u32; detectors.len()];
        for &(m, n) in seen.entries() {
            counts[owner[&m]] += n;
        }
        let actual = DetectionPattern(
            detectors.iter().zip(&counts).map(|(d, &n)| (d.name.clone(), n)).collect(),
        );
        for (pattern, w) in registrations(detectors, &counts) {
            out.push(OutcomeBranch { pattern, actual: actual.clone(), probability: p * w, state: cond.clone() });
        }
    }
    Ok(out)
}

/// Every registered pattern reachable from the true counts, with its thinning weight.
fn registrations(detectors: &[DetectorSpec], counts: &[u32]) -> Vec<(DetectionPattern, f64)> {
    let mut acc: BTreeMap<DetectionPattern, f64> = BTreeMap::new();
    acc.insert(DetectionPattern::default(), 1.0);
    for (d, &n) in detectors.iter().zip(counts) {
        let mut next = BTreeMap::new();
        for (pat, w) in &acc {
            for r in 0..=n {
                let wr = thinning_weight(n, r, d.efficiency);
                if wr == 0.0 {
                    continue;
                }
                let mut p = pat.clone();
                p.0.insert(d.name.clone(), registered(d.model, r));
                *next.entry(p).or_insert(0.0) += w * wr;
            }
        }
        acc = next;
    }
    acc.into_iter().collect()
}

#[derive(Debug, Clone)]
pub struct PostSelection {
    pub probability: f64,
    /// `None` when nothing matched.
    pub ensemble: Option<WeightedEnsemble>,
}

pub fn post_select(branches: &[OutcomeBranch], predicate: impl Fn(&DetectionPattern) -> bool) -> Result<PostSelection> {
    let kept: Vec<&OutcomeBranch> = branches.iter().filter(|b| predicate(&b.pattern)).collect();
    let probability = kept.iter().map(|b| b.probability).sum();
    if kept.is_empty() {
        return Ok(PostSelection { probability: 0.0, ensemble: None });
    }
    let ensemble = WeightedEnsemble::from_weighted(kept.iter().map(|b| (b.probability, b.state.clone())))?;
    Ok(PostSelection { probability, ensemble: Some(ensemble) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Alice,
    Bob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
    Reject,
}

/// One detector of a two-copy parity-check layout and the outcome bits it reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityPort {
    pub detector: String,
    pub pol_bit: bool,
    pub spatial_bit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityLayout {
    pub alice: Vec<ParityPort>,
    pub bob: Vec<ParityPort>,
}

impl ParityLayout {
    pub fn ports(&self, side: Side) -> &[ParityPort] {
        match side {
            Side::Alice => &self.alice,
            Side::Bob => &self.bob,
        }
    }

    pub fn detector_names(&self, side: Side) -> Vec<String> {
        self.ports(side).iter().map(|p| p.detector.clone()).collect()
    }

    fn side_total(&self, pattern: &DetectionPattern, side: Side) -> Result<u32> {
        let mut n = 0;
        for p in self.ports(side) {
            if !pattern.contains(&p.detector) {
                return Err(Error::Shape(format!("pattern has no detector {}", p.detector)));
            }
            n += pattern.count(&p.detector);
        }
        Ok(n)
    }

    /// The port that registered the side's single photon, if exactly one did.
    pub fn single_click(&self, pattern: &DetectionPattern, side: Side) -> Result<Option<&ParityPort>> {
        if self.side_total(pattern, side)? != 1 {
            return Ok(None);
        }
        Ok(self.ports(side).iter().find(|p| pattern.count(&p.detector) == 1))
    }

    pub fn accepts(&self, pattern: &DetectionPattern) -> Result<bool> {
        Ok(classify_parity(pattern, Side::Alice, self)? != Parity::Reject
            && classify_parity(pattern, Side::Bob, self)? != Parity::Reject)
    }
}

/// Alice's polarization check is even when exactly one of her detectors fires; Bob's
/// spatial check is odd when exactly one of his fires. Anything else rejects.
pub fn classify_parity(pattern: &DetectionPattern, side: Side, layout: &ParityLayout) -> Result<Parity> {
    if layout.side_total(pattern, side)? != 1 {
        return Ok(Parity::Reject);
    }
    Ok(match side {
        Side::Alice => Parity::Even,
        Side::Bob => Parity::Odd,
    })
}
