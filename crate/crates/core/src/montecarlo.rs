//! Shot sampling with lossy detectors.
//!
//! Each shot walks the exact unit-efficiency branch tree of a protocol: a branch is drawn
//! from its exact probability, every detector then registers each incident photon with
//! probability `eta`, and the registered pattern decides acceptance and feed-forward
//! exactly as a lab would. Random numbers come from ChaCha8 seeded with `seed`, one
//! stream per chunk of `CHUNK` shots, so results do not depend on the thread count.

use std::collections::BTreeSet;
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::circuits::{run, Selection};
use crate::elements::{apply, DetectorSpec, Element};
use crate::error::{Error, Result};
use crate::fock::FockState;
use crate::measurement::{registered, DetectionPattern, OutcomeBranch};
use crate::protocols::{finish_branch, plan, ProtocolKind, ProtocolParams, ProtocolPlan};

const CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum AcceptRule {
    /// Accept on the detector pattern alone.
    #[default]
    Pattern,
    /// Additionally require one registered photon on each side's output rails.
    Postselect,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShotStats {
    pub shots: u64,
    pub accepted: u64,
    /// Accepted shots whose registered pattern undercounted the photons actually present,
    /// so the delivered state is not the target.
    pub false_accepts: u64,
    pub estimate: f64,
    pub stderr: f64,
    pub seed: u64,
    pub eta: f64,
    pub rule: AcceptRule,
}

struct Node {
    branches: Vec<TreeBranch>,
    cumulative: Vec<f64>,
}

struct TreeBranch {
    inner: OutcomeBranch,
    /// Indexed by the feed-forward op list chosen from the registered pattern.
    children: [OnceLock<Result<Arc<Node>>>; 4],
    survivors: OnceLock<Result<Vec<((u32, u32), f64)>>>,
}

struct Sampler {
    plan: ProtocolPlan,
    detectors: Vec<Vec<DetectorSpec>>,
    selections: Vec<Selection>,
    roots: Vec<Arc<Node>>,
    root_cumulative: Vec<f64>,
    rail_sets: [BTreeSet<String>; 2],
}

fn cumulative(ws: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    ws.map(|w| {
        acc += w;
        acc
    })
    .collect()
}

fn pick(cum: &[f64], u: f64) -> usize {
    let total = cum.last().copied().unwrap_or(0.0);
    cum.partition_point(|&c| c <= u * total).min(cum.len().saturating_sub(1))
}

fn slot(ops: &[Element]) -> usize {
    let pol = ops.iter().any(|e| matches!(e, Element::PolPhaseFlip { .. }));
    let sp = ops.iter().any(|e| matches!(e, Element::SpatialPhaseFlip { .. }));
    usize::from(pol) + 2 * usize::from(sp)
}

impl Sampler {
    fn new(kind: ProtocolKind, params: &ProtocolParams) -> Result<Self> {
        let plan = plan(kind, &params.with_eta(1.0))?;
        let detectors = plan.stages.iter().map(|s| s.spec.detectors().cloned().collect()).collect();
        let selections = plan.stages.iter().map(|s| s.accept()).collect();
        let members = plan.input.members();
        let root_cumulative = cumulative(members.iter().map(|(w, _)| *w));
        let mut s = Sampler {
            rail_sets: [
                plan.rails.a.iter().cloned().collect(),
                plan.rails.b.iter().cloned().collect(),
            ],
            plan,
            detectors,
            selections,
            roots: Vec::new(),
            root_cumulative,
        };
        s.roots = members.iter().map(|(_, m)| s.node(0, m)).collect::<Result<_>>()?;
        Ok(s)
    }

    fn node(&self, stage: usize, input: &FockState) -> Result<Arc<Node>> {
        let spec = self.plan.stages[stage].spec.without_selection();
        let branches: Vec<TreeBranch> = run(&spec, input)?
            .into_iter()
            .map(|inner| TreeBranch { inner, children: Default::default(), survivors: OnceLock::new() })
            .collect();
        let cumulative = cumulative(branches.iter().map(|b| b.inner.probability));
        Ok(Arc::new(Node { branches, cumulative }))
    }

    fn child(&self, stage: usize, b: &TreeBranch, registered: &DetectionPattern) -> Result<Arc<Node>> {
        let probe = OutcomeBranch { pattern: registered.clone(), ..b.inner.clone() };
        let st = &self.plan.stages[stage];
        let ops = match &st.feed_forward {
            Some(ff) => ff.corrections(&probe)?,
            None => Vec::new(),
        };
        let cell = &b.children[slot(&ops)];
        cell.get_or_init(|| {
            let mut s = b.inner.state.clone();
            for e in ops.iter().chain(&st.post) {
                s = apply(&s, e)?;
            }
            self.node(stage + 1, &s)
        })
        .clone()
    }

    /// Distribution of photon counts on (A rails, B rails) in the branch's final state.
    fn survivors<'a>(&self, stage: usize, b: &'a TreeBranch) -> Result<&'a [((u32, u32), f64)]> {
        let r = b.survivors.get_or_init(|| {
            let (s, _) = finish_branch(&self.plan.stages[stage], &b.inner).unwrap_or_else(|_| (b.inner.state.clone(), Vec::new()));
            let reg = s.register().clone();
            let mut out: Vec<((u32, u32), f64)> = Vec::new();
            for (config, amp) in s.amplitudes() {
                let mut k = (0, 0);
                for &(m, n) in config.entries() {
                    let path = &reg.label(m)?.spatial;
                    if self.rail_sets[0].contains(path) {
                        k.0 += n;
                    } else if self.rail_sets[1].contains(path) {
                        k.1 += n;
                    }
                }
                match out.iter_mut().find(|(key, _)| *key == k) {
                    Some(e) => e.1 += amp.norm_sqr(),
                    None => out.push((k, amp.norm_sqr())),
                }
            }
            Ok(out)
        });
        match r {
            Ok(v) => Ok(v.as_slice()),
            Err(e) => Err(e.clone()),
        }
    }

    /// Returns (accepted, faithful).
    fn shot(&self, rng: &mut ChaCha8Rng, eta: f64, rule: AcceptRule) -> Result<(bool, bool)> {
        let thin = |rng: &mut ChaCha8Rng, n: u32| (0..n).filter(|_| rng.random_bool(eta)).count() as u32;
        let mut node = self.roots[pick(&self.root_cumulative, rng.random())].clone();
        let mut faithful = true;
        let last = self.plan.stages.len() - 1;
        for stage in 0..=last {
            let b = &node.branches[pick(&node.cumulative, rng.random())];
            let mut pattern = DetectionPattern::default();
            for d in &self.detectors[stage] {
                let n = b.inner.actual.count(&d.name);
                let r = registered(d.model, thin(rng, n));
                faithful &= r == registered(d.model, n);
                pattern.0.insert(d.name.clone(), r);
            }
            if !self.selections[stage].accepts(&pattern) {
                return Ok((false, faithful));
            }
            if stage < last {
                node = self.child(stage, b, &pattern)?;
                continue;
            }
            if rule == AcceptRule::Postselect {
                let dist = self.survivors(stage, b)?;
                let cum = cumulative(dist.iter().map(|(_, p)| *p));
                let (na, nb) = dist[pick(&cum, rng.random())].0;
                if thin(rng, na) != 1 || thin(rng, nb) != 1 {
                    return Ok((false, faithful));
                }
            }
        }
        Ok((true, faithful))
    }
}

pub fn sample(kind: ProtocolKind, params: &ProtocolParams, eta: f64, shots: u64, seed: u64, rule: AcceptRule) -> Result<ShotStats> {
    if shots == 0 {
        return Err(Error::InvalidParams("shots must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::BadEfficiency(eta));
    }
    let sampler = Sampler::new(kind, params)?;
    let chunks = shots.div_ceil(CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let n = CHUNK.min(shots - c * CHUNK);
            let mut acc = (0u64, 0u64);
            for _ in 0..n {
                let (ok, faithful) = sampler.shot(&mut rng, eta, rule)?;
                if ok {
                    acc.0 += 1;
                    acc.1 += u64::from(!faithful);
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let (accepted, false_accepts) = counts.iter().fold((0, 0), |a, c| (a.0 + c.0, a.1 + c.1));
    let p = accepted as f64 / shots as f64;
    Ok(ShotStats {
        shots,
        accepted,
        false_accepts,
        estimate: p,
        stderr: (p * (1.0 - p) / shots as f64).sqrt(),
        seed,
        eta,
        rule,
    })
}
