//! Initial states, circuit builders, feed-forward and closed forms for every protocol.

pub mod schmidt;
pub mod splitting;
pub mod states;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::circuits::{run_with, CircuitSpec, Selection, Step};
use crate::elements::{apply, BsConvention, Element};
pub use crate::ensemble::WeightedEnsemble;
use crate::error::{Error, Result};
use crate::fock::{FockState, ModeRegister};
use crate::measurement::{DetectionPattern, OutcomeBranch};
use schmidt::{bell_parity_block, purification_block, purification_extra_paths, BlockNames, FeedForward};
use states::{PairPaths, Terms};

const NORM_TOL: f64 = 1e-10;
const NONZERO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProtocolKind {
    PsBell,
    PsCluster,
    SpBell,
    SpClusterBellType,
    SpClusterArbitrary,
    HyperEpp,
    EcpPol,
    EcpSpatial,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 8] = [
        ProtocolKind::PsBell,
        ProtocolKind::PsCluster,
        ProtocolKind::SpBell,
        ProtocolKind::SpClusterBellType,
        ProtocolKind::SpClusterArbitrary,
        ProtocolKind::HyperEpp,
        ProtocolKind::EcpPol,
        ProtocolKind::EcpSpatial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::PsBell => "ps-bell",
            ProtocolKind::PsCluster => "ps-cluster",
            ProtocolKind::SpBell => "sp-bell",
            ProtocolKind::SpClusterBellType => "sp-cluster-belltype",
            ProtocolKind::SpClusterArbitrary => "sp-cluster-arbitrary",
            ProtocolKind::HyperEpp => "hyper-epp",
            ProtocolKind::EcpPol => "ecp-pol",
            ProtocolKind::EcpSpatial => "ecp-spatial",
        }
    }

    /// Photon pairs consumed per trial.
    pub fn resource_count(self) -> u32 {
        match self {
            ProtocolKind::SpBell | ProtocolKind::SpClusterBellType | ProtocolKind::HyperEpp => 2,
            ProtocolKind::SpClusterArbitrary => 4,
            _ => 1,
        }
    }

    pub fn photon_count(self) -> u32 {
        2 * self.resource_count()
    }

    /// Which parameters the kind reads.
    pub fn family(self) -> ParamFamily {
        match self {
            ProtocolKind::PsBell | ProtocolKind::SpBell | ProtocolKind::SpClusterBellType => ParamFamily::TwoPairs,
            ProtocolKind::PsCluster | ProtocolKind::SpClusterArbitrary => ParamFamily::FourTerms,
            ProtocolKind::EcpPol | ProtocolKind::EcpSpatial => ParamFamily::OnePair,
            ProtocolKind::HyperEpp => ParamFamily::Fidelity,
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProtocolKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown protocol {s}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamFamily {
    /// `alpha^2 + beta^2 = 1` and `gamma^2 + delta^2 = 1`.
    TwoPairs,
    /// `alpha^2 + beta^2 + gamma^2 + delta^2 = 1`.
    FourTerms,
    /// `alpha^2 + beta^2 = 1`.
    OnePair,
    /// `f1` only.
    Fidelity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub f1: Option<f64>,
    pub eta: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams { alpha: 0.0, beta: 0.0, gamma: 0.0, delta: 0.0, f1: None, eta: 1.0 }
    }
}

impl ProtocolParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Self {
        ProtocolParams { alpha, beta, gamma, delta, ..Default::default() }
    }

    pub fn pair(alpha: f64, beta: f64) -> Self {
        Self::new(alpha, beta, 0.0, 0.0)
    }

    pub fn fidelity(f1: f64) -> Self {
        ProtocolParams { f1: Some(f1), ..Default::default() }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn validate(&self, kind: ProtocolKind) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        let (a, b, g, d) = (self.alpha, self.beta, self.gamma, self.delta);
        if !(0.0..=1.0).contains(&self.eta) {
            return bad(format!("eta {} outside [0, 1]", self.eta));
        }
        if ![a, b, g, d].iter().all(|x| x.is_finite()) {
            return bad("non-finite amplitude".into());
        }
        match kind.family() {
            ParamFamily::TwoPairs => {
                if (a * a + b * b - 1.0).abs() > NORM_TOL || (g * g + d * d - 1.0).abs() > NORM_TOL {
                    return bad(format!("need alpha^2+beta^2 = gamma^2+delta^2 = 1, got ({a}, {b}, {g}, {d})"));
                }
            }
            ParamFamily::FourTerms => {
                if (a * a + b * b + g * g + d * d - 1.0).abs() > NORM_TOL {
                    return bad(format!("need alpha^2+beta^2+gamma^2+delta^2 = 1, got ({a}, {b}, {g}, {d})"));
                }
            }
            ParamFamily::OnePair => {
                if (a * a + b * b - 1.0).abs() > NORM_TOL {
                    return bad(format!("need alpha^2+beta^2 = 1, got ({a}, {b})"));
                }
            }
            ParamFamily::Fidelity => match self.f1 {
                None => return bad("hyper-epp needs f1".into()),
                Some(f) if !(0.0..=1.0).contains(&f) => return bad(format!("f1 {f} outside [0, 1]")),
                Some(_) => {}
            },
        }
        match kind {
            ProtocolKind::PsBell if d.abs() < NONZERO => bad("ps-bell needs delta != 0".into()),
            ProtocolKind::PsCluster if g.abs() < NONZERO || b.abs() < NONZERO => {
                bad("ps-cluster needs gamma != 0 and beta != 0".into())
            }
            ProtocolKind::SpClusterArbitrary if (a * g).powi(2) + (b * d).powi(2) < NONZERO * NONZERO => {
                bad("sp-cluster-arbitrary needs |alpha gamma|^2 + |beta delta|^2 > 0".into())
            }
            _ => Ok(()),
        }
    }
}

/// Success probability (fidelity for hyper-epp) as a closed expression. Parameter-ordering
/// assumptions are lifted by assigning roles by magnitude, which reduces to the usual
/// expressions when the ordering holds.
pub fn closed_form(kind: ProtocolKind, p: &ProtocolParams) -> Result<f64> {
    p.validate(kind)?;
    let (a, b, g, d) = (p.alpha.abs(), p.beta.abs(), p.gamma.abs(), p.delta.abs());
    Ok(match kind {
        ProtocolKind::PsBell => 4.0 * (a.min(b) * g.min(d)).powi(2),
        ProtocolKind::PsCluster => splitting::plan(cluster_table(p), CLUSTER_SIGNS, &PairPaths::ab()).success(),
        ProtocolKind::SpBell | ProtocolKind::SpClusterBellType => 4.0 * (a * b * g * d).powi(2),
        ProtocolKind::SpClusterArbitrary => {
            4.0 * (a * b * g * d).powi(2) / (2.0 * ((a * g).powi(2) + (b * d).powi(2)))
        }
        ProtocolKind::HyperEpp => purified_fidelity(p.f1.unwrap_or_default()),
        ProtocolKind::EcpPol | ProtocolKind::EcpSpatial => 2.0 * a.min(b).powi(2),
    })
}

pub fn purified_fidelity(f: f64) -> f64 {
    f * f / (f * f + (1.0 - f) * (1.0 - f))
}

const CLUSTER_SIGNS: [[f64; 2]; 2] = [[1.0, 1.0], [1.0, -1.0]];

fn cluster_table(p: &ProtocolParams) -> [[f64; 2]; 2] {
    [[p.alpha, p.gamma], [p.beta, -p.delta]]
}

#[derive(Debug, Clone)]
pub enum Prepared {
    Pure(FockState),
    Mixed(WeightedEnsemble),
}

impl Prepared {
    pub fn members(&self) -> Vec<(f64, FockState)> {
        match self {
            Prepared::Pure(s) => vec![(1.0, s.clone())],
            Prepared::Mixed(e) => e.members().to_vec(),
        }
    }
}

/// Input terms for a kind, independent of any register.
pub enum InitialTerms {
    Pure(Terms),
    Mixed(Vec<(f64, Terms)>),
}

pub fn initial_terms(kind: ProtocolKind, p: &ProtocolParams) -> Result<InitialTerms> {
    p.validate(kind)?;
    let (a, b, g, d) = (p.alpha, p.beta, p.gamma, p.delta);
    let ab = PairPaths::ab();
    let cd = PairPaths::cd();
    Ok(match kind {
        ProtocolKind::PsBell => InitialTerms::Pure(states::bell_class(&ab, a, b, g, d)),
        ProtocolKind::PsCluster => InitialTerms::Pure(states::cluster_class(&ab, a, b, g, d)),
        ProtocolKind::SpBell => InitialTerms::Pure(states::product(
            &states::bell_class(&ab, a, b, g, d),
            &states::bell_class(&cd, a, b, g, d),
        )),
        ProtocolKind::SpClusterBellType => InitialTerms::Pure(states::product(
            &states::bell_type_cluster(&ab, a, b, g, d),
            &states::bell_type_cluster(&cd, a, b, g, d),
        )),
        ProtocolKind::SpClusterArbitrary => {
            let pairs = [ab.clone(), cd.clone(), ab.suffixed("'"), cd.suffixed("'")];
            let mut t = states::cluster_class(&pairs[0], a, b, g, d);
            for pp in &pairs[1..] {
                t = states::product(&t, &states::cluster_class(pp, a, b, g, d));
            }
            InitialTerms::Pure(t)
        }
        ProtocolKind::HyperEpp => {
            let f = p.f1.unwrap_or_default();
            let mut members = Vec::new();
            for (ev1, w1) in [(true, f), (false, 1.0 - f)] {
                for (ev2, w2) in [(true, f), (false, 1.0 - f)] {
                    if w1 * w2 > 0.0 {
                        members.push((
                            w1 * w2,
                            states::product(
                                &states::pol_bell_times_spatial_phi(&ab, ev1),
                                &states::pol_bell_times_spatial_phi(&cd, ev2),
                            ),
                        ));
                    }
                }
            }
            InitialTerms::Mixed(members)
        }
        ProtocolKind::EcpPol => InitialTerms::Pure(states::pol_pair("a", "b", a, b)),
        ProtocolKind::EcpSpatial => InitialTerms::Pure(states::spatial_pair(&ab, a, b)),
    })
}

/// Places a kind's input state on `register` (which must contain its paths).
pub fn initial_on(kind: ProtocolKind, p: &ProtocolParams, register: &Arc<ModeRegister>) -> Result<Prepared> {
    Ok(match initial_terms(kind, p)? {
        InitialTerms::Pure(t) => Prepared::Pure(states::on(register, &t)?.normalize()?.0),
        InitialTerms::Mixed(ms) => {
            let members = ms
                .iter()
                .map(|(w, t)| Ok((*w, states::on(register, t)?)))
                .collect::<Result<Vec<_>>>()?;
            Prepared::Mixed(WeightedEnsemble::from_weighted(members)?)
        }
    })
}

pub fn build_initial(kind: ProtocolKind, p: &ProtocolParams) -> Result<Prepared> {
    let plan = plan(kind, p)?;
    Ok(plan.input)
}

/// Target state on `register`: the polarization-spatial Bell product for Bell-type
/// outputs, the cluster state for cluster outputs.
pub fn target_on(kind: ProtocolKind, register: &Arc<ModeRegister>) -> Result<FockState> {
    let ab = PairPaths::ab();
    let terms = match kind {
        ProtocolKind::PsBell | ProtocolKind::SpBell | ProtocolKind::HyperEpp => states::phi_f(&ab),
        ProtocolKind::PsCluster | ProtocolKind::SpClusterBellType | ProtocolKind::SpClusterArbitrary => {
            states::psi_f(&ab)
        }
        ProtocolKind::EcpPol => states::pol_pair("a", "b", std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2),
        ProtocolKind::EcpSpatial => {
            states::spatial_pair(&ab, std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2)
        }
    };
    states::on(register, &terms)
}

/// One measured stage: a circuit whose final `select` decides acceptance, an optional
/// parity feed-forward, and fixed elements applied afterwards.
#[derive(Debug, Clone)]
pub struct Stage {
    pub spec: CircuitSpec,
    pub feed_forward: Option<FeedForward>,
    pub post: Vec<Element>,
}

impl Stage {
    /// The acceptance rule carried by the circuit.
    pub fn accept(&self) -> Selection {
        self.spec
            .steps()
            .iter()
            .rev()
            .find_map(|s| match s {
                Step::Select(sel) => Some(sel.clone()),
                _ => None,
            })
            .unwrap_or(Selection::NoClicks)
    }
}

/// Everything needed to execute or sample a protocol.
#[derive(Debug, Clone)]
pub struct ProtocolPlan {
    pub kind: ProtocolKind,
    pub params: ProtocolParams,
    pub register: Arc<ModeRegister>,
    pub stages: Vec<Stage>,
    pub input: Prepared,
    pub target: FockState,
    /// Output rails of photons A and B.
    pub rails: PairPaths,
}

/// Bell-to-cluster map: polarization phase flip on path `a2`.
pub fn bell_to_cluster(state: &FockState) -> Result<FockState> {
    for p in ["a1", "a2", "b1", "b2"] {
        if !state.register().has_path(p) {
            return Err(Error::Shape(format!("bell_to_cluster needs path {p}")));
        }
    }
    apply(state, &Element::pflip("a2"))
}

fn bell_to_cluster_ops() -> Vec<Element> {
    vec![Element::pflip("a2")]
}

/// Extra fixed flips on top of the parity rule, found by enumerating accepted branches.
const BELL_TYPE_BASE: (bool, bool) = (true, true);
const ARB_ROUND1_BASE: (bool, bool) = (true, false);
const ARB_ROUND2_BASE: (bool, bool) = (false, false);

fn sp_names() -> (PairPaths, PairPaths) {
    (PairPaths::ab(), PairPaths::cd())
}

fn bell_block_stage(register: Arc<ModeRegister>, keep: &PairPaths, probe: &PairPaths, split: &str, first: usize, flip_probe: bool, base: (bool, bool), post: Vec<Element>, eta: f64) -> Stage {
    let mut spec = CircuitSpec::on(register);
    let names = BlockNames { keep, probe, split, first };
    let layout = bell_parity_block(&mut spec, &names, flip_probe, eta);
    Stage {
        spec,
        feed_forward: Some(FeedForward { layout, base_pol: base.0, base_spatial: base.1, b: keep.b.clone() }),
        post,
    }
}

fn register_of(paths: &[String]) -> Result<Arc<ModeRegister>> {
    Ok(Arc::new(ModeRegister::with_paths(paths)?))
}

fn pair_paths(p: &PairPaths) -> Vec<String> {
    p.a.iter().chain(p.b.iter()).cloned().collect()
}

pub fn plan(kind: ProtocolKind, p: &ProtocolParams) -> Result<ProtocolPlan> {
    p.validate(kind)?;
    let eta = p.eta;
    let ab = PairPaths::ab();
    let (stages, register) = match kind {
        ProtocolKind::PsBell | ProtocolKind::PsCluster => {
            let (c, signs) = if kind == ProtocolKind::PsBell {
                let (a, b, g, d) = (p.alpha, p.beta, p.gamma, p.delta);
                ([[a * g, a * d], [b * g, b * d]], [[1.0; 2]; 2])
            } else {
                (cluster_table(p), CLUSTER_SIGNS)
            };
            let sp = splitting::plan(c, signs, &ab);
            let spec = splitting::two_path_circuit(&sp, &ab, eta)?;
            let reg = spec.register().clone();
            (vec![Stage { spec, feed_forward: None, post: Vec::new() }], reg)
        }
        ProtocolKind::EcpPol => {
            let (spec, _) = splitting::polarization_circuit(p.alpha, p.beta, eta)?;
            let reg = spec.register().clone();
            (vec![Stage { spec, feed_forward: None, post: Vec::new() }], reg)
        }
        ProtocolKind::EcpSpatial => {
            let (spec, _) = splitting::spatial_circuit(p.alpha, p.beta, &ab, eta)?;
            let reg = spec.register().clone();
            (vec![Stage { spec, feed_forward: None, post: Vec::new() }], reg)
        }
        ProtocolKind::SpBell | ProtocolKind::SpClusterBellType => {
            let (keep, probe) = sp_names();
            let names = BlockNames { keep: &keep, probe: &probe, split: "v", first: 1 };
            let mut paths = pair_paths(&keep);
            paths.extend(pair_paths(&probe));
            paths.extend(names.extra_paths());
            let reg = register_of(&paths)?;
            let (base, post) = if kind == ProtocolKind::SpBell {
                ((false, false), Vec::new())
            } else {
                (BELL_TYPE_BASE, bell_to_cluster_ops())
            };
            (vec![bell_block_stage(reg.clone(), &keep, &probe, "v", 1, true, base, post, eta)], reg)
        }
        ProtocolKind::SpClusterArbitrary => {
            let (keep, probe) = sp_names();
            let (keep2, probe2) = (keep.suffixed("'"), probe.suffixed("'"));
            let g1 = BlockNames { keep: &keep, probe: &probe, split: "v", first: 1 };
            let g2 = BlockNames { keep: &keep2, probe: &probe2, split: "v", first: 5 };
            let r2 = BlockNames { keep: &keep, probe: &keep2, split: "w", first: 9 };
            let mut paths = Vec::new();
            for pp in [&keep, &probe, &keep2, &probe2] {
                paths.extend(pair_paths(pp));
            }
            for n in [&g1, &g2, &r2] {
                paths.extend(n.extra_paths());
            }
            let reg = register_of(&paths)?;
            let stages = vec![
                bell_block_stage(reg.clone(), &keep, &probe, "v", 1, false, ARB_ROUND1_BASE, Vec::new(), eta),
                bell_block_stage(reg.clone(), &keep2, &probe2, "v", 5, false, ARB_ROUND1_BASE, Vec::new(), eta),
                bell_block_stage(reg.clone(), &keep, &keep2, "w", 9, true, ARB_ROUND2_BASE, bell_to_cluster_ops(), eta),
            ];
            (stages, reg)
        }
        ProtocolKind::HyperEpp => {
            let (keep, probe) = sp_names();
            let names = BlockNames { keep: &keep, probe: &probe, split: "v", first: 1 };
            let mut paths = pair_paths(&keep);
            paths.extend(pair_paths(&probe));
            paths.extend(purification_extra_paths(&names));
            let reg = register_of(&paths)?;
            let mut spec = CircuitSpec::on(reg.clone());
            let layout = purification_block(&mut spec, &names, eta);
            let ff = FeedForward { layout, base_pol: false, base_spatial: false, b: keep.b.clone() };
            (vec![Stage { spec, feed_forward: Some(ff), post: Vec::new() }], reg)
        }
    };
    let input = initial_on(kind, p, &register)?;
    let target = target_on(kind, &register)?;
    let rails = if kind == ProtocolKind::EcpPol {
        PairPaths::new(["a", "a"], ["b", "b"])
    } else {
        ab
    };
    Ok(ProtocolPlan { kind, params: *p, register, stages, input, target, rails })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub convention: BsConvention,
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchRecord {
    pub pattern: DetectionPattern,
    /// Joint probability of reaching this branch.
    pub probability: f64,
    pub corrections: Vec<Element>,
    pub fidelity: f64,
}

#[derive(Debug, Clone)]
pub struct ProtocolResult {
    pub kind: ProtocolKind,
    pub params: ProtocolParams,
    /// Accepted probability per trial; for the two-round cluster protocol, the product of
    /// one round-one group and the round-two probability.
    pub success_probability: f64,
    /// Probability that every stage of one trial accepts.
    pub joint_probability: f64,
    /// Conditional acceptance of each stage.
    pub round_probabilities: Vec<f64>,
    pub output: WeightedEnsemble,
    pub target: FockState,
    pub target_fidelity: f64,
    pub branches: Vec<BranchRecord>,
    pub resource_count: u32,
    pub closed_form: f64,
}

impl ProtocolResult {
    /// Quantity that the closed form predicts.
    pub fn simulated_value(&self) -> f64 {
        if self.kind == ProtocolKind::HyperEpp {
            self.target_fidelity
        } else {
            self.success_probability
        }
    }
}

struct Leaf {
    weight: f64,
    state: FockState,
}

fn merge_leaves(leaves: Vec<Leaf>) -> Vec<Leaf> {
    let mut out: Vec<Leaf> = Vec::new();
    for l in leaves {
        if let Some(m) = out.iter_mut().find(|m| m.state.equal_up_to_phase(&l.state)) {
            m.weight += l.weight;
        } else {
            out.push(l);
        }
    }
    out
}

/// Corrected state of an accepted branch of a stage.
pub fn finish_branch(stage: &Stage, branch: &OutcomeBranch) -> Result<(FockState, Vec<Element>)> {
    let (mut s, mut ops) = match &stage.feed_forward {
        Some(ff) => ff.apply(branch)?,
        None => (branch.state.clone(), Vec::new()),
    };
    for e in &stage.post {
        s = apply(&s, e)?;
        ops.push(e.clone());
    }
    Ok((s, ops))
}

/// Feed-forward of a single-stage parity protocol applied to one of its accepted branches.
pub fn feed_forward(branch: &OutcomeBranch, kind: ProtocolKind, params: &ProtocolParams) -> Result<FockState> {
    let plan = plan(kind, params)?;
    match plan.stages.as_slice() {
        [stage] if stage.feed_forward.is_some() => Ok(finish_branch(stage, branch)?.0),
        _ => Err(Error::Shape(format!("{kind} has no single-stage feed-forward"))),
    }
}

pub fn run_protocol(kind: ProtocolKind, params: &ProtocolParams) -> Result<ProtocolResult> {
    run_plan(&plan(kind, params)?, RunOptions::default())
}

pub fn run_protocol_with(kind: ProtocolKind, params: &ProtocolParams, options: RunOptions) -> Result<ProtocolResult> {
    run_plan(&plan(kind, params)?, options)
}

pub fn run_plan(plan: &ProtocolPlan, options: RunOptions) -> Result<ProtocolResult> {
    let n = plan.stages.len();
    let mut stage_in = vec![0.0; n];
    let mut stage_out = vec![0.0; n];
    let mut output = WeightedEnsemble::default();
    let mut records = Vec::new();
    let (target, _) = plan.target.normalize()?;

    for (w, member) in plan.input.members() {
        let mut leaves = vec![Leaf { weight: w, state: member }];
        for (i, stage) in plan.stages.iter().enumerate() {
            let last = i + 1 == n;
            let mut next = Vec::new();
            for leaf in &leaves {
                stage_in[i] += leaf.weight;
                for b in run_with(&stage.spec, &leaf.state, options.convention)? {
                    let (s, ops) = finish_branch(stage, &b)?;
                    let weight = leaf.weight * b.probability;
                    stage_out[i] += weight;
                    if last {
                        let (s, _) = s.normalize()?;
                        let fidelity = target.inner(&s)?.norm_sqr();
                        records.push(BranchRecord { pattern: b.pattern.clone(), probability: weight, corrections: ops, fidelity });
                        output.push_merge(weight, s)?;
                    } else {
                        next.push(Leaf { weight, state: s });
                    }
                }
            }
            if !last {
                leaves = merge_leaves(next);
            }
        }
    }

    let joint = output.total_weight();
    let rounds: Vec<f64> = stage_in.iter().zip(&stage_out).map(|(i, o)| if *i > 0.0 { o / i } else { 0.0 }).collect();
    let success = if plan.kind == ProtocolKind::SpClusterArbitrary { rounds[0] * rounds[2] } else { joint };
    let output = if joint > 0.0 {
        WeightedEnsemble::from_weighted(output.members().iter().cloned())?
    } else {
        WeightedEnsemble::default()
    };
    let target_fidelity = if output.is_empty() { 0.0 } else { output.fidelity(&target)? };
    Ok(ProtocolResult {
        kind: plan.kind,
        params: plan.params,
        success_probability: success,
        joint_probability: joint,
        round_probabilities: rounds,
        output,
        target,
        target_fidelity,
        branches: records,
        resource_count: plan.kind.resource_count(),
        closed_form: closed_form(plan.kind, &plan.params)?,
    })
}

/// Parameters the shipped circuit files are built for.
pub fn corpus_params(kind: ProtocolKind) -> ProtocolParams {
    match kind.family() {
        ParamFamily::TwoPairs => ProtocolParams::new(0.8, 0.6, 0.6, 0.8),
        ParamFamily::FourTerms => ProtocolParams::new(0.5, 0.4, 0.7, 0.1f64.sqrt()),
        ParamFamily::OnePair => ProtocolParams::pair(0.8, 0.6),
        ParamFamily::Fidelity => ProtocolParams::fidelity(0.8),
    }
}

/// Circuit that turns the Bell-type hyperentangled target into the cluster target.
pub fn bell_to_cluster_circuit() -> Result<CircuitSpec> {
    let mut spec = CircuitSpec::with_paths(&["a1", "a2", "b1", "b2"])?;
    for e in bell_to_cluster_ops() {
        spec.element(e);
    }
    Ok(spec)
}

/// The shipped `.circ` corpus as (file name, circuit).
pub fn corpus() -> Result<Vec<(&'static str, CircuitSpec)>> {
    let stage = |kind: ProtocolKind, notes: &[&str]| -> Result<CircuitSpec> {
        let p = corpus_params(kind);
        let mut spec = plan(kind, &p)?.stages.remove(0).spec;
        spec.notes = notes.iter().map(|s| s.to_string()).collect();
        if kind.family() != ParamFamily::Fidelity && !matches!(kind, ProtocolKind::SpBell) {
            spec.notes.push(format!("built for {}", describe_params(kind, &p)));
        }
        Ok(spec)
    };
    let mut fig7 = bell_to_cluster_circuit()?;
    fig7.notes = vec!["phase flip on a2: Bell-type hyperentangled state to cluster state".into()];
    Ok(vec![
        ("fig1.circ", stage(ProtocolKind::PsBell, &["known-parameter concentration of a Bell-class hyperentangled pair", "success: no detector clicks"])?),
        ("fig3.circ", stage(ProtocolKind::PsCluster, &["known-parameter concentration of a cluster-class pair", "success: no detector clicks"])?),
        ("fig5.circ", stage(ProtocolKind::SpBell, &["two-copy parity check for unknown-parameter concentration", "success: one click on each side; then correct photon B from the parities", "independent of the input parameters"])?),
        ("fig7.circ", fig7),
        ("fig8.circ", stage(ProtocolKind::HyperEpp, &["two-copy polarization parity check for purification", "success: one click on each side; then correct photon B from the parities"])?),
        ("fig9.circ", stage(ProtocolKind::EcpPol, &["polarization-only concentration", "success: no detector clicks"])?),
        ("fig10.circ", stage(ProtocolKind::EcpSpatial, &["spatial-only concentration", "success: no detector clicks"])?),
    ])
}

fn describe_params(kind: ProtocolKind, p: &ProtocolParams) -> String {
    match kind.family() {
        ParamFamily::OnePair => format!("alpha={} beta={}", p.alpha, p.beta),
        ParamFamily::Fidelity => format!("f1={}", p.f1.unwrap_or_default()),
        _ => format!("alpha={} beta={} gamma={} delta={}", p.alpha, p.beta, p.gamma, p.delta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in ProtocolKind::ALL {
            assert_eq!(k.name().parse::<ProtocolKind>().unwrap(), k);
        }
        assert!("ps-belll".parse::<ProtocolKind>().is_err());
    }

    #[test]
    fn validation() {
        assert!(ProtocolParams::new(0.8, 0.6, 0.6, 0.8).validate(ProtocolKind::PsBell).is_ok());
        assert!(ProtocolParams::new(0.8, 0.6, 0.6, 0.7).validate(ProtocolKind::PsBell).is_err());
        assert!(ProtocolParams::new(0.8, 0.6, 1.0, 0.0).validate(ProtocolKind::PsBell).is_err());
        assert!(ProtocolParams::new(0.5, 0.0, 0.7, 0.51f64.sqrt()).validate(ProtocolKind::PsCluster).is_err());
        assert!(ProtocolParams::fidelity(1.5).validate(ProtocolKind::HyperEpp).is_err());
        assert!(ProtocolParams::default().validate(ProtocolKind::HyperEpp).is_err());
        assert!(ProtocolParams::pair(0.8, 0.6).with_eta(2.0).validate(ProtocolKind::EcpPol).is_err());
    }

    #[test]
    fn closed_forms_at_reference_points() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let p1 = closed_form(ProtocolKind::PsBell, &ProtocolParams::new(h, h, h, h)).unwrap();
        assert!((p1 - 1.0).abs() < 1e-15);
        let p3 = closed_form(ProtocolKind::SpBell, &ProtocolParams::new(h, h, h, h)).unwrap();
        assert!((p3 - 0.25).abs() < 1e-15);
        assert!((purified_fidelity(0.5) - 0.5).abs() < 1e-15);
        let p2 = closed_form(ProtocolKind::PsCluster, &ProtocolParams::new(0.5, 0.4, 0.7, 0.1f64.sqrt())).unwrap();
        assert!((p2 - 4.0 * (0.5 * 0.1f64.sqrt() / 0.7).powi(2)).abs() < 1e-15);
        let p4 = closed_form(ProtocolKind::SpClusterArbitrary, &ProtocolParams::new(0.5, 0.5, 0.5, 0.5)).unwrap();
        assert!((p4 - 0.0625).abs() < 1e-15);
        assert!((closed_form(ProtocolKind::EcpPol, &ProtocolParams::pair(0.8, 0.6)).unwrap() - 0.72).abs() < 1e-15);
    }

    #[test]
    fn bell_to_cluster_checks_shape() {
        let reg = Arc::new(ModeRegister::with_paths(&["a1", "a2"]).unwrap());
        assert!(bell_to_cluster(&FockState::vacuum(reg)).is_err());
    }
}
