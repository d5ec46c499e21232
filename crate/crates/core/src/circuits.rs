//! Circuit programs, their text form, and the branch-folding runner.
//!
//! One directive per line, `#` starts a comment:
//!
//! ```text
//! path <name>
//! bs <p> <q>
//! ubs <p> <q> r=<float>
//! pbs <p> <q>
//! wp <p> theta=<radians>
//! hwp45 <p> | hwp90 <p> | pflip <p> | delay <p>
//! sflip <p> <q>                 # -1 on q
//! detect <name> <p> [pnr] [eta=<float>]
//! measure                       # fires every detector declared since the last measure
//! select none | select one-per-side <d,d,..>;<d,d,..>
//! ```
//!
//! Elements after a `measure` act on every surviving branch.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::elements::{apply_with, BsConvention, DetectorModel, DetectorSpec, Element};
use crate::error::{Error, Result};
use crate::fock::{FockState, ModeRegister};
use crate::measurement::{measure, DetectionPattern, OutcomeBranch};

#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    /// No detector fired so far registered anything.
    NoClicks,
    /// Exactly one registered photon among each list.
    OnePerSide { alice: Vec<String>, bob: Vec<String> },
}

impl Selection {
    pub fn accepts(&self, pattern: &DetectionPattern) -> bool {
        match self {
            Selection::NoClicks => pattern.is_dark(),
            Selection::OnePerSide { alice, bob } => {
                let sum = |ds: &[String]| ds.iter().map(|d| pattern.count(d)).sum::<u32>();
                sum(alice) == 1 && sum(bob) == 1
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Element(Element),
    Detect(DetectorSpec),
    Measure,
    Select(Selection),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitSpec {
    register: Arc<ModeRegister>,
    steps: Vec<Step>,
    /// Leading comment lines, kept so files round-trip byte for byte.
    pub notes: Vec<String>,
}

impl Default for CircuitSpec {
    fn default() -> Self {
        CircuitSpec { register: Arc::new(ModeRegister::new()), steps: Vec::new(), notes: Vec::new() }
    }
}

impl CircuitSpec {
    pub fn new(register: ModeRegister) -> Self {
        CircuitSpec { register: Arc::new(register), steps: Vec::new(), notes: Vec::new() }
    }

    pub fn on(register: Arc<ModeRegister>) -> Self {
        CircuitSpec { register, steps: Vec::new(), notes: Vec::new() }
    }

    pub fn with_paths<S: AsRef<str>>(paths: &[S]) -> Result<Self> {
        Ok(Self::new(ModeRegister::with_paths(paths)?))
    }

    pub fn register(&self) -> &Arc<ModeRegister> {
        &self.register
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn push(&mut self, step: Step) -> &mut Self {
        self.steps.push(step);
        self
    }

    pub fn element(&mut self, e: Element) -> &mut Self {
        self.push(Step::Element(e))
    }

    pub fn detect(&mut self, d: DetectorSpec) -> &mut Self {
        self.push(Step::Detect(d))
    }

    pub fn measure(&mut self) -> &mut Self {
        self.push(Step::Measure)
    }

    pub fn select(&mut self, s: Selection) -> &mut Self {
        self.push(Step::Select(s))
    }

    pub fn elements(&self) -> impl Iterator<Item = &Element> {
        self.steps.iter().filter_map(|s| match s {
            Step::Element(e) => Some(e),
            _ => None,
        })
    }

    pub fn detectors(&self) -> impl Iterator<Item = &DetectorSpec> {
        self.steps.iter().filter_map(|s| match s {
            Step::Detect(d) => Some(d),
            _ => None,
        })
    }

    /// Same circuit with every `select` removed, so rejected branches stay visible.
    pub fn without_selection(&self) -> CircuitSpec {
        let mut c = self.clone();
        c.steps.retain(|s| !matches!(s, Step::Select(_)));
        c
    }

    /// Appends another circuit on the same register.
    pub fn then(&self, other: &CircuitSpec) -> Result<CircuitSpec> {
        if *self.register != *other.register {
            return Err(Error::RegisterMismatch);
        }
        let mut c = self.clone();
        c.steps.extend(other.steps.iter().cloned());
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let mut declared = BTreeSet::new();
        let mut fired = BTreeSet::new();
        for step in &self.steps {
            match step {
                Step::Element(e) => {
                    for p in e.paths() {
                        if !self.register.has_path(p) {
                            return Err(Error::UnknownPath(p.to_string()));
                        }
                    }
                }
                Step::Detect(d) => {
                    d.validate()?;
                    if !self.register.has_path(&d.path) {
                        return Err(Error::UnknownPath(d.path.clone()));
                    }
                    if !declared.insert(d.name.clone()) {
                        return Err(Error::DuplicateDetector(d.name.clone()));
                    }
                }
                Step::Measure => fired.extend(declared.iter().cloned()),
                Step::Select(Selection::OnePerSide { alice, bob }) => {
                    if let Some(d) = alice.iter().chain(bob).find(|d| !fired.contains(*d)) {
                        return Err(Error::Shape(format!("select names unmeasured detector {d}")));
                    }
                }
                Step::Select(Selection::NoClicks) => {}
            }
        }
        Ok(())
    }
}

pub fn parse(text: &str) -> Result<CircuitSpec> {
    let mut spec = CircuitSpec::default();
    let mut reg = ModeRegister::new();
    let mut detectors = BTreeSet::new();
    let mut fired = BTreeSet::new();
    let mut header = true;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |msg: String| Error::Parse { line, msg };
        let trimmed = raw.trim();
        if header {
            if let Some(note) = trimmed.strip_prefix('#') {
                spec.notes.push(note.strip_prefix(' ').unwrap_or(note).to_string());
                continue;
            }
        }
        let body = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = body.split_whitespace().collect();
        let Some((&head, args)) = toks.split_first() else {
            continue;
        };
        header = false;

        let path_arg = |k: usize| -> Result<String> {
            let p = args.get(k).ok_or_else(|| err(format!("{head}: missing path")))?;
            if !reg.has_path(p) {
                return Err(err(format!("undeclared path {p}")));
            }
            Ok(p.to_string())
        };
        let arity = |n: usize| -> Result<()> {
            if args.len() != n {
                return Err(err(format!("{head}: expected {n} argument(s), got {}", args.len())));
            }
            Ok(())
        };

        let step = match head {
            "path" => {
                arity(1)?;
                reg.add_path(args[0]).map_err(|e| err(e.to_string()))?;
                continue;
            }
            "bs" | "pbs" | "sflip" => {
                arity(2)?;
                let (a, b) = (path_arg(0)?, path_arg(1)?);
                if a == b {
                    return Err(err(format!("{head}: paths must differ")));
                }
                Step::Element(match head {
                    "bs" => Element::BalancedBs { a, b },
                    "pbs" => Element::Pbs { a, b },
                    _ => Element::SpatialPhaseFlip { keep: a, flip: b },
                })
            }
            "ubs" => {
                arity(3)?;
                let (a, b) = (path_arg(0)?, path_arg(1)?);
                if a == b {
                    return Err(err("ubs: paths must differ".into()));
                }
                let r = keyed_number(args[2], "r").map_err(err)?;
                if !(0.0..=1.0).contains(&r) {
                    return Err(err(format!("reflection coefficient {r} outside [0, 1]")));
                }
                Step::Element(Element::UnbalancedBs { a, b, r })
            }
            "wp" => {
                arity(2)?;
                let path = path_arg(0)?;
                let theta = keyed_number(args[1], "theta").map_err(err)?;
                Step::Element(Element::WavePlate { path, theta })
            }
            "hwp45" | "hwp90" | "pflip" | "delay" => {
                arity(1)?;
                let path = path_arg(0)?;
                Step::Element(match head {
                    "hwp45" => Element::Hwp45 { path },
                    "hwp90" => Element::Hwp90 { path },
                    "pflip" => Element::PolPhaseFlip { path },
                    _ => Element::Delay { path },
                })
            }
            "detect" => {
                if args.len() < 2 || args.len() > 4 {
                    return Err(err("detect: expected <name> <path> [pnr] [eta=<float>]".into()));
                }
                let name = args[0].to_string();
                let path = path_arg(1)?;
                let mut model = DetectorModel::Threshold;
                let mut efficiency = 1.0;
                for opt in &args[2..] {
                    if *opt == "pnr" {
                        model = DetectorModel::NumberResolving;
                    } else {
                        efficiency = keyed_number(opt, "eta").map_err(err)?;
                        if !(0.0..=1.0).contains(&efficiency) {
                            return Err(err(format!("efficiency {efficiency} outside [0, 1]")));
                        }
                    }
                }
                if !detectors.insert(name.clone()) {
                    return Err(err(format!("duplicate detector {name}")));
                }
                Step::Detect(DetectorSpec { name, path, model, efficiency })
            }
            "measure" => {
                arity(0)?;
                fired.extend(detectors.iter().cloned());
                Step::Measure
            }
            "select" => match args {
                ["none"] => Step::Select(Selection::NoClicks),
                ["one-per-side", lists] => {
                    let (a, b) = lists.split_once(';').ok_or_else(|| err("one-per-side needs <list>;<list>".into()))?;
                    let names = |s: &str| -> Result<Vec<String>> {
                        let v: Vec<String> = s.split(',').filter(|x| !x.is_empty()).map(String::from).collect();
                        if v.is_empty() {
                            return Err(err("empty detector list".into()));
                        }
                        if let Some(d) = v.iter().find(|d| !fired.contains(*d)) {
                            return Err(err(format!("select names unmeasured detector {d}")));
                        }
                        Ok(v)
                    };
                    Step::Select(Selection::OnePerSide { alice: names(a)?, bob: names(b)? })
                }
                _ => return Err(err("select: expected `none` or `one-per-side <list>;<list>`".into())),
            },
            other => return Err(err(format!("unknown directive {other}"))),
        };
        spec.steps.push(step);
    }
    spec.register = Arc::new(reg);
    Ok(spec)
}

fn keyed_number(tok: &str, key: &str) -> std::result::Result<f64, String> {
    let v = tok
        .strip_prefix(key)
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| format!("expected {key}=<number>, got {tok}"))?;
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(format!("malformed number {v}")),
    }
}

pub fn print(spec: &CircuitSpec) -> String {
    let mut out = String::new();
    for n in &spec.notes {
        if n.is_empty() {
            out.push_str("#\n");
        } else {
            let _ = writeln!(out, "# {n}");
        }
    }
    for p in spec.register.paths() {
        let _ = writeln!(out, "path {p}");
    }
    for step in &spec.steps {
        let line = match step {
            Step::Element(e) => match e {
                Element::BalancedBs { a, b } => format!("bs {a} {b}"),
                Element::UnbalancedBs { a, b, r } => format!("ubs {a} {b} r={r}"),
                Element::Pbs { a, b } => format!("pbs {a} {b}"),
                Element::WavePlate { path, theta } => format!("wp {path} theta={theta}"),
                Element::Hwp45 { path } => format!("hwp45 {path}"),
                Element::Hwp90 { path } => format!("hwp90 {path}"),
                Element::PolPhaseFlip { path } => format!("pflip {path}"),
                Element::Delay { path } => format!("delay {path}"),
                Element::SpatialPhaseFlip { keep, flip } => format!("sflip {keep} {flip}"),
            },
            Step::Detect(d) => {
                let mut s = format!("detect {} {}", d.name, d.path);
                if d.model == DetectorModel::NumberResolving {
                    s.push_str(" pnr");
                }
                if d.efficiency != 1.0 {
                    let _ = write!(s, " eta={}", d.efficiency);
                }
                s
            }
            Step::Measure => "measure".to_string(),
            Step::Select(Selection::NoClicks) => "select none".to_string(),
            Step::Select(Selection::OnePerSide { alice, bob }) => {
                format!("select one-per-side {};{}", alice.join(","), bob.join(","))
            }
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn run(spec: &CircuitSpec, input: &FockState) -> Result<Vec<OutcomeBranch>> {
    run_with(spec, input, BsConvention::Symmetric)
}

pub fn run_with(spec: &CircuitSpec, input: &FockState, convention: BsConvention) -> Result<Vec<OutcomeBranch>> {
    if **input.register() != *spec.register {
        return Err(Error::RegisterMismatch);
    }
    spec.validate()?;
    let (start, _) = input.normalize()?;
    let mut branches = vec![OutcomeBranch {
        pattern: DetectionPattern::default(),
        actual: DetectionPattern::default(),
        probability: 1.0,
        state: start,
    }];
    let mut pending: Vec<DetectorSpec> = Vec::new();
    for step in &spec.steps {
        match step {
            Step::Element(e) => {
                for b in &mut branches {
                    b.state = apply_with(&b.state, e, convention)?;
                }
            }
            Step::Detect(d) => pending.push(d.clone()),
            Step::Measure => {
                let mut next = Vec::with_capacity(branches.len());
                for b in &branches {
                    for sub in measure(&b.state, &pending)? {
                        let mut pattern = b.pattern.clone();
                        pattern.merge(&sub.pattern);
                        let mut actual = b.actual.clone();
                        actual.merge(&sub.actual);
                        next.push(OutcomeBranch {
                            pattern,
                            actual,
                            probability: b.probability * sub.probability,
                            state: sub.state,
                        });
                    }
                }
                branches = next;
                pending.clear();
            }
            Step::Select(sel) => branches.retain(|b| sel.accepts(&b.pattern)),
        }
    }
    Ok(branches)
}
