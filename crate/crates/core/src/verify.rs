//! Grid comparison of simulated protocols against their closed forms.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::Serialize;

use crate::elements::BsConvention;
use crate::error::Error;
use crate::protocols::{run_protocol_with, ParamFamily, ProtocolKind, ProtocolParams, RunOptions};

pub const TOL: f64 = 1e-10;
const GRID: usize = 9;

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    /// Add boundary points (zero amplitudes, F1 in {0, 1}); invalid ones are reported as rejected.
    pub include_degenerate: bool,
    pub convention: BsConvention,
}

#[derive(Debug, Clone, Serialize)]
pub struct KindReport {
    pub kind: String,
    pub points: usize,
    pub max_abs_err: f64,
    /// Largest `1 - fidelity` over accepted branches (output fidelity error for hyper-epp).
    pub max_infidelity: f64,
    pub failures: Vec<String>,
    pub rejected: Vec<String>,
}

impl KindReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub kinds: Vec<KindReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.kinds.iter().all(KindReport::passed)
    }

    pub fn max_abs_err(&self) -> f64 {
        self.kinds.iter().map(|k| k.max_abs_err).fold(0.0, f64::max)
    }
}

fn interior(n: usize) -> Vec<f64> {
    (1..=n).map(|k| k as f64 / (n + 1) as f64).collect()
}

/// Parameter grid for a kind: 81 interior points plus optional boundary points.
pub fn grid(kind: ProtocolKind, include_degenerate: bool) -> Vec<ProtocolParams> {
    let axis = if include_degenerate {
        let mut v = vec![0.0];
        v.extend(interior(GRID));
        v.push(1.0);
        v
    } else {
        interior(GRID)
    };
    let mut out = Vec::new();
    match kind.family() {
        ParamFamily::TwoPairs => {
            for &b in &axis {
                for &g in &axis {
                    out.push(ProtocolParams::new((1.0 - b * b).sqrt(), b, g, (1.0 - g * g).sqrt()));
                }
            }
        }
        ParamFamily::FourTerms => {
            for (i, &u) in axis.iter().enumerate() {
                for (j, &v) in axis.iter().enumerate() {
                    // split weight between the two halves, varying with the cell
                    let w = FRAC_PI_2 * (0.15 + 0.7 * ((i * 4 + j * 7) % GRID) as f64 / (GRID - 1) as f64);
                    let (c, s) = (w.cos(), w.sin());
                    let (u, v) = (FRAC_PI_2 * u, FRAC_PI_2 * v);
                    let snap = |x: f64| if x.abs() < 1e-15 { 0.0 } else { x };
                    out.push(ProtocolParams::new(snap(c * u.cos()), snap(c * u.sin()), snap(s * v.cos()), snap(s * v.sin())));
                }
            }
        }
        ParamFamily::OnePair => {
            let n = GRID * GRID;
            let mut betas = interior(n);
            if include_degenerate {
                betas.insert(0, 0.0);
                betas.push(1.0);
            }
            for b in betas {
                out.push(ProtocolParams::pair((1.0 - b * b).sqrt(), b));
            }
        }
        ParamFamily::Fidelity => {
            let n = GRID * GRID;
            let mut fs = interior(n);
            if include_degenerate {
                fs.insert(0, 0.0);
                fs.push(1.0);
            }
            out.extend(fs.into_iter().map(ProtocolParams::fidelity));
        }
    }
    out
}

fn describe(p: &ProtocolParams) -> String {
    match p.f1 {
        Some(f) => format!("f1={f}"),
        None => format!("alpha={} beta={} gamma={} delta={}", p.alpha, p.beta, p.gamma, p.delta),
    }
}

enum Outcome {
    Checked { err: f64, infidelity: f64, failure: Option<String> },
    Rejected(String),
}

fn check_point(kind: ProtocolKind, p: &ProtocolParams, options: RunOptions) -> Outcome {
    let r = match run_protocol_with(kind, p, options) {
        Ok(r) => r,
        Err(Error::InvalidParams(m)) => return Outcome::Rejected(format!("{}: {m}", describe(p))),
        Err(e) => {
            return Outcome::Checked { err: f64::INFINITY, infidelity: 1.0, failure: Some(format!("{}: {e}", describe(p))) }
        }
    };
    let err = (r.simulated_value() - r.closed_form).abs();
    let infidelity = if kind == ProtocolKind::HyperEpp {
        err
    } else {
        r.branches.iter().map(|b| 1.0 - b.fidelity).fold(0.0, f64::max)
    };
    let failure = if !(err < TOL) {
        Some(format!("{}: simulated {} vs closed form {}", describe(p), r.simulated_value(), r.closed_form))
    } else if !(infidelity < TOL) {
        Some(format!("{}: accepted branch fidelity {}", describe(p), 1.0 - infidelity))
    } else {
        None
    };
    Outcome::Checked { err, infidelity, failure }
}

pub fn verify_kind(kind: ProtocolKind, options: VerifyOptions) -> KindReport {
    let run = RunOptions { convention: options.convention };
    let points = grid(kind, options.include_degenerate);
    let outcomes: Vec<Outcome> = points.par_iter().map(|p| check_point(kind, p, run)).collect();
    let mut rep = KindReport {
        kind: kind.name().to_string(),
        points: points.len(),
        max_abs_err: 0.0,
        max_infidelity: 0.0,
        failures: Vec::new(),
        rejected: Vec::new(),
    };
    for o in outcomes {
        match o {
            Outcome::Checked { err, infidelity, failure } => {
                rep.max_abs_err = rep.max_abs_err.max(err);
                rep.max_infidelity = rep.max_infidelity.max(infidelity);
                rep.failures.extend(failure);
            }
            Outcome::Rejected(m) => rep.rejected.push(m),
        }
    }
    rep
}

pub fn verify(options: VerifyOptions) -> VerifyReport {
    VerifyReport { kinds: ProtocolKind::ALL.iter().map(|&k| verify_kind(k, options)).collect() }
}
