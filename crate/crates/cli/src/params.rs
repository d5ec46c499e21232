//! Completing partially given parameters from normalization.

use hyperconc::protocols::{ParamFamily, ProtocolKind, ProtocolParams};

const CONSISTENT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Given {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub f1: Option<f64>,
}

impl Given {
    pub fn set(&mut self, name: &str, v: f64) -> Result<(), String> {
        match name {
            "alpha" => self.alpha = Some(v),
            "beta" => self.beta = Some(v),
            "gamma" => self.gamma = Some(v),
            "delta" => self.delta = Some(v),
            "f1" => self.f1 = Some(v),
            _ => return Err(format!("unknown parameter {name}")),
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<Option<f64>, String> {
        Ok(match name {
            "alpha" => self.alpha,
            "beta" => self.beta,
            "gamma" => self.gamma,
            "delta" => self.delta,
            "f1" => self.f1,
            _ => return Err(format!("unknown parameter {name}")),
        })
    }
}

/// Fills the missing members of `group` so their squares sum to `total`.
fn complete(group: &mut [(&str, Option<f64>)], total: f64) -> Result<(), String> {
    let known: f64 = group.iter().filter_map(|(_, v)| *v).map(|v| v * v).sum();
    let missing: Vec<usize> = (0..group.len()).filter(|&i| group[i].1.is_none()).collect();
    let names = || group.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ");
    match missing.as_slice() {
        [] => {
            if (known - total).abs() > CONSISTENT {
                return Err(format!("{} squares sum to {known}, expected {total}", names()));
            }
        }
        [i] => {
            let rest = total - known;
            if rest < -CONSISTENT {
                return Err(format!("given {} exceed normalization", names()));
            }
            group[*i].1 = Some(rest.max(0.0).sqrt());
        }
        _ => return Err(format!("need all but at most one of {}", names())),
    }
    Ok(())
}

pub fn resolve(kind: ProtocolKind, g: &Given, eta: f64) -> Result<ProtocolParams, String> {
    let mut p = ProtocolParams { eta, ..Default::default() };
    match kind.family() {
        ParamFamily::TwoPairs => {
            let mut ab = [("alpha", g.alpha), ("beta", g.beta)];
            let mut gd = [("gamma", g.gamma), ("delta", g.delta)];
            complete(&mut ab, 1.0)?;
            complete(&mut gd, 1.0)?;
            (p.alpha, p.beta, p.gamma, p.delta) = (ab[0].1.unwrap(), ab[1].1.unwrap(), gd[0].1.unwrap(), gd[1].1.unwrap());
        }
        ParamFamily::FourTerms => {
            let mut all = [("alpha", g.alpha), ("beta", g.beta), ("gamma", g.gamma), ("delta", g.delta)];
            complete(&mut all, 1.0)?;
            (p.alpha, p.beta, p.gamma, p.delta) = (all[0].1.unwrap(), all[1].1.unwrap(), all[2].1.unwrap(), all[3].1.unwrap());
        }
        ParamFamily::OnePair => {
            if g.gamma.is_some() || g.delta.is_some() {
                return Err(format!("{kind} takes only alpha and beta"));
            }
            let mut ab = [("alpha", g.alpha), ("beta", g.beta)];
            complete(&mut ab, 1.0)?;
            (p.alpha, p.beta) = (ab[0].1.unwrap(), ab[1].1.unwrap());
        }
        ParamFamily::Fidelity => {
            p.f1 = Some(g.f1.ok_or("hyper-epp needs --f1")?);
        }
    }
    p.validate(kind).map_err(|e| e.to_string())?;
    Ok(p)
}
