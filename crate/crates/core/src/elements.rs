//! Optical elements and their lowering to mode unitaries.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockState, ModeRegister, ModeUnitary, Polarization};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Element {
    BalancedBs { a: String, b: String },
    UnbalancedBs { a: String, b: String, r: f64 },
    Pbs { a: String, b: String },
    WavePlate { path: String, theta: f64 },
    Hwp45 { path: String },
    Hwp90 { path: String },
    PolPhaseFlip { path: String },
    Delay { path: String },
    /// +1 on `keep`, -1 on `flip`, both polarizations.
    SpatialPhaseFlip { keep: String, flip: String },
}

/// Sign convention for two-port beam splitters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BsConvention {
    /// `[[R, T], [T, -R]]`
    #[default]
    Symmetric,
    /// `[[R, -T], [T, R]]`; equivalent to `Symmetric` up to a phase on input `b`.
    Rotation,
    /// `Symmetric` for H and `Rotation` for V: a deliberately broken splitter.
    Skewed,
}

impl Element {
    pub fn bs(a: &str, b: &str) -> Self {
        Element::BalancedBs { a: a.into(), b: b.into() }
    }
    pub fn ubs(a: &str, b: &str, r: f64) -> Self {
        Element::UnbalancedBs { a: a.into(), b: b.into(), r }
    }
    pub fn pbs(a: &str, b: &str) -> Self {
        Element::Pbs { a: a.into(), b: b.into() }
    }
    pub fn wp(path: &str, theta: f64) -> Self {
        Element::WavePlate { path: path.into(), theta }
    }
    pub fn hwp45(path: &str) -> Self {
        Element::Hwp45 { path: path.into() }
    }
    pub fn hwp90(path: &str) -> Self {
        Element::Hwp90 { path: path.into() }
    }
    pub fn pflip(path: &str) -> Self {
        Element::PolPhaseFlip { path: path.into() }
    }
    pub fn delay(path: &str) -> Self {
        Element::Delay { path: path.into() }
    }
    pub fn sflip(keep: &str, flip: &str) -> Self {
        Element::SpatialPhaseFlip { keep: keep.into(), flip: flip.into() }
    }

    pub fn paths(&self) -> Vec<&str> {
        match self {
            Element::BalancedBs { a, b }
            | Element::UnbalancedBs { a, b, .. }
            | Element::Pbs { a, b }
            | Element::SpatialPhaseFlip { keep: a, flip: b } => vec![a, b],
            Element::WavePlate { path, .. }
            | Element::Hwp45 { path }
            | Element::Hwp90 { path }
            | Element::PolPhaseFlip { path }
            | Element::Delay { path } => vec![path],
        }
    }

    /// True for the two-path beam-splitter family (balanced or not).
    pub fn is_ubs_class(&self) -> bool {
        matches!(self, Element::BalancedBs { .. } | Element::UnbalancedBs { .. })
    }
}

fn two_port(r: f64, convention: BsConvention) -> [[f64; 2]; 2] {
    let t = (1.0 - r * r).max(0.0).sqrt();
    match convention {
        BsConvention::Symmetric => [[r, t], [t, -r]],
        BsConvention::Rotation | BsConvention::Skewed => [[r, -t], [t, r]],
    }
}

fn on_pair(modes: [usize; 2], m: [[f64; 2]; 2]) -> Result<ModeUnitary> {
    ModeUnitary::real(modes.to_vec(), &[&m[0], &m[1]])
}

fn pol_pair(reg: &ModeRegister, path: &str) -> Result<[usize; 2]> {
    Ok([reg.mode(path, Polarization::H)?, reg.mode(path, Polarization::V)?])
}

pub fn lower(element: &Element, register: &ModeRegister) -> Result<Vec<ModeUnitary>> {
    lower_with(element, register, BsConvention::Symmetric)
}

pub fn lower_with(element: &Element, register: &ModeRegister, convention: BsConvention) -> Result<Vec<ModeUnitary>> {
    for p in element.paths() {
        if !register.has_path(p) {
            return Err(Error::UnknownPath(p.to_string()));
        }
    }
    let s = FRAC_1_SQRT_2;
    match element {
        Element::BalancedBs { a, b } => beam_splitter(register, a, b, s, convention),
        Element::UnbalancedBs { a, b, r } => {
            if !(0.0..=1.0).contains(r) {
                return Err(Error::ReflectionOutOfRange(*r));
            }
            beam_splitter(register, a, b, *r, convention)
        }
        Element::Pbs { a, b } => Ok(vec![on_pair(
            [register.mode(a, Polarization::V)?, register.mode(b, Polarization::V)?],
            [[0.0, 1.0], [1.0, 0.0]],
        )?]),
        Element::WavePlate { path, theta } => {
            if !theta.is_finite() {
                return Err(Error::BadAngle(*theta));
            }
            let (c, sn) = (theta.cos(), theta.sin());
            Ok(vec![on_pair(pol_pair(register, path)?, [[c, sn], [sn, -c]])?])
        }
        Element::Hwp45 { path } => Ok(vec![on_pair(pol_pair(register, path)?, [[s, s], [s, -s]])?]),
        Element::Hwp90 { path } => Ok(vec![on_pair(pol_pair(register, path)?, [[0.0, 1.0], [1.0, 0.0]])?]),
        Element::PolPhaseFlip { path } => Ok(vec![ModeUnitary::real(
            vec![register.mode(path, Polarization::V)?],
            &[&[-1.0]],
        )?]),
        Element::Delay { .. } => Ok(Vec::new()),
        Element::SpatialPhaseFlip { flip, .. } => Ok(vec![ModeUnitary::real(
            pol_pair(register, flip)?.to_vec(),
            &[&[-1.0, 0.0], &[0.0, -1.0]],
        )?]),
    }
}

fn beam_splitter(reg: &ModeRegister, a: &str, b: &str, r: f64, convention: BsConvention) -> Result<Vec<ModeUnitary>> {
    if a == b {
        return Err(Error::BadUnitary(format!("beam splitter needs two distinct paths, got {a} twice")));
    }
    Polarization::BOTH
        .iter()
        .map(|&pol| {
            let c = match (convention, pol) {
                (BsConvention::Skewed, Polarization::H) => BsConvention::Symmetric,
                (BsConvention::Skewed, Polarization::V) => BsConvention::Rotation,
                (c, _) => c,
            };
            on_pair([reg.mode(a, pol)?, reg.mode(b, pol)?], two_port(r, c))
        })
        .collect()
}

pub fn apply(state: &FockState, element: &Element) -> Result<FockState> {
    apply_with(state, element, BsConvention::Symmetric)
}

pub fn apply_with(state: &FockState, element: &Element, convention: BsConvention) -> Result<FockState> {
    let mut out = state.clone();
    for u in lower_with(element, state.register(), convention)? {
        out = out.apply(&u)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorModel {
    Threshold,
    NumberResolving,
}

/// Detector on one spatial path, watching both polarizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub name: String,
    pub path: String,
    pub model: DetectorModel,
    pub efficiency: f64,
}

impl DetectorSpec {
    pub fn threshold(name: &str, path: &str) -> Self {
        DetectorSpec { name: name.into(), path: path.into(), model: DetectorModel::Threshold, efficiency: 1.0 }
    }

    pub fn pnr(name: &str, path: &str) -> Self {
        DetectorSpec { name: name.into(), path: path.into(), model: DetectorModel::NumberResolving, efficiency: 1.0 }
    }

    pub fn with_efficiency(mut self, eta: f64) -> Self {
        self.efficiency = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::BadEfficiency(self.efficiency));
        }
        Ok(())
    }
}
