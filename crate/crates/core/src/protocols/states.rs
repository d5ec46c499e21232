//! Input and target states as term lists, placed on whatever register a circuit uses.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::Result;
use crate::fock::{FockState, ModeLabel, ModeRegister, Polarization};

pub type Terms = Vec<(Complex64, Vec<ModeLabel>)>;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Path names of one photon pair: photon A on `a[0]/a[1]`, photon B on `b[0]/b[1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPaths {
    pub a: [String; 2],
    pub b: [String; 2],
}

impl PairPaths {
    pub fn new(a: [&str; 2], b: [&str; 2]) -> Self {
        PairPaths { a: a.map(String::from), b: b.map(String::from) }
    }

    pub fn ab() -> Self {
        Self::new(["a1", "a2"], ["b1", "b2"])
    }

    pub fn cd() -> Self {
        Self::new(["c1", "c2"], ["d1", "d2"])
    }

    /// Same pair with a suffix on every path name.
    pub fn suffixed(&self, s: &str) -> Self {
        PairPaths { a: self.a.clone().map(|p| p + s), b: self.b.clone().map(|p| p + s) }
    }

    fn ket(&self, pa: Polarization, pb: Polarization, sa: usize, sb: usize) -> Vec<ModeLabel> {
        vec![ModeLabel::new(&self.a[sa], pa), ModeLabel::new(&self.b[sb], pb)]
    }
}

const HV: [Polarization; 2] = [Polarization::H, Polarization::V];

/// `c[p][s]` multiplies `|p p>|a_s b_s>`.
pub fn diagonal_terms(pair: &PairPaths, c: [[f64; 2]; 2]) -> Terms {
    let mut t = Vec::new();
    for (p, pol) in HV.iter().enumerate() {
        for s in 0..2 {
            if c[p][s] != 0.0 {
                t.push((re(c[p][s]), pair.ket(*pol, *pol, s, s)));
            }
        }
    }
    t
}

/// `(alpha HH + beta VV) (gamma a1b1 + delta a2b2)`
pub fn bell_class(pair: &PairPaths, alpha: f64, beta: f64, gamma: f64, delta: f64) -> Terms {
    diagonal_terms(pair, [[alpha * gamma, alpha * delta], [beta * gamma, beta * delta]])
}

/// `alpha HH a1b1 + beta VV a1b1 + gamma HH a2b2 - delta VV a2b2`
pub fn cluster_class(pair: &PairPaths, alpha: f64, beta: f64, gamma: f64, delta: f64) -> Terms {
    diagonal_terms(pair, [[alpha, gamma], [beta, -delta]])
}

/// `alpha HH (gamma a1b1 + delta a2b2) + beta VV (gamma a1b1 - delta a2b2)`
pub fn bell_type_cluster(pair: &PairPaths, alpha: f64, beta: f64, gamma: f64, delta: f64) -> Terms {
    diagonal_terms(pair, [[alpha * gamma, alpha * delta], [beta * gamma, -beta * delta]])
}

pub fn phi_f(pair: &PairPaths) -> Terms {
    bell_class(pair, FRAC_1_SQRT_2, FRAC_1_SQRT_2, FRAC_1_SQRT_2, FRAC_1_SQRT_2)
}

pub fn psi_f(pair: &PairPaths) -> Terms {
    cluster_class(pair, 0.5, 0.5, 0.5, 0.5)
}

/// Polarization Bell state (`phi+` if `even`, else `psi+`) times the spatial `phi+`.
pub fn pol_bell_times_spatial_phi(pair: &PairPaths, even: bool) -> Terms {
    let pols: [(Polarization, Polarization); 2] = if even {
        [(Polarization::H, Polarization::H), (Polarization::V, Polarization::V)]
    } else {
        [(Polarization::H, Polarization::V), (Polarization::V, Polarization::H)]
    };
    let mut t = Vec::new();
    for (pa, pb) in pols {
        for s in 0..2 {
            t.push((re(0.5), pair.ket(pa, pb, s, s)));
        }
    }
    t
}

/// `alpha |H>_a|H>_b + beta |V>_a|V>_b` on single paths.
pub fn pol_pair(a: &str, b: &str, alpha: f64, beta: f64) -> Terms {
    vec![
        (re(alpha), vec![ModeLabel::h(a), ModeLabel::h(b)]),
        (re(beta), vec![ModeLabel::v(a), ModeLabel::v(b)]),
    ]
}

/// `alpha |a1 b1> + beta |a2 b2>`, both photons H.
pub fn spatial_pair(pair: &PairPaths, alpha: f64, beta: f64) -> Terms {
    vec![
        (re(alpha), pair.ket(Polarization::H, Polarization::H, 0, 0)),
        (re(beta), pair.ket(Polarization::H, Polarization::H, 1, 1)),
    ]
}

pub fn product(x: &Terms, y: &Terms) -> Terms {
    let mut t = Vec::with_capacity(x.len() * y.len());
    for (cx, lx) in x {
        for (cy, ly) in y {
            let mut l = lx.clone();
            l.extend(ly.iter().cloned());
            t.push((cx * cy, l));
        }
    }
    t
}

pub fn on(register: &Arc<ModeRegister>, terms: &Terms) -> Result<FockState> {
    FockState::from_terms(register, terms)
}
