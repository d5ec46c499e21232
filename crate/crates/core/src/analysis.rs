//! Fidelity, reduced single-photon density matrices and von Neumann entropy.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::ensemble::WeightedEnsemble;
use crate::error::{Error, Result};
use crate::fock::{FockState, Polarization};
use crate::measurement::Side;
use crate::protocols::states::PairPaths;

const EIG_FLOOR: f64 = 1e-12;

/// Anything with a fidelity against a pure target.
pub trait Fidelity {
    fn fidelity_with(&self, target: &FockState) -> Result<f64>;
}

impl Fidelity for FockState {
    fn fidelity_with(&self, target: &FockState) -> Result<f64> {
        let (s, _) = self.normalize()?;
        let (t, _) = target.normalize()?;
        Ok(t.inner(&s)?.norm_sqr().min(1.0))
    }
}

impl Fidelity for WeightedEnsemble {
    fn fidelity_with(&self, target: &FockState) -> Result<f64> {
        Ok(self.fidelity(target)?.min(1.0))
    }
}

pub fn fidelity<S: Fidelity + ?Sized>(state: &S, target: &FockState) -> Result<f64> {
    state.fidelity_with(target)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dof {
    Polarization,
    Spatial,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDensity {
    pub basis: Vec<String>,
    pub matrix: DMatrix<Complex64>,
}

impl ReducedDensity {
    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.matrix.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    pub fn hermitian_deviation(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Logical index `2 * rail + pol` of the single photon on `rails`.
fn rail_index(state: &FockState, config_modes: &[(usize, u32)], rails: &[String; 2]) -> Result<Option<usize>> {
    let reg = state.register();
    let mut found = None;
    for &(m, n) in config_modes {
        let label = reg.label(m)?;
        let Some(r) = rails.iter().position(|p| *p == label.spatial) else { continue };
        if n != 1 || found.is_some() {
            return Err(Error::Shape("bunched photons on one side".into()));
        }
        let pol = usize::from(label.pol == Polarization::V);
        found = Some(2 * r + pol);
    }
    Ok(found)
}

/// Reduced state of one photon of a two-photon dual-rail state, traced down to `dof`.
pub fn reduce_photon(state: &FockState, rails: &PairPaths, side: Side, dof: Dof) -> Result<ReducedDensity> {
    let (s, _) = state.normalize()?;
    for p in rails.a.iter().chain(rails.b.iter()) {
        if !s.register().has_path(p) {
            return Err(Error::Shape(format!("missing rail {p}")));
        }
    }
    // psi[kept][traced]
    let mut psi = DMatrix::<Complex64>::zeros(4, 4);
    for (config, amp) in s.amplitudes() {
        let e = config.entries();
        let ia = rail_index(&s, e, &rails.a)?;
        let ib = rail_index(&s, e, &rails.b)?;
        let (Some(ia), Some(ib)) = (ia, ib) else {
            return Err(Error::Shape(format!("config {config:?} lacks a photon on each side")));
        };
        if config.total() != 2 {
            return Err(Error::Shape("photons outside the rails".into()));
        }
        let (k, t) = if side == Side::Alice { (ia, ib) } else { (ib, ia) };
        psi[(k, t)] += *amp;
    }
    let rho = &psi * psi.adjoint();
    let rails_of = if side == Side::Alice { &rails.a } else { &rails.b };
    let full_basis: Vec<String> = (0..4).map(|i| format!("{}:{}", rails_of[i / 2], if i % 2 == 0 { "H" } else { "V" })).collect();
    Ok(match dof {
        Dof::Both => ReducedDensity { basis: full_basis, matrix: rho },
        Dof::Polarization => {
            let m = DMatrix::from_fn(2, 2, |p, q| rho[(p, q)] + rho[(2 + p, 2 + q)]);
            ReducedDensity { basis: vec!["H".into(), "V".into()], matrix: m }
        }
        Dof::Spatial => {
            let m = DMatrix::from_fn(2, 2, |r, q| rho[(2 * r, 2 * q)] + rho[(2 * r + 1, 2 * q + 1)]);
            ReducedDensity { basis: rails_of.to_vec(), matrix: m }
        }
    })
}

/// Weighted sum of the members' reduced states.
pub fn reduce_ensemble(ens: &WeightedEnsemble, rails: &PairPaths, side: Side, dof: Dof) -> Result<ReducedDensity> {
    let mut acc: Option<ReducedDensity> = None;
    let total = ens.total_weight();
    for (w, s) in ens.members() {
        let r = reduce_photon(s, rails, side, dof)?;
        let scaled = r.matrix * Complex64::new(w / total, 0.0);
        match acc.as_mut() {
            Some(a) => a.matrix += scaled,
            None => acc = Some(ReducedDensity { basis: r.basis, matrix: scaled }),
        }
    }
    acc.ok_or(Error::EmptyTerms)
}

/// Von Neumann entropy in bits.
pub fn entropy(rd: &ReducedDensity) -> f64 {
    rd.eigenvalues().into_iter().filter(|&l| l > EIG_FLOOR).map(|l| -l * l.log2()).sum::<f64>().max(0.0)
}
