//! Sparse bosonic states over labelled optical modes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Amplitudes below this magnitude are dropped after every operation.
pub const PRUNE: f64 = 1e-12;
/// Entrywise tolerance on `U†U - I`.
pub const UNITARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::H, Polarization::V];

    pub fn flipped(self) -> Self {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarization::H => "H",
            Polarization::V => "V",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeLabel {
    pub spatial: String,
    pub pol: Polarization,
}

impl ModeLabel {
    pub fn new(spatial: impl Into<String>, pol: Polarization) -> Self {
        ModeLabel { spatial: spatial.into(), pol }
    }

    pub fn h(spatial: impl Into<String>) -> Self {
        Self::new(spatial, Polarization::H)
    }

    pub fn v(spatial: impl Into<String>) -> Self {
        Self::new(spatial, Polarization::V)
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.spatial, self.pol)
    }
}

/// Parses `path:H` / `path:V`.
impl FromStr for ModeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (path, pol) = s
            .rsplit_once(':')
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))?;
        let pol = match pol {
            "H" => Polarization::H,
            "V" => Polarization::V,
            _ => return Err(Error::UnknownLabel(s.to_string())),
        };
        if path.is_empty() {
            return Err(Error::UnknownLabel(s.to_string()));
        }
        Ok(ModeLabel::new(path, pol))
    }
}

/// Ordered set of modes. Declaring a path adds its H and V modes; indices never move.
#[derive(Debug, Clone, Default)]
pub struct ModeRegister {
    labels: Vec<ModeLabel>,
    index: HashMap<ModeLabel, usize>,
    paths: Vec<String>,
}

impl PartialEq for ModeRegister {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels
    }
}

impl Eq for ModeRegister {}

impl ModeRegister {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_paths<S: AsRef<str>>(paths: &[S]) -> Result<Self> {
        let mut r = Self::new();
        for p in paths {
            r.add_path(p.as_ref())?;
        }
        Ok(r)
    }

    pub fn add_path(&mut self, path: &str) -> Result<()> {
        if self.has_path(path) {
            return Err(Error::DuplicatePath(path.to_string()));
        }
        self.paths.push(path.to_string());
        for pol in Polarization::BOTH {
            let label = ModeLabel::new(path, pol);
            self.index.insert(label.clone(), self.labels.len());
            self.labels.push(label);
        }
        Ok(())
    }

    pub fn has_path(&self, path: &str) -> bool {
        self.index.contains_key(&ModeLabel::h(path))
    }

    pub fn paths(&self) -> &[String] {
        &self.paths
    }

    pub fn labels(&self) -> &[ModeLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &ModeLabel) -> Result<usize> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn mode(&self, path: &str, pol: Polarization) -> Result<usize> {
        self.index
            .get(&ModeLabel::new(path, pol))
            .copied()
            .ok_or_else(|| Error::UnknownPath(path.to_string()))
    }

    pub fn label(&self, index: usize) -> Result<&ModeLabel> {
        self.labels.get(index).ok_or(Error::IndexOutOfRange(index))
    }
}

/// Photon counts per mode, stored as sorted `(mode, count)` pairs with count > 0.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Occupation(Vec<(usize, u32)>);

impl Occupation {
    pub fn vacuum() -> Self {
        Occupation(Vec::new())
    }

    pub fn from_counts(counts: impl IntoIterator<Item = (usize, u32)>) -> Self {
        let mut acc: BTreeMap<usize, u32> = BTreeMap::new();
        for (m, n) in counts {
            if n > 0 {
                *acc.entry(m).or_default() += n;
            }
        }
        Occupation(acc.into_iter().collect())
    }

    pub fn count(&self, mode: usize) -> u32 {
        self.0
            .binary_search_by_key(&mode, |&(m, _)| m)
            .map(|i| self.0[i].1)
            .unwrap_or(0)
    }

    pub fn total(&self) -> u32 {
        self.0.iter().map(|&(_, n)| n).sum()
    }

    pub fn entries(&self) -> &[(usize, u32)] {
        &self.0
    }

    /// Splits into the part on `modes` and the rest.
    pub fn split(&self, modes: &BTreeSet<usize>) -> (Occupation, Occupation) {
        let (a, b): (Vec<_>, Vec<_>) = self.0.iter().partition(|(m, _)| modes.contains(m));
        (Occupation(a), Occupation(b))
    }

    pub fn merged(&self, other: &Occupation) -> Occupation {
        Occupation::from_counts(self.0.iter().chain(other.0.iter()).copied())
    }
}

/// A k-mode linear transformation. Creation operator on acted mode i maps to
/// `sum_j U[j][i]` times the creation operator on acted mode j.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeUnitary {
    modes: Vec<usize>,
    matrix: DMatrix<Complex64>,
}

impl ModeUnitary {
    pub fn new(modes: Vec<usize>, matrix: DMatrix<Complex64>) -> Result<Self> {
        let k = modes.len();
        if matrix.nrows() != k || matrix.ncols() != k {
            return Err(Error::BadUnitary(format!(
                "{} modes but {}x{} matrix",
                k,
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let distinct: BTreeSet<_> = modes.iter().collect();
        if distinct.len() != k {
            return Err(Error::BadUnitary("repeated mode index".into()));
        }
        let dev = unitarity_deviation(&matrix);
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(ModeUnitary { modes, matrix })
    }

    pub fn real(modes: Vec<usize>, rows: &[&[f64]]) -> Result<Self> {
        let k = rows.len();
        let m = DMatrix::from_fn(k, k, |i, j| {
            Complex64::new(rows[i].get(j).copied().unwrap_or(f64::NAN), 0.0)
        });
        Self::new(modes, m)
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }
}

pub fn unitarity_deviation(m: &DMatrix<Complex64>) -> f64 {
    let prod = m.adjoint() * m;
    let mut dev: f64 = 0.0;
    for i in 0..prod.nrows() {
        for j in 0..prod.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((prod[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    if dev.is_nan() {
        f64::INFINITY
    } else {
        dev
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Sparse superposition of occupation configurations. Amplitudes multiply
/// normalized number kets.
#[derive(Debug, Clone)]
pub struct FockState {
    register: Arc<ModeRegister>,
    amps: BTreeMap<Occupation, Complex64>,
}

fn same_register(a: &Arc<ModeRegister>, b: &Arc<ModeRegister>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl FockState {
    pub fn vacuum(register: Arc<ModeRegister>) -> Self {
        let mut amps = BTreeMap::new();
        amps.insert(Occupation::vacuum(), Complex64::new(1.0, 0.0));
        FockState { register, amps }
    }

    pub fn zero(register: Arc<ModeRegister>) -> Self {
        FockState { register, amps: BTreeMap::new() }
    }

    pub fn from_terms(register: &Arc<ModeRegister>, terms: &[(Complex64, Vec<ModeLabel>)]) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::EmptyTerms);
        }
        let mut amps: BTreeMap<Occupation, Complex64> = BTreeMap::new();
        for (amp, labels) in terms {
            let idx = labels
                .iter()
                .map(|l| register.index_of(l).map(|i| (i, 1)))
                .collect::<Result<Vec<_>>>()?;
            *amps.entry(Occupation::from_counts(idx)).or_default() += amp;
        }
        Ok(Self::from_map(register.clone(), amps))
    }

    pub fn from_map(register: Arc<ModeRegister>, mut amps: BTreeMap<Occupation, Complex64>) -> Self {
        amps.retain(|_, a| a.norm() >= PRUNE);
        FockState { register, amps }
    }

    pub fn register(&self) -> &Arc<ModeRegister> {
        &self.register
    }

    pub fn amplitudes(&self) -> impl Iterator<Item = (&Occupation, &Complex64)> {
        self.amps.iter()
    }

    pub fn amplitude(&self, config: &Occupation) -> Complex64 {
        self.amps.get(config).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn photon_numbers(&self) -> BTreeSet<u32> {
        self.amps.keys().map(Occupation::total).collect()
    }

    pub fn scaled(&self, c: Complex64) -> FockState {
        let amps = self.amps.iter().map(|(k, a)| (k.clone(), a * c)).collect();
        Self::from_map(self.register.clone(), amps)
    }

    pub fn normalize(&self) -> Result<(FockState, f64)> {
        let norm = self.norm_sqr().sqrt();
        if norm < PRUNE {
            return Err(Error::ZeroState);
        }
        Ok((self.scaled(Complex64::new(1.0 / norm, 0.0)), norm))
    }

    pub fn inner(&self, other: &FockState) -> Result<Complex64> {
        if !same_register(&self.register, &other.register) {
            return Err(Error::RegisterMismatch);
        }
        Ok(self
            .amps
            .iter()
            .filter_map(|(k, a)| other.amps.get(k).map(|b| a.conj() * b))
            .sum())
    }

    /// Both normalized and `|<a|b>| >= 1 - 1e-10`.
    pub fn equal_up_to_phase(&self, other: &FockState) -> bool {
        let (Ok((a, _)), Ok((b, _))) = (self.normalize(), other.normalize()) else {
            return false;
        };
        a.inner(&b).map(|z| z.norm() >= 1.0 - 1e-10).unwrap_or(false)
    }

    /// Moves the state onto a larger register that contains every label of the current one.
    pub fn embed(&self, register: &Arc<ModeRegister>) -> Result<FockState> {
        let map: Vec<usize> = self
            .register
            .labels()
            .iter()
            .map(|l| register.index_of(l))
            .collect::<Result<_>>()?;
        let amps = self
            .amps
            .iter()
            .map(|(k, a)| (Occupation::from_counts(k.entries().iter().map(|&(m, n)| (map[m], n))), *a))
            .collect();
        Ok(Self::from_map(register.clone(), amps))
    }

    pub fn apply(&self, u: &ModeUnitary) -> Result<FockState> {
        apply_unitary(self, u)
    }

    /// Human-readable list of `(amplitude, [label^count ...])`.
    pub fn terms(&self) -> Vec<(Complex64, Vec<(ModeLabel, u32)>)> {
        self.amps
            .iter()
            .map(|(k, a)| {
                let labels = k
                    .entries()
                    .iter()
                    .map(|&(m, n)| (self.register.labels()[m].clone(), n))
                    .collect();
                (*a, labels)
            })
            .collect()
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.amps.is_empty() {
            return f.write_str("0");
        }
        for (i, (amp, labels)) in self.terms().into_iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            if amp.im.abs() < PRUNE {
                write!(f, "{:+.6}", amp.re)?;
            } else {
                write!(f, "({:+.6}{:+.6}i)", amp.re, amp.im)?;
            }
            f.write_str("|")?;
            for (j, (l, n)) in labels.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                if *n > 1 {
                    write!(f, "{}^{}", l, n)?;
                } else {
                    write!(f, "{}", l)?;
                }
            }
            f.write_str(">")?;
        }
        Ok(())
    }
}

pub fn make_state(register: &Arc<ModeRegister>, terms: &[(Complex64, Vec<ModeLabel>)]) -> Result<FockState> {
    FockState::from_terms(register, terms)
}

pub fn inner(a: &FockState, b: &FockState) -> Result<Complex64> {
    a.inner(b)
}

pub fn normalize(state: &FockState) -> Result<(FockState, f64)> {
    state.normalize()
}

pub fn apply_unitary(state: &FockState, u: &ModeUnitary) -> Result<FockState> {
    let n_modes = state.register.len();
    if let Some(&bad) = u.modes.iter().find(|&&m| m >= n_modes) {
        return Err(Error::IndexOutOfRange(bad));
    }
    let k = u.modes.len();
    let local: HashMap<usize, usize> = u.modes.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    let acted: BTreeSet<usize> = u.modes.iter().copied().collect();
    let mut out: BTreeMap<Occupation, Complex64> = BTreeMap::new();

    for (config, amp) in &state.amps {
        let (inside, rest) = config.split(&acted);
        if inside.entries().is_empty() {
            *out.entry(config.clone()).or_default() += amp;
            continue;
        }
        // Expand the product of transformed creation operators one photon at a time,
        // keyed by output occupation over the acted modes.
        let mut norm_in = 1.0;
        let mut photons = Vec::new();
        for &(m, n) in inside.entries() {
            norm_in *= factorial(n);
            photons.extend(std::iter::repeat(local[&m]).take(n as usize));
        }
        let mut partial: HashMap<Vec<u32>, Complex64> = HashMap::new();
        partial.insert(vec![0; k], *amp / norm_in.sqrt());
        for &i in &photons {
            let mut next: HashMap<Vec<u32>, Complex64> = HashMap::with_capacity(partial.len() * k);
            for (occ, c) in &partial {
                for j in 0..k {
                    let uji = u.matrix[(j, i)];
                    if uji.norm() == 0.0 {
                        continue;
                    }
                    let mut o = occ.clone();
                    o[j] += 1;
                    *next.entry(o).or_default() += c * uji;
                }
            }
            partial = next;
        }
        for (occ, c) in partial {
            let mut norm_out = 1.0;
            let mut counts = Vec::with_capacity(k);
            for (j, &m) in occ.iter().enumerate() {
                if m > 0 {
                    norm_out *= factorial(m);
                    counts.push((u.modes[j], m));
                }
            }
            let full = rest.merged(&Occupation::from_counts(counts));
            *out.entry(full).or_default() += c * norm_out.sqrt();
        }
    }
    Ok(FockState::from_map(state.register.clone(), out))
}
