//! Known-parameter concentration by attenuating the larger amplitudes of photon A.

use crate::circuits::{CircuitSpec, Selection};
use crate::elements::{DetectorSpec, Element};
use crate::error::Result;
use crate::protocols::states::PairPaths;

/// Attenuation factors this close to 1 are treated as ties and skipped.
const TIE: f64 = 1e-12;

fn needs(f: f64) -> bool {
    f < 1.0 - TIE
}

/// Interferometer on one path: split by polarization, attenuate H with a wave plate
/// followed by a PBS into `h_dump`, attenuate V with an unbalanced BS into `v_dump`,
/// recombine. Returns the elements and the dump paths that need detectors.
fn interferometer(path: &str, f_h: f64, f_v: f64, v_arm: &str, h_dump: &str, v_dump: &str) -> (Vec<Element>, Vec<String>) {
    let mut els = vec![Element::pbs(path, v_arm)];
    let mut dumps = Vec::new();
    if needs(f_h) {
        els.push(Element::wp(path, f_h.acos()));
        els.push(Element::pbs(path, h_dump));
        dumps.push(h_dump.to_string());
    } else {
        els.push(Element::delay(path));
    }
    if needs(f_v) {
        els.push(Element::ubs(v_arm, v_dump, f_v));
        dumps.push(v_dump.to_string());
    } else {
        els.push(Element::delay(v_arm));
    }
    els.push(Element::pbs(path, v_arm));
    (els, dumps)
}

/// Attenuation plan for photon A with `c[pol][path]` multiplying `|pol pol>|a_s b_s>`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub sign_fixes: Vec<Element>,
    /// `(path index, reflection)` of the spatial unbalanced BS.
    pub spatial: Option<(usize, f64)>,
    /// Per polarization, per path amplitude factor applied after the spatial step.
    pub factors: [[f64; 2]; 2],
    /// Common amplitude of all four terms on success.
    pub common: f64,
}

impl SplitPlan {
    pub fn success(&self) -> f64 {
        4.0 * self.common * self.common
    }
}

/// The dominant term's path is first attenuated so that the dominant polarization is
/// balanced across paths; every (polarization, path) arm is then attenuated down to
/// the smallest remaining magnitude.
pub fn plan(c: [[f64; 2]; 2], desired_sign: [[f64; 2]; 2], pair: &PairPaths) -> SplitPlan {
    let sign = |x: f64, d: f64| if x == 0.0 || x.signum() == d.signum() { 1.0 } else { -1.0 };
    let g = sign(c[0][0], desired_sign[0][0]);
    let mut t = [[0.0; 2]; 2];
    for p in 0..2 {
        for s in 0..2 {
            t[p][s] = sign(c[p][s], desired_sign[p][s]) * g;
        }
    }
    let mut sign_fixes = Vec::new();
    if t[0][1] < 0.0 {
        sign_fixes.push(Element::sflip(&pair.a[0], &pair.a[1]));
        t[0][1] = -t[0][1];
        t[1][1] = -t[1][1];
    }
    if t[1][0] < 0.0 {
        sign_fixes.push(Element::pflip(&pair.a[0]));
    }
    if t[1][1] < 0.0 {
        sign_fixes.push(Element::pflip(&pair.a[1]));
    }

    let m = c.map(|row| row.map(f64::abs));
    let (mut p0, mut s0) = (0, 0);
    for p in 0..2 {
        for s in 0..2 {
            if m[p][s] > m[p0][s0] {
                (p0, s0) = (p, s);
            }
        }
    }
    let s1 = 1 - s0;
    let sigma = if m[p0][s0] > 0.0 { m[p0][s1] / m[p0][s0] } else { 1.0 };
    let spatial = if needs(sigma) { Some((s0, sigma)) } else { None };
    let mut after = m;
    if spatial.is_some() {
        for row in after.iter_mut() {
            row[s0] *= sigma;
        }
    }
    let common = after.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let factors = after.map(|row| row.map(|x| if x > 0.0 { common / x } else { 1.0 }));
    SplitPlan { sign_fixes, spatial, factors, common }
}

/// Circuit on photon A's paths, with one threshold detector per dump, accepting no clicks.
pub fn two_path_circuit(plan: &SplitPlan, pair: &PairPaths, eta: f64) -> Result<CircuitSpec> {
    let [a1, a2] = [&pair.a[0], &pair.a[1]];
    let mut paths: Vec<String> = vec![a1.clone(), a2.clone(), pair.b[0].clone(), pair.b[1].clone()];
    let mut steps: Vec<Element> = plan.sign_fixes.clone();
    let mut dumps = Vec::new();
    if let Some((s, r)) = plan.spatial {
        paths.push("a3".into());
        steps.push(Element::ubs(&pair.a[s], "a3", r));
        dumps.push("a3".to_string());
    }
    for (s, v_dump) in [(0, "a4"), (1, "a5")] {
        let (fh, fv) = (plan.factors[0][s], plan.factors[1][s]);
        if !needs(fh) && !needs(fv) {
            continue;
        }
        let path = &pair.a[s];
        let v_arm = format!("{path}v");
        let h_dump = format!("{path}'");
        let (els, d) = interferometer(path, fh, fv, &v_arm, &h_dump, v_dump);
        paths.push(v_arm);
        paths.extend(d.iter().cloned());
        steps.extend(els);
        dumps.extend(d);
    }
    finish(paths, steps, &dumps, eta)
}

fn finish(paths: Vec<String>, steps: Vec<Element>, dumps: &[String], eta: f64) -> Result<CircuitSpec> {
    let mut spec = CircuitSpec::with_paths(&paths)?;
    for e in steps {
        spec.element(e);
    }
    for (i, d) in dumps.iter().enumerate() {
        spec.detect(DetectorSpec::threshold(&format!("D{}", i + 1), d).with_efficiency(eta));
    }
    spec.measure().select(Selection::NoClicks);
    Ok(spec)
}

/// Polarization-only concentration of `alpha HH + beta VV` on paths `a`, `b`.
pub fn polarization_circuit(alpha: f64, beta: f64, eta: f64) -> Result<(CircuitSpec, f64)> {
    let mut steps = Vec::new();
    if alpha * beta < 0.0 {
        steps.push(Element::pflip("a"));
    }
    let (ma, mb) = (alpha.abs(), beta.abs());
    let common = ma.min(mb);
    let f = |x: f64| if x > 0.0 { common / x } else { 1.0 };
    let mut paths = vec!["a".to_string(), "b".to_string()];
    let mut dumps = Vec::new();
    if needs(f(ma)) || needs(f(mb)) {
        let (els, d) = interferometer("a", f(ma), f(mb), "av", "a'", "a''");
        paths.push("av".into());
        paths.extend(d.iter().cloned());
        steps.extend(els);
        dumps = d;
    }
    Ok((finish(paths, steps, &dumps, eta)?, 2.0 * common * common))
}

/// Spatial-only concentration of `alpha a1b1 + beta a2b2`.
pub fn spatial_circuit(alpha: f64, beta: f64, pair: &PairPaths, eta: f64) -> Result<(CircuitSpec, f64)> {
    let mut steps = Vec::new();
    if alpha * beta < 0.0 {
        steps.push(Element::sflip(&pair.a[0], &pair.a[1]));
    }
    let (ma, mb) = (alpha.abs(), beta.abs());
    let mut paths: Vec<String> = vec![pair.a[0].clone(), pair.a[1].clone(), pair.b[0].clone(), pair.b[1].clone()];
    let mut dumps = Vec::new();
    let (big, r) = if ma >= mb { (0, mb / ma) } else { (1, ma / mb) };
    if needs(r) {
        paths.push("a3".into());
        steps.push(Element::ubs(&pair.a[big], "a3", r));
        dumps.push("a3".to_string());
    }
    let common = ma.min(mb);
    Ok((finish(paths, steps, &dumps, eta)?, 2.0 * common * common))
}
