//! Parameter grids evaluated against the closed forms, written as CSV.

use std::fmt::Write as _;

use rayon::prelude::*;

use hyperconc::protocols::{run_protocol, ProtocolKind};

use crate::params::{resolve, Given};

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Axis {
    /// `name=start:stop:steps`
    pub fn parse(s: &str) -> Result<Axis, String> {
        let (name, range) = s.split_once('=').ok_or_else(|| format!("expected name=start:stop:steps, got {s}"))?;
        let parts: Vec<&str> = range.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(format!("expected name=start:stop:steps, got {s}"));
        };
        let num = |x: &str| x.parse::<f64>().map_err(|_| format!("malformed number {x}"));
        let steps = n.parse::<usize>().map_err(|_| format!("malformed step count {n}"))?;
        if steps < 2 {
            return Err(format!("{name}: need at least 2 steps"));
        }
        Ok(Axis { name: name.to_string(), start: num(a)?, stop: num(b)?, steps })
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * i as f64 / (self.steps - 1) as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepSpec {
    pub kind: Option<ProtocolKind>,
    pub axes: Vec<Axis>,
    pub fixed: Given,
    /// `(target, source)`: target takes the source's value in every cell.
    pub links: Vec<(String, String)>,
    pub eta: f64,
}

pub struct Row {
    pub swept: Vec<f64>,
    pub p_sim: f64,
    pub p_closed: f64,
}

fn cells(axes: &[Axis]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for a in axes {
        let vals = a.values();
        out = out
            .into_iter()
            .flat_map(|prefix| {
                vals.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    out
}

pub fn evaluate(spec: &SweepSpec) -> Result<Vec<Row>, String> {
    let kind = spec.kind.ok_or("missing protocol kind")?;
    if spec.axes.is_empty() {
        return Err("give at least one --vary".into());
    }
    let grid = cells(&spec.axes);
    let rows: Vec<Result<Row, String>> = grid
        .par_iter()
        .map(|cell| {
            let mut g = spec.fixed;
            for (a, v) in spec.axes.iter().zip(cell) {
                g.set(&a.name, *v)?;
            }
            for (target, source) in &spec.links {
                let v = g.get(source)?.ok_or_else(|| format!("link source {source} has no value"))?;
                g.set(target, v)?;
            }
            let p = resolve(kind, &g, spec.eta).map_err(|e| format!("cell {cell:?}: {e}"))?;
            let r = run_protocol(kind, &p).map_err(|e| format!("cell {cell:?}: {e}"))?;
            Ok(Row { swept: cell.clone(), p_sim: r.simulated_value(), p_closed: r.closed_form })
        })
        .collect();
    rows.into_iter().collect()
}

pub fn to_csv(spec: &SweepSpec, rows: &[Row]) -> String {
    let mut s = String::new();
    if let Some(k) = spec.kind {
        let _ = writeln!(s, "# kind={k}");
    }
    for a in &spec.axes {
        let _ = writeln!(s, "# vary {}={}:{}:{}", a.name, a.start, a.stop, a.steps);
    }
    for name in ["alpha", "beta", "gamma", "delta", "f1"] {
        if let Ok(Some(v)) = spec.fixed.get(name) {
            let _ = writeln!(s, "# fix {name}={v}");
        }
    }
    for (t, src) in &spec.links {
        let _ = writeln!(s, "# link {t}={src}");
    }
    let _ = writeln!(s, "# eta={}", spec.eta);
    let names: Vec<&str> = spec.axes.iter().map(|a| a.name.as_str()).collect();
    let _ = writeln!(s, "{},p_sim,p_closed,abs_err", names.join(","));
    let mut worst: f64 = 0.0;
    for r in rows {
        let err = (r.p_sim - r.p_closed).abs();
        worst = worst.max(err);
        for v in &r.swept {
            let _ = write!(s, "{v:.16e},");
        }
        let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", r.p_sim, r.p_closed, err);
    }
    let _ = writeln!(s, "# max_abs_err={worst:.16e}");
    s
}
