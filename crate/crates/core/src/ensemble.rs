use crate::error::{Error, Result};
use crate::fock::FockState;

/// Mixed state as a weighted list of normalized pure states.
#[derive(Debug, Clone, Default)]
pub struct WeightedEnsemble {
    members: Vec<(f64, FockState)>,
}

impl WeightedEnsemble {
    pub fn pure(state: FockState) -> Result<Self> {
        let (s, _) = state.normalize()?;
        Ok(WeightedEnsemble { members: vec![(1.0, s)] })
    }

    /// Normalizes weights and member states; members equal up to phase are merged.
    pub fn from_weighted(items: impl IntoIterator<Item = (f64, FockState)>) -> Result<Self> {
        let mut e = WeightedEnsemble::default();
        for (w, s) in items {
            e.push_merge(w, s)?;
        }
        let total = e.total_weight();
        if total <= 0.0 {
            return Err(Error::ZeroState);
        }
        for m in &mut e.members {
            m.0 /= total;
        }
        Ok(e)
    }

    /// Adds an unnormalized component; does not renormalize the weights.
    pub fn push_merge(&mut self, weight: f64, state: FockState) -> Result<()> {
        if weight <= 0.0 {
            return Ok(());
        }
        let (s, _) = state.normalize()?;
        if let Some(m) = self.members.iter_mut().find(|m| m.1.equal_up_to_phase(&s)) {
            m.0 += weight;
        } else {
            self.members.push((weight, s));
        }
        Ok(())
    }

    pub fn members(&self) -> &[(f64, FockState)] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.members.iter().map(|m| m.0).sum()
    }

    /// `sum_i w_i |<target|psi_i>|^2`
    pub fn fidelity(&self, target: &FockState) -> Result<f64> {
        let (t, _) = target.normalize()?;
        let mut f = 0.0;
        for (w, s) in &self.members {
            f += w * t.inner(s)?.norm_sqr();
        }
        Ok(f)
    }
}
