//! Finite atomic model of the base measure space.
//!
//! Every atom carries positive mass, so "almost everywhere" statements reduce
//! to "at every atom". A continuum base is represented by a quadrature: the
//! label is the sample point and the weight its quadrature mass.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CompensatedSum;

pub type AtomId = u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub id: AtomId,
    pub weight: f64,
    pub label: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpace {
    atoms: Vec<Atom>,
}

impl MeasureSpace {
    /// Builds a space from `(label, weight)` pairs; ids are assigned `0, 1, ...` in list order.
    pub fn new(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptySpace);
        }
        let atoms = atoms
            .iter()
            .enumerate()
            .map(|(index, &(label, weight))| {
                if !(weight > 0.0) || !weight.is_finite() {
                    return Err(Error::NonpositiveWeight { index, weight });
                }
                Ok(Atom {
                    id: index as AtomId,
                    weight,
                    label: Some(label),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { atoms })
    }

    /// Builds a space from explicit atoms, checking weights and id uniqueness.
    pub fn from_atoms(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptySpace);
        }
        let mut seen = BTreeSet::new();
        for (index, atom) in atoms.iter().enumerate() {
            if !(atom.weight > 0.0) || !atom.weight.is_finite() {
                return Err(Error::NonpositiveWeight {
                    index,
                    weight: atom.weight,
                });
            }
            if !seen.insert(atom.id) {
                return Err(Error::DuplicateId(atom.id));
            }
        }
        Ok(Self { atoms })
    }

    /// Counting measure on `n` atoms labelled `1..=n`.
    pub fn counting(n: usize) -> Result<Self> {
        let pairs: Vec<_> = (1..=n).map(|k| (k as f64, 1.0)).collect();
        Self::new(&pairs)
    }

    /// Midpoint partition of `(0, 1)` into `k` cells of mass `1/k`.
    pub fn uniform_partition(k: usize) -> Result<Self> {
        let w = 1.0 / k as f64;
        let pairs: Vec<_> = (0..k).map(|j| ((j as f64 + 0.5) * w, w)).collect();
        Self::new(&pairs)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn ids(&self) -> Vec<AtomId> {
        self.atoms.iter().map(|a| a.id).collect()
    }

    pub fn mass(&self) -> f64 {
        let mut acc = CompensatedSum::default();
        for a in &self.atoms {
            acc.add(a.weight);
        }
        acc.value()
    }

    pub fn position(&self, id: AtomId) -> Option<usize> {
        self.atoms.iter().position(|a| a.id == id)
    }

    /// Positions (in this space) of the atoms in `subset`, in space order.
    pub fn positions_of(&self, subset: &BTreeSet<AtomId>) -> Result<Vec<usize>> {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        for &id in subset {
            if self.position(id).is_none() {
                return Err(Error::UnknownId(id));
            }
        }
        Ok(self
            .atoms
            .iter()
            .enumerate()
            .filter(|(_, a)| subset.contains(&a.id))
            .map(|(k, _)| k)
            .collect())
    }

    /// Sub-space on the selected atoms; order preserved.
    pub fn restrict(&self, subset: &BTreeSet<AtomId>) -> Result<Self> {
        let positions = self.positions_of(subset)?;
        Ok(Self {
            atoms: positions.iter().map(|&k| self.atoms[k].clone()).collect(),
        })
    }

    pub fn complement(&self, subset: &BTreeSet<AtomId>) -> BTreeSet<AtomId> {
        self.atoms
            .iter()
            .map(|a| a.id)
            .filter(|id| !subset.contains(id))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting_measure_mass() {
        let s = MeasureSpace::new(&[(1.0, 1.0), (2.0, 1.0), (3.0, 1.0)]).unwrap();
        assert_eq!(s.mass(), 3.0);
        assert_eq!(s.ids(), vec![0, 1, 2]);
    }

    #[test]
    fn uniform_partition_labels() {
        let s = MeasureSpace::uniform_partition(4).unwrap();
        let labels: Vec<_> = s.atoms().iter().map(|a| a.label.unwrap()).collect();
        assert_eq!(labels, vec![0.125, 0.375, 0.625, 0.875]);
        assert_eq!(s.mass(), 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(MeasureSpace::new(&[]), Err(Error::EmptySpace)));
        assert!(matches!(
            MeasureSpace::new(&[(1.0, 1.0), (2.0, 0.0)]),
            Err(Error::NonpositiveWeight { index: 1, .. })
        ));
        assert!(matches!(
            MeasureSpace::new(&[(1.0, -2.0)]),
            Err(Error::NonpositiveWeight { index: 0, .. })
        ));
    }

    #[test]
    fn restriction() {
        let s = MeasureSpace::new(&[(1.0, 0.5), (2.0, 1.5), (3.0, 2.0)]).unwrap();
        let sub = s.restrict(&[0, 1].into()).unwrap();
        assert_eq!(sub.len(), 2);
        assert_eq!(sub.mass(), 2.0);
        assert_eq!(s.restrict(&[0, 1, 2].into()).unwrap(), s);
        assert!(matches!(s.restrict(&[99].into()), Err(Error::UnknownId(99))));
        assert!(matches!(s.restrict(&BTreeSet::new()), Err(Error::EmptySubset)));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let a = Atom { id: 4, weight: 1.0, label: None };
        assert!(matches!(
            MeasureSpace::from_atoms(vec![a.clone(), a]),
            Err(Error::DuplicateId(4))
        ));
    }
}
