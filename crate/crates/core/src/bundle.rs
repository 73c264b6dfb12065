//! Sections of the Hilbert bundle and the direct-integral inner product.
//!
//! `⟨x, y⟩ = Σ_k w_k ⟨x_k, y_k⟩` with the fiber product conjugate-linear in
//! the second slot. Per-atom terms are reduced in atom order with
//! compensated summation so results never depend on scheduling.

use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CVector, CompensatedComplexSum, CompensatedSum, ZERO};
use crate::measure_space::{AtomId, MeasureSpace};

/// Fiber dimension at each atom.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiberSpec {
    dims: Vec<usize>,
}

impl FiberSpec {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if let Some(k) = dims.iter().position(|&d| d == 0) {
            return Err(Error::ShapeMismatch(format!("fiber {k} has dimension 0")));
        }
        Ok(Self { dims })
    }

    pub fn uniform(n_atoms: usize, dim: usize) -> Result<Self> {
        Self::new(vec![dim; n_atoms])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Checks that this spec fits `space`.
    pub fn check_space(&self, space: &MeasureSpace) -> Result<()> {
        if self.dims.len() != space.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} fiber dimensions for {} atoms",
                self.dims.len(),
                space.len()
            )));
        }
        Ok(())
    }

    pub fn select(&self, positions: &[usize]) -> Self {
        Self {
            dims: positions.iter().map(|&k| self.dims[k]).collect(),
        }
    }
}

/// One complex vector per atom.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    blocks: Vec<CVector>,
}

impl Section {
    pub fn new(blocks: Vec<CVector>) -> Self {
        Self { blocks }
    }

    pub fn zeros(fibers: &FiberSpec) -> Self {
        Self {
            blocks: fibers.dims().iter().map(|&d| CVector::zeros(d)).collect(),
        }
    }

    /// Section that is `value` in block `atom`, coordinate `index` and zero elsewhere.
    pub fn unit(fibers: &FiberSpec, atom: usize, index: usize) -> Self {
        let mut s = Self::zeros(fibers);
        s.blocks[atom][index] = Complex64::new(1.0, 0.0);
        s
    }

    /// Splits a stacked vector into fiber blocks.
    pub fn from_stacked(fibers: &FiberSpec, stacked: &CVector) -> Result<Self> {
        if stacked.len() != fibers.total_dim() {
            return Err(Error::ShapeMismatch(format!(
                "stacked length {} vs total dimension {}",
                stacked.len(),
                fibers.total_dim()
            )));
        }
        let mut offset = 0;
        let blocks = fibers
            .dims()
            .iter()
            .map(|&d| {
                let b = stacked.rows(offset, d).into_owned();
                offset += d;
                b
            })
            .collect();
        Ok(Self { blocks })
    }

    pub fn stacked(&self) -> CVector {
        let data: Vec<Complex64> = self.blocks.iter().flat_map(|b| b.iter().copied()).collect();
        CVector::from_vec(data)
    }

    pub fn blocks(&self) -> &[CVector] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &CVector {
        &self.blocks[k]
    }

    pub fn into_blocks(self) -> Vec<CVector> {
        self.blocks
    }

    pub fn check_shape(&self, fibers: &FiberSpec) -> Result<()> {
        if self.blocks.len() != fibers.len() {
            return Err(Error::ShapeMismatch(format!(
                "section has {} blocks, expected {}",
                self.blocks.len(),
                fibers.len()
            )));
        }
        for (k, (b, &d)) in self.blocks.iter().zip(fibers.dims()).enumerate() {
            if b.len() != d {
                return Err(Error::ShapeMismatch(format!(
                    "block {k} has length {}, fiber dimension is {d}",
                    b.len()
                )));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.iter().all(|b| b.iter().all(|z| *z == ZERO))
    }

    pub fn sub(&self, other: &Section) -> Section {
        Section::new(
            self.blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn scale(&self, c: Complex64) -> Section {
        Section::new(self.blocks.iter().map(|b| b * c).collect())
    }

    /// Restriction of the section to the atoms in `subset`.
    pub fn restrict(&self, space: &MeasureSpace, subset: &BTreeSet<AtomId>) -> Result<Section> {
        let positions = space.positions_of(subset)?;
        Ok(Section::new(
            positions.iter().map(|&k| self.blocks[k].clone()).collect(),
        ))
    }
}

fn check(x: &Section, space: &MeasureSpace, fibers: &FiberSpec) -> Result<()> {
    fibers.check_space(space)?;
    x.check_shape(fibers)
}

/// `Σ_k w_k ⟨x_k, y_k⟩`, conjugating `y`.
pub fn inner(x: &Section, y: &Section, space: &MeasureSpace, fibers: &FiberSpec) -> Result<Complex64> {
    check(x, space, fibers)?;
    check(y, space, fibers)?;
    let mut acc = CompensatedComplexSum::default();
    for ((xk, yk), atom) in x.blocks.iter().zip(&y.blocks).zip(space.atoms()) {
        let mut fiber = CompensatedComplexSum::default();
        for (a, b) in xk.iter().zip(yk.iter()) {
            fiber.add(a * b.conj());
        }
        acc.add(fiber.value() * atom.weight);
    }
    Ok(acc.value())
}

pub fn norm(x: &Section, space: &MeasureSpace, fibers: &FiberSpec) -> Result<f64> {
    check(x, space, fibers)?;
    let mut acc = CompensatedSum::default();
    for (xk, atom) in x.blocks.iter().zip(space.atoms()) {
        let mut fiber = CompensatedSum::default();
        for a in xk.iter() {
            fiber.add(a.norm_sqr());
        }
        acc.add(fiber.value() * atom.weight);
    }
    Ok(acc.value().max(0.0).sqrt())
}

/// Extends a section on a sub-space by zero to the parent space.
pub fn embed_section(
    x: &Section,
    sub: &MeasureSpace,
    parent: &MeasureSpace,
    parent_fibers: &FiberSpec,
) -> Result<Section> {
    parent_fibers.check_space(parent)?;
    if x.blocks.len() != sub.len() {
        return Err(Error::ShapeMismatch(format!(
            "section has {} blocks for {} atoms",
            x.blocks.len(),
            sub.len()
        )));
    }
    let mut out = Section::zeros(parent_fibers);
    for (atom, block) in sub.atoms().iter().zip(&x.blocks) {
        let k = parent.position(atom.id).ok_or(Error::UnknownId(atom.id))?;
        if block.len() != parent_fibers.dims()[k] {
            return Err(Error::ShapeMismatch(format!(
                "atom {} has length {} in the sub-space, {} in the parent",
                atom.id,
                block.len(),
                parent_fibers.dims()[k]
            )));
        }
        out.blocks[k] = block.clone();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn scalar_section(v: &[f64]) -> Section {
        Section::new(v.iter().map(|&x| CVector::from_element(1, c(x))).collect())
    }

    #[test]
    fn inner_on_counting_measure() {
        let space = MeasureSpace::counting(2).unwrap();
        let fibers = FiberSpec::uniform(2, 1).unwrap();
        let x = scalar_section(&[1.0, 1.0]);
        assert_eq!(inner(&x, &x, &space, &fibers).unwrap(), c(2.0));
        assert_eq!(norm(&x, &space, &fibers).unwrap(), 2f64.sqrt());
        assert_eq!(norm(&Section::zeros(&fibers), &space, &fibers).unwrap(), 0.0);
    }

    #[test]
    fn inner_weighted() {
        let space = MeasureSpace::new(&[(0.0, 0.25), (1.0, 0.75)]).unwrap();
        let fibers = FiberSpec::uniform(2, 1).unwrap();
        let x = scalar_section(&[2.0, 0.0]);
        assert_eq!(inner(&x, &x, &space, &fibers).unwrap(), c(1.0));
    }

    #[test]
    fn inner_conjugates_second_slot() {
        let space = MeasureSpace::counting(1).unwrap();
        let fibers = FiberSpec::uniform(1, 1).unwrap();
        let i = Complex64::new(0.0, 1.0);
        let x = Section::new(vec![CVector::from_element(1, i)]);
        let y = scalar_section(&[1.0]);
        assert_eq!(inner(&x, &y, &space, &fibers).unwrap(), i);
        assert_eq!(inner(&y, &x, &space, &fibers).unwrap(), -i);
    }

    #[test]
    fn shape_mismatch() {
        let space = MeasureSpace::counting(2).unwrap();
        let fibers = FiberSpec::uniform(2, 1).unwrap();
        let x = scalar_section(&[1.0]);
        assert!(matches!(norm(&x, &space, &fibers), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn embed_zero_and_round_trip() {
        let space = MeasureSpace::counting(3).unwrap();
        let fibers = FiberSpec::new(vec![1, 2, 1]).unwrap();
        let subset: BTreeSet<_> = [1, 2].into();
        let sub = space.restrict(&subset).unwrap();
        let sub_fibers = fibers.select(&space.positions_of(&subset).unwrap());
        let zero = Section::zeros(&sub_fibers);
        assert!(embed_section(&zero, &sub, &space, &fibers).unwrap().is_zero());

        let x = Section::new(vec![
            CVector::from_vec(vec![c(1.0), c(2.0)]),
            CVector::from_vec(vec![c(3.0)]),
        ]);
        let e = embed_section(&x, &sub, &space, &fibers).unwrap();
        assert_eq!(e.block(0)[0], ZERO);
        assert_eq!(e.restrict(&space, &subset).unwrap(), x);
    }

    #[test]
    fn embed_unknown_id() {
        let space = MeasureSpace::counting(2).unwrap();
        let fibers = FiberSpec::uniform(2, 1).unwrap();
        let other = MeasureSpace::from_atoms(vec![crate::measure_space::Atom {
            id: 7,
            weight: 1.0,
            label: None,
        }])
        .unwrap();
        let x = scalar_section(&[1.0]);
        assert!(matches!(
            embed_section(&x, &other, &space, &fibers),
            Err(Error::UnknownId(7))
        ));
    }
}
