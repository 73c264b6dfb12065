//! Decomposable operators `A = ∫⊕ A(s) dμ(s)` stored as one matrix per atom.
//!
//! Norms come from singular values: `‖A‖ = max_k σ_max(A_k)` and
//! `‖R(λ, A)‖ = max_k 1/σ_min(λ − A_k)`. "Essentially bounded" becomes an
//! explicit cap supplied by the caller.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bundle::{FiberSpec, Section};
use crate::error::{Error, Result};
use crate::gallery::GeneratorFamily;
use crate::linalg::{self, CMatrix};
use crate::measure_space::{AtomId, MeasureSpace};

pub const DEFAULT_CAP: f64 = 1e12;
/// `λ` is treated as a fiber eigenvalue when `σ_min(λ − A_k) ≤ 1e-12 (1 + |λ| + ‖A_k‖)`.
pub const SINGULARITY_TOL: f64 = 1e-12;
/// A block is singular for inversion when `σ_min(A_k) ≤ 1e-14 ‖A_k‖`.
pub const INVERSE_TOL: f64 = 1e-14;
/// Eigenvalues closer than `1e-8 (1 + ‖A‖)` are merged in the spectrum union.
pub const DEDUP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorField {
    space: Arc<MeasureSpace>,
    fibers: FiberSpec,
    blocks: Vec<CMatrix>,
}

impl OperatorField {
    pub fn new(space: Arc<MeasureSpace>, fibers: FiberSpec, blocks: Vec<CMatrix>) -> Result<Self> {
        fibers.check_space(&space)?;
        if blocks.len() != space.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} blocks for {} atoms",
                blocks.len(),
                space.len()
            )));
        }
        for (k, (b, &d)) in blocks.iter().zip(fibers.dims()).enumerate() {
            if b.nrows() != d || b.ncols() != d {
                return Err(Error::ShapeMismatch(format!(
                    "block {k} is {}x{}, fiber dimension is {d}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        Ok(Self {
            space,
            fibers,
            blocks,
        })
    }

    /// Fiber dimensions are read off the (square) blocks.
    pub fn from_blocks(space: Arc<MeasureSpace>, blocks: Vec<CMatrix>) -> Result<Self> {
        let fibers = FiberSpec::new(blocks.iter().map(|b| b.nrows()).collect())?;
        Self::new(space, fibers, blocks)
    }

    /// Scalar fibers `A_k = values[k]`.
    pub fn scalar(space: Arc<MeasureSpace>, values: &[Complex64]) -> Result<Self> {
        let blocks = values.iter().map(|&z| CMatrix::from_element(1, 1, z)).collect();
        Self::from_blocks(space, blocks)
    }

    pub fn identity(space: Arc<MeasureSpace>, fibers: FiberSpec) -> Result<Self> {
        let blocks = fibers.dims().iter().map(|&d| linalg::identity(d)).collect();
        Self::new(space, fibers, blocks)
    }

    pub fn zeros(space: Arc<MeasureSpace>, fibers: FiberSpec) -> Result<Self> {
        let blocks = fibers.dims().iter().map(|&d| CMatrix::zeros(d, d)).collect();
        Self::new(space, fibers, blocks)
    }

    pub fn space(&self) -> &Arc<MeasureSpace> {
        &self.space
    }

    pub fn fibers(&self) -> &FiberSpec {
        &self.fibers
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &CMatrix {
        &self.blocks[k]
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn atom_id(&self, k: usize) -> AtomId {
        self.space.atoms()[k].id
    }

    fn same_shape(&self, other: &OperatorField) -> Result<()> {
        if self.fibers != other.fibers || self.space.ids() != other.space.ids() {
            return Err(Error::ShapeMismatch("fields live on different bundles".into()));
        }
        Ok(())
    }

    fn with_blocks(&self, blocks: Vec<CMatrix>) -> OperatorField {
        OperatorField {
            space: self.space.clone(),
            fibers: self.fibers.clone(),
            blocks,
        }
    }

    pub fn map_blocks(&self, f: impl Fn(&CMatrix) -> CMatrix + Sync + Send) -> OperatorField {
        self.with_blocks(self.blocks.par_iter().map(f).collect())
    }

    pub fn apply(&self, x: &Section) -> Result<Section> {
        x.check_shape(&self.fibers)?;
        Ok(Section::new(
            self.blocks
                .iter()
                .zip(x.blocks())
                .map(|(a, v)| a * v)
                .collect(),
        ))
    }

    pub fn add(&self, other: &OperatorField) -> Result<OperatorField> {
        self.same_shape(other)?;
        Ok(self.with_blocks(
            self.blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    pub fn sub(&self, other: &OperatorField) -> Result<OperatorField> {
        self.same_shape(other)?;
        Ok(self.with_blocks(
            self.blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }

    pub fn scale(&self, c: Complex64) -> OperatorField {
        self.with_blocks(self.blocks.iter().map(|a| a * c).collect())
    }

    /// Blockwise product `(AB)_k = A_k B_k`.
    pub fn compose(&self, other: &OperatorField) -> Result<OperatorField> {
        self.same_shape(other)?;
        Ok(self.with_blocks(
            self.blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a * b)
                .collect(),
        ))
    }

    /// `A - λ I` blockwise.
    pub fn shift(&self, lambda: Complex64) -> OperatorField {
        self.with_blocks(
            self.blocks
                .iter()
                .map(|a| -linalg::shifted(a, lambda))
                .collect(),
        )
    }

    /// Per-atom spectral norms.
    pub fn block_norms(&self) -> Vec<f64> {
        self.blocks.par_iter().map(linalg::norm2).collect()
    }

    /// `‖A‖ = max_k ‖A_k‖`.
    pub fn op_norm(&self) -> f64 {
        self.block_norms().into_iter().fold(0.0, f64::max)
    }

    pub fn adjoint(&self) -> OperatorField {
        self.with_blocks(self.blocks.iter().map(linalg::conj_transpose).collect())
    }

    /// Blockwise inverse, provided every block is invertible and `max_k ‖A_k⁻¹‖ ≤ cap`.
    pub fn inverse(&self, cap: f64) -> Result<OperatorField> {
        if !(cap > 0.0) {
            return Err(Error::InvalidParameter(format!("cap must be positive, got {cap}")));
        }
        let results: Vec<Result<(CMatrix, f64)>> = self
            .blocks
            .par_iter()
            .enumerate()
            .map(|(k, a)| {
                let id = self.atom_id(k);
                let s = linalg::singular_values(a).ok_or(Error::SingularFiber(id))?;
                let (smax, smin) = (s[0], s[s.len() - 1]);
                if smin <= INVERSE_TOL * smax {
                    return Err(Error::SingularFiber(id));
                }
                let inv = linalg::inverse(a).ok_or(Error::SingularFiber(id))?;
                Ok((inv, 1.0 / smin))
            })
            .collect();
        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut sup = 0.0f64;
        for r in results {
            let (inv, n) = r?;
            sup = sup.max(n);
            blocks.push(inv);
        }
        if sup > cap {
            return Err(Error::EssentiallyUnbounded { sup, cap });
        }
        Ok(self.with_blocks(blocks))
    }

    /// `R(λ, A) = ∫⊕ (λ − A_k)⁻¹`, subject to the cap test.
    pub fn resolvent(&self, lambda: Complex64, cap: f64) -> Result<OperatorField> {
        if !(cap > 0.0) {
            return Err(Error::InvalidParameter(format!("cap must be positive, got {cap}")));
        }
        let results: Vec<Result<(CMatrix, f64)>> = self
            .blocks
            .par_iter()
            .enumerate()
            .map(|(k, a)| {
                let id = self.atom_id(k);
                let m = linalg::shifted(a, lambda);
                let smin = linalg::sigma_min(&m);
                let tol = SINGULARITY_TOL * (1.0 + lambda.norm() + linalg::norm2(a));
                if !(smin > tol) {
                    return Err(Error::InSpectrum { atom: id, lambda });
                }
                let inv = linalg::inverse(&m).ok_or(Error::InSpectrum { atom: id, lambda })?;
                Ok((inv, 1.0 / smin))
            })
            .collect();
        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut sup = 0.0f64;
        for r in results {
            let (inv, n) = r?;
            sup = sup.max(n);
            blocks.push(inv);
        }
        if sup > cap {
            return Err(Error::EssentiallyUnbounded { sup, cap });
        }
        Ok(self.with_blocks(blocks))
    }

    /// Per-atom `1/σ_min(λ − A_k)`, `+∞` where the shifted block is singular to machine precision.
    pub fn resolvent_norms(&self, lambda: Complex64) -> Vec<f64> {
        self.blocks
            .par_iter()
            .map(|a| block_resolvent_norm(a, lambda))
            .collect()
    }

    pub fn resolvent_norm(&self, lambda: Complex64) -> f64 {
        self.resolvent_norms(lambda)
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn spectrum(&self) -> Result<SpectrumReport> {
        let per_block: Vec<Result<Vec<Complex64>>> = self
            .blocks
            .par_iter()
            .enumerate()
            .map(|(k, a)| linalg::eigenvalues(a).ok_or(Error::EigFailure(self.atom_id(k))))
            .collect();
        let mut points = Vec::new();
        for (k, ev) in per_block.into_iter().enumerate() {
            let id = self.atom_id(k);
            points.extend(ev?.into_iter().map(|z| SpectralPoint { atom: id, value: z }));
        }
        let tol = DEDUP_TOL * (1.0 + self.op_norm());
        let mut union: Vec<Complex64> = Vec::new();
        for p in &points {
            if !union.iter().any(|u| (u - p.value).norm() <= tol) {
                union.push(p.value);
            }
        }
        Ok(SpectrumReport {
            points,
            union,
            pseudo: None,
        })
    }

    /// Spectral abscissa of each block.
    pub fn abscissas(&self) -> Result<Vec<f64>> {
        self.blocks
            .par_iter()
            .enumerate()
            .map(|(k, a)| linalg::spectral_abscissa(a).ok_or(Error::EigFailure(self.atom_id(k))))
            .collect()
    }

    /// `λ ↦ ‖R(λ, A)‖` on a grid, flagging points in the ε-pseudospectrum of some fiber.
    pub fn pseudospectrum(&self, grid: &[Complex64], epsilon: f64) -> PseudoGrid {
        let points = grid
            .iter()
            .map(|&lambda| {
                let inv_sigma_min = self.resolvent_norm(lambda);
                PseudoPoint {
                    lambda,
                    inv_sigma_min,
                    inside: inv_sigma_min > 1.0 / epsilon,
                }
            })
            .collect();
        PseudoGrid { epsilon, points }
    }

    /// Field restricted to the atoms in `subset`.
    pub fn restrict(&self, subset: &BTreeSet<AtomId>) -> Result<OperatorField> {
        let positions = self.space.positions_of(subset)?;
        let space = Arc::new(self.space.restrict(subset)?);
        Ok(OperatorField {
            space,
            fibers: self.fibers.select(&positions),
            blocks: positions.iter().map(|&k| self.blocks[k].clone()).collect(),
        })
    }

    /// Single-atom field on atom position `k`.
    pub fn atom_field(&self, k: usize) -> OperatorField {
        let atom = self.space.atoms()[k].clone();
        OperatorField {
            space: Arc::new(MeasureSpace::from_atoms(vec![atom]).expect("atom has positive weight")),
            fibers: self.fibers.select(&[k]),
            blocks: vec![self.blocks[k].clone()],
        }
    }

    /// Assembled block-diagonal matrix acting on stacked sections.
    pub fn to_dense(&self) -> CMatrix {
        let n = self.fibers.total_dim();
        let mut m = CMatrix::zeros(n, n);
        let mut offset = 0;
        for b in &self.blocks {
            let d = b.nrows();
            m.view_mut((offset, offset), (d, d)).copy_from(b);
            offset += d;
        }
        m
    }
}

pub(crate) fn block_resolvent_norm(a: &CMatrix, lambda: Complex64) -> f64 {
    let m = linalg::shifted(a, lambda);
    let smin = linalg::sigma_min(&m);
    if smin == 0.0 || smin <= f64::EPSILON * linalg::norm2(&m) {
        f64::INFINITY
    } else {
        1.0 / smin
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralPoint {
    pub atom: AtomId,
    pub value: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudoPoint {
    pub lambda: Complex64,
    pub inv_sigma_min: f64,
    pub inside: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudoGrid {
    pub epsilon: f64,
    pub points: Vec<PseudoPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    /// Eigenvalues tagged by atom, in atom order.
    pub points: Vec<SpectralPoint>,
    pub union: Vec<Complex64>,
    pub pseudo: Option<PseudoGrid>,
}

impl SpectrumReport {
    /// Distance from `λ` to the union of fiber spectra.
    pub fn distance(&self, lambda: Complex64) -> f64 {
        self.union
            .iter()
            .map(|z| (z - lambda).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowMax {
    pub truncation: usize,
    pub window: (usize, usize),
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompactnessVerdict {
    pub compact_like: bool,
    pub tolerance: f64,
    pub windows: Vec<WindowMax>,
}

/// Doubling-window tail test on an index sequence `n ↦ value(n)`, `n ≥ 1`.
///
/// For each truncation `M` in `schedule` the window is `[⌈M/2⌉, M]`. The
/// sequence is compact-like iff the last window maximum is below `tau` and
/// window maxima never increase along the schedule.
pub fn tail_windows(schedule: &[usize], tau: f64, value: impl Fn(usize) -> f64 + Sync) -> CompactnessVerdict {
    let windows: Vec<WindowMax> = schedule
        .iter()
        .map(|&m| {
            let lo = m.div_ceil(2).max(1);
            let max = (lo..=m)
                .into_par_iter()
                .map(&value)
                .reduce(|| 0.0, f64::max);
            WindowMax {
                truncation: m,
                window: (lo, m),
                max,
            }
        })
        .collect();
    let monotone = windows.windows(2).all(|w| w[1].max <= w[0].max);
    let below = windows.last().is_some_and(|w| w.max < tau);
    CompactnessVerdict {
        compact_like: monotone && below,
        tolerance: tau,
        windows,
    }
}

/// Whether `‖A(s_i)‖ → 0` along a family over counting measure, judged on the
/// windows of truncations `N/4, N/2, N`.
pub fn compactness_classify(family: &GeneratorFamily, n: usize, tau: f64) -> Result<CompactnessVerdict> {
    if n < 4 {
        return Err(Error::InvalidParameter(format!("need N >= 4, got {n}")));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    let schedule = [n / 4, n / 2, n];
    Ok(tail_windows(&schedule, tau, |i| linalg::norm2(&family.block_at_index(i))))
}
