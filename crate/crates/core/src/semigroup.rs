//! Direct-integral semigroups `T(t) = ∫⊕ e^{tA(s)} dμ(s)`.
//!
//! The growth rate `ω` is the exact spectral abscissa of the blocks; the
//! constant `M` is measured on a sample grid that travels with the bound.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bundle::{self, Section};
use crate::decomp_op::{OperatorField, DEFAULT_CAP};
use crate::error::{Error, Result};
use crate::gallery::GeneratorFamily;
use crate::linalg::{self, CMatrix, CompensatedComplexSum};
use crate::measure_space::AtomId;

pub const DEFAULT_GRID_T_MAX: f64 = 20.0;
pub const DEFAULT_GRID_STEP: f64 = 0.05;
/// Relative slack on `‖e^{tA_k}‖ ≤ M e^{ωt}`.
pub const BOUND_SLACK: f64 = 1e-6;
/// Tolerance for "ω (or M) has stopped moving" across a schedule.
pub const STABILITY_TOL: f64 = 1e-6;
/// Increments must shrink at least this fast to count as converging.
pub const CONTRACTION_RATIO: f64 = 0.75;

/// `0, 0.05, ..., 20`.
pub fn default_grid() -> Vec<f64> {
    let n = (DEFAULT_GRID_T_MAX / DEFAULT_GRID_STEP).round() as usize;
    (0..=n).map(|k| k as f64 * DEFAULT_GRID_STEP).collect()
}

/// Blockwise `e^{tA_k}`.
pub fn exp_field(a: &OperatorField, t: f64) -> Result<OperatorField> {
    let blocks: Vec<Result<CMatrix>> = a
        .blocks()
        .par_iter()
        .enumerate()
        .map(|(k, b)| linalg::expm(b, t).ok_or(Error::ExpFailure(a.atom_id(k))))
        .collect();
    OperatorField::new(
        a.space().clone(),
        a.fibers().clone(),
        blocks.into_iter().collect::<Result<_>>()?,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiberBound {
    pub atom: AtomId,
    /// `max_t ‖e^{tA_k}‖ e^{−ωt}` against the common rate `ω`.
    pub m: f64,
    /// Spectral abscissa of the block.
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpBound {
    pub m: f64,
    pub omega: f64,
    pub per_fiber: Vec<FiberBound>,
    pub t_grid: Vec<f64>,
}

fn check_time_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::BadGrid("time grid is empty".into()));
    }
    if t_grid[0] != 0.0 {
        return Err(Error::BadGrid("time grid must start at 0".into()));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::BadGrid("time grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// `max_t ‖e^{t(A − ωI)}‖`; shifting first keeps huge rates from overflowing.
fn shifted_growth(block: &CMatrix, omega: f64, t_grid: &[f64]) -> Option<f64> {
    let shifted = -linalg::shifted(block, Complex64::new(omega, 0.0));
    let mut m = 0.0f64;
    for &t in t_grid {
        m = m.max(linalg::norm2(&linalg::expm(&shifted, t)?));
    }
    Some(m)
}

/// `ω = max_k abscissa(A_k)`, `M = max_{k,t} ‖e^{tA_k}‖ e^{−ωt}` (at least 1).
pub fn estimate_bound(a: &OperatorField, t_grid: &[f64]) -> Result<ExpBound> {
    check_time_grid(t_grid)?;
    let abscissas = a.abscissas()?;
    let omega = abscissas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let per_fiber: Vec<Result<FiberBound>> = a
        .blocks()
        .par_iter()
        .zip(abscissas.par_iter())
        .enumerate()
        .map(|(k, (b, &own))| {
            let id = a.atom_id(k);
            let m = shifted_growth(b, omega, t_grid).ok_or(Error::ExpFailure(id))?;
            Ok(FiberBound {
                atom: id,
                m: m.max(1.0),
                omega: own,
            })
        })
        .collect();
    let per_fiber = per_fiber.into_iter().collect::<Result<Vec<_>>>()?;
    let m = per_fiber.iter().map(|f| f.m).fold(1.0, f64::max);
    Ok(ExpBound {
        m,
        omega,
        per_fiber,
        t_grid: t_grid.to_vec(),
    })
}

/// `max_{k,t} ‖e^{tA_k}‖ e^{−ωt}` for a caller-chosen rate `ω`.
pub fn growth_constant(a: &OperatorField, omega: f64, t_grid: &[f64]) -> Result<f64> {
    check_time_grid(t_grid)?;
    let per: Vec<Result<f64>> = a
        .blocks()
        .par_iter()
        .enumerate()
        .map(|(k, b)| shifted_growth(b, omega, t_grid).ok_or(Error::ExpFailure(a.atom_id(k))))
        .collect();
    per.into_iter().try_fold(0.0f64, |m, r| Ok(m.max(r?)))
}

/// The semigroup generated by a decomposable field, with its measured bound.
#[derive(Debug)]
pub struct DirectSemigroup {
    generator: OperatorField,
    bound: ExpBound,
    exp_cache: Mutex<HashMap<u64, Arc<OperatorField>>>,
}

impl Clone for DirectSemigroup {
    fn clone(&self) -> Self {
        Self {
            generator: self.generator.clone(),
            bound: self.bound.clone(),
            exp_cache: Mutex::new(self.exp_cache.lock().expect("cache lock").clone()),
        }
    }
}

impl DirectSemigroup {
    pub fn new(generator: OperatorField) -> Result<Self> {
        Self::with_grid(generator, &default_grid())
    }

    pub fn with_grid(generator: OperatorField, t_grid: &[f64]) -> Result<Self> {
        let bound = estimate_bound(&generator, t_grid)?;
        Ok(Self::from_parts(generator, bound))
    }

    fn from_parts(generator: OperatorField, bound: ExpBound) -> Self {
        Self {
            generator,
            bound,
            exp_cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn generator(&self) -> &OperatorField {
        &self.generator
    }

    pub fn bound(&self) -> &ExpBound {
        &self.bound
    }

    /// `T(t)` as a field of blocks `e^{tA_k}`; cached per `t`.
    pub fn propagator(&self, t: f64) -> Result<Arc<OperatorField>> {
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter(format!("time must be non-negative, got {t}")));
        }
        let key = t.to_bits();
        if let Some(hit) = self.exp_cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let field = Arc::new(exp_field(&self.generator, t)?);
        self.exp_cache
            .lock()
            .expect("cache lock")
            .entry(key)
            .or_insert_with(|| field.clone());
        Ok(field)
    }

    pub fn evolve(&self, t: f64, x: &Section) -> Result<Section> {
        self.propagator(t)?.apply(x)
    }

    /// Per-atom semigroups. Each handle keeps the parent's rate `ω` and its
    /// own constant `M_k ≤ M`.
    pub fn decompose(&self) -> Vec<DirectSemigroup> {
        (0..self.generator.len())
            .map(|k| {
                let fiber = self.bound.per_fiber[k].clone();
                let bound = ExpBound {
                    m: fiber.m,
                    omega: self.bound.omega,
                    per_fiber: vec![fiber],
                    t_grid: self.bound.t_grid.clone(),
                };
                DirectSemigroup::from_parts(self.generator.atom_field(k), bound)
            })
            .collect()
    }

    /// Semigroup of the restricted generator, bound re-measured on the same grid.
    pub fn restrict(&self, subset: &BTreeSet<AtomId>) -> Result<DirectSemigroup> {
        DirectSemigroup::with_grid(self.generator.restrict(subset)?, &self.bound.t_grid)
    }

    /// Relative distance between `R(λ, A)x` and the end-corrected trapezoid
    /// approximation of `∫₀^{T_max} e^{−λt} T(t)x dt` with step `h`.
    pub fn laplace_check(&self, lambda: Complex64, x: &Section, t_max: f64, h: f64) -> Result<f64> {
        let omega = self.bound.omega;
        if !(lambda.re > omega + 0.1) {
            return Err(Error::BadLambda { re: lambda.re, omega });
        }
        if !(h > 0.0) || !(t_max > h) {
            return Err(Error::BadGrid(format!("need 0 < h < T_max, got h = {h}, T_max = {t_max}")));
        }
        let tail = self.bound.m * ((omega - lambda.re) * t_max).exp();
        if tail >= 1e-10 {
            return Err(Error::TruncationTooShort(tail));
        }
        x.check_shape(self.generator.fibers())?;
        let steps = (t_max / h).round() as usize;
        let step = exp_field(&self.generator, h)?;
        let quad: Vec<_> = step
            .blocks()
            .par_iter()
            .zip(self.generator.blocks().par_iter())
            .zip(x.blocks().par_iter())
            .map(|((e, a), x0)| {
                let mut acc = vec![CompensatedComplexSum::default(); x0.len()];
                let mut v = x0.clone();
                for j in 0..=steps {
                    let w = if j == 0 || j == steps { 0.5 * h } else { h };
                    let factor = (-lambda * (j as f64 * h)).exp() * w;
                    for (a, z) in acc.iter_mut().zip(v.iter()) {
                        a.add(z * factor);
                    }
                    if j < steps {
                        v = e * v;
                    }
                }
                // Euler–Maclaurin endpoint term −h²/12 (g′(T) − g′(0)), g′(t) = (A − λ) e^{−λt} T(t)x.
                let a_minus = -linalg::shifted(a, lambda);
                let end = &a_minus * (v * (-lambda * (steps as f64 * h)).exp());
                let start = &a_minus * x0;
                let corr = (end - start) * Complex64::new(-h * h / 12.0, 0.0);
                for (acc, z) in acc.iter_mut().zip(corr.iter()) {
                    acc.add(*z);
                }
                linalg::CVector::from_iterator(x0.len(), acc.iter().map(|a| a.value()))
            })
            .collect();
        let quad = Section::new(quad);
        let exact = self.generator.resolvent(lambda, DEFAULT_CAP)?.apply(x)?;
        let space = self.generator.space();
        let fibers = self.generator.fibers();
        let denom = bundle::norm(&exact, space, fibers)?;
        Ok(bundle::norm(&quad.sub(&exact), space, fibers)? / denom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenerationVerdict {
    Uniform,
    NonUniform,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationEntry {
    pub n: usize,
    pub m: f64,
    pub omega: f64,
    /// `max_k ‖T_k(1)‖`: the constant a bound with rate 0 would need at `t = 1`.
    pub unit_time_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationReport {
    pub verdict: GenerationVerdict,
    pub entries: Vec<GenerationEntry>,
    pub reasons: Vec<String>,
    pub cap: f64,
    pub t_grid: Vec<f64>,
}

/// Whether the upward moves of `values` die out: all within tolerance, or
/// (with at least three values) contracting geometrically.
fn stabilizes(values: &[f64]) -> bool {
    let ups: Vec<f64> = values
        .windows(2)
        .map(|w| (w[1] - w[0]).max(0.0))
        .collect();
    let tol = |v: f64| STABILITY_TOL * (1.0 + v.abs());
    if ups.iter().zip(values).all(|(&d, &v)| d <= tol(v)) {
        return true;
    }
    if ups.len() < 2 {
        return false;
    }
    ups.windows(2)
        .zip(values)
        .all(|(d, &v)| d[1] <= tol(v) || d[1] <= CONTRACTION_RATIO * d[0])
}

/// Uniformity of the exponential bound across a doubling schedule of truncations.
pub fn check_generation(family: &GeneratorFamily, schedule: &[usize], cap: f64) -> Result<GenerationReport> {
    check_generation_on(family, schedule, cap, &default_grid())
}

pub fn check_generation_on(
    family: &GeneratorFamily,
    schedule: &[usize],
    cap: f64,
    t_grid: &[f64],
) -> Result<GenerationReport> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("schedule must be non-empty and increasing".into()));
    }
    let mut entries = Vec::with_capacity(schedule.len());
    for &n in schedule {
        let a = family.truncate(n)?;
        let bound = estimate_bound(&a, t_grid)?;
        let unit = exp_field(&a, 1.0)?.op_norm();
        entries.push(GenerationEntry {
            n,
            m: bound.m,
            omega: bound.omega,
            unit_time_norm: unit,
        });
    }
    let mut reasons = Vec::new();
    if let Some(e) = entries.iter().find(|e| !(e.m <= cap)) {
        reasons.push(format!("M = {:e} exceeds cap {cap:e} at N = {}", e.m, e.n));
    }
    let omegas: Vec<f64> = entries.iter().map(|e| e.omega).collect();
    if !stabilizes(&omegas) {
        reasons.push(format!("omega keeps growing along the schedule: {omegas:?}"));
    }
    let ms: Vec<f64> = entries.iter().map(|e| e.m).collect();
    if !stabilizes(&ms) {
        reasons.push(format!("M keeps growing along the schedule: {ms:?}"));
    }
    Ok(GenerationReport {
        verdict: if reasons.is_empty() {
            GenerationVerdict::Uniform
        } else {
            GenerationVerdict::NonUniform
        },
        entries,
        reasons,
        cap,
        t_grid: t_grid.to_vec(),
    })
}
