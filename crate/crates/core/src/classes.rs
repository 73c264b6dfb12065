//! Grid certificates for special classes of decomposable semigroups.
//!
//! Each class reduces to a uniform-in-atom resolvent or norm inequality.
//! A pass certifies that inequality on the published grid only; every
//! result carries the grid it was established on.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::decomp_op::{block_resolvent_norm, tail_windows, CompactnessVerdict, OperatorField, DEFAULT_CAP};
use crate::error::{Error, Result};
use crate::gallery::{GeneratorFamily, SpaceRecipe};
use crate::grid;
use crate::linalg::{self, CMatrix};
use crate::measure_space::AtomId;
use crate::semigroup::{self, DirectSemigroup, BOUND_SLACK};

pub const DEFAULT_RAYS_PER_EPS: usize = 9;

/// Radii `1e-2 ..= 1e2`, 25 log-spaced points.
pub fn default_radii() -> Vec<f64> {
    grid::logspace(1e-2, 1e2, 25)
}

/// Imaginary-axis magnitudes `1 ..= 1e4`, 41 log-spaced points.
pub fn default_axis_grid() -> Vec<f64> {
    grid::logspace(1.0, 1e4, 41)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub lambda: Complex64,
    pub atom: AtomId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorRay {
    pub angle: f64,
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorProbe {
    pub delta: f64,
    pub eps_list: Vec<f64>,
    /// One measured constant per entry of `eps_list`.
    pub m_eps: Vec<f64>,
    pub sample_rays: Vec<SectorRay>,
    pub success: bool,
    pub violation: Option<Violation>,
}

fn first_violation(a: &OperatorField, probes: &[Complex64], check: impl Fn(Complex64, f64) -> Option<String> + Sync) -> Option<Violation> {
    probes.iter().find_map(|&lambda| {
        a.resolvent_norms(lambda)
            .into_iter()
            .enumerate()
            .find_map(|(k, r)| {
                check(lambda, r).map(|reason| Violation {
                    lambda,
                    atom: a.atom_id(k),
                    reason,
                })
            })
    })
}

/// Probes `|λ| ‖R(λ, A_k)‖` on rays filling the closed sector `|arg λ| ≤ π/2 + δ − ε`
/// for each `ε`, after checking that no fiber eigenvalue lies in the open sector of angle `π/2 + δ`.
pub fn sectorial_check(
    a: &OperatorField,
    delta: f64,
    eps_list: &[f64],
    radii: &[f64],
    rays_per_eps: usize,
    cap: f64,
) -> Result<SectorProbe> {
    if !(0.0..FRAC_PI_2).contains(&delta) {
        return Err(Error::InvalidParameter(format!("delta must lie in [0, pi/2), got {delta}")));
    }
    if let Some(e) = eps_list.iter().find(|&&e| !(e > 0.0 && e < delta)) {
        return Err(Error::InvalidParameter(format!("epsilon {e} must lie in (0, delta)")));
    }
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::BadGrid("radii must be positive".into()));
    }
    if rays_per_eps < 2 {
        return Err(Error::BadGrid("need at least two rays per epsilon".into()));
    }

    let mut probe = SectorProbe {
        delta,
        eps_list: eps_list.to_vec(),
        m_eps: Vec::with_capacity(eps_list.len()),
        sample_rays: Vec::new(),
        success: true,
        violation: None,
    };

    let spectrum = a.spectrum()?;
    let open_angle = FRAC_PI_2 + delta;
    if let Some(p) = spectrum
        .points
        .iter()
        .find(|p| p.value.norm() > 0.0 && p.value.arg().abs() < open_angle)
    {
        probe.success = false;
        probe.violation = Some(Violation {
            lambda: p.value,
            atom: p.atom,
            reason: format!("eigenvalue inside the open sector of angle {open_angle}"),
        });
    }

    for &eps in eps_list {
        let theta_max = open_angle - eps;
        let mut m_eps = 0.0f64;
        let mut probes = Vec::new();
        for j in 0..rays_per_eps {
            let angle = -theta_max + 2.0 * theta_max * j as f64 / (rays_per_eps - 1) as f64;
            probe.sample_rays.push(SectorRay {
                angle,
                radii: radii.to_vec(),
            });
            probes.extend(radii.iter().map(|&r| Complex64::from_polar(r, angle)));
        }
        let values: Vec<Vec<f64>> = probes.par_iter().map(|&l| a.resolvent_norms(l)).collect();
        for (lambda, norms) in probes.iter().zip(&values) {
            for (k, &r) in norms.iter().enumerate() {
                let scaled = lambda.norm() * r;
                if !scaled.is_finite() || scaled > cap {
                    if probe.violation.is_none() {
                        probe.violation = Some(Violation {
                            lambda: *lambda,
                            atom: a.atom_id(k),
                            reason: if scaled.is_finite() {
                                format!("|lambda| ||R|| = {scaled:e} exceeds cap {cap:e}")
                            } else {
                                "probe lies in the fiber spectrum".into()
                            },
                        });
                    }
                    probe.success = false;
                }
                m_eps = m_eps.max(scaled);
            }
        }
        probe.m_eps.push(m_eps);
    }
    Ok(probe)
}

/// Points `r e^{iθ}` on `rays` evenly spaced angles in `[−δ′, δ′]`.
pub fn sector_grid(delta_prime: f64, radii: &[f64], rays: usize) -> Vec<Complex64> {
    let angles: Vec<f64> = if rays <= 1 || delta_prime == 0.0 {
        vec![0.0]
    } else {
        (0..rays)
            .map(|j| -delta_prime + 2.0 * delta_prime * j as f64 / (rays - 1) as f64)
            .collect()
    };
    angles
        .iter()
        .flat_map(|&th| radii.iter().map(move |&r| Complex64::from_polar(r, th)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticProbe {
    pub delta_prime: f64,
    pub m_delta_prime: f64,
    pub z_grid: Vec<Complex64>,
}

/// `M_{δ′} = max_{z, k} ‖e^{zA_k}‖` over a grid in the closed sector `|arg z| ≤ δ′`.
pub fn analytic_check(a: &OperatorField, delta_prime: f64, z_grid: &[Complex64]) -> Result<AnalyticProbe> {
    if !(0.0..FRAC_PI_2).contains(&delta_prime) {
        return Err(Error::InvalidParameter(format!("delta' must lie in [0, pi/2), got {delta_prime}")));
    }
    if z_grid.is_empty() {
        return Err(Error::BadGrid("empty z grid".into()));
    }
    if let Some(z) = z_grid
        .iter()
        .find(|z| z.norm() > 0.0 && z.arg().abs() > delta_prime + 1e-12)
    {
        return Err(Error::BadGrid(format!("{z} lies outside the sector of angle {delta_prime}")));
    }
    let per_block: Vec<Result<f64>> = a
        .blocks()
        .par_iter()
        .enumerate()
        .map(|(k, b)| {
            let mut m = 0.0f64;
            for &z in z_grid {
                let e = linalg::expm(&(b * z), 1.0).ok_or(Error::ExpFailure(a.atom_id(k)))?;
                m = m.max(linalg::norm2(&e));
            }
            Ok(m)
        })
        .collect();
    let m = per_block.into_iter().try_fold(0.0f64, |m, r| r.map(|v| m.max(v)))?;
    Ok(AnalyticProbe {
        delta_prime,
        m_delta_prime: m,
        z_grid: z_grid.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventualDifferentiabilityProbe {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub omega: f64,
    /// Constant of the common bound `M e^{ωt}` measured on the default time grid.
    pub m: f64,
    pub lambda_grid: Vec<Complex64>,
    pub pass: bool,
    pub violation: Option<Violation>,
}

fn in_theta(lambda: Complex64, a: f64, b: f64) -> bool {
    a * (-b * lambda.re).exp() <= lambda.im.abs()
}

/// Points of `Θ = {a e^{−b Re λ} ≤ |Im λ|}` with `Re λ` on `re_values`
/// and `|Im λ|` equal to the boundary value times each factor (≥ 1).
pub fn theta_grid(a: f64, b: f64, re_values: &[f64], factors: &[f64]) -> Vec<Complex64> {
    re_values
        .iter()
        .flat_map(|&x| {
            let edge = a * (-b * x).exp();
            factors.iter().flat_map(move |&f| {
                [Complex64::new(x, edge * f), Complex64::new(x, -edge * f)]
            })
        })
        .collect()
}

/// Checks `Θ ⊂ ρ(A_k)` (via the fiber spectra) and `‖R(λ, A_k)‖ ≤ C |Im λ|` on a grid of
/// `λ ∈ Θ` with `Re λ ≤ ω`.
pub fn eventually_differentiable_check(
    field: &OperatorField,
    a: f64,
    b: f64,
    c: f64,
    omega: f64,
    lambda_grid: &[Complex64],
) -> Result<EventualDifferentiabilityProbe> {
    if !(a > 0.0 && b > 0.0 && c > 0.0) {
        return Err(Error::InvalidParameter("a, b, C must be positive".into()));
    }
    if lambda_grid.is_empty() {
        return Err(Error::BadGrid("empty lambda grid".into()));
    }
    if let Some(l) = lambda_grid
        .iter()
        .find(|&&l| !in_theta(l, a, b) || l.re > omega)
    {
        return Err(Error::BadGrid(format!("{l} is outside Theta or right of omega")));
    }
    let abscissa = field.abscissas()?.into_iter().fold(f64::NEG_INFINITY, f64::max);
    if abscissa > omega {
        return Err(Error::BoundViolation(format!(
            "spectral abscissa {abscissa} exceeds omega {omega}"
        )));
    }
    let m = semigroup::growth_constant(field, omega, &semigroup::default_grid())?;

    let mut probe = EventualDifferentiabilityProbe {
        a,
        b,
        c,
        omega,
        m,
        lambda_grid: lambda_grid.to_vec(),
        pass: true,
        violation: None,
    };
    let spectrum = field.spectrum()?;
    if let Some(p) = spectrum.points.iter().find(|p| in_theta(p.value, a, b)) {
        probe.pass = false;
        probe.violation = Some(Violation {
            lambda: p.value,
            atom: p.atom,
            reason: "fiber eigenvalue inside Theta".into(),
        });
        return Ok(probe);
    }
    if let Some(v) = first_violation(field, lambda_grid, |l, r| {
        let bound = c * l.im.abs();
        (!(r <= bound)).then(|| format!("||R|| = {r:e} exceeds C|Im lambda| = {bound:e}"))
    }) {
        probe.pass = false;
        probe.violation = Some(v);
    }
    Ok(probe)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusRow {
    pub probe: f64,
    pub modulus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusTable {
    pub t0: f64,
    pub t_grid: Vec<f64>,
    pub rows: Vec<ModulusRow>,
    pub pass: bool,
}

/// Modulus of continuity `δ ↦ max_{t, k} ‖e^{(t+δ)A_k} − e^{tA_k}‖` for `t` on a grid above `t₀`.
///
/// Passes when the modulus does not increase as the probe shrinks and, between
/// the largest and smallest positive probes, falls at least like `√δ`.
pub fn uniform_norm_continuity_check(
    s: &DirectSemigroup,
    t0: f64,
    t_grid: &[f64],
    delta_probe: &[f64],
) -> Result<ModulusTable> {
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t > t0)) {
        return Err(Error::BadGrid("time grid must lie strictly above t0".into()));
    }
    if delta_probe.iter().any(|&d| !(d >= 0.0)) {
        return Err(Error::BadGrid("probes must be non-negative".into()));
    }
    let mut rows = Vec::with_capacity(delta_probe.len());
    for &delta in delta_probe {
        let mut modulus = 0.0f64;
        for &t in t_grid {
            let a = s.propagator(t)?;
            let b = s.propagator(t + delta)?;
            for (x, y) in a.blocks().iter().zip(b.blocks()) {
                modulus = modulus.max(linalg::norm2(&(y - x)));
            }
        }
        rows.push(ModulusRow {
            probe: delta,
            modulus,
        });
    }
    let mut positive: Vec<&ModulusRow> = rows.iter().filter(|r| r.probe > 0.0).collect();
    positive.sort_by(|a, b| b.probe.total_cmp(&a.probe));
    let pass = match (positive.first(), positive.last()) {
        (Some(big), Some(small)) if positive.len() >= 2 => {
            let monotone = positive.windows(2).all(|w| w[1].modulus <= w[0].modulus);
            let rate = (small.probe / big.probe).sqrt();
            monotone && (small.modulus <= rate * big.modulus || small.modulus <= 1e-14)
        }
        _ => return Err(Error::BadGrid("need at least two positive probes".into())),
    };
    Ok(ModulusTable {
        t0,
        t_grid: t_grid.to_vec(),
        rows,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisRow {
    pub r: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisDecay {
    /// Real part of the vertical line probed (0 for the imaginary axis).
    pub abscissa: f64,
    pub table: Vec<AxisRow>,
    /// Grid point roughly two decades below the last one.
    pub r_lo: f64,
    pub pass: bool,
}

/// `r ↦ max_k ‖R(σ + ir, A_k)‖` on a positive grid spanning at least two
/// decades. Passes when the value drops by 10× over the last two decades and
/// ends below 1% of the first entry.
pub fn axis_decay(a: &OperatorField, abscissa: f64, r_grid: &[f64]) -> Result<AxisDecay> {
    if r_grid.len() < 2 || r_grid.iter().any(|&r| !(r > 0.0)) || r_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::BadGrid("r grid must be positive and increasing".into()));
    }
    if grid::decades(r_grid) < 2.0 - 1e-9 {
        return Err(Error::BadGrid("r grid must span at least two decades".into()));
    }
    let table: Vec<AxisRow> = r_grid
        .par_iter()
        .map(|&r| AxisRow {
            r,
            value: a.resolvent_norm(Complex64::new(abscissa, r)),
        })
        .collect();
    let last = table[table.len() - 1].clone();
    let target = (last.r / 100.0).log10();
    let lo = table
        .iter()
        .min_by(|x, y| (x.r.log10() - target).abs().total_cmp(&(y.r.log10() - target).abs()))
        .expect("non-empty table")
        .clone();
    let first = table[0].value;
    let pass = last.value.is_finite()
        && lo.value.is_finite()
        && first.is_finite()
        && lo.value >= 10.0 * last.value
        && last.value < 1e-2 * first;
    Ok(AxisDecay {
        abscissa,
        table,
        r_lo: lo.r,
        pass,
    })
}

/// Resolvent decay along `iℝ` under the precondition `‖e^{tA_k}‖ ≤ M e^{−εt}` on the default grid.
pub fn imm_norm_continuous_check(a: &OperatorField, eps: f64, m: f64, r_grid: &[f64]) -> Result<AxisDecay> {
    let measured = semigroup::growth_constant(a, -eps, &semigroup::default_grid())?;
    if measured > m * (1.0 + BOUND_SLACK) {
        return Err(Error::BoundViolation(format!(
            "max ||e^(tA)|| e^(eps t) = {measured:e} exceeds M = {m:e}"
        )));
    }
    axis_decay(a, 0.0, r_grid)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompactProbe {
    pub lambda: Complex64,
    pub norm_continuity: AxisDecay,
    pub resolvent_tail: CompactnessVerdict,
    pub pass: bool,
}

/// Immediate compactness for a family over counting measure: resolvent decay
/// along a vertical line right of the growth bound at the largest truncation,
/// plus `‖R(λ, A_n)‖ → 0` in the doubling-window sense.
pub fn imm_compact_check(
    family: &GeneratorFamily,
    lambda: Complex64,
    schedule: &[usize],
    tau: f64,
    r_grid: &[f64],
) -> Result<CompactProbe> {
    if family.recipe() != SpaceRecipe::Counting {
        return Err(Error::InvalidParameter("immediate compactness needs counting measure".into()));
    }
    let n_max = *schedule
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidParameter("empty schedule".into()))?;
    let blocks: Vec<CMatrix> = (1..=n_max).map(|n| family.block_at_index(n)).collect();
    let norms: Vec<f64> = blocks
        .par_iter()
        .map(|b| block_resolvent_norm(b, lambda))
        .collect();
    if let Some(k) = norms.iter().position(|r| !r.is_finite()) {
        return Err(Error::InSpectrum {
            atom: k as AtomId,
            lambda,
        });
    }
    let tail = tail_windows(schedule, tau, |i| norms[i - 1]);
    let field = family.truncate(n_max)?;
    let omega = field.abscissas()?.into_iter().fold(f64::NEG_INFINITY, f64::max);
    let abscissa = if omega < 0.0 { 0.0 } else { omega + 1.0 };
    let norm_continuity = axis_decay(&field, abscissa, r_grid)?;
    Ok(CompactProbe {
        lambda,
        pass: norm_continuity.pass && tail.compact_like,
        norm_continuity,
        resolvent_tail: tail,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ClassReport {
    pub sectorial: Option<SectorProbe>,
    pub bounded_analytic: Option<AnalyticProbe>,
    pub eventually_differentiable: Option<EventualDifferentiabilityProbe>,
    pub uniformly_norm_continuous: Option<ModulusTable>,
    pub immediately_norm_continuous: Option<AxisDecay>,
    pub immediately_compact: Option<CompactProbe>,
}

/// Runs the field-level detectors with default grids.
pub fn classify_field(a: &OperatorField, delta: f64) -> Result<ClassReport> {
    let eps_list = [delta / 3.0, delta / 2.0, 2.0 * delta / 3.0];
    let mut report = ClassReport::default();
    if delta > 0.0 {
        report.sectorial = Some(sectorial_check(a, delta, &eps_list, &default_radii(), DEFAULT_RAYS_PER_EPS, DEFAULT_CAP)?);
        let dp = delta / 2.0;
        report.bounded_analytic = Some(analytic_check(a, dp, &sector_grid(dp, &default_radii(), DEFAULT_RAYS_PER_EPS))?);
    }
    let s = DirectSemigroup::new(a.clone())?;
    report.uniformly_norm_continuous = Some(uniform_norm_continuity_check(
        &s,
        0.0,
        &[0.5, 1.0, 2.0, 5.0],
        &[0.0, 1e-1, 1e-2, 1e-3],
    )?);
    let bound = s.bound();
    if bound.omega < 0.0 {
        report.immediately_norm_continuous =
            Some(imm_norm_continuous_check(a, -bound.omega, bound.m, &default_axis_grid())?);
    }
    Ok(report)
}
