//! Quantified stability harness: resolvent growth on `iℝ` against decay of
//! `T(t)A⁻¹`, compared across doubling truncations of a family.
//!
//! Suprema over unbounded `r` and `t` are taken over published log grids,
//! and finiteness is read off stability across a doubling schedule.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::decomp_op::OperatorField;
use crate::error::{Error, Result};
use crate::gallery::GeneratorFamily;
use crate::grid;
use crate::linalg::{self, CMatrix};

/// Two values at `N` and `2N` are stable when they differ by at most 25% of the first.
pub const STABILITY_THRESHOLD: f64 = 0.25;

/// Magnitudes of the default imaginary-axis grid: `1 ..= 1e4`, 81 points, used with both signs.
pub fn default_r_magnitudes() -> Vec<f64> {
    grid::logspace(1.0, 1e4, 81)
}

/// `1e-2 ..= 1e3`, 101 log-spaced points.
pub fn default_t_grid() -> Vec<f64> {
    grid::logspace(1e-2, 1e3, 101)
}

pub const DEFAULT_SCHEDULE: [usize; 5] = [8, 16, 32, 64, 128];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthRow {
    pub r: f64,
    /// `max_k ‖R(ir, A_k)‖`.
    pub axis: f64,
    /// `|r|^{−α} · axis`.
    pub scaled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthTable {
    pub alpha: f64,
    pub rows: Vec<GrowthRow>,
    pub sup: f64,
}

/// `sup_{r, k} |r|^{−α} ‖R(ir, A_k)‖` over a signed grid with `|r| ≥ 1`.
pub fn resolvent_growth(a: &OperatorField, alpha: f64, r_grid: &[f64]) -> Result<GrowthTable> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    if r_grid.is_empty() || r_grid.iter().any(|r| !(r.abs() >= 1.0)) {
        return Err(Error::BadGrid("r grid must be non-empty with |r| >= 1".into()));
    }
    let rows: Vec<Result<GrowthRow>> = r_grid
        .par_iter()
        .map(|&r| {
            let lambda = Complex64::new(0.0, r);
            let norms = a.resolvent_norms(lambda);
            if let Some(k) = norms.iter().position(|v| !v.is_finite()) {
                return Err(Error::InSpectrum {
                    atom: a.atom_id(k),
                    lambda,
                });
            }
            let axis = norms.into_iter().fold(0.0, f64::max);
            Ok(GrowthRow {
                r,
                axis,
                scaled: r.abs().powf(-alpha) * axis,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let sup = rows.iter().map(|r| r.scaled).fold(0.0, f64::max);
    Ok(GrowthTable { alpha, rows, sup })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayRow {
    pub t: f64,
    /// `max_k ‖e^{tA_k} A_k⁻¹‖`.
    pub raw: f64,
    /// `t^{1/α} · raw`.
    pub scaled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayTable {
    pub alpha: f64,
    pub rows: Vec<DecayRow>,
    pub sup: f64,
}

fn decay_values(blocks: &[CMatrix], inverses: &[CMatrix], t: f64, ids: impl Fn(usize) -> u64 + Sync) -> Result<Vec<f64>> {
    blocks
        .par_iter()
        .zip(inverses.par_iter())
        .enumerate()
        .map(|(k, (b, inv))| {
            let e = linalg::expm(b, t).ok_or(Error::ExpFailure(ids(k)))?;
            Ok(linalg::norm2(&(e * inv)))
        })
        .collect()
}

/// Per-atom `t^{1/α} ‖e^{tA_k} A_k⁻¹‖` at a single time.
pub fn decay_values_at(a: &OperatorField, alpha: f64, t: f64, inverse_cap: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let inv = a.inverse(inverse_cap)?;
    let raw = decay_values(a.blocks(), inv.blocks(), t, |k| a.atom_id(k))?;
    let factor = t.powf(1.0 / alpha);
    Ok(raw.into_iter().map(|v| factor * v).collect())
}

/// `sup_{t, k} t^{1/α} ‖e^{tA_k} A_k⁻¹‖` over a grid of non-negative times.
pub fn decay_sup(a: &OperatorField, alpha: f64, t_grid: &[f64], inverse_cap: f64) -> Result<DecayTable> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::BadGrid("time grid must be non-empty, finite, non-negative".into()));
    }
    let inv = a.inverse(inverse_cap)?;
    let rows = t_grid
        .iter()
        .map(|&t| {
            let raw = decay_values(a.blocks(), inv.blocks(), t, |k| a.atom_id(k))?
                .into_iter()
                .fold(0.0, f64::max);
            Ok(DecayRow {
                t,
                raw,
                scaled: t.powf(1.0 / alpha) * raw,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sup = rows.iter().map(|r| r.scaled).fold(0.0, f64::max);
    Ok(DecayTable { alpha, rows, sup })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// `sup_{t, k} ‖e^{tA_k}‖` finite and stable.
    UniformSemigroupBound,
    /// `iℝ ⊂ ρ(A_k)` on the probed grid.
    ImaginaryAxisInResolventSet,
    /// `sup_k ‖A_k⁻¹‖` stable.
    InverseBounded,
    /// `sup_k ‖R(ir, A_k)‖` stable at each fixed probe `r`.
    AxisResolventBounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub hypothesis: Hypothesis,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisProbe {
    pub r: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationEntry {
    pub n: usize,
    /// Resolvent-growth supremum (condition (i)); `None` when some `ir` hit a fiber spectrum.
    pub resolvent_sup: Option<f64>,
    /// Decay supremum (condition (ii)); `None` when some block is singular.
    pub decay_sup: Option<f64>,
    pub inverse_sup: f64,
    pub semigroup_sup: f64,
    pub abscissa: f64,
    /// `max_k ‖R(ir, A_k)‖` at the fixed probes.
    pub fixed_axis: Vec<AxisProbe>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquivalenceVerdict {
    BothFiniteStable,
    #[serde(rename = "(i)-only")]
    ResolventOnly,
    #[serde(rename = "(ii)-only")]
    DecayOnly,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub family: String,
    pub alpha: f64,
    pub schedule: Vec<usize>,
    pub r_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub fixed_r: Vec<f64>,
    pub entries: Vec<TruncationEntry>,
    /// Tables at the largest truncation.
    pub resolvent_table: Option<GrowthTable>,
    pub decay_table: Option<DecayTable>,
    pub hypotheses: Vec<HypothesisCheck>,
    pub resolvent_stable: bool,
    pub decay_stable: bool,
    pub verdict: EquivalenceVerdict,
}

impl DecayReport {
    pub fn violated(&self) -> Vec<Hypothesis> {
        self.hypotheses
            .iter()
            .filter(|h| !h.holds)
            .map(|h| h.hypothesis)
            .collect()
    }

    /// `axis_sup` table `r ↦ max_k ‖R(ir, A_k)‖` at the largest truncation.
    pub fn axis_table(&self) -> Vec<AxisProbe> {
        self.resolvent_table
            .as_ref()
            .map(|t| t.rows.iter().map(|r| AxisProbe { r: r.r, value: r.axis }).collect())
            .unwrap_or_default()
    }
}

fn stable_pair(a: f64, b: f64) -> bool {
    a.is_finite() && b.is_finite() && (b - a).abs() <= STABILITY_THRESHOLD * a.abs()
}

fn stable_sequence(values: &[Option<f64>]) -> bool {
    values
        .windows(2)
        .all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if stable_pair(a, b)))
        && values.iter().all(|v| v.is_some_and(f64::is_finite))
}

fn evaluate_truncation(
    a: &OperatorField,
    n: usize,
    alpha: f64,
    r_grid: &[f64],
    t_grid: &[f64],
    fixed_r: &[f64],
) -> Result<(TruncationEntry, Option<GrowthTable>, Option<DecayTable>)> {
    let growth = match resolvent_growth(a, alpha, r_grid) {
        Ok(g) => Some(g),
        Err(Error::InSpectrum { .. }) => None,
        Err(e) => return Err(e),
    };
    let decay = match decay_sup(a, alpha, t_grid, f64::INFINITY) {
        Ok(d) => Some(d),
        Err(Error::SingularFiber(_)) => None,
        Err(e) => return Err(e),
    };
    let inverse_sup = a.resolvent_norm(Complex64::new(0.0, 0.0));
    let mut times = vec![0.0];
    times.extend(t_grid.iter().copied().filter(|&t| t > 0.0));
    let semigroup_sup = a
        .blocks()
        .par_iter()
        .map(|b| {
            times
                .iter()
                .map(|&t| linalg::expm(b, t).map_or(f64::INFINITY, |e| linalg::norm2(&e)))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    let abscissa = a.abscissas()?.into_iter().fold(f64::NEG_INFINITY, f64::max);
    let fixed_axis = fixed_r
        .iter()
        .map(|&r| AxisProbe {
            r,
            value: a.resolvent_norm(Complex64::new(0.0, r)),
        })
        .collect();
    Ok((
        TruncationEntry {
            n,
            resolvent_sup: growth.as_ref().map(|g| g.sup),
            decay_sup: decay.as_ref().map(|d| d.sup),
            inverse_sup,
            semigroup_sup,
            abscissa,
            fixed_axis,
        },
        growth,
        decay,
    ))
}

/// Computes both suprema along the schedule together with the hypothesis checks.
/// Never fails on a violated hypothesis; see [`equivalence_report`].
pub fn analyze_family(
    family: &GeneratorFamily,
    alpha: f64,
    r_magnitudes: &[f64],
    t_grid: &[f64],
    schedule: &[usize],
) -> Result<DecayReport> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    if schedule.len() < 2 || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("schedule needs at least two increasing sizes".into()));
    }
    if r_magnitudes.is_empty() || r_magnitudes.iter().any(|r| !(*r >= 1.0)) {
        return Err(Error::BadGrid("r magnitudes must be >= 1".into()));
    }
    let r_grid = grid::mirrored(r_magnitudes);
    // Probes small against every truncation, so their values can only settle as N grows.
    let half = schedule[0] as f64 / 2.0;
    let mut fixed_r = vec![0.0];
    fixed_r.extend(r_grid.iter().copied().filter(|r| r.abs() <= half));

    let mut entries = Vec::with_capacity(schedule.len());
    let mut last_tables = (None, None);
    for &n in schedule {
        let a = family.truncate(n)?;
        let (entry, g, d) = evaluate_truncation(&a, n, alpha, &r_grid, t_grid, &fixed_r)?;
        entries.push(entry);
        last_tables = (g, d);
    }

    let mut hypotheses = Vec::new();
    let semigroup: Vec<Option<f64>> = entries.iter().map(|e| Some(e.semigroup_sup)).collect();
    let bounded = stable_sequence(&semigroup) && entries.iter().all(|e| e.abscissa <= 0.0);
    hypotheses.push(HypothesisCheck {
        hypothesis: Hypothesis::UniformSemigroupBound,
        holds: bounded,
        detail: format!(
            "sup_t ||T(t)|| along schedule: {:?}",
            entries.iter().map(|e| e.semigroup_sup).collect::<Vec<_>>()
        ),
    });
    let on_axis = entries
        .iter()
        .all(|e| e.resolvent_sup.is_some() && e.inverse_sup.is_finite());
    hypotheses.push(HypothesisCheck {
        hypothesis: Hypothesis::ImaginaryAxisInResolventSet,
        holds: on_axis,
        detail: if on_axis {
            "no probe ir (including r = 0) meets a fiber spectrum".into()
        } else {
            "some probe ir meets a fiber spectrum".into()
        },
    });
    let inverse: Vec<Option<f64>> = entries.iter().map(|e| Some(e.inverse_sup)).collect();
    hypotheses.push(HypothesisCheck {
        hypothesis: Hypothesis::InverseBounded,
        holds: stable_sequence(&inverse),
        detail: format!(
            "sup_k ||A_k^-1|| along schedule: {:?}",
            entries.iter().map(|e| e.inverse_sup).collect::<Vec<_>>()
        ),
    });
    let mut diverging = Vec::new();
    for (j, &r) in fixed_r.iter().enumerate() {
        let seq: Vec<Option<f64>> = entries.iter().map(|e| Some(e.fixed_axis[j].value)).collect();
        if !stable_sequence(&seq) {
            diverging.push(r);
        }
    }
    hypotheses.push(HypothesisCheck {
        hypothesis: Hypothesis::AxisResolventBounded,
        holds: diverging.is_empty(),
        detail: if diverging.is_empty() {
            format!("stable at all {} fixed probes", fixed_r.len())
        } else {
            format!("sup_k ||R(ir, A_k)|| diverges at r = {diverging:?}")
        },
    });

    let resolvent_stable = stable_sequence(&entries.iter().map(|e| e.resolvent_sup).collect::<Vec<_>>());
    let decay_stable = stable_sequence(&entries.iter().map(|e| e.decay_sup).collect::<Vec<_>>());
    let verdict = match (resolvent_stable, decay_stable) {
        (true, true) => EquivalenceVerdict::BothFiniteStable,
        (true, false) => EquivalenceVerdict::ResolventOnly,
        (false, true) => EquivalenceVerdict::DecayOnly,
        (false, false) => EquivalenceVerdict::Neither,
    };
    Ok(DecayReport {
        family: family.name().to_string(),
        alpha,
        schedule: schedule.to_vec(),
        r_grid,
        t_grid: t_grid.to_vec(),
        fixed_r,
        entries,
        resolvent_table: last_tables.0,
        decay_table: last_tables.1,
        hypotheses,
        resolvent_stable,
        decay_stable,
        verdict,
    })
}

/// Like [`analyze_family`], but a violated hypothesis is an error carrying the full report.
pub fn equivalence_report(
    family: &GeneratorFamily,
    alpha: f64,
    r_magnitudes: &[f64],
    t_grid: &[f64],
    schedule: &[usize],
) -> Result<(DecayReport, EquivalenceVerdict)> {
    let report = analyze_family(family, alpha, r_magnitudes, t_grid, schedule)?;
    let mut which = report.violated();
    // The axis bound is the assumption the counterexample is about; list it first.
    which.sort_by_key(|h| *h != Hypothesis::AxisResolventBounded);
    if !which.is_empty() {
        return Err(Error::HypothesisViolated {
            which,
            report: Box::new(report),
        });
    }
    let verdict = report.verdict;
    Ok((report, verdict))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub beta: f64,
    /// RMS residual of the log–log fit.
    pub residual: f64,
    /// RMS residual of a log–linear (exponential) fit on the same window.
    pub exponential_residual: f64,
    pub exponential_like: bool,
    pub window: (f64, f64),
    pub points: Vec<(f64, f64)>,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, intercept, rms)
}

/// Slope of `log max_k ‖e^{tA_k}A_k⁻¹‖` against `log t` on `[t_max/10, t_max]`.
pub fn fit_decay_exponent(a: &OperatorField, t_grid: &[f64]) -> Result<DecayFit> {
    let t_max = t_grid.iter().copied().fold(0.0, f64::max);
    if !(t_max > 0.0) {
        return Err(Error::DegenerateFit("time grid has no positive point".into()));
    }
    let window: Vec<f64> = t_grid
        .iter()
        .copied()
        .filter(|&t| t >= t_max / 10.0 * (1.0 - 1e-12))
        .collect();
    if window.len() < 3 {
        return Err(Error::DegenerateFit(format!("only {} points in the window", window.len())));
    }
    if grid::decades(&window) < 1.0 - 1e-9 {
        return Err(Error::DegenerateFit("window spans less than one decade".into()));
    }
    let table = decay_sup(a, 1.0, &window, f64::INFINITY)?;
    let points: Vec<(f64, f64)> = table.rows.iter().map(|r| (r.t, r.raw)).collect();
    if let Some(&(t, v)) = points.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::DegenerateFit(format!("table value {v:e} at t = {t} is not positive")));
    }
    if points.windows(2).all(|w| w[1].1 >= w[0].1 * (1.0 - 1e-12)) {
        return Err(Error::NoDecay);
    }
    let log_t: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let log_v: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let ts: Vec<f64> = points.iter().map(|p| p.0).collect();
    let (beta, _, residual) = least_squares(&log_t, &log_v);
    let (_, _, exponential_residual) = least_squares(&ts, &log_v);
    Ok(DecayFit {
        beta,
        residual,
        exponential_residual,
        exponential_like: exponential_residual < residual,
        window: (window[0], t_max),
        points,
    })
}
