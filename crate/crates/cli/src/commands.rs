use std::collections::BTreeMap;
use std::path::Path;

use dirint::asymptotics::{self, EquivalenceVerdict};
use dirint::classes;
use dirint::gallery::GeneratorFamily;
use dirint::grid;
use dirint::semigroup::{self, GenerationVerdict};
use dirint::{Error, OperatorField};
use num_complex::Complex64;
use serde_json::json;

use crate::field_spec::{self, FamilyRef, FieldSpecFile};
use crate::report::{self, num, to_value, Report, Table};
use crate::{CliError, Command, Input, Outcome};

/// Log grids are sampled at this many points per decade.
pub const POINTS_PER_DECADE: f64 = 20.0;

pub fn out_dir(cmd: &Command) -> Option<&Path> {
    match cmd {
        Command::Norm { output, .. }
        | Command::Spectrum { output, .. }
        | Command::Resolvent { output, .. }
        | Command::Semigroup { output, .. }
        | Command::Classes { output, .. }
        | Command::Decay { output, .. } => output.out.as_deref(),
        Command::GalleryExport { out, .. } => Some(out),
    }
}

pub fn dispatch(cmd: Command) -> Result<Outcome, CliError> {
    match cmd {
        Command::Norm { input, .. } => norm(&input),
        Command::Spectrum {
            input,
            pseudo_eps,
            window,
            grid_points,
            ..
        } => spectrum(&input, pseudo_eps, window, grid_points),
        Command::Resolvent { input, lambda, .. } => resolvent(&input, lambda),
        Command::Semigroup {
            input,
            t_max,
            dt,
            n_schedule,
            cap,
            ..
        } => semigroup_cmd(&input, t_max, dt, n_schedule, cap),
        Command::Classes {
            input,
            delta,
            compact_lambda,
            n_schedule,
            tau,
            ..
        } => classes_cmd(&input, delta, compact_lambda, n_schedule, tau),
        Command::Decay {
            family,
            params,
            alpha,
            n_schedule,
            r_max,
            t_max,
            ..
        } => decay(&family, &params, alpha, &n_schedule, r_max, t_max),
        Command::GalleryExport { family, params, n, .. } => gallery_export(&family, &params, n),
    }
}

fn family_ref(name: &str, params: &[(String, f64)], n: Option<usize>) -> FamilyRef {
    let mut map: BTreeMap<String, f64> = params.iter().cloned().collect();
    if let Some(n) = n {
        map.insert("N".into(), n as f64);
    }
    FamilyRef {
        name: name.to_string(),
        params: map,
    }
}

fn family_only(name: &str, params: &[(String, f64)]) -> Result<GeneratorFamily, CliError> {
    let map: BTreeMap<String, f64> = params.iter().cloned().collect();
    dirint::gallery::family_by_name(name, &map).map_err(|e| CliError::Usage(e.to_string()))
}

struct Loaded {
    field: OperatorField,
    digest: String,
    source: serde_json::Value,
}

fn load(input: &Input) -> Result<Loaded, CliError> {
    match (&input.field, &input.family) {
        (Some(path), None) => {
            if !input.params.is_empty() || input.n.is_some() {
                return Err(CliError::Usage("--param and --n apply to --family only".into()));
            }
            let bytes = std::fs::read(path).map_err(|source| field_spec::SpecError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let text = String::from_utf8(bytes.clone())
                .map_err(|_| field_spec::SpecError::SchemaError("file is not UTF-8".into()))?;
            let (_, _, field) = field_spec::parse_field_spec_str(&text)?;
            Ok(Loaded {
                field,
                digest: report::digest(&bytes),
                source: json!({ "field": path.display().to_string() }),
            })
        }
        (None, Some(name)) => {
            let n = input
                .n
                .ok_or_else(|| CliError::Usage("--family needs --n".into()))?;
            let r = family_ref(name, &input.params, Some(n));
            let (fam, n) = field_spec::family_from_ref(&r).map_err(|e| CliError::Usage(e.to_string()))?;
            let canonical = report::to_json_string(&r);
            Ok(Loaded {
                field: fam.truncate(n)?,
                digest: report::digest(canonical.as_bytes()),
                source: to_value(&r),
            })
        }
        _ => Err(CliError::Usage("exactly one of --field and --family is required".into())),
    }
}

fn outcome(report: Report, tables: Vec<Table>, verdict_failed: bool) -> Outcome {
    Outcome {
        report,
        tables,
        files: Vec::new(),
        verdict_failed,
    }
}

fn norm(input: &Input) -> Result<Outcome, CliError> {
    let l = load(input)?;
    let a = &l.field;
    let mut rep = Report::new("norm", l.digest);
    rep.param("input", &l.source);
    let norms = a.block_norms();
    let (argmax, op_norm) = norms
        .iter()
        .enumerate()
        .fold((0, 0.0), |(i, m), (k, &v)| if v > m { (k, v) } else { (i, m) });
    rep.results = json!({ "op_norm": op_norm, "argmax_atom": a.atom_id(argmax), "atoms": a.len() });
    let mut t = Table::new("block_norms", &["atom", "label", "weight", "dim", "norm"]);
    for (k, (atom, v)) in a.space().atoms().iter().zip(&norms).enumerate() {
        t.push(vec![
            atom.id.to_string(),
            atom.label.map(num).unwrap_or_default(),
            num(atom.weight),
            a.fibers().dims()[k].to_string(),
            num(*v),
        ]);
    }
    Ok(outcome(rep, vec![t], false))
}

fn spectrum(input: &Input, eps: Option<f64>, window: Option<[f64; 4]>, points: usize) -> Result<Outcome, CliError> {
    let l = load(input)?;
    let a = &l.field;
    let mut rep = Report::new("spectrum", l.digest);
    rep.param("input", &l.source);
    let mut spec = a.spectrum()?;
    let mut tables = Vec::new();
    if let Some(eps) = eps {
        if !(eps > 0.0) {
            return Err(CliError::Usage("--pseudo-eps must be positive".into()));
        }
        if points < 2 {
            return Err(CliError::Usage("--grid-points must be at least 2".into()));
        }
        let w = window.unwrap_or_else(|| {
            let r = 1.1 * a.op_norm() + 1.0;
            [-r, r, -r, r]
        });
        if !(w[0] < w[1] && w[2] < w[3]) {
            return Err(CliError::Usage("--window must be re_min,re_max,im_min,im_max with min < max".into()));
        }
        let re = grid::linspace(w[0], w[1], points);
        let im = grid::linspace(w[2], w[3], points);
        let lambdas: Vec<Complex64> = im
            .iter()
            .flat_map(|&y| re.iter().map(move |&x| Complex64::new(x, y)))
            .collect();
        let pseudo = a.pseudospectrum(&lambdas, eps);
        let mut t = Table::new("pseudospectrum", &["re", "im", "inv_sigma_min", "inside"]);
        for p in &pseudo.points {
            t.push(vec![num(p.lambda.re), num(p.lambda.im), num(p.inv_sigma_min), p.inside.to_string()]);
        }
        tables.push(t);
        rep.param("pseudo_eps", eps);
        rep.grid("re", &re);
        rep.grid("im", &im);
        spec.pseudo = Some(pseudo);
    }
    let abscissa = a.abscissas()?.into_iter().fold(f64::NEG_INFINITY, f64::max);
    let mut t = Table::new("spectrum", &["atom", "re", "im"]);
    for p in &spec.points {
        t.push(vec![p.atom.to_string(), num(p.value.re), num(p.value.im)]);
    }
    tables.insert(0, t);
    rep.results = json!({ "spectral_abscissa": abscissa, "spectrum": to_value(&spec) });
    Ok(outcome(rep, tables, false))
}

fn resolvent(input: &Input, lambda: Complex64) -> Result<Outcome, CliError> {
    let l = load(input)?;
    let a = &l.field;
    let mut rep = Report::new("resolvent", l.digest);
    rep.param("input", &l.source);
    rep.param("lambda", [lambda.re, lambda.im]);
    let norms = a.resolvent_norms(lambda);
    let sup = norms.iter().copied().fold(0.0, f64::max);
    let in_spectrum = !sup.is_finite();
    if in_spectrum {
        rep.warn("InSpectrum", format!("{lambda} lies in the spectrum of some fiber"), None);
    }
    rep.results = json!({ "resolvent_norm": sup, "in_spectrum": in_spectrum });
    let mut t = Table::new("resolvent", &["atom", "norm"]);
    for (k, v) in norms.iter().enumerate() {
        t.push(vec![a.atom_id(k).to_string(), num(*v)]);
    }
    Ok(outcome(rep, vec![t], in_spectrum))
}

fn time_grid(t_max: f64, dt: f64) -> Result<Vec<f64>, CliError> {
    if !(dt > 0.0 && t_max >= dt && (t_max / dt) <= 1e6) {
        return Err(CliError::Usage("need 0 < --dt <= --t-max with at most 1e6 steps".into()));
    }
    let n = (t_max / dt).round() as usize;
    Ok((0..=n).map(|k| k as f64 * dt).collect())
}

fn semigroup_cmd(input: &Input, t_max: f64, dt: f64, schedule: Option<Vec<usize>>, cap: f64) -> Result<Outcome, CliError> {
    let t_grid = time_grid(t_max, dt)?;
    if let Some(schedule) = schedule {
        let (Some(name), None) = (&input.family, &input.field) else {
            return Err(CliError::Usage("--n-schedule needs --family".into()));
        };
        if input.n.is_some() {
            return Err(CliError::Usage("--n and --n-schedule are exclusive".into()));
        }
        let fam = family_only(name, &input.params)?;
        let r = family_ref(name, &input.params, None);
        let mut rep = Report::new("semigroup", report::digest(report::to_json_string(&r).as_bytes()));
        rep.param("input", &r);
        rep.param("n_schedule", &schedule);
        rep.param("cap", cap);
        rep.grid("t", &t_grid);
        let gen = semigroup::check_generation_on(&fam, &schedule, cap, &t_grid)
            .map_err(|e| match e {
                Error::InvalidParameter(m) => CliError::Usage(m),
                e => e.into(),
            })?;
        let failed = gen.verdict == GenerationVerdict::NonUniform;
        for reason in &gen.reasons {
            rep.warn("NonUniform", reason.clone(), None);
        }
        let mut t = Table::new("generation", &["n", "m", "omega", "unit_time_norm"]);
        for e in &gen.entries {
            t.push(vec![e.n.to_string(), num(e.m), num(e.omega), num(e.unit_time_norm)]);
        }
        rep.results = json!({
            "verdict": to_value(&gen.verdict),
            "entries": to_value(&gen.entries),
            "reasons": gen.reasons,
        });
        return Ok(outcome(rep, vec![t], failed));
    }

    let l = load(input)?;
    let a = &l.field;
    let mut rep = Report::new("semigroup", l.digest);
    rep.param("input", &l.source);
    rep.grid("t", &t_grid);
    let bound = semigroup::estimate_bound(a, &t_grid)?;
    let mut growth = Table::new("growth", &["t", "norm", "bound"]);
    for &t in &t_grid {
        let n = semigroup::exp_field(a, t)?.op_norm();
        growth.push(vec![num(t), num(n), num(bound.m * (bound.omega * t).exp())]);
    }
    let mut fibers = Table::new("per_fiber", &["atom", "m", "omega"]);
    for f in &bound.per_fiber {
        fibers.push(vec![f.atom.to_string(), num(f.m), num(f.omega)]);
    }
    rep.results = json!({ "m": bound.m, "omega": bound.omega, "per_fiber": to_value(&bound.per_fiber) });
    Ok(outcome(rep, vec![growth, fibers], false))
}

fn classes_cmd(
    input: &Input,
    delta: f64,
    compact_lambda: Option<Complex64>,
    schedule: Option<Vec<usize>>,
    tau: f64,
) -> Result<Outcome, CliError> {
    let l = load(input)?;
    let a = &l.field;
    let mut rep = Report::new("classes", l.digest);
    rep.param("input", &l.source);
    rep.param("delta", delta);
    let cls = classes::classify_field(a, delta).map_err(|e| match e {
        Error::InvalidParameter(m) => CliError::Usage(m),
        e => e.into(),
    })?;
    let mut tables = Vec::new();
    if let Some(s) = &cls.sectorial {
        rep.grid("sector_radii", &classes::default_radii());
        let mut t = Table::new("sector", &["eps", "m_eps"]);
        for (e, m) in s.eps_list.iter().zip(&s.m_eps) {
            t.push(vec![num(*e), num(*m)]);
        }
        tables.push(t);
    }
    if let Some(m) = &cls.uniformly_norm_continuous {
        rep.grid("modulus_t", &m.t_grid);
        let mut t = Table::new("modulus", &["probe", "modulus"]);
        for r in &m.rows {
            t.push(vec![num(r.probe), num(r.modulus)]);
        }
        tables.push(t);
    }
    if let Some(ax) = &cls.immediately_norm_continuous {
        rep.grid("axis_r", &classes::default_axis_grid());
        let mut t = Table::new("axis", &["r", "value"]);
        for r in &ax.table {
            t.push(vec![num(r.r), num(r.value)]);
        }
        tables.push(t);
    }
    let mut compact = None;
    match (compact_lambda, schedule) {
        (Some(lam), Some(schedule)) => {
            let Some(name) = &input.family else {
                return Err(CliError::Usage("--compact-lambda needs --family".into()));
            };
            let fam = family_only(name, &input.params)?;
            let probe = classes::imm_compact_check(
                &fam,
                lam,
                &schedule,
                tau,
                &classes::default_axis_grid(),
            )?;
            rep.param("n_schedule", &schedule);
            rep.param("tau", tau);
            let mut t = Table::new("compact_tail", &["truncation", "window_lo", "window_hi", "max"]);
            for w in &probe.resolvent_tail.windows {
                t.push(vec![w.truncation.to_string(), w.window.0.to_string(), w.window.1.to_string(), num(w.max)]);
            }
            tables.push(t);
            compact = Some(probe);
        }
        (None, None) => {}
        _ => return Err(CliError::Usage("--compact-lambda and --n-schedule go together".into())),
    }
    let mut results = to_value(&cls);
    results["immediately_compact"] = to_value(&compact);
    rep.results = results;
    Ok(outcome(rep, tables, false))
}

fn log_grid(lo: f64, hi: f64) -> Vec<f64> {
    let n = (POINTS_PER_DECADE * (hi / lo).log10()).round() as usize + 1;
    grid::logspace(lo, hi, n.max(2))
}

fn decay(
    name: &str,
    params: &[(String, f64)],
    alpha: f64,
    schedule: &[usize],
    r_max: f64,
    t_max: f64,
) -> Result<Outcome, CliError> {
    if !(alpha > 0.0) {
        return Err(CliError::Usage("--alpha must be positive".into()));
    }
    if !(r_max > 1.0) || !(t_max > 1e-2) {
        return Err(CliError::Usage("need --r-max > 1 and --t-max > 0.01".into()));
    }
    if schedule.len() < 2 || schedule.windows(2).any(|w| w[1] <= w[0]) || schedule[0] == 0 {
        return Err(CliError::Usage("--n-schedule needs at least two increasing positive sizes".into()));
    }
    let fam = family_only(name, params)?;
    let r_mag = log_grid(1.0, r_max);
    let t_grid = log_grid(1e-2, t_max);
    let r = family_ref(name, params, None);
    let mut rep = Report::new("decay", report::digest(report::to_json_string(&r).as_bytes()));
    rep.param("family", &r);
    rep.param("alpha", alpha);
    rep.param("n_schedule", schedule);
    rep.grid("r", &grid::mirrored(&r_mag));
    rep.grid("t", &t_grid);

    let (dr, failed) = match asymptotics::equivalence_report(&fam, alpha, &r_mag, &t_grid, schedule) {
        Ok((dr, verdict)) => {
            let failed = verdict != EquivalenceVerdict::BothFiniteStable;
            (dr, failed)
        }
        Err(Error::HypothesisViolated { which, report }) => {
            rep.warn(
                "HypothesisViolated",
                format!("hypotheses violated: {which:?}"),
                Some(json!({ "which": to_value(&which), "checks": to_value(&report.hypotheses) })),
            );
            (*report, true)
        }
        Err(e) => return Err(e.into()),
    };
    if !dr.decay_stable {
        let sups: Vec<Option<f64>> = dr.entries.iter().map(|e| e.decay_sup).collect();
        rep.warn(
            "DecayDivergence",
            "sup_t t^(1/alpha) ||T(t)A^-1|| is not stable across doublings",
            Some(json!({ "n": schedule, "decay_sup": sups })),
        );
    }
    if !dr.resolvent_stable {
        let sups: Vec<Option<f64>> = dr.entries.iter().map(|e| e.resolvent_sup).collect();
        rep.warn(
            "ResolventDivergence",
            "sup_r |r|^(-alpha) ||R(ir, A)|| is not stable across doublings",
            Some(json!({ "n": schedule, "resolvent_sup": sups })),
        );
    }
    let n_max = *schedule.last().expect("checked non-empty");
    let fit = match asymptotics::fit_decay_exponent(&fam.truncate(n_max)?, &t_grid) {
        Ok(f) => Some(f),
        Err(e @ (Error::DegenerateFit(_) | Error::NoDecay | Error::SingularFiber(_))) => {
            rep.warn("DecayFit", e.to_string(), None);
            None
        }
        Err(e) => return Err(e.into()),
    };

    let mut entries = Table::new(
        "decay_entries",
        &["n", "resolvent_sup", "decay_sup", "inverse_sup", "semigroup_sup", "abscissa"],
    );
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    for e in &dr.entries {
        entries.push(vec![
            e.n.to_string(),
            opt(e.resolvent_sup),
            opt(e.decay_sup),
            num(e.inverse_sup),
            num(e.semigroup_sup),
            num(e.abscissa),
        ]);
    }
    let mut fixed = Table::new("axis_fixed", &["n", "r", "value"]);
    for e in &dr.entries {
        for p in &e.fixed_axis {
            fixed.push(vec![e.n.to_string(), num(p.r), num(p.value)]);
        }
    }
    let mut tables = vec![entries, fixed];
    if let Some(g) = &dr.resolvent_table {
        let mut t = Table::new("resolvent_growth", &["r", "axis", "scaled"]);
        for row in &g.rows {
            t.push(vec![num(row.r), num(row.axis), num(row.scaled)]);
        }
        tables.push(t);
    }
    if let Some(d) = &dr.decay_table {
        let mut t = Table::new("decay_table", &["t", "raw", "scaled"]);
        for row in &d.rows {
            t.push(vec![num(row.t), num(row.raw), num(row.scaled)]);
        }
        tables.push(t);
    }
    rep.results = json!({
        "verdict": to_value(&dr.verdict),
        "resolvent_stable": dr.resolvent_stable,
        "decay_stable": dr.decay_stable,
        "hypotheses": to_value(&dr.hypotheses),
        "entries": to_value(&dr.entries),
        "fixed_r": dr.fixed_r,
        "fit": to_value(&fit),
    });
    Ok(outcome(rep, tables, failed))
}

fn gallery_export(name: &str, params: &[(String, f64)], n: usize) -> Result<Outcome, CliError> {
    let r = family_ref(name, params, Some(n));
    let (fam, n) = field_spec::family_from_ref(&r).map_err(|e| CliError::Usage(e.to_string()))?;
    let field = fam.truncate(n)?;
    let text = FieldSpecFile::from_field(&field).to_json();
    let mut rep = Report::new("gallery-export", report::digest(report::to_json_string(&r).as_bytes()));
    rep.param("family", &r);
    rep.results = json!({
        "file": "field.json",
        "atoms": field.len(),
        "fibers": field.fibers().dims(),
        "file_digest": report::digest(text.as_bytes()),
    });
    Ok(Outcome {
        report: rep,
        tables: Vec::new(),
        files: vec![("field.json".into(), text)],
        verdict_failed: false,
    })
}
