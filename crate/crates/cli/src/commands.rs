//! One function per subcommand. Each writes its artifacts and returns the
//! text echoed to stdout.

use brw_core::constants::{a_critical, b_roots, k_const, minimal_growth_factor};
use brw_core::estimate::SurvivalEstimate;
use brw_core::laws::{critical_sigma_sq, LaplaceProfile, OffspringLaw};
use brw_core::profile_ode::{extinction_rate, solve_profile};
use brw_core::reduction::{classify_reduction, tilt_law};
use brw_core::rng::StreamKey;
use brw_core::sim::{
    classify_general_barrier, extinction_slope_fit, survival_curve, survival_probability, two_barrier_census, Barrier,
    CensusConfig, SplittingConfig, SurvivalMethod,
};
use brw_core::tube::{mogulskii_rate, tilted_step, tube_probability_exact, Profile, TubeScale, TubeSpec};
use brw_core::{Error, Execution};
use serde::Serialize;
use serde_json::json;

use crate::config::{
    parse_barrier, parse_functional, parse_profile, parse_window, ExperimentConfig, MethodSpec, ScaleSpec,
};
use crate::error::{CliError, CliResult};
use crate::output::{Artifacts, Cell};

pub struct Run<'a> {
    pub cfg: &'a ExperimentConfig,
    pub out: &'a Artifacts,
    pub key: StreamKey,
    pub exec: Execution,
}

impl Run<'_> {
    fn law(&self) -> CliResult<OffspringLaw> {
        self.cfg.law.build()
    }

    fn barrier(&self) -> CliResult<Barrier> {
        parse_barrier(&self.cfg.barrier, "barrier")
    }
}

/// Parses every spec string the subcommand will use, so a bad config fails
/// before any artifact is written.
pub fn precheck(cfg: &ExperimentConfig, subcommand: &str) -> CliResult<()> {
    let uses_law = !(matches!(subcommand, "constants" | "ode" | "rate")
        || (subcommand == "reduce" && cfg.reduce.family.is_some())
        || (subcommand == "classify" && cfg.classify.sigma_sq.is_some()));
    if uses_law {
        cfg.law.build().map_err(|e| match e {
            CliError::Core(e) => CliError::config(format!("law: {e}")),
            e => e,
        })?;
    }
    match subcommand {
        "simulate" if cfg.sim.a_grid.is_empty() => parse_barrier(&cfg.barrier, "barrier").map(drop),
        "classify" => parse_barrier(&cfg.barrier, "barrier").map(drop),
        "tube" => {
            parse_profile(&cfg.tube.lower, "tube.lower")?;
            parse_profile(&cfg.tube.upper, "tube.upper")?;
            cfg.tube.endpoint.as_deref().map(|w| parse_window(w, "tube.endpoint")).transpose().map(drop)
        }
        "check-m2o" => cfg.m2o.functionals.iter().try_for_each(|f| parse_functional(f, "m2o.functionals").map(drop)),
        "reduce" => cfg.reduce.family.as_ref().map(|f| f.build()).transpose().map(drop),
        _ => Ok(()),
    }
}

pub fn constants(run: &Run) -> CliResult<String> {
    let p = &run.cfg.constants;
    let mut rows = Vec::new();
    for &sigma_sq in &p.sigma_sq {
        let ac = a_critical(sigma_sq)?;
        let grid = if p.a.is_empty() { vec![ac] } else { p.a.clone() };
        for a in grid {
            let roots = b_roots(sigma_sq, a)?;
            let e_min = match roots.b_a() {
                Some(b) => minimal_growth_factor(sigma_sq, a, b, p.e_max)?,
                None => None,
            };
            rows.push(vec![
                sigma_sq.into(),
                a.into(),
                ac.into(),
                roots.b_small().into(),
                roots.b_a().into(),
                e_min.into(),
            ]);
        }
    }
    run.out.csv("constants.csv", &["sigma_sq", "a", "a_c", "b_small", "b_a", "E_min"], rows)
}

pub fn reduce(run: &Run) -> CliResult<String> {
    let (profile, law) = match &run.cfg.reduce.family {
        Some(family) => (LaplaceProfile::from_closed_form(family.build()?), None),
        None => {
            let law = run.law()?;
            (LaplaceProfile::from_law(&law), Some(law))
        }
    };
    let report = classify_reduction(&profile)?;
    let tilted = match (&law, report.t_star) {
        (Some(law), Some(t)) => Some(tilt_law(law, t)?.law),
        _ => None,
    };
    let rows = report.f_values.iter().map(|&(t, f)| vec![t.into(), f.into()]).collect();
    run.out.csv("reduce.csv", &["t", "psi_over_t"], rows)?;
    run.out.json(
        "reduce.json",
        &json!({
            "case_tag": report.case_tag,
            "t_star": report.t_star,
            "sigma_tilde_sq": report.sigma_tilde_sq,
            "sigma_tilde_sq_unnormalized": report.sigma_tilde_sq_unnormalized,
            "reason": report.reason,
            "tilted_law": tilted,
        }),
    )
}

pub fn ode(run: &Run) -> CliResult<String> {
    let p = &run.cfg.ode;
    let sol = solve_profile(p.sigma_sq, p.a, p.s, p.horizon, p.tol)?;
    let rows = sol.t_nodes().map(|(t, f)| vec![t.into(), f.into()]).collect();
    run.out.csv("ode.csv", &["t", "f"], rows)?;
    run.out.json(
        "ode.json",
        &json!({
            "sigma_sq": p.sigma_sq,
            "a": p.a,
            "s": p.s,
            "a_c": a_critical(p.sigma_sq)?,
            "classification": sol.classification,
            "residual_max": sol.residual_max,
        }),
    )
}

pub fn rate(run: &Run) -> CliResult<String> {
    let p = &run.cfg.rate;
    let rows =
        p.a.iter()
            .map(|&a| Ok(vec![p.sigma_sq.into(), a.into(), extinction_rate(p.sigma_sq, a, p.tol)?.into()]))
            .collect::<CliResult<Vec<_>>>()?;
    run.out.csv("rate.csv", &["sigma_sq", "a", "c"], rows)
}

#[derive(Serialize)]
struct TubeRecord {
    j: u64,
    estimate: f64,
    stderr: f64,
    rate_prediction: Option<f64>,
    j_cuberoot_log: f64,
    exact: Option<f64>,
}

/// The integer band of an absolute tube with constant integer profiles.
fn lattice_band(lower: Profile, upper: Profile) -> Option<(i64, i64)> {
    match (lower, upper) {
        (Profile::Constant { value: lo }, Profile::Constant { value: hi })
            if lo.fract() == 0.0 && hi.fract() == 0.0 =>
        {
            Some((lo as i64, hi as i64))
        }
        _ => None,
    }
}

pub fn tube(run: &Run) -> CliResult<String> {
    let p = &run.cfg.tube;
    let lower = parse_profile(&p.lower, "tube.lower")?;
    let upper = parse_profile(&p.upper, "tube.upper")?;
    let endpoint_window = p.endpoint.as_deref().map(|w| parse_window(w, "tube.endpoint")).transpose()?;
    let scale = match p.scale {
        ScaleSpec::CubeRoot => TubeScale::CubeRoot,
        ScaleSpec::Absolute => TubeScale::Absolute,
    };
    let band = match (p.exact, scale, endpoint_window) {
        (false, _, _) => None,
        (true, TubeScale::Absolute, None) => Some(
            lattice_band(lower, upper)
                .ok_or_else(|| CliError::config("tube.exact: lower and upper must be integer constants"))?,
        ),
        _ => return Err(CliError::config("tube.exact needs scale = \"absolute\" and no endpoint window")),
    };
    let step = tilted_step(&run.law()?)?;
    let mut records = Vec::new();
    for &j in &p.j {
        let spec = TubeSpec { j, lower, upper, endpoint_window, scale, relaxed: false };
        let est = brw_core::tube::tube_probability_mc(&step, &spec, p.runs, run.key.child(j), run.exec)?;
        let rate_prediction = match (scale, endpoint_window) {
            (TubeScale::CubeRoot, None) => Some(mogulskii_rate(step.variance(), &spec)?),
            _ => None,
        };
        let exact = band.map(|b| tube_probability_exact(&step, j, b, 0)).transpose()?;
        records.push(TubeRecord {
            j,
            estimate: est.p_hat,
            stderr: est.stderr,
            rate_prediction,
            j_cuberoot_log: est.p_hat.ln() / (j as f64).cbrt(),
            exact,
        });
    }
    let rows = records
        .iter()
        .map(|r| {
            vec![
                r.j.into(),
                r.estimate.into(),
                r.stderr.into(),
                r.rate_prediction.into(),
                r.j_cuberoot_log.into(),
                r.exact.into(),
            ]
        })
        .collect();
    run.out.csv("tube.csv", &["j", "estimate", "stderr", "rate_prediction", "j_cuberoot_log", "exact"], rows)?;
    run.out.json("tube.json", &records)
}

fn survival_row(barrier: &str, a: Option<f64>, e: &SurvivalEstimate) -> Vec<Cell> {
    vec![
        barrier.into(),
        a.into(),
        e.n.into(),
        e.p_hat.into(),
        e.stderr.into(),
        e.runs.into(),
        format!("{:?}", e.method).to_lowercase().into(),
        e.cap_hits.into(),
    ]
}

/// Slope fits per barrier; skipped (with a note on stderr) when degenerate.
fn fit_rows(label: &str, a: Option<f64>, estimates: &[SurvivalEstimate]) -> CliResult<Option<Vec<Cell>>> {
    if estimates.len() < 3 {
        return Ok(None);
    }
    match extinction_slope_fit(estimates) {
        Ok(f) => Ok(Some(vec![
            label.into(),
            a.into(),
            f.c_hat.into(),
            f.stderr.into(),
            f.intercept.into(),
            f.r_squared.into(),
        ])),
        Err(Error::DegenerateFit(why)) => {
            eprintln!("note: no slope fit for {label}: {why}");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn simulate(run: &Run) -> CliResult<String> {
    let p = &run.cfg.sim;
    let law = run.law()?;
    let sigma_sq = match critical_sigma_sq(&law) {
        Ok(s) => Some(s),
        Err(_) if run.cfg.allow_noncritical => None,
        Err(e) => return Err(CliError::Domain(format!("{e}; pass --allow-noncritical to simulate it anyway"))),
    };
    if p.n.is_empty() {
        return Err(CliError::config("sim.n must not be empty"));
    }
    let mut series: Vec<(String, Option<f64>, Vec<SurvivalEstimate>)> = Vec::new();
    if p.a_grid.is_empty() {
        let barrier = run.barrier()?;
        let method = match p.method {
            MethodSpec::Naive => SurvivalMethod::Naive,
            MethodSpec::Split => SurvivalMethod::Splitting(SplittingConfig { groups: p.groups, ..Default::default() }),
        };
        let estimates =
            p.n.iter()
                .map(|&n| survival_probability(&law, &barrier, n, p.runs, &method, p.cap, run.key.child(n), run.exec))
                .collect::<Result<Vec<_>, _>>()?;
        let a = match barrier {
            Barrier::PowerLaw { a } => Some(a),
            _ => None,
        };
        series.push((run.cfg.barrier.clone(), a, estimates));
        if let Some(s) = sigma_sq {
            run.out
                .json("classification.json", &classification(s, &barrier, run.cfg.classify.n_min, &run.cfg.barrier))?;
        }
    } else {
        let curves =
            p.n.iter()
                .map(|&n| survival_curve(&law, &p.a_grid, n, p.runs, p.cap, run.key.child(n), run.exec))
                .collect::<Result<Vec<_>, _>>()?;
        for (i, &a) in p.a_grid.iter().enumerate() {
            let estimates = curves.iter().map(|c| c[i].estimate.clone()).collect();
            series.push((format!("pow:{}", crate::output::fmt_f64(a)), Some(a), estimates));
        }
    }
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for (label, a, estimates) in &series {
        rows.extend(estimates.iter().map(|e| survival_row(label, *a, e)));
        fits.extend(fit_rows(label, *a, estimates)?);
    }
    if !fits.is_empty() {
        run.out.csv("fit.csv", &["barrier", "a", "c_hat", "stderr", "intercept", "r_squared"], fits)?;
    }
    run.out.csv("survival.csv", &["barrier", "a", "n", "p_hat", "stderr", "runs", "method", "cap_hits"], rows)
}

pub fn census(run: &Run) -> CliResult<String> {
    let p = &run.cfg.census;
    let cfg = CensusConfig { a: p.a, b: p.b, growth: p.growth, k_max: p.k_max, runs: p.runs, eps: p.eps, cap: p.cap };
    let records = two_barrier_census(&run.law()?, &cfg, run.key, run.exec)?;
    let rows = records
        .iter()
        .map(|r| {
            vec![
                u64::from(r.k).into(),
                r.n_k.into(),
                r.mean_count.into(),
                r.stderr.into(),
                r.exp_target.into(),
                r.unconstrained_mean.into(),
                r.meets_target.into(),
            ]
        })
        .collect();
    run.out.csv(
        "census.csv",
        &["k", "n_k", "mean_count", "stderr", "target", "unconstrained_mean", "meets_target"],
        rows,
    )
}

fn classification(sigma_sq: f64, barrier: &Barrier, n_min: u64, spec: &str) -> serde_json::Value {
    let c = classify_general_barrier(sigma_sq, barrier, n_min);
    let a_c = a_critical(sigma_sq).ok();
    let threshold = barrier
        .a_plus()
        .and_then(|a| b_roots(sigma_sq, a).ok())
        .and_then(|r| r.b_a())
        .map(|b| k_const(sigma_sq) / (b * b));
    json!({
        "barrier": spec,
        "sigma_sq": sigma_sq,
        "a_c": a_c,
        "a_plus": barrier.a_plus(),
        "a_minus": barrier.a_minus(),
        "dip_threshold": threshold,
        "verdict": c.verdict,
        "reason": c.reason,
    })
}

pub fn classify(run: &Run) -> CliResult<String> {
    let barrier = run.barrier()?;
    let sigma_sq = match run.cfg.classify.sigma_sq {
        Some(s) => s,
        None => critical_sigma_sq(&run.law()?)?,
    };
    run.out.json("classification.json", &classification(sigma_sq, &barrier, run.cfg.classify.n_min, &run.cfg.barrier))
}

pub fn check_m2o(run: &Run) -> CliResult<String> {
    let p = &run.cfg.m2o;
    let law = run.law()?;
    let functionals = p
        .functionals
        .iter()
        .map(|f| Ok((f.as_str(), parse_functional(f, "m2o.functionals")?)))
        .collect::<CliResult<Vec<_>>>()?;
    let mut rows = Vec::new();
    for &n in &p.n {
        for &(name, f) in &functionals {
            let r = brw_core::tube::many_to_one_check(&law, n, f)?;
            rows.push(vec![(n as u64).into(), name.into(), r.lhs.into(), r.rhs.into(), r.abs_diff.into()]);
        }
    }
    run.out.csv("m2o.csv", &["n", "functional", "lhs", "rhs", "abs_diff"], rows)
}
