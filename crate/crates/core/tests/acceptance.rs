//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
//!
//! Monte Carlo criteria (7 to 11) render their results as CSV; criterion 14
//! re-executes them and compares the bytes.

use std::f64::consts::{LN_2, PI};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use brw_core::constants::{a_critical, b_roots, k_const};
use brw_core::exec::Execution;
use brw_core::laws::{criticality_check, LaplaceProfile, OffspringLaw, Outcome, CRITICALITY_TOL};
use brw_core::profile_ode::{
    asymptotic_slope, blow_down_time, extinction_rate, integral_identity_residual, rescale, solve_profile, ProfileClass,
};
use brw_core::reduction::{classify_reduction, tilt_law};
use brw_core::rng::StreamKey;
use brw_core::sim::{
    classify_general_barrier, extinction_slope_fit, survival_curve, survival_probability, two_barrier_census, Barrier,
    CensusConfig, SplittingConfig, SurvivalMethod, Verdict, DEFAULT_N_MIN, DEFAULT_SURVIVAL_CAP,
};
use brw_core::tube::{
    many_to_one_check, tube_probability_exact, tube_probability_mc, Functional, Profile, TiltedStepLaw, TubeSpec,
};
use rand::{Rng, SeedableRng};

/// (3/2)(3π²)^{1/3} from an independent arbitrary-precision evaluation.
#[allow(clippy::excessive_precision)]
const A_C_1: f64 = 4.640_501_589_420_203_896;
const SEED: u64 = 20_240_601;
const EXEC: Execution = Execution::Parallel;

struct Outcome_ {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Outcome_ {
    Outcome_ { pass, detail: detail.into() }
}

fn g(x: f64) -> String {
    format!("{x:.16e}")
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs()
}

fn critical_gaussian() -> OffspringLaw {
    OffspringLaw::critical_gaussian(1.0).unwrap()
}

fn c1() -> Outcome_ {
    let ac = a_critical(1.0).unwrap();
    let r1 = rel(ac, A_C_1);
    let mut worst = 0.0f64;
    for i in 0..=40 {
        let s2 = 10f64.powf(-4.0 + 8.0 * i as f64 / 40.0);
        worst = worst.max(rel(a_critical(s2).unwrap(), s2.cbrt() * ac));
    }
    verdict(r1 <= 1e-12 && worst <= 1e-12, format!("a_c(1) rel err {r1:.2e}, homogeneity worst {worst:.2e}"))
}

fn c2() -> Outcome_ {
    let t = blow_down_time(1.0, 0.0, 1.0, 1e-10).unwrap().unwrap();
    let rt = rel(t, 2.0 / (3.0 * PI * PI));
    let c = extinction_rate(1.0, 0.0, 1e-10).unwrap();
    let dc = (c - (1.5 * PI * PI).cbrt()).abs();
    verdict(rt <= 1e-8 && dc <= 1e-6, format!("t_max rel err {rt:.2e}, c = {c:.8} (abs err {dc:.2e})"))
}

fn c3() -> Outcome_ {
    let mut worst = 0.0f64;
    for a in [4.8, 6.0, 10.0] {
        let b = b_roots(1.0, a).unwrap().b_a().unwrap();
        for i in 0..=200 {
            let t = 0.01 * 1e4f64.powf(i as f64 / 200.0);
            let r = integral_identity_residual(1.0, a, 0.0, |x: f64| b * x.cbrt(), t).unwrap();
            worst = worst.max(r.abs());
        }
    }
    verdict(worst <= 1e-10, format!("max residual {worst:.2e}"))
}

fn c4() -> Outcome_ {
    let ac = a_critical(1.0).unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for a in [3.0, 4.0, 4.5] {
        let sol = solve_profile(1.0, a, 1.0, 1.0, 1e-9).unwrap();
        let down = matches!(sol.classification, ProfileClass::BlowsDown { .. });
        ok &= down;
        let _ = write!(detail, "a={a}:{} ", if down { "down" } else { "GROWS" });
    }
    for a in [4.8, 5.5, 7.0] {
        let sol = solve_profile(1.0, a, 1.0, 1.0, 1e-9).unwrap();
        let b_a = b_roots(1.0, a).unwrap().b_a().unwrap();
        let limit = if (a - ac).abs() < 0.05 {
            0.05
        } else if a == 4.8 {
            0.02
        } else {
            0.01
        };
        match asymptotic_slope(&sol) {
            Ok(b) => {
                let e = rel(b, b_a);
                ok &= e <= limit;
                let _ = write!(detail, "a={a}:slope err {e:.1e} ");
            }
            Err(_) => {
                ok = false;
                let _ = write!(detail, "a={a}:NOT GROWING ");
            }
        }
    }
    verdict(ok, detail.trim_end())
}

fn c5() -> Outcome_ {
    let mut rng = rand::rngs::StdRng::seed_from_u64(SEED);
    let tol = 1e-8;
    let mut failures = 0;
    let mut worst = 0.0f64;
    let mut tuples = 0;
    while tuples < 100 {
        let sigma_sq = rng.random_range(0.3..3.0);
        let a = rng.random_range(0.0..9.0);
        let s = rng.random_range(0.2..3.0);
        let lambda = rng.random_range(0.1..10.0);
        if (a - a_critical(sigma_sq).unwrap()).abs() <= 0.2 {
            continue;
        }
        tuples += 1;
        let sol = solve_profile(sigma_sq, a, s, 20.0, tol).unwrap();
        let scaled = rescale(&sol, lambda);
        let direct = solve_profile(sigma_sq, a, scaled.s, 20.0, tol).unwrap();
        let mut bad = false;
        for (&u, &h) in scaled.grid.iter().zip(&scaled.values) {
            if let Some(d) = direct.eval_h(u) {
                // pointwise conditioning of h(u) is |h'| near blow-down
                let slope = (a - k_const(sigma_sq) * u * u / (h * h)).abs().max(1.0);
                let ratio = (d - h).abs() / (tol * (scaled.s + a * u) * slope);
                worst = worst.max(ratio);
                bad |= ratio > 5.0;
            }
        }
        let same_class = matches!(
            (scaled.classification, direct.classification),
            (ProfileClass::BlowsDown { .. }, ProfileClass::BlowsDown { .. })
                | (ProfileClass::GrowsLikeCubeRoot { .. }, ProfileClass::GrowsLikeCubeRoot { .. })
        );
        if bad || !same_class {
            failures += 1;
        }
    }
    verdict(failures == 0, format!("{failures}/100 tuples outside 5×tol (worst {worst:.2e} × tol)"))
}

fn m2o_laws() -> Vec<(&'static str, OffspringLaw)> {
    vec![
        (
            "halving",
            OffspringLaw::finite(vec![Outcome::new(1.0 / 3.0, [-LN_2]), Outcome::new(2.0 / 3.0, [LN_2])]).unwrap(),
        ),
        ("binary", OffspringLaw::finite(vec![Outcome::new(1.0, [LN_2, LN_2])]).unwrap()),
        (
            "mixed-binary",
            OffspringLaw::finite(vec![Outcome::new(0.5, [LN_2, LN_2]), Outcome::new(0.5, [3f64.ln(), 1.5f64.ln()])])
                .unwrap(),
        ),
    ]
}

fn c6() -> Outcome_ {
    let mut worst = 0.0f64;
    let mut cells = 0;
    for (_, law) in m2o_laws() {
        for n in 1..=4 {
            for f in [Functional::One, Functional::IndicatorBelowZeroAtN, Functional::IndicatorTubeConstant { w: 1.0 }]
            {
                worst = worst.max(many_to_one_check(&law, n, f).unwrap().abs_diff);
                cells += 1;
            }
        }
    }
    verdict(worst <= 1e-12, format!("{cells} cells, max |lhs - rhs| = {worst:.2e}"))
}

/// Criteria 7 to 11 produce a verdict and a CSV artifact.
struct Artifact {
    outcome: Outcome_,
    csv: String,
}

fn c7() -> Artifact {
    let step = TiltedStepLaw::DiscreteAtoms { atoms: vec![(-1.0, 0.5), (1.0, 0.5)] };
    let key = StreamKey::from_seed(SEED).domain("criterion-7");
    let mut csv = String::from("j,p_hat,stderr,exact,z\n");
    let mut ok = true;
    let mut detail = String::new();
    for j in [2u64, 10, 30] {
        let exact = tube_probability_exact(&step, j, (-1, 1), 0).unwrap();
        let est = tube_probability_mc(&step, &TubeSpec::absolute(j, -1.0, 1.0), 1_000_000, key.child(j), EXEC).unwrap();
        let z = (est.p_hat - exact) / est.stderr;
        ok &= z.abs() <= 4.0;
        if j == 2 {
            ok &= (exact - 0.5).abs() < 1e-15;
        }
        let _ = writeln!(csv, "{j},{},{},{},{}", g(est.p_hat), g(est.stderr), g(exact), g(z));
        let _ = write!(detail, "j={j}: z={z:.2} ");
    }
    Artifact { outcome: verdict(ok, detail.trim_end()), csv }
}

fn c8() -> Artifact {
    let step = TiltedStepLaw::Gaussian { mean: 0.0, variance: 1.0 };
    let key = StreamKey::from_seed(SEED).domain("criterion-8");
    let target = PI * PI / 8.0;
    let mut csv = String::from("j,p_hat,stderr,rate\n");
    let mut rates = Vec::new();
    for j in [64u64, 216, 512] {
        let spec = TubeSpec::scaled(j, Profile::Constant { value: -1.0 }, Profile::Constant { value: 1.0 });
        let est = tube_probability_mc(&step, &spec, 10_000_000, key.child(j), EXEC).unwrap();
        let r = -est.p_hat.ln() / (j as f64).cbrt();
        let _ = writeln!(csv, "{j},{},{},{}", g(est.p_hat), g(est.stderr), g(r));
        rates.push(r);
    }
    let increasing = rates.windows(2).all(|w| w[0] < w[1]) && rates[2] < target;
    let close = rel(rates[2], target) <= 0.25;
    Artifact {
        outcome: verdict(
            increasing && close,
            format!(
                "rates {:.4} {:.4} {:.4} → π²/8 = {target:.4} (j=512 off by {:.1}%)",
                rates[0],
                rates[1],
                rates[2],
                100.0 * rel(rates[2], target)
            ),
        ),
        csv,
    }
}

fn c9() -> Artifact {
    let law = critical_gaussian();
    let key = StreamKey::from_seed(SEED).domain("criterion-9");
    let method = SurvivalMethod::Splitting(SplittingConfig::default());
    let mut csv = String::from("a,n,p_hat,stderr,cap_hits\n");
    let mut ok = true;
    let mut detail = String::new();
    // (a, runs, cap, target, tolerance)
    let c4 = extinction_rate(1.0, 4.0, 1e-10).unwrap();
    for (a, runs, cap, target, tol) in
        [(0.0, 10_000u64, DEFAULT_SURVIVAL_CAP, (1.5 * PI * PI).cbrt(), 0.25), (4.0, 2_000, 1_000, c4, 0.30)]
    {
        let ests: Vec<_> = [8u64, 27, 64, 125]
            .iter()
            .map(|&n| {
                let k = key.child(a as u64).child(n);
                survival_probability(&law, &Barrier::PowerLaw { a }, n, runs, &method, cap, k, EXEC).unwrap()
            })
            .collect();
        for e in &ests {
            let _ = writeln!(csv, "{},{},{},{},{}", g(a), e.n, g(e.p_hat), g(e.stderr), e.cap_hits);
        }
        match extinction_slope_fit(&ests) {
            Ok(fit) => {
                let e = rel(fit.c_hat, target);
                ok &= e <= tol;
                let _ = write!(
                    detail,
                    "a={a}: c_hat {:.4} vs {target:.4} ({:.0}% off, limit {:.0}%) ",
                    fit.c_hat,
                    100.0 * e,
                    100.0 * tol
                );
            }
            Err(err) => {
                ok = false;
                let _ = write!(detail, "a={a}: fit failed: {err} ");
            }
        }
    }
    Artifact { outcome: verdict(ok, detail.trim_end()), csv }
}

fn c10() -> Artifact {
    let law = critical_gaussian();
    let ac = a_critical(1.0).unwrap();
    let grid: Vec<f64> = (0..12).map(|i| ac - 1.0 + 2.0 * i as f64 / 11.0).collect();
    let key = StreamKey::from_seed(SEED).domain("criterion-10");
    let curve = survival_curve(&law, &grid, 512, 10_000, 256, key, EXEC).unwrap();
    let mut csv = String::from("a,n,p_hat,stderr\n");
    for p in &curve {
        let _ = writeln!(csv, "{},{},{},{}", g(p.a), p.estimate.n, g(p.estimate.p_hat), g(p.estimate.stderr));
    }
    let violations = curve.windows(2).filter(|w| w[1].estimate.p_hat < w[0].estimate.p_hat).count();
    let lo = curve[0].estimate.p_hat;
    let hi = curve[11].estimate.p_hat;
    let ratio_ok = hi > 0.0 && hi >= 10.0 * lo;
    Artifact {
        outcome: verdict(
            violations == 0 && ratio_ok,
            format!("{violations} monotonicity violations; p(a_c+1) = {hi:.4}, p(a_c-1) = {lo:.4}"),
        ),
        csv,
    }
}

fn c11() -> Artifact {
    let law = critical_gaussian();
    let b_a = b_roots(1.0, 6.0).unwrap().b_a().unwrap();
    let cfg = CensusConfig { a: 6.0, b: Some(b_a), growth: 4, k_max: 3, runs: 2_000, eps: 1.0, cap: Some(2_000) };
    let recs = two_barrier_census(&law, &cfg, StreamKey::from_seed(SEED).domain("criterion-11"), EXEC).unwrap();
    let mut csv = String::from("k,n_k,mean_count,stderr,target,unconstrained_mean\n");
    for r in &recs {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.k,
            r.n_k,
            g(r.mean_count),
            g(r.stderr),
            g(r.exp_target),
            g(r.unconstrained_mean)
        );
    }
    let growth: Vec<f64> = recs[1..].iter().map(|r| r.mean_count.ln() / (r.n_k as f64).cbrt()).collect();
    let increasing = growth.windows(2).all(|w| w[0] < w[1]);
    let bracket: Vec<bool> =
        recs[1..].iter().map(|r| r.exp_target <= r.mean_count && r.mean_count <= r.unconstrained_mean).collect();
    let mut detail = format!("log(mean)/E^(k/3) = {:.3} {:.3} {:.3}; bracket", growth[0], growth[1], growth[2]);
    for (r, ok) in recs[1..].iter().zip(&bracket) {
        let _ = write!(
            detail,
            " k={}:{} (target {:.3e}, mean {:.3e}, max {:.3e})",
            r.k,
            if *ok { "ok" } else { "MISS" },
            r.exp_target,
            r.mean_count,
            r.unconstrained_mean
        );
    }
    Artifact { outcome: verdict(increasing && bracket.iter().all(|&b| b), detail), csv }
}

fn c12() -> Outcome_ {
    let ac = a_critical(1.0).unwrap();
    let cases = [
        (Barrier::PowerLaw { a: 4.0 }, Verdict::Extinct),
        (Barrier::PowerLaw { a: 5.0 }, Verdict::Survives),
        (Barrier::OscillatingParity { a_plus: 5.0, a_minus: 4.0 }, Verdict::Extinct),
        (Barrier::SparseDip { a_plus: 5.0, a_minus: 1.0, base: 1 << 20 }, Verdict::Survives),
        (Barrier::Linear { eps: -0.1 }, Verdict::Extinct),
        (Barrier::PowerLaw { a: ac }, Verdict::Unknown),
    ];
    let wrong: Vec<String> = cases
        .iter()
        .filter_map(|(b, want)| {
            let got = classify_general_barrier(1.0, b, DEFAULT_N_MIN).verdict;
            (got != *want).then(|| format!("{b:?}: {got:?} (want {want:?})"))
        })
        .collect();
    verdict(
        wrong.is_empty(),
        if wrong.is_empty() { format!("{} examples match", cases.len()) } else { wrong.join("; ") },
    )
}

fn c13() -> Outcome_ {
    let law = OffspringLaw::poisson_gaussian(2.0, 0.0, 1.0).unwrap();
    let profile = LaplaceProfile::from_law(&law);
    let rep = classify_reduction(&profile).unwrap();
    let t = rep.t_star.unwrap();
    let dt = (t - (2.0 * LN_2).sqrt()).abs();
    let tilted = tilt_law(&law, t).unwrap();
    let crit = criticality_check(&LaplaceProfile::from_law(&tilted.law), CRITICALITY_TOL).unwrap();
    let (_, _, d2) = profile.psi_derivatives(t).unwrap();
    let direct = rep.sigma_tilde_sq.unwrap();
    let dsig = (direct - t * t * d2).abs();
    let printed = rep.sigma_tilde_sq_unnormalized.unwrap();
    verdict(
        dt <= 1e-10 && crit.is_critical && dsig <= 1e-9,
        format!(
            "t* err {dt:.2e}; tilted Ψ(1) = {:.1e}, Ψ'(1) = {:.1e}; σ̃² = {direct:.12} (vs t*²Ψ'' err {dsig:.1e}); printed expression {printed:.12}, discrepancy {:.6}",
            crit.psi1,
            crit.dpsi1,
            printed - direct
        ),
    )
}

fn artifacts() -> Vec<(u8, Artifact, f64)> {
    let producers: [(u8, fn() -> Artifact); 5] = [(7, c7), (8, c8), (9, c9), (10, c10), (11, c11)];
    producers
        .into_iter()
        .map(|(c, f)| {
            let (a, s) = timed(f);
            (c, a, s)
        })
        .collect()
}

fn write_artifacts(dir: &PathBuf, arts: &[(u8, Artifact, f64)]) -> Vec<Vec<u8>> {
    std::fs::create_dir_all(dir).unwrap();
    arts.iter()
        .map(|(c, a, _)| {
            let path = dir.join(format!("criterion_{c}.csv"));
            std::fs::write(&path, &a.csv).unwrap();
            std::fs::read(&path).unwrap()
        })
        .collect()
}

fn report(c: u8, o: &Outcome_, secs: f64) -> bool {
    println!("criterion {c:>2}: {} [{secs:.1}s] {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    o.pass
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}

fn main() {
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let mut all = true;
    let fast: [(u8, fn() -> Outcome_); 6] = [(1, c1), (2, c2), (3, c3), (4, c4), (5, c5), (6, c6)];
    for (c, f) in fast {
        let (o, s) = timed(f);
        all &= report(c, &o, s);
    }
    let first = artifacts();
    for (c, a, s) in &first {
        all &= report(*c, &a.outcome, *s);
    }
    for (c, f) in [(12u8, c12 as fn() -> Outcome_), (13, c13)] {
        let (o, s) = timed(f);
        all &= report(c, &o, s);
    }
    let (second, s_second) = timed(artifacts);
    let bytes_a = write_artifacts(&root.join("run1"), &first);
    let bytes_b = write_artifacts(&root.join("run2"), &second);
    let differing: Vec<String> = first
        .iter()
        .zip(bytes_a.iter().zip(&bytes_b))
        .filter(|(_, (x, y))| x != y)
        .map(|((c, _, _), _)| c.to_string())
        .collect();
    let o14 = verdict(
        differing.is_empty(),
        if differing.is_empty() {
            format!("criteria 7-11 CSV byte-identical across two executions ({})", root.display())
        } else {
            format!("CSV differs for criteria {}", differing.join(", "))
        },
    );
    all &= report(14, &o14, s_second);
    if !all {
        std::process::exit(1);
    }
}
