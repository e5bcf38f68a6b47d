use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use operc_core::certifier::{
    check_subcritical, check_theorem1, check_theorem1_auto, isotropic_bound, numeric_certificate,
    PercolationCertificate, Route, Verdict,
};
use operc_core::oracle::PathOracle;
use operc_core::packer::{pack_orbit, pack_step, verify_pack_monotone, PackMonotoneReport, PackingOrbit};
use operc_core::prob::{rational_string, EdgeParams, ProbVector};
use operc_core::sim::{self, RunMetadata, SimConfig, SimResult};
use operc_core::suite::{self, CriterionOutcome};
use operc_core::walk::stirling::{lambda_qstar_bound, QStarBound};
use operc_core::walk::{
    collision_series, collision_series_exact, lambda_truncated, projection_check, tau_dist, tau_dist_exact,
    CollisionSeries, MeetingDistribution, ProjectionReport,
};
use operc_core::{Error, Result};

use crate::args::*;

/// A command's result in every output format.
pub struct Rendered {
    pub text: String,
    pub csv: String,
    pub record: Value,
    /// Exit code for a completed run (nonzero when a verified identity fails).
    pub code: i32,
}

fn record<T: Serialize>(value: &T) -> Result<Value> {
    serde_json::to_value(value).map_err(|e| Error::Invariant(format!("record serialization: {e}")))
}

pub fn read_vector(arg: &str) -> Result<ProbVector> {
    match arg.strip_prefix('@') {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("reading {path}: {e}")))?;
            let joined: Vec<&str> = text
                .lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty())
                .collect();
            ProbVector::parse(&joined.join(","))
        }
        None => ProbVector::parse(arg),
    }
}

fn read_probability(arg: &str) -> Result<ProbVector> {
    let v = read_vector(arg)?;
    if v.is_probability() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("q = {v} does not sum to 1")))
    }
}

pub fn dispatch(command: &Command, threads: Option<usize>) -> Result<Rendered> {
    match command {
        Command::Lambda(a) => lambda(a),
        Command::Tau(a) => tau(a),
        Command::Collide(a) => collide(a),
        Command::Enumerate(a) => enumerate(a),
        Command::Pack(a) => pack(a),
        Command::Check(a) => check(a),
        Command::Simulate(a) => simulate(a, threads),
        Command::VerifyAll(a) => verify_all(a),
    }
}

#[derive(Serialize)]
struct LambdaRecord {
    series: CollisionSeries,
    partial_sum: f64,
    upper_estimate: Option<f64>,
    qstar_bound: Option<QStarBound>,
}

fn lambda(a: &LambdaArgs) -> Result<Rendered> {
    let q = read_probability(&a.q)?;
    let series = lambda_truncated(&q, a.n, a.m)?;
    let bound = if a.m >= 4 { Some(lambda_qstar_bound(a.m)?) } else { None };
    let partial = series.partial_sum();
    let upper = series.upper_estimate();
    let tail = series.tail_bound.value();

    let mut text = String::new();
    let _ = writeln!(text, "q = {q}, N = {}, m = {}", a.n, a.m);
    let _ = writeln!(text, "partial sum c_1..c_N: {partial}");
    match (tail, upper) {
        (Some(t), Some(u)) => {
            let _ = writeln!(text, "certified tail: {t}");
            let _ = writeln!(text, "lambda upper estimate: {u}");
        }
        _ => {
            let _ = writeln!(text, "tail: unbounded (needs m >= 4 and max q_i <= 1/m)");
        }
    }
    if let Some(b) = &bound {
        let _ = writeln!(
            text,
            "packed-vector bound: head {} + tail factor {} = {} <= 10/m = {}",
            b.head, b.tail_factor, b.total, b.target
        );
    }

    let mut csv = series.to_csv();
    let fmt_opt = |x: Option<f64>| x.map_or_else(|| "unbounded".to_string(), |v| v.to_string());
    let _ = writeln!(csv, "partial,{partial}");
    let _ = writeln!(csv, "tail,{}", fmt_opt(tail));
    let _ = writeln!(csv, "total,{}", fmt_opt(upper));
    if let Some(b) = &bound {
        let _ = writeln!(csv, "qstar_bound,{}", b.total);
    }
    let record = record(&LambdaRecord {
        series,
        partial_sum: partial,
        upper_estimate: upper,
        qstar_bound: bound,
    })?;
    Ok(Rendered { text, csv, record, code: 0 })
}

#[derive(Serialize)]
struct TauRecord {
    distribution: MeetingDistribution,
    exact: Option<Vec<String>>,
}

fn tau(a: &TauArgs) -> Result<Rendered> {
    let q = read_probability(&a.q)?;
    let dist = tau_dist(&q, a.m)?;
    let exact = match q.exact() {
        Some(e) => Some(tau_dist_exact(e, a.m)?.iter().map(rational_string).collect::<Vec<_>>()),
        None => None,
    };
    let mut text = String::new();
    let _ = writeln!(text, "q = {q}");
    for (i, p) in dist.probs.iter().enumerate() {
        match &exact {
            Some(e) => {
                let _ = writeln!(text, "Q(tau = {}) = {} = {p}", i + 1, e[i]);
            }
            None => {
                let _ = writeln!(text, "Q(tau = {}) = {p}", i + 1);
            }
        }
    }
    let total: f64 = dist.probs.iter().sum();
    let _ = writeln!(text, "sum = {total}");
    let csv = dist.to_csv();
    let record = record(&TauRecord { distribution: dist, exact })?;
    Ok(Rendered { text, csv, record, code: 0 })
}

#[derive(Serialize)]
struct CollideRecord {
    q: ProbVector,
    /// `c_0, …, c_N`.
    series: Vec<f64>,
    exact: Option<Vec<String>>,
    projection: Vec<ProjectionReport>,
}

fn collide(a: &CollideArgs) -> Result<Rendered> {
    let q = read_probability(&a.q)?;
    let series = collision_series(&q, a.n)?;
    let exact = match q.exact() {
        Some(e) if a.n <= 200 => Some(collision_series_exact(e, a.n)?.iter().map(rational_string).collect::<Vec<_>>()),
        _ => None,
    };
    let projection = if a.projection {
        (1..=a.n).map(|n| projection_check(&q, n)).collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let mut text = String::new();
    let _ = writeln!(text, "q = {q}");
    for (n, c) in series.iter().enumerate().skip(1) {
        match &exact {
            Some(e) => {
                let _ = writeln!(text, "c_{n} = {} = {c}", e[n]);
            }
            None => {
                let _ = writeln!(text, "c_{n} = {c}");
            }
        }
    }
    let mut csv = String::from("n,c_n");
    if a.projection {
        csv.push_str(",projection_right,abs_diff");
    }
    csv.push('\n');
    for (n, c) in series.iter().enumerate().skip(1) {
        let _ = write!(csv, "{n},{c}");
        if let Some(r) = projection.get(n - 1) {
            let _ = write!(csv, ",{},{}", r.right, r.abs_diff);
        }
        csv.push('\n');
    }
    if !projection.is_empty() {
        let worst = projection.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
        let _ = writeln!(text, "projection identity: max |left - right| = {worst:e}");
    }
    let record = record(&CollideRecord {
        q,
        series,
        exact,
        projection,
    })?;
    Ok(Rendered { text, csv, record, code: 0 })
}

fn enumerate(a: &EnumerateArgs) -> Result<Rendered> {
    let params = EdgeParams::new(read_vector(&a.p)?)?;
    if params.p().exact().is_none() {
        return Err(Error::Domain("enumerate needs exact entries".into()));
    }
    let identity_level = match (a.identity, a.m) {
        (true, Some(m)) => Some(m),
        (true, None) => Some(a.n),
        (false, _) => None,
    };
    let levels = a.n.max(identity_level.unwrap_or(0)).max(a.m.unwrap_or(0));
    let oracle = PathOracle::new(&params)?;
    let rec = oracle.record(levels, identity_level)?;
    let mut ok = rec.levels.iter().all(|l| l.second_moment_equal);
    let mut text = String::new();
    let _ = writeln!(text, "p = {}, mu = {}, Var Y0 = {}", rec.p.join(","), rec.mu, rec.var_y0);
    let mut csv = String::from("n,a_n,b_n,w2_direct,w2_recursion,equal\n");
    for l in &rec.levels {
        let _ = writeln!(
            text,
            "n={}: a_n = {}, b_n = {}, E[W_n^2] = {} (recursion {}, {})",
            l.n,
            l.a_n,
            l.b_n,
            l.w2_direct,
            l.w2_recursion,
            if l.second_moment_equal { "equal" } else { "DIFFERENT" }
        );
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            l.n, l.a_n, l.b_n, l.w2_direct, l.w2_recursion, l.second_moment_equal
        );
    }
    if let Some(id) = &rec.identity {
        ok &= id.equal;
        let _ = writeln!(
            text,
            "partition identity at M={}: a_M = {}, sum over {} compositions = {} -> {}",
            id.level,
            id.left,
            id.compositions,
            id.right,
            if id.equal { "exactly equal" } else { "NOT EQUAL" }
        );
    }
    let record = record(&rec)?;
    Ok(Rendered {
        text,
        csv,
        record,
        code: if ok { 0 } else { 4 },
    })
}

#[derive(Serialize)]
#[serde(untagged)]
enum PackRecord {
    Orbit(PackingOrbit),
    Step { before: ProbVector, after: ProbVector },
    Verify(PackMonotoneReport),
}

fn pack(a: &PackArgs) -> Result<Rendered> {
    let q = read_probability(&a.q)?;
    if let Some(n) = a.verify {
        let rep = verify_pack_monotone(&q, a.m, n)?;
        let mut text = String::new();
        let _ = writeln!(
            text,
            "merged pair {:?}: laziness {} -> {} (ordered: {}), block monotone: {}",
            rep.pair, rep.x, rep.x_after, rep.laziness_ordered, rep.block_monotone
        );
        let mut csv = String::from("n,before,after,holds\n");
        for t in &rep.terms {
            let _ = writeln!(csv, "{},{},{},{}", t.n, t.before, t.after, t.holds);
        }
        let bad = rep.terms.iter().filter(|t| !t.holds).count();
        let _ = writeln!(text, "termwise c_n(A(q)) >= c_n(q): {} of {} hold", rep.terms.len() - bad, rep.terms.len());
        let code = if rep.holds() { 0 } else { 4 };
        return Ok(Rendered {
            text,
            csv,
            record: record(&PackRecord::Verify(rep))?,
            code,
        });
    }
    if a.step {
        let after = pack_step(&q, a.m)?;
        let text = format!("{q} -> {after}\n");
        let mut csv = String::from("step");
        for i in 1..=q.dim() {
            let _ = write!(csv, ",q{i}");
        }
        csv.push('\n');
        for (k, v) in [&q, &after].iter().enumerate() {
            let _ = write!(csv, "{k}");
            for x in v.entries() {
                let _ = write!(csv, ",{x}");
            }
            csv.push('\n');
        }
        return Ok(Rendered {
            text,
            csv,
            record: record(&PackRecord::Step { before: q, after })?,
            code: 0,
        });
    }
    let orbit = pack_orbit(&q, a.m)?;
    let mut text = String::new();
    for (k, s) in orbit.steps.iter().enumerate() {
        let _ = writeln!(text, "step {}: {:?} {:?} -> {:?}", k + 1, s.kind, s.pair, s.after);
    }
    let _ = writeln!(text, "reached q* in {} steps (d = {})", orbit.step_count(), q.dim());
    let csv = orbit.to_csv();
    Ok(Rendered {
        text,
        csv,
        record: record(&PackRecord::Orbit(orbit))?,
        code: 0,
    })
}

#[derive(Serialize)]
struct CheckRecord {
    verdict: Verdict,
    certificates: Vec<PercolationCertificate>,
    isotropic_bound: Option<f64>,
}

fn check(a: &CheckArgs) -> Result<Rendered> {
    let mut certificates = Vec::new();
    if let Some(text) = &a.p {
        let p = read_vector(text)?;
        let params = EdgeParams::new(p.clone())?;
        match a.epsilon {
            Some(eps) => certificates.push(check_theorem1(&p, eps)?),
            None if params.mu() > 1.0 => certificates.push(check_theorem1_auto(&p)?),
            None => {}
        }
        if let Some(m) = a.m {
            certificates.push(numeric_certificate(&p, m, a.n)?);
        }
        if params.mu() <= 1.0 || certificates.is_empty() {
            certificates.push(check_subcritical(&p)?);
        }
    }
    let iso = a.isotropic.map(isotropic_bound).transpose()?;
    let verdict = if certificates.iter().any(|c| c.verdict == Verdict::Percolates) {
        Verdict::Percolates
    } else if certificates
        .iter()
        .any(|c| c.route == Route::Subcritical && c.verdict == Verdict::NoPercolation)
    {
        Verdict::NoPercolation
    } else {
        Verdict::Inconclusive
    };
    let mut text = String::new();
    if !certificates.is_empty() {
        let _ = writeln!(text, "overall verdict: {verdict}");
    }
    for c in &certificates {
        text.push('\n');
        text.push_str(&c.to_text());
    }
    if let (Some(d), Some(b)) = (a.isotropic, iso) {
        let _ = writeln!(text, "isotropic bound 1/d + 10/d^2 at d = {d}: {b}");
    }
    let mut csv = String::from("route,verdict,check,left,right,pass\n");
    for c in &certificates {
        for k in &c.checks {
            let _ = writeln!(
                csv,
                "{},{},\"{}\",{},{},{}",
                c.route, c.verdict, k.description, k.left, k.right, k.pass
            );
        }
    }
    if let (Some(d), Some(b)) = (a.isotropic, iso) {
        let _ = writeln!(csv, "isotropic,,\"1/d + 10/d^2 at d = {d}\",{b},,");
    }
    let record = record(&CheckRecord {
        verdict,
        certificates,
        isotropic_bound: iso,
    })?;
    Ok(Rendered { text, csv, record, code: 0 })
}

#[derive(Serialize)]
struct SimulateRecord {
    config_hash: String,
    result: SimResult,
}

fn simulate(a: &SimulateArgs, threads: Option<usize>) -> Result<Rendered> {
    let params = EdgeParams::new(read_vector(&a.p)?)?;
    let mut config = SimConfig {
        params,
        max_level: a.n,
        replicas: a.replicas,
        seed: a.seed,
        track_counts: a.counts,
        count_levels: a.count_levels,
        memory_cap: a.memory_cap_mib.saturating_mul(1 << 20),
        prune_cap: (!a.no_prune).then_some(a.prune_cap),
        threads,
    };
    config.validate()?;
    let (result, meta): (SimResult, RunMetadata) = sim::simulate(&config)?;
    if let Some(path) = &a.metadata {
        let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Invariant(e.to_string()))?;
        std::fs::write(path, json + "\n").map_err(|e| Error::Resource(format!("writing {}: {e}", path.display())))?;
    }
    config.threads = None;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "d = {}, mu = {}, N = {}, R = {}, seed = {}",
        result.dim, result.mu, result.max_level, result.replicas, result.seed
    );
    let _ = writeln!(
        text,
        "survival to level {}: {} ± {} (finite-horizon proxy)",
        result.max_level, result.survival_frac[result.max_level], result.survival_ci[result.max_level]
    );
    if result.pruned_replicas > 0 {
        let _ = writeln!(text, "pruned replicas: {} (survival certified by a subset of the frontier)", result.pruned_replicas);
    }
    if let Some(w) = &result.w {
        let n = result.max_level;
        let _ = writeln!(
            text,
            "mean W_N = {} ± {}, var W_N = {}, mean W_N^2 = {}",
            w.mean_w[n], w.ci_halfwidth[n], w.var_w[n], w.mean_w2[n]
        );
    }
    let _ = writeln!(text, "config hash: {}", meta.config_hash);
    let csv = result.to_csv();
    let record = record(&SimulateRecord {
        config_hash: config.config_hash(),
        result,
    })?;
    Ok(Rendered { text, csv, record, code: 0 })
}

fn verify_all(a: &VerifyAllArgs) -> Result<Rendered> {
    let mut outcomes: Vec<CriterionOutcome> = Vec::new();
    let mut text = String::new();
    for (id, run) in suite::run_all_lazy() {
        if !a.only.is_empty() && !a.only.iter().any(|o| id.starts_with(o.as_str())) {
            continue;
        }
        let o = run();
        let _ = writeln!(text, "{}", o.line());
        outcomes.push(o);
    }
    let gating: Vec<_> = outcomes.iter().filter(|o| !o.informational).collect();
    let passed = gating.iter().filter(|o| o.pass).count();
    let _ = writeln!(text, "{passed}/{} criteria pass", gating.len());
    let mut csv = String::from("id,pass,informational,seconds,detail\n");
    for o in &outcomes {
        let _ = writeln!(
            csv,
            "{},{},{},{},\"{}\"",
            o.id,
            o.pass,
            o.informational,
            o.seconds,
            o.detail.replace('"', "'")
        );
    }
    let code = if passed == gating.len() { 0 } else { 4 };
    Ok(Rendered {
        text,
        csv,
        record: record(&outcomes)?,
        code,
    })
}
