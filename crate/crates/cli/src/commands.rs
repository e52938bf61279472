use std::time::Instant;

use odecheck::estimation::{nls_estimate, two_step_estimate, EstimationResult, NlsConfig, TwoStepConfig};
use odecheck::gof::{
    gm_test, im_test, smoothed_state_into, state_bandwidths, tm_test_with_theta, GmConfig, ImConfig, TestId, TestKind,
    TestReport, TmConfig,
};
use odecheck::io::{
    ingest_csv, ingest_forcing_csv, mc_table_tsv, plot_tsv, sig6, test_reports_tsv, to_json, trajectory_plot_data,
    write_output,
};
use odecheck::ode::{ModelRegistry, RegistryEntry, Study1Variant};
use odecheck::sim::{run_study, verify_local_alt_equivalence, AltFamily, LocalAlternativeSpec, StudySpec};
use odecheck::smoothing::{BandwidthOptions, ObservationSet};
use odecheck::Error;
use serde_json::json;

use crate::args::{
    AltChoice, Cli, Command, EstimateArgs, LocalAltArgs, MethodChoice, ModelArgs, OutFormat, OutputArgs, RegistryArgs,
    SimulateArgs, TestArgs, TestChoice,
};

pub enum Failure {
    Usage(String),
    Compute(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Compute(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Configuration problems found before any computation are usage errors.
fn checked(r: odecheck::Result<()>) -> Outcome {
    r.map_err(|e| match e {
        Error::Config(m) => usage(m),
        other => usage(other.to_string()),
    })
}

pub fn run(cli: Cli) -> Outcome {
    match &cli.command {
        Command::Test(a) => test(&cli, a),
        Command::Estimate(a) => estimate(&cli, a),
        Command::Simulate(a) => simulate(&cli, a),
        Command::VerifyLocalAlt(a) => verify_local_alt(&cli, a),
        Command::Registry(a) => registry(a),
    }
}

fn emit(out: &OutputArgs, json: String, tsv: impl FnOnce() -> odecheck::Result<String>) -> Outcome {
    let content = match out.format {
        OutFormat::Json => json,
        OutFormat::Tsv => tsv()?,
    };
    write_output(out.out.as_deref(), &content)?;
    Ok(())
}

struct Setup {
    entry: RegistryEntry,
    data: ObservationSet,
    x0: Vec<f64>,
    initial: Vec<f64>,
}

fn positive(name: &str, v: Option<f64>) -> Outcome {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(usage(format!("--{name} must be positive, got {x}"))),
        _ => Ok(()),
    }
}

fn setup(m: &ModelArgs, data_path: &std::path::Path) -> std::result::Result<Setup, Failure> {
    if !(m.tau > 0.0 && m.tau.is_finite()) {
        return Err(usage(format!("--tau must be positive, got {}", m.tau)));
    }
    let forcing = match &m.forcing {
        Some(path) => Some(ingest_forcing_csv(path)?),
        None => None,
    };
    let entry = ModelRegistry::lookup_with(&m.model, m.tau, forcing).map_err(|e| usage(e.to_string()))?;
    let (p, q) = (entry.model.p(), entry.model.q());
    let x0 = m.x0.clone().unwrap_or_else(|| entry.x0.clone());
    if x0.len() != p {
        return Err(usage(format!("--x0 needs {p} values, got {}", x0.len())));
    }
    let initial = m.initial.clone().unwrap_or_else(|| entry.theta.clone());
    if initial.len() != q {
        return Err(usage(format!("--initial needs {q} values, got {}", initial.len())));
    }
    let raw = ingest_csv(data_path)?;
    if raw.dim() != p {
        return Err(Error::Schema(format!("model `{}` has {p} states but the data have {} columns", entry.key, raw.dim())).into());
    }
    let times = raw.times().to_vec();
    let (first, last) = (times[0], times[times.len() - 1]);
    let span = match &m.span {
        Some(s) if s.len() == 2 && s[0] < s[1] => (s[0], s[1]),
        Some(_) => return Err(usage("--span takes two increasing values a,b")),
        None if entry.span.0 <= first && last <= entry.span.1 => entry.span,
        None => (first, last),
    };
    let rows = (0..raw.len()).map(|i| raw.row(i).to_vec()).collect();
    let data = ObservationSet::new(times, rows, Some(span))?;
    Ok(Setup { entry, data, x0, initial })
}

fn components(requested: &Option<Vec<usize>>, p: usize) -> std::result::Result<Vec<usize>, Failure> {
    match requested {
        None => Ok((0..p).collect()),
        Some(list) => list
            .iter()
            .map(|&k| {
                if (1..=p).contains(&k) {
                    Ok(k - 1)
                } else {
                    Err(usage(format!("--component must lie in 1..={p}, got {k}")))
                }
            })
            .collect(),
    }
}

fn theta_override(theta: &Option<Vec<f64>>, q: usize) -> std::result::Result<Option<Vec<f64>>, Failure> {
    match theta {
        Some(t) if t.len() != q => Err(usage(format!("--theta needs {q} values, got {}", t.len()))),
        other => Ok(other.clone()),
    }
}

fn test(cli: &Cli, a: &TestArgs) -> Outcome {
    let s = setup(&a.model, &a.data)?;
    let model = &s.entry.model;
    let (p, q) = (model.p(), model.q());
    let comps = components(&a.component, p)?;
    let theta = theta_override(&a.theta, q)?;
    for (name, v) in [("h", a.h), ("h0", a.h0), ("h1", a.h1), ("h-e", a.h_e), ("c", a.c)] {
        positive(name, v)?;
    }
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(usage(format!("--level must lie in (0, 1), got {}", a.level)));
    }

    let tm_cfg = TmConfig {
        nls: NlsConfig {
            multistart: a.multistart,
            seed: a.seed,
            initial: Some(s.initial.clone()),
            ..Default::default()
        },
        h: a.h,
        level: a.level,
    };
    let two_step = |k: usize| TwoStepConfig {
        component: k,
        m: a.m,
        h_e: a.h_e,
        delta_w: a.delta_w,
        multistart: a.multistart,
        seed: a.seed,
        initial: Some(s.initial.clone()),
        ..Default::default()
    };
    let im_cfg = |k: usize, th: Vec<f64>| ImConfig {
        h: a.h,
        h0: a.h0,
        adjusted: !a.im_plain,
        n_l: a.n_l,
        level: a.level,
        two_step: two_step(k),
        theta: Some(th),
        ..Default::default()
    };
    let gm_cfg = |k: usize, th: Vec<f64>| GmConfig {
        c: a.c.unwrap_or(if s.entry.key == "study1" { 1.0 } else { 0.2 }),
        h: a.h,
        h0: a.h0,
        h1: a.h1,
        split_seed: a.seed,
        level: a.level,
        two_step: two_step(k),
        theta: Some(th),
        ..Default::default()
    };
    checked(tm_cfg.nls.validate())?;
    checked(two_step(0).validate())?;
    checked(im_cfg(0, s.initial.clone()).validate())?;
    checked(gm_cfg(0, s.initial.clone()).validate())?;

    let wants = |kind: TestChoice| a.test == kind || a.test == TestChoice::All;
    let mut reports: Vec<TestReport> = Vec::new();
    if wants(TestChoice::Tm) {
        let th = match &theta {
            Some(t) => t.clone(),
            None => nls_estimate(model, &s.data, &s.x0, &tm_cfg.nls)?.theta_hat,
        };
        reports.push(tm_test_with_theta(&s.data, model, &s.x0, &th, &tm_cfg)?);
    }
    if wants(TestChoice::Im) || wants(TestChoice::Gm) {
        for &k in &comps {
            let th = match &theta {
                Some(t) => t.clone(),
                None => two_step_estimate(model, &s.data, &two_step(k))?.theta_hat,
            };
            if wants(TestChoice::Im) {
                reports.push(im_test(&s.data, model, k, &im_cfg(k, th.clone()))?);
            }
            if wants(TestChoice::Gm) {
                reports.push(gm_test(&s.data, model, k, &gm_cfg(k, th))?);
            }
        }
    }

    if let Some(path) = &a.plot_data {
        let h0 = state_bandwidths(&s.data, a.h0, &BandwidthOptions::default())?;
        let mut header = vec!["t".to_string()];
        header.extend((1..=p).map(|k| format!("y{k}")));
        header.extend((1..=p).map(|k| format!("xhat{k}")));
        let mut rows = Vec::with_capacity(s.data.len());
        let mut xhat = vec![0.0; p];
        for (i, &t) in s.data.times().iter().enumerate() {
            smoothed_state_into(&s.data, &h0, t, &mut xhat)?;
            let mut row = vec![t];
            row.extend_from_slice(s.data.row(i));
            row.extend_from_slice(&xhat);
            rows.push(row);
        }
        write_output(Some(path), &plot_tsv(&header, &rows))?;
    }

    let doc = json!({
        "command": "test",
        "model": s.entry.key,
        "span": s.data.span(),
        "x0": s.x0,
        "threads": cli.threads,
        "arguments": a,
        "reports": reports,
    });
    emit(&a.output, to_json(&doc)?, || Ok(test_reports_tsv(&reports)))
}

fn estimate(_cli: &Cli, a: &EstimateArgs) -> Outcome {
    let s = setup(&a.model, &a.data)?;
    let model = &s.entry.model;
    let p = model.p();
    if !(1..=p).contains(&a.component) {
        return Err(usage(format!("--component must lie in 1..={p}, got {}", a.component)));
    }
    positive("h-e", a.h_e)?;
    let result: EstimationResult = match a.method {
        MethodChoice::Nls => {
            let cfg = NlsConfig {
                multistart: a.multistart,
                seed: a.seed,
                initial: Some(s.initial.clone()),
                ..Default::default()
            };
            checked(cfg.validate())?;
            nls_estimate(model, &s.data, &s.x0, &cfg)?
        }
        MethodChoice::Twostep => {
            let cfg = TwoStepConfig {
                component: a.component - 1,
                m: a.m,
                h_e: a.h_e,
                delta_w: a.delta_w,
                multistart: a.multistart,
                seed: a.seed,
                initial: Some(s.initial.clone()),
                ..Default::default()
            };
            checked(cfg.validate())?;
            two_step_estimate(model, &s.data, &cfg)?
        }
    };
    if let Some(path) = &a.plot_data {
        let (header, rows) = trajectory_plot_data(model, &result.theta_hat, &s.x0, s.data.span(), a.plot_points)?;
        write_output(Some(path), &plot_tsv(&header, &rows))?;
    }
    let doc = json!({
        "command": "estimate",
        "model": s.entry.key,
        "span": s.data.span(),
        "x0": s.x0,
        "arguments": a,
        "estimate": result,
    });
    emit(&a.output, to_json(&doc)?, || {
        let mut out = String::from("parameter\tvalue\tunidentified\n");
        for (i, (v, u)) in result.theta_hat.iter().zip(&result.unidentified).enumerate() {
            out.push_str(&format!("theta{}\t{}\t{}\n", i + 1, sig6(*v), u));
        }
        Ok(out)
    })
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Outcome {
    let mut spec = StudySpec::study(a.study).map_err(|e| usage(e.to_string()))?;
    spec.variant = a.variant.parse::<Study1Variant>().map_err(|e| usage(e.to_string()))?;
    spec.alpha = a.alpha;
    spec.beta = a.beta;
    spec.n = a.n;
    spec.replications = a.reps;
    spec.sigma_eps = a.sigma;
    spec.tau = a.tau;
    spec.level = a.level;
    spec.seed = a.seed;
    spec.x0 = a.x0.clone();
    spec.oracle_theta = a.oracle_theta;
    spec.c = a.c;
    spec.nls_multistart = a.multistart;
    spec.two_step_multistart = a.multistart;
    spec.keep_replications = a.keep_replications;
    if let Some(list) = &a.tests {
        spec.tests = list
            .iter()
            .map(|t| TestId::parse(t).ok_or_else(|| usage(format!("unknown test `{t}`; use tm, imK or gmK"))))
            .collect::<std::result::Result<_, _>>()?;
    }
    if let Some(family) = a.local_alt {
        let family = match family {
            AltChoice::Trajectory => AltFamily::Trajectory,
            AltChoice::Derivative => AltFamily::Derivative,
        };
        if a.alt_components.contains(&0) {
            return Err(usage("--alt-components are one-based"));
        }
        let comps = a.alt_components.iter().map(|k| k - 1).collect();
        spec.local_alt = Some(LocalAlternativeSpec::new(family, a.delta, comps));
    }
    checked(spec.validate())?;
    if spec.tests.iter().any(|t| t.kind != TestKind::Tm && t.component.is_none()) {
        return Err(usage("IM and GM tests need a component"));
    }

    let start = Instant::now();
    let report = run_study(&spec, cli.threads)?;
    eprintln!(
        "{} replications in {:.1} s",
        spec.replications,
        start.elapsed().as_secs_f64()
    );
    let json = to_json(&report)?;
    emit(&a.output, json, || mc_table_tsv(std::slice::from_ref(&report)))
}

fn verify_local_alt(_cli: &Cli, a: &LocalAltArgs) -> Outcome {
    if a.model == "tcell" {
        return Err(usage("local alternatives are defined for study1, fhn and lotka-volterra"));
    }
    let entry = ModelRegistry::lookup_with(&a.model, a.tau, None).map_err(|e| usage(e.to_string()))?;
    let p = entry.model.p();
    let l = move |t: f64| {
        (0..p)
            .map(|k| {
                let w = std::f64::consts::TAU * t;
                if k % 2 == 0 { w.sin() } else { w.cos() }
            })
            .collect::<Vec<f64>>()
    };
    let diag = verify_local_alt_equivalence(&entry.model, &entry.theta, &entry.x0, l, &a.deltas, entry.span, a.grid_points)
        .map_err(|e| match e {
            Error::Config(m) => usage(m),
            other => Failure::Compute(other),
        })?;
    let doc = json!({
        "command": "verify-local-alt",
        "model": entry.key,
        "arguments": a,
        "diagnostic": diag,
    });
    emit(&a.output, to_json(&doc)?, || {
        let mut out = String::from("delta\tresidual\tratio\n");
        for (i, (d, r)) in diag.deltas.iter().zip(&diag.residuals).enumerate() {
            let ratio = diag.ratios.get(i).copied().flatten().map(sig6).unwrap_or_else(|| "NA".into());
            out.push_str(&format!("{}\t{}\t{}\n", sig6(*d), sig6(*r), ratio));
        }
        out.push_str(&format!("# passed\t{}\n", diag.passed));
        Ok(out)
    })
}

fn registry(a: &RegistryArgs) -> Outcome {
    if a.list || a.show.is_none() {
        let mut out = String::new();
        for key in ModelRegistry::keys() {
            let e = ModelRegistry::lookup(key)?;
            out.push_str(&format!("{}\tp={}\tq={}\t{}\n", e.key, e.model.p(), e.model.q(), e.description));
        }
        write_output(None, &out)?;
    }
    if let Some(key) = &a.show {
        let e = ModelRegistry::lookup(key).map_err(|e| usage(e.to_string()))?;
        let doc = json!({
            "key": e.key,
            "description": e.description,
            "p": e.model.p(),
            "q": e.model.q(),
            "theta": e.theta,
            "x0": e.x0,
            "tau": e.tau,
            "span": e.span,
        });
        write_output(None, &to_json(&doc)?)?;
    }
    Ok(())
}
