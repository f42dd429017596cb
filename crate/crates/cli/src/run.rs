use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use famsynth::baselines::{
    all_in_one_check, enumerate_consistent, one_by_one, BaselineConfig, EnumerationOutcome,
};
use famsynth::engine::SolverConfig;
use famsynth::format::{parse_document, serialize_document, FamilyDocument};
use famsynth::generator::{random_document, Bounds};
use famsynth::quotient::build_quotient;
use famsynth::smt::{decode_model, encode_feasibility, run_solver, SolverAnswer};
use famsynth::synthesis::{
    feasibility, optimum_synthesis, threshold_synthesis, RefinementConfig, Stats, TraceRecord,
};
use famsynth::{
    Direction, FamilyModel, Measure, Query, Relation, SmtError, Specification, SynthesisError,
};

use crate::args::{BaselineArgs, BenchArgs, GenArgs, InputArgs, Mode, RefineArgs, SmtArgs, SynthArgs};
use crate::report::{
    BaselineReport, BenchReport, BenchRow, Group, MemberRow, Optimum, SmtReport, SynthReport, Timings,
};
use crate::CliError;

fn read_input(path: &Option<PathBuf>) -> Result<FamilyDocument, CliError> {
    let text = match path {
        Some(p) if p != Path::new("-") => {
            fs::read_to_string(p).map_err(|source| CliError::Io { path: p.display().to_string(), source })?
        }
        _ => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|source| CliError::Io { path: "<stdin>".into(), source })?;
            s
        }
    };
    Ok(parse_document(&text)?)
}

/// Which specifications a command accepts when none is named.
#[derive(Clone, Copy)]
enum Want {
    Any,
    Threshold,
    RewardUpperBound,
}

impl Want {
    fn accepts(self, spec: &Specification) -> bool {
        match self {
            Want::Any => true,
            Want::Threshold => spec.threshold().is_some(),
            Want::RewardUpperBound => {
                spec.measure == Measure::Reward && matches!(spec.threshold(), Some((Relation::Le, _)))
            }
        }
    }
}

fn select_spec(doc: &FamilyDocument, name: Option<&str>, want: Want) -> Result<(String, Specification), CliError> {
    match name {
        Some(name) => doc
            .spec(name)
            .map(|s| (name.to_string(), s.clone()))
            .ok_or_else(|| CliError::UnknownSpec(name.to_string())),
        None => doc
            .specs
            .iter()
            .find(|(_, s)| want.accepts(s))
            .cloned()
            .ok_or(CliError::NoSpec),
    }
}

fn solver_config(input: &InputArgs) -> Result<SolverConfig, CliError> {
    if !(input.epsilon > 0.0 && input.epsilon.is_finite()) {
        return Err(CliError::Usage("--epsilon must be positive".into()));
    }
    Ok(SolverConfig { epsilon: input.epsilon, ..SolverConfig::default() })
}

fn refinement_config(input: &InputArgs, refine: &RefineArgs, trace: bool) -> Result<RefinementConfig, CliError> {
    if !(0.0..=1.0).contains(&refine.delta) {
        return Err(CliError::Usage("--delta must lie in [0, 1]".into()));
    }
    if !(refine.tolerance >= 0.0 && refine.tolerance.is_finite()) {
        return Err(CliError::Usage("--tolerance must be non-negative".into()));
    }
    Ok(RefinementConfig {
        delta: refine.delta,
        strategy: refine.strategy.into(),
        queue: refine.queue.into(),
        solver: solver_config(input)?,
        tolerance: refine.tolerance,
        budget: refine.budget,
        parallel: refine.parallel,
        trace,
    })
}

fn member_rows(family: &FamilyModel, outcome: &EnumerationOutcome) -> Vec<MemberRow> {
    outcome
        .members
        .iter()
        .map(|m| MemberRow { realisation: m.realisation.display(family).to_string(), value: m.value, satisfied: m.satisfied })
        .collect()
}

pub fn baseline(command: &'static str, args: &BaselineArgs) -> Result<String, CliError> {
    let doc = read_input(&args.input.input)?;
    let (name, spec) = select_spec(&doc, args.input.spec.as_deref(), Want::Any)?;
    let config = BaselineConfig { cap: args.cap, solver: solver_config(&args.input)?, parallel: args.parallel };
    let family = &doc.model;
    let start = Instant::now();
    let (outcome, build) = match command {
        "check" => (one_by_one(family, &spec, &config)?, Duration::ZERO),
        "allinone" => {
            let aio = all_in_one_check(family, &spec, &config)?;
            (aio.outcome, aio.build_time)
        }
        _ => (enumerate_consistent(family, &spec, &config)?, Duration::ZERO),
    };
    let total = start.elapsed();
    let optimum = match spec.direction() {
        Some(dir) => {
            let (r, v) = outcome
                .optimum(dir)
                .ok_or_else(|| CliError::Undefined("every member has an undefined expected reward".into()))?;
            Some(Optimum { realisation: Some(r.display(family).to_string()), value: Some(v) })
        }
        None => None,
    };
    let report = BaselineReport {
        command,
        spec: name,
        specification: spec.to_string(),
        family_size: family.num_realisations(),
        accepted: outcome.accepted().count(),
        rejected: outcome.rejected().count(),
        undefined: outcome.undefined().count(),
        optimum,
        solver_calls: outcome.solver_calls,
        members: member_rows(family, &outcome),
        timings: args.input.timings.then(|| Timings::new(total, build, total.saturating_sub(build), Duration::ZERO)),
    };
    Ok(report.render(args.input.out))
}

fn group(family: &FamilyModel, subs: &[famsynth::Subfamily]) -> Group {
    Group {
        members: subs.iter().map(famsynth::Subfamily::size).sum(),
        subfamilies: subs.iter().map(|s| s.display(family).to_string()).collect(),
    }
}

fn stats_timings(total: Duration, stats: &Stats) -> Timings {
    Timings::new(total, stats.build_time, stats.check_time, stats.analysis_time)
}

fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<(), CliError> {
    let mut out = String::new();
    for record in trace {
        out.push_str(&serde_json::to_string(record).expect("trace records serialize"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

pub fn synth(args: &SynthArgs) -> Result<String, CliError> {
    let doc = read_input(&args.input.input)?;
    let family = &doc.model;
    let want = match args.mode {
        Mode::Threshold | Mode::Feasibility => Want::Threshold,
        Mode::Max | Mode::Min => Want::Any,
    };
    let (name, mut spec) = select_spec(&doc, args.input.spec.as_deref(), want)?;
    match args.mode {
        Mode::Max => spec.query = Query::Optimum(Direction::Max),
        Mode::Min => spec.query = Query::Optimum(Direction::Min),
        _ => {}
    }
    let config = refinement_config(&args.input, &args.refine, args.trace.is_some())?;
    if let Some(path) = &args.dump_quotient {
        famsynth::format::validate_spec(&spec, family)?;
        fs::write(path, build_quotient(family).dump())
            .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    }
    let start = Instant::now();
    let mut report = SynthReport {
        command: "synth",
        mode: "",
        spec: name,
        specification: spec.to_string(),
        family_size: family.num_realisations(),
        accepted: None,
        rejected: None,
        undefined: None,
        result: None,
        stats: Stats::default(),
        timings: None,
    };
    let trace = match args.mode {
        Mode::Threshold => {
            let out = threshold_synthesis(family, &spec, &config)?;
            report.mode = "threshold";
            report.accepted = Some(group(family, &out.accepted));
            report.rejected = Some(group(family, &out.rejected));
            report.undefined = Some(group(family, &out.undefined));
            report.stats = out.stats;
            out.trace
        }
        Mode::Feasibility => {
            let out = feasibility(family, &spec, &config)?;
            report.mode = "feasibility";
            report.result =
                Some(Optimum { realisation: out.realisation.map(|r| r.display(family).to_string()), value: None });
            report.stats = out.stats;
            out.trace
        }
        Mode::Max | Mode::Min => {
            let out = optimum_synthesis(family, &spec, &config)?;
            report.mode = if args.mode == Mode::Max { "max" } else { "min" };
            let Some(r) = out.realisation else {
                return Err(CliError::Undefined("every member has an undefined expected reward".into()));
            };
            report.result = Some(Optimum { realisation: Some(r.display(family).to_string()), value: out.value });
            report.stats = out.stats;
            out.trace
        }
    };
    if args.input.timings {
        report.timings = Some(stats_timings(start.elapsed(), &report.stats));
    }
    if let Some(path) = &args.trace {
        write_trace(path, &trace)?;
    }
    Ok(report.render(args.input.out))
}

pub fn smt_export(args: &SmtArgs) -> Result<String, CliError> {
    let doc = read_input(&args.input.input)?;
    let family = &doc.model;
    let (name, spec) = select_spec(&doc, args.input.spec.as_deref(), Want::RewardUpperBound)?;
    let quotient = build_quotient(family);
    let encoding = encode_feasibility(&quotient, &spec, &family.full_subfamily())?;
    if !args.solve {
        return Ok(encoding.text);
    }
    let answer = run_solver(&args.solver, &encoding.text, Duration::from_secs(args.timeout))?;
    let realisation = match answer {
        SolverAnswer::Sat(model) => Some(decode_model(family, &encoding, &model)?),
        SolverAnswer::Unsat => None,
        SolverAnswer::Unknown(line) => {
            return Err(SmtError::Solver(format!("unexpected solver answer `{line}`")).into());
        }
    };
    let report = SmtReport {
        command: "smt-export",
        spec: name,
        specification: spec.to_string(),
        variables: encoding.variable_count(),
        satisfiable: realisation.is_some(),
        realisation: realisation.map(|r| r.display(family).to_string()),
    };
    Ok(report.render(args.input.out))
}

pub fn gen(args: &GenArgs) -> Result<String, CliError> {
    let max = Bounds::MAX;
    if args.states == 0 || args.params == 0 || args.domain == 0 {
        return Err(CliError::Usage("generator bounds must be positive".into()));
    }
    if args.states > max.states || args.params > max.params || args.domain > max.domain {
        return Err(CliError::Usage(format!(
            "generator bounds are limited to {} states, {} parameters and domains of {}",
            max.states, max.params, max.domain
        )));
    }
    let doc = random_document(args.seed, Bounds::new(args.states, args.params, args.domain));
    Ok(serialize_document(&doc))
}

fn skipped(approach: &'static str, e: &SynthesisError) -> Option<BenchRow> {
    matches!(e, SynthesisError::SizeCap { .. }).then(|| BenchRow {
        approach,
        timings: None,
        iterations: None,
        accepted: None,
        rejected: None,
        undefined: None,
        value: None,
        note: Some(e.to_string()),
    })
}

fn baseline_row(
    approach: &'static str,
    spec: &Specification,
    result: Result<(EnumerationOutcome, Duration), SynthesisError>,
) -> Result<BenchRow, CliError> {
    match result {
        Ok((out, build)) => {
            let total = out.elapsed;
            let value = spec.direction().and_then(|d| out.optimum(d)).map(|(_, v)| v);
            let threshold = spec.threshold().is_some();
            Ok(BenchRow {
                approach,
                timings: Some(Timings::new(total, build, total.saturating_sub(build), Duration::ZERO)),
                iterations: Some(out.solver_calls),
                accepted: threshold.then(|| out.accepted().count() as u128),
                rejected: threshold.then(|| out.rejected().count() as u128),
                undefined: Some(out.undefined().count() as u128),
                value,
                note: None,
            })
        }
        Err(e) => skipped(approach, &e).ok_or_else(|| e.into()),
    }
}

pub fn bench(args: &BenchArgs) -> Result<String, CliError> {
    let doc = read_input(&args.input.input)?;
    let family = &doc.model;
    let (name, spec) = select_spec(&doc, args.input.spec.as_deref(), Want::Any)?;
    let base = BaselineConfig { cap: args.cap, solver: solver_config(&args.input)?, parallel: false };
    let mut rows = vec![
        baseline_row("one-by-one", &spec, one_by_one(family, &spec, &base).map(|o| (o, Duration::ZERO)))?,
        baseline_row(
            "all-in-one",
            &spec,
            all_in_one_check(family, &spec, &base).map(|a| (a.outcome, a.build_time)),
        )?,
        baseline_row("enumeration", &spec, enumerate_consistent(family, &spec, &base).map(|o| (o, Duration::ZERO)))?,
    ];
    let config = refinement_config(&args.input, &args.refine, false)?;
    let start = Instant::now();
    let row = if spec.threshold().is_some() {
        let out = threshold_synthesis(family, &spec, &config)?;
        BenchRow {
            approach: "refinement",
            timings: Some(stats_timings(start.elapsed(), &out.stats)),
            iterations: Some(out.stats.iterations),
            accepted: Some(out.accepted_members()),
            rejected: Some(out.rejected_members()),
            undefined: Some(out.undefined_members()),
            value: None,
            note: None,
        }
    } else {
        let out = optimum_synthesis(family, &spec, &config)?;
        BenchRow {
            approach: "refinement",
            timings: Some(stats_timings(start.elapsed(), &out.stats)),
            iterations: Some(out.stats.iterations),
            accepted: None,
            rejected: None,
            undefined: None,
            value: out.value,
            note: None,
        }
    };
    rows.push(row);
    let report = BenchReport {
        command: "bench",
        spec: name,
        specification: spec.to_string(),
        family_size: family.num_realisations(),
        rows,
    };
    Ok(report.render(args.input.out))
}

/// Writes `text` to standard output, ignoring a closed pipe.
pub fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
}
