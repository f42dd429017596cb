//! SMT-LIB2 encoding of reward feasibility and the bridge to an external
//! solver.
//!
//! The problem asks for a consistent scheduler of the restricted quotient
//! whose expected reward from the initial state is at most the threshold.
//! One boolean `sigma_<s>_<i>` stands for the `i`-th in-subfamily signature
//! of state `s`, so a model maps straight back to parameter values.

use std::fmt::Write as _;
use std::io::{Read, Write as _};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use num_rational::BigRational;
use num_traits::Signed;

use crate::engine::{prob0_exists, prob1_forall, solve_mc, SolverConfig};
use crate::error::SmtError;
use crate::exact::exact_check;
use crate::family::{FamilyModel, Measure, ParamId, Realisation, Relation, Specification, StateId, Subfamily};
use crate::quotient::Quotient;

/// One selectable signature of a state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Choice {
    pub state: StateId,
    pub assignment: Vec<(ParamId, StateId)>,
    pub name: String,
}

/// An emitted problem together with what is needed to decode its models.
#[derive(Debug, Clone)]
pub struct SmtEncoding {
    pub text: String,
    pub choices: Vec<Choice>,
    pub num_states: usize,
    /// States outside `pOneA` (prob-1 propagation applies).
    pub relevant: Vec<StateId>,
    /// States in `pZeroE` (positive-probability propagation applies).
    pub critical: Vec<StateId>,
    pub subfamily: Subfamily,
    pub spec: Specification,
}

impl SmtEncoding {
    /// Declared variables: `e`, `p1G`, `pPG` and `o` per state plus one
    /// `sigma` per choice.
    pub fn variable_count(&self) -> usize {
        4 * self.num_states + self.choices.len()
    }
}

fn real(value: &BigRational) -> String {
    let numer = value.numer().abs();
    let body = if value.denom() == &1.into() {
        format!("{numer}.0")
    } else {
        format!("(/ {numer}.0 {}.0)", value.denom())
    };
    if value.is_negative() { format!("(- {body})") } else { body }
}

fn conflict(a: &[(ParamId, StateId)], b: &[(ParamId, StateId)]) -> bool {
    a.iter().any(|(k, v)| b.iter().any(|(l, w)| k == l && v != w))
}

/// Emits the feasibility problem for `E<=kappa F goal` over the quotient
/// restricted to `sub`.
pub fn encode_feasibility(quotient: &Quotient<'_>, spec: &Specification, sub: &Subfamily) -> Result<SmtEncoding, SmtError> {
    let family = quotient.family();
    let kappa = match spec.threshold() {
        Some((Relation::Le, kappa)) if spec.measure == Measure::Reward => kappa.clone(),
        _ => return Err(SmtError::UnsupportedSpec(spec.to_string())),
    };
    crate::format::validate_spec(spec, family)?;
    let rewards = family.rewards().ok_or(crate::error::ModelError::MissingRewards)?;
    let goal = family.goal_mask(&spec.goal)?;
    let n = family.num_states();
    let view = quotient.restrict(sub);
    let p_one_all = prob1_forall(&view, &goal);
    let p_zero_exists = prob0_exists(&view, &goal);
    let relevant: Vec<StateId> = (0..n).filter(|&s| !p_one_all[s]).collect();
    let critical: Vec<StateId> = (0..n).filter(|&s| p_zero_exists[s]).collect();

    // Choices: every signature inside the subfamily, with its distribution.
    let mut choices = Vec::new();
    // Per state: (choice index, distribution).
    type Options<'a> = Vec<(usize, &'a [(StateId, BigRational)])>;
    let mut per_state: Vec<Options<'_>> = vec![Vec::new(); n];
    #[allow(clippy::needless_range_loop)]
    for s in 0..n {
        let support = quotient.support(s);
        let mut i = 0;
        for action in quotient.actions(s) {
            for sig in &action.signatures {
                if support.iter().zip(sig).all(|(&k, &v)| sub.allows(k, v)) {
                    per_state[s].push((choices.len(), &action.distribution));
                    choices.push(Choice {
                        state: s,
                        assignment: support.iter().copied().zip(sig.iter().copied()).collect(),
                        name: format!("sigma_{s}_{i}"),
                    });
                    i += 1;
                }
            }
        }
    }

    let mut t = String::new();
    let _ = writeln!(t, "; feasibility of {spec} over {}", sub.display(family));
    let _ = writeln!(t, "(set-logic QF_LRA)");
    let _ = writeln!(t, "(set-option :produce-models true)");
    for s in 0..n {
        let _ = writeln!(t, "(declare-fun e_{s} () Real)");
    }
    for c in &choices {
        let _ = writeln!(t, "(declare-fun {} () Bool)", c.name);
    }
    for s in 0..n {
        let _ = writeln!(t, "(declare-fun p1G_{s} () Bool)");
    }
    for s in 0..n {
        let _ = writeln!(t, "(declare-fun pPG_{s} () Bool)");
    }
    for s in 0..n {
        let _ = writeln!(t, "(declare-fun o_{s} () Real)");
    }
    for s in 0..n {
        let _ = writeln!(t, "(assert (>= e_{s} 0.0))");
    }

    let s0 = family.initial();
    let _ = writeln!(t, "; threshold at the initial state");
    let _ = writeln!(t, "(assert (and (<= e_{s0} {}) p1G_{s0}))", real(&kappa));

    let _ = writeln!(t, "; goal states");
    for s in (0..n).filter(|&s| goal[s]) {
        let _ = writeln!(t, "(assert (= e_{s} 0.0))");
    }

    let _ = writeln!(t, "; reward upper bounds where the goal is reached almost surely");
    for s in (0..n).filter(|&s| !goal[s]) {
        for (c, dist) in &per_state[s] {
            let terms: Vec<String> = dist.iter().map(|(u, p)| format!("(* {} e_{u})", real(p))).collect();
            let _ = writeln!(
                t,
                "(assert (=> (and {} p1G_{s}) (>= e_{s} (+ {} {}))))",
                choices[*c].name,
                real(&rewards[s]),
                terms.join(" ")
            );
        }
    }

    let _ = writeln!(t, "; one choice per state");
    for options in &per_state {
        let names: Vec<&str> = options.iter().map(|(c, _)| choices[*c].name.as_str()).collect();
        let _ = writeln!(t, "(assert (or {}))", names.join(" "));
        for i in 0..names.len() {
            for j in i + 1..names.len() {
                let _ = writeln!(t, "(assert (not (and {} {})))", names[i], names[j]);
            }
        }
    }

    let _ = writeln!(t, "; consistency across states");
    for a in 0..choices.len() {
        for b in a + 1..choices.len() {
            let (x, y) = (&choices[a], &choices[b]);
            if x.state != y.state && conflict(&x.assignment, &y.assignment) {
                let _ = writeln!(t, "(assert (not (and {} {})))", x.name, y.name);
            }
        }
    }

    let _ = writeln!(t, "; states reaching the goal almost surely under every scheduler");
    for s in (0..n).filter(|&s| p_one_all[s]) {
        let _ = writeln!(t, "(assert p1G_{s})");
    }

    let _ = writeln!(t, "; almost-sure reachability");
    for &s in &relevant {
        for (c, dist) in &per_state[s] {
            let succ: Vec<String> = dist.iter().map(|(u, _)| format!("p1G_{u}")).collect();
            let _ = writeln!(t, "(assert (=> {} (= p1G_{s} (and {} pPG_{s}))))", choices[*c].name, succ.join(" "));
        }
    }

    let _ = writeln!(t, "; positive reachability without cycles");
    for &s in &critical {
        for (c, dist) in &per_state[s] {
            let succ: Vec<String> = dist.iter().map(|(u, _)| format!("(and pPG_{u} (< o_{s} o_{u}))")).collect();
            let _ = writeln!(t, "(assert (=> {} (= pPG_{s} (or {}))))", choices[*c].name, succ.join(" "));
        }
    }

    let _ = writeln!(t, "(check-sat)");
    let names: Vec<&str> = choices.iter().map(|c| c.name.as_str()).collect();
    let _ = writeln!(t, "(get-value ({}))", names.join(" "));
    Ok(SmtEncoding {
        text: t,
        choices,
        num_states: n,
        relevant,
        critical,
        subfamily: sub.clone(),
        spec: spec.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn parse_sexps(text: &str) -> Result<Vec<Sexp>, SmtError> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut atom = String::new();
    let mut chars = text.chars().peekable();
    let flush = |atom: &mut String, stack: &mut Vec<Vec<Sexp>>| {
        if !atom.is_empty() {
            stack.last_mut().expect("open list").push(Sexp::Atom(std::mem::take(atom)));
        }
    };
    while let Some(c) = chars.next() {
        match c {
            '(' => {
                flush(&mut atom, &mut stack);
                stack.push(Vec::new());
            }
            ')' => {
                flush(&mut atom, &mut stack);
                let list = stack.pop().expect("open list");
                stack
                    .last_mut()
                    .ok_or_else(|| SmtError::MalformedModel("unbalanced parenthesis".into()))?
                    .push(Sexp::List(list));
            }
            ';' => {
                flush(&mut atom, &mut stack);
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '|' => {
                for c in chars.by_ref() {
                    if c == '|' {
                        break;
                    }
                    atom.push(c);
                }
            }
            c if c.is_whitespace() => flush(&mut atom, &mut stack),
            c => atom.push(c),
        }
    }
    flush(&mut atom, &mut stack);
    if stack.len() != 1 {
        return Err(SmtError::MalformedModel("unbalanced parenthesis".into()));
    }
    Ok(stack.pop().expect("top level"))
}

/// Collects `name -> bool` from `((name value) ...)` or `define-fun` forms.
fn boolean_bindings(items: &[Sexp], out: &mut Vec<(String, bool)>) {
    for item in items {
        let Sexp::List(list) = item else { continue };
        match list.as_slice() {
            [Sexp::Atom(name), Sexp::Atom(v)] if v == "true" || v == "false" => out.push((name.clone(), v == "true")),
            [Sexp::Atom(df), Sexp::Atom(name), Sexp::List(args), Sexp::Atom(sort), Sexp::Atom(v)]
                if df == "define-fun" && args.is_empty() && sort == "Bool" =>
            {
                out.push((name.clone(), v == "true"));
            }
            _ => boolean_bindings(list, out),
        }
    }
}

/// Reads a satisfying assignment and returns the member it selects,
/// checked against the specification.
///
/// Parameters no choice mentions take the first value of their subset.
pub fn decode_model(family: &FamilyModel, encoding: &SmtEncoding, model: &str) -> Result<Realisation, SmtError> {
    let mut bindings = Vec::new();
    boolean_bindings(&parse_sexps(model)?, &mut bindings);
    let mut chosen: Vec<Option<usize>> = vec![None; encoding.num_states];
    for (i, c) in encoding.choices.iter().enumerate() {
        let value = bindings
            .iter()
            .find(|(name, _)| name == &c.name)
            .map(|(_, v)| *v)
            .ok_or_else(|| SmtError::MalformedModel(format!("no value for {}", c.name)))?;
        if value {
            if chosen[c.state].is_some() {
                return Err(SmtError::MalformedModel(format!("two choices at state {}", c.state)));
            }
            chosen[c.state] = Some(i);
        }
    }
    let mut values: Vec<Option<StateId>> = vec![None; family.params().len()];
    for (s, c) in chosen.iter().enumerate() {
        let c = c.ok_or_else(|| SmtError::MalformedModel(format!("no choice at state {s}")))?;
        for &(k, v) in &encoding.choices[c].assignment {
            match values[k] {
                Some(w) if w != v => {
                    return Err(SmtError::MalformedModel(format!(
                        "parameter {} takes two values",
                        family.params()[k].name
                    )));
                }
                _ => values[k] = Some(v),
            }
        }
    }
    let r = Realisation::new(
        values.iter().enumerate().map(|(k, v)| v.unwrap_or(encoding.subfamily.subset(k)[0])).collect(),
    );
    verify(family, &encoding.spec, &r)?;
    Ok(r)
}

/// Confirms `r` satisfies the specification: float engine first, exact
/// solver when the float value is too close to call.
fn verify(family: &FamilyModel, spec: &Specification, r: &Realisation) -> Result<(), SmtError> {
    let goal = family.goal_mask(&spec.goal)?;
    let mc = family.instantiate(r)?;
    let verdict = match solve_mc(&mc, spec, &goal, &SolverConfig::default()) {
        Ok(v) => v,
        Err(crate::error::SolveError::UndefinedReward { .. }) => {
            return Err(SmtError::VerificationFailed { value: "undefined".into() });
        }
        Err(e) => return Err(e.into()),
    };
    let (_, threshold) = spec.threshold().expect("threshold specification");
    let t: f64 = num_traits::ToPrimitive::to_f64(threshold).unwrap_or(f64::NAN);
    if verdict.satisfied == Some(true) && (verdict.value - t).abs() > 1e-6 {
        return Ok(());
    }
    match exact_check(&mc, spec, &goal)? {
        (_, Some(true)) => Ok(()),
        (value, _) => Err(SmtError::VerificationFailed { value: format!("{value:?}") }),
    }
}

/// Answer of an external solver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverAnswer {
    /// Satisfiable, with the rest of the output (the model).
    Sat(String),
    Unsat,
    Unknown(String),
}

/// Runs `command` (split on whitespace) with the path of a file holding
/// `problem` as its last argument.
pub fn run_solver(command: &str, problem: &str, timeout: Duration) -> Result<SolverAnswer, SmtError> {
    let mut parts = command.split_whitespace();
    let program = parts.next().ok_or_else(|| SmtError::Solver("empty solver command".into()))?;
    let mut file = tempfile::Builder::new().suffix(".smt2").tempfile()?;
    file.write_all(problem.as_bytes())?;
    file.flush()?;
    let mut child = Command::new(program)
        .args(parts)
        .arg(file.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| SmtError::Solver(format!("cannot start `{program}`: {e}")))?;
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut out = String::new();
        let _ = stdout.read_to_string(&mut out);
        out
    });
    let start = Instant::now();
    loop {
        if child.try_wait()?.is_some() {
            break;
        }
        if start.elapsed() > timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Err(SmtError::Timeout(timeout));
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    let out = reader.join().map_err(|_| SmtError::Solver("reader thread panicked".into()))?;
    let mut lines = out.lines();
    let first = lines.by_ref().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    let rest: String = lines.collect::<Vec<_>>().join("\n");
    Ok(match first {
        "sat" => SolverAnswer::Sat(rest),
        "unsat" => SolverAnswer::Unsat,
        other => SolverAnswer::Unknown(other.to_string()),
    })
}

/// Encodes, solves and decodes in one go. `Ok(None)` means unsatisfiable.
pub fn solve_feasibility(
    quotient: &Quotient<'_>,
    spec: &Specification,
    sub: &Subfamily,
    command: &str,
    timeout: Duration,
) -> Result<Option<Realisation>, SmtError> {
    let encoding = encode_feasibility(quotient, spec, sub)?;
    match run_solver(command, &encoding.text, timeout)? {
        SolverAnswer::Sat(model) => decode_model(quotient.family(), &encoding, &model).map(Some),
        SolverAnswer::Unsat => Ok(None),
        SolverAnswer::Unknown(line) => Err(SmtError::Solver(format!("unexpected solver answer `{line}`"))),
    }
}
