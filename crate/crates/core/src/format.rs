//! The `.fmc` family-model format and the specification grammar.
//!
//! ```text
//! # comment
//! states 4
//! initial 0
//! params
//!   k0 : 0
//!   k1 : 0 1
//!   k2 : 2 3
//! trans
//!   0 : 1/2:k0 + 1/2:k1
//!   1 : 0.5:k1 + 0.5:k2
//!   2 : 1:k2
//!   3 : 0.5:k1 + 0.5:k2
//! rewards
//!   0 : 1
//! labels
//!   one : 1
//! specs
//!   phi : P>=0.1 F "one"
//! ```
//!
//! Numbers are exact rationals: `0.1` is `1/10`. See `docs/fmc-format.md`
//! for the full grammar.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{FormatError, ModelError};
use crate::family::{
    Direction, FamilyModel, Measure, Parameter, Query, Realisation, Relation, Specification,
    StateId, Subfamily, Weight,
};

/// A model together with its named specifications.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyDocument {
    pub model: FamilyModel,
    pub specs: Vec<(String, Specification)>,
}

impl FamilyDocument {
    pub fn spec(&self, name: &str) -> Option<&Specification> {
        self.specs.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }
}

/// Parses a decimal (`0.25`), fraction (`1/4`) or integer literal exactly.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    if body.is_empty() {
        return None;
    }
    let value = if let Some((num, den)) = body.split_once('/') {
        if !is_digits(num) || !is_digits(den) {
            return None;
        }
        let den: BigInt = den.parse().ok()?;
        if den.is_zero() {
            return None;
        }
        BigRational::new(num.parse().ok()?, den)
    } else if let Some((int, frac)) = body.split_once('.') {
        if !is_digits(int) || !is_digits(frac) {
            return None;
        }
        let digits: BigInt = format!("{int}{frac}").parse().ok()?;
        BigRational::new(digits, BigInt::from(10u32).pow(frac.len() as u32))
    } else {
        if !is_digits(body) {
            return None;
        }
        BigRational::from_integer(body.parse().ok()?)
    };
    Some(if negative { -value } else { value })
}

fn is_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

/// Canonical rendering: `n` for integers, `n/d` otherwise.
pub fn format_rational(value: &BigRational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Params,
    Trans,
    Rewards,
    Labels,
    Specs,
}

/// One whitespace-delimited token with its 1-based column.
#[derive(Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token { text: &line[s..i], column: s + 1 });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token { text: &line[s..], column: s + 1 });
    }
    out
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> FormatError {
    FormatError::Syntax { line, column, message: message.into() }
}

fn semantic(line: usize, source: ModelError) -> FormatError {
    FormatError::Semantic { line, source }
}

/// Splits `head : rest` at the first colon.
fn split_entry(line: &str, lineno: usize) -> Result<(&str, &str, usize), FormatError> {
    let colon = line
        .find(':')
        .ok_or_else(|| syntax(lineno, line.len() + 1, "expected `:`"))?;
    Ok((line[..colon].trim(), &line[colon + 1..], colon + 2))
}

fn parse_state(tok: &str, lineno: usize, column: usize) -> Result<StateId, FormatError> {
    if !is_digits(tok) {
        return Err(syntax(lineno, column, format!("expected a state index, found `{tok}`")));
    }
    tok.parse()
        .map_err(|_| syntax(lineno, column, format!("state index `{tok}` is too large")))
}

/// `(state, [(weight, param, column)], line)`.
type RawRow = (StateId, Vec<(BigRational, String, usize)>, usize);

struct RawModel {
    num_states: Option<(usize, usize)>,
    initial: Option<(StateId, usize)>,
    params: Vec<(String, Vec<StateId>, usize)>,
    trans: Vec<RawRow>,
    rewards: Option<Vec<(StateId, BigRational, usize)>>,
    labels: Vec<(String, Vec<StateId>, usize)>,
    specs: Vec<(String, String, usize, usize)>,
}

pub fn parse_document(text: &str) -> Result<FamilyDocument, FormatError> {
    let raw = read_raw(text)?;
    build_document(raw)
}

/// Same as [`parse_document`]; the name mirrors [`serialize_family`].
pub fn parse_family(text: &str) -> Result<FamilyDocument, FormatError> {
    parse_document(text)
}

fn read_raw(text: &str) -> Result<RawModel, FormatError> {
    let mut raw = RawModel {
        num_states: None,
        initial: None,
        params: Vec::new(),
        trans: Vec::new(),
        rewards: None,
        labels: Vec::new(),
        specs: Vec::new(),
    };
    let mut section = Section::None;
    for (idx, full_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match full_line.find('#') {
            Some(pos) => &full_line[..pos],
            None => full_line,
        };
        if !line.is_ascii() {
            let col = line.char_indices().find(|(_, c)| !c.is_ascii()).map_or(1, |(i, _)| i + 1);
            return Err(syntax(lineno, col, "non-ASCII character"));
        }
        let toks = tokenize(line);
        let Some(first) = toks.first() else { continue };
        match (first.text, toks.len()) {
            ("states", 2) => {
                let n = parse_state(toks[1].text, lineno, toks[1].column)?;
                if raw.num_states.replace((n, lineno)).is_some() {
                    return Err(syntax(lineno, 1, "duplicate `states` line"));
                }
                section = Section::None;
                continue;
            }
            ("initial", 2) => {
                let s = parse_state(toks[1].text, lineno, toks[1].column)?;
                if raw.initial.replace((s, lineno)).is_some() {
                    return Err(syntax(lineno, 1, "duplicate `initial` line"));
                }
                section = Section::None;
                continue;
            }
            ("params", 1) => {
                section = Section::Params;
                continue;
            }
            ("trans", 1) => {
                section = Section::Trans;
                continue;
            }
            ("rewards", 1) => {
                if raw.rewards.is_some() {
                    return Err(syntax(lineno, 1, "duplicate `rewards` section"));
                }
                raw.rewards = Some(Vec::new());
                section = Section::Rewards;
                continue;
            }
            ("labels", 1) => {
                section = Section::Labels;
                continue;
            }
            ("specs", 1) => {
                section = Section::Specs;
                continue;
            }
            _ => {}
        }
        let (head, rest, rest_col) = split_entry(line, lineno)?;
        let head_col = first.column;
        match section {
            Section::None => {
                return Err(syntax(lineno, head_col, format!("unexpected `{}` outside a section", first.text)))
            }
            Section::Params => {
                if !is_ident(head) {
                    return Err(syntax(lineno, head_col, format!("invalid parameter name `{head}`")));
                }
                let mut domain = Vec::new();
                for t in tokenize(rest) {
                    domain.push(parse_state(t.text, lineno, rest_col + t.column - 1)?);
                }
                raw.params.push((head.to_string(), domain, lineno));
            }
            Section::Trans => {
                let state = parse_state(head, lineno, head_col)?;
                let mut row = Vec::new();
                let mut col = rest_col;
                for term in rest.split('+') {
                    let trimmed = term.trim();
                    let term_col = col + (term.len() - term.trim_start().len());
                    let (p, k) = trimmed
                        .split_once(':')
                        .ok_or_else(|| syntax(lineno, term_col, "expected `prob:param`"))?;
                    let (p, k) = (p.trim(), k.trim());
                    let prob = parse_rational(p)
                        .ok_or_else(|| syntax(lineno, term_col, format!("invalid probability `{p}`")))?;
                    if !is_ident(k) {
                        return Err(syntax(lineno, term_col, format!("invalid parameter name `{k}`")));
                    }
                    row.push((prob, k.to_string(), term_col));
                    col += term.len() + 1;
                }
                raw.trans.push((state, row, lineno));
            }
            Section::Rewards => {
                let state = parse_state(head, lineno, head_col)?;
                let value = rest.trim();
                let r = parse_rational(value)
                    .ok_or_else(|| syntax(lineno, rest_col, format!("invalid reward `{value}`")))?;
                raw.rewards.get_or_insert_with(Vec::new).push((state, r, lineno));
            }
            Section::Labels => {
                if !is_ident(head) {
                    return Err(syntax(lineno, head_col, format!("invalid label name `{head}`")));
                }
                let mut states = Vec::new();
                for t in tokenize(rest) {
                    states.push(parse_state(t.text, lineno, rest_col + t.column - 1)?);
                }
                raw.labels.push((head.to_string(), states, lineno));
            }
            Section::Specs => {
                if !is_ident(head) {
                    return Err(syntax(lineno, head_col, format!("invalid spec name `{head}`")));
                }
                raw.specs.push((head.to_string(), rest.trim().to_string(), lineno, rest_col));
            }
        }
    }
    Ok(raw)
}

fn build_document(raw: RawModel) -> Result<FamilyDocument, FormatError> {
    let (num_states, states_line) = raw
        .num_states
        .ok_or_else(|| syntax(1, 1, "missing `states` line"))?;
    let (initial, initial_line) = raw
        .initial
        .ok_or_else(|| syntax(1, 1, "missing `initial` line"))?;
    if initial >= num_states {
        return Err(semantic(initial_line, ModelError::StateOutOfRange { state: initial }));
    }
    if num_states == 0 {
        return Err(semantic(states_line, ModelError::NoStates));
    }

    let mut params = Vec::new();
    let mut param_lines = Vec::new();
    for (name, domain, line) in raw.params {
        if params.iter().any(|p: &Parameter| p.name == name) {
            return Err(semantic(line, ModelError::DuplicateParameter { name }));
        }
        if domain.is_empty() {
            return Err(semantic(line, ModelError::EmptyDomain { param: name }));
        }
        if let Some(&v) = domain.iter().find(|&&v| v >= num_states) {
            return Err(semantic(line, ModelError::StateOutOfRange { state: v }));
        }
        params.push(Parameter { name, domain });
        param_lines.push(line);
    }

    let mut rows: Vec<Option<(Vec<Weight>, usize)>> = vec![None; num_states];
    for (state, terms, line) in raw.trans {
        if state >= num_states {
            return Err(semantic(line, ModelError::StateOutOfRange { state }));
        }
        if rows[state].is_some() {
            return Err(syntax(line, 1, format!("duplicate row for state {state}")));
        }
        let mut row = Vec::new();
        for (prob, name, _col) in terms {
            let param = params
                .iter()
                .position(|p| p.name == name)
                .ok_or_else(|| semantic(line, ModelError::UnknownParameter { name: name.clone() }))?;
            row.push(Weight { prob, param });
        }
        rows[state] = Some((row, line));
    }
    let mut row_lines = vec![0; num_states];
    let mut final_rows = Vec::with_capacity(num_states);
    for (s, row) in rows.into_iter().enumerate() {
        let (row, line) = row.ok_or_else(|| semantic(states_line, ModelError::MissingRow { state: s }))?;
        row_lines[s] = line;
        final_rows.push(row);
    }

    let rewards = match raw.rewards {
        None => None,
        Some(entries) => {
            let mut rew = vec![BigRational::zero(); num_states];
            let mut seen = BTreeSet::new();
            for (s, r, line) in entries {
                if s >= num_states {
                    return Err(semantic(line, ModelError::StateOutOfRange { state: s }));
                }
                if !seen.insert(s) {
                    return Err(syntax(line, 1, format!("duplicate reward for state {s}")));
                }
                if r.is_negative() {
                    return Err(semantic(line, ModelError::NegativeReward { state: s }));
                }
                rew[s] = r;
            }
            Some(rew)
        }
    };

    let mut labels = BTreeMap::new();
    for (name, states, line) in raw.labels {
        if let Some(&s) = states.iter().find(|&&s| s >= num_states) {
            return Err(semantic(line, ModelError::StateOutOfRange { state: s }));
        }
        if labels.insert(name.clone(), states.into_iter().collect::<BTreeSet<_>>()).is_some() {
            return Err(syntax(line, 1, format!("duplicate label `{name}`")));
        }
    }

    let model = FamilyModel::new(num_states, initial, params, final_rows, rewards, labels).map_err(|e| {
        let line = match &e {
            ModelError::RowSum { state, .. }
            | ModelError::InvalidWeight { state }
            | ModelError::RepeatedParameter { state, .. } => row_lines[*state],
            _ => states_line,
        };
        semantic(line, e)
    })?;

    let mut specs = Vec::new();
    for (name, text, line, col) in raw.specs {
        if specs.iter().any(|(n, _): &(String, Specification)| *n == name) {
            return Err(syntax(line, 1, format!("duplicate spec `{name}`")));
        }
        let spec = parse_spec_at(&text, line, col)?;
        validate_spec(&spec, &model).map_err(|e| semantic(line, e))?;
        specs.push((name, spec));
    }
    Ok(FamilyDocument { model, specs })
}

/// Parses a specification string such as `P>=0.1 F "one"` or `Emin F "goal"`.
pub fn parse_spec(text: &str) -> Result<Specification, FormatError> {
    parse_spec_at(text.trim(), 1, 1)
}

/// Parses a specification and checks it against a model.
pub fn parse_spec_for(text: &str, model: &FamilyModel) -> Result<Specification, FormatError> {
    let spec = parse_spec(text)?;
    validate_spec(&spec, model).map_err(|e| semantic(1, e))?;
    Ok(spec)
}

fn parse_spec_at(text: &str, line: usize, col: usize) -> Result<Specification, FormatError> {
    let err = |offset: usize, msg: &str| syntax(line, col + offset, msg);
    let measure = match text.as_bytes().first() {
        Some(b'P') => Measure::Probability,
        Some(b'E') => Measure::Reward,
        _ => return Err(err(0, "specification must start with `P` or `E`")),
    };
    let rest = &text[1..];
    let (query, consumed) = if let Some(r) = rest.strip_prefix("max") {
        (Query::Optimum(Direction::Max), rest.len() - r.len())
    } else if let Some(r) = rest.strip_prefix("min") {
        (Query::Optimum(Direction::Min), rest.len() - r.len())
    } else {
        let (relation, op_len) = if rest.starts_with("<=") {
            (Relation::Le, 2)
        } else if rest.starts_with(">=") {
            (Relation::Ge, 2)
        } else if rest.starts_with('<') {
            (Relation::Lt, 1)
        } else if rest.starts_with('>') {
            (Relation::Gt, 1)
        } else {
            return Err(err(1, "expected `max`, `min` or a relation"));
        };
        let after = &rest[op_len..];
        let lit_len = after
            .find(|c: char| c.is_whitespace())
            .ok_or_else(|| err(1 + op_len, "expected a threshold followed by `F`"))?;
        let literal = &after[..lit_len];
        let threshold = parse_rational(literal)
            .ok_or_else(|| err(1 + op_len, &format!("invalid threshold `{literal}`")))?;
        (Query::Threshold { relation, threshold }, op_len + lit_len)
    };
    let after = &rest[consumed..];
    let offset = 1 + consumed;
    let trimmed = after.trim_start();
    let offset = offset + (after.len() - trimmed.len());
    let Some(after_f) = trimmed.strip_prefix('F') else {
        return Err(err(offset, "expected `F`"));
    };
    if !after_f.starts_with(char::is_whitespace) {
        return Err(err(offset + 1, "expected whitespace after `F`"));
    }
    let label_part = after_f.trim();
    let offset = offset + 1 + (after_f.len() - after_f.trim_start().len());
    let goal = label_part
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .filter(|s| is_ident(s))
        .ok_or_else(|| err(offset, "expected a quoted label name"))?;
    Ok(Specification { measure, query, goal: goal.to_string() })
}

/// Range checks for thresholds plus label/reward availability.
pub fn validate_spec(spec: &Specification, model: &FamilyModel) -> Result<(), ModelError> {
    if !model.labels().contains_key(&spec.goal) {
        return Err(ModelError::UnknownLabel { name: spec.goal.clone() });
    }
    if spec.measure == Measure::Reward && model.rewards().is_none() {
        return Err(ModelError::MissingRewards);
    }
    if let Some((relation, t)) = spec.threshold() {
        let out_of_range = match spec.measure {
            Measure::Probability => t.is_negative() || *t > BigRational::one(),
            Measure::Reward => t.is_negative(),
        };
        if out_of_range {
            return Err(ModelError::ThresholdOutOfRange { threshold: format_rational(t) });
        }
        let never = match (spec.measure, relation) {
            (Measure::Probability, Relation::Gt) => t.is_one(),
            (_, Relation::Lt) => t.is_zero(),
            _ => false,
        };
        if never {
            return Err(ModelError::UnsatisfiableThreshold { spec: spec.to_string() });
        }
    }
    Ok(())
}

/// Canonical text of a model (no specs section).
pub fn serialize_family(model: &FamilyModel) -> String {
    serialize_document(&FamilyDocument { model: model.clone(), specs: Vec::new() })
}

pub fn serialize_document(doc: &FamilyDocument) -> String {
    let m = &doc.model;
    let mut out = String::new();
    let _ = writeln!(out, "states {}", m.num_states());
    let _ = writeln!(out, "initial {}", m.initial());
    out.push_str("params\n");
    for p in m.params() {
        let _ = write!(out, "  {} :", p.name);
        for v in &p.domain {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out.push_str("trans\n");
    for s in 0..m.num_states() {
        let _ = write!(out, "  {s} :");
        for (i, w) in m.row(s).iter().enumerate() {
            if i > 0 {
                out.push_str(" +");
            }
            let _ = write!(out, " {}:{}", format_rational(&w.prob), m.params()[w.param].name);
        }
        out.push('\n');
    }
    if let Some(rew) = m.rewards() {
        out.push_str("rewards\n");
        for (s, r) in rew.iter().enumerate() {
            if !r.is_zero() {
                let _ = writeln!(out, "  {s} : {}", format_rational(r));
            }
        }
    }
    if !m.labels().is_empty() {
        out.push_str("labels\n");
        for (name, states) in m.labels() {
            let _ = write!(out, "  {name} :");
            for s in states {
                let _ = write!(out, " {s}");
            }
            out.push('\n');
        }
    }
    if !doc.specs.is_empty() {
        out.push_str("specs\n");
        for (name, spec) in &doc.specs {
            let _ = writeln!(out, "  {name} : {spec}");
        }
    }
    out
}

/// Parses `k0=0 k1=1 ...`; every parameter must be assigned exactly once.
pub fn parse_realisation(text: &str, model: &FamilyModel) -> Result<Realisation, FormatError> {
    let mut values: Vec<Option<StateId>> = vec![None; model.params().len()];
    for tok in tokenize(text) {
        let (name, value) = tok
            .text
            .split_once('=')
            .ok_or_else(|| syntax(1, tok.column, "expected `param=value`"))?;
        let k = model
            .param_index(name)
            .ok_or_else(|| semantic(1, ModelError::UnknownParameter { name: name.to_string() }))?;
        let v = parse_state(value, 1, tok.column + name.len() + 1)?;
        if values[k].replace(v).is_some() {
            return Err(syntax(1, tok.column, format!("`{name}` assigned twice")));
        }
    }
    let values = values
        .into_iter()
        .zip(model.params())
        .map(|(v, p)| {
            v.ok_or_else(|| {
                semantic(1, ModelError::InvalidRealisation { reason: format!("`{}` is unassigned", p.name) })
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let r = Realisation::new(values);
    model.check_realisation(&r).map_err(|e| semantic(1, e))?;
    Ok(r)
}

/// Parses `k0={0} k1={0,1} ...`; unmentioned parameters keep their full domain.
pub fn parse_subfamily(text: &str, model: &FamilyModel) -> Result<Subfamily, FormatError> {
    let mut subsets: Vec<Vec<StateId>> = model.params().iter().map(|p| p.domain.clone()).collect();
    for tok in tokenize(text) {
        let (name, set) = tok
            .text
            .split_once('=')
            .ok_or_else(|| syntax(1, tok.column, "expected `param={values}`"))?;
        let k = model
            .param_index(name)
            .ok_or_else(|| semantic(1, ModelError::UnknownParameter { name: name.to_string() }))?;
        let inner = set
            .strip_prefix('{')
            .and_then(|s| s.strip_suffix('}'))
            .ok_or_else(|| syntax(1, tok.column, "expected `{...}`"))?;
        subsets[k] = inner
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| parse_state(s, 1, tok.column))
            .collect::<Result<_, _>>()?;
    }
    Subfamily::new(model, subsets).map_err(|e| semantic(1, e))
}
