//! Serializable reports and their json/csv/text renderings.
//!
//! Field order is fixed by the struct definitions, so identical runs give
//! byte-identical JSON as long as timings are left out.

use std::fmt::Write as _;
use std::time::Duration;

use serde::Serialize;

use famsynth::synthesis::Stats;

use crate::args::OutputFormat;

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub total_ms: f64,
    pub build_ms: f64,
    pub check_ms: f64,
    pub analysis_ms: f64,
}

impl Timings {
    pub fn new(total: Duration, build: Duration, check: Duration, analysis: Duration) -> Self {
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        Self { total_ms: ms(total), build_ms: ms(build), check_ms: ms(check), analysis_ms: ms(analysis) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MemberRow {
    pub realisation: String,
    pub value: Option<f64>,
    pub satisfied: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Optimum {
    pub realisation: Option<String>,
    pub value: Option<f64>,
}

/// Output of `check`, `allinone` and `enum`.
#[derive(Debug, Clone, Serialize)]
pub struct BaselineReport {
    pub command: &'static str,
    pub spec: String,
    pub specification: String,
    pub family_size: u128,
    pub accepted: usize,
    pub rejected: usize,
    pub undefined: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimum: Option<Optimum>,
    pub solver_calls: usize,
    pub members: Vec<MemberRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Group {
    pub members: u128,
    pub subfamilies: Vec<String>,
}

/// Output of `synth`.
#[derive(Debug, Clone, Serialize)]
pub struct SynthReport {
    pub command: &'static str,
    pub mode: &'static str,
    pub spec: String,
    pub specification: String,
    pub family_size: u128,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accepted: Option<Group>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejected: Option<Group>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub undefined: Option<Group>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Optimum>,
    pub stats: Stats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

/// Output of `smt-export --solve`.
#[derive(Debug, Clone, Serialize)]
pub struct SmtReport {
    pub command: &'static str,
    pub spec: String,
    pub specification: String,
    pub variables: usize,
    pub satisfiable: bool,
    pub realisation: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub approach: &'static str,
    /// `None` when the approach was skipped (size cap).
    pub timings: Option<Timings>,
    pub iterations: Option<usize>,
    pub accepted: Option<u128>,
    pub rejected: Option<u128>,
    pub undefined: Option<u128>,
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub command: &'static str,
    pub spec: String,
    pub specification: String,
    pub family_size: u128,
    pub rows: Vec<BenchRow>,
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".to_string(), ToString::to_string)
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

fn timing_lines(out: &mut String, t: &Option<Timings>) {
    if let Some(t) = t {
        let _ = writeln!(
            out,
            "time {:.3} ms (build {:.3}, check {:.3}, analysis {:.3})",
            t.total_ms, t.build_ms, t.check_ms, t.analysis_ms
        );
    }
}

impl BaselineReport {
    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => json(self),
            OutputFormat::Csv => csv_text(
                &["realisation", "value", "satisfied"],
                self.members
                    .iter()
                    .map(|m| vec![m.realisation.clone(), opt(&m.value), opt(&m.satisfied)])
                    .collect(),
            ),
            OutputFormat::Text => {
                let mut out = String::new();
                let _ = writeln!(out, "{} {} ({})", self.command, self.spec, self.specification);
                for m in &self.members {
                    let verdict = match m.satisfied {
                        Some(true) => "sat",
                        Some(false) => "unsat",
                        None if m.value.is_none() => "undefined",
                        None => "",
                    };
                    let _ = writeln!(out, "  {}  {}  {}", m.realisation, opt(&m.value), verdict);
                }
                let _ = writeln!(
                    out,
                    "accepted {}, rejected {}, undefined {} of {}",
                    self.accepted, self.rejected, self.undefined, self.family_size
                );
                if let Some(o) = &self.optimum {
                    let _ = writeln!(out, "optimum {} at {}", opt(&o.value), opt(&o.realisation));
                }
                timing_lines(&mut out, &self.timings);
                out
            }
        }
    }
}

impl SynthReport {
    fn groups(&self) -> [(&'static str, &Option<Group>); 3] {
        [("accepted", &self.accepted), ("rejected", &self.rejected), ("undefined", &self.undefined)]
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => json(self),
            OutputFormat::Csv => match &self.result {
                Some(r) => csv_text(&["realisation", "value"], vec![vec![opt(&r.realisation), opt(&r.value)]]),
                None => {
                    let mut rows = Vec::new();
                    for (verdict, group) in self.groups() {
                        for sub in group.iter().flat_map(|g| &g.subfamilies) {
                            rows.push(vec![verdict.to_string(), sub.clone()]);
                        }
                    }
                    csv_text(&["verdict", "subfamily"], rows)
                }
            },
            OutputFormat::Text => {
                let mut out = String::new();
                let _ = writeln!(out, "synth {} {} ({})", self.mode, self.spec, self.specification);
                for (verdict, group) in self.groups() {
                    if let Some(g) = group {
                        let _ = writeln!(out, "{verdict}: {} members in {} subfamilies", g.members, g.subfamilies.len());
                        for sub in &g.subfamilies {
                            let _ = writeln!(out, "  {sub}");
                        }
                    }
                }
                if let Some(r) = &self.result {
                    let _ = writeln!(out, "realisation: {}", opt(&r.realisation));
                    if r.value.is_some() {
                        let _ = writeln!(out, "value: {}", opt(&r.value));
                    }
                }
                let s = &self.stats;
                let _ = writeln!(
                    out,
                    "iterations {}, solver calls {}, singletons {}",
                    s.iterations, s.solver_calls, s.singletons
                );
                timing_lines(&mut out, &self.timings);
                out
            }
        }
    }
}

impl SmtReport {
    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => json(self),
            OutputFormat::Csv => csv_text(
                &["satisfiable", "realisation"],
                vec![vec![self.satisfiable.to_string(), opt(&self.realisation)]],
            ),
            OutputFormat::Text => match &self.realisation {
                Some(r) => format!("sat\n{r}\n"),
                None => "unsat\n".to_string(),
            },
        }
    }
}

impl BenchReport {
    pub fn render(&self, format: OutputFormat) -> String {
        let header =
            ["approach", "time_ms", "build_ms", "check_ms", "analysis_ms", "iterations", "accepted", "rejected", "undefined", "value"];
        let cells = |r: &BenchRow| -> Vec<String> {
            let t = |f: fn(&Timings) -> f64| r.timings.as_ref().map_or("-".to_string(), |t| format!("{:.3}", f(t)));
            vec![
                r.approach.to_string(),
                t(|t| t.total_ms),
                t(|t| t.build_ms),
                t(|t| t.check_ms),
                t(|t| t.analysis_ms),
                opt(&r.iterations),
                opt(&r.accepted),
                opt(&r.rejected),
                opt(&r.undefined),
                opt(&r.value),
            ]
        };
        match format {
            OutputFormat::Json => json(self),
            OutputFormat::Csv => csv_text(&header, self.rows.iter().map(cells).collect()),
            OutputFormat::Text => {
                let rows: Vec<Vec<String>> = self.rows.iter().map(cells).collect();
                let widths: Vec<usize> = (0..header.len())
                    .map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
                    .collect();
                let mut out = String::new();
                let _ = writeln!(out, "bench {} ({}), {} members", self.spec, self.specification, self.family_size);
                let line = |cells: Vec<&str>| {
                    cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ")
                };
                let _ = writeln!(out, "{}", line(header.to_vec()));
                for (row, src) in rows.iter().zip(&self.rows) {
                    let _ = writeln!(out, "{}", line(row.iter().map(String::as_str).collect()));
                    if let Some(note) = &src.note {
                        let _ = writeln!(out, "  note: {note}");
                    }
                }
                out
            }
        }
    }
}
