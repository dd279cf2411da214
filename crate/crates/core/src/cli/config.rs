//! Flat INI run configs.
//!
//! ```text
//! command = scaling
//!
//! [domain]
//! kind = graph          # disk | ellipse | graph | interval
//! half_width = 0.5
//! height = 0.25
//! rho = 0.125
//!
//! [problem]
//! alpha = 0.5
//! weight = height       # distance | graph_gap | height
//! phi = tangential
//!
//! [solver]
//! spacing = 1/256
//! ```
//!
//! Every problem in the text is collected, each tagged with its line, so a
//! config with several mistakes is reported in one pass.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

use crate::domain::{DomainKind, DomainSpec, GraphProfile};
use crate::masolve::{BoundaryData, ProblemSpec, RhsSampling, ScaleFn, Weight};
use crate::par::Exec;
use crate::sections::SlopeMethod;
use crate::verify::Heights;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Sections,
    Scaling,
    Barriers,
    Liouville,
    Maxsection,
}

impl Command {
    pub const ALL: [Command; 6] =
        [Command::Solve, Command::Sections, Command::Scaling, Command::Barriers, Command::Liouville, Command::Maxsection];

    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sections => "sections",
            Command::Scaling => "scaling",
            Command::Barriers => "barriers",
            Command::Liouville => "liouville",
            Command::Maxsection => "maxsection",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    fn needs(self) -> &'static [&'static str] {
        match self {
            Command::Solve | Command::Sections | Command::Scaling | Command::Maxsection => &["domain", "problem", "solver"],
            Command::Barriers => &["domain", "problem", "experiment"],
            Command::Liouville => &["problem", "solver"],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverBlock {
    pub spacing: f64,
    pub stencil_width: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub damping: bool,
    pub rhs: RhsSampling,
    #[serde(skip)]
    pub exec: Exec,
}

/// Barrier job: family, constants as written, and the certified region.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BarrierBlock {
    pub family: String,
    pub constants: BTreeMap<String, f64>,
    pub lower: bool,
    pub search: bool,
    pub compare: bool,
    pub cut: Option<f64>,
    pub cut_bound: Option<f64>,
    pub samples: usize,
    /// `Some(true)` forces a subsolution check, `Some(false)` a supersolution.
    pub subsolution: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentBlock {
    pub heights: Heights,
    pub base_point: Option<Vec<f64>>,
    pub slope: SlopeMethod,
    pub min_normal_nodes: f64,
    /// Distances of `y₀` from the boundary point along the inner normal.
    pub distances: Option<Vec<f64>>,
    /// The same, in units of the spacing.
    pub distance_cells: Vec<f64>,
    pub slope_tol: f64,
    pub band: (f64, f64),
    pub residual_tol: f64,
    pub barrier: Option<BarrierBlock>,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub domain: Option<DomainSpec>,
    pub alpha: f64,
    pub problem: Option<ProblemSpec>,
    pub solver: Option<SolverBlock>,
    pub experiment: ExperimentBlock,
    pub out_dir: PathBuf,
}

pub const DEFAULT_OUT: &str = "dmalab-out";

const SECTIONS: &[(&str, &[&str])] = &[
    ("", &["command"]),
    ("domain", &["kind", "center", "radius", "semi_axes", "curvature", "quartic", "half_width", "height", "lo", "hi", "rho", "dim"]),
    ("problem", &["alpha", "weight", "scale", "scale_base", "scale_coef", "phi", "phi_kappa", "phi_slope", "phi_diag", "mu"]),
    ("solver", &["spacing", "stencil_width", "tol", "max_iter", "damping", "rhs", "rhs_points", "exec"]),
    (
        "experiment",
        &[
            "heights", "base_point", "slope_method", "min_normal_nodes", "distances", "distance_cells", "slope_tol", "band",
            "residual_tol", "family", "search", "compare", "cut", "cut_bound", "samples", "inequality", "lower", "mu",
            "big_lambda", "c_star", "big_c", "c0", "c1", "c", "k", "eps", "h", "offset",
        ],
    ),
    ("output", &["dir"]),
];

const CONSTANT_KEYS: &[&str] = &["mu", "big_lambda", "c_star", "big_c", "c0", "c1", "c", "k", "eps", "h", "offset"];

struct Entry {
    value: String,
    line: usize,
}

/// Parsed text plus the error sink.
struct Doc {
    entries: BTreeMap<(String, String), Entry>,
    headers: BTreeMap<String, usize>,
    errors: Vec<(usize, String)>,
    last_line: usize,
}

impl Doc {
    fn err(&mut self, line: usize, msg: impl Into<String>) {
        self.errors.push((line, msg.into()));
    }

    fn has(&self, sec: &str) -> bool {
        self.headers.contains_key(sec)
    }

    fn header_line(&self, sec: &str) -> usize {
        self.headers.get(sec).copied().unwrap_or(self.last_line)
    }

    fn raw(&self, sec: &str, key: &str) -> Option<(String, usize)> {
        self.entries.get(&(sec.to_string(), key.to_string())).map(|e| (e.value.clone(), e.line))
    }

    fn num(&mut self, sec: &str, key: &str) -> Option<f64> {
        let (v, line) = self.raw(sec, key)?;
        match parse_number(&v) {
            Some(x) => Some(x),
            None => {
                self.err(line, format!("{key}: expected a number, got '{v}'"));
                None
            }
        }
    }

    fn num_or(&mut self, sec: &str, key: &str, default: f64) -> f64 {
        self.num(sec, key).unwrap_or(default)
    }

    fn required(&mut self, sec: &str, key: &str) -> Option<f64> {
        if self.raw(sec, key).is_none() {
            let line = self.header_line(sec);
            self.err(line, format!("[{sec}] is missing required key '{key}'"));
            return None;
        }
        self.num(sec, key)
    }

    fn positive(&mut self, sec: &str, key: &str, x: Option<f64>) -> Option<f64> {
        let x = x?;
        if x > 0.0 && x.is_finite() {
            Some(x)
        } else {
            let line = self.raw(sec, key).map(|r| r.1).unwrap_or(self.header_line(sec));
            self.err(line, format!("{key} must be positive, got {x}"));
            None
        }
    }

    fn list(&mut self, sec: &str, key: &str) -> Option<Vec<f64>> {
        let (v, line) = self.raw(sec, key)?;
        let parts: Vec<Option<f64>> = v.split(',').map(|p| parse_number(p.trim())).collect();
        if v.trim().is_empty() || parts.iter().any(Option::is_none) {
            self.err(line, format!("{key}: expected a comma-separated list of numbers, got '{v}'"));
            return None;
        }
        Some(parts.into_iter().flatten().collect())
    }

    fn uint(&mut self, sec: &str, key: &str, default: usize) -> usize {
        let Some((v, line)) = self.raw(sec, key) else { return default };
        match v.parse::<usize>() {
            Ok(x) => x,
            Err(_) => {
                self.err(line, format!("{key}: expected a nonnegative integer, got '{v}'"));
                default
            }
        }
    }

    fn flag(&mut self, sec: &str, key: &str, default: bool) -> bool {
        let Some((v, line)) = self.raw(sec, key) else { return default };
        match v.as_str() {
            "true" | "yes" | "on" | "1" => true,
            "false" | "no" | "off" | "0" => false,
            _ => {
                self.err(line, format!("{key}: expected true or false, got '{v}'"));
                default
            }
        }
    }

    fn choice<T: Copy>(&mut self, sec: &str, key: &str, options: &[(&str, T)], default: Option<T>) -> Option<T> {
        let Some((v, line)) = self.raw(sec, key) else { return default };
        match options.iter().find(|(name, _)| *name == v) {
            Some((_, t)) => Some(*t),
            None => {
                let names: Vec<&str> = options.iter().map(|o| o.0).collect();
                self.err(line, format!("{key}: expected one of {}, got '{v}'", names.join(" | ")));
                None
            }
        }
    }
}

/// Numbers, also written as fractions `a/b`.
fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    let x = match s.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?,
        None => s.parse::<f64>().ok()?,
    };
    x.is_finite().then_some(x)
}

fn tokenize(text: &str) -> Doc {
    let mut doc = Doc { entries: BTreeMap::new(), headers: BTreeMap::new(), errors: Vec::new(), last_line: 1 };
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        doc.last_line = line;
        let body = raw.split(['#', ';']).next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                doc.err(line, format!("malformed section header '{body}'"));
                continue;
            };
            let name = name.trim().to_string();
            if !SECTIONS.iter().any(|(s, _)| *s == name) || name.is_empty() {
                doc.err(line, format!("unknown section [{name}]"));
            } else if doc.headers.contains_key(&name) {
                doc.err(line, format!("section [{name}] appears twice"));
            } else {
                doc.headers.insert(name.clone(), line);
            }
            section = name;
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            doc.err(line, format!("expected 'key = value', got '{body}'"));
            continue;
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| *s == section) else {
            continue;
        };
        if !keys.contains(&key.as_str()) {
            let place = if section.is_empty() { "top level".to_string() } else { format!("[{section}]") };
            doc.err(line, format!("unknown key '{key}' in {place}"));
            continue;
        }
        let slot = (section.clone(), key.clone());
        if doc.entries.contains_key(&slot) {
            doc.err(line, format!("duplicate key '{key}'"));
            continue;
        }
        doc.entries.insert(slot, Entry { value, line });
    }
    doc
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, None)
}

/// Parses a config for `command` (on the command line); a `command` key in
/// the file must then agree with it.
pub fn parse_config_with(text: &str, command: Option<Command>) -> Result<RunConfig> {
    let mut doc = tokenize(text);
    let file_cmd = match doc.raw("", "command") {
        Some((v, line)) => match Command::parse(&v) {
            Some(c) => Some((c, line)),
            None => {
                doc.err(line, format!("unknown command '{v}'"));
                None
            }
        },
        None => None,
    };
    let command = match (command, file_cmd) {
        (Some(c), Some((f, line))) if c != f => {
            doc.err(line, format!("config is for '{}' but '{}' was requested", f.name(), c.name()));
            Some(c)
        }
        (Some(c), _) => Some(c),
        (None, Some((f, _))) => Some(f),
        (None, None) => {
            doc.err(1, "no command given (set 'command = ...' or pass it on the command line)");
            None
        }
    };
    if let Some(c) = command {
        for block in c.needs() {
            if !doc.has(block) {
                let line = doc.last_line;
                doc.err(line, format!("missing required block [{block}] for command '{}'", c.name()));
            }
        }
    }
    let domain = if doc.has("domain") { domain_block(&mut doc) } else { None };
    let alpha = alpha_value(&mut doc);
    let problem = match (&domain, alpha) {
        (Some(d), Some(a)) if doc.has("problem") => problem_block(&mut doc, d.clone(), a),
        _ => None,
    };
    let solver = if doc.has("solver") { solver_block(&mut doc) } else { None };
    let experiment = experiment_block(&mut doc, command == Some(Command::Barriers));
    let out_dir = PathBuf::from(doc.raw("output", "dir").map(|r| r.0).unwrap_or_else(|| DEFAULT_OUT.to_string()));
    if !doc.errors.is_empty() {
        doc.errors.sort_by_key(|e| e.0);
        return Err(Error::Config(doc.errors.into_iter().map(|(l, m)| format!("line {l}: {m}")).collect()));
    }
    Ok(RunConfig {
        command: command.expect("checked above"),
        domain,
        alpha: alpha.expect("checked above"),
        problem,
        solver,
        experiment,
        out_dir,
    })
}

fn alpha_value(doc: &mut Doc) -> Option<f64> {
    if !doc.has("problem") {
        return None;
    }
    let a = doc.required("problem", "alpha")?;
    if a > 0.0 && a < 2.0 {
        Some(a)
    } else {
        let line = doc.raw("problem", "alpha").map(|r| r.1).unwrap_or(doc.header_line("problem"));
        doc.err(line, format!("alpha must be in (0,2), got {a}"));
        None
    }
}

fn domain_block(doc: &mut Doc) -> Option<DomainSpec> {
    const S: &str = "domain";
    let Some((kind, kline)) = doc.raw(S, "kind") else {
        let line = doc.header_line(S);
        doc.err(line, "[domain] is missing required key 'kind'");
        return None;
    };
    let rho = doc.num(S, "rho");
    let built = match kind.as_str() {
        "disk" => {
            let center = doc.list(S, "center").unwrap_or_else(|| vec![0.0, 1.0]);
            let radius = doc.required(S, "radius");
            let radius = doc.positive(S, "radius", radius)?;
            DomainSpec::disk(center, radius, rho.unwrap_or(0.25 * radius))
        }
        "ellipse" => {
            let center = doc.list(S, "center").unwrap_or_else(|| vec![0.0, 1.0]);
            let axes = doc.list(S, "semi_axes");
            let (Some(axes), true) = (axes, center.len() == 2) else {
                doc.err(kline, "ellipse needs a 2D center and 'semi_axes = a, b'");
                return None;
            };
            if axes.len() != 2 {
                doc.err(kline, "semi_axes needs two values");
                return None;
            }
            DomainSpec::ellipse([center[0], center[1]], [axes[0], axes[1]], rho.unwrap_or(0.25 * axes[0].min(axes[1])))
        }
        "graph" => {
            let profile = GraphProfile { curvature: doc.num_or(S, "curvature", 0.0), quartic: doc.num_or(S, "quartic", 0.0) };
            let half = doc.required(S, "half_width");
            let half = doc.positive(S, "half_width", half);
            let height = doc.required(S, "height");
            let height = doc.positive(S, "height", height);
            let dim = doc.uint(S, "dim", 2);
            let (half, height) = (half?, height?);
            DomainSpec::graph(dim, profile, half, height, rho.unwrap_or(0.5 * height))
        }
        "interval" => {
            let lo = doc.num_or(S, "lo", 0.0);
            let hi = doc.num_or(S, "hi", 1.0);
            DomainSpec::interval(lo, hi)
        }
        other => {
            doc.err(kline, format!("kind: expected one of disk | ellipse | graph | interval, got '{other}'"));
            return None;
        }
    };
    match built {
        Ok(d) => {
            if let Some(dim) = doc.raw(S, "dim").and_then(|(v, _)| v.parse::<usize>().ok()) {
                if dim != d.dim {
                    let line = doc.raw(S, "dim").unwrap().1;
                    doc.err(line, format!("dim = {dim} does not match the {kind} parameters (dimension {})", d.dim));
                }
            }
            Some(d)
        }
        Err(e) => {
            doc.err(kline, format!("invalid {kind} domain: {e}"));
            None
        }
    }
}

fn problem_block(doc: &mut Doc, domain: DomainSpec, alpha: f64) -> Option<ProblemSpec> {
    const S: &str = "problem";
    let weight = doc.choice(
        S,
        "weight",
        &[("distance", Weight::Distance), ("graph_gap", Weight::GraphGap), ("height", Weight::Height)],
        Some(Weight::Distance),
    );
    let scale = match doc.raw(S, "scale") {
        None => Some(ScaleFn::Constant(1.0)),
        Some((v, line)) => match v.as_str() {
            "quadratic" => Some(ScaleFn::Quadratic { base: doc.num_or(S, "scale_base", 1.0), coef: doc.num_or(S, "scale_coef", 0.0) }),
            "balanced" => match &domain.kind {
                DomainKind::Disk { center, radius } => match ScaleFn::balanced(center.clone(), *radius, alpha) {
                    Ok(s) => Some(s),
                    Err(e) => {
                        doc.err(line, format!("scale: {e}"));
                        None
                    }
                },
                _ => {
                    doc.err(line, "scale = balanced needs a disk domain");
                    None
                }
            },
            _ => match parse_number(&v) {
                Some(c) => Some(ScaleFn::Constant(c)),
                None => {
                    doc.err(line, format!("scale: expected a number, 'quadratic' or 'balanced', got '{v}'"));
                    None
                }
            },
        },
    };
    let n = domain.dim;
    let phi = match doc.raw(S, "phi") {
        None => Some(BoundaryData::Zero),
        Some((v, line)) => match v.as_str() {
            "zero" => Some(BoundaryData::Zero),
            "tangential" => Some(BoundaryData::Tangential {
                kappa: doc.num_or(S, "phi_kappa", 1.0),
                slope: doc.list(S, "phi_slope").unwrap_or_default(),
            }),
            "quadratic" => Some(BoundaryData::Quadratic { diag: doc.list(S, "phi_diag").unwrap_or_else(|| vec![1.0; n]) }),
            "liouville" => Some(BoundaryData::Liouville { alpha }),
            _ => {
                doc.err(line, format!("phi: unknown boundary data '{v}' (zero | tangential | quadratic | liouville)"));
                None
            }
        },
    };
    let mu = doc.num(S, "mu");
    let (weight, scale, phi) = (weight?, scale?, phi?);
    match ProblemSpec::new(domain, alpha, weight, scale, phi) {
        Ok(p) => Some(match mu {
            Some(m) => p.with_mu(m),
            None => p,
        }),
        Err(e) => {
            let line = doc.header_line(S);
            doc.err(line, format!("invalid problem: {e}"));
            None
        }
    }
}

fn solver_block(doc: &mut Doc) -> Option<SolverBlock> {
    const S: &str = "solver";
    let spacing = doc.required(S, "spacing");
    let spacing = doc.positive(S, "spacing", spacing);
    let stencil_width = doc.uint(S, "stencil_width", 2);
    if stencil_width == 0 {
        let line = doc.raw(S, "stencil_width").unwrap().1;
        doc.err(line, "stencil_width must be at least 1");
    }
    let tol = doc.num_or(S, "tol", 1e-8);
    if !(tol > 0.0) {
        let line = doc.raw(S, "tol").map(|r| r.1).unwrap_or(0);
        doc.err(line, format!("tol must be positive, got {tol}"));
    }
    let max_iter = doc.uint(S, "max_iter", 200);
    let damping = doc.flag(S, "damping", true);
    let points = doc.uint(S, "rhs_points", 8);
    let rhs = doc.choice(S, "rhs", &[("node", RhsSampling::Node), ("dual_cell", RhsSampling::DualCell { points })], Some(RhsSampling::Node));
    let exec = doc.choice(S, "exec", &[("parallel", Exec::Parallel), ("sequential", Exec::Sequential)], Some(Exec::Parallel));
    Some(SolverBlock { spacing: spacing?, stencil_width, tol, max_iter, damping, rhs: rhs?, exec: exec? })
}

fn experiment_block(doc: &mut Doc, barriers: bool) -> ExperimentBlock {
    const S: &str = "experiment";
    let heights = match doc.raw(S, "heights") {
        None => Heights::Auto,
        Some((v, _)) if v == "auto" => Heights::Auto,
        Some(_) => Heights::List(doc.list(S, "heights").unwrap_or_default()),
    };
    let alpha = doc.raw("problem", "alpha").and_then(|(v, _)| parse_number(&v)).unwrap_or(0.5);
    let slope = match doc.raw(S, "slope_method") {
        None => SlopeMethod::Extrapolated { alpha },
        Some((v, line)) => match v.as_str() {
            "extrapolated" => SlopeMethod::Extrapolated { alpha },
            "min_quotient" => SlopeMethod::MinQuotient,
            _ => {
                doc.err(line, format!("slope_method: expected extrapolated | min_quotient, got '{v}'"));
                SlopeMethod::MinQuotient
            }
        },
    };
    let band = match doc.list(S, "band") {
        Some(b) if b.len() == 2 => (b[0], b[1]),
        Some(_) => {
            let line = doc.raw(S, "band").unwrap().1;
            doc.err(line, "band needs two values 'lo, hi'");
            (0.25, 1.0)
        }
        None => (0.25, 1.0),
    };
    let barrier = if barriers { barrier_block(doc) } else { None };
    ExperimentBlock {
        heights,
        base_point: doc.list(S, "base_point"),
        slope,
        min_normal_nodes: doc.num_or(S, "min_normal_nodes", 6.0),
        distances: doc.list(S, "distances"),
        distance_cells: doc.list(S, "distance_cells").unwrap_or_else(|| vec![4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0, 48.0, 64.0]),
        slope_tol: doc.num_or(S, "slope_tol", crate::verify::SLOPE_TOL),
        band,
        residual_tol: doc.num_or(S, "residual_tol", 0.02),
        barrier,
    }
}

const FAMILIES: &[&str] = &["U0", "V0", "VSTAR", "POINTED_W", "VPLUS", "VMINUS", "LOG_ALPHA1", "PLANE_SHIFT"];

fn barrier_block(doc: &mut Doc) -> Option<BarrierBlock> {
    const S: &str = "experiment";
    if !doc.has(S) {
        return None;
    }
    let Some((family, line)) = doc.raw(S, "family") else {
        let line = doc.header_line(S);
        doc.err(line, "[experiment] is missing required key 'family' for command 'barriers'");
        return None;
    };
    if !FAMILIES.contains(&family.as_str()) {
        doc.err(line, format!("family: unknown barrier family '{family}' ({})", FAMILIES.join(" | ")));
        return None;
    }
    let mut constants = BTreeMap::new();
    for key in CONSTANT_KEYS {
        if let Some(x) = doc.num(S, key) {
            constants.insert(key.to_string(), x);
        }
    }
    let subsolution = doc.choice(S, "inequality", &[("sub", Some(true)), ("super", Some(false))], Some(None)).flatten();
    Some(BarrierBlock {
        family,
        constants,
        lower: doc.flag(S, "lower", true),
        search: doc.flag(S, "search", true),
        compare: doc.flag(S, "compare", false),
        cut: doc.num(S, "cut"),
        cut_bound: doc.num(S, "cut_bound"),
        samples: doc.uint(S, "samples", 4096),
        subsolution,
    })
}
