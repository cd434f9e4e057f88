//! Run configuration: a flat `key = value` document (TOML syntax, no
//! tables), validated in full before any computation.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{build_grid, GridSpec};
use crate::model::{soliton, SolverParams};
use crate::operators::StencilOrder;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFamily {
    Zero,
    Soliton,
    Xgauss,
    Xexp,
    File,
}

impl DataFamily {
    const ALL: [(&'static str, DataFamily); 5] = [
        ("zero", DataFamily::Zero),
        ("soliton", DataFamily::Soliton),
        ("xgauss", DataFamily::Xgauss),
        ("xexp", DataFamily::Xexp),
        ("file", DataFamily::File),
    ];

    pub fn name(self) -> &'static str {
        Self::ALL.iter().find(|(_, f)| *f == self).map(|(n, _)| *n).unwrap_or("zero")
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().find(|(n, _)| *n == s).map(|(_, f)| *f)
    }
}

/// Initial data family and its parameters. Unused parameters are carried
/// along so that the echo is complete.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSpec {
    pub family: DataFamily,
    pub a: f64,
    pub s: f64,
    pub x0: f64,
    pub c: f64,
    pub path: String,
    pub smooth_passes: usize,
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec {
            family: DataFamily::Zero,
            a: 1.0,
            s: 1.0,
            x0: 3.0,
            c: 0.5,
            path: String::new(),
            smooth_passes: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Solve,
    EpsSweep,
    Gronwall,
    SolitonBench,
    Mms,
    CheckIneq,
}

impl Experiment {
    const ALL: [(&'static str, Experiment); 6] = [
        ("solve", Experiment::Solve),
        ("eps-sweep", Experiment::EpsSweep),
        ("gronwall", Experiment::Gronwall),
        ("soliton-bench", Experiment::SolitonBench),
        ("mms", Experiment::Mms),
        ("check-ineq", Experiment::CheckIneq),
    ];

    pub fn name(self) -> &'static str {
        Self::ALL.iter().find(|(_, e)| *e == self).map(|(n, _)| *n).unwrap_or("solve")
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().find(|(n, _)| *n == s).map(|(_, e)| *e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SolverParams,
    pub length: f64,
    pub n_nodes: usize,
    pub data: DataSpec,
    pub experiment: Experiment,
    pub out: String,
    pub energy_every: usize,
    pub snapshot_every: usize,
    pub seed: u64,
    pub compat_tol: f64,
    pub estimate_tol: f64,
    pub identity_tol: f64,
    pub step_tol: f64,
    pub sweep_eps: Vec<f64>,
    pub gronwall_amplitude: f64,
    pub gronwall_a: f64,
    pub gronwall_s: f64,
    pub gronwall_x0: f64,
    pub bench_levels: usize,
    pub mms_levels: usize,
    pub ineq_draws: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: SolverParams::default(),
            length: 40.0,
            n_nodes: 2049,
            data: DataSpec::default(),
            experiment: Experiment::Solve,
            out: "out".into(),
            energy_every: 1,
            snapshot_every: 100,
            seed: 0,
            compat_tol: 1e-3,
            estimate_tol: 0.0,
            identity_tol: 1e-3,
            step_tol: 1e-8,
            sweep_eps: vec![1e-2, 1e-3, 1e-4],
            gronwall_amplitude: 1e-6,
            gronwall_a: 1.0,
            gronwall_s: 1.0,
            gronwall_x0: 4.0,
            bench_levels: 2,
            mms_levels: 3,
            ineq_draws: 1000,
        }
    }
}

impl RunConfig {
    pub fn grid(&self) -> Result<GridSpec> {
        build_grid(self.length, self.n_nodes)
    }

    pub fn tolerances(&self) -> crate::energy::Tolerances {
        crate::energy::Tolerances {
            estimate: self.estimate_tol,
            identity: self.identity_tol,
            step: self.step_tol,
        }
    }
}

// Field accessors keyed by name. The table drives parsing, echo and
// validation so that the three never disagree.
enum Slot<'a> {
    Int(&'a mut i64),
    Real(&'a mut f64),
    Str(&'a mut String),
    Reals(&'a mut Vec<f64>),
}

const KEYS: [&str; 33] = [
    "k",
    "eps",
    "dt",
    "T",
    "picard_tol",
    "picard_max_iters",
    "stencil_order",
    "compat_tol",
    "L",
    "n",
    "data",
    "a",
    "s",
    "x0",
    "c",
    "data_file",
    "smooth_passes",
    "experiment",
    "out",
    "energy_every",
    "snapshot_every",
    "seed",
    "estimate_tol",
    "identity_tol",
    "step_tol",
    "sweep_eps",
    "gronwall_amplitude",
    "gronwall_a",
    "gronwall_s",
    "gronwall_x0",
    "bench_levels",
    "mms_levels",
    "ineq_draws",
];

/// Loosely typed mirror of [`RunConfig`] used while reading.
#[derive(Debug, Clone)]
struct Raw {
    ints: [i64; 11],
    reals: [f64; 17],
    strs: [String; 4],
    sweep: Vec<f64>,
}

impl Raw {
    fn from_config(c: &RunConfig) -> Raw {
        let p = &c.params;
        let d = &c.data;
        Raw {
            ints: [
                p.k as i64,
                p.picard_max_iters as i64,
                p.stencil.accuracy() as i64,
                c.n_nodes as i64,
                d.smooth_passes as i64,
                c.energy_every as i64,
                c.snapshot_every as i64,
                c.seed as i64,
                c.bench_levels as i64,
                c.mms_levels as i64,
                c.ineq_draws as i64,
            ],
            reals: [
                p.eps,
                p.dt,
                p.t_final,
                p.picard_tol,
                c.compat_tol,
                c.length,
                d.a,
                d.s,
                d.x0,
                d.c,
                c.estimate_tol,
                c.identity_tol,
                c.step_tol,
                c.gronwall_amplitude,
                c.gronwall_a,
                c.gronwall_s,
                c.gronwall_x0,
            ],
            strs: [
                d.family.name().to_string(),
                d.path.clone(),
                c.experiment.name().to_string(),
                c.out.clone(),
            ],
            sweep: c.sweep_eps.clone(),
        }
    }

    fn slot(&mut self, key: &str) -> Option<Slot<'_>> {
        Some(match key {
            "k" => Slot::Int(&mut self.ints[0]),
            "picard_max_iters" => Slot::Int(&mut self.ints[1]),
            "stencil_order" => Slot::Int(&mut self.ints[2]),
            "n" => Slot::Int(&mut self.ints[3]),
            "smooth_passes" => Slot::Int(&mut self.ints[4]),
            "energy_every" => Slot::Int(&mut self.ints[5]),
            "snapshot_every" => Slot::Int(&mut self.ints[6]),
            "seed" => Slot::Int(&mut self.ints[7]),
            "bench_levels" => Slot::Int(&mut self.ints[8]),
            "mms_levels" => Slot::Int(&mut self.ints[9]),
            "ineq_draws" => Slot::Int(&mut self.ints[10]),
            "eps" => Slot::Real(&mut self.reals[0]),
            "dt" => Slot::Real(&mut self.reals[1]),
            "T" => Slot::Real(&mut self.reals[2]),
            "picard_tol" => Slot::Real(&mut self.reals[3]),
            "compat_tol" => Slot::Real(&mut self.reals[4]),
            "L" => Slot::Real(&mut self.reals[5]),
            "a" => Slot::Real(&mut self.reals[6]),
            "s" => Slot::Real(&mut self.reals[7]),
            "x0" => Slot::Real(&mut self.reals[8]),
            "c" => Slot::Real(&mut self.reals[9]),
            "estimate_tol" => Slot::Real(&mut self.reals[10]),
            "identity_tol" => Slot::Real(&mut self.reals[11]),
            "step_tol" => Slot::Real(&mut self.reals[12]),
            "gronwall_amplitude" => Slot::Real(&mut self.reals[13]),
            "gronwall_a" => Slot::Real(&mut self.reals[14]),
            "gronwall_s" => Slot::Real(&mut self.reals[15]),
            "gronwall_x0" => Slot::Real(&mut self.reals[16]),
            "data" => Slot::Str(&mut self.strs[0]),
            "data_file" => Slot::Str(&mut self.strs[1]),
            "experiment" => Slot::Str(&mut self.strs[2]),
            "out" => Slot::Str(&mut self.strs[3]),
            "sweep_eps" => Slot::Reals(&mut self.sweep),
            _ => return None,
        })
    }
}

fn line_of(text: &str, key: &str) -> usize {
    for (i, line) in text.lines().enumerate() {
        let t = line.trim_start();
        let t = t.strip_prefix('"').unwrap_or(t);
        if let Some(rest) = t.strip_prefix(key) {
            let rest = rest.strip_prefix('"').unwrap_or(rest).trim_start();
            if rest.starts_with('=') || rest.starts_with('.') {
                return i + 1;
            }
        }
    }
    0
}

fn line_at_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e.span().map_or(0, |s| line_at_offset(text, s.start));
        let key = text
            .lines()
            .nth(line.saturating_sub(1))
            .and_then(|l| l.split('=').next())
            .map(|k| k.trim().to_string())
            .unwrap_or_default();
        Error::Parse {
            line,
            key,
            msg: e.message().trim().to_string(),
        }
    })?;
    let mut raw = Raw::from_config(&RunConfig::default());
    for (key, value) in &table {
        let line = line_of(text, key);
        let perr = |msg: String| Error::Parse {
            line,
            key: key.clone(),
            msg,
        };
        let Some(slot) = raw.slot(key) else {
            return Err(perr(match value {
                toml::Value::Table(_) => "nested keys are not allowed; use flat keys".into(),
                _ => "unknown key".into(),
            }));
        };
        match (slot, value) {
            (Slot::Int(dst), toml::Value::Integer(v)) => *dst = *v,
            (Slot::Real(dst), toml::Value::Float(v)) => *dst = *v,
            (Slot::Real(dst), toml::Value::Integer(v)) => *dst = *v as f64,
            (Slot::Str(dst), toml::Value::String(v)) => *dst = v.clone(),
            (Slot::Reals(dst), toml::Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for it in items {
                    match it {
                        toml::Value::Float(v) => out.push(*v),
                        toml::Value::Integer(v) => out.push(*v as f64),
                        other => return Err(perr(format!("expected a list of reals, found {}", other.type_str()))),
                    }
                }
                *dst = out;
            }
            (slot, v) => {
                let want = match slot {
                    Slot::Int(_) => "an integer",
                    Slot::Real(_) => "a real",
                    Slot::Str(_) => "a string",
                    Slot::Reals(_) => "a list of reals",
                };
                return Err(perr(format!("expected {want}, found {}", v.type_str())));
            }
        }
    }
    build(&raw, text)
}

fn build(raw: &Raw, text: &str) -> Result<RunConfig> {
    let err = |key: &str, msg: String| Error::Parse {
        line: line_of(text, key),
        key: key.to_string(),
        msg,
    };
    let [k, picard_max_iters, stencil, n, smooth, energy_every, snapshot_every, seed, bench_levels, mms_levels, ineq_draws] =
        raw.ints;
    let [eps, dt, t_final, picard_tol, compat_tol, length, a, s, x0, c, estimate_tol, identity_tol, step_tol, g_amp, g_a, g_s, g_x0] =
        raw.reals;

    let count = |key: &str, v: i64, min: i64| -> Result<usize> {
        if v < min {
            Err(err(key, format!("must be at least {min}, got {v}")))
        } else {
            Ok(v as usize)
        }
    };
    let positive = |key: &str, v: f64| -> Result<f64> {
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(err(key, format!("must be a positive finite real, got {v}")))
        }
    };
    let nonneg = |key: &str, v: f64| -> Result<f64> {
        if v.is_finite() && v >= 0.0 {
            Ok(v)
        } else {
            Err(err(key, format!("must be a finite real >= 0, got {v}")))
        }
    };
    let finite = |key: &str, v: f64| -> Result<f64> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(err(key, format!("must be finite, got {v}")))
        }
    };

    let k = match k {
        1..=3 => k as u32,
        4 => {
            return Err(err(
                "k",
                "k = 4 is the critical case, where solutions can blow up; supported values are 1, 2, 3".into(),
            ))
        }
        _ => return Err(err("k", format!("supported values are 1, 2, 3, got {k}"))),
    };
    if !(0.0..=1.0).contains(&eps) {
        return Err(err("eps", format!("must lie in [0, 1], got {eps}")));
    }
    let dt = positive("dt", dt)?;
    let t_final = positive("T", t_final)?;
    if dt >= t_final {
        return Err(err("dt", format!("dt = {dt} must be smaller than T = {t_final}")));
    }
    let steps = t_final / dt;
    if (steps - steps.round()).abs() > 1e-9 * steps {
        return Err(err("T", format!("T = {t_final} is not an integer multiple of dt = {dt}")));
    }
    let stencil = StencilOrder::from_accuracy(stencil)
        .ok_or_else(|| err("stencil_order", format!("must be 2 or 4, got {stencil}")))?;
    let params = SolverParams {
        k,
        eps,
        dt,
        t_final,
        picard_tol: positive("picard_tol", picard_tol)?,
        picard_max_iters: count("picard_max_iters", picard_max_iters, 1)?,
        stencil,
    };
    params.validate()?;

    let length = positive("L", length)?;
    let n_nodes = count("n", n, crate::grid::MIN_NODES as i64)?;
    build_grid(length, n_nodes).map_err(|e| err("n", e.to_string()))?;

    let family = DataFamily::parse(&raw.strs[0]).ok_or_else(|| {
        err(
            "data",
            format!("unknown family `{}` (zero, soliton, xgauss, xexp, file)", raw.strs[0]),
        )
    })?;
    if family == DataFamily::File && raw.strs[1].is_empty() {
        return Err(err("data_file", "required when data = \"file\"".into()));
    }
    let data = DataSpec {
        family,
        a: finite("a", a)?,
        s: positive("s", s)?,
        x0: finite("x0", x0)?,
        c: positive("c", c)?,
        path: raw.strs[1].clone(),
        smooth_passes: count("smooth_passes", smooth, 0)?,
    };
    let experiment = Experiment::parse(&raw.strs[2])
        .ok_or_else(|| err("experiment", format!("unknown experiment `{}`", raw.strs[2])))?;
    if raw.strs[3].is_empty() {
        return Err(err("out", "must not be empty".into()));
    }

    let sweep_eps = raw.sweep.clone();
    if sweep_eps.is_empty() {
        return Err(err("sweep_eps", "must list at least one value".into()));
    }
    for w in sweep_eps.windows(2) {
        if !(w[1] < w[0]) {
            return Err(err("sweep_eps", format!("values must be strictly decreasing ({} then {})", w[0], w[1])));
        }
    }
    if sweep_eps.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return Err(err("sweep_eps", "values must lie in (0, 1]".into()));
    }
    if seed < 0 {
        return Err(err("seed", format!("must be non-negative, got {seed}")));
    }

    Ok(RunConfig {
        params,
        length,
        n_nodes,
        data,
        experiment,
        out: raw.strs[3].clone(),
        energy_every: count("energy_every", energy_every, 1)?,
        snapshot_every: count("snapshot_every", snapshot_every, 1)?,
        seed: seed as u64,
        compat_tol: nonneg("compat_tol", compat_tol)?,
        estimate_tol: nonneg("estimate_tol", estimate_tol)?,
        identity_tol: nonneg("identity_tol", identity_tol)?,
        step_tol: nonneg("step_tol", step_tol)?,
        sweep_eps,
        gronwall_amplitude: nonneg("gronwall_amplitude", g_amp)?,
        gronwall_a: finite("gronwall_a", g_a)?,
        gronwall_s: positive("gronwall_s", g_s)?,
        gronwall_x0: finite("gronwall_x0", g_x0)?,
        bench_levels: count("bench_levels", bench_levels, 2)?,
        mms_levels: count("mms_levels", mms_levels, 2)?,
        ineq_draws: count("ineq_draws", ineq_draws, 1)?,
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn real(v: f64) -> String {
    // Debug formatting is shortest-round-trip and always reads back as a
    // TOML float ("1.0", "1e-7").
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'E', 'i', 'n']) {
        s
    } else {
        format!("{s}.0")
    }
}

/// Renders every key, defaults included, in canonical order.
pub fn echo(cfg: &RunConfig) -> String {
    let mut raw = Raw::from_config(cfg);
    let mut out = String::new();
    for key in KEYS {
        let v = match raw.slot(key).expect("every listed key has a slot") {
            Slot::Int(v) => v.to_string(),
            Slot::Real(v) => real(*v),
            Slot::Str(v) => toml::Value::String(v.clone()).to_string(),
            Slot::Reals(v) => format!("[{}]", v.iter().map(|x| real(*x)).collect::<Vec<_>>().join(", ")),
        };
        let _ = writeln!(out, "{key} = {v}");
    }
    out
}

/// Sampled initial field plus what had to be clamped at the two ends.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub u: Vec<f64>,
    /// `|u0(0)|` before it was set to zero.
    pub clamp_left: f64,
    /// `|u0(L)|` before it was set to zero.
    pub clamp_right: f64,
}

/// `a x exp(-(x - x0)² / s²)`.
pub fn xgauss(a: f64, s: f64, x0: f64) -> impl Fn(f64) -> f64 {
    move |x| a * x * (-((x - x0) / s).powi(2)).exp()
}

pub fn initial_data(cfg: &RunConfig, grid: &GridSpec) -> Result<InitialData> {
    let d = &cfg.data;
    let mut u = match d.family {
        DataFamily::Zero => vec![0.0; grid.n_nodes()],
        DataFamily::Soliton => {
            let k = cfg.params.k;
            grid.sample(|x| soliton(k, d.c, d.x0, x, 0.0))
        }
        DataFamily::Xgauss => grid.sample(xgauss(d.a, d.s, d.x0)),
        DataFamily::Xexp => grid.sample(|x| d.a * x * (-x).exp()),
        DataFamily::File => sample_file(Path::new(&d.path), grid)?,
    };
    smooth(&mut u, d.smooth_passes);
    let n = u.len();
    let clamp_left = u[0].abs();
    let clamp_right = u[n - 1].abs();
    for (what, v) in [("u0(0)", clamp_left), ("u0(L)", clamp_right)] {
        if v > cfg.compat_tol {
            return Err(Error::Precondition(format!(
                "{what} = {v:e} exceeds compat_tol = {:e}; move the data away from the boundary or enlarge L",
                cfg.compat_tol
            )));
        }
    }
    u[0] = 0.0;
    u[n - 1] = 0.0;
    Ok(InitialData {
        u,
        clamp_left,
        clamp_right,
    })
}

/// Binomial (1, 2, 1)/4 passes with the end values held fixed.
pub fn smooth(u: &mut [f64], passes: usize) {
    let n = u.len();
    if n < 3 {
        return;
    }
    let mut prev = u.to_vec();
    for _ in 0..passes {
        prev.copy_from_slice(u);
        for j in 1..n - 1 {
            u[j] = 0.25 * (prev[j - 1] + 2.0 * prev[j] + prev[j + 1]);
        }
    }
}

/// Reads `x u` pairs (whitespace or comma separated, `#` comments) and
/// interpolates linearly onto the grid; zero outside the sampled range.
pub fn sample_file(path: &Path, grid: &GridSpec) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let bad = || Error::Config(format!("{}:{}: expected two numbers `x u`", path.display(), i + 1));
        if cols.len() != 2 {
            return Err(bad());
        }
        let x: f64 = cols[0].parse().map_err(|_| bad())?;
        let v: f64 = cols[1].parse().map_err(|_| bad())?;
        if !(x.is_finite() && v.is_finite()) {
            return Err(bad());
        }
        pts.push((x, v));
    }
    if pts.len() < 2 {
        return Err(Error::Config(format!("{}: need at least two samples", path.display())));
    }
    if pts.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::Config(format!("{}: x must be strictly increasing", path.display())));
    }
    Ok(grid.sample(|x| {
        if x < pts[0].0 || x > pts[pts.len() - 1].0 {
            return 0.0;
        }
        let i = pts.partition_point(|p| p.0 <= x).clamp(1, pts.len() - 1);
        let (x0, u0) = pts[i - 1];
        let (x1, u1) = pts[i];
        u0 + (u1 - u0) * (x - x0) / (x1 - x0)
    }))
}
