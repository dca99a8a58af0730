use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tds_core::charfun::{CharFun, Verdict as Hypothesis};
use tds_core::line::{self, LineConfig, LineTrace, RayTask, Verdict};
use tds_core::polecount;
use tds_core::region::{self, norm, RegionError, RegionState};

use crate::config::{self, ConfigError, Loaded, ResolvedRegion, SystemSource, DEFAULT_FAN_COUNT};

pub const SCHEMA: &str = "tds/1";

pub enum CmdError {
    /// Schema, parse or settings problems: exit 1.
    Config(String),
    /// The computation itself failed: exit 4.
    Failed(String),
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Config(e.0)
    }
}

impl CmdError {
    pub fn code(&self) -> i32 {
        match self {
            CmdError::Config(_) => 1,
            CmdError::Failed(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CmdError::Config(m) | CmdError::Failed(m) => m,
        }
    }
}

pub struct Outcome {
    pub code: i32,
    pub summary: String,
}

#[derive(Serialize)]
struct Envelope<'a, C, R> {
    schema: &'static str,
    command: &'a str,
    config: C,
    result: R,
}

struct Out {
    dir: PathBuf,
}

impl Out {
    fn new(dir: &Path) -> Result<Self, CmdError> {
        fs::create_dir_all(dir)
            .map_err(|e| CmdError::Config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Out { dir: dir.to_path_buf() })
    }

    fn text(&self, name: &str, contents: &str) -> Result<(), CmdError> {
        let path = self.dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| CmdError::Failed(format!("cannot write {}: {e}", path.display())))
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CmdError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CmdError::Failed(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.text(name, &text)
    }
}

pub fn check(loaded: &Loaded, out: &Path) -> Result<Outcome, CmdError> {
    let cf = loaded.charfun()?;
    let report = cf.check_hypotheses();
    #[derive(Serialize)]
    struct Config<'a> {
        system: &'a SystemSource,
    }
    Out::new(out)?.json(
        "check.json",
        &Envelope {
            schema: SCHEMA,
            command: "check",
            config: Config { system: &loaded.config.system },
            result: &report,
        },
    )?;
    let mut summary = format!("{:?}", report.verdict).to_uppercase();
    for f in &report.findings {
        let _ = write!(summary, "\n  term {}: {}", f.term, f.issue);
    }
    Ok(Outcome {
        code: match report.verdict {
            Hypothesis::Pass => 0,
            Hypothesis::Warn => 2,
        },
        summary,
    })
}

fn verdict_code(v: &Verdict) -> i32 {
    match v {
        Verdict::Converged { .. } => 0,
        Verdict::Diverged { .. } | Verdict::Boundary { .. } => 3,
        Verdict::Failed { .. } => 4,
    }
}

fn describe(trace: &LineTrace) -> String {
    match &trace.verdict {
        Verdict::Converged { theta_lim } => format!("CONVERGED theta_lim = {theta_lim}"),
        Verdict::Diverged { .. } => format!("DIVERGED past theta = {}", trace.theta_final),
        Verdict::Boundary { theta } => format!("BOUNDARY at theta = {theta}"),
        Verdict::Failed { reason } => format!("FAILED: {reason}"),
    }
}

#[derive(Serialize)]
struct LineEcho<'a> {
    system: &'a SystemSource,
    start: &'a [f64],
    line: &'a LineConfig,
}

pub fn ray(loaded: &Loaded, out: &Path) -> Result<Outcome, CmdError> {
    let cf = loaded.charfun()?;
    let start = loaded.start(&cf)?;
    let direction = loaded
        .config
        .direction
        .clone()
        .ok_or_else(|| CmdError::Config("`direction` is required".into()))?;
    let task = RayTask::new(start.clone(), direction).with_config(loaded.config.line.clone());
    let trace = line::run_ray(&cf, &task).map_err(|e| CmdError::Config(e.to_string()))?;
    let out = Out::new(out)?;
    out.json(
        "ray.json",
        &Envelope {
            schema: SCHEMA,
            command: "ray",
            config: LineEcho {
                system: &loaded.config.system,
                start: &start,
                line: &trace.config,
            },
            result: &trace,
        },
    )?;
    out.text("ray.csv", &trace.to_csv())?;
    Ok(Outcome {
        code: verdict_code(&trace.verdict),
        summary: describe(&trace),
    })
}

fn fan_directions(loaded: &Loaded, cf: &CharFun) -> Result<Vec<Vec<f64>>, CmdError> {
    let n = cf.n_params();
    let dirs = match (&loaded.config.directions, n) {
        (Some(d), _) => d.clone(),
        (None, 1) => vec![vec![1.0], vec![-1.0]],
        (None, 2) => line::fan_directions(loaded.config.fan_count.unwrap_or(DEFAULT_FAN_COUNT)),
        (None, _) => {
            return Err(CmdError::Config(format!(
                "`directions` is required for {n} parameters"
            )))
        }
    };
    if dirs.is_empty() {
        return Err(CmdError::Config("the direction list is empty".into()));
    }
    if let Some(d) = dirs.iter().find(|d| d.len() != n) {
        return Err(CmdError::Config(format!(
            "direction {d:?} has {} entries, expected {n}",
            d.len()
        )));
    }
    Ok(dirs)
}

#[derive(Serialize)]
struct FanRow {
    index: usize,
    direction: Vec<f64>,
    verdict: String,
    theta_final: Option<f64>,
    end_point: Option<Vec<f64>>,
    detail: String,
}

pub fn fan(loaded: &Loaded, out: &Path) -> Result<Outcome, CmdError> {
    let cf = loaded.charfun()?;
    let start = loaded.start(&cf)?;
    loaded
        .config
        .line
        .validate()
        .map_err(|e| CmdError::Config(e.to_string()))?;
    let dirs = fan_directions(loaded, &cf)?;
    let results = line::run_fan(&cf, &start, &dirs, &loaded.config.line);
    let out = Out::new(out)?;
    let mut rows = Vec::new();
    let mut failed = 0;
    for (i, (dir, result)) in dirs.iter().zip(&results).enumerate() {
        let row = match result {
            Ok(trace) => {
                out.text(&format!("fan_{i:02}.csv"), &trace.to_csv())?;
                out.json(&format!("fan_{i:02}.json"), trace)?;
                if matches!(trace.verdict, Verdict::Failed { .. }) {
                    failed += 1;
                }
                FanRow {
                    index: i,
                    direction: trace.direction.clone(),
                    verdict: trace.verdict.name().to_string(),
                    theta_final: Some(trace.theta_final),
                    end_point: Some(trace.end_point()),
                    detail: describe(trace),
                }
            }
            Err(e) => {
                failed += 1;
                FanRow {
                    index: i,
                    direction: dir.clone(),
                    verdict: "FAILED".into(),
                    theta_final: None,
                    end_point: None,
                    detail: e.to_string(),
                }
            }
        };
        rows.push(row);
    }
    out.json(
        "fan.json",
        &Envelope {
            schema: SCHEMA,
            command: "fan",
            config: LineEcho {
                system: &loaded.config.system,
                start: &start,
                line: &loaded.config.line,
            },
            result: &rows,
        },
    )?;
    let mut summary = String::new();
    for r in &rows {
        let _ = writeln!(summary, "{:2} {:?}: {}", r.index, r.direction, r.detail);
    }
    Ok(Outcome {
        code: if failed > 0 { 4 } else { 0 },
        summary: summary.trim_end().to_string(),
    })
}

#[derive(Serialize)]
struct RegionEcho<'a> {
    system: &'a SystemSource,
    start: &'a [f64],
    region: &'a ResolvedRegion,
}

#[derive(Serialize)]
struct RegionResult<'a> {
    #[serde(flatten)]
    state: &'a RegionState,
    cells: usize,
    /// Directions in which growth reached the extent, e.g. `tau+`.
    capped: Vec<String>,
}

fn outline(ball: &region::Ball, points: usize) -> Vec<[f64; 2]> {
    (0..=points)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / points as f64;
            let u = [a.cos(), a.sin()];
            let r = ball.radius / norm(&u, ball.q);
            [ball.center[0] + r * u[0], ball.center[1] + r * u[1]]
        })
        .collect()
}

fn plot_script(cf: &CharFun) -> String {
    let names = cf.params();
    match names.len() {
        1 => format!(
            "set datafile separator \",\"\nset xlabel \"{}\"\nunset ytics\n\
             plot \"region_outlines.csv\" skip 1 using 1:2 with lines lw 3 title \"balls\", \\\n     \
             \"region_balls.csv\" skip 1 using 1:(0) with points pt 7 ps 0.5 title \"centers\"\n",
            names[0]
        ),
        2 => format!(
            "set datafile separator \",\"\nset size ratio -1\nset xlabel \"{}\"\nset ylabel \"{}\"\n\
             plot \"region_outlines.csv\" skip 1 using 1:2 with lines lc rgb \"#4477aa\" title \"balls\", \\\n     \
             \"region_polygon.csv\" skip 1 using 1:2 with lines lw 2 lc rgb \"black\" title \"outline\", \\\n     \
             \"region_balls.csv\" skip 1 using 1:2 with points pt 7 ps 0.3 lc rgb \"#aa3377\" title \"centers\"\n",
            names[0], names[1]
        ),
        _ => format!(
            "set datafile separator \",\"\nset xlabel \"{}\"\nset ylabel \"{}\"\nset zlabel \"{}\"\n\
             splot \"region_balls.csv\" skip 1 using 1:2:3:4 with points pt 7 ps variable title \"centers\"\n",
            names[0], names[1], names[2]
        ),
    }
}

pub fn region(loaded: &Loaded, out: &Path) -> Result<Outcome, CmdError> {
    let cf = loaded.charfun()?;
    let start = loaded.start(&cf)?;
    let (cfg, echo) = loaded.config.region.resolve()?;
    let state = region::grow_region(&cf, &start, &cfg).map_err(|e| match e {
        RegionError::DimensionCap(_) | RegionError::Holder { .. } | RegionError::Settings(_) => {
            CmdError::Config(e.to_string())
        }
        other => CmdError::Failed(other.to_string()),
    })?;
    let mut capped = Vec::new();
    for (k, name) in cf.params().iter().enumerate() {
        if state.lower_cap_hit[k] {
            capped.push(format!("{name}-"));
        }
        if state.upper_cap_hit[k] {
            capped.push(format!("{name}+"));
        }
    }
    let out = Out::new(out)?;
    out.json(
        "region.json",
        &Envelope {
            schema: SCHEMA,
            command: "region",
            config: RegionEcho {
                system: &loaded.config.system,
                start: &start,
                region: &echo,
            },
            result: RegionResult {
                state: &state,
                cells: state.cell_count(),
                capped: capped.clone(),
            },
        },
    )?;
    out.text("region_balls.csv", &state.balls_csv())?;
    let n = cf.n_params();
    if n <= 2 {
        let mut text = String::from("x,y\n");
        for (i, b) in state.balls.iter().enumerate() {
            if i > 0 {
                text.push('\n');
            }
            if n == 1 {
                let _ = writeln!(text, "{},0\n{},0", b.center[0] - b.radius, b.center[0] + b.radius);
            } else {
                for [x, y] in outline(b, 64) {
                    let _ = writeln!(text, "{x},{y}");
                }
            }
        }
        out.text("region_outlines.csv", &text)?;
    }
    if let Some(poly) = &state.polygon {
        let mut text = String::from("x,y\n");
        for [x, y] in poly.iter().chain(poly.first()) {
            let _ = writeln!(text, "{x},{y}");
        }
        out.text("region_polygon.csv", &text)?;
    }
    out.text("region.gp", &plot_script(&cf))?;
    Ok(Outcome {
        code: 0,
        summary: format!(
            "NU = {}, {} balls, {} cells, {} generations ({:?}){}",
            state.nu,
            state.balls.len(),
            state.cell_count(),
            state.generations,
            state.termination,
            if capped.is_empty() {
                String::new()
            } else {
                format!(", reached extent: {}", capped.join(" "))
            }
        ),
    })
}

pub fn count(loaded: &Loaded, out: &Path) -> Result<Outcome, CmdError> {
    let cf = loaded.charfun()?;
    let start = loaded.start(&cf)?;
    let report = polecount::count_unstable(&cf, &start).map_err(|e| CmdError::Failed(e.to_string()))?;
    #[derive(Serialize)]
    struct Config<'a> {
        system: &'a SystemSource,
        start: &'a [f64],
        polecount: polecount::PoleCountConfig,
    }
    Out::new(out)?.json(
        "count.json",
        &Envelope {
            schema: SCHEMA,
            command: "count",
            config: Config {
                system: &loaded.config.system,
                start: &start,
                polecount: polecount::PoleCountConfig::default(),
            },
            result: &report,
        },
    )?;
    Ok(Outcome {
        code: 0,
        summary: format!("NU = {} (residual {:.1e})", report.nu, report.residual),
    })
}

pub fn convert(loaded: &Loaded, out: &Path) -> Result<Outcome, CmdError> {
    let model = match loaded.system()? {
        config::System::Distributed(m) => m,
        config::System::CharFun(_) => {
            return Err(CmdError::Config(
                "convert expects a `distributed` or `distributed_file` system".into(),
            ))
        }
    };
    let (_, report) = model.to_charfun().map_err(|e| CmdError::Config(e.to_string()))?;
    let out = Out::new(out)?;
    out.json("charfun.json", &report.charfun)?;
    #[derive(Serialize)]
    struct Config<'a> {
        system: &'a SystemSource,
    }
    out.json(
        "convert.json",
        &Envelope {
            schema: SCHEMA,
            command: "convert",
            config: Config { system: &loaded.config.system },
            result: &report,
        },
    )?;
    let mut summary = format!(
        "order {} -> leading power {}, {} terms",
        report.order, report.leading_power, report.terms
    );
    if report.spurious_zeros_at_origin > 0 {
        let _ = write!(
            summary,
            "; multiplied by s^{}: {} spurious zero(s) at s = 0",
            report.clearing_power, report.spurious_zeros_at_origin
        );
    }
    Ok(Outcome { code: 0, summary })
}
