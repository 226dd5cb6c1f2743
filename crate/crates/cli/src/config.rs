//! Experiment description: a flat `key = value` file with `[section]`
//! headers. `#` starts a comment. Every float is written back with 17
//! significant digits, so an echoed file parses to an identical config.
//!
//! ```text
//! beta = 5
//! outputs = out
//!
//! [curve]
//! kind = circle
//! radius = 1
//!
//! [mesh]
//! base_panels = 32
//!
//! [sweep]
//! levels = 5
//! ```
//!
//! Omitted sections and keys take defaults derived from the curve.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;

use punctura::bsop::SearchRange;
use punctura::geometry::{CurveSpec, MeshParams};
use punctura::oracles::GridSpec;
use punctura::perturb;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub eps0: f64,
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub curve: CurveSpec,
    pub beta: f64,
    pub mesh: MeshParams,
    pub sweep: SweepSettings,
    pub search: SearchRange,
    pub grid: GridSpec,
    pub outputs: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}, field `{}`: {}", self.field, self.message),
            None => write!(f, "field `{}`: {}", self.field, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: Option<usize>, field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

const SECTIONS: [&str; 5] = ["curve", "mesh", "sweep", "search", "grid"];

fn allowed(section: &str) -> &'static [&'static str] {
    match section {
        "" => &["beta", "outputs"],
        "curve" => &["kind", "radius", "half_length", "half_angle", "smoothing_radius"],
        "mesh" => &["base_panels", "grading_ratio", "min_spacing", "order"],
        "sweep" => &["eps0", "levels"],
        "search" => &["kappa_min", "kappa_max", "tol"],
        "grid" => &["half_width", "h"],
        _ => &[],
    }
}

/// Raw `section.key -> (value, line)` entries.
struct Entries(BTreeMap<String, (String, usize)>);

impl Entries {
    fn name(section: &str, key: &str) -> String {
        if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        }
    }

    fn raw(&self, section: &str, key: &str) -> Option<(&str, usize)> {
        self.0.get(&Self::name(section, key)).map(|(v, l)| (v.as_str(), *l))
    }

    fn float(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        let Some((v, line)) = self.raw(section, key) else {
            return Ok(None);
        };
        let name = Self::name(section, key);
        let x: f64 = v
            .parse()
            .map_err(|_| err(Some(line), &name, format!("`{v}` is not a number")))?;
        if !(x.is_finite() && x > 0.0) {
            return Err(err(Some(line), &name, format!("must be positive and finite, got {v}")));
        }
        Ok(Some(x))
    }

    fn req_float(&self, section: &str, key: &str) -> Result<f64, ConfigError> {
        self.float(section, key)?
            .ok_or_else(|| err(None, &Self::name(section, key), "missing"))
    }

    fn count(&self, section: &str, key: &str) -> Result<Option<usize>, ConfigError> {
        let Some((v, line)) = self.raw(section, key) else {
            return Ok(None);
        };
        let name = Self::name(section, key);
        let n: usize = v
            .parse()
            .map_err(|_| err(Some(line), &name, format!("`{v}` is not a positive integer")))?;
        if n == 0 {
            return Err(err(Some(line), &name, "must be positive"));
        }
        Ok(Some(n))
    }
}

fn tokenize(text: &str) -> Result<Entries, ConfigError> {
    let mut map = BTreeMap::new();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(Some(line), content, "unterminated section header"))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(err(Some(line), name, "unknown section"));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(Some(line), content, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        let name = Entries::name(&section, key);
        if !allowed(&section).contains(&key) {
            return Err(err(Some(line), &name, "unknown key"));
        }
        if value.is_empty() {
            return Err(err(Some(line), &name, "empty value"));
        }
        if let Some((_, first)) = map.insert(name.clone(), (value.to_string(), line)) {
            return Err(err(Some(line), &name, format!("duplicate key, first set on line {first}")));
        }
    }
    Ok(Entries(map))
}

fn parse_curve(e: &Entries) -> Result<CurveSpec, ConfigError> {
    let (kind, line) = e
        .raw("curve", "kind")
        .ok_or_else(|| err(None, "curve.kind", "missing"))?;
    let spec = match kind {
        "circle" => CurveSpec::Circle {
            radius: e.req_float("curve", "radius")?,
        },
        "segment" => CurveSpec::Segment {
            half_length: e.req_float("curve", "half_length")?,
        },
        "smoothed_broken_line" => CurveSpec::SmoothedBrokenLine {
            half_angle: e.req_float("curve", "half_angle")?,
            smoothing_radius: e.req_float("curve", "smoothing_radius")?,
            half_length: e.req_float("curve", "half_length")?,
        },
        "mollified_broken_line" => CurveSpec::MollifiedBrokenLine {
            half_angle: e.req_float("curve", "half_angle")?,
            smoothing_radius: e.req_float("curve", "smoothing_radius")?,
            half_length: e.req_float("curve", "half_length")?,
        },
        other => {
            return Err(err(
                Some(line),
                "curve.kind",
                format!("unknown curve `{other}`; expected circle, segment, smoothed_broken_line or mollified_broken_line"),
            ))
        }
    };
    let used: &[&str] = match spec {
        CurveSpec::Circle { .. } => &["kind", "radius"],
        CurveSpec::Segment { .. } => &["kind", "half_length"],
        _ => &["kind", "half_angle", "smoothing_radius", "half_length"],
    };
    for key in allowed("curve") {
        if !used.contains(key) {
            if let Some((_, l)) = e.raw("curve", key) {
                return Err(err(Some(l), &format!("curve.{key}"), format!("not a parameter of `{kind}`")));
            }
        }
    }
    spec.validate()
        .map_err(|x| err(Some(line), "curve", x.to_string()))?;
    Ok(spec)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let e = tokenize(text)?;
        let curve = parse_curve(&e)?;
        let beta = e.req_float("", "beta")?;

        let d = MeshParams::default();
        let mesh = MeshParams {
            base_panels: e.count("mesh", "base_panels")?.unwrap_or(d.base_panels),
            grading_ratio: e.float("mesh", "grading_ratio")?.unwrap_or(d.grading_ratio),
            min_spacing: e.float("mesh", "min_spacing")?.unwrap_or(d.min_spacing),
            order: e.count("mesh", "order")?.unwrap_or(d.order),
        };
        mesh.validate().map_err(|x| err(None, "mesh", x.to_string()))?;

        let eps0 = match e.float("sweep", "eps0")? {
            Some(x) => x,
            // Straight curves cannot be swept; any positive placeholder does.
            None => perturb::default_eps0(&curve).unwrap_or(curve.total_length() / 64.0),
        };
        let levels = e.count("sweep", "levels")?.unwrap_or(5);
        if !(3..=12).contains(&levels) {
            let line = e.raw("sweep", "levels").map(|(_, l)| l);
            return Err(err(line, "sweep.levels", format!("must lie in [3, 12], got {levels}")));
        }

        let ds = SearchRange::for_curve(&curve, beta);
        let search = SearchRange {
            kappa_min: e.float("search", "kappa_min")?.unwrap_or(ds.kappa_min),
            kappa_max: e.float("search", "kappa_max")?.unwrap_or(ds.kappa_max),
            tol: e.float("search", "tol")?.unwrap_or(ds.tol),
        };
        if search.kappa_max <= search.kappa_min {
            return Err(err(None, "search", "kappa_max must exceed kappa_min"));
        }

        let grid = GridSpec {
            half_width: e.float("grid", "half_width")?.unwrap_or(6.0),
            h: e.float("grid", "h")?.unwrap_or(0.02),
        };
        grid.validate().map_err(|x| err(None, "grid", x.to_string()))?;

        let outputs = PathBuf::from(e.raw("", "outputs").map_or("out", |(v, _)| v));
        Ok(Self {
            curve,
            beta,
            mesh,
            sweep: SweepSettings { eps0, levels },
            search,
            grid,
            outputs,
        })
    }

    /// Complete, explicit form of the config; parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let f = fmt_float;
        let _ = writeln!(s, "beta = {}", f(self.beta));
        let _ = writeln!(s, "outputs = {}", self.outputs.display());
        let _ = writeln!(s, "\n[curve]");
        match self.curve {
            CurveSpec::Circle { radius } => {
                let _ = writeln!(s, "kind = circle\nradius = {}", f(radius));
            }
            CurveSpec::Segment { half_length } => {
                let _ = writeln!(s, "kind = segment\nhalf_length = {}", f(half_length));
            }
            CurveSpec::SmoothedBrokenLine {
                half_angle,
                smoothing_radius,
                half_length,
            }
            | CurveSpec::MollifiedBrokenLine {
                half_angle,
                smoothing_radius,
                half_length,
            } => {
                let kind = if matches!(self.curve, CurveSpec::SmoothedBrokenLine { .. }) {
                    "smoothed_broken_line"
                } else {
                    "mollified_broken_line"
                };
                let _ = writeln!(
                    s,
                    "kind = {kind}\nhalf_angle = {}\nsmoothing_radius = {}\nhalf_length = {}",
                    f(half_angle),
                    f(smoothing_radius),
                    f(half_length)
                );
            }
        }
        let m = &self.mesh;
        let _ = writeln!(
            s,
            "\n[mesh]\nbase_panels = {}\ngrading_ratio = {}\nmin_spacing = {}\norder = {}",
            m.base_panels,
            f(m.grading_ratio),
            f(m.min_spacing),
            m.order
        );
        let _ = writeln!(s, "\n[sweep]\neps0 = {}\nlevels = {}", f(self.sweep.eps0), self.sweep.levels);
        let r = &self.search;
        let _ = writeln!(
            s,
            "\n[search]\nkappa_min = {}\nkappa_max = {}\ntol = {}",
            f(r.kappa_min),
            f(r.kappa_max),
            f(r.tol)
        );
        let _ = writeln!(s, "\n[grid]\nhalf_width = {}\nh = {}", f(self.grid.half_width), f(self.grid.h));
        s
    }
}

/// 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}
