//! Run configuration shared by the command-line front end and config files.
//!
//! Config files are flat `key = value` text, one entry per line; `#` starts a comment.
//! Lists are comma separated.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::hdg::{IncrementNorm, SolverConfig};
use crate::mesh::ElemKind;
use crate::reference::MAX_DEGREE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Converge,
    Adapt,
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleId {
    Ex1,
    Ex2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Newton,
    FixedPoint,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityChoice {
    Uniform,
    Ring,
    Bell,
    Shock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainChoice {
    Square,
    Cylinder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContinuationChoice {
    /// On for the shock density only.
    Auto,
    On,
    Off,
}

macro_rules! keyword_enum {
    ($ty:ty, $what:literal, $($variant:path => $name:literal),+ $(,)?) => {
        impl $ty {
            pub fn name(self) -> &'static str {
                match self {
                    $($variant => $name,)+
                }
            }

            pub fn parse(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)+
                    _ => Err(Error::InvalidArgument(format!(concat!("unknown ", $what, " '{}'"), s))),
                }
            }
        }
    };
}

keyword_enum!(Command, "command", Command::Converge => "converge", Command::Adapt => "adapt", Command::Selftest => "selftest");
keyword_enum!(ExampleId, "example", ExampleId::Ex1 => "ex1", ExampleId::Ex2 => "ex2");
keyword_enum!(
    MethodChoice,
    "method",
    MethodChoice::Newton => "newton",
    MethodChoice::FixedPoint => "fixed-point",
    MethodChoice::Both => "both",
);
keyword_enum!(
    DensityChoice,
    "density",
    DensityChoice::Uniform => "uniform",
    DensityChoice::Ring => "ring",
    DensityChoice::Bell => "bell",
    DensityChoice::Shock => "shock",
);
keyword_enum!(DomainChoice, "domain", DomainChoice::Square => "square", DomainChoice::Cylinder => "cylinder");
keyword_enum!(
    ContinuationChoice,
    "continuation mode",
    ContinuationChoice::Auto => "auto",
    ContinuationChoice::On => "on",
    ContinuationChoice::Off => "off",
);

pub fn parse_elem(s: &str) -> Result<ElemKind> {
    match s {
        "tri" => Ok(ElemKind::Triangle),
        "quad" => Ok(ElemKind::Quadrilateral),
        _ => Err(Error::InvalidArgument(format!("unknown element kind '{s}'"))),
    }
}

pub fn elem_name(kind: ElemKind) -> &'static str {
    match kind {
        ElemKind::Triangle => "tri",
        ElemKind::Quadrilateral => "quad",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    /// Run subdirectory name; derived from the parameters when absent.
    pub name: Option<String>,
    pub example: ExampleId,
    /// Radius parameter of example 2.
    pub radius: f64,
    pub elem: ElemKind,
    pub degrees: Vec<usize>,
    pub resolutions: Vec<usize>,
    pub method: MethodChoice,
    pub density: DensityChoice,
    pub coef: Vec<f64>,
    pub grid: [usize; 2],
    pub domain: DomainChoice,
    pub tau: f64,
    pub newton_tol: f64,
    pub fp_tol: f64,
    pub fp_norm: IncrementNorm,
    pub max_iter: usize,
    pub continuation: ContinuationChoice,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SolverConfig::default();
        RunConfig {
            command: Command::Converge,
            name: None,
            example: ExampleId::Ex1,
            radius: 2.0,
            elem: ElemKind::Triangle,
            degrees: vec![1, 2, 3],
            resolutions: vec![4, 8, 16, 32],
            method: MethodChoice::Newton,
            density: DensityChoice::Uniform,
            coef: Vec::new(),
            grid: [10, 10],
            domain: DomainChoice::Square,
            tau: s.tau,
            newton_tol: s.newton_tol,
            fp_tol: s.fp_tol,
            fp_norm: s.fp_norm,
            max_iter: s.max_iter,
            continuation: ContinuationChoice::Auto,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("invalid value '{v}' for '{key}'")))
}

pub fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    let v = v.trim();
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| parse_num(key, x)).collect()
}

/// Parses `NxM`.
pub fn parse_grid(v: &str) -> Result<[usize; 2]> {
    let (a, b) = v
        .trim()
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::InvalidArgument(format!("grid must be NxM, got '{v}'")))?;
    Ok([parse_num("grid", a)?, parse_num("grid", b)?])
}

impl RunConfig {
    /// Applies one `key = value` entry.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "command" => self.command = Command::parse(v)?,
            "name" => self.name = (!v.is_empty()).then(|| v.to_string()),
            "example" => self.example = ExampleId::parse(v)?,
            "R" => self.radius = parse_num(key, v)?,
            "mesh" => self.elem = parse_elem(v)?,
            "p" => self.degrees = parse_list(key, v)?,
            "n" => self.resolutions = parse_list(key, v)?,
            "method" => self.method = MethodChoice::parse(v)?,
            "density" => self.density = DensityChoice::parse(v)?,
            "coef" => self.coef = parse_list(key, v)?,
            "grid" => self.grid = parse_grid(v)?,
            "domain" => self.domain = DomainChoice::parse(v)?,
            "tau" => self.tau = parse_num(key, v)?,
            "newton_tol" => self.newton_tol = parse_num(key, v)?,
            "fp_tol" => self.fp_tol = parse_num(key, v)?,
            "fp_norm" => self.fp_norm = IncrementNorm::parse(v)?,
            "max_iter" => self.max_iter = parse_num(key, v)?,
            "continuation" => self.continuation = ContinuationChoice::parse(v)?,
            "out" => self.out_dir = PathBuf::from(v),
            other => return Err(Error::InvalidArgument(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Applies every entry of a config text on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("line {}: expected key = value", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Every key in a fixed order; floats use the shortest representation that parses back exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("command", self.command.name().into());
        kv("name", self.name.clone().unwrap_or_default());
        kv("example", self.example.name().into());
        kv("R", format!("{:?}", self.radius));
        kv("mesh", elem_name(self.elem).into());
        kv("p", join(&self.degrees));
        kv("n", join(&self.resolutions));
        kv("method", self.method.name().into());
        kv("density", self.density.name().into());
        kv("coef", self.coef.iter().map(|c| format!("{c:?}")).collect::<Vec<_>>().join(","));
        kv("grid", format!("{}x{}", self.grid[0], self.grid[1]));
        kv("domain", self.domain.name().into());
        kv("tau", format!("{:?}", self.tau));
        kv("newton_tol", format!("{:?}", self.newton_tol));
        kv("fp_tol", format!("{:?}", self.fp_tol));
        kv("fp_norm", self.fp_norm.name().into());
        kv("max_iter", self.max_iter.to_string());
        kv("continuation", self.continuation.name().into());
        kv("out", self.out_dir.display().to_string());
        s
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            tau: self.tau,
            newton_tol: self.newton_tol,
            fp_tol: self.fp_tol,
            fp_norm: self.fp_norm,
            max_iter: self.max_iter,
            ..SolverConfig::default()
        }
    }

    /// Checks the invariants relevant to `self.command`.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        // selftest takes tau as the quantity under test
        if self.command != Command::Selftest {
            self.solver_config().validate()?;
        }
        if let Some(n) = &self.name {
            if n.contains(['/', '\\']) || n == "." || n == ".." {
                return bad(format!("invalid run name '{n}'"));
            }
        }
        match self.command {
            Command::Converge => {
                if self.resolutions.is_empty() {
                    return bad("resolution list is empty".into());
                }
                if self.resolutions.contains(&0) {
                    return bad("resolutions must be positive".into());
                }
                if self.degrees.is_empty() {
                    return bad("degree list is empty".into());
                }
                if self.degrees.iter().any(|p| !(1..=MAX_DEGREE).contains(p)) {
                    return bad(format!("degrees must lie in 1..={MAX_DEGREE}"));
                }
                if self.example == ExampleId::Ex2 && !(self.radius > std::f64::consts::SQRT_2) {
                    return bad(format!("example 2 needs R > sqrt(2), got {}", self.radius));
                }
            }
            Command::Adapt => {
                if self.degrees.len() != 1 || !(1..=MAX_DEGREE).contains(&self.degrees[0]) {
                    return bad(format!("adapt takes a single degree in 1..={MAX_DEGREE}"));
                }
                if self.grid.contains(&0) {
                    return bad("grid dimensions must be positive".into());
                }
                let arity = if self.density == DensityChoice::Uniform { 0 } else { 3 };
                if self.coef.len() != arity {
                    return bad(format!("{} density takes {arity} coefficients", self.density.name()));
                }
            }
            Command::Selftest => {}
        }
        Ok(())
    }

    /// Defaults that depend on the command: adaptation runs use `p = 3`, and the cylinder grid
    /// is always quadrilateral.
    pub fn for_command(command: Command) -> Self {
        let mut c = RunConfig {
            command,
            ..RunConfig::default()
        };
        if command == Command::Adapt {
            c.degrees = vec![3];
        }
        c
    }

    /// Applies settings implied by others.
    pub fn normalize(&mut self) {
        if self.command == Command::Adapt && self.domain == DomainChoice::Cylinder {
            self.elem = ElemKind::Quadrilateral;
        }
    }

    /// Run subdirectory name.
    pub fn run_name(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        match self.command {
            Command::Converge => {
                let ex = match self.example {
                    ExampleId::Ex1 => "ex1".to_string(),
                    ExampleId::Ex2 => format!("ex2-R{}", self.radius),
                };
                format!(
                    "converge-{ex}-{}-p{}-n{}-{}",
                    elem_name(self.elem),
                    join(&self.degrees).replace(',', "_"),
                    join(&self.resolutions).replace(',', "_"),
                    self.method.name()
                )
            }
            Command::Adapt => format!(
                "adapt-{}-{}-{}x{}-{}-p{}",
                self.domain.name(),
                self.density.name(),
                self.grid[0],
                self.grid[1],
                elem_name(self.elem),
                join(&self.degrees)
            ),
            Command::Selftest => "selftest".into(),
        }
    }
}
