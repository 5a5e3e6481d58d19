//! Run configuration: a flat `key = value` namespace shared by command-line
//! flags, config files and run manifests.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, Command};
use thiserror::Error;

use zdcover_core::renorm::AffineAuto;
use zdcover_core::{staircase, windtree_plus, Origami};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown configuration key '{0}'")]
    UnknownKey(String),
    #[error("missing required setting '{0}'")]
    MissingRequired(&'static str),
    #[error("invalid value '{value}' for '{key}': {reason}")]
    Invalid {
        key: String,
        value: String,
        reason: String,
    },
    #[error("word '{word}' is not hyperbolic (trace {trace}); this task needs a pseudo-Anosov renormalization")]
    NotHyperbolic { word: String, trace: i64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Syntax {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{0}")]
    Model(String),
    #[error(transparent)]
    Usage(#[from] clap::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Build,
    Flow,
    Frobenius,
    Stats,
    Gauss,
    Expansion,
    Verify,
}

impl Task {
    pub const ALL: [Task; 7] = [
        Task::Build,
        Task::Flow,
        Task::Frobenius,
        Task::Stats,
        Task::Gauss,
        Task::Expansion,
        Task::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Build => "build",
            Task::Flow => "flow",
            Task::Frobenius => "frobenius",
            Task::Stats => "stats",
            Task::Gauss => "gauss",
            Task::Expansion => "expansion",
            Task::Verify => "verify",
        }
    }

    fn about(self) -> &'static str {
        match self {
            Task::Build => "Build a surface and print its cylinders, stratum and weights as JSON",
            Task::Flow => "Flow uniform start points and emit end points as CSV",
            Task::Frobenius => "Sample ergodic sums F_K of the Frobenius cocycle as CSV",
            Task::Stats => "Cocycle statistics: sigma, llt, lambda-u, asclt, drift, growth",
            Task::Gauss => "Evaluate oscillatory Gaussian moment integrals",
            Task::Expansion => "Compare ergodic integrals with the leading-order prediction",
            Task::Verify => "Run the acceptance battery",
        }
    }

    fn parse(s: &str) -> Option<Task> {
        Task::ALL.into_iter().find(|t| t.name() == s)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Staircase(usize),
    Windtree,
    File(PathBuf),
}

impl ModelSpec {
    pub fn build(&self) -> Result<Origami, ConfigError> {
        match self {
            ModelSpec::Staircase(s) => staircase(*s).map_err(|e| ConfigError::Model(e.to_string())),
            ModelSpec::Windtree => Ok(windtree_plus()),
            ModelSpec::File(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.clone(),
                    source,
                })?;
                Origami::from_text(&text)
                    .map_err(|e| ConfigError::Model(format!("{}: {e}", p.display())))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatTask {
    Sigma,
    Llt,
    LambdaU,
    Asclt,
    Drift,
    Growth,
}

impl StatTask {
    const NAMES: [(&'static str, StatTask); 6] = [
        ("sigma", StatTask::Sigma),
        ("llt", StatTask::Llt),
        ("lambda-u", StatTask::LambdaU),
        ("asclt", StatTask::Asclt),
        ("drift", StatTask::Drift),
        ("growth", StatTask::Growth),
    ];

    pub fn name(self) -> &'static str {
        Self::NAMES
            .iter()
            .find(|(_, t)| *t == self)
            .map(|(n, _)| *n)
            .unwrap_or("?")
    }

    fn needs_hyperbolic(self) -> bool {
        matches!(self, StatTask::Sigma | StatTask::Llt | StatTask::LambdaU)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FlowDir {
    Stable,
    Unstable,
    Angle(f64),
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Task,
    pub model: ModelSpec,
    pub word: Option<String>,
    pub stat: StatTask,
    pub dir: FlowDir,
    pub t: Vec<f64>,
    pub big_t: Vec<f64>,
    pub k: Vec<usize>,
    pub samples: u64,
    pub lags: usize,
    pub u: Vec<f64>,
    pub j: usize,
    pub sigma: f64,
    pub l: Vec<f64>,
    pub cov: Option<[f64; 3]>,
    pub oracle: bool,
    pub suite: String,
    pub seed: u64,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

struct Key {
    name: &'static str,
    value: &'static str,
    help: &'static str,
    flag: bool,
}

const fn key(name: &'static str, value: &'static str, help: &'static str) -> Key {
    Key {
        name,
        value,
        help,
        flag: false,
    }
}

/// Every recognised key. Command-line flags are `--<name>`.
const KEYS: [Key; 21] = [
    key(
        "command",
        "NAME",
        "Subcommand (config files and manifests only)",
    ),
    key(
        "model",
        "NAME",
        "staircase | windtree | file [default: staircase, or file when --file is given]",
    ),
    key("s", "N", "Staircase size [default: 2]"),
    key("file", "PATH", "Surface description in origami text format"),
    key(
        "word",
        "HV",
        "Twist word over {h, v}; \"hv\" means D_h after D_v",
    ),
    key(
        "task",
        "NAME",
        "stats task: sigma | llt | lambda-u | asclt | drift | growth [default: sigma]",
    ),
    key(
        "dir",
        "DIR",
        "Flow direction: stable | unstable | angle in radians [default: stable]",
    ),
    key("t", "LIST", "Flow times, comma separated [default: 1000]"),
    key(
        "T",
        "LIST",
        "Expansion times, comma separated [default: 1e3,1e4,1e5,1e6]",
    ),
    key("K", "LIST", "Renormalization depths, comma separated"),
    key("samples", "N", "Number of samples (asclt: walk length)"),
    key("lags", "J", "Green-Kubo truncation lag [default: 20]"),
    key(
        "u",
        "LIST",
        "Frequency vector for lambda-u [default: 0.1 per coordinate]",
    ),
    key("j", "J", "Gaussian moment order [default: 0]"),
    key(
        "sigma",
        "S",
        "Gaussian width; asclt step deviation [default: 1]",
    ),
    key(
        "L",
        "LIST",
        "Gaussian frequency, one value or two for the vector moment [default: 0]",
    ),
    key(
        "Sigma",
        "S11,S12,S22",
        "Symmetric positive definite matrix for the vector moment",
    ),
    Key {
        name: "oracle",
        value: "",
        help: "Also print the quadrature oracle",
        flag: true,
    },
    key("suite", "NAME", "Acceptance suite [default: all]"),
    key("seed", "N", "Random seed [default: 7]"),
    key(
        "workers",
        "N",
        "Worker threads [default: ZDCOVER_WORKERS, else available parallelism]",
    ),
];

const OUT_KEY: &str = "out";
const CONFIG_KEY: &str = "config";

pub fn command() -> Command {
    let mut root = Command::new("zdcover")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Translation flows on Z^d covers of square-tiled surfaces")
        .arg_required_else_help(true)
        .arg(
            Arg::new(OUT_KEY)
                .long(OUT_KEY)
                .value_name("PATH")
                .global(true)
                .help("Output file; a manifest is written next to it"),
        )
        .arg(
            Arg::new(CONFIG_KEY)
                .long(CONFIG_KEY)
                .value_name("PATH")
                .global(true)
                .help("Flat key = value config file, or a run manifest"),
        );
    for k in KEYS.iter().filter(|k| k.name != "command") {
        let mut arg = Arg::new(k.name).long(k.name).help(k.help).global(true);
        arg = if k.flag {
            arg.action(ArgAction::SetTrue)
        } else {
            arg.value_name(k.value).allow_negative_numbers(true)
        };
        root = root.arg(arg);
    }
    for t in Task::ALL {
        root = root.subcommand(Command::new(t.name()).about(t.about()));
    }
    root
}

fn is_key(name: &str) -> bool {
    name == OUT_KEY || KEYS.iter().any(|k| k.name == name)
}

/// Read a flat `key = value` file (`#` starts a comment), or the `config`
/// object of a JSON run manifest.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut map = BTreeMap::new();
    if text.trim_start().starts_with('{') {
        let syntax = |msg: String| ConfigError::Syntax {
            path: path.to_path_buf(),
            line: 1,
            msg,
        };
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| syntax(e.to_string()))?;
        let obj = v
            .get("config")
            .and_then(|c| c.as_object())
            .ok_or_else(|| syntax("manifest has no config object".into()))?;
        for (k, val) in obj {
            let s = val
                .as_str()
                .ok_or_else(|| syntax(format!("value of '{k}' is not a string")))?;
            map.insert(k.clone(), s.to_string());
        }
    } else {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                path: path.to_path_buf(),
                line: i + 1,
                msg: "expected key = value".into(),
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    if let Some(bad) = map.keys().find(|k| !is_key(k)) {
        return Err(ConfigError::UnknownKey(bad.clone()));
    }
    Ok(map)
}

/// Parse `argv` (program name first), layering command-line values over
/// the `--config` file.
pub fn parse_config<I, S>(argv: I) -> Result<RunConfig, ConfigError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let m = command().try_get_matches_from(argv)?;
    let mut map = match m.get_one::<String>(CONFIG_KEY) {
        Some(p) => read_config_file(Path::new(p))?,
        None => BTreeMap::new(),
    };
    if let Some((name, _)) = m.subcommand() {
        map.insert("command".into(), name.into());
    }
    if let Some(v) = m.get_one::<String>(OUT_KEY) {
        map.insert(OUT_KEY.into(), v.clone());
    }
    for k in KEYS.iter().filter(|k| k.name != "command") {
        if k.flag {
            if m.get_flag(k.name) {
                map.insert(k.name.into(), "true".into());
            }
        } else if let Some(v) = m.get_one::<String>(k.name) {
            map.insert(k.name.into(), v.clone());
        }
    }
    RunConfig::from_map(&map)
}

fn invalid(key: &str, value: &str, reason: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        value: value.into(),
        reason: reason.to_string(),
    }
}

fn parse_one<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    v.trim().parse().map_err(|e| invalid(key, v, e))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    let out: Vec<T> = v
        .split(',')
        .map(|x| parse_one(key, x))
        .collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err(invalid(key, v, "empty list"));
    }
    Ok(out)
}

/// Integer lists also accept float notation such as `1e3`.
fn parse_count(key: &str, v: &str) -> Result<u64, ConfigError> {
    let x: f64 = parse_one(key, v)?;
    if x < 0.0 || x.fract() != 0.0 || x > 9.007e15 {
        return Err(invalid(key, v, "expected a non-negative integer"));
    }
    Ok(x as u64)
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        if let Some(bad) = map.keys().find(|k| !is_key(k)) {
            return Err(ConfigError::UnknownKey(bad.clone()));
        }
        let get = |k: &str| map.get(k).map(String::as_str);
        let command = match get("command") {
            Some(c) => Task::parse(c).ok_or_else(|| invalid("command", c, "unknown subcommand"))?,
            None => return Err(ConfigError::MissingRequired("command")),
        };
        let s = get("s")
            .map(|v| parse_count("s", v))
            .transpose()?
            .unwrap_or(2) as usize;
        let model = match (get("model"), get("file")) {
            (Some("staircase"), _) => ModelSpec::Staircase(s),
            (Some("windtree"), _) => ModelSpec::Windtree,
            (Some("file") | None, Some(f)) => ModelSpec::File(PathBuf::from(f)),
            (Some("file"), None) => return Err(ConfigError::MissingRequired("file")),
            (None, None) => ModelSpec::Staircase(s),
            (Some(other), _) => {
                return Err(invalid(
                    "model",
                    other,
                    "expected staircase, windtree or file",
                ))
            }
        };
        let word = get("word").map(str::to_string);
        let stat = match get("task") {
            Some(v) => StatTask::NAMES
                .iter()
                .find(|(n, _)| *n == v)
                .map(|(_, t)| *t)
                .ok_or_else(|| {
                    invalid(
                        "task",
                        v,
                        "expected sigma, llt, lambda-u, asclt, drift or growth",
                    )
                })?,
            None => StatTask::Sigma,
        };
        let dir = match get("dir").unwrap_or("stable") {
            "stable" => FlowDir::Stable,
            "unstable" => FlowDir::Unstable,
            v => FlowDir::Angle(parse_one("dir", v)?),
        };
        let t = get("t")
            .map(|v| parse_list::<f64>("t", v))
            .transpose()?
            .unwrap_or_else(|| vec![1e3]);
        let big_t = get("T")
            .map(|v| parse_list::<f64>("T", v))
            .transpose()?
            .unwrap_or_else(|| vec![1e3, 1e4, 1e5, 1e6]);
        for (key, list) in [("t", &t), ("T", &big_t)] {
            if list.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(invalid(
                    key,
                    &join(list),
                    "times must be finite and non-negative",
                ));
            }
        }
        let k_default: Vec<usize> = match (command, stat) {
            (Task::Stats, StatTask::Llt) => vec![30],
            (Task::Stats, StatTask::LambdaU) => vec![500],
            (Task::Stats, StatTask::Growth) => (4..=10).map(|e| 1 << e).collect(),
            _ => vec![1000],
        };
        let k = match get("K") {
            Some(v) => v
                .split(',')
                .map(|x| parse_count("K", x).map(|n| n as usize))
                .collect::<Result<_, _>>()?,
            None => k_default,
        };
        let samples_default = match (command, stat) {
            (Task::Stats, StatTask::Asclt) => 1_000_000,
            (Task::Stats, StatTask::Llt) => 1_000_000,
            (Task::Stats, StatTask::Growth) => 4000,
            (Task::Stats, _) => 100_000,
            (Task::Expansion, _) | (Task::Flow, _) => 100,
            _ => 10_000,
        };
        let samples = get("samples")
            .map(|v| parse_count("samples", v))
            .transpose()?
            .unwrap_or(samples_default);
        let lags = get("lags")
            .map(|v| parse_count("lags", v))
            .transpose()?
            .unwrap_or(20) as usize;
        let u = get("u")
            .map(|v| parse_list::<f64>("u", v))
            .transpose()?
            .unwrap_or_default();
        let j = get("j")
            .map(|v| parse_count("j", v))
            .transpose()?
            .unwrap_or(0) as usize;
        let sigma = get("sigma")
            .map(|v| parse_one::<f64>("sigma", v))
            .transpose()?
            .unwrap_or(1.0);
        let l = get("L")
            .map(|v| parse_list::<f64>("L", v))
            .transpose()?
            .unwrap_or_else(|| vec![0.0]);
        let cov = match get("Sigma") {
            Some(v) => {
                let xs = parse_list::<f64>("Sigma", v)?;
                let arr: [f64; 3] = xs
                    .try_into()
                    .map_err(|_| invalid("Sigma", v, "expected three entries s11,s12,s22"))?;
                Some(arr)
            }
            None => None,
        };
        let oracle = match get("oracle") {
            None | Some("false") => false,
            Some("true") => true,
            Some(v) => return Err(invalid("oracle", v, "expected true or false")),
        };
        let suite = get("suite").unwrap_or("all").to_string();
        if zdcover_core::verify::suite(&suite).is_none() {
            return Err(invalid(
                "suite",
                &suite,
                format!(
                    "expected one of {:?} or a criterion number",
                    zdcover_core::verify::SUITES
                ),
            ));
        }
        let seed = get("seed")
            .map(|v| parse_one("seed", v))
            .transpose()?
            .unwrap_or(7);
        let workers = get("workers")
            .map(|v| parse_count("workers", v).map(|n| n as usize))
            .transpose()?;
        let out = get(OUT_KEY).map(PathBuf::from);
        let cfg = RunConfig {
            command,
            model,
            word,
            stat,
            dir,
            t,
            big_t,
            k,
            samples,
            lags,
            u,
            j,
            sigma,
            l,
            cov,
            oracle,
            suite,
            seed,
            workers,
            out,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn needs_word(&self) -> bool {
        match self.command {
            Task::Frobenius | Task::Expansion => true,
            Task::Stats => self.stat != StatTask::Asclt,
            Task::Flow => !matches!(self.dir, FlowDir::Angle(_)),
            _ => false,
        }
    }

    fn needs_hyperbolic(&self) -> bool {
        match self.command {
            Task::Expansion => true,
            Task::Stats => self.stat.needs_hyperbolic(),
            Task::Flow => !matches!(self.dir, FlowDir::Angle(_)),
            _ => false,
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.needs_word() {
            let word = self
                .word
                .as_deref()
                .ok_or(ConfigError::MissingRequired("word"))?;
            let o = self.model.build()?;
            let a = AffineAuto::from_word(&o, word).map_err(|e| invalid("word", word, e))?;
            if self.needs_hyperbolic() && !a.is_hyperbolic() {
                return Err(ConfigError::NotHyperbolic {
                    word: word.to_string(),
                    trace: a.trace(),
                });
            }
        }
        if self.command == Task::Gauss
            && !(self.l.len() == 1 || (self.l.len() == 2 && self.cov.is_some()))
        {
            return Err(invalid(
                "L",
                &join(&self.l),
                "one value, or two together with --Sigma",
            ));
        }
        if self.k.is_empty() || (self.command == Task::Stats && self.k.contains(&0)) {
            return Err(invalid("K", &join(&self.k), "depths must be positive"));
        }
        if self.samples == 0 {
            return Err(invalid("samples", "0", "need at least one sample"));
        }
        Ok(())
    }

    /// Canonical flat form; [`RunConfig::from_map`] inverts it.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("command", self.command.name().into());
        match &self.model {
            ModelSpec::Staircase(s) => {
                put("model", "staircase".into());
                put("s", s.to_string());
            }
            ModelSpec::Windtree => put("model", "windtree".into()),
            ModelSpec::File(p) => {
                put("model", "file".into());
                put("file", p.display().to_string());
            }
        }
        if let Some(w) = &self.word {
            put("word", w.clone());
        }
        put("task", self.stat.name().into());
        put(
            "dir",
            match &self.dir {
                FlowDir::Stable => "stable".into(),
                FlowDir::Unstable => "unstable".into(),
                FlowDir::Angle(a) => a.to_string(),
            },
        );
        put("t", join(&self.t));
        put("T", join(&self.big_t));
        put("K", join(&self.k));
        put("samples", self.samples.to_string());
        put("lags", self.lags.to_string());
        if !self.u.is_empty() {
            put("u", join(&self.u));
        }
        put("j", self.j.to_string());
        put("sigma", self.sigma.to_string());
        put("L", join(&self.l));
        if let Some(c) = &self.cov {
            put("Sigma", join(c));
        }
        put("oracle", self.oracle.to_string());
        put("suite", self.suite.clone());
        put("seed", self.seed.to_string());
        if let Some(w) = self.workers {
            put("workers", w.to_string());
        }
        if let Some(o) = &self.out {
            put(OUT_KEY, o.display().to_string());
        }
        m
    }
}
