//! Task execution and artifact writing.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use zdcover_core::asymptotics::{compare_expansion, FlowSetup};
use zdcover_core::flow::flow;
use zdcover_core::gauss::{moment, quad_oracle, quad_oracle_2d, vec_moment, Cov2};
use zdcover_core::mc::{collect, resolve_workers, uniform_point};
use zdcover_core::stats::{
    asclt_average, average_drift, green_kubo, lambda_u, llt_histogram, sample_sums,
    variance_growth, FrobeniusCocycle,
};
use zdcover_core::verify::{pins, suite, Battery};
use zdcover_core::{AffineAuto, Direction, Observable, Origami};

use crate::config::{ConfigError, FlowDir, RunConfig, StatTask, Task};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Task(String),
}

fn task_err(e: impl std::fmt::Display) -> RunError {
    RunError::Task(e.to_string())
}

enum Body {
    Csv(String),
    Json(serde_json::Value),
    Text(String),
}

pub struct Outcome {
    pub success: bool,
}

/// Number of samples used for the Green-Kubo estimate when a task needs
/// the covariance of the Frobenius cocycle as an input.
pub const SIGMA_SAMPLES: u64 = pins::GK_SAMPLES;

fn csv_row(cols: &[String]) -> String {
    let mut s = cols.join(",");
    s.push('\n');
    s
}

fn index_header(prefix: &str, d: usize) -> Vec<String> {
    (0..d).map(|i| format!("{prefix}_{i}")).collect()
}

fn automorphism(cfg: &RunConfig, o: &Origami) -> Result<AffineAuto, RunError> {
    let word = cfg
        .word
        .as_deref()
        .ok_or(ConfigError::MissingRequired("word"))?;
    AffineAuto::from_word(o, word).map_err(task_err)
}

fn sigma2(cfg: &RunConfig, a: &AffineAuto, d: usize, workers: usize) -> Vec<Vec<f64>> {
    green_kubo(
        &FrobeniusCocycle::new(a, d),
        cfg.lags,
        SIGMA_SAMPLES,
        cfg.seed,
        workers,
    )
    .sigma2
}

fn run_flow(cfg: &RunConfig, o: &Origami, workers: usize) -> Result<Body, RunError> {
    let dir = match cfg.dir {
        FlowDir::Angle(theta) => Direction::from_angle(theta),
        FlowDir::Stable | FlowDir::Unstable => {
            let e = automorphism(cfg, o)?.eigen().map_err(task_err)?;
            if cfg.dir == FlowDir::Stable {
                e.stable
            } else {
                e.unstable
            }
        }
    };
    let mut times = cfg.t.clone();
    times.sort_by(f64::total_cmp);
    let d = o.rank();
    let rows = collect(cfg.samples, cfg.seed, workers, |_, rng| 'draw: loop {
        let mut p = uniform_point(rng, o.n_squares());
        let mut last = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &t in &times {
            match flow(o, p, dir, t - last) {
                Ok((q, _)) => p = q,
                Err(_) => continue 'draw,
            }
            last = t;
            out.push(p);
        }
        return out;
    });
    let mut header = vec![
        "sample".to_string(),
        "t".into(),
        "square".into(),
        "u".into(),
        "v".into(),
    ];
    header.extend(index_header("index", d));
    let mut s = csv_row(&header);
    for (i, pts) in rows.iter().enumerate() {
        for (t, p) in times.iter().zip(pts) {
            let mut cols = vec![
                i.to_string(),
                t.to_string(),
                p.square.to_string(),
                p.u.to_string(),
                p.v.to_string(),
            ];
            cols.extend(p.index.components(d).iter().map(|c| c.to_string()));
            s.push_str(&csv_row(&cols));
        }
    }
    Ok(Body::Csv(s))
}

fn run_frobenius(cfg: &RunConfig, o: &Origami, workers: usize) -> Result<Body, RunError> {
    let a = automorphism(cfg, o)?;
    let d = o.rank();
    let c = FrobeniusCocycle::new(&a, d);
    let mut ks = cfg.k.clone();
    ks.sort_unstable();
    ks.dedup();
    let sums = collect(cfg.samples, cfg.seed, workers, |_, rng| {
        sample_sums(&c, rng, &ks)
    });
    let mut header = vec!["sample".to_string(), "K".into()];
    header.extend(index_header("FK", d));
    let mut s = csv_row(&header);
    for (i, row) in sums.iter().enumerate() {
        for (k, f) in ks.iter().zip(row) {
            let mut cols = vec![i.to_string(), k.to_string()];
            cols.extend(f.components(d).iter().map(|c| c.to_string()));
            s.push_str(&csv_row(&cols));
        }
    }
    Ok(Body::Csv(s))
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("report serializes")
}

fn run_stats(cfg: &RunConfig, o: &Origami, workers: usize) -> Result<Body, RunError> {
    let (seed, n) = (cfg.seed, cfg.samples);
    if cfg.stat == StatTask::Asclt {
        let v = asclt_average(cfg.sigma, n, seed);
        return Ok(Body::Json(json!({
            "task": "asclt", "estimate": v, "sigma": cfg.sigma, "N": n, "n_samples": n, "seed": seed
        })));
    }
    let a = automorphism(cfg, o)?;
    let d = o.rank();
    let c = FrobeniusCocycle::new(&a, d);
    let k0 = cfg.k[0];
    let v = match cfg.stat {
        StatTask::Sigma => {
            let g = green_kubo(&c, cfg.lags, n, seed, workers);
            json!({
                "task": "sigma", "estimate": g.sigma2, "stderr": g.stderr, "per_lag": g.per_lag,
                "partial_sums": g.partial_sums, "K": null, "lags": g.lags, "n_samples": n, "seed": seed
            })
        }
        StatTask::Llt => {
            let s2 = sigma2(cfg, &a, d, workers);
            let r = llt_histogram(&c, k0, n, seed, workers, &s2).map_err(task_err)?;
            json!({
                "task": "llt", "estimate": r.sup_error, "sigma2": s2, "K": k0,
                "n_samples": n, "seed": seed, "report": r
            })
        }
        StatTask::LambdaU => {
            let u = if cfg.u.is_empty() {
                vec![0.1; d]
            } else {
                cfg.u.clone()
            };
            let l = lambda_u(&c, &u, k0, n, seed, workers).map_err(task_err)?;
            let z = l.value();
            json!({
                "task": "lambda-u", "estimate": {"re": z.re, "im": z.im}, "stderr": l.phase_stderr,
                "K": k0, "n_samples": n, "seed": seed, "report": l
            })
        }
        StatTask::Drift => {
            let dr = average_drift(&c, n, seed, workers);
            json!({
                "task": "drift", "estimate": dr.estimate, "stderr": dr.stderr, "K": 1,
                "consistent_with_zero": dr.consistent_with_zero(3.0), "n_samples": n, "seed": seed
            })
        }
        StatTask::Growth => {
            let mut ks = cfg.k.clone();
            ks.sort_unstable();
            ks.dedup();
            let g = variance_growth(&c, &ks, n, seed, workers).map_err(task_err)?;
            json!({
                "task": "growth", "estimate": g.slope, "stderr": g.slope / g.t_stat, "verdict": g.verdict,
                "per_K": g.table, "K": ks, "n_samples": n, "seed": seed
            })
        }
        StatTask::Asclt => unreachable!("handled above"),
    };
    Ok(Body::Json(v))
}

fn run_gauss(cfg: &RunConfig) -> Result<Body, RunError> {
    let mut s = String::new();
    macro_rules! line {
        ($s:expr, $z:expr) => {{
            let z = $z;
            let _ = writeln!($s, "{},{}", z.re, z.im);
        }};
    }
    if let (Some(c), [l1, l2]) = (cfg.cov, cfg.l.as_slice()) {
        let cov = Cov2::new(c[0], c[1], c[2]).map_err(task_err)?;
        for z in vec_moment(cfg.j, &cov, [*l1, *l2]).map_err(task_err)? {
            line!(&mut s, z);
        }
        if cfg.oracle {
            for z in quad_oracle_2d(cfg.j, &cov, [*l1, *l2]).map_err(task_err)? {
                line!(&mut s, z);
            }
        }
    } else {
        line!(
            &mut s,
            moment(cfg.j, cfg.sigma, cfg.l[0]).map_err(task_err)?
        );
        if cfg.oracle {
            line!(
                &mut s,
                quad_oracle(cfg.j, cfg.sigma, cfg.l[0]).map_err(task_err)?
            );
        }
    }
    Ok(Body::Text(s))
}

fn run_expansion(cfg: &RunConfig, o: &Origami, workers: usize) -> Result<Body, RunError> {
    let a = automorphism(cfg, o)?;
    let g = Observable::unit_bump(o);
    let s2 = sigma2(cfg, &a, o.rank(), workers);
    let setup = FlowSetup {
        surface: o,
        auto: &a,
        observable: &g,
        sigma2: s2,
    };
    let run =
        compare_expansion(&setup, &cfg.big_t, cfg.samples, cfg.seed, workers).map_err(task_err)?;
    Ok(Body::Json(to_json(&run)))
}

fn run_verify(cfg: &RunConfig, workers: usize) -> (Body, bool) {
    let ids = suite(&cfg.suite).expect("validated suite");
    let battery = Battery {
        seed: cfg.seed,
        workers,
    };
    let mut results = Vec::new();
    for id in ids {
        let r = battery.run(id);
        println!("{}", r.line());
        results.push(r);
    }
    let passed = results.iter().all(|r| r.passed);
    let v = json!({
        "suite": cfg.suite, "seed": cfg.seed, "workers": workers, "passed": passed, "results": results
    });
    (Body::Json(v), passed)
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    let io = |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| io(std::io::Error::other("not a file path")))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res.map_err(io)
}

pub fn manifest_path(cfg: &RunConfig) -> PathBuf {
    match &cfg.out {
        Some(out) => {
            let mut s = out.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        }
        None => PathBuf::from(format!("zdcover-{}.manifest.json", cfg.command)),
    }
}

fn render(body: &Body, manifest: Option<&Path>) -> String {
    match (body, manifest) {
        (Body::Csv(s), Some(m)) => format!("# manifest: {}\n{s}", m.display()),
        (Body::Json(v), Some(m)) => {
            let mut obj = serde_json::Map::new();
            obj.insert("manifest".into(), json!(m.display().to_string()));
            let text = serde_json::to_string_pretty(v).expect("json");
            match v {
                // keep the manifest reference as the first field
                serde_json::Value::Object(o) if !o.is_empty() => {
                    format!(
                        "{{\n  \"manifest\": {},\n{}\n",
                        json!(m.display().to_string()),
                        &text[2..]
                    )
                }
                _ => {
                    obj.insert("result".into(), v.clone());
                    serde_json::to_string_pretty(&serde_json::Value::Object(obj)).expect("json")
                        + "\n"
                }
            }
        }
        (Body::Json(v), None) => serde_json::to_string_pretty(v).expect("json") + "\n",
        (Body::Csv(s) | Body::Text(s), _) => s.clone(),
    }
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let start = Instant::now();
    let workers = resolve_workers(cfg.workers);
    let (body, success) = match cfg.command {
        Task::Gauss => (run_gauss(cfg)?, true),
        Task::Verify => run_verify(cfg, workers),
        task => {
            let o = cfg.model.build()?;
            let body = match task {
                Task::Build => Body::Json(to_json(&o.summary())),
                Task::Flow => run_flow(cfg, &o, workers)?,
                Task::Frobenius => run_frobenius(cfg, &o, workers)?,
                Task::Stats => run_stats(cfg, &o, workers)?,
                Task::Expansion => run_expansion(cfg, &o, workers)?,
                Task::Gauss | Task::Verify => unreachable!("handled above"),
            };
            (body, true)
        }
    };
    let manifest = manifest_path(cfg);
    let mut outputs = Vec::new();
    match &cfg.out {
        Some(out) => {
            write_atomic(out, render(&body, Some(&manifest)).as_bytes())?;
            outputs.push(out.display().to_string());
        }
        None => {
            if !matches!(cfg.command, Task::Verify) {
                print!("{}", render(&body, None));
            }
        }
    }
    let m = json!({
        "tool": "zdcover",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cfg.command.name(),
        "config": cfg.to_map(),
        "seed": cfg.seed,
        "workers": workers,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "outputs": outputs,
        "success": success,
    });
    write_atomic(
        &manifest,
        (serde_json::to_string_pretty(&m).expect("json") + "\n").as_bytes(),
    )?;
    Ok(Outcome { success })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn manifest_round_trips_to_equal_config() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("g.txt");
        let out_s = out.to_str().unwrap();
        let cfg = parse_config([
            "zdcover", "gauss", "--j", "4", "--sigma", "0.7", "--L", "-1.25", "--oracle", "--out",
            out_s,
        ])
        .unwrap();
        assert!(run(&cfg).unwrap().success);
        let m = manifest_path(&cfg);
        let again = parse_config(["zdcover", "--config", m.to_str().unwrap()]).unwrap();
        assert_eq!(again, cfg);

        let cfg = parse_config([
            "zdcover",
            "frobenius",
            "--model",
            "windtree",
            "--word",
            "vh",
            "--K",
            "3,9",
            "--samples",
            "4",
            "--workers",
            "2",
            "--out",
            out_s,
        ])
        .unwrap();
        assert!(run(&cfg).unwrap().success);
        assert_eq!(
            parse_config(["zdcover", "--config", manifest_path(&cfg).to_str().unwrap()]).unwrap(),
            cfg
        );
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(write_atomic(&dir.path().join("no/such/dir/x"), b"").is_err());
    }
}
