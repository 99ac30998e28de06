//! Configuration, CLI plumbing and reporting for netulln experiments.
//!
//! A run reads one TOML config, derives every random stream from a master
//! seed, runs the requested stages on a private thread pool and writes a
//! manifest plus CSV tables. Exit codes: 0 success, 1 a configured assertion
//! (or diagnostic, for `diagnose`) failed, 2 the run could not be carried out.

pub mod config;
pub mod diagnose;
pub mod error;
pub mod output;
pub mod seeds;
pub mod suite;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::RunConfig;
pub use diagnose::{Check, DiagnoseReport, Status};
pub use error::{ConfigError, HarnessError};
pub use seeds::Seeds;
use suite::{AssertionOutcome, SuiteResults};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verb {
    Diagnose,
    VerifyUlln,
    VerifyMaximal,
    Estimate,
    FullSuite,
}

#[derive(Debug, Clone)]
pub struct Options {
    pub verb: Verb,
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub strict: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub verb: Verb,
    pub strict: bool,
    /// Resolved configuration, seed override applied. Loadable with `--config`.
    pub config: RunConfig,
    pub seeds: Seeds,
    pub diagnose: DiagnoseReport,
    pub assertions: Vec<AssertionOutcome>,
    /// Consistency-argument audit per estimator.
    pub audits: BTreeMap<String, netulln_core::estimate::NmAudit>,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
    pub exit_code: i32,
    pub threads: usize,
    pub timings_ms: BTreeMap<String, u128>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let path = dir.join(output::MANIFEST);
        let src = std::fs::read_to_string(&path).map_err(|e| HarnessError::Io(path.clone(), e))?;
        Ok(serde_json::from_str(&src)?)
    }
}

/// Load the config, run the verb on a pool of `threads` workers and write
/// all outputs. Errors map to exit code 2.
pub fn execute(opts: &Options) -> Result<RunManifest, HarnessError> {
    let mut cfg = RunConfig::load(&opts.config)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let out = opts
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("netulln-out"));
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = opts.threads {
        if k == 0 {
            return Err(HarnessError::Usage("--threads must be positive".into()));
        }
        builder = builder.num_threads(k);
    }
    let pool = builder.build().map_err(|e| HarnessError::Usage(e.to_string()))?;
    let threads = pool.current_num_threads();
    std::fs::create_dir_all(&out).map_err(|e| HarnessError::Io(out.clone(), e))?;
    let mut manifest = pool.install(|| run_stages(opts, cfg, &out))?;
    manifest.threads = threads;
    let path = out.join(output::MANIFEST);
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, json + "\n").map_err(|e| HarnessError::Io(path, e))?;
    Ok(manifest)
}

fn run_stages(opts: &Options, cfg: RunConfig, out: &Path) -> Result<RunManifest, HarnessError> {
    let seeds = Seeds::derive(cfg.seed);
    let mut timings = BTreeMap::new();
    let mut timed = |name: &str, t: Instant| {
        timings.insert(name.to_string(), t.elapsed().as_millis());
    };

    let t = Instant::now();
    log::info!("diagnose at n = {}", cfg.network.n());
    let diag = diagnose::diagnose(&cfg, &seeds)?;
    timed("diagnose", t);

    let mut res = SuiteResults::default();
    let verb = opts.verb;
    if matches!(verb, Verb::VerifyUlln | Verb::FullSuite) {
        let t = Instant::now();
        log::info!("ULLN stage");
        suite::run_ulln(&cfg, &seeds, &diag, &mut res)?;
        timed("ulln", t);
    }
    if matches!(verb, Verb::VerifyMaximal | Verb::FullSuite) {
        let t = Instant::now();
        log::info!("maximal inequality stage");
        suite::run_maximal(&cfg, &seeds, &diag, &mut res)?;
        timed("maximal", t);
    }
    if matches!(verb, Verb::Estimate | Verb::FullSuite) {
        let t = Instant::now();
        log::info!("estimation stage");
        suite::run_estimate(&cfg, &seeds, &mut res)?;
        timed("estimate", t);
    }

    let mut files = vec![output::MANIFEST.to_string(), output::DIAGNOSE_CSV.to_string()];
    output::write_diagnose(out, &diag)?;
    if verb != Verb::Diagnose {
        output::write_replications(out, &res)?;
        output::write_summary(out, &res)?;
        output::write_plot_series(out, &res)?;
        files.extend([output::REPLICATIONS_CSV, output::SUMMARY_CSV, output::PLOT_CSV].map(String::from));
    }

    let failed = if verb == Verb::Diagnose {
        !diag.failures(opts.strict).is_empty()
    } else {
        res.assertions.iter().any(|a| a.status.fails(opts.strict))
    };
    for w in &res.warnings {
        log::warn!("{w}");
    }
    let audits = res.estimates.iter().map(|e| (e.choice.label().to_string(), e.table.audit.clone())).collect();
    Ok(RunManifest {
        tool: "netulln".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        verb,
        strict: opts.strict,
        config: cfg,
        seeds,
        diagnose: diag,
        assertions: res.assertions,
        audits,
        warnings: res.warnings,
        files,
        exit_code: i32::from(failed),
        threads: 0,
        timings_ms: timings,
    })
}

/// Human-readable digest of a finished run directory.
pub fn render_report(m: &RunManifest) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(s, "{} {} ({:?}, seed {}, {} threads)", m.tool, m.version, m.verb, m.seeds.master, m.threads);
    let _ = writeln!(s, "\nassumption checks at n = {}:", m.diagnose.n);
    for c in &m.diagnose.checks {
        let v = c.value.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(s, "  {:<7} {:<18} {:>12}  {}", c.status.as_str(), c.item, v, c.detail);
    }
    if !m.assertions.is_empty() {
        let _ = writeln!(s, "\nassertions:");
        for a in &m.assertions {
            let _ = writeln!(s, "  {:<7} {:<40} {}  ({})", a.status.as_str(), a.name, a.observed, a.detail);
        }
    }
    for (name, audit) in &m.audits {
        let _ = writeln!(
            s,
            "\naudit {name}: identification {:?}, compactness {:?}, continuity {:?}, ulln {:?}",
            audit.identification, audit.compactness, audit.continuity, audit.ulln
        );
    }
    for w in &m.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    let _ = writeln!(s, "\nexit code {}", m.exit_code);
    s
}
