//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use netulln_core::funcspace::{build_delta_net, nearest_net_point, ParamSpace};
use netulln_core::netgraph::{generate, verify_sparsity_window, GeneratorSpec, WindowParams};
use netulln_core::process::{empirical_cov_decay, BoundedLaw, ProcessSpec, Simulator};
use netulln_core::rng::Stream;
use netulln_core::stats::loglog_slope;
use netulln_core::verify::maximal_moment;
use rand::Rng;

const BIN: &str = env!("CARGO_BIN_EXE_netulln");
const CSVS: [&str; 4] = ["diagnose.csv", "replications.csv", "summary.csv", "plot_series.csv"];

struct Verdict {
    id: u32,
    pass: bool,
    what: &'static str,
    observed: String,
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn netulln(args: &[&str]) -> Option<i32> {
    Command::new(BIN).args(args).output().expect("run netulln").status.code()
}

/// `summary.csv` keyed by `(experiment, variant, n, metric)`.
fn read_summary(dir: &Path) -> HashMap<(String, String, String, String), f64> {
    let mut r = csv::Reader::from_path(dir.join("summary.csv")).expect("summary.csv");
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            let v = rec[4].parse().unwrap_or(f64::NAN);
            ((rec[0].into(), rec[1].into(), rec[2].into(), rec[3].into()), v)
        })
        .collect()
}

struct Summary(HashMap<(String, String, String, String), f64>);

impl Summary {
    fn get(&self, exp: &str, var: &str, n: &str, metric: &str) -> f64 {
        *self.0.get(&(exp.into(), var.into(), n.into(), metric.into())).unwrap_or_else(|| panic!("{exp}/{var}/{n}/{metric}"))
    }

    fn series(&self, exp: &str, var: &str, grid: &[usize], metric: &str) -> Vec<f64> {
        grid.iter().map(|n| self.get(exp, var, &n.to_string(), metric)).collect()
    }
}

fn decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn ulln(s: &Summary, id: u32, mode: &str, what: &'static str) -> Verdict {
    let grid = [100, 400, 1600, 6400];
    let med = s.series("ulln", mode, &grid, "median");
    let x: Vec<f64> = grid.iter().map(|&n| n as f64).collect();
    let slope = loglog_slope(&x, &med);
    Verdict { id, pass: decreasing(&med) && slope <= -0.25, what, observed: format!("medians {med:.4?}, slope {slope:.3}") }
}

fn maximal(s: &Summary) -> Verdict {
    let grid = [256, 1024, 4096, 16384];
    let params = WindowParams { p: 5, d: 1, eta: 0.05, c1: 0.25, c2: 1.0 };
    let beta = verify_sparsity_window(1, 256, &params).unwrap().beta;
    let feasible = s.series("maximal", "p5", &grid, "window_feasible").iter().all(|&f| f == 1.0);
    let ci_hi = s.get("maximal", "p5", "", "ci_hi");
    let cap = 5.0 * beta;
    Verdict {
        id: 3,
        pass: feasible && ci_hi <= cap + 0.15,
        what: "maximal-moment growth exponent within p*beta + 0.15",
        observed: format!(
            "slope {:.3}, CI upper {ci_hi:.3}, p*beta {cap:.3}, window held at every n: {feasible}",
            s.get("maximal", "p5", "", "slope")
        ),
    }
}

fn blocks(s: &Summary) -> Verdict {
    let ratios = s.series("block_moment", "block_size", &[4, 8, 16, 32], "ratio");
    let hi = ratios.iter().copied().fold(f64::MIN, f64::max);
    let lo = ratios.iter().copied().fold(f64::MAX, f64::min);
    Verdict {
        id: 4,
        pass: lo > 0.0 && hi / lo < 3.0,
        what: "block moment ratio varies by less than a factor 3 on C_4096",
        observed: format!("ratios {ratios:.3?}, spread {:.3}", hi / lo),
    }
}

fn consistency(s: &Summary, label: &str) -> (bool, String) {
    let rmse = s.series("estimate", label, &[100, 400, 1600, 6400], "rmse");
    let ratio = rmse[3] / rmse[0];
    (decreasing(&rmse) && ratio < 0.3, format!("{label}: RMSE {rmse:.4?}, ratio {ratio:.3}"))
}

fn gmm(s: &Summary) -> Verdict {
    let (a, oa) = consistency(s, "gmm_identity");
    let (b, ob) = consistency(s, "gmm_inverse_variance");
    let gap = s.get("estimate", "gmm_weighting", "", "paired_rms_difference");
    let scale = s.get("estimate", "gmm_weighting", "", "larger_rmse");
    Verdict {
        id: 9,
        pass: a && b && gap <= 2.0 * scale,
        what: "GMM consistency for both weightings, which agree at n = 6400",
        observed: format!("{oa}; {ob}; paired RMS gap {gap:.5} vs 2 x {scale:.5}"),
    }
}

/// `E max_{k<=n} |S_k|^4` over all sign paths.
fn rademacher_exact(n: usize) -> f64 {
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        let (mut s, mut m) = (0i64, 0i64);
        for i in 0..n {
            s += if mask >> i & 1 == 1 { 1 } else { -1 };
            m = m.max(s.abs());
        }
        total += (m as f64).powi(4);
    }
    total / f64::from(1u32 << n)
}

fn rademacher() -> Verdict {
    let mut spec = ProcessSpec::moving_average(vec![1.0], 0.0);
    spec.innovation = BoundedLaw::Rademacher;
    let mut ok = true;
    let mut notes = Vec::new();
    for n in [8usize, 10, 12] {
        let net = generate(&GeneratorSpec::Path { n }, 0).unwrap();
        let sim = Simulator::new(&net, &spec).unwrap();
        let est = maximal_moment(&sim, 4, 20_000, Stream::root(5).index(n as u64)).unwrap();
        let exact = rademacher_exact(n);
        let z = (est.mean - exact) / est.se;
        ok &= z.abs() < 4.0;
        notes.push(format!("n={n} z={z:.2}"));
    }
    let net = generate(&GeneratorSpec::Path { n: 8 }, 0).unwrap();
    let sim = Simulator::new(&net, &spec).unwrap();
    let big = maximal_moment(&sim, 4, 1_000_000, Stream::root(5).stage("large")).unwrap();
    let exact = rademacher_exact(8);
    let rel = (big.mean - exact).abs() / exact;
    ok &= rel <= 0.005;
    notes.push(format!("n=8 at 1e6: {:.4} vs {exact:.4} ({:.3}%)", big.mean, 100.0 * rel));
    Verdict { id: 5, pass: ok, what: "Rademacher maximal moments match full enumeration", observed: notes.join(", ") }
}

fn covariance() -> Verdict {
    let net = generate(&GeneratorSpec::Cycle { n: 400 }, 0).unwrap();
    let mut spec = ProcessSpec::moving_average(vec![1.0, 0.5], 0.5);
    spec.location = 0.2;
    let sim = Simulator::new(&net, &spec).unwrap();
    let id = |y: f64| y;
    let mut ok = true;
    let mut notes = Vec::new();
    for s in [3usize, 4, 5] {
        let within = (0..100u64)
            .filter(|&k| {
                let stream = Stream::root(6).stage("cov").index(s as u64).index(k);
                empirical_cov_decay(&sim, &id, &id, s, 3, 2000, stream).unwrap().within(3.0)
            })
            .count();
        ok &= within >= 95;
        notes.push(format!("s={s}: {within}/100"));
    }
    Verdict { id: 6, pass: ok, what: "conditional covariance beyond 2r within 3 SE for >= 95% of shocks", observed: notes.join(", ") }
}

fn covering() -> Verdict {
    let space = ParamSpace::new(&[(0.0, 1.0), (0.0, 1.0)]).unwrap();
    let deltas = [0.2, 0.1, 0.05];
    let mut rng = Stream::root(7).rng();
    let mut ok = true;
    let mut sizes = Vec::new();
    for &d in &deltas {
        let net = build_delta_net(&space, d).unwrap();
        let worst = (0..100_000)
            .map(|_| nearest_net_point(&net, &[rng.random::<f64>(), rng.random::<f64>()]).unwrap().1)
            .fold(0.0, f64::max);
        ok &= worst <= d;
        sizes.push(net.len() as f64);
    }
    let inv: Vec<f64> = deltas.iter().map(|d| 1.0 / d).collect();
    let slope = loglog_slope(&inv, &sizes);
    ok &= (slope - 2.0).abs() <= 0.15;
    Verdict { id: 7, pass: ok, what: "delta-net covering on the unit square", observed: format!("sizes {sizes:?}, slope {slope:.3}") }
}

fn negative_control(tmp: &Path) -> Verdict {
    let cfg = configs().join("er_dense.toml");
    let cfg = cfg.to_str().unwrap();
    let d = tmp.join("er-diagnose");
    let diag_code = netulln(&["diagnose", "--config", cfg, "--out", d.to_str().unwrap()]);
    let csv = std::fs::read_to_string(d.join("diagnose.csv")).unwrap_or_default();
    let row = csv.lines().find(|l| l.starts_with("sparsity_window,")).unwrap_or("").to_string();
    let e = tmp.join("er-suite");
    let suite_code = netulln(&["full-suite", "--strict", "--config", cfg, "--out", e.to_str().unwrap()]);
    Verdict {
        id: 10,
        pass: row.contains(",FAIL,") && suite_code == Some(1),
        what: "dense Erdos-Renyi fails the sparsity window; strict full-suite exits 1",
        observed: format!("diagnose exit {diag_code:?}, row `{row}`, strict full-suite exit {suite_code:?}"),
    }
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("default.toml");
    let cfg = cfg.to_str().unwrap();
    let (one, eight) = (tmp.path().join("threads1"), tmp.path().join("threads8"));
    let c1 = netulln(&["full-suite", "--config", cfg, "--out", one.to_str().unwrap(), "--threads", "1"]);
    let c8 = netulln(&["full-suite", "--config", cfg, "--out", eight.to_str().unwrap(), "--threads", "8"]);
    let s = Summary(read_summary(&one));

    let identical: Vec<&str> = CSVS
        .iter()
        .copied()
        .filter(|f| std::fs::read(one.join(f)).ok().is_some_and(|a| std::fs::read(eight.join(f)).ok() == Some(a)))
        .collect();
    let (m_ok, m_obs) = consistency(&s, "m");

    let verdicts = vec![
        ulln(&s, 1, "conditional", "conditional ULLN: median sup-deviation decreasing, slope <= -0.25"),
        ulln(&s, 2, "unconditional", "unconditional ULLN: median sup-deviation decreasing, slope <= -0.25"),
        maximal(&s),
        blocks(&s),
        rademacher(),
        covariance(),
        covering(),
        Verdict { id: 8, pass: m_ok, what: "M estimator RMSE decreasing, ratio < 0.3", observed: m_obs },
        gmm(&s),
        negative_control(tmp.path()),
        Verdict {
            id: 11,
            pass: identical.len() == CSVS.len() && c1 == c8,
            what: "byte-identical CSVs at 1 and 8 threads",
            observed: format!("identical: {identical:?}, exit codes {c1:?}/{c8:?}"),
        },
    ];

    let mut failed = 0;
    for v in &verdicts {
        println!("{} criterion {:>2}: {} [{}]", if v.pass { "PASS" } else { "FAIL" }, v.id, v.what, v.observed);
        failed += usize::from(!v.pass);
    }
    println!("{} of {} criteria passed", verdicts.len() - failed, verdicts.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
