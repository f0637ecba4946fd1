//! Acceptance suite. Prints one PASS/FAIL line per criterion, followed by indented details.
//! Failing criteria do not abort the run; pipeline errors do.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use intermix_lab::commands::{manifold, verify, Ctx};
use intermix_lab::output::{fmt_float, Format};
use intermix_lab::{execute, Check, Cli, LabConfig, RunSummary};

struct Criterion {
    name: &'static str,
    pass: bool,
    details: Vec<String>,
}

impl Criterion {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            pass: true,
            details: Vec::new(),
        }
    }

    fn check(&mut self, c: &Check) {
        self.pass &= c.pass;
        let m = c.measured.map_or("n/a".into(), fmt_float);
        let mark = if c.pass { "ok" } else { "FAIL" };
        self.details
            .push(format!("{mark:<4} {} = {m} (required {})", c.name, c.requirement));
    }

    fn checks<'a>(&mut self, cs: impl IntoIterator<Item = &'a Check>) {
        for c in cs {
            self.check(c);
        }
    }

    fn named(&mut self, s: &RunSummary, names: &[&str]) {
        for n in names {
            match s.check_named(n) {
                Some(c) => self.check(c),
                None => {
                    self.pass = false;
                    self.details.push(format!("FAIL {n} missing from the run summary"));
                }
            }
        }
    }

    fn runtime(&mut self, secs: f64, limit: f64) {
        let c = Check::new("runtime_s", secs, format!("<= {limit} s"), secs <= limit);
        self.check(&c);
    }

    fn note(&mut self, s: String) {
        self.details.push(format!("     {s}"));
    }

    fn print(&self) {
        println!("{} {}", if self.pass { "PASS" } else { "FAIL" }, self.name);
        for d in &self.details {
            println!("       {d}");
        }
    }
}

fn cli(dir: &Path, args: &[&str]) -> Cli {
    let mut v = vec!["intermix-lab".to_string(), "--out".into(), dir.display().to_string()];
    v.extend(args.iter().map(|s| s.to_string()));
    Cli::try_parse_from(v).expect("arguments parse")
}

fn timed_run(dir: &Path, args: &[&str]) -> (RunSummary, f64) {
    let t = Instant::now();
    let s = execute(&cli(dir, args)).unwrap_or_else(|e| panic!("{args:?} failed: {e:#}"));
    (s, t.elapsed().as_secs_f64())
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}

fn identity(ctx: &Ctx) -> Criterion {
    let mut c = Criterion::new("identity suite");
    let ((_, checks), secs) = timed(|| verify::identity_checks(&ctx.spec, ctx.cfg.verify_samples, ctx.seed));
    c.checks(checks.iter().filter(|k| k.name != "identity.cone_invariance"));
    c.runtime(secs, 5.0);
    c
}

fn drift(ctx: &Ctx) -> Criterion {
    let mut c = Criterion::new("quasi-Hamiltonian drift");
    let ((d, checks), secs) = timed(|| verify::drift_checks(&ctx.spec, &[0.2, 0.1, 0.05, 0.025], ctx.cfg.verify_samples, ctx.seed));
    c.checks(&checks);
    c.note(format!(
        "R(delta): {}",
        d.iter()
            .map(|x| format!("{}: {:.3}", x.delta, x.ratio))
            .collect::<Vec<_>>()
            .join(", ")
    ));
    c.runtime(secs, 10.0);
    c
}

fn asymptote(ctx: &Ctx) -> Criterion {
    let mut c = Criterion::new("stable-manifold asymptote");
    let (rows, secs) = timed(|| manifold::shoot_rows(ctx).expect("shooting"));
    c.checks(&manifold::shoot_checks(&rows));
    for r in &rows {
        c.note(format!(
            "x0 = {}: B = {:.6} at tol, {:.6} at tol/2",
            r.x0, r.residual_b, r.residual_b_half_tol
        ));
    }
    c.runtime(secs, 30.0);
    c
}

fn cone(ctx: &Ctx) -> Criterion {
    let mut c = Criterion::new("cone band");
    let ((_, checks), secs) = timed(|| verify::cone_checks(&ctx.spec, &[0.25, 0.125], 10_000, ctx.seed).expect("cone"));
    c.checks(&checks);
    c.runtime(secs, 30.0);
    c
}

fn tail(dir: &Path) -> Criterion {
    let mut c = Criterion::new("return-time tail");
    let (s, secs) = timed_run(dir, &["tail"]);
    c.named(&s, &["tail.measure.slope", "tail.cumulative.slope", "tail.error_ratio"]);
    c.note(format!(
        "total mass {:.6}, flux {:.6}, unresolved {:.2e}",
        s.info["total_mass"], s.info["flux"], s.info["unresolved"]
    ));
    c.runtime(secs, 600.0);
    c
}

fn passage(dir: &Path) -> Criterion {
    let mut c = Criterion::new("passage laws");
    let (s, secs) = timed_run(dir, &["passage"]);
    let mut names = Vec::new();
    for law in ["fat_ell", "fat_n_minus_ell", "thin_ell", "thin_n_minus_ell"] {
        for q in ["slope", "r2", "decades"] {
            names.push(format!("passage.{law}.{q}"));
        }
    }
    c.named(&s, &names.iter().map(String::as_str).collect::<Vec<_>>());
    c.note(format!("{} passages sampled", s.info["samples"]));
    c.runtime(secs, 300.0);
    c
}

fn cells(dir: &Path) -> Criterion {
    let mut c = Criterion::new("cell geometry");
    let (s, secs) = timed_run(dir, &["cells"]);
    let mut names = Vec::new();
    for region in ["fat", "thin"] {
        for q in ["v_extent", "h_extent", "area"] {
            names.push(format!("cells.{region}_{q}.slope"));
        }
    }
    c.named(&s, &names.iter().map(String::as_str).collect::<Vec<_>>());
    c.runtime(secs, 600.0);
    c
}

fn mixing(dir: &Path) -> Criterion {
    let mut c = Criterion::new("mixing-rate exponent");
    let (s, secs) = timed_run(dir, &["corr"]);
    c.named(&s, &["corr.predictor.slope", "corr.mixing_agreement"]);
    if let Some(l) = s.check_named("corr.lag0_variance_sigmas") {
        c.note(format!("lag-0 variance off by {:.2} sigma", l.measured.unwrap_or(f64::NAN)));
    }
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("mixing.json")).unwrap()).unwrap();
    let ratios: Vec<String> = doc["ratios"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| format!("n={}: {:.3}", r[0], r[1].as_f64().unwrap()))
        .collect();
    c.note(format!("significant corr/predictor ratios: {}", ratios.join(", ")));
    c.runtime(secs, 900.0);
    c
}

const DETERMINISM_RUNS: &[&[&str]] = &[
    &["--set", "verify.samples=2e4", "--set", "verify.cone_samples=2000", "verify"],
    &["--set", "manifold.n_max=2000", "manifold"],
    &[
        "--set",
        "tail.n_max=128",
        "--set",
        "tail.deep_n=128",
        "--set",
        "tail.fit_lo=8",
        "--set",
        "tail.fit_hi=100",
        "tail",
    ],
    &["--set", "passage.strata=4", "--set", "passage.per_stratum=8", "passage"],
    &["cells", "--k-min", "16", "--k-max", "45"],
    &[
        "--set",
        "corr.samples=5e4",
        "--set",
        "corr.fit_lo=10",
        "--set",
        "corr.fit_hi=100",
        "corr",
        "--lags",
        "0..20",
    ],
];

fn run_all(dir: &Path, workers: &str) {
    for args in DETERMINISM_RUNS {
        let mut v = vec!["--workers", workers];
        v.extend_from_slice(args);
        timed_run(dir, &v);
    }
}

fn determinism(root: &Path) -> Criterion {
    let mut c = Criterion::new("determinism");
    let dirs: Vec<PathBuf> = ["w1", "w3", "w1_again"].iter().map(|d| root.join(d)).collect();
    for (d, w) in dirs.iter().zip(["1", "3", "1"]) {
        let _ = fs::remove_dir_all(d);
        run_all(d, w);
    }
    let mut names: Vec<String> = fs::read_dir(&dirs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let mut differing = Vec::new();
    for n in &names {
        let a = fs::read(dirs[0].join(n)).unwrap();
        for d in &dirs[1..] {
            if fs::read(d.join(n)).ok().as_ref() != Some(&a) {
                differing.push(format!("{n} ({})", d.file_name().unwrap().to_string_lossy()));
            }
        }
    }
    let ok = differing.is_empty() && !names.is_empty();
    c.check(&Check::new(
        "differing_files",
        differing.len() as f64,
        "0 across reruns and worker counts",
        ok,
    ));
    c.note(format!("{} files compared across 1, 3 and 1 workers", names.len()));
    for d in differing {
        c.note(format!("differs: {d}"));
    }
    c
}

fn main() {
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let _ = fs::remove_dir_all(&root);
    let full = root.join("full");
    let ctx = Ctx::new(LabConfig::default(), Format::Csv).unwrap();
    println!("acceptance outputs in {}", root.display());

    let criteria = [
        identity(&ctx),
        drift(&ctx),
        asymptote(&ctx),
        cone(&ctx),
        tail(&full),
        passage(&full),
        cells(&full),
        mixing(&full),
        determinism(&root.join("determinism")),
    ];
    println!();
    for c in &criteria {
        c.print();
    }
    let passed = criteria.iter().filter(|c| c.pass).count();
    println!();
    println!("acceptance: {passed}/{} criteria pass", criteria.len());
}
