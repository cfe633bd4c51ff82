//! Acceptance suite. Prints one `[PASS]`/`[FAIL]` line per criterion and
//! fails if any criterion fails.
//!
//! Runs as a plain binary: `cargo test -p multicp --test acceptance`.

use multicp::bounds::ismap_upper_bound;
use multicp::harness::validate::{
    alr_identity, bounds_checks, pathwise_dominance, posterior_oracle_equivalence, type_one_rates,
};
use multicp::harness::{run_experiment, ExperimentConfig, SweepResult};
use multicp::metrics::{best_proportion, MetricsSummary, SweepPoint};
use multicp::models::ScenarioModel;
use multicp::procedures::ProcedureKind::{self, DFdr, ISMap, SMap, Simple};

const SEED: u64 = 20_240_601;
const RUNS: usize = 1000;

struct Report {
    lines: Vec<(bool, String)>,
}

impl Report {
    fn check(&mut self, id: &str, passed: bool, detail: String) {
        let line = format!("[{}] criterion {id}: {detail}", if passed { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push((passed, line));
    }
}

fn get(sweep: &SweepResult, kind: ProcedureKind, k: usize, q: f64) -> &MetricsSummary {
    sweep
        .find(kind, k, q)
        .unwrap_or_else(|| panic!("missing cell {} K={k} q={q}", kind.name()))
}

fn no_gate_failures(report: &mut Report, id: &str, sweep: &SweepResult) {
    let failed: Vec<String> = sweep
        .gate_failures()
        .iter()
        .map(|r| format!("{}@K={},q={}", r.label(), r.k, r.q))
        .collect();
    report.check(
        id,
        failed.is_empty(),
        format!("censored fraction within 1% in every cell {failed:?}"),
    );
}

/// `a < b` by more than three combined standard errors.
fn separated(a: &MetricsSummary, b: &MetricsSummary) -> (bool, f64) {
    let se = (a.se_add.powi(2) + b.se_add.powi(2)).sqrt();
    let z = (b.add - a.add) / se;
    (z > 3.0, z)
}

fn fdr_control(report: &mut Report, sweep: &SweepResult) {
    for (kind, lo, hi) in [(SMap, 0.01, 0.06), (ISMap, 0.04, 0.09)] {
        for q in [0.25, 0.5, 1.0] {
            let s = get(sweep, kind, 100, q);
            report.check(
                "1",
                s.fdr <= 0.1 && (lo..=hi).contains(&s.fdr),
                format!(
                    "gaussian {} q={q}: FDR {:.4} (se {:.4}) in [{lo}, {hi}] and <= 0.1",
                    kind.name(),
                    s.fdr,
                    s.se_fdr
                ),
            );
        }
    }
}

fn pvalue_fdr(report: &mut Report) {
    let mut cfg = ExperimentConfig::gaussian(100, vec![SMap, ISMap], vec![0.25, 0.5, 1.0], RUNS, SEED);
    cfg.scenario = ScenarioModel::pvalue_beta(10.0, 20.0).unwrap();
    let sweep = run_experiment(&cfg).unwrap();
    no_gate_failures(report, "2", &sweep);
    for (kind, limit) in [(SMap, 0.11), (ISMap, 0.13)] {
        for q in [0.25, 0.5, 1.0] {
            let s = get(&sweep, kind, 100, q);
            report.check(
                "2",
                s.fdr <= limit,
                format!("p-value {} q={q}: FDR {:.4} <= {limit}", kind.name(), s.fdr),
            );
        }
    }

    cfg.rho_assumed = 0.005;
    cfg.procedures = vec![ISMap];
    let sweep = run_experiment(&cfg).unwrap();
    no_gate_failures(report, "2", &sweep);
    for q in [0.25, 0.5, 1.0] {
        let s = get(&sweep, ISMap, 100, q);
        report.check(
            "2",
            s.fdr <= 0.1,
            format!("p-value ismap rho_assumed=0.005 q={q}: FDR {:.4} <= 0.1", s.fdr),
        );
    }
}

fn add_ordering(report: &mut Report, sweep: &SweepResult) {
    let is1 = get(sweep, ISMap, 100, 1.0);
    let is05 = get(sweep, ISMap, 100, 0.5);
    let s1 = get(sweep, SMap, 100, 1.0);
    let dfdr = get(sweep, DFdr, 100, 1.0);
    let simple = get(sweep, Simple, 100, 0.5);

    let chain = [
        ("ismap(1)", is1, "ismap(0.5)", is05),
        ("ismap(0.5)", is05, "smap(1)", s1),
        ("smap(1)", s1, "dfdr", dfdr),
    ];
    for (na, a, nb, b) in chain {
        let (ok, z) = separated(a, b);
        report.check(
            "3",
            ok,
            format!("ADD {na} {:.3} < {nb} {:.3} by {z:.1} SE", a.add, b.add),
        );
    }
    for (name, other) in [("ismap(1)", is1), ("ismap(0.5)", is05), ("smap(1)", s1), ("dfdr", dfdr)] {
        let (ok, z) = separated(other, simple);
        report.check(
            "3",
            ok,
            format!("ADD simple(0.5) {:.3} > {name} {:.3} by {z:.1} SE", simple.add, other.add),
        );
    }
}

const FLAT_CELLS: [(ProcedureKind, f64); 5] = [(ISMap, 1.0), (ISMap, 0.5), (SMap, 1.0), (Simple, 0.5), (DFdr, 1.0)];

fn flat_sweep(k: usize) -> SweepResult {
    let mut out = SweepResult {
        rows: Vec::new(),
        provenance: Vec::new(),
    };
    for kind in [ISMap, SMap, Simple, DFdr] {
        let qs: Vec<f64> = FLAT_CELLS.iter().filter(|(p, _)| *p == kind).map(|&(_, q)| q).collect();
        let cfg = ExperimentConfig::gaussian(k, vec![kind], qs, RUNS, SEED);
        out.extend(run_experiment(&cfg).unwrap());
    }
    out
}

fn add_flatness(report: &mut Report, sweeps: &[(usize, &SweepResult)]) {
    for (kind, q) in FLAT_CELLS {
        let adds: Vec<f64> = sweeps.iter().map(|(k, s)| get(s, kind, *k, q).add).collect();
        let max = adds.iter().cloned().fold(f64::MIN, f64::max);
        let min = adds.iter().cloned().fold(f64::MAX, f64::min);
        let mean = adds.iter().sum::<f64>() / adds.len() as f64;
        let spread = (max - min) / mean;
        report.check(
            "4",
            spread < 0.15,
            format!(
                "{}({q}) ADD over K=10,100,200 = {:.3?}, relative spread {:.3} < 0.15",
                kind.name(),
                adds,
                spread
            ),
        );
    }
}

fn tradeoff(report: &mut Report, sweep: &SweepResult) {
    let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    for kind in [SMap, ISMap] {
        let cells: Vec<&MetricsSummary> = grid.iter().map(|&q| get(sweep, kind, 100, q)).collect();
        let mut add_bad = Vec::new();
        let mut ano_bad = Vec::new();
        for (i, w) in cells.windows(2).enumerate() {
            let se_add = w[0].se_add.max(w[1].se_add);
            let se_ano = w[0].se_ano.max(w[1].se_ano);
            if w[1].add > w[0].add + se_add {
                add_bad.push(grid[i + 1]);
            }
            if w[1].ano < w[0].ano - se_ano {
                ano_bad.push(grid[i + 1]);
            }
        }
        report.check(
            "5",
            add_bad.is_empty(),
            format!("{} ADD non-increasing in q (1-SE slack), violations at {add_bad:?}", kind.name()),
        );
        report.check(
            "5",
            ano_bad.is_empty(),
            format!("{} ANO non-decreasing in q (1-SE slack), violations at {ano_bad:?}", kind.name()),
        );
        let points: Vec<SweepPoint> = grid
            .iter()
            .zip(&cells)
            .map(|(&q, s)| SweepPoint { q, add: s.add, ano: s.ano })
            .collect();
        let best = best_proportion(&points, 0.2).unwrap();
        report.check(
            "5",
            best <= 0.5,
            format!("{} weighted risk at c=0.2 minimized at q={best} <= 0.5", kind.name()),
        );
    }
}

fn exact_checks(report: &mut Report) {
    let oracle = posterior_oracle_equivalence(10, 0.05, 1e-9, SEED).unwrap();
    report.check("6", oracle.passed, format!("{}: {}", oracle.name, oracle.detail));

    let alr = alr_identity(100, 50, 0.01, 10, 0.1, 1e-9, SEED).unwrap();
    for o in [alr.identity, alr.decisions] {
        report.check("7", o.passed, format!("{}: {}", o.name, o.detail));
    }

    for o in bounds_checks(10_000, SEED) {
        report.check("8", o.passed, format!("{}: {}", o.name, o.detail));
    }

    let dom = pathwise_dominance(100, 50, 1.0, SEED).unwrap();
    report.check("9", dom.passed, format!("{}: {}", dom.name, dom.detail));

    for rate in type_one_rates(10, 0.1, 0.01, 10_000, SEED).unwrap() {
        report.check(
            "10",
            rate.passes(),
            format!(
                "Q_{} = {:.2}: pre-change crossing rate {:.4} <= {:.2} + 3 x {:.4}",
                rate.r, rate.threshold, rate.rate, rate.nominal, rate.se
            ),
        );
    }
}

fn small_alpha_sanity(report: &mut Report) {
    let mut cfg = ExperimentConfig::gaussian(100, vec![ISMap], vec![1.0], RUNS, SEED);
    cfg.alpha = 1e-3;
    let sweep = run_experiment(&cfg).unwrap();
    let s = get(&sweep, ISMap, 100, 1.0);
    let ub = ismap_upper_bound(cfg.alpha, cfg.rho_assumed);
    report.check(
        "note",
        s.add < ub && sweep.gate_failures().is_empty(),
        format!("ismap alpha=1e-3 q=1: ADD {:.3} < asymptotic upper bound {ub:.3}", s.add),
    );
}

fn main() {
    let mut report = Report { lines: Vec::new() };

    exact_checks(&mut report);

    let mut grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    grid.push(0.25);
    let main = run_experiment(&ExperimentConfig::gaussian(100, vec![SMap, ISMap], grid, RUNS, SEED)).unwrap();
    let mut k100 = flat_sweep(100);
    k100.extend(main);
    no_gate_failures(&mut report, "1", &k100);
    fdr_control(&mut report, &k100);
    add_ordering(&mut report, &k100);
    tradeoff(&mut report, &k100);

    let k10 = flat_sweep(10);
    let k200 = flat_sweep(200);
    no_gate_failures(&mut report, "4", &k10);
    no_gate_failures(&mut report, "4", &k200);
    add_flatness(&mut report, &[(10, &k10), (100, &k100), (200, &k200)]);

    pvalue_fdr(&mut report);
    small_alpha_sanity(&mut report);

    let failed: Vec<&String> = report.lines.iter().filter(|(ok, _)| !ok).map(|(_, l)| l).collect();
    println!(
        "{} of {} checks passed",
        report.lines.len() - failed.len(),
        report.lines.len()
    );
    if !failed.is_empty() {
        eprintln!("failed checks:");
        for line in failed {
            eprintln!("{line}");
        }
        std::process::exit(1);
    }
}
