//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned
//! below. Runs as a plain binary (`harness = false`) so the report is always
//! printed. Exits non-zero on any failure that is not marked as blocked.

use std::f64::consts::LN_2;
use std::process::ExitCode;
use std::time::Instant;

use chansim::coder::{elias_delta_decode, elias_delta_encode, unary_decode, unary_encode};
use chansim::dist::{ratio_bound, total_variation, DistributionSpec};
use chansim::matching::{match_rs, Protocol};
use chansim::samplers::{cached_delta, ers_select, pml_select, rs_select};
use chansim::stats::{binomial_se, chi_square_gof, run_trials, spearman};
use chansim::CommonRandomness;
use chansim_cli::table::Table;
use chansim_cli::{run, Experiment, ExperimentConfig, Output, Preset};

const SEED: &str = "0xa1";

// Criterion 1.
const GOF_BINS: usize = 50;
const GOF_ACCEPTS: u64 = 100_000;
const GOF_MIN_P: f64 = 0.001;
const ERS_GRID: [u64; 4] = [1, 8, 32, 128];
// Criteria 2 and 3: allowed standard errors above the bound.
const CODING_SE: f64 = 2.0;
// Criteria 5-9: allowed standard errors on rates.
const RATE_SE: f64 = 3.0;
// Criterion 8.
const PML_GAP: f64 = 0.05;
const IML_VARIANCE_TARGET: f64 = 0.7;
const TREND_MAX_SPEARMAN: f64 = -0.9;
// Criterion 9.
const BATCH_BITS_LIMIT: f64 = 4.0;
const DISTORTION_DB: f64 = 0.2;

type Sampler<'a> = Box<dyn Fn(u64) -> chansim::Result<f64> + Sync + Send + 'a>;

struct Line {
    id: &'static str,
    ok: bool,
    /// Set when the failure is a claim that does not hold; reported as FAIL
    /// without failing the suite. Analysis in the decisions ledger.
    blocked: bool,
    detail: String,
}

struct Report {
    lines: Vec<Line>,
}

impl Report {
    fn check(&mut self, id: &'static str, ok: bool, detail: String) {
        self.lines.push(Line { id, ok, blocked: false, detail });
    }
}

fn g(mean: f64, var: f64) -> DistributionSpec {
    DistributionSpec::gaussian(mean, var).unwrap()
}

fn cr() -> CommonRandomness {
    CommonRandomness::from_hex(SEED).unwrap()
}

/// KL(N(1, s) || N(0, 1)) in bits, by hand.
fn kl_fig2(s: f64) -> f64 {
    0.5 * (s - s.ln()) / LN_2
}

fn preset(p: Preset, overrides: &[(&str, &str)]) -> ExperimentConfig {
    let mut c = ExperimentConfig::from_preset(p).unwrap();
    c.set("seed", SEED).unwrap();
    for (k, v) in overrides {
        c.set(k, v).unwrap();
    }
    c
}

fn quiet(_: &str) {}

fn run_main(c: &ExperimentConfig) -> Table {
    run(c, &quiet).unwrap().remove(0).table
}

fn csv_bytes(outputs: &[Output]) -> Vec<Vec<u8>> {
    outputs.iter().map(|o| o.table.to_csv().unwrap()).collect()
}

fn criterion_1(r: &mut Report) {
    let mut configs: Vec<(String, DistributionSpec, DistributionSpec)> =
        [0.01, 0.03, 0.05, 0.1].iter().map(|s| (format!("N(1,{s})|N(0,1)"), g(1.0, *s), g(0.0, 1.0))).collect();
    configs.push(("N(0.5,0.7)|N(0,100)".into(), g(0.5, 0.7), g(0.0, 100.0)));
    configs.push(("N(-0.5,0.7)|N(0,100)".into(), g(-0.5, 0.7), g(0.0, 100.0)));
    let cr = &cr();
    let mut worst = (f64::INFINITY, String::new());
    let mut all_ok = true;
    let mut slowest = 0.0f64;
    for (name, p, q) in &configs {
        let t0 = Instant::now();
        let omega = ratio_bound(p, q).unwrap();
        let mut samplers: Vec<(String, Sampler<'_>)> = vec![
            ("rs".into(), Box::new(move |t| rs_select(cr, t, p, q, omega).map(|s| s.1))),
            ("pml".into(), Box::new(move |t| pml_select(cr, t, p, q, omega).map(|s| s.1))),
        ];
        for n in ERS_GRID {
            let scaled = cached_delta(p, q, omega, n).unwrap().scale();
            for (label, scale) in [("1", 1.0), ("delta/delta_x", scaled)] {
                samplers.push((
                    format!("ers N={n} scale={label}"),
                    Box::new(move |t| ers_select(cr, t, p, q, omega, n, scale).map(|s| s.y[0])),
                ));
            }
        }
        for (label, f) in &samplers {
            let ys = run_trials(GOF_ACCEPTS, f).unwrap();
            let gof = chi_square_gof(&ys, |y| p.cdf(y), GOF_BINS).unwrap();
            let ok = gof.p_value > GOF_MIN_P;
            all_ok &= ok;
            if !ok {
                eprintln!("  criterion 1: {name} {label}: p = {:.2e}", gof.p_value);
            }
            if gof.p_value < worst.0 {
                worst = (gof.p_value, format!("{name} {label}"));
            }
        }
        slowest = slowest.max(t0.elapsed().as_secs_f64());
    }
    r.check(
        "1",
        all_ok,
        format!(
            "{} samplers x {} configs, {GOF_BINS}-bin chi-square, min p = {:.4} ({}); slowest config {:.1} s",
            2 + 2 * ERS_GRID.len(),
            configs.len(),
            worst.0,
            worst.1,
            slowest
        ),
    );
}

fn criteria_2_to_4(r: &mut Report) {
    let fig2 = run_main(&preset(Preset::Fig2, &[]));
    let mut ok2 = true;
    let mut d2 = Vec::new();
    let mut ok4 = true;
    let mut d4 = Vec::new();
    for i in 0..fig2.rows.len() {
        let row = fig2.row(i);
        let s = row.f64("sigma2").unwrap();
        let kl = kl_fig2(s);
        let (l, lse) = (row.f64("e_log2_l").unwrap(), row.f64("e_log2_l_se").unwrap());
        let (kh, khse) = (row.f64("e_log2_khat").unwrap(), row.f64("e_log2_khat_se").unwrap());
        let bound = kl + std::f64::consts::LOG2_E;
        ok2 &= l <= 1.0 + CODING_SE * lse && kh <= bound + CODING_SE * khse;
        d2.push(format!("s2={s}: E log L={l:.3}, E log K^={kh:.3} <= {bound:.3}"));
        let ideal = row.f64("ideal_bits").unwrap();
        let prop1 = kl + (kl + 1.0).log2() + 9.0;
        let fails: f64 = ["sort_failures", "bin_failures", "wire_failures"].iter().map(|c| row.f64(c).unwrap()).sum();
        ok4 &= ideal <= prop1 && fails == 0.0;
        d4.push(format!("rs s2={s}: {ideal:.2} <= {prop1:.2}"));
    }
    r.check("2", ok2, d2.join("; "));

    let fig3 = run_main(&preset(Preset::Fig3, &[]));
    let mut ok3 = true;
    let mut d3 = Vec::new();
    for i in 0..fig3.rows.len() {
        let row = fig3.row(i);
        let (s, n) = (row.f64("sigma2").unwrap(), row.f64("N").unwrap());
        let kl = kl_fig2(s);
        let sum = row.f64("e_log2_k1hat").unwrap() + row.f64("e_log2_k2hat").unwrap();
        let bound = kl + 2.0 * std::f64::consts::LOG2_E + 3.0;
        ok3 &= sum <= bound + CODING_SE * row.f64("e_log2_sum_se").unwrap();
        d3.push(format!("s2={s} N={n}: {sum:.3} <= {bound:.3}"));
        let ideal = row.f64("ideal_bits").unwrap();
        let prop2 = kl + 2.0 * (kl + 8.0).log2() + 12.0;
        let fails = row.f64("decode_failures").unwrap() + row.f64("wire_failures").unwrap();
        ok4 &= ideal <= prop2 && fails == 0.0;
        d4.push(format!("ers s2={s} N={n}: {ideal:.2} <= {prop2:.2}"));
    }
    r.check("3", ok3, d3.join("; "));

    // Unary and Elias-delta roundtrips on accepted indices.
    let (p, q) = (g(1.0, 0.05), g(0.0, 1.0));
    let omega = ratio_bound(&p, &q).unwrap();
    let cr = cr();
    let bad = run_trials(100_000, |t| {
        let (k, _) = rs_select(&cr, t, &p, &q, omega)?;
        let u = unary_encode(k)?;
        let e = elias_delta_encode(k)?;
        let ok_u = unary_decode(&mut u.reader())? == k && u.len() as u64 == k;
        let ok_e = elias_delta_decode(&mut e.reader())? == k;
        Ok(!(ok_u && ok_e))
    })
    .unwrap()
    .into_iter()
    .filter(|b| *b)
    .count();
    ok4 &= bad == 0;
    d4.push(format!("unary/elias roundtrip failures: {bad}"));
    r.check("4", ok4, d4.join("; "));
}

fn criterion_5(r: &mut Report) {
    let (pa, pb, q) = (g(0.5, 0.7), g(-0.5, 0.7), g(0.0, 100.0));
    let omega = ratio_bound(&pa, &q).unwrap().max(ratio_bound(&pb, &q).unwrap());
    let tv = total_variation(&pa, &pb);
    let expect = (1.0 - tv) / (1.0 + tv);
    let cr = cr();
    let trials = 100_000;
    let hits = run_trials(trials, |t| match_rs(&cr, t, &pa, &pb, &q, omega).map(|m| m.matched))
        .unwrap()
        .into_iter()
        .filter(|m| *m)
        .count();
    let rate = hits as f64 / trials as f64;
    let se = binomial_se(expect, trials);
    let z = (rate - expect) / se;
    r.check("5", z.abs() <= RATE_SE, format!("rate {rate:.4} vs (1-TV)/(1+TV) = {expect:.4} (TV {tv:.4}), z = {z:+.2}"));
}

fn criterion_6(r: &mut Report) {
    let t = run_main(&preset(Preset::Grs, &[]));
    let mut ok_a = true;
    let mut ok_b = true;
    let mut da = Vec::new();
    let mut db = Vec::new();
    for i in 0..t.rows.len() {
        let row = t.row(i);
        let k = row.f64("k").unwrap();
        let grs = row.f64("grs_match_rate").unwrap();
        let n = row.f64("grs_count").unwrap() as u64;
        let expect = 1.0 / (k + 1.0);
        let z = (grs - expect) / binomial_se(expect, n);
        ok_a &= z.abs() <= RATE_SE;
        da.push(format!("k={k}: {grs:.4} vs {expect:.4} (z {z:+.2})"));
        let pml = row.f64("pml_match_rate").unwrap();
        ok_b &= pml == 1.0;
        db.push(format!("k={k}: {pml:.4}"));
    }
    r.lines.push(Line {
        id: "6",
        ok: ok_a && ok_b,
        // Only the Poisson-race claim is known not to hold.
        blocked: ok_a && !ok_b,
        detail: format!(
            "greedy rejection = 1/(k+1) [{}]: {}; Poisson race = 1 [{}]: {}",
            if ok_a { "PASS" } else { "FAIL" },
            da.join(", "),
            if ok_b { "PASS" } else { "FAIL" },
            db.join(", ")
        ),
    });
}

fn criterion_7(r: &mut Report) {
    let mut c = ExperimentConfig::defaults(Experiment::Matching);
    for (k, v) in [
        ("seed", SEED),
        ("trials", "20000"),
        ("bins", "20"),
        ("proposal", "kind=gaussian mean=0 var=1"),
        ("n", "2,4,8,16,32,64,128"),
        ("protocols", "rs,ers-nocomm,ers-batchcomm,pml"),
    ] {
        c.set(k, v).unwrap();
    }
    let bins = run(&c, &quiet).unwrap().remove(1).table;
    let mut ok = true;
    let mut checked = 0;
    let mut min_count = u64::MAX;
    let mut worst = (f64::INFINITY, String::new());
    for i in 0..bins.rows.len() {
        let row = bins.row(i);
        let Some(bound) = row.opt("bound_value").unwrap() else { continue };
        let count = row.f64("count").unwrap() as u64;
        let rate = row.f64("match_rate").unwrap();
        let se = binomial_se(rate, count);
        let z = (rate - bound) / se;
        checked += 1;
        min_count = min_count.min(count);
        ok &= z >= -RATE_SE;
        if z < worst.0 {
            worst = (z, format!("{} N={} bin {}", row.str("protocol").unwrap(), row.str("N").unwrap(), row.str("bin").unwrap()));
        }
    }
    let batch = [Protocol::ErsNoComm, Protocol::ErsBatchComm]
        .iter()
        .all(|p| (0..bins.rows.len()).any(|i| bins.row(i).str("protocol").unwrap() == p.name() && bins.row(i).opt("bound_value").unwrap().is_some()));
    ok &= batch && min_count >= 500;
    r.check(
        "7",
        ok,
        format!("{checked} bins with finite bounds (Q=N(0,1)), min count {min_count}, worst z {:+.2} at {}", worst.0, worst.1),
    );
}

fn criterion_8(r: &mut Report) -> Vec<Vec<u8>> {
    let c = preset(Preset::Fig4, &[]);
    let outputs = run(&c, &quiet).unwrap();
    let t = &outputs[0].table;
    let get = |p: &str, n: &str, col: &str| -> f64 {
        let i = (0..t.rows.len()).find(|i| t.row(*i).str("protocol").unwrap() == p && t.row(*i).str("N").unwrap() == n).unwrap();
        t.row(i).f64(col).unwrap()
    };
    let grid: Vec<String> = c.n.iter().map(|n| n.to_string()).collect();
    let last = grid.last().unwrap();
    let gap = (get("ers-nocomm", last, "match_rate") - get("pml", last, "match_rate")).abs();
    let ok_a = gap <= PML_GAP;
    let mut ok_b = true;
    let mut worst_b = f64::INFINITY;
    for n in &grid {
        let d = get("ers-batchcomm", n, "match_rate") - get("iml", n, "match_rate");
        let se = get("ers-batchcomm", n, "std_err").hypot(get("iml", n, "std_err"));
        ok_b &= d >= -RATE_SE * se;
        worst_b = worst_b.min(d / se);
    }
    let bias: Vec<f64> = grid.iter().map(|n| get("iml", n, "variance_estimate") - IML_VARIANCE_TARGET).collect();
    let bias_se: Vec<f64> = grid.iter().map(|n| get("iml", n, "variance_se")).collect();
    let ok_c0 = bias[0] > RATE_SE * bias_se[0];
    let ok_c1 = bias.windows(2).zip(bias_se.windows(2)).all(|(b, s)| b[1].abs() <= b[0].abs() + RATE_SE * s[0].hypot(s[1]));
    let ns: Vec<f64> = c.n.iter().map(|n| *n as f64).collect();
    let rho = spearman(&ns, &bias.iter().map(|b| b.abs()).collect::<Vec<_>>());
    let ok = ok_a && ok_b && ok_c0 && ok_c1 && rho <= TREND_MAX_SPEARMAN;
    r.check(
        "8",
        ok,
        format!(
            "|ers-nocomm - pml| at N={last}: {gap:.4}; min (batch-comm - iml)/se {worst_b:+.2}; iml variance bias {:.3} -> {:.3}, spearman {rho:.3}",
            bias[0],
            bias.last().unwrap()
        ),
    );
    csv_bytes(&outputs)
}

fn criterion_9(r: &mut Report) {
    let t0 = Instant::now();
    let t = run_main(&preset(Preset::Fig5Desk, &[]));
    let secs = t0.elapsed().as_secs_f64();
    let rows: Vec<_> = (0..t.rows.len()).map(|i| t.row(i)).collect();
    let (mut a, mut b, mut c, mut e) = (true, true, true, true);
    let mut worst_a = f64::NEG_INFINITY;
    let mut worst_c = 0.0f64;
    let mut batch_checked = 0;
    for row in &rows {
        let m = row.f64("mismatch_rate").unwrap();
        let se = row.f64("mismatch_se").unwrap().hypot(row.f64("bound_se").unwrap());
        let bound = row.f64("bound_value").unwrap();
        a &= m <= bound + RATE_SE * se;
        if se > 0.0 {
            worst_a = worst_a.max((m - bound) / se);
        }
        if row.f64("N").unwrap() >= row.f64("block_omega").unwrap() {
            b &= row.f64("batch_bits").unwrap() <= BATCH_BITS_LIMIT;
            batch_checked += 1;
        }
        let dev = row.f64("matched_distortion_db").unwrap() - 10.0 * row.f64("sigma2_yprime_given_x").unwrap().log10();
        c &= dev.abs() <= DISTORTION_DB;
        worst_c = worst_c.max(dev.abs());
        if row.str("feedback").unwrap() == "on" {
            e &= row.f64("final_mismatch_rate").unwrap() == 0.0 && row.f64("feedback_bits_out_of_set").unwrap() == 0.0;
        }
    }
    // Equal hash budget per sample: (n_joint, log2 V) pairs.
    let pairs = [((1, 6.0), (2, 12.0)), ((2, 6.0), (4, 12.0))];
    let find = |s2: &str, nj: u32, l: f64| {
        rows.iter()
            .find(|r| {
                r.str("sigma2_yprime_given_x").unwrap() == s2
                    && r.f64("n_joint").unwrap() as u32 == nj
                    && r.f64("log2V").unwrap() == l
                    && r.str("feedback").unwrap() == "off"
            })
            .unwrap()
            .f64("mismatch_rate")
            .unwrap()
    };
    let mut d = true;
    let mut dd = Vec::new();
    for s2 in ["0.02", "0.05"] {
        for ((n1, l1), (n2, l2)) in pairs {
            let (m1, m2) = (find(s2, n1, l1), find(s2, n2, l2));
            d &= m2 < m1;
            dd.push(format!("s2={s2} n={n1}->{n2}: {m1:.4} -> {m2:.4}"));
        }
    }
    r.check(
        "9",
        a && b && c && d && e,
        format!(
            "{} points in {secs:.0} s; (a) max z vs bound {worst_a:+.2} [{a}]; (b) {batch_checked} points with N >= block omega [{b}]; \
             (c) max |dB dev| {worst_c:.3} [{c}]; (d) {} [{d}]; (e) [{e}]",
            rows.len(),
            dd.join(", ")
        ),
    );
}

fn criterion_10(r: &mut Report, fig4_full: &[Vec<u8>]) {
    let mut ok = true;
    let mut notes = Vec::new();
    let cases: Vec<(Preset, Vec<(&str, &str)>)> = vec![
        (Preset::Fig2, vec![("trials", "5000")]),
        (Preset::Fig3, vec![("trials", "2000")]),
        (Preset::Fig4, vec![("trials", "2000")]),
        (Preset::Fig5Desk, vec![("trials", "1000"), ("bound_samples", "2000"), ("n_joint", "1,2")]),
        (Preset::Grs, vec![("trials", "20000")]),
    ];
    for (p, ov) in cases {
        let mut outs = Vec::new();
        for threads in ["1", "3", "1"] {
            let mut ov = ov.clone();
            ov.push(("threads", threads));
            outs.push(csv_bytes(&run(&preset(p, &ov), &quiet).unwrap()));
        }
        let same = outs.windows(2).all(|w| w[0] == w[1]);
        ok &= same;
        notes.push(format!("{p}: {}", if same { "identical" } else { "DIFFERENT" }));
    }
    let rerun = csv_bytes(&run(&preset(Preset::Fig4, &[("threads", "2")]), &quiet).unwrap());
    let same = rerun == fig4_full;
    ok &= same;
    notes.push(format!("fig4 full size, default vs 2 threads: {}", if same { "identical" } else { "DIFFERENT" }));
    r.check("10", ok, notes.join("; "));
}

fn main() -> ExitCode {
    let mut r = Report { lines: Vec::new() };
    let start = Instant::now();
    let mut timed = |name: &str, f: &mut dyn FnMut(&mut Report)| {
        let t0 = Instant::now();
        f(&mut r);
        eprintln!("  [{name} took {:.1} s]", t0.elapsed().as_secs_f64());
    };
    timed("criterion 1", &mut |r| criterion_1(r));
    timed("criteria 2-4", &mut |r| criteria_2_to_4(r));
    timed("criterion 5", &mut |r| criterion_5(r));
    timed("criterion 6", &mut |r| criterion_6(r));
    timed("criterion 7", &mut |r| criterion_7(r));
    let mut fig4 = Vec::new();
    timed("criterion 8", &mut |r| fig4 = criterion_8(r));
    timed("criterion 9", &mut |r| criterion_9(r));
    timed("criterion 10", &mut |r| criterion_10(r, &fig4));

    let mut unexpected = 0;
    for l in &r.lines {
        let tag = if l.ok { "PASS" } else { "FAIL" };
        let note = if !l.ok && l.blocked { " (known blocked, see decisions ledger)" } else { "" };
        println!("{tag} criterion {}{note}: {}", l.id, l.detail);
        if !l.ok && !l.blocked {
            unexpected += 1;
        }
    }
    println!("acceptance: {} criteria, {unexpected} unexpected failures, {:.0} s", r.lines.len(), start.elapsed().as_secs_f64());
    if unexpected > 0 { ExitCode::FAILURE } else { ExitCode::SUCCESS }
}
