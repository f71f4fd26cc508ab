//! The seven acceptance criteria, one pass/fail line each.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use litmus_axiom::checker::{allowed, CheckConfig, WitnessSpace};
use litmus_axiom::corpus::{corpus, run_case, GoldenCase};
use litmus_axiom::events::{wf_candidate, Language, MemoryOrder};
use litmus_axiom::experiment::{bench_point, generate_sb, BenchConfig};
use litmus_axiom::frontend::parse_litmus;
use litmus_axiom::models::{get_model, ModelOptions};
use litmus_axiom::oracle::{gen_candidate, run_oracle, OracleConfig, OracleSummary, RandomCandidateSpec};

mod common;
use common::{naive_witnesses, rs_oracle};

type Outcome = Result<String, String>;

fn sb_exhaustive() -> Outcome {
    let m = get_model("c11_simp", ModelOptions::default()).unwrap();
    let mut seen = Vec::new();
    for n in 2..=5 {
        let p = parse_litmus(&generate_sb(n).unwrap()).unwrap();
        let r = allowed(&p, &m, &CheckConfig::default()).map_err(|e| e.to_string())?;
        let zero = (1..=n).map(|i| format!("r{i}=0")).collect::<Vec<_>>().join("; ");
        if r.states() != (1 << n) - 1 || r.query != Some(false) || r.outcome_lines().iter().any(|l| l.starts_with(&zero)) {
            return Err(format!("SB{n}: {} states, query {:?}", r.states(), r.query));
        }
        seen.push(r.states().to_string());
    }
    Ok(format!("states {}", seen.join(", ")))
}

fn blow_up() -> Outcome {
    let simp = BenchConfig { repeats: 3, ..BenchConfig::default() };
    let fast = bench_point("c11_simp", 4, &simp).map_err(|e| e.to_string())?;
    if fast.timed_out || fast.mean_seconds >= 10.0 {
        return Err(format!("c11_simp took {:.3}s at N=4", fast.mean_seconds));
    }
    let limit = Duration::from_secs_f64(fast.mean_seconds * 100.0).min(Duration::from_secs(300));
    let orig = BenchConfig { repeats: 1, timeout: limit, prune: false, ..BenchConfig::default() };
    let slow = bench_point("c11_orig", 4, &orig).map_err(|e| e.to_string())?;
    if slow.timed_out {
        Ok(format!(
            "c11_simp {:.4}s, c11_orig exceeded {:.3}s (100x) without shortcuts",
            fast.mean_seconds,
            limit.as_secs_f64()
        ))
    } else {
        Err(format!("c11_orig finished in {:.3}s, under {:.3}s", slow.mean_seconds, limit.as_secs_f64()))
    }
}

fn goldens(derived: bool) -> Outcome {
    let start = Instant::now();
    let mut count = 0;
    let mut failures = Vec::new();
    for case in corpus() {
        let is_derived = match &case {
            GoldenCase::Program(c) => c.derived,
            GoldenCase::Pinned(c) => c.derived,
        };
        if is_derived != derived {
            continue;
        }
        count += 1;
        match run_case(&case) {
            Ok(o) if o.passed => {}
            Ok(o) => failures.push(format!("{} [{}]: {}", case.label(), case.about(), o.observed)),
            Err(e) => failures.push(format!("{}: {e}", case.label())),
        }
    }
    let limit = Duration::from_secs(30);
    if failures.is_empty() && start.elapsed() < limit {
        Ok(format!("{count} cases in {:.2}s", start.elapsed().as_secs_f64()))
    } else if failures.is_empty() {
        Err(format!("{count} cases took {:.1}s", start.elapsed().as_secs_f64()))
    } else {
        Err(failures.join("; "))
    }
}

fn oracle_run() -> Result<OracleSummary, String> {
    let cfg = OracleConfig {
        seeds: 10_000,
        spec: RandomCandidateSpec { max_events: 6, max_sc: 5, ..RandomCandidateSpec::default() },
        ..OracleConfig::default()
    };
    run_oracle(&cfg).map_err(|e| e.to_string())
}

fn theorems(s: &OracleSummary) -> Outcome {
    let v = s.lemma1_violations + s.thm1_violations + s.thm2_violations;
    if v == 0 && s.instances == 10_000 {
        Ok(format!(
            "{} instances, 0 violations (second equivalence premise held on {}), {:.0}/s",
            s.instances,
            s.thm2_applicable,
            s.throughput()
        ))
    } else {
        Err(format!(
            "lemma {} / first {} / second {} violations, seeds {:?}",
            s.lemma1_violations, s.thm1_violations, s.thm2_violations, s.first_failures
        ))
    }
}

fn transcription(s: &OracleSummary) -> Outcome {
    if s.transcription_violations == 0 && s.instances == 10_000 {
        Ok(format!("{} instances, 0 discrepancies", s.instances))
    } else {
        Err(format!("{} discrepancies", s.transcription_violations))
    }
}

fn property_suites() -> Outcome {
    let m = get_model("c11_simp", ModelOptions::default()).unwrap();
    let mut exhaustive = 0;
    for seed in 0..2_000u64 {
        for language in [Language::C11, Language::OpenCl] {
            let spec = RandomCandidateSpec { seed, max_events: 8, language, ..RandomCandidateSpec::default() };
            let (x, w) = gen_candidate(&spec);
            if !wf_candidate(&x, &w, false) {
                return Err(format!("seed {seed}: generated candidate is not well formed"));
            }
            if language == Language::C11 {
                let stage = litmus_axiom::catdsl::ExecStage::new(&m, &x).unwrap();
                let rs = stage
                    .with_rf_mo(&w.rf, &w.mo)
                    .unwrap()
                    .eval(&m.binding("rs").unwrap().expr)
                    .unwrap();
                if rs.as_rel() != Some(&rs_oracle(&x, &w.mo)) {
                    return Err(format!("seed {seed}: release sequences differ"));
                }
            }
            let small = x.reads().len() <= 3
                && x.with_order(MemoryOrder::Sc).len() <= 4
                && (0..x.locations.len()).all(|l| x.writes().iter().filter(|&e| x.labels[e].loc == Some(l)).count() <= 3);
            if seed < 500 && small {
                let listed: std::collections::BTreeSet<_> = WitnessSpace::new(&x).unwrap().iter().collect();
                if listed != naive_witnesses(&x, &w) {
                    return Err(format!("seed {seed}: witness enumeration differs from brute force"));
                }
                exhaustive += 1;
            }
        }
    }
    Ok(format!("wf and rs on 4000 candidates, witness sets on {exhaustive}"))
}

fn report(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let r = f();
    let secs = start.elapsed().as_secs_f64();
    match &r {
        Ok(detail) => println!("criterion {name}: PASS ({detail}; {secs:.1}s)"),
        Err(detail) => println!("criterion {name}: FAIL ({detail}; {secs:.1}s)"),
    }
    r.is_ok()
}

fn main() -> ExitCode {
    let mut ok = report("1 store buffering states", sb_exhaustive);
    ok &= report("2 original model blow-up", blow_up);
    ok &= report("3 golden examples", || goldens(false));
    ok &= report("4 proposed-model behaviour", || goldens(true));
    let mut oracle = Err(String::new());
    ok &= report("5 equivalence theorems", || {
        oracle = oracle_run();
        oracle.clone().and_then(|s| theorems(&s))
    });
    ok &= report("6 transcription", || oracle.clone().and_then(|s| transcription(&s)));
    ok &= report("7 property suites", property_suites);
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
