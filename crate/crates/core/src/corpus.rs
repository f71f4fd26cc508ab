//! Golden cases: litmus programs with expected verdicts, and hand-built
//! candidates reproducing drawn executions event for event.

use serde::Deserialize;

use crate::catdsl::Verdict;
use crate::checker::{allowed, check_execution, CheckConfig, CheckError, ProgramVerdict};
use crate::events::{Execution, ExecutionBuilder, Kind, Label, Language, MemoryOrder, Region, Scope, ThreadPos, Witness};
use crate::experiment::generate_sb;
use crate::frontend::{parse_litmus_with, ParseOptions};
use crate::models::{get_model, ModelOptions};
use crate::relalg::Relation;

const MANIFEST: &str = include_str!("../corpus/manifest.toml");

/// Litmus sources shipped with the crate, by file name.
pub const FILES: [(&str, &str); 13] = [
    ("c11_four_threads.litmus", include_str!("../corpus/c11_four_threads.litmus")),
    ("mp_wg.litmus", include_str!("../corpus/mp_wg.litmus")),
    ("mp_wg_split.litmus", include_str!("../corpus/mp_wg_split.litmus")),
    ("mp_local_flag.litmus", include_str!("../corpus/mp_local_flag.litmus")),
    ("mp_fence_gl.litmus", include_str!("../corpus/mp_fence_gl.litmus")),
    ("lb_nonatomic.litmus", include_str!("../corpus/lb_nonatomic.litmus")),
    ("lb_work_item.litmus", include_str!("../corpus/lb_work_item.litmus")),
    ("mp_asymmetric_scopes.litmus", include_str!("../corpus/mp_asymmetric_scopes.litmus")),
    ("sb_global.litmus", include_str!("../corpus/sb_global.litmus")),
    ("sb_fgb.litmus", include_str!("../corpus/sb_fgb.litmus")),
    ("twisted_sb.litmus", include_str!("../corpus/twisted_sb.litmus")),
    ("iriw_c11.litmus", include_str!("../corpus/iriw_c11.litmus")),
    ("iriw_opencl.litmus", include_str!("../corpus/iriw_opencl.litmus")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryExpectation {
    Witnessed,
    NotWitnessed,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramCase {
    pub file: String,
    pub model: String,
    #[serde(default)]
    pub new_incl: bool,
    #[serde(default)]
    pub allow_wi: bool,
    pub undefined: bool,
    pub query: Option<QueryExpectation>,
    pub states: Option<usize>,
    /// Computed with this checker, then frozen.
    #[serde(default)]
    pub derived: bool,
    pub about: String,
    #[serde(skip)]
    pub text: String,
}

#[derive(Deserialize)]
struct Manifest {
    case: Vec<ProgramCase>,
}

#[derive(Debug, Clone)]
pub struct PinnedCase {
    pub name: &'static str,
    pub about: &'static str,
    pub model: &'static str,
    pub exec: Execution,
    pub witness: Witness,
    pub consistent: bool,
    /// Expected failed axioms, in model order.
    pub failed: Vec<&'static str>,
    pub derived: bool,
}

#[derive(Debug, Clone)]
pub enum GoldenCase {
    Program(ProgramCase),
    Pinned(PinnedCase),
}

impl GoldenCase {
    pub fn label(&self) -> String {
        match self {
            GoldenCase::Program(c) => {
                let mut opts = String::new();
                if c.new_incl {
                    opts.push_str(" +new_incl");
                }
                if c.allow_wi {
                    opts.push_str(" +wi");
                }
                format!("{} under {}{opts}", c.file, c.model)
            }
            GoldenCase::Pinned(c) => format!("{} under {}", c.name, c.model),
        }
    }

    pub fn about(&self) -> &str {
        match self {
            GoldenCase::Program(c) => &c.about,
            GoldenCase::Pinned(c) => c.about,
        }
    }
}

pub fn program_cases() -> Vec<ProgramCase> {
    let manifest: Manifest = toml::from_str(MANIFEST).expect("manifest is valid");
    let mut cases: Vec<ProgramCase> = manifest
        .case
        .into_iter()
        .map(|mut c| {
            c.text = FILES
                .iter()
                .find(|(f, _)| *f == c.file)
                .unwrap_or_else(|| panic!("manifest names unknown file {}", c.file))
                .1
                .to_string();
            c
        })
        .collect();
    for n in 2..=4 {
        cases.push(ProgramCase {
            file: format!("SB{n}"),
            model: "c11_simp".into(),
            new_incl: false,
            allow_wi: false,
            undefined: false,
            query: Some(QueryExpectation::NotWitnessed),
            states: Some((1 << n) - 1),
            derived: false,
            about: format!("{n}-thread store buffering has every state but all zeros"),
            text: generate_sb(n).expect("size in range"),
        });
    }
    cases
}

const fn pos(device: usize, group: usize, thread: usize) -> ThreadPos {
    ThreadPos { device, group, thread }
}

fn rel(n: usize, pairs: &[(usize, usize)]) -> Relation {
    Relation::from_pairs(n, pairs.iter().copied()).expect("pairs in range")
}

/// Relaxed and SC accesses to `x` and `y` over four threads, with the
/// drawn total SC order `f, g, h, i`.
pub fn mixed_sc_candidate() -> (Execution, Witness) {
    use MemoryOrder::{Rlx, Sc};
    let mut b = ExecutionBuilder::new(Language::C11);
    let x = b.location("x", true, Region::C11, 0);
    let y = b.location("y", true, Region::C11, 0);
    let a = b.init(x);
    let bb = b.init(y);
    let c = b.event(pos(0, 0, 0), Label::write(x, 1, Rlx, None));
    let d = b.event(pos(0, 0, 1), Label::read(x, 1, Rlx, None));
    let e = b.event(pos(0, 0, 1), Label::read(x, 2, Rlx, None));
    let f = b.event(pos(0, 0, 2), Label::write(x, 2, Sc, None));
    let g = b.event(pos(0, 0, 2), Label::read(y, 0, Sc, None));
    let h = b.event(pos(0, 0, 3), Label::write(y, 1, Sc, None));
    let i = b.event(pos(0, 0, 3), Label::read(x, 1, Sc, None));
    let exec = b.build().expect("well-formed");
    let n = exec.len();
    let mo = Relation::total_order(n, &[a, c, f])
        .and_then(|m| m.union(&rel(n, &[(bb, h)])))
        .expect("in range");
    let witness = Witness {
        rf: rel(n, &[(bb, g), (c, d), (f, e), (c, i)]),
        mo,
        s: Some(Relation::total_order(n, &[f, g, h, i]).expect("in range")),
    };
    (exec, witness)
}

/// Message passing through a local relaxed flag guarded by region fences,
/// with the stale read of `x`. The drawn `mo` edge on plain `x` is kept.
pub fn fence_gl_stale_candidate() -> (Execution, Witness) {
    use MemoryOrder::{Acq, Rel, Rlx};
    let wg = Some(Scope::WorkGroup);
    let mut b = ExecutionBuilder::new(Language::OpenCl);
    let x = b.location("x", false, Region::Global, 0);
    let y = b.location("y", true, Region::Local, 0);
    let a = b.init(x);
    let bb = b.init(y);
    let c = b.event(pos(0, 0, 0), Label::wna(x, 1));
    b.event(pos(0, 0, 0), Label::fence(Kind::Fgl, Rel, wg));
    let e = b.event(pos(0, 0, 0), Label::write(y, 1, Rlx, wg));
    let f = b.event(pos(0, 0, 1), Label::read(y, 1, Rlx, wg));
    b.event(pos(0, 0, 1), Label::fence(Kind::Fgl, Acq, wg));
    let h = b.event(pos(0, 0, 1), Label::rna(x, 0));
    let exec = b.build().expect("well-formed");
    let n = exec.len();
    let witness = Witness {
        rf: rel(n, &[(e, f), (a, h)]),
        mo: rel(n, &[(a, c), (bb, e)]),
        s: None,
    };
    (exec, witness)
}

/// Store buffering twisted across two devices, reaching `r1 = r2 = 0`.
pub fn twisted_sb_candidate() -> (Execution, Witness) {
    use MemoryOrder::{Acq, Rel, Sc};
    let (dv, all) = (Some(Scope::Device), Some(Scope::All));
    let mut b = ExecutionBuilder::new(Language::OpenCl);
    let x = b.location("x", true, Region::Global, 0);
    let y = b.location("y", true, Region::Global, 0);
    let z1 = b.location("z1", true, Region::GlobalFgb, 0);
    let z2 = b.location("z2", true, Region::GlobalFgb, 0);
    let ix = b.init(x);
    let iy = b.init(y);
    let iz1 = b.init(z1);
    let iz2 = b.init(z2);
    let a = b.event(pos(0, 0, 0), Label::write(x, 1, Sc, dv));
    let bb = b.event(pos(0, 0, 0), Label::write(z1, 1, Rel, all));
    let c = b.event(pos(0, 0, 1), Label::read(z2, 1, Acq, all));
    let d = b.event(pos(0, 0, 1), Label::read(x, 0, Sc, dv));
    let e = b.event(pos(1, 1, 2), Label::write(y, 1, Sc, dv));
    let f = b.event(pos(1, 1, 2), Label::write(z2, 1, Rel, all));
    let g = b.event(pos(1, 1, 3), Label::read(z1, 1, Acq, all));
    let h = b.event(pos(1, 1, 3), Label::read(y, 0, Sc, dv));
    let exec = b.build().expect("well-formed");
    let n = exec.len();
    let witness = Witness {
        rf: rel(n, &[(bb, g), (f, c), (ix, d), (iy, h)]),
        mo: rel(n, &[(ix, a), (iy, e), (iz1, bb), (iz2, f)]),
        s: None,
    };
    (exec, witness)
}

pub fn pinned_cases() -> Vec<PinnedCase> {
    let (x3, w3) = mixed_sc_candidate();
    let stripped = Witness { s: None, ..w3.clone() };
    let (x7, w7) = fence_gl_stale_candidate();
    let (x11, w11) = twisted_sb_candidate();
    let case = |name, about, model, exec: &Execution, witness: &Witness, consistent, failed: &[&'static str], derived| {
        PinnedCase {
            name,
            about,
            model,
            exec: exec.clone(),
            witness: witness.clone(),
            consistent,
            failed: failed.to_vec(),
            derived,
        }
    };
    vec![
        case(
            "mixed_sc",
            "consistent with the drawn total SC order",
            "c11_orig",
            &x3,
            &w3,
            true,
            &[],
            false,
        ),
        case(
            "mixed_sc",
            "consistent once the SC order is only partial",
            "c11_partial",
            &x3,
            &stripped,
            true,
            &[],
            false,
        ),
        case(
            "mixed_sc",
            "the read-from/from-read cycle through SC events is forbidden",
            "c11_simp",
            &x3,
            &stripped,
            false,
            &["Ssimp"],
            false,
        ),
        case(
            "fence_gl_stale",
            "the stale read closes a coherence cycle through global happens-before",
            "opencl_simp",
            &x7,
            &w7,
            false,
            &["CohG", "NaRfG"],
            false,
        ),
        case(
            "twisted_sb",
            "global happens-before and from-read edges form an SC cycle",
            "opencl_simp",
            &x11,
            &w11,
            false,
            &["Ssimp"],
            false,
        ),
        case(
            "twisted_sb",
            "device-scoped SC events on different devices are not scope-inclusive",
            "opencl_scoped",
            &x11,
            &w11,
            true,
            &[],
            true,
        ),
    ]
}

pub fn corpus() -> Vec<GoldenCase> {
    program_cases()
        .into_iter()
        .map(GoldenCase::Program)
        .chain(pinned_cases().into_iter().map(GoldenCase::Pinned))
        .collect()
}

/// A case's observed result, and whether it matches the expectation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseOutcome {
    pub passed: bool,
    pub observed: String,
}

fn program_outcome(c: &ProgramCase) -> Result<CaseOutcome, CheckError> {
    let p = parse_litmus_with(&c.text, ParseOptions { allow_wi: c.allow_wi })?;
    let m = get_model(&c.model, ModelOptions { new_incl: c.new_incl }).expect("manifest names a built-in model");
    let r = allowed(&p, &m, &CheckConfig::default())?;
    let undefined = r.verdict == ProgramVerdict::Undefined;
    let query = r.query.map(|q| {
        if q {
            QueryExpectation::Witnessed
        } else {
            QueryExpectation::NotWitnessed
        }
    });
    let passed = undefined == c.undefined
        && (c.query.is_none() || c.query == query)
        && c.states.map_or(true, |s| s == r.states())
        && !r.truncated;
    Ok(CaseOutcome {
        passed,
        observed: format!("undefined={undefined} query={query:?} states={}", r.states()),
    })
}

fn pinned_outcome(c: &PinnedCase) -> Result<CaseOutcome, CheckError> {
    let m = get_model(c.model, ModelOptions::default()).expect("built-in model");
    let v: Verdict = check_execution(&c.exec, &c.witness, &m)?;
    let failed: Vec<&str> = if v.consistent {
        Vec::new()
    } else {
        v.failed_axioms.iter().map(String::as_str).collect()
    };
    Ok(CaseOutcome {
        passed: v.consistent == c.consistent && failed == c.failed,
        observed: format!("consistent={} failed={:?}", v.consistent, v.failed_axioms),
    })
}

pub fn run_case(case: &GoldenCase) -> Result<CaseOutcome, CheckError> {
    match case {
        GoldenCase::Program(c) => program_outcome(c),
        GoldenCase::Pinned(c) => pinned_outcome(c),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::wf_candidate;

    #[test]
    fn manifest_loads_and_every_file_is_used() {
        let cases = program_cases();
        for (f, _) in FILES {
            assert!(cases.iter().any(|c| c.file == f), "{f} has no case");
        }
    }

    #[test]
    fn pinned_candidates_are_well_formed_where_drawn_so() {
        let (x, w) = mixed_sc_candidate();
        assert!(wf_candidate(&x, &w, true));
        let (x, w) = twisted_sb_candidate();
        assert!(wf_candidate(&x, &w, false));
        // the drawn mo edge on the plain location is outside WfMo
        let (x, w) = fence_gl_stale_candidate();
        assert!(!wf_candidate(&x, &w, false));
    }

    #[test]
    fn pinned_cases_match() {
        for c in pinned_cases() {
            let case = GoldenCase::Pinned(c);
            let out = run_case(&case).unwrap();
            assert!(out.passed, "{}: {}", case.label(), out.observed);
        }
    }
}
