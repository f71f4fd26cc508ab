//! Witness enumeration and program-level verdicts.
//!
//! A program is undefined when some basic execution extends to a faulty
//! candidate; otherwise its behaviours are the final states of its
//! consistent candidates.
//!
//! For models with a witness order the order is built one event at a time.
//! Constraints of the form `irreflexive S ; X`, with `X` independent of the
//! order, reject a prefix as soon as the newly placed event reaches an
//! earlier one through `X`. Consistency constraints that do not mention the
//! order at all are tested once per `rf`/`mo` choice, skipping the whole
//! order search when one fails. Both shortcuts only discard inconsistent
//! candidates, so verdicts and outcomes are unaffected.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use itertools::Itertools;
use rayon::prelude::*;
use thiserror::Error;

use crate::catdsl::{BinOp, EvalError, ExecStage, Level, ModelDef, Node, Predicate, RfMoStage, Tag, Verdict};
use crate::events::{Execution, Int, Witness};
use crate::frontend::{enumerate_basic, BasicExecution, EnumConfig, FrontendError, LitmusProgram, QueryAtom};
use crate::relalg::{EventId, RelError, Relation};

pub const DEFAULT_CANDIDATE_CAP: u64 = 10_000_000;
pub const WORKERS_ENV: &str = "LITMUS_AXIOM_WORKERS";

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Relation(#[from] RelError),
    #[error("execution {execution} has more than {cap} candidates")]
    CandidateCap { execution: usize, cap: u64 },
    #[error("cannot start worker pool: {0}")]
    Workers(String),
}

#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub enumeration: EnumConfig,
    /// Per basic execution.
    pub max_candidates: u64,
    /// Stop at the first faulty candidate.
    pub fast: bool,
    /// Use the order-search shortcuts.
    pub prune: bool,
    /// Worker threads; `None` reads the environment, then uses all cores.
    pub workers: Option<usize>,
    pub deadline: Option<Instant>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            enumeration: EnumConfig::default(),
            max_candidates: DEFAULT_CANDIDATE_CAP,
            fast: false,
            prune: true,
            workers: None,
            deadline: None,
        }
    }
}

impl CheckConfig {
    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.deadline = Some(Instant::now() + timeout);
        self
    }
}

/// Register values plus the final value of every written atomic location.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Outcome(pub BTreeMap<String, Int>);

impl Outcome {
    pub fn satisfies(&self, query: &[QueryAtom]) -> bool {
        query.iter().all(|a| self.0.get(&a.name) == Some(&a.value))
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join("; "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProgramVerdict {
    Defined,
    Undefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CheckStats {
    pub basic_executions: usize,
    pub candidates: u64,
    pub consistent: u64,
    pub faulty: u64,
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub test: String,
    pub model: String,
    pub verdict: ProgramVerdict,
    /// Each final state with the number of consistent candidates reaching it.
    pub outcomes: BTreeMap<Outcome, u64>,
    /// Whether the query's final state was observed, if there is a query.
    pub query: Option<bool>,
    /// A loop bound cut paths short, or the deadline expired.
    pub truncated: bool,
    pub timed_out: bool,
    pub stats: CheckStats,
    pub elapsed: Duration,
}

impl CheckReport {
    pub fn states(&self) -> usize {
        self.outcomes.len()
    }

    /// Outcome lines, sorted as text.
    pub fn outcome_lines(&self) -> Vec<String> {
        let mut lines: Vec<String> = self.outcomes.keys().map(Outcome::to_string).collect();
        lines.sort();
        lines
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "Test {} model={}\nUndefined: {}\nStates {}\n",
            self.test,
            self.model,
            if self.verdict == ProgramVerdict::Undefined { "yes" } else { "no" },
            self.states()
        );
        for line in self.outcome_lines() {
            out.push_str(&line);
            out.push('\n');
        }
        if let Some(q) = self.query {
            out.push_str(if q { "Query: witnessed\n" } else { "Query: not-witnessed\n" });
        }
        if self.truncated {
            out.push_str("Truncated: yes\n");
        }
        out
    }
}

/// The `rf` and `mo` choices of one execution.
#[derive(Debug, Clone)]
pub struct WitnessSpace {
    n: usize,
    /// Each read with its admissible sources.
    rf_choices: Vec<(EventId, Vec<EventId>)>,
    /// For each atomic location, every strict total order of its writes.
    mo_choices: Vec<Vec<Relation>>,
}

fn odometer(sizes: Vec<usize>) -> impl Iterator<Item = Vec<usize>> {
    let mut next = if sizes.contains(&0) {
        None
    } else {
        Some(vec![0; sizes.len()])
    };
    std::iter::from_fn(move || {
        let current = next.take()?;
        let mut succ = current.clone();
        let mut k = sizes.len();
        while k > 0 {
            k -= 1;
            succ[k] += 1;
            if succ[k] < sizes[k] {
                next = Some(succ);
                break;
            }
            succ[k] = 0;
        }
        Some(current)
    })
}

impl WitnessSpace {
    pub fn new(x: &Execution) -> Result<Self, RelError> {
        let n = x.len();
        let writes = x.writes();
        let mut rf_choices = Vec::new();
        for r in x.reads().iter() {
            let l = &x.labels[r];
            let sources = writes
                .iter()
                .filter(|&w| x.labels[w].loc == l.loc && x.labels[w].wval == l.rval)
                .collect();
            rf_choices.push((r, sources));
        }
        let nal = x.nal();
        let mut mo_choices = Vec::new();
        for loc in 0..x.locations.len() {
            let ws: Vec<EventId> = writes
                .iter()
                .filter(|&w| x.labels[w].loc == Some(loc) && !nal.contains(w))
                .collect();
            if ws.is_empty() {
                continue;
            }
            let orders = ws
                .iter()
                .copied()
                .permutations(ws.len())
                .map(|p: Vec<EventId>| Relation::total_order(n, &p))
                .collect::<Result<Vec<_>, _>>()?;
            mo_choices.push(orders);
        }
        Ok(WitnessSpace { n, rf_choices, mo_choices })
    }

    /// Number of `rf`/`mo` pairs, saturating.
    pub fn count(&self) -> u64 {
        self.rf_choices
            .iter()
            .map(|(_, s)| s.len() as u64)
            .chain(self.mo_choices.iter().map(|m| m.len() as u64))
            .fold(1u64, u64::saturating_mul)
    }

    /// Every `rf`/`mo` pair, in lexicographic order of choice indices.
    pub fn iter(&self) -> impl Iterator<Item = (Relation, Relation)> + '_ {
        let sizes = self
            .rf_choices
            .iter()
            .map(|(_, s)| s.len())
            .chain(self.mo_choices.iter().map(Vec::len))
            .collect();
        let k = self.rf_choices.len();
        odometer(sizes).map(move |idx| {
            let mut rf = Relation::empty(self.n).expect("universe already checked");
            for ((r, sources), &i) in self.rf_choices.iter().zip(&idx) {
                rf.insert(sources[i], *r).expect("events in range");
            }
            let mut mo = Relation::empty(self.n).expect("universe already checked");
            for (orders, &i) in self.mo_choices.iter().zip(&idx[k..]) {
                mo = mo.union(&orders[i]).expect("same universe");
            }
            (rf, mo)
        })
    }
}

/// Every strict total order over `domain`, lexicographic in placement order.
/// `blocked` relations cut prefixes: an event cannot be placed after an event
/// it reaches through one of them.
fn search_orders<F>(domain: &[EventId], blocked: &[Relation], visit: &mut F) -> Result<bool, CheckError>
where
    F: FnMut(&[EventId]) -> Result<bool, CheckError>,
{
    fn go<F>(
        domain: &[EventId],
        blocked: &[Relation],
        order: &mut Vec<EventId>,
        placed: u64,
        visit: &mut F,
    ) -> Result<bool, CheckError>
    where
        F: FnMut(&[EventId]) -> Result<bool, CheckError>,
    {
        if order.len() == domain.len() {
            return visit(order);
        }
        for &e in domain {
            if placed & (1 << e) != 0 || blocked.iter().any(|x| x.row(e) & placed != 0) {
                continue;
            }
            order.push(e);
            let go_on = go(domain, blocked, order, placed | (1 << e), visit)?;
            order.pop();
            if !go_on {
                return Ok(false);
            }
        }
        Ok(true)
    }
    go(domain, blocked, &mut Vec::with_capacity(domain.len()), 0, visit)
}

/// All well-formed witnesses of `x` for model `m`.
pub fn enumerate_witnesses(x: &Execution, m: &ModelDef) -> Result<Vec<Witness>, CheckError> {
    let space = WitnessSpace::new(x)?;
    let exec = ExecStage::new(m, x)?;
    let mut out = Vec::new();
    for (rf, mo) in space.iter() {
        if m.witness().is_none() {
            out.push(Witness { rf, mo, s: None });
            continue;
        }
        let domain: Vec<EventId> = {
            let stage = exec.with_rf_mo(&rf, &mo)?;
            stage.witness_domain().expect("model declares a witness")?.iter().collect()
        };
        search_orders(&domain, &[], &mut |order| {
            out.push(Witness {
                rf: rf.clone(),
                mo: mo.clone(),
                s: Some(Relation::total_order(x.len(), order)?),
            });
            Ok(true)
        })?;
    }
    Ok(out)
}

/// Verdict of one well-formed candidate.
pub fn check_execution(x: &Execution, w: &Witness, m: &ModelDef) -> Result<Verdict, CheckError> {
    Ok(crate::catdsl::eval_model(m, x, w)?)
}

/// `irreflexive S ; X` consistency constraints with `X` free of the order.
fn prefix_constraints(m: &ModelDef) -> Vec<&crate::catdsl::Expr> {
    m.constraints
        .iter()
        .filter(|c| c.tag == Tag::Consistency && c.predicate == Predicate::Irreflexive)
        .filter_map(|c| match &c.expr.node {
            Node::Binary(BinOp::Seq, l, r) if l.node == Node::Witness && r.level < Level::Order => Some(&**r),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Default)]
struct ExecResult {
    candidates: u64,
    consistent: u64,
    faulty: u64,
    outcomes: BTreeMap<Outcome, u64>,
    timed_out: bool,
}

struct Run<'a> {
    model: &'a ModelDef,
    cfg: &'a CheckConfig,
    stop: &'a AtomicBool,
}

impl Run<'_> {
    fn expired(&self) -> bool {
        self.cfg.deadline.is_some_and(|d| Instant::now() >= d)
    }

    fn outcome(x: &Execution, registers: &BTreeMap<String, Int>, mo: &Relation) -> Outcome {
        let mut o = registers.clone();
        let writes = x.writes();
        for (l, loc) in x.locations.iter().enumerate() {
            if !loc.atomic {
                continue;
            }
            // the write with no mo-successor
            let last = writes
                .iter()
                .filter(|&w| x.labels[w].loc == Some(l))
                .find(|&w| mo.row(w) == 0);
            if let Some(w) = last {
                o.insert(loc.name.clone(), x.labels[w].wval.expect("writes carry a value"));
            }
        }
        Outcome(o)
    }

    fn record(&self, res: &mut ExecResult, v: &Verdict, be: &BasicExecution, mo: &Relation) {
        res.candidates += 1;
        if v.consistent {
            res.consistent += 1;
            *res.outcomes.entry(Self::outcome(&be.exec, &be.registers, mo)).or_default() += 1;
            if v.faulty {
                res.faulty += 1;
                if self.cfg.fast {
                    self.stop.store(true, Ordering::Relaxed);
                }
            }
        }
    }

    fn execution(&self, index: usize, be: &BasicExecution) -> Result<ExecResult, CheckError> {
        let x = &be.exec;
        let cap = self.cfg.max_candidates;
        let mut res = ExecResult::default();
        let space = WitnessSpace::new(x)?;
        if space.count() > cap {
            return Err(CheckError::CandidateCap { execution: index, cap });
        }
        let exec = ExecStage::new(self.model, x)?;
        let prefix = prefix_constraints(self.model);
        let early: Vec<_> = self
            .model
            .constraints
            .iter()
            .filter(|c| c.tag == Tag::Consistency && c.expr.level <= Level::RfMo)
            .collect();
        for (rf, mo) in space.iter() {
            if self.stop.load(Ordering::Relaxed) {
                break;
            }
            if self.expired() {
                res.timed_out = true;
                break;
            }
            let stage = exec.with_rf_mo(&rf, &mo)?;
            if self.model.witness().is_none() {
                let v = stage.verdict(None)?;
                self.record(&mut res, &v, be, &mo);
                continue;
            }
            if !self.search(index, be, &stage, &mo, &prefix, &early, &mut res)? {
                break;
            }
        }
        Ok(res)
    }

    /// Order search for one `rf`/`mo` pair; false once the run must stop.
    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        index: usize,
        be: &BasicExecution,
        stage: &RfMoStage<'_, '_>,
        mo: &Relation,
        prefix: &[&crate::catdsl::Expr],
        early: &[&crate::catdsl::Constraint],
        res: &mut ExecResult,
    ) -> Result<bool, CheckError> {
        let mut blocked = Vec::new();
        if self.cfg.prune {
            for c in early {
                if !stage.check(c)? {
                    return Ok(true);
                }
            }
            for e in prefix {
                if let Some(r) = stage.eval(e)?.as_rel() {
                    blocked.push(r.clone());
                }
            }
        }
        let domain: Vec<EventId> = stage.witness_domain().expect("model declares a witness")?.iter().collect();
        let n = be.exec.len();
        let cap = self.cfg.max_candidates;
        let mut steps = 0u32;
        search_orders(&domain, &blocked, &mut |order| {
            steps = steps.wrapping_add(1);
            if steps % 1024 == 0 && (self.stop.load(Ordering::Relaxed) || self.expired()) {
                res.timed_out |= self.expired();
                return Ok(false);
            }
            let s = Relation::total_order(n, order)?;
            let v = stage.verdict(Some(&s))?;
            self.record(res, &v, be, mo);
            if res.candidates > cap {
                return Err(CheckError::CandidateCap { execution: index, cap });
            }
            Ok(true)
        })
    }
}

/// Worker count: explicit setting, then the environment, then all cores.
pub fn resolve_workers(explicit: Option<usize>) -> Option<usize> {
    explicit.or_else(|| std::env::var(WORKERS_ENV).ok()?.trim().parse().ok()).filter(|&n| n > 0)
}

/// Check every basic execution of `p` against `m`.
pub fn allowed(p: &LitmusProgram, m: &ModelDef, cfg: &CheckConfig) -> Result<CheckReport, CheckError> {
    let start = Instant::now();
    let basic = enumerate_basic(p, &cfg.enumeration)?;
    let stop = AtomicBool::new(false);
    let run = Run { model: m, cfg, stop: &stop };
    let work = || -> Vec<Result<ExecResult, CheckError>> {
        basic
            .executions
            .par_iter()
            .enumerate()
            .map(|(i, be)| run.execution(i, be))
            .collect()
    };
    let results = match resolve_workers(cfg.workers) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CheckError::Workers(e.to_string()))?
            .install(work),
        None => work(),
    };
    let mut stats = CheckStats {
        basic_executions: basic.executions.len(),
        ..CheckStats::default()
    };
    let mut outcomes: BTreeMap<Outcome, u64> = BTreeMap::new();
    let mut timed_out = false;
    for r in results {
        let r = r?;
        stats.candidates += r.candidates;
        stats.consistent += r.consistent;
        stats.faulty += r.faulty;
        timed_out |= r.timed_out;
        for (o, k) in r.outcomes {
            *outcomes.entry(o).or_default() += k;
        }
    }
    let query = p
        .query
        .as_ref()
        .map(|q| outcomes.keys().any(|o| o.satisfies(q)));
    Ok(CheckReport {
        test: p.name.clone(),
        model: m.name.clone(),
        verdict: if stats.faulty > 0 {
            ProgramVerdict::Undefined
        } else {
            ProgramVerdict::Defined
        },
        outcomes,
        query,
        truncated: basic.truncated || timed_out,
        timed_out,
        stats,
        elapsed: start.elapsed(),
    })
}
