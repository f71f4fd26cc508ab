//! Executions, witnesses and the base environment handed to models.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::relalg::{EventId, EventSet, RelError, Relation, Value};

/// Integer values carried by reads and writes.
pub type Int = i64;

/// Index into [`Execution::locations`].
pub type LocId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MemoryOrder {
    Rlx,
    Acq,
    Rel,
    AcqRel,
    Sc,
}

impl MemoryOrder {
    pub const ALL: [MemoryOrder; 5] = [
        MemoryOrder::Rlx,
        MemoryOrder::Acq,
        MemoryOrder::Rel,
        MemoryOrder::AcqRel,
        MemoryOrder::Sc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MemoryOrder::Rlx => "RLX",
            MemoryOrder::Acq => "ACQ",
            MemoryOrder::Rel => "REL",
            MemoryOrder::AcqRel => "AR",
            MemoryOrder::Sc => "SC",
        }
    }
}

/// OpenCL memory scope. `WorkItem` only exists behind a configuration flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scope {
    WorkItem,
    WorkGroup,
    Device,
    All,
}

impl Scope {
    pub const ALL: [Scope; 4] = [Scope::WorkItem, Scope::WorkGroup, Scope::Device, Scope::All];

    pub fn name(self) -> &'static str {
        match self {
            Scope::WorkItem => "WI",
            Scope::WorkGroup => "WG",
            Scope::Device => "DV",
            Scope::All => "ALL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Global,
    Local,
    GlobalFgb,
    /// Region-free C11 location.
    C11,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Language {
    C11,
    OpenCl,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Location {
    pub name: String,
    pub atomic: bool,
    pub region: Region,
    pub init: Int,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Wna,
    W,
    Rna,
    R,
    Rmw,
    /// C11 fence.
    F,
    /// OpenCL fence on global memory.
    Fg,
    /// OpenCL fence on local memory.
    Fl,
    /// OpenCL fence on both global and local memory.
    Fgl,
}

impl Kind {
    pub fn is_read(self) -> bool {
        matches!(self, Kind::Rna | Kind::R | Kind::Rmw)
    }

    pub fn is_write(self) -> bool {
        matches!(self, Kind::Wna | Kind::W | Kind::Rmw)
    }

    pub fn is_fence(self) -> bool {
        matches!(self, Kind::F | Kind::Fg | Kind::Fl | Kind::Fgl)
    }

    pub fn is_atomic(self) -> bool {
        !matches!(self, Kind::Wna | Kind::Rna)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Label {
    pub kind: Kind,
    pub loc: Option<LocId>,
    pub rval: Option<Int>,
    pub wval: Option<Int>,
    pub ord: Option<MemoryOrder>,
    pub scope: Option<Scope>,
}

impl Label {
    pub fn wna(loc: LocId, v: Int) -> Label {
        Label {
            kind: Kind::Wna,
            loc: Some(loc),
            rval: None,
            wval: Some(v),
            ord: None,
            scope: None,
        }
    }

    pub fn rna(loc: LocId, v: Int) -> Label {
        Label {
            kind: Kind::Rna,
            loc: Some(loc),
            rval: Some(v),
            wval: None,
            ord: None,
            scope: None,
        }
    }

    pub fn write(loc: LocId, v: Int, ord: MemoryOrder, scope: Option<Scope>) -> Label {
        Label {
            kind: Kind::W,
            loc: Some(loc),
            rval: None,
            wval: Some(v),
            ord: Some(ord),
            scope,
        }
    }

    pub fn read(loc: LocId, v: Int, ord: MemoryOrder, scope: Option<Scope>) -> Label {
        Label {
            kind: Kind::R,
            loc: Some(loc),
            rval: Some(v),
            wval: None,
            ord: Some(ord),
            scope,
        }
    }

    pub fn rmw(loc: LocId, read: Int, written: Int, ord: MemoryOrder, scope: Option<Scope>) -> Label {
        Label {
            kind: Kind::Rmw,
            loc: Some(loc),
            rval: Some(read),
            wval: Some(written),
            ord: Some(ord),
            scope,
        }
    }

    pub fn fence(kind: Kind, ord: MemoryOrder, scope: Option<Scope>) -> Label {
        debug_assert!(kind.is_fence());
        Label {
            kind,
            loc: None,
            rval: None,
            wval: None,
            ord: Some(ord),
            scope,
        }
    }

    pub fn is_read(&self) -> bool {
        self.kind.is_read()
    }

    pub fn is_write(&self) -> bool {
        self.kind.is_write()
    }

    pub fn is_fence(&self) -> bool {
        self.kind.is_fence()
    }

    pub fn is_atomic(&self) -> bool {
        self.kind.is_atomic()
    }

    /// Check attribute presence and the memory-order restrictions.
    pub fn check(&self, language: Language, locations: &[Location]) -> Result<(), ExecError> {
        let bad = |why: &str| Err(ExecError::BadLabel(format!("{self}: {why}")));
        let k = self.kind;
        if k.is_fence() != self.loc.is_none() {
            return bad("fences have no location, accesses have one");
        }
        if k.is_read() != self.rval.is_some() || k.is_write() != self.wval.is_some() {
            return bad("read/written values do not match the kind");
        }
        if k.is_atomic() != self.ord.is_some() {
            return bad("memory order present iff atomic");
        }
        let wants_scope = k.is_atomic() && language == Language::OpenCl;
        if wants_scope != self.scope.is_some() {
            return bad("scope present iff OpenCL atomic");
        }
        match (language, k) {
            (Language::C11, Kind::Fg | Kind::Fl | Kind::Fgl) => return bad("region fences are OpenCL only"),
            (Language::OpenCl, Kind::F) => return bad("OpenCL fences name their regions"),
            _ => {}
        }
        if let Some(ord) = self.ord {
            let ok = match ord {
                MemoryOrder::Rlx | MemoryOrder::Sc => true,
                MemoryOrder::Acq => k == Kind::R || k == Kind::Rmw || k.is_fence(),
                MemoryOrder::Rel => k == Kind::W || k == Kind::Rmw || k.is_fence(),
                MemoryOrder::AcqRel => k == Kind::Rmw,
            };
            if !ok {
                return bad("memory order not permitted on this kind");
            }
        }
        if let Some(l) = self.loc {
            let Some(loc) = locations.get(l) else {
                return bad("unknown location");
            };
            if k.is_atomic() && !loc.atomic {
                return bad("atomic access to a non-atomic location");
            }
            if (language == Language::C11) != (loc.region == Region::C11) {
                return bad("location region does not match the language");
            }
        }
        Ok(())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}(", self.kind)?;
        let mut parts = Vec::new();
        if let Some(l) = self.loc {
            parts.push(format!("#{l}"));
        }
        if let Some(v) = self.rval {
            parts.push(v.to_string());
        }
        if let Some(v) = self.wval {
            parts.push(v.to_string());
        }
        if let Some(o) = self.ord {
            parts.push(o.name().to_string());
        }
        if let Some(s) = self.scope {
            parts.push(s.name().to_string());
        }
        write!(f, "{})", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error(transparent)]
    Relation(#[from] RelError),
    #[error("malformed label {0}")]
    BadLabel(String),
    #[error("malformed execution: {0}")]
    Malformed(String),
}

/// An execution graph: events, their labels, and the thread hierarchy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Execution {
    pub language: Language,
    pub locations: Vec<Location>,
    pub labels: Vec<Label>,
    pub initial: EventSet,
    pub thd: Relation,
    pub wg: Relation,
    pub dv: Relation,
    pub sb: Relation,
}

fn is_equivalence_on(r: &Relation, s: &EventSet) -> bool {
    let Ok(restricted) = r.restrict(s) else {
        return false;
    };
    restricted == *r
        && s.identity().is_subset(r)
        && *r == r.inverse()
        && r.is_transitive()
}

impl Execution {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn events(&self) -> std::ops::Range<EventId> {
        0..self.labels.len()
    }

    pub fn location_of(&self, e: EventId) -> Option<&Location> {
        self.labels[e].loc.map(|l| &self.locations[l])
    }

    pub fn location_id(&self, name: &str) -> Option<LocId> {
        self.locations.iter().position(|l| l.name == name)
    }

    pub fn empty(language: Language) -> Execution {
        let rel = Relation::empty(0).expect("empty universe");
        Execution {
            language,
            locations: Vec::new(),
            labels: Vec::new(),
            initial: EventSet::empty(0).expect("empty universe"),
            thd: rel.clone(),
            wg: rel.clone(),
            dv: rel.clone(),
            sb: rel,
        }
    }

    fn set_where(&self, pred: impl Fn(&Label) -> bool) -> EventSet {
        let mask = self
            .labels
            .iter()
            .enumerate()
            .filter(|(_, l)| pred(l))
            .fold(0u64, |m, (i, _)| m | (1 << i));
        EventSet::from_mask(self.len(), mask).expect("universe checked at construction")
    }

    pub fn reads(&self) -> EventSet {
        self.set_where(Label::is_read)
    }

    pub fn writes(&self) -> EventSet {
        self.set_where(Label::is_write)
    }

    pub fn fences(&self) -> EventSet {
        self.set_where(Label::is_fence)
    }

    pub fn atomics(&self) -> EventSet {
        self.set_where(Label::is_atomic)
    }

    pub fn with_order(&self, ord: MemoryOrder) -> EventSet {
        self.set_where(|l| l.ord == Some(ord))
    }

    pub fn with_scope(&self, scope: Scope) -> EventSet {
        self.set_where(|l| l.scope == Some(scope))
    }

    /// Events accessing a non-atomic location.
    pub fn nal(&self) -> EventSet {
        self.set_where(|l| l.loc.is_some_and(|x| !self.locations[x].atomic))
    }

    pub fn fgb(&self) -> EventSet {
        self.set_where(|l| l.loc.is_some_and(|x| self.locations[x].region == Region::GlobalFgb))
    }

    /// Events acting on global memory. In C11 mode every access counts.
    pub fn global(&self) -> EventSet {
        self.set_where(|l| match l.loc {
            None => matches!(l.kind, Kind::Fg | Kind::Fgl),
            Some(x) => matches!(self.locations[x].region, Region::Global | Region::GlobalFgb | Region::C11),
        })
    }

    pub fn local(&self) -> EventSet {
        self.set_where(|l| match l.loc {
            None => matches!(l.kind, Kind::Fl | Kind::Fgl),
            Some(x) => self.locations[x].region == Region::Local,
        })
    }

    /// `=loc`: non-fence events on the same location.
    pub fn same_loc(&self) -> Relation {
        let mut r = Relation::empty(self.len()).expect("universe checked");
        for a in self.events() {
            for b in self.events() {
                if self.labels[a].loc.is_some() && self.labels[a].loc == self.labels[b].loc {
                    r.insert(a, b).expect("in range");
                }
            }
        }
        r
    }

    /// `=val`: writes paired with reads of the value they write.
    pub fn same_val(&self) -> Relation {
        let mut r = Relation::empty(self.len()).expect("universe checked");
        for a in self.events() {
            for b in self.events() {
                let (la, lb) = (&self.labels[a], &self.labels[b]);
                if la.wval.is_some() && la.wval == lb.rval {
                    r.insert(a, b).expect("in range");
                }
            }
        }
        r
    }

    /// Check every structural invariant of an execution.
    pub fn validate(&self) -> Result<(), ExecError> {
        let n = self.len();
        let malformed = |m: String| Err(ExecError::Malformed(m));
        for r in [&self.thd, &self.wg, &self.dv, &self.sb] {
            if r.universe() != n {
                return malformed("relation universe differs from the event count".into());
            }
        }
        if self.initial.universe() != n {
            return malformed("initial set universe differs from the event count".into());
        }
        for l in &self.labels {
            l.check(self.language, &self.locations)?;
        }
        // initial events: one non-atomic write per accessed location
        let mut init_for: BTreeMap<LocId, EventId> = BTreeMap::new();
        for e in self.initial.iter() {
            let l = &self.labels[e];
            let loc = l.loc.expect("checked");
            if l.kind != Kind::Wna || l.wval != Some(self.locations[loc].init) {
                return malformed(format!("initial event {e} is not Wna(loc, init)"));
            }
            if init_for.insert(loc, e).is_some() {
                return malformed(format!("two initial events for location {}", self.locations[loc].name));
            }
        }
        for (e, l) in self.labels.iter().enumerate() {
            if let Some(loc) = l.loc {
                if !init_for.contains_key(&loc) {
                    return malformed(format!("event {e} accesses a location with no initial event"));
                }
            }
        }
        let threads = self.initial.complement();
        if !is_equivalence_on(&self.thd, &threads)
            || !is_equivalence_on(&self.wg, &threads)
            || !is_equivalence_on(&self.dv, &threads)
        {
            return malformed("thd, wg and dv must be equivalences on non-initial events".into());
        }
        if !self.thd.is_subset(&self.wg) || !self.wg.is_subset(&self.dv) {
            return malformed("thread hierarchy must satisfy thd <= wg <= dv".into());
        }
        if !self.sb.is_subset(&self.thd) || !self.sb.is_irreflexive() || !self.sb.is_transitive() {
            return malformed("sb must be a strict partial order within threads".into());
        }
        let local = self.local().difference(&self.fences())?.difference(&self.initial)?;
        for a in local.iter() {
            for b in local.iter() {
                if self.labels[a].loc == self.labels[b].loc && !self.wg.contains(a, b) {
                    return malformed(format!("local location accessed from two work-groups ({a}, {b})"));
                }
            }
        }
        Ok(())
    }
}

/// The rf/mo/S triple extending an execution to a candidate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Witness {
    pub rf: Relation,
    pub mo: Relation,
    pub s: Option<Relation>,
}

/// Well-formedness of a candidate execution.
pub fn wf_candidate(x: &Execution, w: &Witness, needs_s: bool) -> bool {
    let n = x.len();
    if w.rf.universe() != n || w.mo.universe() != n {
        return false;
    }
    let reads = x.reads();
    let writes = x.writes();
    // rf: every read has exactly one source, matching location and value
    let Ok(allowed_rf) = x.same_loc().intersection(&x.same_val()) else {
        return false;
    };
    if !w.rf.is_subset(&allowed_rf) {
        return false;
    }
    let Ok(rf_writes) = writes.product(&reads) else {
        return false;
    };
    if !w.rf.is_subset(&rf_writes) {
        return false;
    }
    let inv = w.rf.inverse();
    for e in x.events() {
        let sources = inv.row(e).count_ones();
        if reads.contains(e) != (sources == 1) || sources > 1 {
            return false;
        }
    }
    // mo: strict total order per atomic location
    let Ok(expected_mo) = (|| -> Result<Relation, RelError> {
        let nal = x.nal();
        x.same_loc()
            .intersection(&writes.product(&writes)?)?
            .difference(&nal.product(&nal)?)?
            .difference(&Relation::identity(n)?)
    })() else {
        return false;
    };
    match w.mo.union(&w.mo.inverse()) {
        Ok(sym) if sym == expected_mo && w.mo.is_acyclic() => {}
        _ => return false,
    }
    // S: strict total order over SC events, or absent
    match (&w.s, needs_s) {
        (None, false) => true,
        (Some(s), true) => s.universe() == n && s.is_strict_total_order_on(&x.with_order(MemoryOrder::Sc)),
        _ => false,
    }
}

/// Names bound in every model's base environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaseName {
    E,
    E2,
    Id,
    R,
    W,
    F,
    A,
    I,
    Rlx,
    Acq,
    Rel,
    Ar,
    Sc,
    Wi,
    Wg,
    Dv,
    All,
    Loc,
    Val,
    Nal,
    G,
    L,
    Fgb,
    Sb,
    Thd,
    WgRel,
    DvRel,
    Rf,
    Mo,
}

impl BaseName {
    pub const ALL: [BaseName; 29] = [
        BaseName::E,
        BaseName::E2,
        BaseName::Id,
        BaseName::R,
        BaseName::W,
        BaseName::F,
        BaseName::A,
        BaseName::I,
        BaseName::Rlx,
        BaseName::Acq,
        BaseName::Rel,
        BaseName::Ar,
        BaseName::Sc,
        BaseName::Wi,
        BaseName::Wg,
        BaseName::Dv,
        BaseName::All,
        BaseName::Loc,
        BaseName::Val,
        BaseName::Nal,
        BaseName::G,
        BaseName::L,
        BaseName::Fgb,
        BaseName::Sb,
        BaseName::Thd,
        BaseName::WgRel,
        BaseName::DvRel,
        BaseName::Rf,
        BaseName::Mo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaseName::E => "E",
            BaseName::E2 => "E2",
            BaseName::Id => "id",
            BaseName::R => "R",
            BaseName::W => "W",
            BaseName::F => "F",
            BaseName::A => "A",
            BaseName::I => "I",
            BaseName::Rlx => "RLX",
            BaseName::Acq => "ACQ",
            BaseName::Rel => "REL",
            BaseName::Ar => "AR",
            BaseName::Sc => "SC",
            BaseName::Wi => "WI",
            BaseName::Wg => "WG",
            BaseName::Dv => "DV",
            BaseName::All => "ALL",
            BaseName::Loc => "loc",
            BaseName::Val => "val",
            BaseName::Nal => "nal",
            BaseName::G => "G",
            BaseName::L => "L",
            BaseName::Fgb => "fgb",
            BaseName::Sb => "sb",
            BaseName::Thd => "thd",
            BaseName::WgRel => "wg",
            BaseName::DvRel => "dv",
            BaseName::Rf => "rf",
            BaseName::Mo => "mo",
        }
    }

    pub fn lookup(name: &str) -> Option<BaseName> {
        BaseName::ALL.into_iter().find(|b| b.name() == name)
    }

    pub fn is_set(self) -> bool {
        !matches!(
            self,
            BaseName::E2
                | BaseName::Id
                | BaseName::Loc
                | BaseName::Val
                | BaseName::Sb
                | BaseName::Thd
                | BaseName::WgRel
                | BaseName::DvRel
                | BaseName::Rf
                | BaseName::Mo
        )
    }

    /// Whether the name depends on the rf/mo part of the witness.
    pub fn is_witness(self) -> bool {
        matches!(self, BaseName::Rf | BaseName::Mo)
    }
}

/// The execution-level part of the base environment, computed once per execution.
#[derive(Debug, Clone)]
pub struct BaseEnv {
    values: Vec<Option<Value>>,
}

impl BaseEnv {
    pub fn new(x: &Execution) -> Result<BaseEnv, RelError> {
        let n = x.len();
        let mut values = vec![None; BaseName::ALL.len()];
        let mut put = |b: BaseName, v: Value| values[b as usize] = Some(v);
        put(BaseName::E, Value::Set(EventSet::full(n)?));
        put(BaseName::E2, Value::Rel(Relation::full(n)?));
        put(BaseName::Id, Value::Rel(Relation::identity(n)?));
        put(BaseName::R, Value::Set(x.reads()));
        put(BaseName::W, Value::Set(x.writes()));
        put(BaseName::F, Value::Set(x.fences()));
        put(BaseName::A, Value::Set(x.atomics()));
        put(BaseName::I, Value::Set(x.initial.clone()));
        for (b, o) in [
            (BaseName::Rlx, MemoryOrder::Rlx),
            (BaseName::Acq, MemoryOrder::Acq),
            (BaseName::Rel, MemoryOrder::Rel),
            (BaseName::Ar, MemoryOrder::AcqRel),
            (BaseName::Sc, MemoryOrder::Sc),
        ] {
            put(b, Value::Set(x.with_order(o)));
        }
        for (b, s) in [
            (BaseName::Wi, Scope::WorkItem),
            (BaseName::Wg, Scope::WorkGroup),
            (BaseName::Dv, Scope::Device),
            (BaseName::All, Scope::All),
        ] {
            put(b, Value::Set(x.with_scope(s)));
        }
        put(BaseName::Loc, Value::Rel(x.same_loc()));
        put(BaseName::Val, Value::Rel(x.same_val()));
        put(BaseName::Nal, Value::Set(x.nal()));
        put(BaseName::G, Value::Set(x.global()));
        put(BaseName::L, Value::Set(x.local()));
        put(BaseName::Fgb, Value::Set(x.fgb()));
        put(BaseName::Sb, Value::Rel(x.sb.clone()));
        put(BaseName::Thd, Value::Rel(x.thd.clone()));
        put(BaseName::WgRel, Value::Rel(x.wg.clone()));
        put(BaseName::DvRel, Value::Rel(x.dv.clone()));
        Ok(BaseEnv { values })
    }

    /// Look up an execution-level name; `rf`/`mo` come from the witness.
    pub fn get<'a>(&'a self, b: BaseName, rf: &'a Relation, mo: &'a Relation) -> ValueRef<'a> {
        match b {
            BaseName::Rf => ValueRef::Rel(rf),
            BaseName::Mo => ValueRef::Rel(mo),
            _ => match self.values[b as usize].as_ref().expect("all execution-level names bound") {
                Value::Set(s) => ValueRef::Set(s),
                Value::Rel(r) => ValueRef::Rel(r),
            },
        }
    }

    pub fn get_exec(&self, b: BaseName) -> Option<&Value> {
        self.values[b as usize].as_ref()
    }
}

/// A borrowed [`Value`].
#[derive(Debug, Clone, Copy)]
pub enum ValueRef<'a> {
    Set(&'a EventSet),
    Rel(&'a Relation),
}

impl ValueRef<'_> {
    pub fn to_owned(self) -> Value {
        match self {
            ValueRef::Set(s) => Value::Set(s.clone()),
            ValueRef::Rel(r) => Value::Rel(r.clone()),
        }
    }
}

/// Every base name bound for a candidate, keyed by its model-language name.
pub fn base_env(x: &Execution, w: &Witness) -> Result<BTreeMap<String, Value>, RelError> {
    let env = BaseEnv::new(x)?;
    let mut out: BTreeMap<String, Value> = BaseName::ALL
        .iter()
        .map(|&b| (b.name().to_string(), env.get(b, &w.rf, &w.mo).to_owned()))
        .collect();
    if let Some(s) = &w.s {
        out.insert("S".into(), Value::Rel(s.clone()));
    }
    Ok(out)
}

/// Position of a thread in the device / work-group / thread hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ThreadPos {
    pub device: usize,
    pub group: usize,
    pub thread: usize,
}

/// Incremental construction of an execution, events numbered in insertion order.
/// Events pushed to the same thread are totally ordered by `sb`.
#[derive(Debug, Clone)]
pub struct ExecutionBuilder {
    language: Language,
    locations: Vec<Location>,
    labels: Vec<Label>,
    placement: Vec<Option<ThreadPos>>,
}

impl ExecutionBuilder {
    pub fn new(language: Language) -> Self {
        ExecutionBuilder {
            language,
            locations: Vec::new(),
            labels: Vec::new(),
            placement: Vec::new(),
        }
    }

    pub fn location(&mut self, name: &str, atomic: bool, region: Region, init: Int) -> LocId {
        self.locations.push(Location {
            name: name.to_string(),
            atomic,
            region,
            init,
        });
        self.locations.len() - 1
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    /// Add the initial write of `loc`.
    pub fn init(&mut self, loc: LocId) -> EventId {
        let v = self.locations[loc].init;
        self.labels.push(Label::wna(loc, v));
        self.placement.push(None);
        self.labels.len() - 1
    }

    pub fn event(&mut self, pos: ThreadPos, label: Label) -> EventId {
        self.labels.push(label);
        self.placement.push(Some(pos));
        self.labels.len() - 1
    }

    pub fn build(self) -> Result<Execution, ExecError> {
        let n = self.labels.len();
        let mut initial = EventSet::empty(n)?;
        let mut thd = Relation::empty(n)?;
        let mut wg = Relation::empty(n)?;
        let mut dv = Relation::empty(n)?;
        let mut sb = Relation::empty(n)?;
        for (a, pa) in self.placement.iter().enumerate() {
            let Some(pa) = pa else {
                initial.insert(a)?;
                continue;
            };
            for (b, pb) in self.placement.iter().enumerate() {
                let Some(pb) = pb else { continue };
                if pa.device == pb.device {
                    dv.insert(a, b)?;
                    if pa.group == pb.group {
                        wg.insert(a, b)?;
                        if pa.thread == pb.thread {
                            thd.insert(a, b)?;
                            if a < b {
                                sb.insert(a, b)?;
                            }
                        }
                    }
                }
            }
        }
        let x = Execution {
            language: self.language,
            locations: self.locations,
            labels: self.labels,
            initial,
            thd,
            wg,
            dv,
            sb,
        };
        x.validate()?;
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const T0: ThreadPos = ThreadPos {
        device: 0,
        group: 0,
        thread: 0,
    };
    const T1: ThreadPos = ThreadPos {
        device: 0,
        group: 0,
        thread: 1,
    };

    fn two_writes() -> (Execution, [EventId; 3]) {
        let mut b = ExecutionBuilder::new(Language::C11);
        let x = b.location("x", true, Region::C11, 0);
        let i = b.init(x);
        let w1 = b.event(T0, Label::write(x, 1, MemoryOrder::Sc, None));
        let w2 = b.event(T1, Label::write(x, 2, MemoryOrder::Rlx, None));
        (b.build().unwrap(), [i, w1, w2])
    }

    #[test]
    fn empty_execution_binds_empty_values() {
        let x = Execution::empty(Language::C11);
        x.validate().unwrap();
        let w = Witness {
            rf: Relation::empty(0).unwrap(),
            mo: Relation::empty(0).unwrap(),
            s: None,
        };
        assert!(wf_candidate(&x, &w, false));
        for (_, v) in base_env(&x, &w).unwrap() {
            match v {
                Value::Set(s) => assert!(s.is_empty()),
                Value::Rel(r) => assert!(r.is_empty()),
            }
        }
    }

    #[test]
    fn mo_must_be_total_per_atomic_location() {
        let (x, [i, w1, w2]) = two_writes();
        let rf = Relation::empty(3).unwrap();
        let mo = Relation::total_order(3, &[i, w1, w2]).unwrap();
        assert!(wf_candidate(&x, &Witness { rf: rf.clone(), mo: mo.clone(), s: None }, false));
        // every single omission breaks totality
        for (a, b) in mo.pairs().collect::<Vec<_>>() {
            let mut partial = mo.clone();
            partial.remove(a, b);
            assert!(!wf_candidate(&x, &Witness { rf: rf.clone(), mo: partial, s: None }, false));
        }
        // S must be present exactly when requested
        let s = Relation::empty(3).unwrap();
        let sc_only = Witness { rf: rf.clone(), mo: mo.clone(), s: Some(s) };
        assert!(wf_candidate(&x, &sc_only, true), "one SC event: the empty order is total");
        assert!(!wf_candidate(&x, &sc_only, false));
        assert!(!wf_candidate(&x, &Witness { rf, mo, s: None }, true));
    }

    #[test]
    fn read_with_two_sources_is_malformed() {
        let mut b = ExecutionBuilder::new(Language::C11);
        let x = b.location("x", true, Region::C11, 0);
        let i = b.init(x);
        let w = b.event(T0, Label::write(x, 0, MemoryOrder::Rlx, None));
        let r = b.event(T1, Label::read(x, 0, MemoryOrder::Rlx, None));
        let x = b.build().unwrap();
        let mo = Relation::total_order(3, &[i, w]).unwrap();
        let ok = Witness {
            rf: Relation::from_pairs(3, [(w, r)]).unwrap(),
            mo: mo.clone(),
            s: None,
        };
        assert!(wf_candidate(&x, &ok, false));
        let two = Witness {
            rf: Relation::from_pairs(3, [(w, r), (i, r)]).unwrap(),
            mo: mo.clone(),
            s: None,
        };
        assert!(!wf_candidate(&x, &two, false));
        let none = Witness {
            rf: Relation::empty(3).unwrap(),
            mo,
            s: None,
        };
        assert!(!wf_candidate(&x, &none, false));
    }

    #[test]
    fn loc_and_val_skip_fences() {
        let mut b = ExecutionBuilder::new(Language::C11);
        let x = b.location("x", true, Region::C11, 0);
        b.init(x);
        b.event(T0, Label::fence(Kind::F, MemoryOrder::Sc, None));
        b.event(T0, Label::fence(Kind::F, MemoryOrder::Sc, None));
        let x = b.build().unwrap();
        assert_eq!(x.same_loc(), Relation::from_pairs(3, [(0, 0)]).unwrap());
        assert!(x.same_val().is_empty());
    }

    #[test]
    fn label_order_restrictions() {
        let locs = [Location {
            name: "x".into(),
            atomic: true,
            region: Region::C11,
            init: 0,
        }];
        let ok = |l: Label| l.check(Language::C11, &locs).is_ok();
        assert!(!ok(Label::write(0, 1, MemoryOrder::Acq, None)));
        assert!(!ok(Label::read(0, 1, MemoryOrder::Rel, None)));
        assert!(!ok(Label::read(0, 1, MemoryOrder::AcqRel, None)));
        assert!(ok(Label::rmw(0, 0, 1, MemoryOrder::AcqRel, None)));
        assert!(!ok(Label::fence(Kind::F, MemoryOrder::AcqRel, None)));
        assert!(!ok(Label::write(0, 1, MemoryOrder::Sc, Some(Scope::Device))));
    }

    #[test]
    fn validate_rejects_broken_hierarchy() {
        let (mut x, _) = two_writes();
        x.sb.insert(2, 1).unwrap();
        assert!(x.validate().is_err());
        let (mut x, _) = two_writes();
        x.initial = EventSet::empty(3).unwrap();
        assert!(x.validate().is_err());
    }
}
