//! Litmus tests: parsing and enumeration of basic executions.
//!
//! ```text
//! test MP opencl
//! global int x;
//! global atomic int y;
//! { *x = 42; store(y, 1, REL, WG); }
//! ||
//! { r0 = load(y, ACQ, WG); if (r0 == 1) { r1 = *x; } }
//! exists (r0 == 1 /\ r1 == 0)
//! ```
//!
//! Thread blocks are joined by `||` (same work-group), `|||` (same device,
//! new work-group) or `||||` (new device). Registers are thread-local,
//! start at zero and must have distinct names across threads.
//!
//! A basic execution fixes one control-flow path per thread and one value
//! per read. Reads range over a per-location value domain: the initial value
//! plus every value some write can produce, computed as a fixpoint over the
//! program. Values that only arise from a read justifying itself through a
//! dependency cycle are never produced.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::events::{
    ExecError, Execution, ExecutionBuilder, Int, Kind, Label, Language, LocId, Location, MemoryOrder, Region, Scope,
    ThreadPos,
};

pub const DEFAULT_UNROLL: usize = 2;
pub const DEFAULT_BASIC_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("{line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("integer overflow while evaluating thread {thread}")]
    Overflow { thread: usize },
    #[error("more than {cap} basic executions")]
    TooManyExecutions { cap: usize },
    #[error(transparent)]
    Execution(#[from] ExecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParseOptions {
    /// Accept the work-item scope `WI`.
    pub allow_wi: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(Int),
    Reg(String),
    Load {
        loc: LocId,
        ord: MemoryOrder,
        scope: Option<Scope>,
    },
    FetchInc {
        loc: LocId,
        ord: MemoryOrder,
        scope: Option<Scope>,
    },
    /// `*x` on a non-atomic location.
    Deref(LocId),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Eq(Box<Expr>, Box<Expr>),
    Ne(Box<Expr>, Box<Expr>),
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Store {
        loc: LocId,
        value: Expr,
        ord: MemoryOrder,
        scope: Option<Scope>,
    },
    /// `*x = e`.
    StoreNa { loc: LocId, value: Expr },
    Fence {
        kind: Kind,
        ord: MemoryOrder,
        scope: Option<Scope>,
    },
    Assign { reg: String, value: Expr },
    /// An expression evaluated for its memory effects only.
    Eval(Expr),
    If {
        cond: Expr,
        then: Vec<Stmt>,
        otherwise: Vec<Stmt>,
    },
    While { cond: Expr, body: Vec<Stmt> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Thread {
    pub pos: ThreadPos,
    pub body: Vec<Stmt>,
    /// Registers assigned anywhere in the thread.
    pub registers: BTreeSet<String>,
}

/// One `name == value` conjunct of a final-state query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryAtom {
    pub name: String,
    pub value: Int,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LitmusProgram {
    pub name: String,
    pub language: Language,
    pub locations: Vec<Location>,
    /// Threads in tree order: devices, then work-groups, then threads.
    pub threads: Vec<Thread>,
    /// Conjunction of equalities over registers and atomic locations.
    pub query: Option<Vec<QueryAtom>>,
}

impl LitmusProgram {
    /// Thread counts per work-group per device.
    pub fn shape(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        let mut last: Option<ThreadPos> = None;
        for t in &self.threads {
            match last {
                Some(p) if p.device == t.pos.device && p.group == t.pos.group => {
                    *out.last_mut().and_then(|d| d.last_mut()).expect("group exists") += 1;
                }
                Some(p) if p.device == t.pos.device => out.last_mut().expect("device exists").push(1),
                _ => out.push(vec![1]),
            }
            last = Some(t.pos);
        }
        out
    }

    pub fn location_id(&self, name: &str) -> Option<LocId> {
        self.locations.iter().position(|l| l.name == name)
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(Int),
    /// A run of `n` vertical bars.
    Bars(usize),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: [&str; 16] = [
    "/\\", "==", "!=", "{", "}", "(", ")", ";", ",", "=", "*", "+", "-", "?", ":", "!",
];

fn lex(text: &str) -> Result<Vec<Token>, FrontendError> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        'line: while i < chars.len() {
            let (line, col) = (ln + 1, i + 1);
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
                break;
            }
            if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(chars[start..i].iter().collect()),
                    line,
                    col,
                });
                continue;
            }
            if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let digits: String = chars[start..i].iter().collect();
                let v = digits.parse::<Int>().map_err(|_| FrontendError::Parse {
                    line,
                    col,
                    msg: format!("integer literal `{digits}` out of range"),
                })?;
                out.push(Token {
                    tok: Tok::Int(v),
                    line,
                    col,
                });
                continue;
            }
            if c == '|' {
                let start = i;
                while i < chars.len() && chars[i] == '|' {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Bars(i - start),
                    line,
                    col,
                });
                continue;
            }
            for s in SYMBOLS {
                let sc: Vec<char> = s.chars().collect();
                if chars[i..].starts_with(&sc) {
                    out.push(Token {
                        tok: Tok::Sym(s),
                        line,
                        col,
                    });
                    i += sc.len();
                    continue 'line;
                }
            }
            return Err(FrontendError::Parse {
                line,
                col,
                msg: format!("unexpected character `{c}`"),
            });
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line: text.lines().count() + 1,
        col: 1,
    });
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    opts: ParseOptions,
    language: Language,
    locations: Vec<Location>,
    /// Register name to the thread index that owns it.
    owners: BTreeMap<String, usize>,
    thread: usize,
    registers: BTreeSet<String>,
    /// Locations touched by each thread.
    touched: BTreeSet<LocId>,
}

type PResult<T> = Result<T, FrontendError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let t = &self.toks[self.pos];
        Err(FrontendError::Parse {
            line: t.line,
            col: t.col,
            msg: msg.into(),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == w)
    }

    fn sym(&mut self, s: &str) -> PResult<()> {
        if self.is_sym(s) {
            self.next();
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(w) => {
                self.next();
                Ok(w)
            }
            _ => self.err("expected an identifier"),
        }
    }

    fn int(&mut self) -> PResult<Int> {
        let neg = self.is_sym("-");
        if neg {
            self.next();
        }
        match self.peek().clone() {
            Tok::Int(v) => {
                self.next();
                Ok(if neg { -v } else { v })
            }
            _ => self.err("expected an integer"),
        }
    }

    fn header(&mut self) -> PResult<String> {
        if !self.is_word("test") {
            return self.err("expected `test NAME c11|opencl`");
        }
        self.next();
        let name = self.ident()?;
        self.language = match self.ident()?.as_str() {
            "c11" => Language::C11,
            "opencl" => Language::OpenCl,
            other => {
                self.pos -= 1;
                return self.err(format!("unknown language `{other}`"));
            }
        };
        Ok(name)
    }

    fn declarations(&mut self) -> PResult<()> {
        loop {
            let region = match self.peek() {
                Tok::Ident(w) if w == "global" => Some(Region::Global),
                Tok::Ident(w) if w == "local" => Some(Region::Local),
                Tok::Ident(w) if w == "global_fgb" => Some(Region::GlobalFgb),
                Tok::Ident(w) if w == "atomic" || w == "int" || w == "atomic_int" => None,
                _ => return Ok(()),
            };
            if region.is_some() {
                self.next();
            }
            let region = match (self.language, region) {
                (Language::C11, None) => Region::C11,
                (Language::C11, Some(_)) => return self.err("C11 locations take no region"),
                (Language::OpenCl, Some(r)) => r,
                (Language::OpenCl, None) => return self.err("OpenCL locations need a region"),
            };
            let atomic = if self.is_word("atomic_int") {
                self.next();
                true
            } else {
                let atomic = self.is_word("atomic");
                if atomic {
                    self.next();
                }
                if !self.is_word("int") {
                    return self.err("expected `int`");
                }
                self.next();
                atomic
            };
            loop {
                if self.is_sym("*") {
                    self.next();
                }
                let name = self.ident()?;
                if self.locations.iter().any(|l| l.name == name) {
                    self.pos -= 1;
                    return self.err(format!("location `{name}` declared twice"));
                }
                let init = if self.is_sym("=") {
                    self.next();
                    self.int()?
                } else {
                    0
                };
                self.locations.push(Location {
                    name,
                    atomic,
                    region,
                    init,
                });
                if self.is_sym(",") {
                    self.next();
                    continue;
                }
                self.sym(";")?;
                break;
            }
        }
    }

    fn location(&mut self) -> PResult<LocId> {
        let name = self.ident()?;
        match self.locations.iter().position(|l| l.name == name) {
            Some(l) => {
                self.touched.insert(l);
                Ok(l)
            }
            None => {
                self.pos -= 1;
                self.err(format!("undeclared location `{name}`"))
            }
        }
    }

    fn atomic_location(&mut self) -> PResult<LocId> {
        let l = self.location()?;
        if !self.locations[l].atomic {
            self.pos -= 1;
            return self.err(format!("`{}` is not atomic; use `*` for plain accesses", self.locations[l].name));
        }
        Ok(l)
    }

    fn order(&mut self) -> PResult<MemoryOrder> {
        let w = self.ident()?;
        Ok(match w.to_ascii_lowercase().as_str() {
            "rlx" | "relaxed" | "memory_order_relaxed" => MemoryOrder::Rlx,
            "acq" | "acquire" | "memory_order_acquire" => MemoryOrder::Acq,
            "rel" | "release" | "memory_order_release" => MemoryOrder::Rel,
            "ar" | "acq_rel" | "memory_order_acq_rel" => MemoryOrder::AcqRel,
            "sc" | "seq_cst" | "memory_order_seq_cst" => MemoryOrder::Sc,
            "con" | "consume" | "memory_order_consume" => {
                self.pos -= 1;
                return self.err("the consume order is not supported");
            }
            _ => {
                self.pos -= 1;
                return self.err(format!("unknown memory order `{w}`"));
            }
        })
    }

    fn scope(&mut self) -> PResult<Scope> {
        let w = self.ident()?;
        let s = match w.to_ascii_uppercase().as_str() {
            "WI" if self.opts.allow_wi => Scope::WorkItem,
            "WG" => Scope::WorkGroup,
            "DV" => Scope::Device,
            "ALL" => Scope::All,
            _ => {
                self.pos -= 1;
                return self.err(format!("unknown memory scope `{w}`"));
            }
        };
        Ok(s)
    }

    /// Optional `, ORD [, SCOPE]` tail of an atomic operation, then `)`.
    fn order_tail(&mut self, allowed: &[MemoryOrder]) -> PResult<(MemoryOrder, Option<Scope>)> {
        let mut ord = MemoryOrder::Sc;
        let mut scope = None;
        if self.is_sym(",") {
            self.next();
            let at = self.pos;
            ord = self.order()?;
            if !allowed.contains(&ord) {
                self.pos = at;
                return self.err(format!("memory order {} not permitted here", ord.name()));
            }
            if self.is_sym(",") {
                self.next();
                if self.language == Language::C11 {
                    return self.err("C11 operations take no scope");
                }
                scope = Some(self.scope()?);
            }
        }
        self.sym(")")?;
        if self.language == Language::OpenCl && scope.is_none() {
            scope = Some(Scope::Device);
        }
        Ok((ord, scope))
    }

    /// Statements up to and including the closing brace.
    fn block_rest(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = Vec::new();
        while !self.is_sym("}") {
            if *self.peek() == Tok::Eof {
                return self.err("unterminated block");
            }
            out.push(self.stmt()?);
        }
        self.next();
        Ok(out)
    }

    fn stmt_or_block(&mut self) -> PResult<Vec<Stmt>> {
        if self.is_sym("{") {
            self.next();
            self.block_rest()
        } else {
            Ok(vec![self.stmt()?])
        }
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        if self.is_sym("{") {
            self.next();
            let body = self.block_rest()?;
            return Ok(Stmt::If {
                cond: Expr::Int(1),
                then: body,
                otherwise: Vec::new(),
            });
        }
        if self.is_sym("*") && matches!(self.peek_at(2), Tok::Sym("=")) {
            self.next();
            let loc = self.plain_location()?;
            self.sym("=")?;
            let value = self.expr()?;
            self.sym(";")?;
            return Ok(Stmt::StoreNa { loc, value });
        }
        let word = match self.peek() {
            Tok::Ident(w) => w.clone(),
            _ => {
                let e = self.expr()?;
                self.sym(";")?;
                return Ok(Stmt::Eval(e));
            }
        };
        match word.as_str() {
            "if" => {
                self.next();
                self.sym("(")?;
                let cond = self.expr()?;
                self.sym(")")?;
                let then = self.stmt_or_block()?;
                let otherwise = if self.is_word("else") {
                    self.next();
                    self.stmt_or_block()?
                } else {
                    Vec::new()
                };
                Ok(Stmt::If { cond, then, otherwise })
            }
            "while" => {
                self.next();
                self.sym("(")?;
                let cond = self.expr()?;
                self.sym(")")?;
                let body = self.stmt_or_block()?;
                Ok(Stmt::While { cond, body })
            }
            "store" => {
                self.next();
                self.sym("(")?;
                let loc = self.atomic_location()?;
                self.sym(",")?;
                let value = self.expr()?;
                let (ord, scope) = self.order_tail(&[MemoryOrder::Rlx, MemoryOrder::Rel, MemoryOrder::Sc])?;
                self.sym(";")?;
                Ok(Stmt::Store { loc, value, ord, scope })
            }
            "fence" => {
                self.next();
                self.sym("(")?;
                let kind = match self.language {
                    Language::C11 => Kind::F,
                    Language::OpenCl => {
                        let k = match self.ident()?.as_str() {
                            "G" => Kind::Fg,
                            "L" => Kind::Fl,
                            "GL" | "LG" => Kind::Fgl,
                            _ => {
                                self.pos -= 1;
                                return self.err("OpenCL fences name their regions: G, L or GL");
                            }
                        };
                        self.sym(",")?;
                        k
                    }
                };
                let ord = self.order()?;
                if ord == MemoryOrder::AcqRel {
                    self.pos -= 1;
                    return self.err("memory order AR is only permitted on read-modify-writes");
                }
                let mut scope = None;
                if self.is_sym(",") {
                    self.next();
                    if self.language == Language::C11 {
                        return self.err("C11 fences take no scope");
                    }
                    scope = Some(self.scope()?);
                }
                self.sym(")")?;
                self.sym(";")?;
                if self.language == Language::OpenCl && scope.is_none() {
                    scope = Some(Scope::Device);
                }
                Ok(Stmt::Fence { kind, ord, scope })
            }
            _ if matches!(self.peek_at(1), Tok::Sym("=")) => {
                self.next();
                if self.locations.iter().any(|l| l.name == word) {
                    self.pos -= 1;
                    return self.err(format!("`{word}` is a location; use store(...) or `*{word} = ...`"));
                }
                self.claim_register(&word)?;
                self.next();
                let value = self.expr()?;
                self.sym(";")?;
                Ok(Stmt::Assign { reg: word, value })
            }
            _ => {
                let e = self.expr()?;
                self.sym(";")?;
                Ok(Stmt::Eval(e))
            }
        }
    }

    fn claim_register(&mut self, name: &str) -> PResult<()> {
        match self.owners.get(name) {
            Some(&t) if t != self.thread => self.err(format!("register `{name}` is already used by another thread")),
            _ => {
                self.owners.insert(name.to_string(), self.thread);
                self.registers.insert(name.to_string());
                Ok(())
            }
        }
    }

    fn plain_location(&mut self) -> PResult<LocId> {
        let l = self.location()?;
        if self.locations[l].atomic {
            self.pos -= 1;
            return self.err(format!(
                "`{}` is atomic; use load/store for atomic accesses",
                self.locations[l].name
            ));
        }
        Ok(l)
    }

    fn expr(&mut self) -> PResult<Expr> {
        let c = self.equality()?;
        if self.is_sym("?") {
            self.next();
            let a = self.expr()?;
            self.sym(":")?;
            let b = self.expr()?;
            return Ok(Expr::Cond(Box::new(c), Box::new(a), Box::new(b)));
        }
        Ok(c)
    }

    fn equality(&mut self) -> PResult<Expr> {
        let mut l = self.additive()?;
        loop {
            if self.is_sym("==") {
                self.next();
                l = Expr::Eq(Box::new(l), Box::new(self.additive()?));
            } else if self.is_sym("!=") {
                self.next();
                l = Expr::Ne(Box::new(l), Box::new(self.additive()?));
            } else {
                return Ok(l);
            }
        }
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut l = self.unary()?;
        loop {
            if self.is_sym("+") {
                self.next();
                l = Expr::Add(Box::new(l), Box::new(self.unary()?));
            } else if self.is_sym("-") {
                self.next();
                l = Expr::Sub(Box::new(l), Box::new(self.unary()?));
            } else {
                return Ok(l);
            }
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.is_sym("-") {
            self.next();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.is_sym("*") {
            self.next();
            return Ok(Expr::Deref(self.plain_location()?));
        }
        if self.is_sym("(") {
            self.next();
            let e = self.expr()?;
            self.sym(")")?;
            return Ok(e);
        }
        match self.peek().clone() {
            Tok::Int(v) => {
                self.next();
                Ok(Expr::Int(v))
            }
            Tok::Ident(w) if w == "load" || w == "fetch_inc" => {
                self.next();
                self.sym("(")?;
                let loc = self.atomic_location()?;
                if w == "load" {
                    let (ord, scope) = self.order_tail(&[MemoryOrder::Rlx, MemoryOrder::Acq, MemoryOrder::Sc])?;
                    Ok(Expr::Load { loc, ord, scope })
                } else {
                    let (ord, scope) = self.order_tail(&MemoryOrder::ALL)?;
                    Ok(Expr::FetchInc { loc, ord, scope })
                }
            }
            Tok::Ident(w) => {
                if self.locations.iter().any(|l| l.name == w) {
                    return self.err(format!("location `{w}` read without load(...) or `*`"));
                }
                if self.owners.get(&w).is_some_and(|&t| t != self.thread) {
                    return self.err(format!("register `{w}` belongs to another thread"));
                }
                self.next();
                self.registers.insert(w.clone());
                self.owners.insert(w.clone(), self.thread);
                Ok(Expr::Reg(w))
            }
            _ => self.err("expected an expression"),
        }
    }

    fn query(&mut self) -> PResult<Option<Vec<QueryAtom>>> {
        if !self.is_word("exists") {
            return Ok(None);
        }
        self.next();
        let paren = self.is_sym("(");
        if paren {
            self.next();
        }
        let mut atoms = Vec::new();
        loop {
            let name = self.ident()?;
            match self.locations.iter().find(|l| l.name == name) {
                Some(l) if !l.atomic => {
                    self.pos -= 1;
                    return self.err(format!("queries may only mention atomic locations, not `{name}`"));
                }
                Some(_) => {}
                None if self.owners.contains_key(&name) => {}
                None => {
                    self.pos -= 1;
                    return self.err(format!("unknown register or location `{name}`"));
                }
            }
            if self.is_sym("==") || self.is_sym("=") {
                self.next();
            } else {
                return self.err("expected `==`");
            }
            let value = self.int()?;
            atoms.push(QueryAtom { name, value });
            if self.is_sym("/\\") {
                self.next();
                continue;
            }
            break;
        }
        if paren {
            self.sym(")")?;
        }
        Ok(Some(atoms))
    }
}

/// Parse a litmus test with default options.
pub fn parse_litmus(text: &str) -> Result<LitmusProgram, FrontendError> {
    parse_litmus_with(text, ParseOptions::default())
}

pub fn parse_litmus_with(text: &str, opts: ParseOptions) -> Result<LitmusProgram, FrontendError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        opts,
        language: Language::C11,
        locations: Vec::new(),
        owners: BTreeMap::new(),
        thread: 0,
        registers: BTreeSet::new(),
        touched: BTreeSet::new(),
    };
    let name = p.header()?;
    p.declarations()?;
    let mut per_thread_locs: Vec<BTreeSet<LocId>> = Vec::new();
    let threads = p.thread_tree(&mut per_thread_locs)?;
    let query = p.query()?;
    if *p.peek() != Tok::Eof {
        return p.err("unexpected input after the threads");
    }
    // local locations must stay within one work-group
    for (l, loc) in p.locations.iter().enumerate() {
        if loc.region != Region::Local {
            continue;
        }
        let groups: BTreeSet<(usize, usize)> = threads
            .iter()
            .zip(&per_thread_locs)
            .filter(|(_, locs)| locs.contains(&l))
            .map(|(t, _)| (t.pos.device, t.pos.group))
            .collect();
        if groups.len() > 1 {
            return Err(FrontendError::Parse {
                line: 1,
                col: 1,
                msg: format!("local location `{}` is accessed from several work-groups", loc.name),
            });
        }
    }
    Ok(LitmusProgram {
        name,
        language: p.language,
        locations: p.locations,
        threads,
        query,
    })
}

impl Parser {
    /// Threads with the locations each one touches.
    fn thread_tree(&mut self, per_thread: &mut Vec<BTreeSet<LocId>>) -> PResult<Vec<Thread>> {
        let mut threads = Vec::new();
        let mut pos = ThreadPos {
            device: 0,
            group: 0,
            thread: 0,
        };
        loop {
            self.registers = BTreeSet::new();
            self.touched = BTreeSet::new();
            self.thread = threads.len();
            self.sym("{")?;
            let body = self.block_rest()?;
            threads.push(Thread {
                pos,
                body,
                registers: std::mem::take(&mut self.registers),
            });
            per_thread.push(std::mem::take(&mut self.touched));
            let bars = match self.peek() {
                Tok::Bars(n) => *n,
                _ => break,
            };
            if !(2..=4).contains(&bars) {
                return self.err("threads are separated by `||`, `|||` or `||||`");
            }
            if bars > 2 && self.language == Language::C11 {
                return self.err("C11 threads are separated by `||` only");
            }
            self.next();
            pos.thread += 1;
            if bars >= 3 {
                pos.group += 1;
            }
            if bars == 4 {
                pos.device += 1;
            }
        }
        Ok(threads)
    }
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

struct ShowExpr<'a>(&'a LitmusProgram, &'a Expr);

fn tail(p: &LitmusProgram, ord: MemoryOrder, scope: Option<Scope>) -> String {
    match scope {
        Some(s) if p.language == Language::OpenCl => format!(", {}, {}", ord.name(), s.name()),
        _ => format!(", {}", ord.name()),
    }
}

impl fmt::Display for ShowExpr<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.0;
        let sub = |e| ShowExpr(p, e);
        match self.1 {
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Reg(r) => write!(f, "{r}"),
            Expr::Load { loc, ord, scope } => {
                write!(f, "load({}{})", p.locations[*loc].name, tail(p, *ord, *scope))
            }
            Expr::FetchInc { loc, ord, scope } => {
                write!(f, "fetch_inc({}{})", p.locations[*loc].name, tail(p, *ord, *scope))
            }
            Expr::Deref(l) => write!(f, "*{}", p.locations[*l].name),
            Expr::Neg(a) => write!(f, "-({})", sub(a)),
            Expr::Add(a, b) => write!(f, "({} + {})", sub(a), sub(b)),
            Expr::Sub(a, b) => write!(f, "({} - {})", sub(a), sub(b)),
            Expr::Eq(a, b) => write!(f, "({} == {})", sub(a), sub(b)),
            Expr::Ne(a, b) => write!(f, "({} != {})", sub(a), sub(b)),
            Expr::Cond(c, a, b) => write!(f, "({} ? {} : {})", sub(c), sub(a), sub(b)),
        }
    }
}

fn show_block(p: &LitmusProgram, body: &[Stmt], indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    for s in body {
        match s {
            Stmt::Store { loc, value, ord, scope } => out.push_str(&format!(
                "{pad}store({}, {}{});\n",
                p.locations[*loc].name,
                ShowExpr(p, value),
                tail(p, *ord, *scope)
            )),
            Stmt::StoreNa { loc, value } => {
                out.push_str(&format!("{pad}*{} = {};\n", p.locations[*loc].name, ShowExpr(p, value)))
            }
            Stmt::Fence { kind, ord, scope } => {
                let region = match kind {
                    Kind::Fg => "G, ",
                    Kind::Fl => "L, ",
                    Kind::Fgl => "GL, ",
                    _ => "",
                };
                let scope = scope.map(|s| format!(", {}", s.name())).unwrap_or_default();
                out.push_str(&format!("{pad}fence({region}{}{scope});\n", ord.name()));
            }
            Stmt::Assign { reg, value } => out.push_str(&format!("{pad}{reg} = {};\n", ShowExpr(p, value))),
            Stmt::Eval(e) => out.push_str(&format!("{pad}{};\n", ShowExpr(p, e))),
            Stmt::If { cond, then, otherwise } => {
                out.push_str(&format!("{pad}if ({}) {{\n", ShowExpr(p, cond)));
                show_block(p, then, indent + 1, out);
                if otherwise.is_empty() {
                    out.push_str(&format!("{pad}}}\n"));
                } else {
                    out.push_str(&format!("{pad}}} else {{\n"));
                    show_block(p, otherwise, indent + 1, out);
                    out.push_str(&format!("{pad}}}\n"));
                }
            }
            Stmt::While { cond, body } => {
                out.push_str(&format!("{pad}while ({}) {{\n", ShowExpr(p, cond)));
                show_block(p, body, indent + 1, out);
                out.push_str(&format!("{pad}}}\n"));
            }
        }
    }
}

impl fmt::Display for LitmusProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lang = match self.language {
            Language::C11 => "c11",
            Language::OpenCl => "opencl",
        };
        writeln!(f, "test {} {lang}", self.name)?;
        for l in &self.locations {
            let region = match l.region {
                Region::C11 => "",
                Region::Global => "global ",
                Region::Local => "local ",
                Region::GlobalFgb => "global_fgb ",
            };
            let atomic = if l.atomic { "atomic " } else { "" };
            writeln!(f, "{region}{atomic}int {} = {};", l.name, l.init)?;
        }
        let mut last: Option<ThreadPos> = None;
        for t in &self.threads {
            if let Some(p) = last {
                let bars = if p.device != t.pos.device {
                    "||||"
                } else if p.group != t.pos.group {
                    "|||"
                } else {
                    "||"
                };
                writeln!(f, "{bars}")?;
            }
            let mut body = String::new();
            show_block(self, &t.body, 1, &mut body);
            write!(f, "{{\n{body}}}\n")?;
            last = Some(t.pos);
        }
        if let Some(q) = &self.query {
            let atoms: Vec<String> = q.iter().map(|a| format!("{} == {}", a.name, a.value)).collect();
            writeln!(f, "exists ({})", atoms.join(" /\\ "))?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Enumeration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumConfig {
    /// Maximum number of iterations of any `while` loop.
    pub unroll: usize,
    pub max_executions: usize,
    /// Replace the computed read-value domain of the named locations.
    pub value_domain_override: Option<BTreeMap<String, BTreeSet<Int>>>,
}

impl Default for EnumConfig {
    fn default() -> Self {
        EnumConfig {
            unroll: DEFAULT_UNROLL,
            max_executions: DEFAULT_BASIC_CAP,
            value_domain_override: None,
        }
    }
}

/// A basic execution with the register values its paths end in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicExecution {
    pub exec: Execution,
    pub registers: BTreeMap<String, Int>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicSet {
    pub executions: Vec<BasicExecution>,
    /// Some path exceeded the loop bound and was dropped.
    pub truncated: bool,
    /// Read-value domain per location, indexed by location id.
    pub domains: Vec<BTreeSet<Int>>,
}

#[derive(Debug, Clone)]
struct PathState {
    regs: BTreeMap<String, Int>,
    labels: Vec<Label>,
}

/// One thread path: its events and final registers.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Trace {
    labels: Vec<Label>,
    regs: BTreeMap<String, Int>,
}

struct Interp<'a> {
    domains: &'a [BTreeSet<Int>],
    unroll: usize,
    thread: usize,
    truncated: bool,
    cap: usize,
    /// Take both arms of every branch regardless of the condition.
    all_branches: bool,
}

impl Interp<'_> {
    fn overflow(&self) -> FrontendError {
        FrontendError::Overflow { thread: self.thread }
    }

    fn guard(&self, n: usize) -> Result<(), FrontendError> {
        if n > self.cap {
            Err(FrontendError::TooManyExecutions { cap: self.cap })
        } else {
            Ok(())
        }
    }

    fn eval(&mut self, e: &Expr, st: PathState) -> Result<Vec<(PathState, Int)>, FrontendError> {
        Ok(match e {
            Expr::Int(v) => vec![(st, *v)],
            Expr::Reg(r) => {
                let v = st.regs.get(r).copied().unwrap_or(0);
                vec![(st, v)]
            }
            Expr::Load { loc, ord, scope } => self.domains[*loc]
                .iter()
                .map(|&v| {
                    let mut s = st.clone();
                    s.labels.push(Label::read(*loc, v, *ord, *scope));
                    (s, v)
                })
                .collect(),
            Expr::Deref(loc) => self.domains[*loc]
                .iter()
                .map(|&v| {
                    let mut s = st.clone();
                    s.labels.push(Label::rna(*loc, v));
                    (s, v)
                })
                .collect(),
            Expr::FetchInc { loc, ord, scope } => {
                let mut out = Vec::new();
                for &v in &self.domains[*loc] {
                    let w = v.checked_add(1).ok_or_else(|| self.overflow())?;
                    let mut s = st.clone();
                    s.labels.push(Label::rmw(*loc, v, w, *ord, *scope));
                    out.push((s, v));
                }
                out
            }
            Expr::Neg(a) => {
                let mut out = Vec::new();
                for (s, v) in self.eval(a, st)? {
                    out.push((s, v.checked_neg().ok_or_else(|| self.overflow())?));
                }
                out
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Eq(a, b) | Expr::Ne(a, b) => {
                let mut out = Vec::new();
                for (s, x) in self.eval(a, st)? {
                    for (s2, y) in self.eval(b, s)? {
                        let v = match e {
                            Expr::Add(..) => x.checked_add(y).ok_or_else(|| self.overflow())?,
                            Expr::Sub(..) => x.checked_sub(y).ok_or_else(|| self.overflow())?,
                            Expr::Eq(..) => Int::from(x == y),
                            _ => Int::from(x != y),
                        };
                        out.push((s2, v));
                    }
                }
                out
            }
            Expr::Cond(c, a, b) => {
                let mut out = Vec::new();
                for (s, v) in self.eval(c, st)? {
                    if self.all_branches {
                        out.extend(self.eval(a, s.clone())?);
                        out.extend(self.eval(b, s)?);
                    } else {
                        out.extend(self.eval(if v != 0 { a } else { b }, s)?);
                    }
                }
                out
            }
        })
    }

    fn block(&mut self, body: &[Stmt], states: Vec<PathState>) -> Result<Vec<PathState>, FrontendError> {
        let mut states = states;
        for s in body {
            let mut next = Vec::new();
            for st in states {
                next.extend(self.stmt(s, st)?);
                self.guard(next.len())?;
            }
            states = next;
        }
        Ok(states)
    }

    fn stmt(&mut self, s: &Stmt, st: PathState) -> Result<Vec<PathState>, FrontendError> {
        Ok(match s {
            Stmt::Store { loc, value, ord, scope } => self
                .eval(value, st)?
                .into_iter()
                .map(|(mut s, v)| {
                    s.labels.push(Label::write(*loc, v, *ord, *scope));
                    s
                })
                .collect(),
            Stmt::StoreNa { loc, value } => self
                .eval(value, st)?
                .into_iter()
                .map(|(mut s, v)| {
                    s.labels.push(Label::wna(*loc, v));
                    s
                })
                .collect(),
            Stmt::Fence { kind, ord, scope } => {
                let mut st = st;
                st.labels.push(Label::fence(*kind, *ord, *scope));
                vec![st]
            }
            Stmt::Assign { reg, value } => self
                .eval(value, st)?
                .into_iter()
                .map(|(mut s, v)| {
                    s.regs.insert(reg.clone(), v);
                    s
                })
                .collect(),
            Stmt::Eval(e) => self.eval(e, st)?.into_iter().map(|(s, _)| s).collect(),
            Stmt::If { cond, then, otherwise } => {
                let mut out = Vec::new();
                for (s, v) in self.eval(cond, st)? {
                    if self.all_branches {
                        out.extend(self.block(then, vec![s.clone()])?);
                        out.extend(self.block(otherwise, vec![s])?);
                    } else {
                        out.extend(self.block(if v != 0 { then } else { otherwise }, vec![s])?);
                    }
                }
                out
            }
            Stmt::While { cond, body } => {
                let mut done = Vec::new();
                let mut live = vec![st];
                let mut iterations = 0;
                while !live.is_empty() {
                    let mut again = Vec::new();
                    for st in live {
                        for (s, v) in self.eval(cond, st)? {
                            if self.all_branches {
                                if iterations < self.unroll {
                                    again.push(s.clone());
                                }
                                done.push(s);
                            } else if v == 0 {
                                done.push(s);
                            } else if iterations == self.unroll {
                                self.truncated = true;
                            } else {
                                again.push(s);
                            }
                        }
                    }
                    live = self.block(body, again)?;
                    iterations += 1;
                }
                done
            }
        })
    }
}

fn thread_traces(
    t: &Thread,
    index: usize,
    domains: &[BTreeSet<Int>],
    cfg: &EnumConfig,
    all_branches: bool,
    truncated: &mut bool,
) -> Result<Vec<Trace>, FrontendError> {
    let mut it = Interp {
        domains,
        unroll: cfg.unroll,
        thread: index,
        truncated: false,
        cap: cfg.max_executions,
        all_branches,
    };
    let start = PathState {
        regs: t.registers.iter().map(|r| (r.clone(), 0)).collect(),
        labels: Vec::new(),
    };
    let states = it.block(&t.body, vec![start])?;
    *truncated |= it.truncated;
    Ok(states
        .into_iter()
        .map(|s| Trace {
            labels: s.labels,
            regs: s.regs,
        })
        .collect())
}

/// Per-location read-value domains: the initializer plus every value some
/// store in the program can write, whether or not its branch is feasible.
/// Iterated so stored values derived from reads are included, bounded by the
/// number of writes a single execution can contain.
pub fn value_domains(p: &LitmusProgram, cfg: &EnumConfig) -> Result<Vec<BTreeSet<Int>>, FrontendError> {
    let mut domains: Vec<BTreeSet<Int>> = p.locations.iter().map(|l| BTreeSet::from([l.init])).collect();
    let overrides = |domains: &mut Vec<BTreeSet<Int>>| {
        if let Some(o) = &cfg.value_domain_override {
            for (name, vals) in o {
                if let Some(l) = p.location_id(name) {
                    domains[l] = vals.clone();
                }
            }
        }
    };
    overrides(&mut domains);
    let mut round = 0;
    loop {
        let mut next = domains.clone();
        let mut max_writes = 0;
        for (i, t) in p.threads.iter().enumerate() {
            let mut ignored = false;
            let traces = thread_traces(t, i, &domains, cfg, true, &mut ignored)?;
            let mut most = 0;
            for tr in &traces {
                let mut writes = 0;
                for l in &tr.labels {
                    if let (Some(loc), Some(v)) = (l.loc, l.wval) {
                        next[loc].insert(v);
                        writes += 1;
                    }
                }
                most = most.max(writes);
            }
            max_writes += most;
        }
        overrides(&mut next);
        round += 1;
        if next == domains || round > max_writes {
            return Ok(domains);
        }
        domains = next;
    }
}

/// All basic executions of a program, in a deterministic order.
pub fn enumerate_basic(p: &LitmusProgram, cfg: &EnumConfig) -> Result<BasicSet, FrontendError> {
    let domains = value_domains(p, cfg)?;
    let mut truncated = false;
    let mut per_thread = Vec::with_capacity(p.threads.len());
    for (i, t) in p.threads.iter().enumerate() {
        per_thread.push(thread_traces(t, i, &domains, cfg, false, &mut truncated)?);
    }
    let mut total: usize = 1;
    for traces in &per_thread {
        total = total
            .checked_mul(traces.len())
            .filter(|&n| n <= cfg.max_executions)
            .ok_or(FrontendError::TooManyExecutions {
                cap: cfg.max_executions,
            })?;
    }
    // locations referenced anywhere get an initial event, in declaration order
    let mut used = BTreeSet::new();
    for traces in &per_thread {
        for tr in traces {
            used.extend(tr.labels.iter().filter_map(|l| l.loc));
        }
    }
    let mut executions = Vec::with_capacity(total);
    let mut choice = vec![0usize; per_thread.len()];
    if total > 0 {
        loop {
            let mut b = ExecutionBuilder::new(p.language);
            for l in &p.locations {
                b.location(&l.name, l.atomic, l.region, l.init);
            }
            for &l in &used {
                b.init(l);
            }
            let mut registers = BTreeMap::new();
            for (ti, t) in p.threads.iter().enumerate() {
                let tr = &per_thread[ti][choice[ti]];
                for l in &tr.labels {
                    b.event(t.pos, l.clone());
                }
                registers.extend(tr.regs.iter().map(|(k, v)| (k.clone(), *v)));
            }
            executions.push(BasicExecution {
                exec: b.build()?,
                registers,
            });
            // odometer, last thread varies fastest
            let mut k = per_thread.len();
            loop {
                if k == 0 {
                    return Ok(BasicSet {
                        executions,
                        truncated,
                        domains,
                    });
                }
                k -= 1;
                choice[k] += 1;
                if choice[k] < per_thread[k].len() {
                    break;
                }
                choice[k] = 0;
            }
        }
    }
    Ok(BasicSet {
        executions,
        truncated,
        domains,
    })
}
