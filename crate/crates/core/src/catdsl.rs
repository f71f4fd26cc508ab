//! A small cat-style language for memory models.
//!
//! A model is a list of statements:
//!
//! ```text
//! let NAME = EXPR
//! acyclic EXPR as NAME
//! irreflexive EXPR as NAME
//! empty EXPR as NAME
//! undefined_unless empty EXPR as NAME
//! witness NAME linear over EXPR
//! ```
//!
//! Statements are delimited by their leading keyword, so line breaks carry no
//! meaning; `#` starts a comment that runs to the end of the line.
//!
//! Binary operators, loosest first: `|`, `\`, `&`, `;`, `*`. Postfix `^-1`,
//! `?` and `+` bind tightest, prefix `~` sits between postfix and binary
//! operators. All binary operators associate to the left.
//!
//! Every expression is typed as a set or a relation and tagged with the
//! earliest evaluation stage at which its value is known: once per execution,
//! once per `rf`/`mo` choice, or once per choice of the declared witness order.
//! The checker exploits the stages to share work between candidates.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::events::{BaseEnv, BaseName, Execution, Witness};
use crate::relalg::{EventSet, RelError, Relation, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unknown identifier `{name}`")]
    UnknownName { line: usize, col: usize, name: String },
    #[error("{line}:{col}: binding `{name}` refers to itself or to a later binding")]
    Recursive { line: usize, col: usize, name: String },
    #[error("{line}:{col}: `{name}` is already bound")]
    Duplicate { line: usize, col: usize, name: String },
    #[error("{line}:{col}: expected a {expected}, found a {found}")]
    Sort {
        line: usize,
        col: usize,
        expected: Sort,
        found: Sort,
    },
    #[error("{line}:{col}: a model declares at most one witness order")]
    SecondWitness { line: usize, col: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("model declares witness `{0}` but the candidate has no such order")]
    MissingWitness(String),
    #[error("candidate carries an order but the model declares none")]
    UnexpectedWitness,
    #[error(transparent)]
    Relation(#[from] RelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sort {
    Set,
    Rel,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sort::Set => "set",
            Sort::Rel => "relation",
        })
    }
}

/// Evaluation stage of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Exec,
    RfMo,
    Order,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    Consistency,
    Undefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predicate {
    Acyclic,
    Irreflexive,
    Empty,
}

impl Predicate {
    fn keyword(self) -> &'static str {
        match self {
            Predicate::Acyclic => "acyclic",
            Predicate::Irreflexive => "irreflexive",
            Predicate::Empty => "empty",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Lift,
    Inverse,
    Opt,
    Plus,
    Complement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Seq,
    Inter,
    Diff,
    Union,
    Product,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Base(BaseName),
    /// Index into [`ModelDef::bindings`].
    Binding(usize),
    /// The declared witness order.
    Witness,
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

/// A resolved, typed expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub node: Node,
    pub sort: Sort,
    pub level: Level,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub name: String,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub tag: Tag,
    pub predicate: Predicate,
    pub expr: Expr,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessDecl {
    pub name: String,
    pub over: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelDef {
    pub name: String,
    pub bindings: Vec<Binding>,
    pub constraints: Vec<Constraint>,
    pub witness_decls: Vec<WitnessDecl>,
}

/// Outcome of checking one candidate against a model.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Verdict {
    pub consistent: bool,
    pub faulty: bool,
    /// Failed consistency axioms, then (for consistent candidates) failed
    /// undefined-behaviour axioms, each in model order.
    pub failed_axioms: Vec<String>,
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    LBrack,
    RBrack,
    LParen,
    RParen,
    Inverse,
    Question,
    Plus,
    Tilde,
    Semi,
    Amp,
    Backslash,
    Pipe,
    Star,
    Eq,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const KEYWORDS: [&str; 9] = [
    "let",
    "acyclic",
    "irreflexive",
    "empty",
    "undefined_unless",
    "witness",
    "linear",
    "over",
    "as",
];

fn lex(text: &str) -> Result<Vec<Token>, ModelError> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let (line, col) = (ln + 1, i + 1);
            if c == '#' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || matches!(chars[i], '_' | '\'' | '-')) {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                out.push(Token {
                    tok: Tok::Ident(word),
                    line,
                    col,
                });
                continue;
            }
            let tok = match c {
                '[' => Tok::LBrack,
                ']' => Tok::RBrack,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '?' => Tok::Question,
                '+' => Tok::Plus,
                '~' => Tok::Tilde,
                ';' => Tok::Semi,
                '&' => Tok::Amp,
                '\\' => Tok::Backslash,
                '|' => Tok::Pipe,
                '*' => Tok::Star,
                '=' => Tok::Eq,
                '^' => {
                    if chars.get(i + 1) == Some(&'-') && chars.get(i + 2) == Some(&'1') {
                        i += 2;
                        Tok::Inverse
                    } else {
                        return Err(ModelError::Syntax {
                            line,
                            col,
                            msg: "expected `^-1`".into(),
                        });
                    }
                }
                other => {
                    return Err(ModelError::Syntax {
                        line,
                        col,
                        msg: format!("unexpected character `{other}`"),
                    })
                }
            };
            i += 1;
            out.push(Token { tok, line, col });
        }
    }
    let line = text.lines().count().max(1);
    out.push(Token {
        tok: Tok::Eof,
        line,
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
    model: ModelDef,
    names: BTreeMap<String, usize>,
    /// Names bound anywhere in the text, for recursion diagnostics.
    later: Vec<String>,
    defining: Option<String>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax<T>(&self, t: &Token, msg: impl Into<String>) -> Result<T, ModelError> {
        Err(ModelError::Syntax {
            line: t.line,
            col: t.col,
            msg: msg.into(),
        })
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token, ModelError> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            self.syntax(&t, format!("expected {what}"))
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ModelError> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(w) if w == kw => Ok(()),
            _ => self.syntax(&t, format!("expected `{kw}`")),
        }
    }

    fn fresh_name(&mut self) -> Result<(String, Token), ModelError> {
        let t = self.next();
        let Tok::Ident(name) = &t.tok else {
            return self.syntax(&t, "expected a name");
        };
        if KEYWORDS.contains(&name.as_str()) {
            return self.syntax(&t, format!("`{name}` is a keyword"));
        }
        if BaseName::lookup(name).is_some() || self.names.contains_key(name) || self.is_witness_name(name) {
            return Err(ModelError::Duplicate {
                line: t.line,
                col: t.col,
                name: name.clone(),
            });
        }
        Ok((name.clone(), t))
    }

    fn is_witness_name(&self, name: &str) -> bool {
        self.model.witness_decls.iter().any(|w| w.name == name)
    }

    fn statement(&mut self) -> Result<bool, ModelError> {
        let t = self.next();
        let word = match &t.tok {
            Tok::Eof => return Ok(false),
            Tok::Ident(w) => w.clone(),
            _ => return self.syntax(&t, "expected a statement"),
        };
        match word.as_str() {
            "let" => {
                let (name, _) = self.fresh_name()?;
                self.expect(Tok::Eq, "`=`")?;
                self.defining = Some(name.clone());
                let expr = self.expr()?;
                self.defining = None;
                self.names.insert(name.clone(), self.model.bindings.len());
                self.model.bindings.push(Binding { name, expr });
            }
            "acyclic" | "irreflexive" | "empty" => {
                let predicate = match word.as_str() {
                    "acyclic" => Predicate::Acyclic,
                    "irreflexive" => Predicate::Irreflexive,
                    _ => Predicate::Empty,
                };
                self.constraint(Tag::Consistency, predicate)?;
            }
            "undefined_unless" => {
                self.keyword("empty")?;
                self.constraint(Tag::Undefined, Predicate::Empty)?;
            }
            "witness" => {
                if !self.model.witness_decls.is_empty() {
                    return Err(ModelError::SecondWitness { line: t.line, col: t.col });
                }
                let (name, _) = self.fresh_name()?;
                self.keyword("linear")?;
                self.keyword("over")?;
                let at = self.peek().clone();
                let over = self.expr()?;
                self.want_sort(&over, Sort::Set, &at)?;
                self.model.witness_decls.push(WitnessDecl { name, over });
            }
            _ => return self.syntax(&t, format!("unknown statement `{word}`")),
        }
        Ok(true)
    }

    fn constraint(&mut self, tag: Tag, predicate: Predicate) -> Result<(), ModelError> {
        let at = self.peek().clone();
        let expr = self.expr()?;
        if predicate != Predicate::Empty {
            self.want_sort(&expr, Sort::Rel, &at)?;
        }
        self.keyword("as")?;
        let t = self.next();
        let Tok::Ident(name) = t.tok else {
            return self.syntax(&t, "expected an axiom name");
        };
        self.model.constraints.push(Constraint {
            tag,
            predicate,
            expr,
            name,
        });
        Ok(())
    }

    fn want_sort(&self, e: &Expr, expected: Sort, at: &Token) -> Result<(), ModelError> {
        if e.sort == expected {
            Ok(())
        } else {
            Err(ModelError::Sort {
                line: at.line,
                col: at.col,
                expected,
                found: e.sort,
            })
        }
    }

    fn binary(&self, op: BinOp, l: Expr, r: Expr, at: &Token) -> Result<Expr, ModelError> {
        let sort = match op {
            BinOp::Seq => {
                self.want_sort(&l, Sort::Rel, at)?;
                self.want_sort(&r, Sort::Rel, at)?;
                Sort::Rel
            }
            BinOp::Product => {
                self.want_sort(&l, Sort::Set, at)?;
                self.want_sort(&r, Sort::Set, at)?;
                Sort::Rel
            }
            BinOp::Inter | BinOp::Diff | BinOp::Union => {
                self.want_sort(&r, l.sort, at)?;
                l.sort
            }
        };
        Ok(Expr {
            level: l.level.max(r.level),
            node: Node::Binary(op, Box::new(l), Box::new(r)),
            sort,
        })
    }

    fn level_loop(
        &mut self,
        ops: &[(Tok, BinOp)],
        sub: fn(&mut Parser) -> Result<Expr, ModelError>,
    ) -> Result<Expr, ModelError> {
        let mut l = sub(self)?;
        loop {
            let t = self.peek().clone();
            let Some(&(_, op)) = ops.iter().find(|(k, _)| *k == t.tok) else {
                return Ok(l);
            };
            self.next();
            let r = sub(self)?;
            l = self.binary(op, l, r, &t)?;
        }
    }

    fn expr(&mut self) -> Result<Expr, ModelError> {
        self.level_loop(&[(Tok::Pipe, BinOp::Union)], Parser::diff)
    }

    fn diff(&mut self) -> Result<Expr, ModelError> {
        self.level_loop(&[(Tok::Backslash, BinOp::Diff)], Parser::inter)
    }

    fn inter(&mut self) -> Result<Expr, ModelError> {
        self.level_loop(&[(Tok::Amp, BinOp::Inter)], Parser::seq)
    }

    fn seq(&mut self) -> Result<Expr, ModelError> {
        self.level_loop(&[(Tok::Semi, BinOp::Seq)], Parser::product)
    }

    fn product(&mut self) -> Result<Expr, ModelError> {
        self.level_loop(&[(Tok::Star, BinOp::Product)], Parser::prefix)
    }

    fn prefix(&mut self) -> Result<Expr, ModelError> {
        if self.peek().tok == Tok::Tilde {
            self.next();
            let e = self.prefix()?;
            return Ok(Expr {
                sort: e.sort,
                level: e.level,
                node: Node::Unary(UnOp::Complement, Box::new(e)),
            });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, ModelError> {
        let mut e = self.atom()?;
        loop {
            let t = self.peek().clone();
            let op = match t.tok {
                Tok::Inverse => UnOp::Inverse,
                Tok::Question => UnOp::Opt,
                Tok::Plus => UnOp::Plus,
                _ => return Ok(e),
            };
            self.next();
            self.want_sort(&e, Sort::Rel, &t)?;
            e = Expr {
                sort: Sort::Rel,
                level: e.level,
                node: Node::Unary(op, Box::new(e)),
            };
        }
    }

    fn atom(&mut self) -> Result<Expr, ModelError> {
        let t = self.next();
        match &t.tok {
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::LBrack => {
                let at = self.peek().clone();
                let e = self.expr()?;
                self.want_sort(&e, Sort::Set, &at)?;
                self.expect(Tok::RBrack, "`]`")?;
                Ok(Expr {
                    sort: Sort::Rel,
                    level: e.level,
                    node: Node::Unary(UnOp::Lift, Box::new(e)),
                })
            }
            Tok::Ident(name) => self.resolve(name, &t),
            _ => self.syntax(&t, "expected an expression"),
        }
    }

    fn resolve(&self, name: &str, t: &Token) -> Result<Expr, ModelError> {
        if KEYWORDS.contains(&name) {
            return self.syntax(t, format!("unexpected keyword `{name}`"));
        }
        if let Some(&i) = self.names.get(name) {
            let b = &self.model.bindings[i];
            return Ok(Expr {
                node: Node::Binding(i),
                sort: b.expr.sort,
                level: b.expr.level,
            });
        }
        if self.is_witness_name(name) {
            return Ok(Expr {
                node: Node::Witness,
                sort: Sort::Rel,
                level: Level::Order,
            });
        }
        if let Some(b) = BaseName::lookup(name) {
            return Ok(Expr {
                node: Node::Base(b),
                sort: if b.is_set() { Sort::Set } else { Sort::Rel },
                level: if b.is_witness() { Level::RfMo } else { Level::Exec },
            });
        }
        let (line, col) = (t.line, t.col);
        if self.defining.as_deref() == Some(name) || self.later.iter().any(|l| l == name) {
            return Err(ModelError::Recursive {
                line,
                col,
                name: name.to_string(),
            });
        }
        Err(ModelError::UnknownName {
            line,
            col,
            name: name.to_string(),
        })
    }
}

/// Parse a model text. The model is named `model` until renamed.
pub fn parse_model(text: &str) -> Result<ModelDef, ModelError> {
    let toks = lex(text)?;
    let mut later = Vec::new();
    for w in toks.windows(2) {
        if let (Tok::Ident(kw), Tok::Ident(name)) = (&w[0].tok, &w[1].tok) {
            if kw == "let" {
                later.push(name.clone());
            }
        }
    }
    let mut p = Parser {
        toks,
        pos: 0,
        model: ModelDef {
            name: "model".into(),
            bindings: Vec::new(),
            constraints: Vec::new(),
            witness_decls: Vec::new(),
        },
        names: BTreeMap::new(),
        later,
        defining: None,
    };
    while p.statement()? {}
    Ok(p.model)
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

impl ModelDef {
    pub fn binding(&self, name: &str) -> Option<&Binding> {
        self.bindings.iter().find(|b| b.name == name)
    }

    pub fn constraint(&self, name: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.name == name)
    }

    pub fn witness(&self) -> Option<&WitnessDecl> {
        self.witness_decls.first()
    }

    pub fn needs_witness(&self) -> bool {
        !self.witness_decls.is_empty()
    }

    pub fn count(&self, tag: Tag) -> usize {
        self.constraints.iter().filter(|c| c.tag == tag).count()
    }

    /// Render an expression with explicit parentheses around every operator.
    pub fn show(&self, e: &Expr) -> String {
        match &e.node {
            Node::Base(b) => b.name().to_string(),
            Node::Binding(i) => self.bindings[*i].name.clone(),
            Node::Witness => self.witness().map(|w| w.name.clone()).unwrap_or_default(),
            Node::Unary(op, a) => {
                let a = self.show(a);
                match op {
                    UnOp::Lift => format!("[{a}]"),
                    UnOp::Inverse => format!("{a}^-1"),
                    UnOp::Opt => format!("{a}?"),
                    UnOp::Plus => format!("{a}+"),
                    UnOp::Complement => format!("~{a}"),
                }
            }
            Node::Binary(op, a, b) => {
                let sym = match op {
                    BinOp::Seq => ";",
                    BinOp::Inter => "&",
                    BinOp::Diff => "\\",
                    BinOp::Union => "|",
                    BinOp::Product => "*",
                };
                format!("({}{sym}{})", self.show(a), self.show(b))
            }
        }
    }
}

impl fmt::Display for ModelDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for w in &self.witness_decls {
            writeln!(f, "witness {} linear over {}", w.name, self.show(&w.over))?;
        }
        for b in &self.bindings {
            writeln!(f, "let {} = {}", b.name, self.show(&b.expr))?;
        }
        for c in &self.constraints {
            let prefix = match c.tag {
                Tag::Consistency => "",
                Tag::Undefined => "undefined_unless ",
            };
            writeln!(f, "{prefix}{} {} as {}", c.predicate.keyword(), self.show(&c.expr), c.name)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

fn set(v: &Value) -> &EventSet {
    v.as_set().expect("sort checked at parse time")
}

fn rel(v: &Value) -> &Relation {
    v.as_rel().expect("sort checked at parse time")
}

fn holds(p: Predicate, v: &Value) -> bool {
    match (p, v) {
        (Predicate::Acyclic, Value::Rel(r)) => r.is_acyclic(),
        (Predicate::Irreflexive, Value::Rel(r)) => r.is_irreflexive(),
        (Predicate::Empty, Value::Rel(r)) => r.is_empty(),
        (Predicate::Empty, Value::Set(s)) => s.is_empty(),
        _ => unreachable!("sort checked at parse time"),
    }
}

/// Everything an expression may refer to, split by stage.
struct Ctx<'a> {
    model: &'a ModelDef,
    base: &'a BaseEnv,
    exec: &'a [Option<Value>],
    rfmo: Option<(&'a Relation, &'a Relation, &'a [Option<Value>])>,
    order: Option<(&'a Relation, &'a [Option<Value>])>,
}

impl<'a> Ctx<'a> {
    fn eval(&self, e: &'a Expr) -> Result<Cow<'a, Value>, EvalError> {
        Ok(match &e.node {
            Node::Base(b) if b.is_witness() => {
                let (rf, mo, _) = self.rfmo.expect("stage checked by level");
                Cow::Owned(Value::Rel(if *b == BaseName::Rf { rf.clone() } else { mo.clone() }))
            }
            Node::Base(b) => Cow::Borrowed(self.base.get_exec(*b).expect("execution-level name bound")),
            Node::Binding(i) => {
                let slot = match self.model.bindings[*i].expr.level {
                    Level::Exec => &self.exec[*i],
                    Level::RfMo => &self.rfmo.expect("stage checked by level").2[*i],
                    Level::Order => &self.order.expect("stage checked by level").1[*i],
                };
                Cow::Borrowed(slot.as_ref().expect("bindings evaluated in order"))
            }
            Node::Witness => Cow::Owned(Value::Rel(self.order.expect("stage checked by level").0.clone())),
            Node::Unary(op, a) => {
                let v = self.eval(a)?;
                Cow::Owned(match op {
                    UnOp::Lift => Value::Rel(set(&v).identity()),
                    UnOp::Inverse => Value::Rel(rel(&v).inverse()),
                    UnOp::Opt => Value::Rel(rel(&v).reflexive_closure()),
                    UnOp::Plus => Value::Rel(rel(&v).transitive_closure()),
                    UnOp::Complement => match &*v {
                        Value::Set(s) => Value::Set(s.complement()),
                        Value::Rel(r) => Value::Rel(r.complement()),
                    },
                })
            }
            Node::Binary(op, a, b) => {
                let (l, r) = (self.eval(a)?, self.eval(b)?);
                Cow::Owned(match (op, &*l, &*r) {
                    (BinOp::Seq, Value::Rel(x), Value::Rel(y)) => Value::Rel(x.compose(y)?),
                    (BinOp::Product, Value::Set(x), Value::Set(y)) => Value::Rel(x.product(y)?),
                    (BinOp::Union, Value::Set(x), Value::Set(y)) => Value::Set(x.union(y)?),
                    (BinOp::Union, Value::Rel(x), Value::Rel(y)) => Value::Rel(x.union(y)?),
                    (BinOp::Inter, Value::Set(x), Value::Set(y)) => Value::Set(x.intersection(y)?),
                    (BinOp::Inter, Value::Rel(x), Value::Rel(y)) => Value::Rel(x.intersection(y)?),
                    (BinOp::Diff, Value::Set(x), Value::Set(y)) => Value::Set(x.difference(y)?),
                    (BinOp::Diff, Value::Rel(x), Value::Rel(y)) => Value::Rel(x.difference(y)?),
                    _ => unreachable!("sort checked at parse time"),
                })
            }
        })
    }

    fn fill(&self, level: Level) -> Result<Vec<Option<Value>>, EvalError> {
        let mut out: Vec<Option<Value>> = vec![None; self.model.bindings.len()];
        for (i, b) in self.model.bindings.iter().enumerate() {
            if b.expr.level != level {
                continue;
            }
            // later bindings of this level read earlier ones through `out`
            let v = {
                let ctx = self.with_slot(level, &out);
                ctx.eval(&b.expr)?.into_owned()
            };
            out[i] = Some(v);
        }
        Ok(out)
    }

    fn with_slot<'b>(&'b self, level: Level, slot: &'b [Option<Value>]) -> Ctx<'b> {
        let mut c = Ctx {
            model: self.model,
            base: self.base,
            exec: self.exec,
            rfmo: self.rfmo,
            order: self.order,
        };
        match level {
            Level::Exec => c.exec = slot,
            Level::RfMo => {
                let (rf, mo, _) = self.rfmo.expect("stage present");
                c.rfmo = Some((rf, mo, slot));
            }
            Level::Order => {
                let (s, _) = self.order.expect("stage present");
                c.order = Some((s, slot));
            }
        }
        c
    }
}

/// Values of a model that depend only on the execution.
pub struct ExecStage<'m> {
    model: &'m ModelDef,
    base: BaseEnv,
    values: Vec<Option<Value>>,
}

impl<'m> ExecStage<'m> {
    pub fn new(model: &'m ModelDef, x: &Execution) -> Result<Self, EvalError> {
        let base = BaseEnv::new(x)?;
        let values = {
            let ctx = Ctx {
                model,
                base: &base,
                exec: &[],
                rfmo: None,
                order: None,
            };
            ctx.fill(Level::Exec)?
        };
        Ok(ExecStage { model, base, values })
    }

    pub fn model(&self) -> &'m ModelDef {
        self.model
    }

    /// Fix `rf` and `mo`.
    pub fn with_rf_mo<'a>(&'a self, rf: &'a Relation, mo: &'a Relation) -> Result<RfMoStage<'a, 'm>, EvalError> {
        let empty: [Option<Value>; 0] = [];
        let values = {
            let ctx = Ctx {
                model: self.model,
                base: &self.base,
                exec: &self.values,
                rfmo: Some((rf, mo, &empty)),
                order: None,
            };
            ctx.fill(Level::RfMo)?
        };
        Ok(RfMoStage {
            exec: self,
            rf,
            mo,
            values,
        })
    }
}

/// Values of a model once `rf` and `mo` are fixed.
pub struct RfMoStage<'a, 'm> {
    exec: &'a ExecStage<'m>,
    rf: &'a Relation,
    mo: &'a Relation,
    values: Vec<Option<Value>>,
}

impl<'a, 'm> RfMoStage<'a, 'm> {
    fn ctx<'b>(&'b self) -> Ctx<'b> {
        Ctx {
            model: self.exec.model,
            base: &self.exec.base,
            exec: &self.exec.values,
            rfmo: Some((self.rf, self.mo, &self.values)),
            order: None,
        }
    }

    /// Evaluate an expression that does not mention the witness order.
    pub fn eval(&self, e: &Expr) -> Result<Value, EvalError> {
        assert!(e.level <= Level::RfMo, "expression needs the witness order");
        Ok(self.ctx().eval(e)?.into_owned())
    }

    /// Check a constraint that does not mention the witness order.
    pub fn check(&self, c: &Constraint) -> Result<bool, EvalError> {
        assert!(c.expr.level <= Level::RfMo, "constraint needs the witness order");
        Ok(holds(c.predicate, &*self.ctx().eval(&c.expr)?))
    }

    /// The set the witness order ranges over.
    pub fn witness_domain(&self) -> Option<Result<EventSet, EvalError>> {
        let w = self.exec.model.witness()?;
        Some(self.eval(&w.over).map(|v| set(&v).clone()))
    }

    /// Verdict for the full candidate; `s` must be given iff the model declares a witness.
    pub fn verdict(&self, s: Option<&Relation>) -> Result<Verdict, EvalError> {
        let model = self.exec.model;
        match (model.witness(), s) {
            (Some(_), Some(_)) | (None, None) => {}
            (Some(w), None) => return Err(EvalError::MissingWitness(w.name.clone())),
            (None, Some(_)) => return Err(EvalError::UnexpectedWitness),
        }
        let base = self.ctx();
        let order_values;
        let ctx = match s {
            None => base,
            Some(s) => {
                let staged = Ctx {
                    order: Some((s, &[])),
                    ..self.ctx()
                };
                order_values = staged.fill(Level::Order)?;
                Ctx {
                    order: Some((s, &order_values)),
                    ..self.ctx()
                }
            }
        };
        let mut failed = Vec::new();
        let mut ub_failed = Vec::new();
        for c in &model.constraints {
            if !holds(c.predicate, &*ctx.eval(&c.expr)?) {
                match c.tag {
                    Tag::Consistency => failed.push(c.name.clone()),
                    Tag::Undefined => ub_failed.push(c.name.clone()),
                }
            }
        }
        let consistent = failed.is_empty();
        let faulty = consistent && !ub_failed.is_empty();
        if consistent {
            failed = ub_failed;
        }
        Ok(Verdict {
            consistent,
            faulty,
            failed_axioms: failed,
        })
    }
}

/// Check one candidate. The candidate is assumed well-formed.
pub fn eval_model(m: &ModelDef, x: &Execution, w: &Witness) -> Result<Verdict, EvalError> {
    let exec = ExecStage::new(m, x)?;
    let stage = exec.with_rf_mo(&w.rf, &w.mo)?;
    stage.verdict(w.s.as_ref())
}
