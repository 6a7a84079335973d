//! Reading and writing the Timbuk specification format.
//!
//! Extensions over the classic format: `#` line comments, `q:0` arity suffixes
//! on state declarations, and colored epsilon lines `q1 ->R q2` / `q1 ->E q2`.
//! A plain `q1 -> q2` between declared states is read as an `R` epsilon.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::automata::{Color, StateId, StateLabel, TreeAutomaton};
use crate::rewriting::{Equation, RewriteError, Rule, Trs};
use crate::terms::{Signature, Symbol, Term, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: symbol `{name}` expects {expected} argument(s), found {found}")]
    Arity {
        line: usize,
        col: usize,
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("{line}:{col}: undeclared state `{name}`")]
    UndeclaredState { line: usize, col: usize, name: String },
    #[error("{line}:{col}: undeclared symbol `{name}`")]
    UndeclaredSymbol { line: usize, col: usize, name: String },
    #[error("{line}:{col}: {msg}")]
    Invalid { line: usize, col: usize, msg: String },
}

/// A parsed specification file.
#[derive(Debug, Clone, Default)]
pub struct Specification {
    pub signature: Signature,
    pub variables: Vec<Var>,
    pub trss: Vec<(String, Trs)>,
    pub automata: Vec<(String, TreeAutomaton)>,
    pub equations: Vec<(String, Vec<Equation>)>,
}

impl Specification {
    pub fn trs(&self, name: &str) -> Option<&Trs> {
        self.trss.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn automaton(&self, name: &str) -> Option<&TreeAutomaton> {
        self.automata.iter().find(|(n, _)| n == name).map(|(_, a)| a)
    }

    pub fn equation_set(&self, name: &str) -> Option<&[Equation]> {
        self.equations
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, e)| e.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Name(String),
    LParen,
    RParen,
    Comma,
    Colon,
    Arrow,
    ColoredArrow(Color),
    Equals,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let mut push = |tok, n: usize, i: &mut usize, col: &mut usize| {
            out.push(Token {
                tok,
                line: tl,
                col: tc,
            });
            *i += n;
            *col += n;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' => push(Tok::LParen, 1, &mut i, &mut col),
            ')' => push(Tok::RParen, 1, &mut i, &mut col),
            ',' => push(Tok::Comma, 1, &mut i, &mut col),
            ':' => push(Tok::Colon, 1, &mut i, &mut col),
            '=' => push(Tok::Equals, 1, &mut i, &mut col),
            '-' if chars.get(i + 1) == Some(&'>') => {
                let color = match chars.get(i + 2) {
                    Some('R') => Some(Color::R),
                    Some('E') => Some(Color::E),
                    _ => None,
                };
                match color {
                    Some(k) if !chars.get(i + 3).is_some_and(|&c| is_name_char(c)) => {
                        push(Tok::ColoredArrow(k), 3, &mut i, &mut col)
                    }
                    _ => push(Tok::Arrow, 2, &mut i, &mut col),
                }
            }
            c if is_name_char(c) => {
                let start = i;
                while i < chars.len() && is_name_char(chars[i]) {
                    i += 1;
                }
                let name: String = chars[start..i].iter().collect();
                col += i - start;
                out.push(Token {
                    tok: Tok::Name(name),
                    line: tl,
                    col: tc,
                });
            }
            other => {
                return Err(ParseError::Syntax {
                    line,
                    col,
                    msg: format!("unexpected character `{}`", other),
                })
            }
        }
    }
    Ok(out)
}

const KEYWORDS: &[&str] = &[
    "Ops",
    "Vars",
    "TRS",
    "Automaton",
    "States",
    "Final",
    "Transitions",
    "Equations",
    "Rules",
];

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    sig: Signature,
    vars: Vec<Var>,
    end: (usize, usize),
    _text: &'a str,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Result<Self, ParseError> {
        let toks = lex(text)?;
        let lines = text.split('\n').count();
        let last_col = text.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        Ok(Parser {
            toks,
            pos: 0,
            sig: Signature::new(),
            vars: Vec::new(),
            end: (lines, last_col),
            _text: text,
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.tok)
    }

    fn loc(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map_or(self.end, |t| (t.line, t.col))
    }

    fn syntax(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.loc();
        ParseError::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn at_keyword(&self) -> bool {
        matches!(self.peek(), Some(Tok::Name(n)) if KEYWORDS.contains(&n.as_str()))
    }

    fn at_section_end(&self) -> bool {
        self.peek().is_none() || self.at_keyword()
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.syntax(format!("expected {}", what)))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Name(n)) if n == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.syntax(format!("expected `{}`", kw))),
        }
    }

    /// A name that is not a keyword.
    fn name(&mut self) -> Result<(String, usize, usize), ParseError> {
        let (line, col) = self.loc();
        match self.peek() {
            Some(Tok::Name(n)) if !KEYWORDS.contains(&n.as_str()) => {
                let n = n.clone();
                self.pos += 1;
                Ok((n, line, col))
            }
            _ => Err(self.syntax("expected a name")),
        }
    }

    fn number(&mut self) -> Result<usize, ParseError> {
        let (n, line, col) = self.name()?;
        n.parse().map_err(|_| ParseError::Syntax {
            line,
            col,
            msg: format!("expected a number, found `{}`", n),
        })
    }

    fn spec(&mut self) -> Result<Specification, ParseError> {
        let mut spec = Specification::default();
        while let Some(tok) = self.peek() {
            let kw = match tok {
                Tok::Name(n) => n.clone(),
                _ => return Err(self.syntax("expected a section keyword")),
            };
            match kw.as_str() {
                "Ops" => {
                    self.pos += 1;
                    while !self.at_section_end() {
                        let (n, line, col) = self.name()?;
                        self.expect(Tok::Colon, "`:` after symbol name")?;
                        let k = self.number()?;
                        self.sig.add(Symbol::new(&n, k)).map_err(|e| ParseError::Invalid {
                            line,
                            col,
                            msg: e.to_string(),
                        })?;
                    }
                    spec.signature = self.sig.clone();
                }
                "Vars" => {
                    self.pos += 1;
                    while !self.at_section_end() {
                        let (n, _, _) = self.name()?;
                        let v = Var::new(&n);
                        if !self.vars.contains(&v) {
                            self.vars.push(v);
                        }
                    }
                    spec.variables = self.vars.clone();
                }
                "TRS" => {
                    self.pos += 1;
                    let (name, _, _) = self.name()?;
                    let mut rules = Vec::new();
                    while !self.at_section_end() {
                        let (line, col) = self.loc();
                        let lhs = self.term(true)?;
                        self.rule_arrow()?;
                        let rhs = self.term(true)?;
                        rules.push(Rule::new(lhs, rhs).map_err(|e| invalid(line, col, e))?);
                    }
                    let (line, col) = self.loc();
                    let trs = Trs::new(self.sig.clone(), rules).map_err(|e| invalid(line, col, e))?;
                    spec.trss.push((name, trs));
                }
                "Automaton" => {
                    self.pos += 1;
                    let (name, _, _) = self.name()?;
                    let a = self.automaton()?;
                    spec.automata.push((name, a));
                }
                "Equations" => {
                    self.pos += 1;
                    let (name, _, _) = self.name()?;
                    self.expect_keyword("Rules")?;
                    let mut eqs = Vec::new();
                    while !self.at_section_end() {
                        let lhs = self.term(true)?;
                        self.expect(Tok::Equals, "`=`")?;
                        let rhs = self.term(true)?;
                        eqs.push(Equation::new(lhs, rhs));
                    }
                    spec.equations.push((name, eqs));
                }
                other => return Err(self.syntax(format!("unexpected `{}`", other))),
            }
        }
        Ok(spec)
    }

    /// In rule contexts `->E` is just an arrow followed by the name `E`.
    fn rule_arrow(&mut self) -> Result<(), ParseError> {
        match self.peek().cloned() {
            Some(Tok::Arrow) => {
                self.pos += 1;
                Ok(())
            }
            Some(Tok::ColoredArrow(c)) => {
                let t = &mut self.toks[self.pos];
                let name = Token {
                    tok: Tok::Name(c.to_string()),
                    line: t.line,
                    col: t.col + 2,
                };
                t.tok = Tok::Arrow;
                self.toks.insert(self.pos + 1, name);
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.syntax("expected `->`")),
        }
    }

    fn term(&mut self, allow_vars: bool) -> Result<Term, ParseError> {
        let (n, line, col) = self.name()?;
        let has_args = self.peek() == Some(&Tok::LParen);
        if !has_args && allow_vars && self.vars.iter().any(|v| v.name() == n) {
            return Ok(Term::Var(Var::new(&n)));
        }
        let sym = self
            .sig
            .get(&n)
            .cloned()
            .ok_or(ParseError::UndeclaredSymbol {
                line,
                col,
                name: n.clone(),
            })?;
        let mut args = Vec::new();
        if has_args {
            self.pos += 1;
            loop {
                args.push(self.term(allow_vars)?);
                match self.peek() {
                    Some(Tok::Comma) => self.pos += 1,
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.syntax("expected `,` or `)`")),
                }
            }
        }
        if args.len() != sym.arity() {
            return Err(ParseError::Arity {
                line,
                col,
                name: n,
                expected: sym.arity(),
                found: args.len(),
            });
        }
        Ok(Term::App(sym, args))
    }

    fn state_ref(
        &mut self,
        states: &HashMap<String, StateId>,
    ) -> Result<StateId, ParseError> {
        let (n, line, col) = self.name()?;
        states
            .get(&n)
            .copied()
            .ok_or(ParseError::UndeclaredState { line, col, name: n })
    }

    fn automaton(&mut self) -> Result<TreeAutomaton, ParseError> {
        let mut a = TreeAutomaton::new(self.sig.clone());
        let mut states: HashMap<String, StateId> = HashMap::new();
        self.expect_keyword("States")?;
        while !self.at_section_end() {
            let (n, _, _) = self.name()?;
            if self.peek() == Some(&Tok::Colon) {
                self.pos += 1;
                self.number()?;
            }
            let id = a.add_state(StateLabel::Name(n.clone()));
            states.insert(n, id);
        }
        self.expect_keyword("Final")?;
        self.expect_keyword("States")?;
        let mut finals = BTreeSet::new();
        while !self.at_section_end() {
            finals.insert(self.state_ref(&states)?);
        }
        a.set_finals(finals);
        self.expect_keyword("Transitions")?;
        while !self.at_section_end() {
            let (line, col) = self.loc();
            let n = match self.peek() {
                Some(Tok::Name(n)) => n.clone(),
                _ => return Err(self.syntax("expected a transition")),
            };
            let has_args = self.peek_at(1) == Some(&Tok::LParen);
            let colored = matches!(self.peek_at(1), Some(Tok::ColoredArrow(_)));
            let is_constant = self.sig.get(&n).is_some_and(|s| s.arity() == 0);
            if !has_args && (colored || !is_constant) {
                // Epsilon transition between states.
                let src = self.state_ref(&states)?;
                let color = match self.peek() {
                    Some(Tok::ColoredArrow(c)) => *c,
                    Some(Tok::Arrow) => Color::R,
                    _ => return Err(self.syntax("expected `->`")),
                };
                self.pos += 1;
                let dst = self.state_ref(&states)?;
                a.add_epsilon(src, dst, color);
                continue;
            }
            self.pos += 1;
            let sym = self.sig.get(&n).cloned().ok_or(ParseError::UndeclaredSymbol {
                line,
                col,
                name: n.clone(),
            })?;
            let mut args = Vec::new();
            if has_args {
                self.pos += 1;
                loop {
                    args.push(self.state_ref(&states)?);
                    match self.peek() {
                        Some(Tok::Comma) => self.pos += 1,
                        Some(Tok::RParen) => {
                            self.pos += 1;
                            break;
                        }
                        _ => return Err(self.syntax("expected `,` or `)`")),
                    }
                }
            }
            if args.len() != sym.arity() {
                return Err(ParseError::Arity {
                    line,
                    col,
                    name: n,
                    expected: sym.arity(),
                    found: args.len(),
                });
            }
            self.rule_arrow()?;
            let dst = self.state_ref(&states)?;
            a.add_delta(sym, args, dst);
        }
        Ok(a)
    }
}

fn invalid(line: usize, col: usize, e: RewriteError) -> ParseError {
    ParseError::Invalid {
        line,
        col,
        msg: e.to_string(),
    }
}

/// Parses a whole specification.
pub fn parse_spec(text: &str) -> Result<Specification, ParseError> {
    Parser::new(text)?.spec()
}

/// Parses one term over `sig`; names listed in `vars` are variables.
pub fn parse_term(sig: &Signature, vars: &[&str], text: &str) -> Result<Term, ParseError> {
    let mut p = Parser::new(text)?;
    p.sig = sig.clone();
    p.vars = vars.iter().map(|v| Var::new(v)).collect();
    let t = p.term(true)?;
    if p.peek().is_some() {
        return Err(p.syntax("trailing input after term"));
    }
    Ok(t)
}

/// Renders the `States`, `Final States` and `Transitions` sections.
pub fn render_automaton(a: &TreeAutomaton) -> String {
    let mut s = String::from("States");
    for q in a.states() {
        let _ = write!(s, " {}", a.label(q));
    }
    s.push_str("\nFinal States");
    for &q in a.finals() {
        let _ = write!(s, " {}", a.label(q));
    }
    s.push_str("\nTransitions\n");
    for d in a.deltas() {
        s.push_str(d.symbol.name());
        if !d.args.is_empty() {
            let args: Vec<String> = d.args.iter().map(|&q| a.label(q).to_string()).collect();
            let _ = write!(s, "({})", args.join(","));
        }
        let _ = writeln!(s, "->{}", a.label(d.target));
    }
    for e in a.epsilons() {
        let _ = writeln!(s, "{} ->{} {}", a.label(e.source), e.color, a.label(e.target));
    }
    s
}

/// Renders an `Ops` header followed by named automata.
pub fn render_spec(sig: &Signature, automata: &[(&str, &TreeAutomaton)]) -> String {
    let mut s = String::from("Ops");
    for f in sig.iter() {
        let _ = write!(s, " {}:{}", f.name(), f.arity());
    }
    s.push('\n');
    for (name, a) in automata {
        let _ = write!(s, "\nAutomaton {}\n{}", name, render_automaton(a));
    }
    s
}
