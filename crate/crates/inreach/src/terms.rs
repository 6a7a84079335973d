//! First-order terms, positions, substitutions and linear matching.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("invalid position {0}")]
    InvalidPosition(Position),
    #[error("pattern is not linear")]
    NonLinearPattern,
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("symbol `{name}` expects {expected} arguments, got {found}")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("empty identifier")]
    EmptyName,
}

/// A function symbol with a fixed arity.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol {
    name: Arc<str>,
    arity: usize,
}

impl Symbol {
    pub fn new(name: &str, arity: usize) -> Self {
        assert!(!name.is_empty(), "symbol name must be non-empty");
        Symbol {
            name: Arc::from(name),
            arity,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name, self.arity)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// A finite set of symbols with pairwise distinct names.
#[derive(Clone, Default, PartialEq, Eq, Debug)]
pub struct Signature {
    symbols: BTreeMap<String, Symbol>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_symbols<I: IntoIterator<Item = Symbol>>(symbols: I) -> Result<Self, TermError> {
        let mut sig = Signature::new();
        for s in symbols {
            sig.add(s)?;
        }
        Ok(sig)
    }

    /// Shorthand for tests and fixtures: `[("f", 1), ("a", 0)]`.
    pub fn from_pairs(pairs: &[(&str, usize)]) -> Result<Self, TermError> {
        Self::from_symbols(pairs.iter().map(|(n, a)| Symbol::new(n, *a)))
    }

    pub fn add(&mut self, symbol: Symbol) -> Result<(), TermError> {
        match self.symbols.get(symbol.name()) {
            Some(existing) if *existing == symbol => Ok(()),
            Some(_) => Err(TermError::DuplicateSymbol(symbol.name().to_string())),
            None => {
                self.symbols.insert(symbol.name().to_string(), symbol);
                Ok(())
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&Symbol> {
        self.symbols.get(name)
    }

    pub fn contains(&self, symbol: &Symbol) -> bool {
        self.symbols.get(symbol.name()) == Some(symbol)
    }

    /// Symbols in canonical (name) order.
    pub fn iter(&self) -> impl Iterator<Item = &Symbol> {
        self.symbols.values()
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Builds `name(args)` after checking the symbol and its arity.
    pub fn app(&self, name: &str, args: Vec<Term>) -> Result<Term, TermError> {
        let sym = self
            .get(name)
            .ok_or_else(|| TermError::UnknownSymbol(name.to_string()))?;
        if sym.arity() != args.len() {
            return Err(TermError::ArityMismatch {
                name: name.to_string(),
                expected: sym.arity(),
                found: args.len(),
            });
        }
        Ok(Term::App(sym.clone(), args))
    }

    /// Checks that every symbol of `t` belongs to this signature with the right arity.
    pub fn check(&self, t: &Term) -> Result<(), TermError> {
        match t {
            Term::Var(_) => Ok(()),
            Term::App(f, args) => {
                match self.get(f.name()) {
                    None => return Err(TermError::UnknownSymbol(f.name().to_string())),
                    Some(s) if s.arity() != args.len() => {
                        return Err(TermError::ArityMismatch {
                            name: f.name().to_string(),
                            expected: s.arity(),
                            found: args.len(),
                        })
                    }
                    Some(_) => {}
                }
                args.iter().try_for_each(|a| self.check(a))
            }
        }
    }
}

/// A variable, identified by name.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: &str) -> Self {
        assert!(!name.is_empty(), "variable name must be non-empty");
        Var(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A term over a signature and variables.
///
/// The derived ordering is the canonical one used for every deterministic
/// iteration: variables first, then applications by symbol name and
/// children lexicographically.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Var),
    App(Symbol, Vec<Term>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(Var::new(name))
    }

    /// Builds an application, panicking on an arity mismatch.
    pub fn app(symbol: &Symbol, args: Vec<Term>) -> Term {
        assert_eq!(symbol.arity(), args.len(), "arity mismatch for {}", symbol);
        Term::App(symbol.clone(), args)
    }

    pub fn constant(symbol: &Symbol) -> Term {
        Term::app(symbol, Vec::new())
    }

    /// Number of symbol and variable occurrences.
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) => 1,
            Term::App(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Var(_) => 0,
            Term::App(_, args) => 1 + args.iter().map(Term::depth).max().unwrap_or(0),
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::App(_, args) => args.iter().all(Term::is_ground),
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn root(&self) -> Option<&Symbol> {
        match self {
            Term::Var(_) => None,
            Term::App(f, _) => Some(f),
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Var(_) => &[],
            Term::App(_, args) => args,
        }
    }

    /// Variables in order of first occurrence (left to right).
    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        let mut seen = BTreeSet::new();
        out.retain(|v| seen.insert(v.clone()));
        out
    }

    fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Term::Var(v) => out.push(v.clone()),
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    /// All symbols occurring in the term.
    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Symbol>) {
        if let Term::App(f, args) = self {
            out.insert(f.clone());
            args.iter().for_each(|a| a.collect_symbols(out));
        }
    }

    /// Replaces every variable by the variable `_`.
    pub fn anonymize(&self) -> Term {
        match self {
            Term::Var(_) => Term::var("_"),
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(Term::anonymize).collect()),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{}", v),
            Term::App(s, args) => {
                write!(f, "{}", s)?;
                if !args.is_empty() {
                    f.write_str("(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            f.write_str(",")?;
                        }
                        write!(f, "{}", a)?;
                    }
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

/// A position: a word over positive naturals, the empty word being the root.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Position(Vec<usize>);

impl Position {
    pub fn root() -> Self {
        Position(Vec::new())
    }

    pub fn new(path: Vec<usize>) -> Self {
        assert!(path.iter().all(|&i| i >= 1), "positions use 1-based indices");
        Position(path)
    }

    pub fn path(&self) -> &[usize] {
        &self.0
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, i: usize) -> Position {
        let mut p = self.0.clone();
        p.push(i);
        Position(p)
    }

    /// True when `self` is a (non-strict) prefix of `other`.
    pub fn is_prefix_of(&self, other: &Position) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("Λ");
        }
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{}", n)?;
        }
        Ok(())
    }
}

impl fmt::Debug for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

pub type Substitution = BTreeMap<Var, Term>;

/// All positions of `t`, in prefix order.
pub fn positions(t: &Term) -> Vec<Position> {
    let mut out = Vec::new();
    let mut stack = vec![(t, Position::root())];
    while let Some((s, p)) = stack.pop() {
        if let Term::App(_, args) = s {
            for (i, a) in args.iter().enumerate().rev() {
                stack.push((a, p.child(i + 1)));
            }
        }
        out.push(p);
    }
    out
}

pub fn subterm_at<'a>(t: &'a Term, p: &Position) -> Result<&'a Term, TermError> {
    let mut cur = t;
    for &i in p.path() {
        cur = cur
            .args()
            .get(i.wrapping_sub(1))
            .ok_or_else(|| TermError::InvalidPosition(p.clone()))?;
    }
    Ok(cur)
}

pub fn replace_at(t: &Term, p: &Position, s: Term) -> Result<Term, TermError> {
    fn go(t: &Term, path: &[usize], s: Term, p: &Position) -> Result<Term, TermError> {
        match path.split_first() {
            None => Ok(s),
            Some((&i, rest)) => match t {
                Term::App(f, args) if i >= 1 && i <= args.len() => {
                    let mut new_args = args.clone();
                    new_args[i - 1] = go(&args[i - 1], rest, s, p)?;
                    Ok(Term::App(f.clone(), new_args))
                }
                _ => Err(TermError::InvalidPosition(p.clone())),
            },
        }
    }
    go(t, p.path(), s, p)
}

pub fn apply_substitution(t: &Term, sigma: &Substitution) -> Term {
    match t {
        Term::Var(v) => sigma.get(v).cloned().unwrap_or_else(|| t.clone()),
        Term::App(f, args) => Term::App(
            f.clone(),
            args.iter().map(|a| apply_substitution(a, sigma)).collect(),
        ),
    }
}

pub fn is_linear(t: &Term) -> bool {
    let mut seen = BTreeSet::new();
    fn go(t: &Term, seen: &mut BTreeSet<Var>) -> bool {
        match t {
            Term::Var(v) => seen.insert(v.clone()),
            Term::App(_, args) => args.iter().all(|a| go(a, seen)),
        }
    }
    go(t, &mut seen)
}

/// Matches a linear pattern against a subject.
pub fn match_pattern(pattern: &Term, subject: &Term) -> Result<Option<Substitution>, TermError> {
    if !is_linear(pattern) {
        return Err(TermError::NonLinearPattern);
    }
    Ok(match_term(pattern, subject))
}

/// Matches a possibly non-linear pattern: repeated variables must bind equal terms.
pub fn match_term(pattern: &Term, subject: &Term) -> Option<Substitution> {
    let mut sigma = Substitution::new();
    if match_into(pattern, subject, &mut sigma) {
        Some(sigma)
    } else {
        None
    }
}

fn match_into(pattern: &Term, subject: &Term, sigma: &mut Substitution) -> bool {
    match (pattern, subject) {
        (Term::Var(v), _) => match sigma.get(v) {
            Some(bound) => bound == subject,
            None => {
                sigma.insert(v.clone(), subject.clone());
                true
            }
        },
        (Term::App(f, ps), Term::App(g, ss)) => {
            f == g && ps.iter().zip(ss).all(|(p, s)| match_into(p, s, sigma))
        }
        (Term::App(..), Term::Var(_)) => false,
    }
}

/// All ground terms over `sig`, grouped by size: `out[k]` holds the terms of size `k`.
/// `out[0]` is always empty.
pub fn ground_terms_by_size(sig: &Signature, max_size: usize) -> Vec<Vec<Term>> {
    let symbols: Vec<&Symbol> = sig.iter().collect();
    let mut by_size: Vec<Vec<Term>> = vec![Vec::new(); max_size + 1];
    for size in 1..=max_size {
        let mut level = Vec::new();
        for f in &symbols {
            for split in compositions(size - 1, f.arity()) {
                let pools: Vec<&Vec<Term>> = split.iter().map(|&k| &by_size[k]).collect();
                for_each_product(&pools, |args| {
                    level.push(Term::App((*f).clone(), args.to_vec()));
                });
            }
        }
        level.sort();
        by_size[size] = level;
    }
    by_size
}

/// Ordered ways of writing `total` as a sum of `parts` positive naturals.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if parts == 0 {
        if total == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    let mut cur = Vec::with_capacity(parts);
    fn go(rest: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            if rest >= 1 {
                cur.push(rest);
                out.push(cur.clone());
                cur.pop();
            }
            return;
        }
        for k in 1..=rest.saturating_sub(parts - 1) {
            cur.push(k);
            go(rest - k, parts - 1, cur, out);
            cur.pop();
        }
    }
    go(total, parts, &mut cur, &mut out);
    out
}

/// Calls `f` on every element of the cartesian product of `pools`, in lexicographic order.
pub fn for_each_product<T: Clone, F: FnMut(&[T])>(pools: &[&Vec<T>], mut f: F) {
    if pools.iter().any(|p| p.is_empty()) {
        return;
    }
    let mut idx = vec![0usize; pools.len()];
    let mut cur: Vec<T> = pools.iter().map(|p| p[0].clone()).collect();
    loop {
        f(&cur);
        let mut k = pools.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < pools[k].len() {
                cur[k] = pools[k][idx[k]].clone();
                break;
            }
            idx[k] = 0;
            cur[k] = pools[k][0].clone();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig() -> Signature {
        Signature::from_pairs(&[("n", 0), ("0", 0), ("s", 1), ("a", 1), ("f", 1), ("c", 2)]).unwrap()
    }

    fn t(sig: &Signature, name: &str, args: Vec<Term>) -> Term {
        sig.app(name, args).unwrap()
    }

    fn example(sig: &Signature) -> Term {
        // f(c(a(s(0)),n))
        let zero = t(sig, "0", vec![]);
        let n = t(sig, "n", vec![]);
        let inner = t(sig, "a", vec![t(sig, "s", vec![zero])]);
        t(sig, "f", vec![t(sig, "c", vec![inner, n])])
    }

    fn pos(p: &[usize]) -> Position {
        Position::new(p.to_vec())
    }

    #[test]
    fn positions_follow_the_inductive_definition() {
        let s = sig();
        let zero = t(&s, "0", vec![]);
        assert_eq!(positions(&zero), vec![Position::root()]);
        let a = t(&s, "a", vec![t(&s, "s", vec![zero])]);
        assert_eq!(positions(&a), vec![Position::root(), pos(&[1]), pos(&[1, 1])]);
        let got: BTreeSet<_> = positions(&example(&s)).into_iter().collect();
        let want: BTreeSet<_> = [
            vec![],
            vec![1],
            vec![1, 1],
            vec![1, 1, 1],
            vec![1, 1, 1, 1],
            vec![1, 2],
        ]
        .into_iter()
        .map(Position::new)
        .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn subterm_and_replace() {
        let s = sig();
        let e = example(&s);
        assert_eq!(subterm_at(&e, &pos(&[1, 1])).unwrap().to_string(), "a(s(0))");
        let x = Term::var("x");
        assert_eq!(subterm_at(&x, &Position::root()).unwrap(), &x);
        let c = t(&s, "c", vec![t(&s, "0", vec![]), t(&s, "n", vec![])]);
        assert!(matches!(subterm_at(&c, &pos(&[3])), Err(TermError::InvalidPosition(_))));
        let r = replace_at(&e, &pos(&[1, 1]), t(&s, "0", vec![])).unwrap();
        assert_eq!(r.to_string(), "f(c(0,n))");
        assert_eq!(replace_at(&e, &Position::root(), x.clone()).unwrap(), x);
        assert!(replace_at(&c, &pos(&[2, 1]), x).is_err());
        assert!(matches!(s.app("cons", vec![]), Err(TermError::UnknownSymbol(_))));
    }

    #[test]
    fn substitution_and_linearity() {
        let s = sig();
        let zero = t(&s, "0", vec![]);
        let pat = t(&s, "a", vec![t(&s, "s", vec![Term::var("X")])]);
        let mut sigma = Substitution::new();
        sigma.insert(Var::new("X"), zero.clone());
        assert_eq!(apply_substitution(&pat, &sigma).to_string(), "a(s(0))");
        assert_eq!(apply_substitution(&zero, &sigma), zero);
        let cxy = t(&s, "c", vec![Term::var("X"), Term::var("Y")]);
        assert_eq!(apply_substitution(&cxy, &sigma).to_string(), "c(0,Y)");
        assert!(is_linear(&t(&s, "f", vec![t(&s, "c", vec![t(&s, "s", vec![Term::var("X")]), Term::var("Y")])])));
        assert!(!is_linear(&t(&s, "c", vec![Term::var("X"), Term::var("X")])));
        assert!(is_linear(&zero));
    }

    #[test]
    fn linear_matching() {
        let s = sig();
        let zero = t(&s, "0", vec![]);
        let pat = t(&s, "a", vec![t(&s, "s", vec![Term::var("X")])]);
        let subj = t(&s, "a", vec![t(&s, "s", vec![zero.clone()])]);
        let m = match_pattern(&pat, &subj).unwrap().unwrap();
        assert_eq!(m.get(&Var::new("X")), Some(&zero));
        let fc0 = t(&s, "f", vec![t(&s, "c", vec![zero.clone(), Term::var("Y")])]);
        let fn_ = t(&s, "f", vec![t(&s, "n", vec![])]);
        assert_eq!(match_pattern(&fc0, &fn_).unwrap(), None);
        let c0n = t(&s, "c", vec![zero, t(&s, "n", vec![])]);
        let m = match_pattern(&Term::var("X"), &c0n).unwrap().unwrap();
        assert_eq!(m.get(&Var::new("X")), Some(&c0n));
        let nl = t(&s, "c", vec![Term::var("X"), Term::var("X")]);
        assert_eq!(match_pattern(&nl, &c0n), Err(TermError::NonLinearPattern));
    }

    #[test]
    fn ground_term_enumeration_counts() {
        let s = Signature::from_pairs(&[("a", 0), ("g", 1), ("h", 2)]).unwrap();
        let by = ground_terms_by_size(&s, 4);
        // sizes: 1: a; 2: g(a); 3: g(g(a)), h(a,a); 4: g^3(a), g(h(a,a)), h(a,g(a)), h(g(a),a)
        assert_eq!(by.iter().map(Vec::len).collect::<Vec<_>>(), vec![0, 1, 1, 2, 4]);
        assert!(by.iter().flatten().all(|t| t.is_ground()));
    }

    #[test]
    fn compositions_are_exhaustive() {
        assert_eq!(compositions(3, 2), vec![vec![1, 2], vec![2, 1]]);
        assert_eq!(compositions(0, 0), vec![Vec::<usize>::new()]);
        assert!(compositions(1, 2).is_empty());
    }
}
