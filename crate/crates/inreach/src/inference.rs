//! Approximation equations for functional TRSs.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::rewriting::{bounded_class, Equation, Trs};
use crate::terms::{ground_terms_by_size, Signature, Symbol, Term, Var};

/// Defined symbols (roots of left-hand sides) and constructors (the rest).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSplit {
    pub defined: BTreeSet<Symbol>,
    pub constructors: BTreeSet<Symbol>,
}

pub fn split_symbols(trs: &Trs) -> SymbolSplit {
    let defined: BTreeSet<Symbol> = trs.rules().iter().filter_map(|r| r.lhs().root().cloned()).collect();
    let constructors = trs
        .signature()
        .iter()
        .filter(|f| !defined.contains(*f))
        .cloned()
        .collect();
    SymbolSplit {
        defined,
        constructors,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    pub equations: Vec<Equation>,
    pub warnings: Vec<String>,
}

/// Rules read as equations, one reflexive equation `f(X1,..,Xn)=f(X1,..,Xn)`
/// per symbol, and the user's contraction equations `ec`, without duplicates.
pub fn generate_equations(trs: &Trs, ec: &[Equation]) -> Generated {
    let split = split_symbols(trs);
    let mut equations = Vec::new();
    let mut seen = BTreeSet::new();
    let mut push = |e: Equation, out: &mut Vec<Equation>| {
        if seen.insert((e.lhs.clone(), e.rhs.clone())) {
            out.push(e);
        }
    };
    for r in trs.rules() {
        push(Equation::new(r.lhs().clone(), r.rhs().clone()), &mut equations);
    }
    for f in trs.signature().iter() {
        let args: Vec<Term> = (1..=f.arity()).map(|i| Term::Var(Var::new(&format!("X{}", i)))).collect();
        let t = Term::App(f.clone(), args);
        push(Equation::new(t.clone(), t), &mut equations);
    }
    let mut warnings = Vec::new();
    for e in ec {
        let used: BTreeSet<Symbol> = e.lhs.symbols().union(&e.rhs.symbols()).cloned().collect();
        for f in used.intersection(&split.defined) {
            warnings.push(format!("equation `{}` uses defined symbol `{}`", e, f.name()));
        }
        push(e.clone(), &mut equations);
    }
    Generated {
        equations,
        warnings,
    }
}

/// Simple first-order sorts for constructor symbols.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Typing {
    decls: BTreeMap<String, (Vec<String>, String)>,
}

impl Typing {
    pub fn new() -> Self {
        Typing::default()
    }

    /// Declares `symbol : args -> result`.
    pub fn declare(&mut self, symbol: &str, args: &[&str], result: &str) -> &mut Self {
        self.decls.insert(
            symbol.to_string(),
            (args.iter().map(|s| s.to_string()).collect(), result.to_string()),
        );
        self
    }

    /// Sort of a well-typed ground term.
    pub fn sort_of(&self, t: &Term) -> Option<&str> {
        let Term::App(f, args) = t else { return None };
        let (want, res) = self.decls.get(f.name())?;
        if want.len() != args.len() {
            return None;
        }
        for (a, w) in args.iter().zip(want) {
            if self.sort_of(a)? != w {
                return None;
            }
        }
        Some(res)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Census {
    /// Smallest member of each class, ordered by size then canonical order.
    pub representatives: Vec<Term>,
    /// Same representatives one size lower.
    pub stable: bool,
}

fn classes(sig: &Signature, ec: &[Equation], max_size: usize, typing: Option<&Typing>) -> Vec<Term> {
    let ok = |t: &Term| typing.is_none_or(|ty| ty.sort_of(t).is_some());
    let terms: Vec<Term> = ground_terms_by_size(sig, max_size)
        .into_iter()
        .flatten()
        .filter(|t| ok(t))
        .collect();
    let mut class_of: HashMap<Term, usize> = HashMap::new();
    let mut reps = Vec::new();
    for t in &terms {
        if class_of.contains_key(t) {
            continue;
        }
        let id = reps.len();
        let members: Vec<Term> = bounded_class(sig, ec, t, max_size)
            .into_iter()
            .filter(|u| ok(u))
            .collect();
        let mut rep = t.clone();
        for m in members {
            if (m.size(), &m) < (rep.size(), &rep) {
                rep = m.clone();
            }
            class_of.insert(m, id);
        }
        class_of.insert(t.clone(), id);
        reps.push(rep);
    }
    reps.sort_by(|a, b| (a.size(), a).cmp(&(b.size(), b)));
    reps.dedup();
    reps
}

/// Partitions constructor terms up to `max_size` by the equations `ec`.
pub fn class_census(split: &SymbolSplit, ec: &[Equation], max_size: usize, typing: Option<&Typing>) -> Census {
    let sig = Signature::from_symbols(split.constructors.iter().cloned()).expect("distinct symbols");
    let representatives = classes(&sig, ec, max_size, typing);
    let stable = max_size > 1 && classes(&sig, ec, max_size - 1, typing) == representatives;
    Census {
        representatives,
        stable,
    }
}
