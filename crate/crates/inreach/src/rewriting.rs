//! Rewrite rules, innermost strategies and bounded brute-force oracles.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::par;
use crate::terms::{
    apply_substitution, for_each_product, ground_terms_by_size, is_linear, match_term, positions,
    replace_at, subterm_at, Position, Signature, Substitution, Term, TermError, Var,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("rule left-hand side is a variable: {0}")]
    VariableLhs(Term),
    #[error("rule {lhs} -> {rhs} has right-hand side variables not in the left-hand side")]
    UnboundRhsVariable { lhs: Term, rhs: Term },
    #[error(transparent)]
    Term(#[from] TermError),
}

/// A rewrite rule `lhs -> rhs`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Rule {
    lhs: Term,
    rhs: Term,
}

impl Rule {
    pub fn new(lhs: Term, rhs: Term) -> Result<Self, RewriteError> {
        if lhs.is_var() {
            return Err(RewriteError::VariableLhs(lhs));
        }
        let lvars: BTreeSet<Var> = lhs.vars().into_iter().collect();
        if rhs.vars().iter().any(|v| !lvars.contains(v)) {
            return Err(RewriteError::UnboundRhsVariable { lhs, rhs });
        }
        Ok(Rule { lhs, rhs })
    }

    pub fn lhs(&self) -> &Term {
        &self.lhs
    }

    pub fn rhs(&self) -> &Term {
        &self.rhs
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.lhs, self.rhs)
    }
}

/// A term rewriting system over a signature.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Trs {
    signature: Signature,
    rules: Vec<Rule>,
}

impl Trs {
    pub fn new(signature: Signature, rules: Vec<Rule>) -> Result<Self, RewriteError> {
        for r in &rules {
            signature.check(r.lhs())?;
            signature.check(r.rhs())?;
        }
        Ok(Trs { signature, rules })
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn is_left_linear(&self) -> bool {
        self.rules.iter().all(|r| is_linear(r.lhs()))
    }
}

/// An equation `lhs = rhs`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Equation {
    pub lhs: Term,
    pub rhs: Term,
}

impl Equation {
    pub fn new(lhs: Term, rhs: Term) -> Self {
        Equation { lhs, rhs }
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.lhs, self.rhs)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub enum Strategy {
    #[default]
    GeneralInnermost,
    LeftmostInnermost,
    RightmostInnermost,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::GeneralInnermost => "innermost",
            Strategy::LeftmostInnermost => "leftmost",
            Strategy::RightmostInnermost => "rightmost",
        })
    }
}

/// A redex occurrence: position, index of the rule, matching substitution.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Redex {
    pub position: Position,
    pub rule: usize,
    pub sigma: Substitution,
}

/// Every redex of `t`, ordered by position then rule index.
pub fn redexes(trs: &Trs, t: &Term) -> Vec<Redex> {
    let mut out = Vec::new();
    for p in positions(t) {
        let sub = subterm_at(t, &p).expect("position from positions()");
        for (i, r) in trs.rules().iter().enumerate() {
            if let Some(sigma) = match_term(r.lhs(), sub) {
                out.push(Redex {
                    position: p.clone(),
                    rule: i,
                    sigma,
                });
            }
        }
    }
    out.sort();
    out
}

fn contract(trs: &Trs, t: &Term, r: &Redex) -> Term {
    let rhs = apply_substitution(trs.rules()[r.rule].rhs(), &r.sigma);
    replace_at(t, &r.position, rhs).expect("redex position is valid")
}

pub fn one_step(trs: &Trs, t: &Term) -> BTreeSet<Term> {
    redexes(trs, t).iter().map(|r| contract(trs, t, r)).collect()
}

/// Redexes allowed by `strat`: innermost ones, then the lexicographically
/// greatest (rightmost) or smallest (leftmost) position among them.
pub fn strategy_redexes(trs: &Trs, t: &Term, strat: Strategy) -> Vec<Redex> {
    let all = redexes(trs, t);
    let positions: BTreeSet<&Position> = all.iter().map(|r| &r.position).collect();
    let innermost: Vec<Redex> = all
        .iter()
        .filter(|r| {
            !positions
                .iter()
                .any(|p| *p != &r.position && r.position.is_prefix_of(p))
        })
        .cloned()
        .collect();
    let chosen = match strat {
        Strategy::GeneralInnermost => return innermost,
        Strategy::RightmostInnermost => innermost.iter().map(|r| &r.position).max().cloned(),
        Strategy::LeftmostInnermost => innermost.iter().map(|r| &r.position).min().cloned(),
    };
    match chosen {
        None => Vec::new(),
        Some(p) => innermost.into_iter().filter(|r| r.position == p).collect(),
    }
}

pub fn innermost_one_step(trs: &Trs, t: &Term, strat: Strategy) -> BTreeSet<Term> {
    strategy_redexes(trs, t, strat)
        .iter()
        .map(|r| contract(trs, t, r))
        .collect()
}

pub fn is_normal_form(trs: &Trs, t: &Term) -> bool {
    fn go(trs: &Trs, t: &Term) -> bool {
        if trs.rules().iter().any(|r| match_term(r.lhs(), t).is_some()) {
            return false;
        }
        t.args().iter().all(|a| go(trs, a))
    }
    go(trs, t)
}

/// Bounds for the brute-force oracles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bounds {
    pub max_steps: usize,
    pub max_size: usize,
}

impl Bounds {
    pub fn new(max_steps: usize, max_size: usize) -> Self {
        Bounds {
            max_steps,
            max_size,
        }
    }
}

/// Result of a bounded closure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reach {
    pub terms: BTreeSet<Term>,
    /// The frontier emptied within the step bound and no term was discarded.
    pub saturated: bool,
}

fn successors(trs: &Trs, t: &Term, strat: Option<Strategy>) -> BTreeSet<Term> {
    match strat {
        None => one_step(trs, t),
        Some(s) => innermost_one_step(trs, t, s),
    }
}

/// Breadth-first closure of `seeds` under one rewrite step (`strat = None`
/// means unrestricted rewriting), discarding terms larger than `max_size`.
pub fn bounded_reachable(
    trs: &Trs,
    seeds: &BTreeSet<Term>,
    strat: Option<Strategy>,
    bounds: Bounds,
) -> Reach {
    bfs(seeds, bounds, |t| successors(trs, t, strat))
}

fn bfs<F>(seeds: &BTreeSet<Term>, bounds: Bounds, expand: F) -> Reach
where
    F: Fn(&Term) -> BTreeSet<Term> + Sync + Send,
{
    let mut seen: BTreeSet<Term> = seeds.clone();
    let mut frontier: Vec<Term> = seeds.iter().cloned().collect();
    let mut discarded = false;
    let mut steps = 0;
    while !frontier.is_empty() && steps < bounds.max_steps {
        steps += 1;
        let expanded = par::map(&frontier, |t| expand(t));
        let mut next = BTreeSet::new();
        for succ in expanded {
            for s in succ {
                if s.size() > bounds.max_size {
                    discarded = true;
                } else if !seen.contains(&s) {
                    next.insert(s);
                }
            }
        }
        seen.extend(next.iter().cloned());
        frontier = next.into_iter().collect();
    }
    Reach {
        terms: seen,
        saturated: frontier.is_empty() && !discarded,
    }
}

/// Normal forms among the bounded reachable terms.
pub fn bounded_normal_forms(
    trs: &Trs,
    seeds: &BTreeSet<Term>,
    strat: Option<Strategy>,
    bounds: Bounds,
) -> BTreeSet<Term> {
    bounded_reachable(trs, seeds, strat, bounds)
        .terms
        .into_iter()
        .filter(|t| is_normal_form(trs, t))
        .collect()
}

/// Terms obtained from `t` by one equation application, in either
/// direction and at any position. Variables of the produced side that the
/// matched side does not bind range over ground terms of `sig`; results
/// larger than `max_size` are dropped.
pub fn equational_neighbours(
    sig: &Signature,
    eqs: &[Equation],
    t: &Term,
    max_size: usize,
) -> BTreeSet<Term> {
    let mut out = BTreeSet::new();
    let mut pool: Option<Vec<Vec<Term>>> = None;
    for p in positions(t) {
        let sub = subterm_at(t, &p).expect("valid position");
        let context = t.size() - sub.size();
        if context >= max_size {
            continue;
        }
        let room = max_size - context;
        for e in eqs {
            for (from, to) in [(&e.lhs, &e.rhs), (&e.rhs, &e.lhs)] {
                let Some(sigma) = match_term(from, sub) else {
                    continue;
                };
                let free: Vec<Var> = to
                    .vars()
                    .into_iter()
                    .filter(|v| !sigma.contains_key(v))
                    .collect();
                let mut emit = |s: &Substitution| {
                    let r = apply_substitution(to, s);
                    if r.size() <= room {
                        out.insert(replace_at(t, &p, r).expect("valid position"));
                    }
                };
                if free.is_empty() {
                    emit(&sigma);
                    continue;
                }
                let ground = pool.get_or_insert_with(|| ground_terms_by_size(sig, max_size));
                let candidates: Vec<Term> = ground[1..=room].iter().flatten().cloned().collect();
                let pools: Vec<&Vec<Term>> = free.iter().map(|_| &candidates).collect();
                for_each_product(&pools, |vals| {
                    let mut s2 = sigma.clone();
                    for (v, val) in free.iter().zip(vals) {
                        s2.insert(v.clone(), val.clone());
                    }
                    emit(&s2);
                });
            }
        }
    }
    out.remove(t);
    out
}

/// The equivalence class of `t` under `eqs`, restricted to terms of size at most `max_size`.
pub fn bounded_class(
    sig: &Signature,
    eqs: &[Equation],
    t: &Term,
    max_size: usize,
) -> BTreeSet<Term> {
    let mut seen = BTreeSet::new();
    seen.insert(t.clone());
    let mut frontier = vec![t.clone()];
    while !frontier.is_empty() {
        let expanded = par::map(&frontier, |u| equational_neighbours(sig, eqs, u, max_size));
        let mut next = Vec::new();
        for set in expanded {
            for u in set {
                if seen.insert(u.clone()) {
                    next.push(u);
                }
            }
        }
        next.sort();
        frontier = next;
    }
    seen
}

/// Bounded closure of `seeds` under rewriting modulo `eqs`: each term is
/// first closed under the equations, then rewritten.
pub fn bounded_reachable_modulo(
    trs: &Trs,
    eqs: &[Equation],
    seeds: &BTreeSet<Term>,
    strat: Option<Strategy>,
    bounds: Bounds,
) -> Reach {
    if eqs.is_empty() {
        return bounded_reachable(trs, seeds, strat, bounds);
    }
    let sig = trs.signature();
    let mut start = BTreeSet::new();
    for s in seeds {
        start.extend(bounded_class(sig, eqs, s, bounds.max_size));
    }
    bfs(&start, bounds, |t| {
        let mut out = BTreeSet::new();
        for u in successors(trs, t, strat) {
            if u.size() > bounds.max_size {
                out.insert(u);
                continue;
            }
            out.extend(bounded_class(sig, eqs, &u, bounds.max_size));
        }
        out
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex_sig() -> Signature {
        Signature::from_pairs(&[("n", 0), ("0", 0), ("s", 1), ("a", 1), ("f", 1), ("c", 2)]).unwrap()
    }

    fn app(sig: &Signature, name: &str, args: Vec<Term>) -> Term {
        sig.app(name, args).unwrap()
    }

    fn x(name: &str) -> Term {
        Term::var(name)
    }

    pub(crate) fn ex_trs() -> Trs {
        let s = ex_sig();
        let c = |a, b| app(&s, "c", vec![a, b]);
        let f = |a| app(&s, "f", vec![a]);
        let sc = |a| app(&s, "s", vec![a]);
        let ac = |a| app(&s, "a", vec![a]);
        let n = app(&s, "n", vec![]);
        let zero = app(&s, "0", vec![]);
        let rules = vec![
            Rule::new(f(n.clone()), n.clone()).unwrap(),
            Rule::new(f(c(sc(x("X")), x("Y"))), c(sc(x("X")), f(x("Y")))).unwrap(),
            Rule::new(f(c(ac(x("X")), x("Y"))), c(ac(x("X")), f(x("Y")))).unwrap(),
            Rule::new(f(c(zero, x("Y"))), f(x("Y"))).unwrap(),
            Rule::new(ac(sc(x("X"))), x("X")).unwrap(),
            Rule::new(sc(ac(x("X"))), x("X")).unwrap(),
        ];
        Trs::new(s.clone(), rules).unwrap()
    }

    fn ab_trs() -> (Trs, Term) {
        let s = Signature::from_pairs(&[("a", 0), ("b", 0), ("c", 0), ("f", 2)]).unwrap();
        let a = app(&s, "a", vec![]);
        let b = app(&s, "b", vec![]);
        let c = app(&s, "c", vec![]);
        let trs = Trs::new(
            s.clone(),
            vec![Rule::new(a.clone(), b).unwrap(), Rule::new(c.clone(), c.clone()).unwrap()],
        )
        .unwrap();
        let fac = app(&s, "f", vec![a, c]);
        (trs, fac)
    }

    fn parse(s: &str) -> Term {
        crate::timbuk::parse_term(&ex_sig(), &["X", "Y"], s).unwrap()
    }

    fn set(items: &[&str]) -> BTreeSet<Term> {
        items.iter().map(|s| parse(s)).collect()
    }

    #[test]
    fn rule_validation() {
        let s = ex_sig();
        assert!(matches!(
            Rule::new(x("X"), app(&s, "n", vec![])),
            Err(RewriteError::VariableLhs(_))
        ));
        assert!(matches!(
            Rule::new(app(&s, "n", vec![]), x("X")),
            Err(RewriteError::UnboundRhsVariable { .. })
        ));
    }

    #[test]
    fn redexes_of_running_example() {
        let trs = ex_trs();
        let t = parse("f(c(a(s(0)),n))");
        let rs = redexes(&trs, &t);
        assert_eq!(rs.len(), 2);
        assert_eq!(rs[0].position, Position::root());
        assert_eq!(rs[0].rule, 2);
        assert_eq!(rs[0].sigma.get(&Var::new("X")), Some(&parse("s(0)")));
        assert_eq!(rs[0].sigma.get(&Var::new("Y")), Some(&parse("n")));
        assert_eq!(rs[1].position, Position::new(vec![1, 1]));
        assert_eq!(rs[1].rule, 4);
        assert!(redexes(&trs, &parse("n")).is_empty());
        let (ab, fac) = ab_trs();
        let rs = redexes(&ab, &fac);
        assert_eq!(
            rs.iter().map(|r| (r.position.clone(), r.rule)).collect::<Vec<_>>(),
            vec![(Position::new(vec![1]), 0), (Position::new(vec![2]), 1)]
        );
    }

    #[test]
    fn one_step_and_innermost() {
        let trs = ex_trs();
        let t = parse("f(c(a(s(0)),n))");
        assert_eq!(one_step(&trs, &t), set(&["f(c(0,n))", "c(a(s(0)),f(n))"]));
        assert!(one_step(&trs, &parse("n")).is_empty());
        assert_eq!(
            innermost_one_step(&trs, &t, Strategy::GeneralInnermost),
            set(&["f(c(0,n))"])
        );
        let (ab, fac) = ab_trs();
        let all: Vec<String> = one_step(&ab, &fac).iter().map(|t| t.to_string()).collect();
        assert_eq!(all, vec!["f(a,c)", "f(b,c)"]);
        let right: Vec<String> = innermost_one_step(&ab, &fac, Strategy::RightmostInnermost)
            .iter()
            .map(|t| t.to_string())
            .collect();
        assert_eq!(right, vec!["f(a,c)"]);
        let left: Vec<String> = innermost_one_step(&ab, &fac, Strategy::LeftmostInnermost)
            .iter()
            .map(|t| t.to_string())
            .collect();
        assert_eq!(left, vec!["f(b,c)"]);
        assert_eq!(
            innermost_one_step(&ab, &fac, Strategy::GeneralInnermost).len(),
            2
        );
    }

    #[test]
    fn normal_forms() {
        let trs = ex_trs();
        assert!(!is_normal_form(&trs, &parse("a(s(0))")));
        assert!(is_normal_form(&trs, &parse("c(0,n)")));
        assert!(is_normal_form(&trs, &parse("n")));
    }

    #[test]
    fn bounded_oracles_on_running_example() {
        let trs = ex_trs();
        let seeds = set(&["f(c(a(s(0)),n))"]);
        let r = bounded_reachable(&trs, &seeds, Some(Strategy::GeneralInnermost), Bounds::new(50, 20));
        assert!(r.saturated);
        assert_eq!(r.terms, set(&["f(c(a(s(0)),n))", "f(c(0,n))", "f(n)", "n"]));
        let nf = bounded_normal_forms(&trs, &seeds, Some(Strategy::GeneralInnermost), Bounds::new(50, 20));
        assert_eq!(nf, set(&["n"]));
        let empty = bounded_reachable(&trs, &BTreeSet::new(), None, Bounds::new(5, 5));
        assert!(empty.saturated && empty.terms.is_empty());
        assert_eq!(bounded_normal_forms(&trs, &set(&["n"]), None, Bounds::new(5, 5)), set(&["n"]));
        let m = bounded_reachable_modulo(&trs, &[], &set(&["f(n)"]), Some(Strategy::GeneralInnermost), Bounds::new(5, 5));
        assert_eq!(m.terms, set(&["f(n)", "n"]));
        assert!(m.saturated);
    }

    #[test]
    fn bounded_class_examples() {
        let s = ex_sig();
        let sx = app(&s, "s", vec![x("X")]);
        let ssx = app(&s, "s", vec![sx.clone()]);
        let eqs = vec![Equation::new(ssx, sx)];
        let got = bounded_class(&s, &eqs, &parse("s(s(0))"), 5);
        assert_eq!(got, set(&["s(0)", "s(s(0))", "s(s(s(0)))", "s(s(s(s(0))))"]));
        assert_eq!(bounded_class(&s, &[], &parse("n"), 4), set(&["n"]));
        let ab = Signature::from_pairs(&[("a", 0), ("b", 0)]).unwrap();
        let a = app(&ab, "a", vec![]);
        let b = app(&ab, "b", vec![]);
        let got = bounded_class(&ab, &[Equation::new(a.clone(), b.clone())], &a, 3);
        assert_eq!(got, [a, b].into_iter().collect());
    }

    #[test]
    fn modulo_oracle_adds_classes() {
        let s = Signature::from_pairs(&[("a", 0), ("b", 0), ("c", 0)]).unwrap();
        let [a, b, c] = ["a", "b", "c"].map(|n| app(&s, n, vec![]));
        let trs = Trs::new(s.clone(), vec![Rule::new(a.clone(), b.clone()).unwrap()]).unwrap();
        let eqs = vec![Equation::new(b.clone(), c.clone())];
        let r = bounded_reachable_modulo(
            &trs,
            &eqs,
            &[a.clone()].into_iter().collect(),
            Some(Strategy::GeneralInnermost),
            Bounds::new(10, 3),
        );
        assert!(r.saturated);
        assert_eq!(r.terms, [a, b, c].into_iter().collect());
    }

    #[test]
    fn unbound_equation_variables_are_instantiated() {
        let s = Signature::from_pairs(&[("nil", 0), ("z", 0), ("cons", 2)]).unwrap();
        let cons = |a, b| app(&s, "cons", vec![a, b]);
        let eqs = vec![Equation::new(
            cons(x("X"), cons(x("Y"), x("Z"))),
            cons(x("X"), x("Z")),
        )];
        let z = app(&s, "z", vec![]);
        let nil = app(&s, "nil", vec![]);
        let t = cons(z.clone(), nil.clone());
        let class = bounded_class(&s, &eqs, &t, 5);
        assert!(class.contains(&cons(z.clone(), cons(z.clone(), nil.clone()))));
        assert!(class.contains(&cons(z.clone(), cons(nil.clone(), nil.clone()))));
        assert!(class.iter().all(|u| u.size() <= 5));
    }
}
