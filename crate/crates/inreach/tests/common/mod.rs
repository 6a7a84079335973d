//! Helpers shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::Rng;

use inreach::automata::{StateId, StateLabel, TreeAutomaton};
use inreach::rewriting::{Equation, Rule, Trs};
use inreach::terms::{Signature, Symbol, Term};
use inreach::timbuk::{parse_spec, parse_term, Specification};

pub fn fixture(name: &str) -> Specification {
    let path = format!("{}/../../fixtures/{}", env!("CARGO_MANIFEST_DIR"), name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    parse_spec(&text).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn term(sig: &Signature, text: &str) -> Term {
    parse_term(sig, &[], text).unwrap()
}

pub fn equation(sig: &Signature, vars: &[&str], lhs: &str, rhs: &str) -> Equation {
    Equation::new(parse_term(sig, vars, lhs).unwrap(), parse_term(sig, vars, rhs).unwrap())
}

/// Automaton recognizing exactly `{t}`, one state per distinct subterm.
pub fn singleton(sig: &Signature, t: &Term) -> TreeAutomaton {
    fn go(a: &mut TreeAutomaton, seen: &mut BTreeMap<Term, StateId>, t: &Term) -> StateId {
        if let Some(&q) = seen.get(t) {
            return q;
        }
        let Term::App(f, args) = t else {
            panic!("ground terms only")
        };
        let qs: Vec<StateId> = args.iter().map(|s| go(a, seen, s)).collect();
        let q = a.add_state(StateLabel::Name(format!("q{}", seen.len())));
        a.add_delta(f.clone(), qs, q);
        seen.insert(t.clone(), q);
        q
    }
    let mut a = TreeAutomaton::new(sig.clone());
    let q = go(&mut a, &mut BTreeMap::new(), t);
    a.set_final(q);
    a
}

/// A random left-linear TRS with a ground seed term.
#[derive(Debug, Clone)]
pub struct FuzzCase {
    pub trs: Trs,
    pub seed: Term,
}

impl FuzzCase {
    pub fn signature(&self) -> &Signature {
        self.trs.signature()
    }

    pub fn a_init(&self) -> TreeAutomaton {
        singleton(self.signature(), &self.seed)
    }
}

const NAMES: [&str; 3] = ["a", "f", "g"];

fn random_ground(rng: &mut StdRng, syms: &[Symbol], depth: usize) -> Term {
    let pool: Vec<&Symbol> = if depth == 0 {
        syms.iter().filter(|s| s.arity() == 0).collect()
    } else {
        syms.iter().collect()
    };
    let f = pool[rng.gen_range(0..pool.len())].clone();
    let args = (0..f.arity()).map(|_| random_ground(rng, syms, depth - 1)).collect();
    Term::App(f, args)
}

fn random_pattern(rng: &mut StdRng, syms: &[Symbol], depth: usize, vars: &mut Vec<String>) -> Term {
    let f = syms[rng.gen_range(0..syms.len())].clone();
    let args = (0..f.arity())
        .map(|_| {
            if depth == 0 || rng.gen_bool(0.5) {
                let v = format!("X{}", vars.len() + 1);
                vars.push(v.clone());
                Term::var(&v)
            } else {
                random_pattern(rng, syms, depth - 1, vars)
            }
        })
        .collect();
    Term::App(f, args)
}

fn random_rhs(rng: &mut StdRng, syms: &[Symbol], depth: usize, vars: &[String]) -> Term {
    if !vars.is_empty() && (depth == 0 || rng.gen_bool(0.3)) {
        return Term::var(&vars[rng.gen_range(0..vars.len())]);
    }
    let pool: Vec<&Symbol> = if depth == 0 {
        syms.iter().filter(|s| s.arity() == 0).collect()
    } else {
        syms.iter().collect()
    };
    let f = pool[rng.gen_range(0..pool.len())].clone();
    let args = (0..f.arity())
        .map(|_| random_rhs(rng, syms, depth.saturating_sub(1), vars))
        .collect();
    Term::App(f, args)
}

/// At most 3 symbols of arity at most 2 (one constant guaranteed) and at
/// most 4 left-linear rules.
pub fn random_case(rng: &mut StdRng) -> FuzzCase {
    let n = rng.gen_range(1..=3);
    let syms: Vec<Symbol> = (0..n)
        .map(|i| Symbol::new(NAMES[i], if i == 0 { 0 } else { rng.gen_range(0..=2) }))
        .collect();
    let sig = Signature::from_symbols(syms.iter().cloned()).unwrap();
    let n_rules = rng.gen_range(1..=4);
    let rules = (0..n_rules)
        .map(|_| {
            let mut vars = Vec::new();
            let lhs = random_pattern(rng, &syms, 2, &mut vars);
            let rhs = random_rhs(rng, &syms, 2, &vars);
            Rule::new(lhs, rhs).unwrap()
        })
        .collect();
    let trs = Trs::new(sig, rules).unwrap();
    let seed = random_ground(rng, &syms, 2);
    FuzzCase { trs, seed }
}
