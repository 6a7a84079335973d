//! Innermost equational tree automata completion.
//!
//! States of the working automaton are pairs `⟨q,p⟩`: `q` is an
//! approximation state (from the initial automaton or created fresh), `p` is
//! the state of the normal-form automaton reached by the same terms.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::airr::{build_airr, Airr, AirrError};
use crate::automata::{Color, Config, Delta, Epsilon, StateId, StateLabel, Transition, TreeAutomaton};
use crate::par;
use crate::rewriting::{Equation, Strategy, Trs};
use crate::terms::{for_each_product, Symbol, Term, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompletionError {
    #[error(transparent)]
    Airr(#[from] AirrError),
    #[error("initial automaton must not contain epsilon transitions")]
    EpsilonInput,
    #[error("initial automaton and TRS use different signatures")]
    SignatureMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("state limit of {0} exceeded")]
pub struct StateLimitExceeded(pub usize);

/// Variable-to-state assignment.
pub type StateSubst = BTreeMap<Var, StateId>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CriticalPair {
    /// Index of the rule in the TRS.
    pub rule: usize,
    pub sigma: StateSubst,
    pub target: StateId,
    /// Argument states of one delta on an innermost recognition path.
    pub witness: Vec<StateId>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct EquationSituation {
    /// Index of the equation in the list given to the search.
    pub equation: usize,
    pub theta: StateSubst,
    pub left: StateId,
    pub right: StateId,
}

/// Transitions usable when matching equation sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum EquationMatching {
    /// Every transition, R-transitions included.
    #[default]
    Full,
    /// Deltas and E-transitions only.
    WithoutR,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Limits {
    pub max_steps: usize,
    pub max_states: usize,
}

impl Limits {
    pub fn new(max_steps: usize, max_states: usize) -> Self {
        Limits {
            max_steps,
            max_states,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Fixpoint,
    StepLimit,
    StateLimit,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Fixpoint => "FIXPOINT",
            Outcome::StepLimit => "LIMIT-STEPS",
            Outcome::StateLimit => "LIMIT-STATES",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Stats {
    pub steps: usize,
    pub critical_pairs: usize,
    pub equations: usize,
}

#[derive(Debug, Clone)]
enum Work {
    Delta(Delta),
    Epsilon(Epsilon),
    Variant(StateId),
}

type Slots = Vec<(Var, StateId)>;

/// Bottom-up matcher of patterns against automaton states.
struct Matcher<'a> {
    a: &'a TreeAutomaton,
    e_only: bool,
    memo: HashMap<(usize, StateId), Vec<Slots>>,
}

impl<'a> Matcher<'a> {
    /// Derivations use every transition, or only deltas and E-transitions.
    fn new(a: &'a TreeAutomaton, e_only: bool) -> Self {
        Matcher {
            a,
            e_only,
            memo: HashMap::new(),
        }
    }

    fn up(&self, q: StateId) -> &'a BTreeSet<StateId> {
        if self.e_only {
            self.a.e_closure(q)
        } else {
            self.a.closure(q)
        }
    }

    fn down(&self, q: StateId) -> &'a BTreeSet<StateId> {
        if self.e_only {
            self.a.e_co_closure(q)
        } else {
            self.a.co_closure(q)
        }
    }

    /// All ways `pat` with variables read as states can reach `q`.
    fn match_into(&mut self, pat: &Term, q: StateId) -> Vec<Slots> {
        let (g, args) = match pat {
            Term::Var(x) => return vec![vec![(x.clone(), q)]],
            Term::App(g, args) => (g, args),
        };
        let key = (pat as *const Term as usize, q);
        if let Some(r) = self.memo.get(&key) {
            return r.clone();
        }
        let mut out = BTreeSet::new();
        for &s in self.down(q) {
            for d in self.a.deltas_into(s) {
                if d.symbol == *g {
                    for slots in self.match_args(args, &d.args) {
                        out.insert(slots);
                    }
                }
            }
        }
        let out: Vec<Slots> = out.into_iter().collect();
        self.memo.insert(key, out.clone());
        out
    }

    fn match_args(&mut self, pats: &[Term], qs: &[StateId]) -> Vec<Slots> {
        let mut per_arg = Vec::with_capacity(pats.len());
        for (p, &q) in pats.iter().zip(qs) {
            let m = self.match_into(p, q);
            if m.is_empty() {
                return Vec::new();
            }
            per_arg.push(m);
        }
        let pools: Vec<&Vec<Slots>> = per_arg.iter().collect();
        let mut out = Vec::new();
        for_each_product(&pools, |parts| out.push(parts.concat()));
        out
    }

    /// `(slots, target)` for every way `side` is recognized.
    fn results(&mut self, side: &Term) -> Vec<(Slots, StateId)> {
        let Term::App(g, args) = side else {
            return Vec::new();
        };
        let mut out = BTreeSet::new();
        for d in self.a.deltas_with_symbol(g) {
            for slots in self.match_args(args, &d.args) {
                for &t in self.up(d.target) {
                    out.insert((slots.clone(), t));
                }
            }
        }
        out.into_iter().collect()
    }
}

/// The evolving pair automaton.
#[derive(Debug, Clone)]
pub struct CompletionState {
    automaton: TreeAutomaton,
    airr: Airr,
    trs: Trs,
    strategy: Strategy,
    matching: EquationMatching,
    left_names: Vec<String>,
    left_index: HashMap<String, u32>,
    init_finals: BTreeSet<u32>,
    left_of: Vec<u32>,
    right_of: Vec<StateId>,
    pairs: HashMap<(u32, StateId), StateId>,
    variants: Vec<Vec<StateId>>,
    original_states: BTreeSet<StateId>,
    fresh: usize,
    stats: Stats,
    trace: Vec<String>,
    work: VecDeque<Work>,
}

impl CompletionState {
    pub fn automaton(&self) -> &TreeAutomaton {
        &self.automaton
    }

    pub fn airr(&self) -> &Airr {
        &self.airr
    }

    pub fn trs(&self) -> &Trs {
        &self.trs
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn equation_matching(&self) -> EquationMatching {
        self.matching
    }

    pub fn set_equation_matching(&mut self, m: EquationMatching) {
        self.matching = m;
    }

    fn e_only(&self) -> bool {
        self.matching == EquationMatching::WithoutR
    }

    fn up(&self, q: StateId, e_only: bool) -> &BTreeSet<StateId> {
        if e_only {
            self.automaton.e_closure(q)
        } else {
            self.automaton.closure(q)
        }
    }

    fn down(&self, q: StateId, e_only: bool) -> &BTreeSet<StateId> {
        if e_only {
            self.automaton.e_co_closure(q)
        } else {
            self.automaton.co_closure(q)
        }
    }

    pub fn original_states(&self) -> &BTreeSet<StateId> {
        &self.original_states
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    pub fn trace(&self) -> &[String] {
        &self.trace
    }

    pub fn red(&self) -> StateId {
        self.airr.red
    }

    /// Name of the approximation component of `q`.
    pub fn left_name(&self, q: StateId) -> &str {
        &self.left_names[self.left_of[q.index()] as usize]
    }

    /// Normal-form-automaton component of `q`.
    pub fn right(&self, q: StateId) -> StateId {
        self.right_of[q.index()]
    }

    pub fn is_red(&self, q: StateId) -> bool {
        self.right(q) == self.airr.red
    }

    fn left(&self, q: StateId) -> u32 {
        self.left_of[q.index()]
    }

    fn add_left(&mut self, name: String) -> u32 {
        let id = self.left_names.len() as u32;
        self.left_index.insert(name.clone(), id);
        self.left_names.push(name);
        self.variants.push(Vec::new());
        id
    }

    fn pair(&mut self, left: u32, right: StateId) -> StateId {
        if let Some(&q) = self.pairs.get(&(left, right)) {
            return q;
        }
        let label = StateLabel::Pair(
            self.left_names[left as usize].clone(),
            self.airr.automaton.label(right).to_string(),
        );
        let q = self.automaton.add_state(label);
        self.left_of.push(left);
        self.right_of.push(right);
        self.pairs.insert((left, right), q);
        if right != self.airr.red {
            self.variants[left as usize].push(q);
            self.work.push_back(Work::Variant(q));
        }
        q
    }

    fn fresh_state(&mut self, right: StateId) -> StateId {
        let name = loop {
            let n = format!("qN{}", self.fresh);
            self.fresh += 1;
            if !self.left_index.contains_key(&n) {
                break n;
            }
        };
        let l = self.add_left(name);
        self.pair(l, right)
    }

    fn add_delta(&mut self, f: Symbol, args: Vec<StateId>, target: StateId) -> bool {
        let d = Delta {
            symbol: f.clone(),
            args: args.clone(),
            target,
        };
        let new = self.automaton.add_delta(f, args, target);
        if new {
            self.work.push_back(Work::Delta(d));
        }
        new
    }

    fn add_epsilon(&mut self, source: StateId, target: StateId, color: Color) -> bool {
        let new = self.automaton.add_epsilon(source, target, color);
        if new {
            self.work.push_back(Work::Epsilon(Epsilon {
                source,
                target,
                color,
            }));
        }
        new
    }

    /// Airr successor of `f` over the right components of `args`.
    fn successor(&self, f: &Symbol, args: &[StateId]) -> StateId {
        let rights: Vec<StateId> = args.iter().map(|&a| self.right(a)).collect();
        self.airr.successor(f, &rights)
    }

    /// Propagates every red-state transition to the non-red variants of its
    /// states until nothing new appears.
    fn saturate(&mut self) {
        let red = self.airr.red;
        while let Some(item) = self.work.pop_front() {
            match item {
                Work::Variant(v) => {
                    if let Some(&r) = self.pairs.get(&(self.left(v), red)) {
                        let ds: Vec<Delta> = self.automaton.deltas_with_arg(r).to_vec();
                        self.work.extend(ds.into_iter().map(Work::Delta));
                        let es: Vec<Epsilon> = self.automaton.epsilons_from(r).to_vec();
                        self.work.extend(es.into_iter().map(Work::Epsilon));
                    }
                }
                Work::Epsilon(e) => {
                    if self.right(e.source) != red {
                        continue;
                    }
                    let tl = self.left(e.target);
                    let vs = self.variants[self.left(e.source) as usize].clone();
                    for v in vs {
                        let dst = self.pair(tl, self.right(v));
                        self.add_epsilon(v, dst, e.color);
                    }
                }
                Work::Delta(d) => self.copy_delta(&d),
            }
        }
    }

    fn copy_delta(&mut self, d: &Delta) {
        let red = self.airr.red;
        let n = d.args.len();
        let tl = self.left(d.target);
        for i in 0..n {
            if self.right(d.args[i]) != red {
                continue;
            }
            let vs = self.variants[self.left(d.args[i]) as usize].clone();
            if vs.is_empty() {
                continue;
            }
            let mut pools: Vec<Vec<StateId>> = d.args.iter().map(|&a| vec![a]).collect();
            pools[i] = vs;
            let constrained: Vec<usize> = match self.strategy {
                Strategy::GeneralInnermost => Vec::new(),
                Strategy::RightmostInnermost => (i + 1..n).collect(),
                Strategy::LeftmostInnermost => (0..i).collect(),
            };
            let mut blocked = false;
            for j in constrained {
                if self.right(d.args[j]) == red {
                    let alt = self.variants[self.left(d.args[j]) as usize].clone();
                    if alt.is_empty() {
                        blocked = true;
                        break;
                    }
                    pools[j] = alt;
                }
            }
            if blocked {
                continue;
            }
            let refs: Vec<&Vec<StateId>> = pools.iter().collect();
            let mut combos = Vec::new();
            for_each_product(&refs, |c| combos.push(c.to_vec()));
            for args in combos {
                let p = self.successor(&d.symbol, &args);
                let target = self.pair(tl, p);
                self.add_delta(d.symbol.clone(), args, target);
            }
        }
    }

    fn cps_for_rule(&self, ri: usize) -> Vec<CriticalPair> {
        let rule = &self.trs.rules()[ri];
        let (f, largs) = match rule.lhs() {
            Term::App(f, args) => (f, args),
            Term::Var(_) => return Vec::new(),
        };
        let red = self.airr.red;
        let mut m = Matcher::new(&self.automaton, false);
        let mut found: BTreeMap<(StateSubst, StateId), Vec<StateId>> = BTreeMap::new();
        let mut rhs_lefts: HashMap<StateSubst, BTreeSet<u32>> = HashMap::new();
        for d in self.automaton.deltas_with_symbol(f) {
            if self.right(d.target) != red || d.args.iter().any(|&a| self.right(a) == red) {
                continue;
            }
            for slots in m.match_args(largs, &d.args) {
                let sigma: StateSubst = slots.into_iter().collect();
                let lefts = rhs_lefts.entry(sigma.clone()).or_insert_with(|| {
                    let c = Config::instantiate(rule.rhs(), &sigma).expect("rhs variables bound");
                    self.automaton
                        .derive_states(&c)
                        .expect("symbols in signature")
                        .into_iter()
                        .map(|q| self.left(q))
                        .collect()
                });
                for &t in self.automaton.closure(d.target) {
                    if !lefts.contains(&self.left(t)) {
                        let w = found.entry((sigma.clone(), t)).or_insert_with(|| d.args.clone());
                        if d.args < *w {
                            *w = d.args.clone();
                        }
                    }
                }
            }
        }
        found
            .into_iter()
            .map(|((sigma, target), witness)| CriticalPair {
                rule: ri,
                sigma,
                target,
                witness,
            })
            .collect()
    }

    /// Every innermost critical pair, ordered by rule, substitution, then target.
    pub fn find_critical_pairs(&self) -> Vec<CriticalPair> {
        let idx: Vec<usize> = (0..self.trs.rules().len()).collect();
        par::map(&idx, |&ri| self.cps_for_rule(ri))
            .into_iter()
            .flatten()
            .collect()
    }

    /// True if `rσ` does not yet reach any state with the target's left component.
    pub fn is_critical(&self, cp: &CriticalPair) -> bool {
        let rule = &self.trs.rules()[cp.rule];
        let Ok(c) = Config::instantiate(rule.rhs(), &cp.sigma) else {
            return false;
        };
        let tl = self.left(cp.target);
        !self
            .automaton
            .derive_states(&c)
            .map(|s| s.iter().any(|&q| self.left(q) == tl))
            .unwrap_or(true)
    }

    fn norm_sub(&mut self, c: &Config, added: &mut Vec<Transition>) -> StateId {
        match c {
            Config::State(q) => *q,
            Config::App(f, args) => {
                let qs: Vec<StateId> = args.iter().map(|a| self.norm_sub(a, added)).collect();
                if let Some(&t) = self.automaton.targets(f, &qs).and_then(|s| s.iter().next()) {
                    return t;
                }
                self.top(f, qs, added)
            }
        }
    }

    fn top(&mut self, f: &Symbol, qs: Vec<StateId>, added: &mut Vec<Transition>) -> StateId {
        let p = self.successor(f, &qs);
        let s = self.fresh_state(p);
        self.add_delta(f.clone(), qs.clone(), s);
        added.push(Transition::Delta(Delta {
            symbol: f.clone(),
            args: qs,
            target: s,
        }));
        s
    }

    /// Adds transitions so that `c` reaches a fresh state, reusing existing
    /// transitions for proper subconfigurations. A bare state is returned as is.
    pub fn normalize(&mut self, c: &Config) -> (StateId, Vec<Transition>) {
        let mut added = Vec::new();
        let q = match c {
            Config::State(q) => *q,
            Config::App(f, args) => {
                let qs: Vec<StateId> = args.iter().map(|a| self.norm_sub(a, &mut added)).collect();
                self.top(f, qs, &mut added)
            }
        };
        (q, added)
    }

    /// Closes the square of `cp` and propagates the result into every context.
    pub fn resolve_critical_pair(&mut self, cp: &CriticalPair) {
        let rule = &self.trs.rules()[cp.rule];
        let c = Config::instantiate(rule.rhs(), &cp.sigma).expect("rhs variables bound");
        let (src, _) = self.normalize(&c);
        let dst = self.pair(self.left(cp.target), self.right(src));
        self.add_epsilon(src, dst, Color::R);
        self.saturate();
        self.stats.critical_pairs += 1;
    }

    /// Every situation in which an equation of `eqs` can be applied.
    pub fn find_equation_situations(&self, eqs: &[Equation]) -> Vec<EquationSituation> {
        let idx: Vec<usize> = (0..eqs.len()).collect();
        let mut out: Vec<EquationSituation> = par::map(&idx, |&ei| self.situations_for(ei, &eqs[ei]))
            .into_iter()
            .flatten()
            .collect();
        out.sort();
        out.dedup();
        out
    }

    fn common_pred(&self, states: &[StateId], e_only: bool) -> Option<BTreeSet<StateId>> {
        let mut it = states.iter();
        let mut acc = self.down(*it.next()?, e_only).clone();
        for &s in it {
            acc.retain(|x| self.down(s, e_only).contains(x));
            if acc.is_empty() {
                return None;
            }
        }
        Some(acc)
    }

    fn theta(&self, slots: &[(Var, StateId)], e_only: bool) -> Option<StateSubst> {
        let mut grouped: BTreeMap<&Var, Vec<StateId>> = BTreeMap::new();
        for (v, q) in slots {
            grouped.entry(v).or_default().push(*q);
        }
        let mut theta = StateSubst::new();
        for (v, qs) in grouped {
            let preds = self.common_pred(&qs, e_only)?;
            theta.insert(v.clone(), *preds.iter().next()?);
        }
        Some(theta)
    }

    fn situations_for(&self, ei: usize, e: &Equation) -> Vec<EquationSituation> {
        let e_only = self.e_only();
        let mut m = Matcher::new(&self.automaton, e_only);
        let mut out = Vec::new();
        let ok = |q1: StateId, q2: StateId| {
            q1 != q2 && self.right(q1) == self.right(q2) && !self.automaton.e_equivalent(q1, q2)
        };
        match (&e.lhs, &e.rhs) {
            (Term::Var(_), Term::Var(_)) => {}
            (Term::App(..), Term::App(..)) => {
                let r1 = m.results(&e.lhs);
                let r2 = m.results(&e.rhs);
                let mut by_right: HashMap<StateId, Vec<&(Slots, StateId)>> = HashMap::new();
                for r in &r2 {
                    by_right.entry(self.right(r.1)).or_default().push(r);
                }
                for (s1, t1) in &r1 {
                    for (s2, t2) in by_right.get(&self.right(*t1)).into_iter().flatten() {
                        if !ok(*t1, *t2) {
                            continue;
                        }
                        let slots: Slots = s1.iter().chain(s2.iter()).cloned().collect();
                        if let Some(theta) = self.theta(&slots, e_only) {
                            out.push(EquationSituation {
                                equation: ei,
                                theta,
                                left: *t1,
                                right: *t2,
                            });
                        }
                    }
                }
            }
            (side, Term::Var(x)) | (Term::Var(x), side) => {
                let var_left = e.lhs.is_var();
                for (slots, t1) in m.results(side) {
                    let Some(mut theta) = self.theta(&slots, e_only) else {
                        continue;
                    };
                    let own: Vec<StateId> =
                        slots.iter().filter(|(v, _)| v == x).map(|(_, q)| *q).collect();
                    let preds: BTreeSet<StateId> = if own.is_empty() {
                        self.automaton.states().collect()
                    } else {
                        match self.common_pred(&own, e_only) {
                            Some(p) => p,
                            None => continue,
                        }
                    };
                    let mut cand: BTreeMap<StateId, StateId> = BTreeMap::new();
                    for &t in &preds {
                        for &q2 in self.up(t, e_only) {
                            cand.entry(q2).or_insert(t);
                        }
                    }
                    for (q2, t) in cand {
                        if !ok(t1, q2) {
                            continue;
                        }
                        theta.insert(x.clone(), t);
                        let (left, right) = if var_left { (q2, t1) } else { (t1, q2) };
                        out.push(EquationSituation {
                            equation: ei,
                            theta: theta.clone(),
                            left,
                            right,
                        });
                    }
                }
            }
        }
        out
    }

    /// Links the two states of `sit` by E-edges in both directions, for every
    /// shared right component.
    pub fn apply_equation(&mut self, sit: &EquationSituation) {
        let (l1, l2) = (self.left(sit.left), self.left(sit.right));
        self.add_epsilon(sit.left, sit.right, Color::E);
        self.add_epsilon(sit.right, sit.left, Color::E);
        let a: Vec<StateId> = self.pairs_with_left(l1);
        for q1 in a {
            if let Some(&q2) = self.pairs.get(&(l2, self.right(q1))) {
                self.add_epsilon(q1, q2, Color::E);
                self.add_epsilon(q2, q1, Color::E);
            }
        }
        self.saturate();
        self.stats.equations += 1;
    }

    fn pairs_with_left(&self, l: u32) -> Vec<StateId> {
        let mut v = self.variants[l as usize].clone();
        if let Some(&r) = self.pairs.get(&(l, self.airr.red)) {
            v.push(r);
        }
        v.sort();
        v
    }

    /// One completion step: resolve the critical pairs present at entry, then
    /// apply equations until no situation remains.
    pub fn step(&mut self, eqs: &[Equation], max_states: usize) -> Result<(), StateLimitExceeded> {
        let cps = self.find_critical_pairs();
        self.step_with(cps, eqs, max_states)
    }

    fn step_with(
        &mut self,
        cps: Vec<CriticalPair>,
        eqs: &[Equation],
        max_states: usize,
    ) -> Result<(), StateLimitExceeded> {
        let (cp0, eq0) = (self.stats.critical_pairs, self.stats.equations);
        self.stats.steps += 1;
        let mut result = Ok(());
        for cp in &cps {
            if !self.is_critical(cp) {
                continue;
            }
            self.resolve_critical_pair(cp);
            if self.automaton.num_states() > max_states {
                result = Err(StateLimitExceeded(max_states));
                break;
            }
        }
        if result.is_ok() && !eqs.is_empty() {
            loop {
                let sits = self.find_equation_situations(eqs);
                let mut applied = false;
                for s in &sits {
                    if !self.automaton.e_equivalent(s.left, s.right) {
                        self.apply_equation(s);
                        applied = true;
                    }
                }
                if !applied {
                    break;
                }
                if self.automaton.num_states() > max_states {
                    result = Err(StateLimitExceeded(max_states));
                    break;
                }
            }
        }
        self.trace.push(format!(
            "step={} cp-solved={} eq-applied={} states={} transitions={}",
            self.stats.steps,
            self.stats.critical_pairs - cp0,
            self.stats.equations - eq0,
            self.automaton.num_states(),
            self.automaton.num_transitions()
        ));
        result
    }

    /// True when every transition agrees with the normal-form automaton.
    pub fn check_consistency(&self) -> bool {
        self.automaton
            .deltas()
            .iter()
            .all(|d| self.successor(&d.symbol, &d.args) == self.right(d.target))
            && self
                .automaton
                .epsilons()
                .iter()
                .all(|e| self.right(e.source) == self.right(e.target))
    }

    /// The pair automaton with finals `⟨q,p⟩` for every initially final `q`.
    pub fn reachable_view(&self) -> TreeAutomaton {
        let finals = self
            .automaton
            .states()
            .filter(|&q| self.init_finals.contains(&self.left(q)))
            .collect();
        self.automaton.with_finals(finals)
    }

    /// Left projection of the pair automaton with the initial final states.
    /// Recognizes a superset of [`Self::reachable_view`].
    pub fn projected_view(&self) -> TreeAutomaton {
        let proj = self
            .automaton
            .project_left()
            .expect("completion states are pairs");
        let finals = self
            .init_finals
            .iter()
            .filter_map(|&l| proj.state(&StateLabel::Name(self.left_names[l as usize].clone())))
            .collect();
        proj.with_finals(finals)
    }

    /// The pair automaton with finals `⟨q,p⟩`, `q` initially final and `p` not red.
    pub fn normalized_view(&self) -> TreeAutomaton {
        let finals = self
            .automaton
            .states()
            .filter(|&q| self.init_finals.contains(&self.left(q)) && !self.is_red(q))
            .collect();
        self.automaton.with_finals(finals)
    }
}

/// A state of `A_init` paired with a state of Airr.
type Product = (StateId, StateId);

/// Builds the accessible part of `A_init × Airr(R)`.
pub fn init(a_init: &TreeAutomaton, trs: &Trs, strategy: Strategy) -> Result<CompletionState, CompletionError> {
    if !a_init.epsilons().is_empty() {
        return Err(CompletionError::EpsilonInput);
    }
    if a_init.signature() != trs.signature() {
        return Err(CompletionError::SignatureMismatch);
    }
    let airr = build_airr(trs)?;
    let mut reached: BTreeSet<(StateId, StateId)> = BTreeSet::new();
    let mut by_left: Vec<BTreeSet<StateId>> = vec![BTreeSet::new(); a_init.num_states()];
    let mut edges: BTreeSet<(Symbol, Vec<Product>, Product)> = BTreeSet::new();
    loop {
        let mut changed = false;
        for d in a_init.deltas() {
            let pools: Vec<Vec<StateId>> = d
                .args
                .iter()
                .map(|a| by_left[a.index()].iter().copied().collect())
                .collect();
            let refs: Vec<&Vec<StateId>> = pools.iter().collect();
            let mut found = Vec::new();
            for_each_product(&refs, |ps| {
                let p = airr.successor(&d.symbol, ps);
                let args: Vec<(StateId, StateId)> = d.args.iter().copied().zip(ps.iter().copied()).collect();
                found.push((args, (d.target, p)));
            });
            for (args, t) in found {
                if edges.insert((d.symbol.clone(), args, t)) {
                    changed = true;
                }
                if reached.insert(t) {
                    by_left[t.0.index()].insert(t.1);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut st = CompletionState {
        automaton: TreeAutomaton::new(trs.signature().clone()),
        airr,
        trs: trs.clone(),
        strategy,
        matching: EquationMatching::default(),
        left_names: Vec::new(),
        left_index: HashMap::new(),
        init_finals: a_init.finals().iter().map(|q| q.0).collect(),
        left_of: Vec::new(),
        right_of: Vec::new(),
        pairs: HashMap::new(),
        variants: Vec::new(),
        original_states: BTreeSet::new(),
        fresh: 0,
        stats: Stats::default(),
        trace: Vec::new(),
        work: VecDeque::new(),
    };
    for q in a_init.states() {
        st.add_left(a_init.label(q).to_string());
    }
    let mut ids = HashMap::new();
    for &(q, p) in &reached {
        ids.insert((q, p), st.pair(q.0, p));
    }
    for (f, args, t) in edges {
        let args = args.iter().map(|k| ids[k]).collect();
        st.automaton.add_delta(f, args, ids[&t]);
    }
    let finals = reached
        .iter()
        .filter(|(q, p)| a_init.finals().contains(q) && *p != st.airr.red)
        .map(|k| ids[k])
        .collect();
    st.automaton.set_finals(finals);
    st.original_states = st.automaton.states().collect();
    st.work.clear();
    Ok(st)
}

/// Outcome of a completion run together with the final state.
#[derive(Debug, Clone)]
pub struct CompletionResult {
    pub outcome: Outcome,
    pub state: CompletionState,
}

impl CompletionResult {
    pub fn automaton(&self) -> &TreeAutomaton {
        self.state.automaton()
    }

    pub fn stats(&self) -> Stats {
        self.state.stats()
    }

    pub fn trace(&self) -> &[String] {
        self.state.trace()
    }

    pub fn reachable_view(&self) -> TreeAutomaton {
        self.state.reachable_view()
    }

    pub fn projected_view(&self) -> TreeAutomaton {
        self.state.projected_view()
    }

    pub fn normalized_view(&self) -> TreeAutomaton {
        self.state.normalized_view()
    }
}

/// Completes until a fixpoint or a limit is reached.
pub fn run(
    a_init: &TreeAutomaton,
    trs: &Trs,
    eqs: &[Equation],
    strategy: Strategy,
    limits: Limits,
) -> Result<CompletionResult, CompletionError> {
    run_with(a_init, trs, eqs, strategy, limits, EquationMatching::default())
}

/// [`run`] with an explicit equation matching mode.
pub fn run_with(
    a_init: &TreeAutomaton,
    trs: &Trs,
    eqs: &[Equation],
    strategy: Strategy,
    limits: Limits,
    matching: EquationMatching,
) -> Result<CompletionResult, CompletionError> {
    let mut state = init(a_init, trs, strategy)?;
    state.set_equation_matching(matching);
    Ok(run_from(state, eqs, limits))
}

/// Continues completion from an existing state.
pub fn run_from(mut state: CompletionState, eqs: &[Equation], limits: Limits) -> CompletionResult {
    let outcome = loop {
        let cps = state.find_critical_pairs();
        if cps.is_empty() && state.find_equation_situations(eqs).is_empty() {
            break Outcome::Fixpoint;
        }
        if state.stats.steps >= limits.max_steps {
            break Outcome::StepLimit;
        }
        if state.step_with(cps, eqs, limits.max_states).is_err() {
            break Outcome::StateLimit;
        }
    };
    CompletionResult { outcome, state }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timbuk::{parse_spec, parse_term, Specification};

    fn spec(text: &str) -> Specification {
        parse_spec(text).unwrap()
    }

    fn ex() -> Specification {
        spec(include_str!("../../../fixtures/running.tbk"))
    }

    fn pair(st: &CompletionState, l: &str, t: &str) -> StateId {
        let p = st.airr().state_of(&parse_term(st.trs().signature(), &[], t).unwrap()).unwrap();
        st.automaton()
            .state(&StateLabel::Pair(l.into(), st.airr().automaton.label(p).to_string()))
            .unwrap()
    }

    #[test]
    fn init_matches_pruned_product() {
        let s = ex();
        let (a, trs) = (s.automaton("A0").unwrap(), s.trs("R").unwrap());
        let st = init(a, trs, Strategy::GeneralInnermost).unwrap();
        let mut expected = a.product(&build_airr(trs).unwrap().automaton).unwrap().prune_inaccessible();
        let finals = expected
            .finals()
            .iter()
            .copied()
            .filter(|&q| expected.label(q).right() != Some("pred"))
            .collect();
        expected.set_finals(finals);
        assert_eq!(st.automaton(), &expected);
        let t = parse_term(&s.signature, &[], "f(c(a(s(0)),n))").unwrap();
        let qf = st.automaton().state_named("qf_pred").unwrap();
        assert!(st.automaton().recognizes(&t, qf));
        assert!(st.check_consistency());
    }

    #[test]
    fn init_rejects_bad_input() {
        let s = ex();
        let trs = s.trs("R").unwrap();
        let mut a = s.automaton("A0").unwrap().clone();
        a.add_epsilon(StateId(0), StateId(1), Color::R);
        assert_eq!(init(&a, trs, Strategy::GeneralInnermost).unwrap_err(), CompletionError::EpsilonInput);
        let empty = TreeAutomaton::new(s.signature.clone());
        let st = init(&empty, trs, Strategy::GeneralInnermost).unwrap();
        assert_eq!(st.automaton().num_states(), 0);
    }

    #[test]
    fn running_example_critical_pairs() {
        let s = ex();
        let st = init(s.automaton("A0").unwrap(), s.trs("R").unwrap(), Strategy::GeneralInnermost).unwrap();
        let cps = st.find_critical_pairs();
        let x = Var::new("X");
        let q0 = pair(&st, "q0", "0");
        let qa = st.automaton().state_named("qa_pred").unwrap();
        assert!(cps
            .iter()
            .any(|cp| cp.rule == 4 && cp.sigma.get(&x) == Some(&q0) && cp.target == qa));
        assert!(!cps.iter().any(|cp| cp.rule == 2));
        let mut st2 = st.clone();
        let cp = cps.iter().find(|cp| cp.rule == 4).unwrap().clone();
        let before = st2.automaton().num_states();
        st2.resolve_critical_pair(&cp);
        // ⟨q_a,p_0⟩ plus its supplementary context state for q_c.
        assert_eq!(st2.automaton().num_states(), before + 2);
        let t = parse_term(&s.signature, &[], "c(0,n)").unwrap();
        let qc = pair(&st2, "qc", "c(0,n)");
        assert!(st2.automaton().recognizes(&t, qc));
        let qa0 = st2.automaton().state_named(&format!("qa_{}", st2.airr().automaton.label(st2.right(q0)))).unwrap();
        assert!(st2.automaton().epsilons().contains(&Epsilon {
            source: q0,
            target: qa0,
            color: Color::R
        }));
        assert!(!st2.is_critical(&cp));
    }

    #[test]
    fn running_example_fixpoint() {
        let s = ex();
        let res = run(
            s.automaton("A0").unwrap(),
            s.trs("R").unwrap(),
            &[],
            Strategy::GeneralInnermost,
            Limits::new(50, 1000),
        )
        .unwrap();
        assert_eq!(res.outcome, Outcome::Fixpoint);
        assert!(res.state.check_consistency());
        let view = res.reachable_view();
        let lang = view.enumerate_language(view.finals(), 8);
        let names: BTreeSet<String> = lang.iter().map(|t| t.to_string()).collect();
        let expected = ["n", "f(n)", "f(c(0,n))", "f(c(a(s(0)),n))"];
        assert_eq!(names, expected.iter().map(|s| s.to_string()).collect());
        let proj = res.projected_view();
        assert_eq!(proj.enumerate_language(proj.finals(), 8), lang);
        let nv = res.normalized_view();
        let nf: Vec<String> = nv.enumerate_language(nv.finals(), 8).iter().map(|t| t.to_string()).collect();
        assert_eq!(nf, ["n"]);
        assert!(res.state.find_critical_pairs().is_empty());
    }

    #[test]
    fn rightmost_blocks_supplementary_copy() {
        let s = spec(include_str!("../../../fixtures/rightmost.tbk"));
        let (a, trs) = (s.automaton("A0").unwrap(), s.trs("R").unwrap());
        let fbc = parse_term(&s.signature, &[], "f(b,c)").unwrap();
        let lim = Limits::new(20, 1000);
        let right = run(a, trs, &[], Strategy::RightmostInnermost, lim).unwrap();
        assert_eq!(right.outcome, Outcome::Fixpoint);
        assert!(!right.reachable_view().accepts(&fbc));
        assert!(right.projected_view().accepts(&fbc));
        let general = run(a, trs, &[], Strategy::GeneralInnermost, lim).unwrap();
        assert_eq!(general.outcome, Outcome::Fixpoint);
        assert!(general.reachable_view().accepts(&fbc));
    }

    #[test]
    fn supplementary_transitions_reach_original_context() {
        let s = spec(include_str!("../../../fixtures/supplementary.tbk"));
        let res = run(
            s.automaton("A0").unwrap(),
            s.trs("R").unwrap(),
            &[],
            Strategy::GeneralInnermost,
            Limits::new(20, 1000),
        )
        .unwrap();
        assert_eq!(res.outcome, Outcome::Fixpoint);
        let gc = parse_term(&s.signature, &[], "g(c)").unwrap();
        let st = &res.state;
        let qgfb_c = pair(st, "qgfb", "g(c)");
        assert!(st.automaton().recognizes(&gc, qgfb_c));
        assert!(res.reachable_view().accepts(&gc));
        assert!(res.normalized_view().accepts(&gc));
    }

    #[test]
    fn equation_situation_and_application() {
        let s = spec("Ops 0:0 s:1\nVars X\nTRS R\nAutomaton A\nStates q0 q1 q2\nFinal States q2\nTransitions 0->q0 s(q0)->q1 s(q1)->q2\n");
        let trs = s.trs("R").unwrap();
        let mut st = init(s.automaton("A").unwrap(), trs, Strategy::GeneralInnermost).unwrap();
        let x = Term::var("X");
        let sx = Term::App(s.signature.get("s").unwrap().clone(), vec![x.clone()]);
        let ssx = Term::App(s.signature.get("s").unwrap().clone(), vec![sx.clone()]);
        let eqs = [Equation::new(ssx, sx)];
        let sits = st.find_equation_situations(&eqs);
        let q0 = st.automaton().state_named("q0_p0").unwrap();
        let q1 = st.automaton().state_named("q1_p0").unwrap();
        let q2 = st.automaton().state_named("q2_p0").unwrap();
        assert_eq!(
            sits,
            vec![EquationSituation {
                equation: 0,
                theta: BTreeMap::from([(Var::new("X"), q0)]),
                left: q2,
                right: q1
            }]
        );
        st.apply_equation(&sits[0]);
        assert!(st.automaton().e_equivalent(q1, q2));
        let n = st.automaton().num_transitions();
        st.apply_equation(&sits[0]);
        assert_eq!(st.automaton().num_transitions(), n);
        assert!(st.find_equation_situations(&eqs).is_empty());
    }

    #[test]
    fn normalization_reuses_existing_transitions() {
        let s = spec("Ops c:0 f:1 g:2\nTRS R\nAutomaton A\nStates q1 q2\nFinal States q2\nTransitions c->q1 f(q1)->q2\n");
        let mut st = init(s.automaton("A").unwrap(), s.trs("R").unwrap(), Strategy::GeneralInnermost).unwrap();
        let q2 = st.automaton().state_named("q2_p0").unwrap();
        let sig = s.signature.clone();
        let (f, g, c) = (sig.get("f").unwrap(), sig.get("g").unwrap(), sig.get("c").unwrap());
        let conf = Config::App(
            f.clone(),
            vec![Config::App(g.clone(), vec![Config::State(q2), Config::App(c.clone(), vec![])])],
        );
        let (top, added) = st.normalize(&conf);
        assert_eq!(added.len(), 2);
        let t = parse_term(&sig, &[], "f(g(f(c),c))").unwrap();
        assert!(st.automaton().recognizes(&t, top));
        assert!(st.check_consistency());
    }
}
