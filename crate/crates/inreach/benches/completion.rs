use std::collections::BTreeSet;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use inreach::airr::build_airr;
use inreach::completion::{run, run_with, EquationMatching, Limits};
use inreach::inference::generate_equations;
use inreach::par;
use inreach::rewriting::{bounded_reachable, Bounds, Strategy};
use inreach::timbuk::{parse_spec, Specification};

fn spec(name: &str) -> Specification {
    let path = format!("{}/../../fixtures/{}", env!("CARGO_MANIFEST_DIR"), name);
    parse_spec(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const MODES: [(&str, bool); 2] = [("sequential", false), ("parallel", true)];

// ============================================================
// Completion on the example systems
// ============================================================

fn completion(c: &mut Criterion) {
    let mut g = c.benchmark_group("completion");
    let sum = spec("sum.tbk");
    let mapeven = spec("mapeven_loop.tbk");
    let delete = spec("delete_ec.tbk");
    let delete_eqs = generate_equations(delete.trs("R").unwrap(), delete.equation_set("Ec").unwrap()).equations;
    let limits = Limits::new(100, 20_000);
    for (mode, on) in MODES {
        par::set_parallel(on);
        g.bench_with_input(BenchmarkId::new("sum", mode), &on, |b, _| {
            b.iter(|| {
                run(
                    sum.automaton("A0").unwrap(),
                    sum.trs("R1").unwrap(),
                    sum.equation_set("Simpl").unwrap(),
                    Strategy::GeneralInnermost,
                    limits,
                )
                .unwrap()
            })
        });
        g.bench_with_input(BenchmarkId::new("map_even", mode), &on, |b, _| {
            b.iter(|| {
                run(
                    mapeven.automaton("A0").unwrap(),
                    mapeven.trs("R1").unwrap(),
                    mapeven.equation_set("Loop").unwrap(),
                    Strategy::GeneralInnermost,
                    limits,
                )
                .unwrap()
            })
        });
        g.bench_with_input(BenchmarkId::new("delete", mode), &on, |b, _| {
            b.iter(|| {
                run_with(
                    delete.automaton("A0").unwrap(),
                    delete.trs("R").unwrap(),
                    &delete_eqs,
                    Strategy::GeneralInnermost,
                    limits,
                    EquationMatching::WithoutR,
                )
                .unwrap()
            })
        });
    }
    par::set_parallel(true);
    g.finish();
}

// ============================================================
// Brute-force oracle
// ============================================================

fn oracle(c: &mut Criterion) {
    let mut g = c.benchmark_group("oracle");
    let s = spec("delete.tbk");
    let a0 = s.automaton("A0").unwrap();
    let seeds: BTreeSet<_> = a0.enumerate_language(a0.finals(), 7);
    assert!(!seeds.is_empty());
    for (mode, on) in MODES {
        par::set_parallel(on);
        g.bench_with_input(BenchmarkId::new("delete", mode), &on, |b, _| {
            b.iter(|| {
                bounded_reachable(
                    s.trs("R").unwrap(),
                    black_box(&seeds),
                    Some(Strategy::GeneralInnermost),
                    Bounds::new(30, 20),
                )
            })
        });
    }
    par::set_parallel(true);
    g.finish();
}

// ============================================================
// Normal-form automaton
// ============================================================

fn airr(c: &mut Criterion) {
    let s = spec("mapeven.tbk");
    c.bench_function("airr/map_even", |b| b.iter(|| build_airr(black_box(s.trs("R1").unwrap())).unwrap()));
}

criterion_group!(benches, completion, oracle, airr);
criterion_main!(benches);
