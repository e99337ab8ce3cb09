//! Timings for parsing, closure computation, game solving, deciding and
//! interpolation.

use afmu::formula::closure;
use afmu::games::solve;
use afmu::generate::{arena, formula, ConditionKind, FormulaConfig};
use afmu::interpolation::interpolate;
use afmu::{decide, parse, Formula};
use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const PHI: &str = "(nu y. [](r & y))";

fn alpha(v: &str) -> String {
    let psi1 = format!("((({v} & <>{v}) | (~r & <>{v})) | (~{v} & (r & []~{v})))");
    let psi2 = format!("({v} & ~r)");
    let psi3 = format!("(<>~{v} & <>{v})");
    format!("(mu x. ((({psi1} | {psi2}) | {psi3}) | {PHI}) | <>x)")
}

fn sample(n: usize, depth: usize, max_closure: usize) -> Vec<Formula> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = FormulaConfig::new(&["p", "q"], depth, max_closure);
    (0..n).map(|_| formula(&mut rng, &cfg)).collect()
}

fn formulas(c: &mut Criterion) {
    let text = format!("q | {}", alpha("q"));
    c.bench_function("parse", |b| b.iter(|| parse(black_box(&text)).expect("parses")));
    let f = parse(&text).expect("parses");
    c.bench_function("closure", |b| b.iter(|| closure([black_box(&f)])));
}

fn games(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let arenas: Vec<_> = (0..100).map(|_| arena(&mut rng, 40, ConditionKind::WeakParity)).collect();
    c.bench_function("solve 100 weak arenas", |b| {
        b.iter(|| arenas.iter().map(|a| solve(a).expect("well formed").winner[a.initial]).count())
    });
}

fn prover(c: &mut Criterion) {
    let fs = sample(50, 5, 30);
    c.bench_function("decide 50 formulas", |b| {
        b.iter(|| fs.iter().filter(|f| decide(std::slice::from_ref(*f)).expect("decides").is_valid()).count())
    });
}

fn interpolation(c: &mut Criterion) {
    let phi = parse(&format!("~p | {}", alpha("p"))).expect("parses").negation();
    let psi = parse(&format!("q | {}", alpha("q"))).expect("parses");
    c.bench_function("interpolate worked example", |b| b.iter(|| interpolate(black_box(&phi), black_box(&psi)).expect("valid")));
}

criterion_group!(benches, formulas, games, prover, interpolation);
criterion_main!(benches);
