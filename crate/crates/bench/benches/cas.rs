use criterion::{black_box, criterion_group, criterion_main, Criterion};
use extlink_core::cas::{evaluate_line, gcd_contract, parse_poly_expr, TermOrder, WITH_GCD};

fn contraction(c: &mut Criterion) {
    let parsed = parse_poly_expr(WITH_GCD).unwrap();
    c.bench_function("gcd_contract", |b| b.iter(|| gcd_contract(black_box(&parsed))));
    c.bench_function("evaluate_line", |b| b.iter(|| evaluate_line(black_box(WITH_GCD), TermOrder::Ascending)));
    let big = "((d+1)^12*(d-3)^5)/((d+1)^7*(d^2+2)^4)";
    c.bench_function("evaluate_line_deg17", |b| b.iter(|| evaluate_line(black_box(big), TermOrder::Ascending)));
}

criterion_group!(benches, contraction);
criterion_main!(benches);
