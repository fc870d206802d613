use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use extlink_bench::filter_corpus;
use extlink_core::gateway::{compose, FilterSpec, Pipeline};

fn throughput(c: &mut Criterion) {
    let input = filter_corpus(10_000);
    let mut group = c.benchmark_group("filters");
    group.throughput(Throughput::Bytes(input.len() as u64));
    let chains: [(&str, &[&str]); 3] = [
        ("neg-power", &["neg-power"]),
        ("to-form", &["neg-power", "pow-to-dstar", "blank-drop"]),
        ("join", &["line-join", "dstar-to-pow"]),
    ];
    for (name, names) in chains {
        let specs: Vec<FilterSpec> = names.iter().map(|n| n.parse().unwrap()).collect();
        group.bench_function(name, |b| {
            b.iter(|| {
                let mut out = Vec::with_capacity(input.len() * 2);
                compose(&mut Pipeline::from_specs(&specs), input.as_bytes(), &mut out).unwrap();
                out
            })
        });
    }
    group.finish();
}

criterion_group!(benches, throughput);
criterion_main!(benches);
