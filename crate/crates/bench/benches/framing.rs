use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use extlink_bench::framed_reply;
use extlink_core::ChannelRegistry;

// Round trip through a long-lived `cat`: one write, one prompt-framed read.
fn round_trip(c: &mut Criterion) {
    let mut reg = ChannelRegistry::new();
    reg.set_default_attrs("daemon=false,killall=false").unwrap();
    reg.set_read_timeout(Some(Duration::from_secs(10)));
    reg.open_channel("cat").unwrap();
    let mut group = c.benchmark_group("cat_round_trip");
    for lines in [1, 100, 1000] {
        let payload = framed_reply(lines);
        group.throughput(Throughput::Bytes(payload.len() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(lines), &payload, |b, p| {
            b.iter(|| {
                reg.send(p).unwrap();
                reg.read_until_prompt(None).unwrap()
            })
        });
    }
    group.finish();
    reg.shutdown_all();
}

criterion_group!(benches, round_trip);
criterion_main!(benches);
