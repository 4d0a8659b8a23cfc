use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use swpe_bench::{busy_params, decay_points, g2_points, gamma_law};
use swpe_core::analysis::{bell_s, tally};
use swpe_core::eventlog::{read_jsonl, to_jsonl_bytes};
use swpe_core::fitting::{fit_memory_decay, fit_xi};
use swpe_core::trialsim::{run_campaign, run_campaign_partitioned};
use swpe_core::{AngleSettings, CountsTable, Setting, TrialMode};

fn campaigns(c: &mut Criterion) {
    let params = busy_params();
    let mut group = c.benchmark_group("campaign");
    for n in [10_000u64, 100_000] {
        group.throughput(Throughput::Elements(n));
        for mode in [TrialMode::Swpe, TrialMode::G2] {
            group.bench_with_input(BenchmarkId::new(format!("{mode:?}"), n), &n, |b, &n| {
                b.iter(|| run_campaign_partitioned(&params, Setting::ZERO, mode, n, 7, 1).unwrap())
            });
        }
    }
    group.finish();
}

fn analysis(c: &mut Criterion) {
    let params = busy_params();
    let angles = AngleSettings::canonical();
    let logs: Vec<_> = angles
        .pairs()
        .iter()
        .enumerate()
        .map(|(i, &s)| run_campaign(&params, s, TrialMode::Swpe, 100_000, i as u64).unwrap())
        .collect();
    c.bench_function("tally_and_bell_4x100k", |b| {
        b.iter(|| {
            let mut t = CountsTable::new();
            for log in &logs {
                t.add(tally(black_box(log)).unwrap());
            }
            bell_s(&t, &angles).unwrap()
        })
    });
    let bytes = to_jsonl_bytes(&logs[0]);
    c.bench_function("jsonl_serialize_100k", |b| {
        b.iter(|| to_jsonl_bytes(black_box(&logs[0])))
    });
    c.bench_function("jsonl_parse_100k", |b| {
        b.iter(|| read_jsonl(black_box(bytes.as_slice())).unwrap())
    });
}

fn fits(c: &mut Criterion) {
    let decay = decay_points();
    let g2 = g2_points();
    c.bench_function("fit_memory_decay_12", |b| {
        b.iter(|| fit_memory_decay(black_box(&decay)).unwrap())
    });
    c.bench_function("fit_xi_12", |b| {
        b.iter(|| fit_xi(black_box(&g2), gamma_law, 0.006, 6.6e-7, 0.0).unwrap())
    });
}

criterion_group!(benches, campaigns, analysis, fits);
criterion_main!(benches);
