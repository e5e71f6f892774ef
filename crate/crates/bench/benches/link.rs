use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ddlink_bench::{channel, frame, grid};
use ddlink_core::channel::{build_dd_matrix, propagate, DdChannelOperator, LinearOperator};
use ddlink_core::equalizer::{lsmr, mmse_solve, IterativeConfig};
use ddlink_core::modem::{demodulate_direct, modulate_direct, modulate_spread};
use ddlink_core::sync::{synchronize, Impairments, SyncConfig};
use ddlink_core::Waveform;
use num_complex::Complex64;
use std::hint::black_box;

fn modulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("modulate");
    for (m, n) in [(32, 16), (128, 32)] {
        let d = grid(frame(m, n));
        for w in Waveform::ALL {
            g.bench_with_input(
                BenchmarkId::new(format!("direct/{w}"), m * n),
                &d,
                |b, d| b.iter(|| modulate_direct(black_box(d), w)),
            );
            g.bench_with_input(
                BenchmarkId::new(format!("spread/{w}"), m * n),
                &d,
                |b, d| b.iter(|| modulate_spread(black_box(d), w)),
            );
        }
        let tx = modulate_direct(&d, Waveform::Otfs);
        g.bench_with_input(BenchmarkId::new("demodulate/OTFS", m * n), &tx, |b, tx| {
            b.iter(|| demodulate_direct(black_box(tx), Waveform::Otfs).unwrap())
        });
    }
    g.finish();
}

fn channel_operator(c: &mut Criterion) {
    let mut g = c.benchmark_group("channel");
    for (m, n) in [(32, 16), (128, 32)] {
        let f = frame(m, n);
        let ch = channel(f);
        let op = DdChannelOperator::new(&ch, Waveform::ScIfdma);
        let x = grid(f).into_vec();
        g.bench_with_input(BenchmarkId::new("operator_apply", m * n), &x, |b, x| {
            b.iter(|| op.apply(black_box(x)))
        });
        let tx = modulate_direct(&grid(f), Waveform::Otfs);
        g.bench_with_input(BenchmarkId::new("propagate", m * n), &tx, |b, tx| {
            b.iter(|| propagate(black_box(tx.samples()), &ch, &Impairments::none()))
        });
    }
    g.finish();
}

fn equalizers(c: &mut Criterion) {
    let mut g = c.benchmark_group("equalize");
    g.sample_size(10);
    let f = frame(16, 16);
    let ch = channel(f);
    let y = grid(f).into_vec();
    let dense = build_dd_matrix(&ch, Waveform::Otfs).into_matrix();
    g.bench_function("mmse_dense/256", |b| {
        b.iter(|| mmse_solve(&dense, black_box(&y), 0.01).unwrap())
    });
    let op = DdChannelOperator::new(&ch, Waveform::Otfs);
    g.bench_function("lsmr/256", |b| {
        b.iter(|| lsmr(&op, black_box(&y), 0.1, IterativeConfig::default()).unwrap())
    });
    let f = frame(32, 16);
    let op = DdChannelOperator::new(&channel(f), Waveform::Otfs);
    let y = grid(f).into_vec();
    g.bench_function("lsmr/512", |b| {
        b.iter(|| lsmr(&op, black_box(&y), 0.1, IterativeConfig::default()).unwrap())
    });
    g.finish();
}

fn acquisition(c: &mut Criterion) {
    let f = frame(32, 16);
    let mut d = ddlink_core::DelayDopplerGrid::zeros(f);
    d.set(8, 8, Complex64::new(15.8, 0.0));
    let mut x = modulate_direct(&d, Waveform::Otfs).into_samples();
    x.resize(x.len() + f.size(), Complex64::default());
    let r = propagate(&x, &channel(f), &Impairments::new(5, 1, 0.2, &f).unwrap());
    let cfg = SyncConfig::new(0.5, &f).unwrap();
    c.bench_function("synchronize/512", |b| {
        b.iter(|| synchronize(black_box(&r), &f, 8, 8, &cfg).unwrap())
    });
}

criterion_group!(
    benches,
    modulation,
    channel_operator,
    equalizers,
    acquisition
);
criterion_main!(benches);
