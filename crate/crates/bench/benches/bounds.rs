use criterion::{black_box, criterion_group, criterion_main, Criterion};
use ifc_core::certify::certify_sum_capacity;
use ifc_core::construct::build_z_channel;
use ifc_core::model::Family;
use ifc_core::outer_bound::{kra_term_min, kra_term_value, region};
use ifc_core::{BoundTerm, ChannelMatrix, NoiseCorrelation, OptimizerConfig};

fn symmetric(k: usize, cross: f64) -> ChannelMatrix {
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { 1.5 } else { cross }).collect())
        .collect();
    ChannelMatrix::from_real_rows(&rows).unwrap()
}

fn correlated(k: usize, r: f64) -> NoiseCorrelation {
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { 1.0 } else { r }).collect())
        .collect();
    NoiseCorrelation::from_real(&rows).unwrap()
}

fn terms(c: &mut Criterion) {
    let cfg = OptimizerConfig::default();
    for k in [2, 3, 4] {
        let h = symmetric(k, 0.6);
        let s = correlated(k, 0.3);
        let t = BoundTerm::full_identity(k);
        c.bench_function(&format!("kra_term_value/k{k}"), |b| {
            b.iter(|| kra_term_value(black_box(&h), black_box(&s), &t).unwrap())
        });
        c.bench_function(&format!("kra_term_min/k{k}"), |b| {
            b.iter(|| kra_term_min(black_box(&h), &t, &cfg).unwrap())
        });
    }
}

fn reports(c: &mut Criterion) {
    let cfg = OptimizerConfig::default();
    let mut group = c.benchmark_group("reports");
    group.sample_size(10);
    let h = symmetric(3, 0.6);
    group.bench_function("region/k3", |b| {
        b.iter(|| region(black_box(&h), &cfg, &[Family::Kra, Family::Etw]).unwrap())
    });
    let z = build_z_channel(&correlated(3, 0.3), &[1.0, 2.0, 1.5]).unwrap();
    group.bench_function("certify/z3", |b| b.iter(|| certify_sum_capacity(black_box(&z), &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, terms, reports);
criterion_main!(benches);
