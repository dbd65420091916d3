use criterion::{black_box, criterion_group, criterion_main, Criterion};

use xoscgen_bench::Workload;
use xoscgen_core::executor::run_document;
use xoscgen_core::pipeline::{parse, self_consistency_vote, Ablation};
use xoscgen_core::xosc::verify;
use xoscgen_core::{EgoPolicy, XoscDocument};

fn parsing(c: &mut Criterion) {
    let w = Workload::bundled();
    let text = &w.case("left_turn").text;
    let mut group = c.benchmark_group("parse");
    for ablation in [Ablation::Bp, Ablation::BpFsCotSac, Ablation::Full] {
        let config = w.config.with_ablation(ablation);
        group.bench_function(ablation.label(), |b| {
            b.iter(|| parse(black_box(text), &config, &w.backend, &w.repo, &w.rules))
        });
    }
    group.finish();

    let candidates: Vec<_> = w.cases.iter().take(10).map(|c| c.truth.clone()).collect();
    c.bench_function("vote/10_candidates", |b| {
        b.iter(|| self_consistency_vote(black_box(&candidates)))
    });
}

fn assembly(c: &mut Criterion) {
    let w = Workload::bundled();
    let assembler = w.assembler();
    let mut group = c.benchmark_group("assemble");
    for id in ["left_turn", "cone_lane_closure", "highway_truck_platoon"] {
        let rep = &w.case(id).truth;
        group.bench_function(id, |b| b.iter(|| assembler.assemble(black_box(rep), 7)));
    }
    group.finish();
}

fn emitting(c: &mut Criterion) {
    let w = Workload::bundled();
    let doc = w.document("left_turn", 11);
    let bytes = doc.to_bytes();
    c.bench_function("xosc/emit", |b| b.iter(|| black_box(&doc).to_bytes()));
    c.bench_function("xosc/load", |b| b.iter(|| XoscDocument::load(black_box(&bytes))));
    c.bench_function("xosc/verify", |b| b.iter(|| verify(black_box(&doc))));
}

fn executing(c: &mut Criterion) {
    let w = Workload::bundled();
    let policy = EgoPolicy::lane_follow();
    let mut group = c.benchmark_group("execute");
    for id in ["left_turn", "t_junction_signal", "pedestrian_crossing_nearside"] {
        let doc = w.document(id, 0);
        group.bench_function(id, |b| b.iter(|| run_document(black_box(&doc), &w.corpus, &policy)));
    }
    group.finish();
}

criterion_group!(benches, parsing, assembly, emitting, executing);
criterion_main!(benches);
