use criterion::{black_box, criterion_group, criterion_main, Criterion};

use segeval::droid::depth_profile;
use segeval::ensemble::vote;
use segeval::overlap::dice;
use segeval::surface::assd_mm;
use segeval::thickness::mean_thickness_mm;
use segeval::Axis;
use segeval_bench::femoral_masks;

fn metrics(c: &mut Criterion) {
    let (gt, preds) = femoral_masks();
    let pred = &preds[1];
    c.bench_function("dice", |b| b.iter(|| dice(black_box(pred), black_box(&gt)).unwrap()));
    c.bench_function("assd_mm", |b| b.iter(|| assd_mm(black_box(pred), black_box(&gt)).unwrap()));
    c.bench_function("mean_thickness_mm", |b| b.iter(|| mean_thickness_mm(black_box(&gt)).unwrap()));
    c.bench_function("vote_k2", |b| b.iter(|| vote(black_box(&preds), 2).unwrap()));
    c.bench_function("depth_profile", |b| {
        b.iter(|| depth_profile("m", std::slice::from_ref(pred), std::slice::from_ref(&gt), Axis::Z, 20).unwrap())
    });
}

criterion_group!(benches, metrics);
criterion_main!(benches);
