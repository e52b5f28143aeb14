use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use kdebias::evaluation::{EmbeddingSimilarity, Geometry, SimilarityBackend};
use kdebias::numerics::symmetric_eig;
use kdebias::{fit_kernel_model, fit_preimage_map, gram_matrix, KernelSpec, PreimageOptions};
use kdebias_bench::{leading_pairs, random_table};

fn gram(c: &mut Criterion) {
    let t = random_table(1, 200, 50);
    let mut g = c.benchmark_group("gram_200x200_d50");
    for spec in [
        KernelSpec::Linear,
        KernelSpec::rbf(0.02),
        KernelSpec::polynomial(0.02, 1.0, 3),
    ] {
        g.bench_with_input(BenchmarkId::from_parameter(spec.family()), &spec, |b, spec| {
            b.iter(|| gram_matrix(spec, t.matrix().view(), t.matrix().view()).unwrap())
        });
    }
    g.finish();
}

fn eigen(c: &mut Criterion) {
    let mut g = c.benchmark_group("jacobi");
    for n in [20usize, 60, 120] {
        let t = random_table(2, n, n);
        let a = t.matrix() + &t.matrix().t();
        g.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| {
            b.iter(|| symmetric_eig(a).unwrap())
        });
    }
    g.finish();
}

fn fit_and_query(c: &mut Criterion) {
    let t = random_table(3, 400, 50);
    let sets = leading_pairs(&t, 10);
    let spec = KernelSpec::rbf(0.02);
    c.bench_function("fit_rbf_k2_n10", |b| {
        b.iter(|| fit_kernel_model(&spec, &sets, &t, 2).unwrap())
    });

    let model = fit_kernel_model(&spec, &sets, &t, 2).unwrap();
    let sim = EmbeddingSimilarity::new(&t, Geometry::Corrected(model.metric())).unwrap();
    c.bench_function("corrected_cosine_query", |b| {
        b.iter(|| sim.similarity(black_box("w100"), black_box("w200")).unwrap())
    });

    let sample: Vec<usize> = (0..120).collect();
    c.bench_function("preimage_fit_120", |b| {
        b.iter(|| fit_preimage_map(&model, &t, &sample, PreimageOptions::default()).unwrap())
    });
}

criterion_group!(benches, gram, eigen, fit_and_query);
criterion_main!(benches);
