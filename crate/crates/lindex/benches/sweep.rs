use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lindex::criteria::{check_hayman, CheckOpts, HaymanForm};
use lindex::exec::{self, ExecMode};
use lindex::index::global_index_estimate;
use lindex::lfield::LField;
use lindex::parse::parse_complex;
use lindex::sampling::halton_ball;

const MODES: [(&str, ExecMode); 2] = [("parallel", ExecMode::Parallel), ("sequential", ExecMode::Sequential)];

fn index_sweep(c: &mut Criterion) {
    let f = parse_complex("exp(1/((1-z1)*(1-z2)))", 2).unwrap();
    let l = LField::from_texts(1.5, &["2/((1-|z1|)^2*(1-|z|))", "2/((1-|z|)*(1-|z2|)^2)"]).unwrap();
    let anchors = halton_ball(2, 64, 0.6);
    let mut group = c.benchmark_group("global_index_estimate");
    for (name, mode) in MODES {
        exec::set_mode(mode);
        group.bench_with_input(BenchmarkId::from_parameter(name), &anchors, |b, a| {
            b.iter(|| global_index_estimate(&f, &l, a, 16).unwrap())
        });
    }
    group.finish();
    exec::set_mode(ExecMode::Parallel);
}

fn hayman_sweep(c: &mut Criterion) {
    let f = parse_complex("exp(z1*z2)+z1^3", 2).unwrap();
    let l = LField::cone_multiple(2, 1.5, 2.0).unwrap();
    let anchors = halton_ball(2, 64, 0.8);
    let opts = CheckOpts::for_dim(2);
    let mut group = c.benchmark_group("check_hayman");
    for (name, mode) in MODES {
        exec::set_mode(mode);
        group.bench_with_input(BenchmarkId::from_parameter(name), &anchors, |b, a| {
            b.iter(|| check_hayman(&f, &l, 2, a, HaymanForm::Plain, None, &opts).unwrap())
        });
    }
    group.finish();
    exec::set_mode(ExecMode::Parallel);
}

criterion_group!(benches, index_sweep, hayman_sweep);
criterion_main!(benches);
