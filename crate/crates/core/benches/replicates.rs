use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use hsrc_core::exec::Execution;
use hsrc_core::experiment::{self, ExperimentSpec};

const SPEC: &str = r#"
name = "bench"
replicates = 16
seed = 3

[scenario]
scenario = "I"
types = 4
d = 300
q = 0.3

[accuracy]
epsilon = 0.05
delta = 0.2
ell = 610

[sweep]
variable = "q"
values = [0.3]
"#;

fn replicates(c: &mut Criterion) {
    let spec = ExperimentSpec::from_toml_str(SPEC).unwrap();
    let mut group = c.benchmark_group("replicates");
    group.sample_size(10);
    for (name, exec) in [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)] {
        group.bench_function(name, |b| {
            b.iter(|| experiment::run_experiment(black_box(&spec), None, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, replicates);
criterion_main!(benches);
