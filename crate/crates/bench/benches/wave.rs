use criterion::{criterion_group, criterion_main, Criterion};
use multicausal::wave::{assemble_density, support_cells, Propagator, Species};
use multicausal_bench::default_state;

fn wave(c: &mut Criterion) {
    let mut group = c.benchmark_group("wave");
    group.sample_size(10);
    for species in [Species::Photon, Species::Fermion { mass: 1.0 }] {
        let (config, state) = default_state(species);
        let prop = Propagator::new(species, config.grid, config.c, config.dt).unwrap();
        group.bench_function(format!("{}_step", species.name()), |b| b.iter(|| state.evolve(&prop).unwrap()));
        group.bench_function(format!("{}_density", species.name()), |b| {
            b.iter(|| assemble_density(&state, config.coarsen, config.c).unwrap())
        });
        let snap = assemble_density(&state, config.coarsen, config.c).unwrap();
        group.bench_function(format!("{}_support", species.name()), |b| b.iter(|| support_cells(&snap, 1e-3).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, wave);
criterion_main!(benches);
