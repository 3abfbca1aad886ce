use cbmbr::bench::{run_bench, BenchConfig, BenchInput};
use cbmbr::clustering::InitMethod;
use cbmbr::utility::UtilityFn;
use cbmbr::Variant;

fn main() {
    let cfg = BenchConfig {
        input: BenchInput::Diverse { n: 1024, dims: 256 },
        variants: vec![Variant::Vanilla, Variant::Cbmbr],
        k_sweep: vec![64],
        utility: UtilityFn::mlp(7),
        niter: 1,
        init: InitMethod::KMeansPlusPlus,
        repeats: 3,
        warmup: 1,
        seed: 0,
    };
    let started = std::time::Instant::now();
    let report = run_bench(&cfg).unwrap();
    for r in &report.records {
        println!(
            "{:8} k={} kmeans={:.1}ms utility={:.1}ms e2e={:.1}ms agrees={}",
            r.variant.as_str(),
            r.k,
            r.kmeans_ns as f64 / 1e6,
            r.utility_ns as f64 / 1e6,
            r.end_to_end_ns as f64 / 1e6,
            r.agrees_with_vanilla
        );
    }
    let v = report.records.iter().find(|r| r.variant == Variant::Vanilla).unwrap();
    let c = report.records.iter().find(|r| r.variant == Variant::Cbmbr).unwrap();
    println!(
        "utility ratio: {:.1}x, incl-kmeans ratio: {:.1}x, wall: {:.1}s",
        v.utility_ns as f64 / c.utility_ns as f64,
        v.utility_ns as f64 / (c.utility_ns + c.kmeans_ns) as f64,
        started.elapsed().as_secs_f64()
    );
}
