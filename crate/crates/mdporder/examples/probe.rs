// Temporary experiment driver for backend comparisons.
use mdporder::ccf::forest::ForestBackend;
use mdporder::pipeline::{run_estimate_with, EstimatorConfig};
use mdporder::simulate::{simulate, Model, SimSpec};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let model: Model = args[1].parse().unwrap();
    let data_seed: u64 = args[2].parse().unwrap();
    let exact: bool = args[3].parse().unwrap();
    let min_leaf: usize = args[4].parse().unwrap();
    let subsample: f64 = args[5].parse().unwrap();
    let gain: f64 = args[6].parse().unwrap();
    let mtry: usize = args.get(7).map(|v| v.parse().unwrap()).unwrap_or(0);
    let small_grid: bool = args.get(8).map_or(false, |s| s == "small");

    let data = simulate(&SimSpec::new(model, 6, 200, 3, data_seed)).unwrap();
    let config = if small_grid {
        EstimatorConfig { k_max: 4, q_max: 2, num_directions: Some(6), seed: 7, ..Default::default() }
    } else {
        EstimatorConfig { seed: 7, ..Default::default() }
    };
    let backend = ForestBackend {
        trees: 100,
        min_leaf,
        exact_splits: exact,
        subsample,
        min_gain_frac: gain,
        mtry: (mtry > 0).then_some(mtry),
        dimension_adaptive_leaf: std::env::var("ADAPTIVE").map_or(true, |v| v == "1"),
    };
    let t0 = std::time::Instant::now();
    let run = run_estimate_with(&data, &config, &backend).unwrap();
    let pi: Vec<String> = run.pi.values()[1..].iter().map(|v| format!("{v:.4}")).collect();
    let om: Vec<String> = run.order.curve.omega().iter().map(|v| format!("{v:.2}")).collect();
    println!(
        "{} s{} ex={} ml={} sub={} g={} mtry={}: k {:?} pi [{}] om [{}] ({:.0}s)",
        model.name(), data_seed, exact, min_leaf, subsample, gain, mtry, run.order.k_hat,
        pi.join(" "), om.join(" "), t0.elapsed().as_secs_f64()
    );
}
