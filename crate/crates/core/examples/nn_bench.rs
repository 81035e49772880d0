use recon_eval::spatial::SpatialIndex;
use recon_eval::synth::make_sphere_cloud;
use std::time::Instant;

fn main() {
    let n = 1_000_000;
    let t0 = Instant::now();
    let gt = make_sphere_cloud(0.1, n, 1);
    let queries = make_sphere_cloud(0.103, n, 2);
    println!("gen: {:?}", t0.elapsed());

    let t1 = Instant::now();
    let index = SpatialIndex::build(&gt).unwrap();
    println!("build: {:?}", t1.elapsed());

    let t2 = Instant::now();
    let dists = index.nearest_batch(&queries);
    println!("batch 1e6 x 1e6: {:?}", t2.elapsed());
    let mean: f64 = dists.iter().sum::<f64>() / dists.len() as f64;
    println!("mean dist: {:.6} mm", mean * 1000.0);
}
