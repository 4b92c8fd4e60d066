//! Random slicing plus size-constrained clustering of each (slice, class).
//!
//!     cargo run --example constrained_clustering

use clustmix::approximate::{approximate, fit_constrained_gmm, ApproximateConfig, FitOptions};
use clustmix::data::{apply_scaler, fit_scaler, make_toy, ToyKind};

fn main() -> clustmix::Result<()> {
    let raw = make_toy(&ToyKind::Moons { noise: 0.1 }, 600, 3)?;
    let data = apply_scaler(&raw, &fit_scaler(&raw))?;

    // One group on its own: the objective trace never decreases.
    let class0: Vec<&[f64]> = (0..data.len()).filter(|&i| data.label(i) == 0).map(|i| data.row(i)).collect();
    let frag = fit_constrained_gmm(&class0, 6, 40, 1, FitOptions::default())?;
    let sizes: Vec<usize> = frag.members.iter().map(Vec::len).collect();
    println!("class 0: {} iterations, sizes {sizes:?}", frag.iterations);
    println!("objective {:.2} -> {:.2}", frag.objective_trace[0], frag.objective_trace.last().unwrap());

    let set = approximate(
        &data,
        &ApproximateConfig {
            n_slices: 3,
            k_per_slice: None,
            l_min: 25,
            seed: 7,
            fit: FitOptions::default(),
        },
    )?;
    for (s, slice) in set.slices.iter().enumerate() {
        println!(
            "slice {s}: feature {} in ({:.3}, {:.3}], {} rows",
            slice.feature,
            slice.lower,
            slice.upper,
            slice.row_indices.len()
        );
    }
    for c in &set.clusters {
        println!("  slice {} class {} size {:>3} mean {:.3?}", c.slice, c.label, c.len(), c.component.mean);
    }
    println!("{} groups too small to cluster", set.diagnostics.skipped.len());
    Ok(())
}
