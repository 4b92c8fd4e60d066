//! Noise calibration: sigma for a cluster size, and the smallest cluster size
//! for a noise cap.
//!
//!     cargo run --example calibrate_noise -- 1.0 1e-5

use clustmix::gdp::{calibrate_sigma, compose_mu, delta_of_mu, min_mixture_size, PrivacyParams};

fn main() -> clustmix::Result<()> {
    let mut args = std::env::args().skip(1);
    let epsilon: f64 = args.next().map_or(1.0, |a| a.parse().expect("epsilon"));
    let delta: f64 = args.next().map_or(1e-5, |a| a.parse().expect("delta"));
    let (classes, features) = (2, 10);

    let target = PrivacyParams::new(epsilon, delta)?;
    println!("({epsilon}, {delta:e})-DP allows mu up to {:.6}", target.mu);
    println!("delta at that mu: {:e}", delta_of_mu(epsilon, target.mu)?);

    println!("\n{:>6}  {:>10}", "l", "sigma_min");
    for l in [5, 10, 25, 50, 100, 250, 1000] {
        println!("{l:>6}  {:>10.5}", calibrate_sigma(epsilon, delta, l, classes, features)?);
    }

    println!("\n{:>9}  {:>6}", "sigma_max", "l_min");
    for s in [0.01, 0.05, 0.1, 0.5, 1.0] {
        println!("{s:>9}  {:>6}", min_mixture_size(epsilon, delta, s, classes, features)?);
    }

    let total = compose_mu(&[0.5, 0.5, 0.5, 0.5])?;
    println!("\nfour releases at mu=0.5 compose to mu={total}");
    Ok(())
}
