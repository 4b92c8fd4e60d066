//! Moves cluster centroids so a kernel ridge model fit on them predicts the
//! real labels better.
//!
//!     cargo run --example kip_adapt -- 0.2

use clustmix::adapt::{adapt_points, krr_loss, matrix_from_rows, one_hot, AdaptConfig, KernelConfig};
use clustmix::data::{apply_scaler, fit_scaler, make_toy, ToyKind};

fn main() -> clustmix::Result<()> {
    let alpha: f64 = std::env::args().nth(1).map_or(0.2, |a| a.parse().expect("alpha"));
    let raw = make_toy(&ToyKind::Moons { noise: 0.1 }, 300, 0)?;
    let data = apply_scaler(&raw, &fit_scaler(&raw))?;

    let rows: Vec<&[f64]> = data.rows().collect();
    let xt = matrix_from_rows(&rows)?;
    let yt = one_hot(data.labels(), 2);
    // Two centroids per class from a crude split on the first feature.
    let mut init = Vec::new();
    let mut labels = Vec::new();
    for class in 0..2 {
        for half in 0..2 {
            let pick: Vec<&[f64]> = rows
                .iter()
                .zip(data.labels())
                .filter(|(r, &y)| y == class && (r[0] < 0.5) == (half == 0))
                .map(|(r, _)| *r)
                .collect();
            init.push(clustmix::anonymize::member_mean(&pick)?);
            labels.push(class);
        }
    }
    let refs: Vec<&[f64]> = init.iter().map(Vec::as_slice).collect();
    let xs = matrix_from_rows(&refs)?;
    let ys = one_hot(&labels, 2);

    let kcfg = KernelConfig::default();
    let acfg = AdaptConfig { alpha, max_steps: 200, ..AdaptConfig::default() };
    let res = adapt_points(&xt, &yt, &xs, &ys, &kcfg, &acfg)?;
    let kernel = kcfg.kernel_for(&xt)?;
    println!("bandwidth {:.4}, lambda {}", res.bandwidth, res.ridge_lambda);
    println!("KRR loss before {:.4}", krr_loss(&xt, &yt, &xs, &ys, &kernel, res.ridge_lambda)?);
    println!("KRR loss after  {:.4}", krr_loss(&xt, &yt, &res.support_points, &ys, &kernel, res.ridge_lambda)?);
    println!("combined loss {:.4} -> {:.4} over {} accepted steps",
        res.loss_trace[0].1, res.loss_trace.last().unwrap().1, res.loss_trace.len() - 1);
    for i in 0..xs.nrows() {
        println!("  class {} {:.3?} -> {:.3?}", labels[i],
            xs.row(i).iter().collect::<Vec<_>>(), res.support_points.row(i).iter().collect::<Vec<_>>());
    }
    Ok(())
}
