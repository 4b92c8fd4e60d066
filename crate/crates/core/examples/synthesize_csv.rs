//! CSV in, synthetic CSV out, in the input's units and column order.
//!
//!     cargo run --example synthesize_csv -- data.csv label out.csv
//!
//! Without arguments a two-moons file is generated in the temp directory.

use clustmix::data::{apply_scaler, fit_scaler, load_csv, make_toy, write_csv, CsvTable, ToyKind};
use clustmix::pipeline::{synthesize, SynthesisConfig};

fn main() -> clustmix::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dir = std::env::temp_dir();
    let (input, label, output) = match args.as_slice() {
        [i, l, o] => (i.into(), l.clone(), o.into()),
        _ => {
            let path = dir.join("clustmix_moons.csv");
            let d = make_toy(&ToyKind::Moons { noise: 0.1 }, 800, 1)?;
            let schema = CsvTable {
                header: vec!["x".into(), "y".into(), "class".into()],
                label_index: 2,
                class_names: vec!["a".into(), "b".into()],
                dataset: d.clone(),
            };
            write_csv(&path, &schema, &d)?;
            (path, "class".to_string(), dir.join("clustmix_moons_synthetic.csv"))
        }
    };

    let table = load_csv(&input, &label)?;
    let scaling = fit_scaler(&table.dataset);
    let train = apply_scaler(&table.dataset, &scaling)?;
    let report = synthesize(&train, &SynthesisConfig::default())?;
    write_csv(&output, &table, &scaling.inverse(report.synthetic())?)?;

    let sel = report.selection.as_ref().expect("sweep selects");
    println!("{} real rows -> {} synthetic rows in {}", train.len(), report.record_count, output.display());
    println!("sigma_max {} (training accuracy {:.3}), l_min {}", sel.sigma_max, sel.score, report.l_min);
    println!("{}", report.realized_privacy.statement);
    for c in &report.caveats {
        println!("caveat: {c}");
    }
    Ok(())
}
