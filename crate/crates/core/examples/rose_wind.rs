//! Wind conditioned on the bundled rose, with the visited cells tallied.

use std::path::Path;

use leakinv::wind::{conditioned_wind, parse_wind_rose, WindModelConfig};

fn main() -> leakinv::Result<()> {
    let rose = parse_wind_rose(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/demo_rose.csv"))?;
    let w = conditioned_wind(
        &rose,
        &WindModelConfig { span_hours: 24.0 * 30.0, start_dir: 225.0, start_speed: 3.0, seed: 2, ..Default::default() },
    )?;
    let mut visits = vec![0usize; rose.dir_bins.len()];
    for &(d, _) in &w.periods {
        visits[rose.direction_bin(d)] += 1;
    }
    let n = w.periods.len() as f64;
    println!("{:>10} {:>8} {:>8}", "bin", "visited", "rose");
    for (k, [lo, hi]) in rose.dir_bins.iter().enumerate() {
        let mass: f64 = rose.mass[k].iter().sum();
        println!("{:>4.0}-{:<5.0} {:>8.3} {:>8.3}", lo, hi, visits[k] as f64 / n, mass);
    }
    for d in w.diagnostics.iter().take(5) {
        println!("note: {d}");
    }
    Ok(())
}
