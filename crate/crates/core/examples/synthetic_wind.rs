//! Three unconditioned wind realizations, summarised hour by hour.

use leakinv::wind::{synthetic_wind, WindModelConfig};

fn main() -> leakinv::Result<()> {
    for seed in 1..=3 {
        let w = synthetic_wind(&WindModelConfig { span_hours: 6.0, start_dir: 90.0, seed, ..Default::default() })?;
        let hourly: Vec<String> = w.periods.chunks(6).map(|h| format!("{:.0}/{:.1}", h[0].0, h[0].1)).collect();
        println!("seed {seed}: {} samples, dir/speed each hour {}", w.samples.len(), hourly.join(" "));
    }
    Ok(())
}
