// Driving the harness from a TOML config: run every (method, seed) cell,
// write traces and the summary, print the milestone table.

use spgd::harness::report::{milestone_table, write_median_trace};
use spgd::harness::{execute, RunConfig};

const CONFIG: &str = r#"
[run]
id = "demo"
epochs = 300
seeds = [0, 1, 2]
thresholds = [1e-2, 1e-6]

[problem]
kind = "linear-lsq"
m = 12
n = 20
kappa = 20.0

[method.gd]
alpha = 2.5e-3

[method.spgd]
alpha = 0.05
"#;

pub fn run_example() -> spgd::Result<()> {
    let cfg = RunConfig::parse(CONFIG)?;
    cfg.validate()?;
    let out = std::env::temp_dir().join(format!("spgd-demo-{}", std::process::id()));
    let (summary, traces) = execute(&cfg, &out, &mut |t| {
        println!(
            "{:<6} seed {} final loss {:.3e}",
            t.method.as_str(),
            t.seed,
            t.final_loss().unwrap()
        );
    })?;
    write_median_trace(&out, &cfg.run.id, &traces)?;
    println!("\n{}", milestone_table(&summary, &cfg.run.thresholds));
    println!("config hash {}", summary.config_hash);
    println!("outputs in {}", out.display());
    std::fs::remove_dir_all(&out).ok();
    Ok(())
}

#[allow(dead_code)]
fn main() -> spgd::Result<()> {
    run_example()
}
