//! The file-driven workflow: write a CSV, point a TOML configuration at it,
//! then train and estimate through the same entry points the CLI uses.
//!
//!     cargo run --release --example dataset_pipeline

use oinfo::data_io::{self, PayloadFormat};
use oinfo::experiment::{cmd_estimate, cmd_train, ExperimentConfig, ScoreChoice};
use oinfo::math::RngStream;
use oinfo::systems::{SystemKind, SystemSpec};

fn main() -> oinfo::Result<()> {
    let dir = std::env::temp_dir().join("oinfo-pipeline");
    std::fs::create_dir_all(&dir).map_err(|e| oinfo::Error::io(&dir, e))?;

    let spec = SystemSpec::new(SystemKind::Redundant { n_vars: 3, dim: 1, sigma: 0.5 });
    let data = spec.generate(20_000, &mut RngStream::new(5, 0))?;
    let columns = Some(vec!["a".into(), "b".into(), "c".into()]);
    let header = dir.join("measurements.json");
    data_io::save(&data, &header, PayloadFormat::Csv, columns)?;

    let toml = format!(
        r#"
output_dir = "{out}"

[dataset]
path = "{path}"

[train]
n_iterations = 1500
learning_rate = 1e-3

[estimate]
mc_steps = 10
seeds = [0, 1]
"#,
        out = dir.join("run").display(),
        path = header.display(),
    );
    let cfg = ExperimentConfig::from_toml(&toml)?;
    let (_, outputs) = cmd_train(&cfg)?;
    println!("trained, final loss {:.4}", outputs.final_loss);

    let report = cmd_estimate(&cfg, &ScoreChoice::Checkpoint(outputs.checkpoint))?;
    report.save(&dir.join("run/report.json"))?;
    let m = report.measures.expect("estimate reports measures");
    println!(
        "omega {:.4} +- {:.4} (tc {:.4}, dtc {:.4}); report in {}",
        m.o_info.value,
        m.o_info.std_error,
        m.tc.value,
        m.dtc.value,
        dir.join("run").display()
    );
    Ok(())
}
