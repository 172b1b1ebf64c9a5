//! Draw samples from a benchmark system, write them in each payload format
//! and read them back.
//!
//!     cargo run --release --example generate_dataset [out_dir]

use std::path::PathBuf;

use oinfo::data_io::{self, PayloadFormat};
use oinfo::math::RngStream;
use oinfo::systems::{SystemKind, SystemSpec, Transform};

fn main() -> oinfo::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("oinfo-generate"));
    std::fs::create_dir_all(&dir).map_err(|e| oinfo::Error::io(&dir, e))?;

    let spec = SystemSpec::new(SystemKind::Synergistic { n_vars: 4, dim: 2, sigma: 0.5 }).with_transform(Transform::HalfCube);
    let data = spec.generate(2_000, &mut RngStream::new(11, 0))?;
    println!("{} rows, partition {:?}", data.n_samples(), data.partition.dims());

    for (format, name) in [
        (PayloadFormat::Csv, "csv"),
        (PayloadFormat::F32le, "f32"),
        (PayloadFormat::F64le, "f64"),
    ] {
        let header = dir.join(format!("synergy_{name}.json"));
        let payload = data_io::save(&data, &header, format, None)?;
        let back = data_io::load(&header, None)?;
        let max_diff = (&back.samples - &data.samples).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
        println!("{name:>4}: {} (max round-trip error {max_diff:.1e})", payload.display());
    }

    let (std_data, record) = data_io::standardize(&data)?;
    let col0 = std_data.samples.column(0);
    println!(
        "standardized column 0: mean {:.1e}, var {:.4} (original scale {:.4})",
        col0.mean().unwrap_or(0.0),
        col0.var(0.0),
        record.scale[0]
    );
    Ok(())
}
