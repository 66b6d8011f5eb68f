//! Writing the glued form and its error density to the binary field format
//! and reading them back.

use kummer_k3::kummer::{read_field, sidecar_path, write_field, FieldData, GluedData, GluedModel, TorusGrid};

fn main() -> kummer_k3::Result<()> {
    let grid = TorusGrid::new(8)?;
    let model = GluedModel::new(0.01, 0.24)?;
    let data = GluedData::new(model, &grid)?;
    let dir = std::env::temp_dir().join("kummer-k3-field-io");
    std::fs::create_dir_all(&dir)?;

    let omega_path = dir.join("omega0.kumf");
    write_field(&omega_path, &model, data.lambda, grid.n(), &FieldData::Field11(data.omega0.values().to_vec()))?;
    let ea_path = dir.join("ea.kumf");
    write_field(&ea_path, &model, data.lambda, grid.n(), &FieldData::Scalar(data.ea.clone()))?;

    let (header, back) = read_field(&omega_path)?;
    println!("{header:?}");
    println!("round trip exact: {}", back == FieldData::Field11(data.omega0.values().to_vec()));
    println!("sidecar: {}", std::fs::read_to_string(sidecar_path(&ea_path))?);
    Ok(())
}
