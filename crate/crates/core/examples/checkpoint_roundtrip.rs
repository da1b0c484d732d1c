//! Saves a model, inspects the checkpoint header and loads it back.
//!
//!     cargo run --example checkpoint_roundtrip

use stlstm::model::checkpoint::{from_bytes, read_header, to_bytes};
use stlstm::{ModelConfig, StLstm};

fn main() -> stlstm::Result<()> {
    let model = StLstm::new(ModelConfig::default(), 3)?;
    let bytes = to_bytes(&model, serde_json::json!({ "note": "untrained" }))?;
    let (header, payload) = read_header(&bytes)?;
    println!(
        "{} v{}: {} tensors, {} scalars, {} payload bytes",
        header.format,
        header.version,
        header.params.len(),
        model.params.num_scalars(),
        payload.len()
    );
    for p in header.params.iter().take(5) {
        println!("  {:<20} {:?}", p.name, p.shape);
    }
    let (back, meta) = from_bytes(&bytes)?;
    assert_eq!(back.params.tensors(), model.params.tensors());
    println!("reloaded, meta = {meta}");
    Ok(())
}
