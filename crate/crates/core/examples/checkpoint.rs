//! Saves a model, reads it back and warm-starts a differently sized
//! vocabulary from it.

use seqrec::model::{init_params, load_checkpoint, save_checkpoint, InitMode, ModelConfig};

fn main() -> seqrec::Result<()> {
    let config = ModelConfig::new(2, 32, 4, 20, 102);
    let params = init_params(&config, 1, InitMode::ScratchAll, None)?;
    let path = std::env::temp_dir().join("seqrec-example.srkd");
    save_checkpoint(&params, &config, &path)?;
    println!("{} bytes, {} parameters", std::fs::metadata(&path)?.len(), params.parameter_count());

    let (loaded, loaded_cfg) = load_checkpoint(&path)?;
    assert_eq!(loaded_cfg, config);
    assert_eq!(loaded.tensors(), params.tensors());
    for (name, t) in loaded.names().iter().zip(loaded.tensors()).take(5) {
        println!("{name:<32} {:?}", t.shape());
    }

    // A grown vocabulary keeps the rows it shares with the checkpoint.
    let bigger = ModelConfig { vocab_size: 120, ..config };
    let warm = init_params(&bigger, 2, InitMode::FromCheckpoint, Some(&loaded))?;
    assert_eq!(warm.tensors()[0].row(50), loaded.tensors()[0].row(50));
    println!("warm start with vocabulary {}", bigger.vocab_size);
    Ok(())
}
