//! Saves a model to a checkpoint file, restores it into a differently
//! initialised model and confirms both give bit-identical outputs. Also
//! shows that a checkpoint from the wrong architecture is rejected.

use mtad::model::{load_checkpoint, load_into, save_checkpoint, LstmAutoencoder, ModelConfig, MultiTaskModel};
use mtad::numeric::{Array, SeededRng};

fn main() -> mtad::Result<()> {
    let dir = std::env::temp_dir().join("mtad-checkpoint-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("model.ckpt");

    let config = ModelConfig {
        hidden_size: 16,
        ..ModelConfig::default()
    };
    let model = MultiTaskModel::<f32>::new(config.clone(), &mut SeededRng::new(1))?;
    save_checkpoint(&model, &path)?;
    let stored = load_checkpoint(&path)?;
    println!("{} holds {} tensors ({} bytes)", path.display(), stored.len(), std::fs::metadata(&path)?.len());

    let mut other = MultiTaskModel::<f32>::new(config.clone(), &mut SeededRng::new(2))?;
    let mut rng = SeededRng::new(3);
    let x = Array::new(&[25, 6], (0..150).map(|_| rng.uniform(0.0, 1.0) as f32).collect())?;
    let before = other.infer(&x)?.0 == model.infer(&x)?.0;
    load_into(&mut other, &path)?;
    let (ra, sa) = model.infer(&x)?;
    let (rb, sb) = other.infer(&x)?;
    let same_bits = ra.data().iter().zip(rb.data()).all(|(a, b)| a.to_bits() == b.to_bits());
    println!("outputs equal before restore: {before}; after: {}", same_bits && sa == sb);

    let mut wrong = LstmAutoencoder::<f32>::new(config, "ae", &mut SeededRng::new(4))?;
    match load_into(&mut wrong, &path) {
        Ok(()) => println!("unexpectedly loaded into an autoencoder"),
        Err(e) => println!("loading into an autoencoder fails: {e}"),
    }
    Ok(())
}
