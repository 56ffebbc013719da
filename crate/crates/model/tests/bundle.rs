mod common;

use common::*;
use pcgen_core::PartVocabulary;
use pcgen_model::*;
use pcgen_nn::{encode_checkpoint, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn checkpoint_round_trips_bit_exactly() {
    let model = tiny_model(1, 20);
    let bytes = model.to_bytes().unwrap();
    let back = LatentModel::from_bytes(&bytes).unwrap();
    assert_eq!(back, model);
    assert_eq!(back.to_bytes().unwrap(), bytes);
    assert_eq!(back.hash().unwrap(), model.hash().unwrap());
    assert_eq!(model.hash().unwrap().len(), 64);

    let path = std::env::temp_dir().join(format!("pcgen-bundle-{}.slnk", std::process::id()));
    model.save(&path).unwrap();
    assert_eq!(LatentModel::load(&path).unwrap(), model);
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn hash_tracks_every_parameter() {
    let model = tiny_model(2, 20);
    let mut other = model.clone();
    other.diffusion.as_mut().unwrap().h_norm.mean.data_mut()[0] += 1e-12;
    assert_ne!(other.hash().unwrap(), model.hash().unwrap());
}

#[test]
fn stage_one_checkpoint_has_no_diffusion() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let vae = Vae::new(vae_config(), &mut rng).unwrap();
    let model = LatentModel::new(PartVocabulary::anonymous(PARTS).unwrap(), vae).unwrap();
    let back = LatentModel::from_bytes(&model.to_bytes().unwrap()).unwrap();
    assert!(back.diffusion.is_none());
    assert!(matches!(back.diffusion(), Err(ModelError::Checkpoint(_))));
}

#[test]
fn mismatched_parts_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let vae = Vae::new(vae_config(), &mut rng).unwrap();
    assert!(LatentModel::new(PartVocabulary::anonymous(2).unwrap(), vae).is_err());
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let model = tiny_model(5, 20);
    let bytes = model.to_bytes().unwrap();
    assert!(LatentModel::from_bytes(&bytes[..bytes.len() / 2]).is_err());

    let meta = Tensor::vector(vec![300.0, 1.0]);
    let bad = encode_checkpoint(std::iter::once(("meta.json", &meta)));
    assert!(matches!(LatentModel::from_bytes(&bad), Err(ModelError::Checkpoint(_))));

    let junk = Tensor::vector(b"{\"format\":\"x\"}".iter().map(|&b| f64::from(b)).collect());
    let bad = encode_checkpoint(std::iter::once(("meta.json", &junk)));
    assert!(LatentModel::from_bytes(&bad).is_err());

    let none = encode_checkpoint(std::iter::empty::<(&str, &Tensor)>());
    assert!(matches!(LatentModel::from_bytes(&none), Err(ModelError::Checkpoint(_))));
}

#[test]
fn reconstruction_keeps_labels_and_shape() {
    let model = tiny_model(6, 20);
    let cloud = random_cloud(&mut ChaCha8Rng::seed_from_u64(6), 9);
    let rec = model.reconstruct(&cloud).unwrap();
    assert_eq!(rec.labels(), cloud.labels());
    assert_eq!(rec.len(), 9);
    assert_eq!(rec, model.reconstruct(&cloud).unwrap());
}
